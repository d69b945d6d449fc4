"""Progressive relaxation controller."""

from __future__ import annotations

from dataclasses import dataclass, field

from .ac import AC_TIMEOUT_S, solve_ac_opf
from .dc import solve_dc_opf
from .network import DEFAULT_PLAN
from .shunts import inject_shunts


@dataclass
class LadderReport:
    attempts: list = field(default_factory=list)
    dc_level: str | None = None
    ac_level: str | None = None
    ac1: bool = False
    shunts_added: dict = field(default_factory=dict)

    def record(self, sol):
        self.attempts.append(
            {
                "formulation": sol.formulation,
                "level": sol.level,
                "ac1": sol.ac1,
                "status": sol.status,
                "objective": sol.objective if sol.ok else None,
                "iterations": sol.iterations,
                "message": str(sol.message),
            }
        )

    def as_dict(self):
        return {
            "attempts": self.attempts,
            "dc_level": self.dc_level,
            "ac_level": self.ac_level,
            "ac1": self.ac1,
            "shunts_added": len(self.shunts_added),
        }


def ac_schedule(plan=DEFAULT_PLAN):
    """(level, ac1) pairs tried in order: plain L0, L0+AC1, then L1.. with AC1."""
    names = plan.names
    return [(names[0], False), (names[0], True)] + [(n, True) for n in names[1:]]


def progressive_solve(net, plan=DEFAULT_PLAN, run_ac=True, timeout_s=AC_TIMEOUT_S, max_it=10000):
    """DC ladder, shunt injection from the DC dispatch, then the AC ladder.

    Returns ``(dc_solution, ac_solution, report)``; either solution may be
    None when every level fails.
    """
    report = LadderReport()
    dc = None
    for name in plan.names:
        sol = solve_dc_opf(net, name)
        report.record(sol)
        if sol.ok:
            dc, report.dc_level = sol, name
            break
    if dc is None or not run_ac:
        return dc, None, report

    shunted, added = inject_shunts(net, dc)
    report.shunts_added = added
    ac = None
    for name, ac1 in ac_schedule(plan):
        sol = solve_ac_opf(shunted, name, ac1=ac1, warm_start=dc, timeout_s=timeout_s, max_it=max_it)
        report.record(sol)
        if sol.ok:
            ac, report.ac_level, report.ac1 = sol, name, ac1
            break
    return dc, ac, report

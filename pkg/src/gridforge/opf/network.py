"""Per-unit network arrays, the MATPOWER-structured model file, and relaxation levels."""

from __future__ import annotations

import copy
import json
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from ..parameters import ZERO_MARGINAL_COST

S_BASE = 100.0
PQ, PV, REF = 1, 2, 3


@dataclass
class PuNetwork:
    """Array form of a network on a 100 MVA base.

    Bus quantities are indexed 0..n-1; ``bus_ids`` maps back to model ids.
    Powers are MW/100, angle limits are radians, costs are $/h with power
    in per unit.
    """

    bus_ids: np.ndarray
    bus_type: np.ndarray
    pd: np.ndarray
    qd: np.ndarray
    gs: np.ndarray
    bs: np.ndarray
    vmin: np.ndarray
    vmax: np.ndarray
    base_kv: np.ndarray
    br_ids: np.ndarray
    f: np.ndarray
    t: np.ndarray
    r: np.ndarray
    x: np.ndarray
    b: np.ndarray
    rate: np.ndarray  # inf = unconstrained
    angmin: np.ndarray
    angmax: np.ndarray
    is_transformer: np.ndarray
    gen_ids: np.ndarray
    gen_bus: np.ndarray
    pmin: np.ndarray
    pmax: np.ndarray
    qmin: np.ndarray
    qmax: np.ndarray
    c2: np.ndarray
    c1: np.ndarray
    c0: np.ndarray
    pg0: np.ndarray
    gen_fuel: list
    dc_ids: np.ndarray = field(default_factory=lambda: np.zeros(0, int))
    dc_f: np.ndarray = field(default_factory=lambda: np.zeros(0, int))
    dc_t: np.ndarray = field(default_factory=lambda: np.zeros(0, int))
    dc_pmax: np.ndarray = field(default_factory=lambda: np.zeros(0))
    dc_loss0: np.ndarray = field(default_factory=lambda: np.zeros(0))
    dc_loss1: np.ndarray = field(default_factory=lambda: np.zeros(0))
    dc_qmin: np.ndarray = field(default_factory=lambda: np.zeros(0))
    dc_qmax: np.ndarray = field(default_factory=lambda: np.zeros(0))
    base_mva: float = S_BASE
    load_cap_frac: float = 1.0
    level: str = "L0"
    ac1: bool = False
    diagnostics: Counter = field(default_factory=Counter)

    @property
    def n_bus(self):
        return len(self.bus_ids)

    @property
    def n_branch(self):
        return len(self.br_ids)

    @property
    def n_gen(self):
        return len(self.gen_ids)

    @property
    def n_dc(self):
        return len(self.dc_ids)

    @property
    def ref(self):
        return int(np.flatnonzero(self.bus_type == REF)[0])

    @property
    def shedding(self):
        return self.load_cap_frac < 1.0

    def copy(self):
        return copy.deepcopy(self)

    def protected(self):
        """Generators exempt from decommitment (nuclear and renewables)."""
        return np.array([fuel in ZERO_MARGINAL_COST for fuel in self.gen_fuel], dtype=bool)


def _arr(values, dtype=float):
    return np.asarray(list(values), dtype=dtype)


def to_per_unit(model, s_base=S_BASE):
    """Array form of a parameterized NetworkModel.

    Every generator is carried (merit-order commitment only seeds the
    dispatch); the per-hour available capacity bounds P_max when it is set.
    """
    buses = sorted(model.buses, key=lambda b: b.id)
    pos = {b.id: i for i, b in enumerate(buses)}
    gens = sorted(model.generators, key=lambda g: g.id)
    gen_buses = {g.bus for g in gens}
    bus_type = np.array(
        [REF if b.is_slack else (PV if b.id in gen_buses else PQ) for b in buses], dtype=int
    )
    if (bus_type == REF).sum() != 1:
        raise ValueError("network must have exactly one slack bus")
    branches = sorted(model.branches, key=lambda br: br.id)
    links = sorted(model.dclinks, key=lambda d: d.id)
    ang = np.radians(_arr(br.angle_limit_deg for br in branches))
    pmax = _arr(
        (g.available_mw if g.available_mw is not None else g.p_max_mw) / s_base for g in gens
    )
    pmin = np.minimum(_arr(g.p_min_mw / s_base for g in gens), pmax)
    return PuNetwork(
        bus_ids=_arr((b.id for b in buses), int),
        bus_type=bus_type,
        pd=_arr(b.p_load_mw / s_base for b in buses),
        qd=_arr(b.q_load_mvar / s_base for b in buses),
        gs=np.zeros(len(buses)),
        bs=_arr(b.shunt_mvar / s_base for b in buses),
        vmin=_arr(b.v_min_pu for b in buses),
        vmax=_arr(b.v_max_pu for b in buses),
        base_kv=_arr(b.base_kv for b in buses),
        br_ids=_arr((br.id for br in branches), int),
        f=_arr((pos[br.from_bus] for br in branches), int),
        t=_arr((pos[br.to_bus] for br in branches), int),
        r=_arr(br.r_pu for br in branches),
        x=_arr(br.x_pu for br in branches),
        b=_arr(br.b_pu for br in branches),
        rate=_arr(br.rate_mva / s_base if br.rate_mva > 0 else math.inf for br in branches),
        angmin=-ang,
        angmax=ang,
        is_transformer=_arr((br.is_transformer for br in branches), bool),
        gen_ids=_arr((g.id for g in gens), int),
        gen_bus=_arr((pos[g.bus] for g in gens), int),
        pmin=pmin,
        pmax=pmax,
        qmin=_arr(g.q_min_mvar / s_base for g in gens),
        qmax=_arr(g.q_max_mvar / s_base for g in gens),
        c2=_arr(g.c2 * s_base**2 for g in gens),
        c1=_arr(g.c1 * s_base for g in gens),
        c0=_arr(g.c0 for g in gens),
        pg0=_arr(g.p_set_mw / s_base for g in gens),
        gen_fuel=[g.fuel_display or "Unknown" for g in gens],
        dc_ids=_arr((d.id for d in links), int),
        dc_f=_arr((pos[d.from_bus] for d in links), int),
        dc_t=_arr((pos[d.to_bus] for d in links), int),
        dc_pmax=_arr(d.p_max_mw / s_base for d in links),
        dc_loss0=_arr(d.loss_l0_mw / s_base for d in links),
        dc_loss1=_arr(d.loss_l1 for d in links),
        dc_qmin=_arr(d.q_limits[0] / s_base for d in links),
        dc_qmax=_arr(d.q_limits[1] / s_base for d in links),
        base_mva=s_base,
    )


# ---------------------------------------------------------------------------
# model file

COLUMNS = {
    "bus": ["bus_i", "type", "Pd", "Qd", "Gs", "Bs", "area", "Vm", "Va", "baseKV", "zone", "Vmax", "Vmin"],
    "branch": ["fbus", "tbus", "r", "x", "b", "rateA", "rateB", "rateC", "ratio", "angle", "status", "angmin", "angmax"],
    "gen": ["bus", "Pg", "Qg", "Qmax", "Qmin", "Vg", "mBase", "status", "Pmax", "Pmin"],
    "gencost": ["model", "startup", "shutdown", "ncost", "c2", "c1", "c0"],
    "dcline": ["fbus", "tbus", "status", "Pf", "Pt", "Qf", "Qt", "Vf", "Vt", "Pmin", "Pmax",
               "QminF", "QmaxF", "QminT", "QmaxT", "loss0", "loss1"],
    "shunt": ["bus", "gs", "bs"],
    "load": ["bus", "pd", "qd"],
}


def _num(v):
    v = float(v)
    if math.isinf(v):
        return 0.0  # MATPOWER: rate 0 means unconstrained
    return v


def network_to_matpower(net):
    """Plain-dict model file; all quantities per unit, angles in degrees."""
    ids = net.bus_ids
    bus = [
        [int(ids[i]), int(net.bus_type[i]), _num(net.pd[i]), _num(net.qd[i]), _num(net.gs[i]), _num(net.bs[i]),
         1, 1.0, 0.0, _num(net.base_kv[i]), 1, _num(net.vmax[i]), _num(net.vmin[i])]
        for i in range(net.n_bus)
    ]
    branch = [
        [int(ids[net.f[k]]), int(ids[net.t[k]]), _num(net.r[k]), _num(net.x[k]), _num(net.b[k]),
         _num(net.rate[k]), _num(net.rate[k]), _num(net.rate[k]), 1.0 if net.is_transformer[k] else 0.0, 0.0, 1,
         math.degrees(net.angmin[k]), math.degrees(net.angmax[k])]
        for k in range(net.n_branch)
    ]
    gen = [
        [int(ids[net.gen_bus[g]]), _num(net.pg0[g]), 0.0, _num(net.qmax[g]), _num(net.qmin[g]), 1.0,
         net.base_mva, 1, _num(net.pmax[g]), _num(net.pmin[g])]
        for g in range(net.n_gen)
    ]
    gencost = [[2, 0.0, 0.0, 3, _num(net.c2[g]), _num(net.c1[g]), _num(net.c0[g])] for g in range(net.n_gen)]
    dcline = [
        [int(ids[net.dc_f[d]]), int(ids[net.dc_t[d]]), 1, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0,
         -_num(net.dc_pmax[d]), _num(net.dc_pmax[d]), _num(net.dc_qmin[d]), _num(net.dc_qmax[d]),
         _num(net.dc_qmin[d]), _num(net.dc_qmax[d]), _num(net.dc_loss0[d]), _num(net.dc_loss1[d])]
        for d in range(net.n_dc)
    ]
    shunt = [[int(ids[i]), _num(net.gs[i]), _num(net.bs[i])] for i in range(net.n_bus) if net.gs[i] or net.bs[i]]
    load = [[int(ids[i]), _num(net.pd[i]), _num(net.qd[i])] for i in range(net.n_bus) if net.pd[i] or net.qd[i]]
    return {
        "baseMVA": net.base_mva,
        "bus": bus,
        "branch": branch,
        "gen": gen,
        "gencost": gencost,
        "dcline": dcline,
        "shunt": shunt,
        "load": load,
        "columns": COLUMNS,
        "ids": {
            "branch": [int(v) for v in net.br_ids],
            "gen": [int(v) for v in net.gen_ids],
            "dcline": [int(v) for v in net.dc_ids],
        },
        "gen_fuel": list(net.gen_fuel),
    }


def matpower_to_network(data):
    """Inverse of :func:`network_to_matpower`."""
    cols = {k: {c: i for i, c in enumerate(v)} for k, v in COLUMNS.items()}
    bus = np.array(data["bus"], dtype=float).reshape(-1, len(COLUMNS["bus"]))
    br = np.array(data["branch"], dtype=float).reshape(-1, len(COLUMNS["branch"]))
    gen = np.array(data["gen"], dtype=float).reshape(-1, len(COLUMNS["gen"]))
    cost = np.array(data["gencost"], dtype=float).reshape(-1, len(COLUMNS["gencost"]))
    dc = np.array(data.get("dcline", []), dtype=float).reshape(-1, len(COLUMNS["dcline"]))
    ids = bus[:, 0].astype(int)
    pos = {int(b): i for i, b in enumerate(ids)}
    n = len(ids)
    pd, qd, gs, bs = np.zeros(n), np.zeros(n), np.zeros(n), np.zeros(n)
    for row in data.get("load", []):
        pd[pos[int(row[0])]] += row[1]
        qd[pos[int(row[0])]] += row[2]
    for row in data.get("shunt", []):
        gs[pos[int(row[0])]] += row[1]
        bs[pos[int(row[0])]] += row[2]
    c = cols["branch"]
    rate = br[:, c["rateA"]].copy()
    rate[rate == 0] = math.inf
    cg, cc, cd = cols["gen"], cols["gencost"], cols["dcline"]
    id_block = data.get("ids", {})
    return PuNetwork(
        bus_ids=ids,
        bus_type=bus[:, cols["bus"]["type"]].astype(int),
        pd=pd, qd=qd, gs=gs, bs=bs,
        vmin=bus[:, cols["bus"]["Vmin"]],
        vmax=bus[:, cols["bus"]["Vmax"]],
        base_kv=bus[:, cols["bus"]["baseKV"]],
        br_ids=np.array(id_block.get("branch", range(1, len(br) + 1)), dtype=int),
        f=np.array([pos[int(v)] for v in br[:, c["fbus"]]], dtype=int),
        t=np.array([pos[int(v)] for v in br[:, c["tbus"]]], dtype=int),
        r=br[:, c["r"]], x=br[:, c["x"]], b=br[:, c["b"]], rate=rate,
        angmin=np.radians(br[:, c["angmin"]]), angmax=np.radians(br[:, c["angmax"]]),
        is_transformer=br[:, c["ratio"]] != 0,
        gen_ids=np.array(id_block.get("gen", range(1, len(gen) + 1)), dtype=int),
        gen_bus=np.array([pos[int(v)] for v in gen[:, cg["bus"]]], dtype=int),
        pmin=gen[:, cg["Pmin"]], pmax=gen[:, cg["Pmax"]],
        qmin=gen[:, cg["Qmin"]], qmax=gen[:, cg["Qmax"]],
        c2=cost[:, cc["c2"]], c1=cost[:, cc["c1"]], c0=cost[:, cc["c0"]],
        pg0=gen[:, cg["Pg"]],
        gen_fuel=list(data.get("gen_fuel", ["Unknown"] * len(gen))),
        dc_ids=np.array(id_block.get("dcline", range(1, len(dc) + 1)), dtype=int),
        dc_f=np.array([pos[int(v)] for v in dc[:, cd["fbus"]]], dtype=int),
        dc_t=np.array([pos[int(v)] for v in dc[:, cd["tbus"]]], dtype=int),
        dc_pmax=dc[:, cd["Pmax"]], dc_loss0=dc[:, cd["loss0"]], dc_loss1=dc[:, cd["loss1"]],
        dc_qmin=dc[:, cd["QminF"]], dc_qmax=dc[:, cd["QmaxF"]],
        base_mva=float(data["baseMVA"]),
    )


def write_model_json(net, path):
    with open(path, "w") as fh:
        json.dump(network_to_matpower(net), fh, indent=1, sort_keys=True)
        fh.write("\n")


def read_model_json(path):
    with open(path) as fh:
        return matpower_to_network(json.load(fh))


# ---------------------------------------------------------------------------
# relaxation ladder


@dataclass(frozen=True)
class RelaxationLevel:
    name: str
    angle_deg: float | None  # None keeps per-branch defaults
    thermal_mult: float
    v_bounds: tuple | None
    q_mult: float
    load_cap_frac: float
    pmin_mult: float


AC1 = RelaxationLevel("AC1", None, 1.0, (0.90, 1.10), 1.5, 1.0, 1.0)


@dataclass(frozen=True)
class RelaxationPlan:
    levels: tuple
    ac1: RelaxationLevel = AC1

    @classmethod
    def default(cls):
        return cls(
            levels=(
                RelaxationLevel("L0", None, 1.0, None, 1.0, 1.0, 1.0),
                RelaxationLevel("L1", 60.0, 1.0, None, 1.0, 1.0, 1.0),
                RelaxationLevel("L2", 60.0, 1.2, None, 1.0, 1.0, 1.0),
                RelaxationLevel("L3", 90.0, 1.5, None, 1.0, 1.0, 0.5),
                RelaxationLevel("L4", 90.0, 1.5, None, 1.0, 0.7, 0.0),
                RelaxationLevel("L5", 90.0, math.inf, (0.85, 1.15), 2.0, 0.7, 0.0),
            )
        )

    def __getitem__(self, name):
        for lv in self.levels:
            if lv.name == name:
                return lv
        raise KeyError(name)

    @property
    def names(self):
        return [lv.name for lv in self.levels]


DEFAULT_PLAN = RelaxationPlan.default()


def apply_relaxation(net, level, ac1=False, plan=DEFAULT_PLAN):
    """Copy of ``net`` with the bounds of ``level`` (and optionally AC1) applied.

    Each bound takes the looser of the base value and the layer value, so
    the feasible set only grows along the ladder.
    """
    lv = plan[level] if isinstance(level, str) else level
    out = net.copy()
    out.level, out.ac1 = lv.name, bool(ac1)
    if lv.angle_deg is not None:
        lim = math.radians(lv.angle_deg)
        out.angmax = np.maximum(out.angmax, lim)
        out.angmin = np.minimum(out.angmin, -lim)
    out.rate = out.rate * lv.thermal_mult
    layers = [lv] + ([plan.ac1] if ac1 else [])
    for layer in layers:
        if layer.v_bounds is not None:
            out.vmin = np.minimum(out.vmin, layer.v_bounds[0])
            out.vmax = np.maximum(out.vmax, layer.v_bounds[1])
    q_mult = max(layer.q_mult for layer in layers)
    # scale outward so a positive lower bound is never tightened
    out.qmax = np.maximum(out.qmax, out.qmax * q_mult)
    out.qmin = np.minimum(out.qmin, out.qmin * q_mult)
    out.dc_qmax = np.maximum(out.dc_qmax, out.dc_qmax * q_mult)
    out.dc_qmin = np.minimum(out.dc_qmin, out.dc_qmin * q_mult)
    out.pmin = out.pmin * lv.pmin_mult
    out.load_cap_frac = lv.load_cap_frac
    if lv.name != "L5":
        enforce_impedance_consistency(out)
    decommit_generators(out)
    return out


def enforce_impedance_consistency(net):
    """Cap each rating so the DC angle at rated flow stays within 90 degrees."""
    lim = (math.pi / 2) / np.abs(net.x)
    over = net.rate * np.abs(net.x) > math.pi / 2
    net.rate = np.where(over, lim, net.rate)
    net.diagnostics["ratings_capped"] += int(over.sum())
    return net


def decommit_generators(net):
    """Zero P_min of the costliest unprotected units until P_min fits under demand."""
    protected = net.protected()
    demand = float(net.pd.sum())
    order = sorted(range(net.n_gen), key=lambda g: (-net.c1[g], net.pmax[g], net.gen_ids[g]))
    for g in order:
        if net.pmin.sum() <= demand:
            break
        if protected[g] or net.pmin[g] <= 0:
            continue
        net.pmin[g] = 0.0
        net.diagnostics["decommitted"] += 1
    if net.pmin.sum() > demand:
        net.diagnostics["decommitment_exhausted"] += 1
    return net

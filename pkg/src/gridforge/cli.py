"""Command-line entry point: ``gridforge build | solve | report``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .opf import read_model_json
from .pipeline import (
    EXIT_IO,
    EXIT_OK,
    EXIT_SOLVER,
    EXIT_VALIDATION,
    PipelineError,
    RunConfig,
    plan_up_to,
    run_pipeline,
    solution_record,
    solve_network,
    write_json,
)


def _build(args):
    try:
        config = RunConfig(
            inputs=args.state,
            fixture_dir=args.fixtures,
            out_dir=args.out,
            hour=args.hour,
            date=args.date,
            multi_state=True if args.multi_state else None,
            states=args.state_code or [],
            max_level=args.max_level,
            run_ac=not args.dc_only,
            solve=not args.no_solve,
        )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        result = run_pipeline(config)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    rep = result["report"]
    print(f"model: {rep['model']['buses']} buses, {rep['model']['branches']} branches, "
          f"{rep['model']['generators']} generators -> {args.out}")
    if "opf" in rep:
        print(f"dc level {rep['opf']['dc_level']}, ac level {rep['opf']['ac_level']}")
    return EXIT_OK


def _solve(args):
    try:
        net = read_model_json(args.model)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError) as exc:
        print(f"error: invalid model file: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    out = Path(args.out) if args.out else Path(args.model).parent
    out.mkdir(parents=True, exist_ok=True)
    dc, ac, ladder = solve_network(net, plan_up_to(args.max_level), run_ac=not args.dc_only)
    write_json(out / "solution_dc.json", solution_record(dc, net))
    if not args.dc_only:
        write_json(out / "solution_ac.json", solution_record(ac, net, ladder))
    for a in ladder.attempts:
        print(f"{a['formulation']} {a['level']}{'+AC1' if a['ac1'] else ''}: {a['status']}")
    if dc is None or (not args.dc_only and ac is None):
        return EXIT_SOLVER
    return EXIT_OK


def _report(args):
    path = Path(args.run) / "report.json"
    try:
        rep = json.loads(path.read_text())
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    if "error" in rep:
        print(f"failed at {rep['error']['stage']}: {rep['error']['message']}")
    for key in ("ingest", "model"):
        if key in rep:
            print(key + ": " + ", ".join(f"{k}={v}" for k, v in rep[key].items()))
    for row in rep.get("coverage", []):
        flag = f"  [{row['flag']}]" if row["flag"] else ""
        print(f"coverage {row['voltage_kv']:g} kV: {row['ratio']:.2f}x{flag}")
    if "opf" in rep:
        for a in rep["opf"]["attempts"]:
            print(f"{a['formulation']} {a['level']}{'+AC1' if a['ac1'] else ''}: {a['status']}")
    for name in ("solution_dc.json", "solution_ac.json"):
        p = Path(args.run) / name
        if p.exists():
            sol = json.loads(p.read_text())
            if sol.get("status") not in (None, "failed"):
                print(f"{name}: {sol['objective_usd_per_hr']:.2f} $/h, loss {sol['loss_pct']:.2f}%")
    return EXIT_OK


def make_parser():
    p = argparse.ArgumentParser(prog="gridforge", description="Transmission models and OPF from map extracts.")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="run the full pipeline")
    b.add_argument("--state", nargs="+", required=True, help="GeoJSON extract(s)")
    b.add_argument("--fixtures", required=True, help="fixture directory")
    b.add_argument("--hour", type=int, default=16)
    b.add_argument("--date", default=None, help="YYYY-MM-DD")
    b.add_argument("--multi-state", action="store_true")
    b.add_argument("--state-code", nargs="+", help="state codes (default: file stems)")
    b.add_argument("--out", required=True)
    b.add_argument("--dc-only", action="store_true")
    b.add_argument("--no-solve", action="store_true")
    b.add_argument("--max-level", default="L5")
    b.set_defaults(func=_build)

    s = sub.add_parser("solve", help="solve a model file")
    s.add_argument("--model", required=True)
    s.add_argument("--dc-only", action="store_true")
    s.add_argument("--max-level", default="L5")
    s.add_argument("--out", default=None)
    s.set_defaults(func=_solve)

    r = sub.add_parser("report", help="summarise a run directory")
    r.add_argument("--run", required=True)
    r.set_defaults(func=_report)
    return p


def main(argv=None):
    args = make_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

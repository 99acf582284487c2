"""Command-line driver: run scenarios, harnesses, and exports.

Subcommands: ``validate``, ``run``, ``sweep-eps``, ``check-cd``, and
``density-demo``.  Exit codes: 0 on success, 2 on validation failure,
3 on solver failure.  All CSV reals are written with 17 significant
digits so outputs are bit-identical across reruns on one platform.
"""

from __future__ import annotations

import argparse
import os
import sys as _sys

import numpy as np

from .density import density_study
from .diagnostics import continuous_dependence, eps_sweep
from .mesh import DiscreteSystem
from .scenario import (
    Scenario,
    ScenarioError,
    build_problem,
    load_scenario,
    validate,
)
from .stepper import InfeasibleDataError, StepError, simulate

__all__ = ["main"]


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _write_csv(path: str, header: list[str], rows) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) if isinstance(v, float) else str(v) for v in row) + "\n")


def _snapshot(sys: DiscreteSystem, u, out_dir: str, index: int) -> None:
    dom = sys.domain
    if dom.kind == "interval":
        header = ["x", "u"]
        rows = [(float(x), float(v)) for x, v in zip(dom.coords[:, 0], u.bulk)]
    else:
        header = ["x", "y", "u"]
        rows = [
            (float(x), float(y), float(v))
            for (x, y), v in zip(dom.coords, u.bulk)
        ]
    _write_csv(os.path.join(out_dir, f"snap_bulk_{index:06d}.csv"), header, rows)
    pts = dom.coords[dom.boundary_idx]
    if dom.kind == "interval":
        arc = pts[:, 0]
    else:
        seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        arc = np.concatenate([[0.0], np.cumsum(seg)])
    _write_csv(
        os.path.join(out_dir, f"snap_bnd_{index:06d}.csv"),
        ["s", "u_gamma"],
        [(float(s), float(v)) for s, v in zip(arc, u.bnd)],
    )


def _out_dir(scenario: Scenario, override: str | None) -> str:
    return override or scenario.output.get("dir", "out")


def _cmd_validate(args) -> int:
    scenario = load_scenario(args.scenario)
    errors = validate(scenario)
    if errors:
        for err in errors:
            print(err)
        return 2
    print("scenario is valid")
    return 0


def _cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    errors = validate(scenario)
    if errors:
        for err in errors:
            print(err)
        return 2
    prob = build_problem(scenario)
    try:
        traj = simulate(
            prob.sys, prob.graphs, prob.constraint, prob.perturbation, prob.solver,
            prob.u0, prob.f_of_t,
        )
    except (StepError, InfeasibleDataError) as exc:
        print(f"solver failure: {exc}")
        return 3
    out_dir = _out_dir(scenario, args.out)
    rows = [
        (rec.t, rec.energy, rec.k, rec.lam, rec.residual_bulk, rec.residual_bnd)
        for rec in traj
    ]
    _write_csv(
        os.path.join(out_dir, "series.csv"),
        ["t", "energy", "mass", "lambda", "res_bulk", "res_bnd"],
        rows,
    )
    cadence = int(scenario.output.get("snapshot_every", 0))
    if cadence > 0:
        for m, rec in enumerate(traj):
            if m % cadence == 0 or m == len(traj) - 1:
                _snapshot(prob.sys, rec.u, out_dir, m)
    print(f"wrote {os.path.join(out_dir, 'series.csv')} ({len(traj)} records)")
    return 0


def _cmd_sweep_eps(args) -> int:
    scenario = load_scenario(args.scenario)
    errors = validate(scenario)
    if errors:
        for err in errors:
            print(err)
        return 2
    eps_list = [float(s) for s in args.eps.split(",")]
    try:
        result = eps_sweep(scenario, eps_list)
    except (StepError, InfeasibleDataError) as exc:
        print(f"solver failure: {exc}")
        return 3
    out_dir = _out_dir(scenario, args.out)
    rows = [
        (eps_list[j], eps_list[j + 1], result["d"][j])
        for j in range(len(result["d"]))
    ]
    _write_csv(
        os.path.join(out_dir, "eps_table.csv"), ["eps_a", "eps_b", "d_j"], rows
    )
    mon = result["monitors"]
    cols = list(mon.keys())
    mon_rows = [tuple(mon[c][i] for c in cols) for i in range(len(eps_list))]
    _write_csv(os.path.join(out_dir, "monitors.csv"), cols, mon_rows)
    print(f"wrote {os.path.join(out_dir, 'eps_table.csv')}")
    return 0


def _cmd_check_cd(args) -> int:
    s1 = load_scenario(args.scenario1)
    s2 = load_scenario(args.scenario2)
    bad = validate(s1) + validate(s2)
    if bad:
        for err in bad:
            print(err)
        return 2
    try:
        report = continuous_dependence(s1, s2)
    except ValueError as exc:
        print(f"scenario mismatch: {exc}")
        return 2
    except (StepError, InfeasibleDataError) as exc:
        print(f"solver failure: {exc}")
        return 3
    out_dir = _out_dir(s1, args.out)
    rows = list(zip(report.times, report.lhs, report.rhs))
    _write_csv(os.path.join(out_dir, "cd_report.csv"), ["t", "lhs", "rhs"], rows)
    print(f"constant={_fmt(report.constant)} max_ratio={_fmt(report.max_ratio)}")
    return 0


def _cmd_density_demo(args) -> int:
    scenario = load_scenario(args.scenario)
    errors = validate(scenario)
    if errors:
        for err in errors:
            print(err)
        return 2
    prob = build_problem(scenario)
    n_list = [int(s) for s in args.n.split(",")]
    study = density_study(prob.sys, prob.u0, n_list)
    out_dir = _out_dir(scenario, args.out)
    rows = [
        (
            n,
            study.err_bulk[i],
            study.err_bnd[i],
            study.energy_lhs[i],
            study.energy_rhs,
            study.norm_sq[i],
            study.input_norm_sq,
        )
        for i, n in enumerate(study.n_list)
    ]
    _write_csv(
        os.path.join(out_dir, "density_table.csv"),
        ["n", "err_bulk", "err_bnd", "energy_lhs", "energy_rhs", "norm_sq", "input_norm_sq"],
        rows,
    )
    print(f"wrote {os.path.join(out_dir, 'density_table.csv')}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="acdyn",
        description="constrained bulk/boundary phase-field flow and its checks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate a scenario file")
    p.add_argument("scenario")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("run", help="time-step a scenario and export series/snapshots")
    p.add_argument("scenario")
    p.add_argument("--out", default=None, help="output directory override")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep-eps", help="run a decreasing regularization sweep")
    p.add_argument("scenario")
    p.add_argument("--eps", required=True, help="comma-separated decreasing values")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_sweep_eps)

    p = sub.add_parser("check-cd", help="two-run continuous dependence check")
    p.add_argument("scenario1")
    p.add_argument("scenario2")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_check_cd)

    p = sub.add_parser("density-demo", help="Robin approximation error study")
    p.add_argument("scenario")
    p.add_argument("--n", default="1,4,16,64", help="comma-separated increasing n")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_density_demo)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        for err in exc.errors:
            print(err)
        return 2


if __name__ == "__main__":
    _sys.exit(main())

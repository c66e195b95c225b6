"""Command-line experiment runner with deterministic file outputs.

One invocation runs one experiment over one or more grid resolutions and
writes errors.csv / rates.csv / mass.csv / snapshot dumps plus a JSON
report.  All numbers are formatted with repr-faithful precision so two
runs with the same configuration produce byte-identical CSV files; the
report additionally records wall time, which is the one field excluded
from that reproducibility contract.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import analysis, schemes
from .errors import SolverError
from .problems import make_problem, problem_ids

_EXTENSION_MODES = {"neumann": "neumann_sweep", "exact": "exact_outer"}
_DEFAULTS = {
    "n": "81",
    "order": 3,
    "cfl": 0.5,
    "embedding": "pushforward",
    "extension": "neumann",
    "snapshots": 0,
}


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _parse_config_file(path: str) -> dict[str, str]:
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            if "=" not in s:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {s!r}")
            key, value = s.split("=", 1)
            out[key.strip().replace("-", "_")] = value.strip()
    return out


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="surfband",
        description="Narrow-band solver for conservation laws on implicit surfaces.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one experiment and write its outputs")
    run_p.add_argument("experiment_pos", nargs="?", metavar="EXPERIMENT",
                       help="experiment id (see 'surfband list')")
    run_p.add_argument("--experiment", help="experiment id; overrides the positional")
    run_p.add_argument("--n", help="grid points per axis, comma list for sweeps")
    run_p.add_argument("--order", type=int, choices=(1, 3), help="scheme order")
    run_p.add_argument("--cfl", type=float, help="CFL number in (0, 1]")
    run_p.add_argument("--embedding", choices=("pushforward", "straightforward"))
    run_p.add_argument("--extension", choices=("neumann", "exact"))
    run_p.add_argument("--t-final", dest="t_final", type=float,
                       help="override the experiment's final time")
    run_p.add_argument("--snapshots", type=int,
                       help="number K of output times j*T/K, j=1..K")
    run_p.add_argument("--out", help="output directory (env SURFBAND_OUT if absent)")
    run_p.add_argument("--config", help="key=value file; explicit flags win")

    sub.add_parser("list", help="list the experiment catalog")
    return parser


def _write_snapshot(path: str, setup, values: np.ndarray, t: float) -> None:
    grid, tube = setup.grid, setup.tube
    classes = tube.class_flat[tube.flat]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("dims " + " ".join([str(grid.npts)] * grid.dim) + "\n")
        fh.write("origin " + " ".join([_fmt(grid.origin)] * grid.dim) + "\n")
        fh.write(f"spacing {_fmt(grid.dx)}\n")
        fh.write(f"t {_fmt(t)}\n")
        fh.write(f"points {tube.n_points}\n")
        fh.write("index class value\n")
        for flat, cls, val in zip(tube.flat, classes, values):
            fh.write(f"{flat} {cls} {_fmt(val)}\n")


def _write_mass_csv(directory: str, rows) -> None:
    with open(os.path.join(directory, "mass.csv"), "w", encoding="utf-8") as fh:
        fh.write("t,mass\n")
        for t, mass in rows:
            fh.write(f"{_fmt(t)},{_fmt(mass)}\n")


def _write_error_table(directory: str, rows) -> None:
    with open(os.path.join(directory, "errors.csv"), "w", encoding="utf-8") as fh:
        fh.write("dx,n,l1,l2,linf\n")
        for dx, n, norms in rows:
            fh.write(
                f"{_fmt(dx)},{n},{_fmt(norms['l1'])},{_fmt(norms['l2'])},"
                f"{_fmt(norms['linf'])}\n"
            )
    if len(rows) >= 2:
        dxs = [dx for dx, _, _ in rows]
        with open(os.path.join(directory, "rates.csv"), "w", encoding="utf-8") as fh:
            fh.write("norm,rate\n")
            for norm in ("l1", "l2", "linf"):
                rate = analysis.convergence_rate(dxs, [r[norm] for _, _, r in rows])
                fh.write(f"{norm},{_fmt(rate)}\n")


def _cmd_list() -> int:
    for pid in problem_ids():
        print(f"{pid:5s} {make_problem(pid).title}")
    return 0


def _resolve_run_options(args, parser):
    try:
        file_cfg = _parse_config_file(args.config) if args.config else {}
    except (OSError, ValueError) as exc:
        parser.error(str(exc))

    def pick(flag_value, key):
        if flag_value is not None:
            return flag_value
        if key in file_cfg:
            return file_cfg[key]
        return _DEFAULTS.get(key)

    experiment = args.experiment or args.experiment_pos or file_cfg.get("experiment")
    if not experiment:
        parser.error("an experiment id is required (positional or --experiment)")
    if experiment not in problem_ids():
        parser.error(
            f"unknown experiment {experiment!r}; available: {', '.join(problem_ids())}"
        )

    try:
        n_list = [int(s) for s in str(pick(args.n, "n")).split(",") if s.strip()]
        order = int(pick(args.order, "order"))
        cfl = float(pick(args.cfl, "cfl"))
        snapshots = int(pick(args.snapshots, "snapshots"))
        t_final = pick(args.t_final, "t_final")
        t_final = None if t_final is None else float(t_final)
    except ValueError as exc:
        parser.error(f"bad option value: {exc}")
    if not n_list:
        parser.error("--n needs at least one resolution")
    for n in n_list:
        if n < 41:
            parser.error(f"n must be at least 41, got {n}")
    if snapshots < 0:
        parser.error("--snapshots must be nonnegative")
    if t_final is not None and t_final <= 0.0:
        parser.error("--t-final must be positive")

    embedding = pick(args.embedding, "embedding")
    extension = pick(args.extension, "extension")
    if extension not in _EXTENSION_MODES:
        parser.error(f"unknown extension mode {extension!r}")
    try:
        cfg = schemes.SchemeConfig(
            order=order, cfl=cfl, embedding=embedding,
            extension=_EXTENSION_MODES[extension],
        )
    except ValueError as exc:
        parser.error(str(exc))

    out = args.out or file_cfg.get("out") or os.environ.get("SURFBAND_OUT")
    if not out:
        out = os.path.join("runs", experiment)
    return experiment, n_list, cfg, extension, t_final, snapshots, out


def _cmd_run(args, parser) -> int:
    experiment, n_list, cfg, ext_flag, t_override, snapshots, out = (
        _resolve_run_options(args, parser)
    )
    started = time.perf_counter()
    problem = make_problem(experiment)
    t_final = t_override if t_override is not None else problem.t_final
    mesh = problem.error_mesh()
    os.makedirs(out, exist_ok=True)

    error_rows = []
    run_reports = []
    for n in n_list:
        run_dir = out if len(n_list) == 1 else os.path.join(out, f"n{n}")
        os.makedirs(run_dir, exist_ok=True)
        setup = schemes.prepare_run(problem, n, cfg)
        on_surface = analysis.interpolate_to_surface(
            setup.tube, setup.ctx.u0, mesh.positions
        )
        initial_mass = analysis.total_mass(mesh, on_surface)

        snap_times = [j * t_final / snapshots for j in range(1, snapshots + 1)]
        mass_rows = []
        snap_counter = [0]

        def on_snapshot(t, u, _setup=setup, _dir=run_dir, _rows=mass_rows,
                        _ctr=snap_counter):
            _ctr[0] += 1
            vals = analysis.interpolate_to_surface(_setup.tube, u, mesh.positions)
            _rows.append((t, analysis.total_mass(mesh, vals)))
            _write_snapshot(
                os.path.join(_dir, f"snapshot_{_ctr[0]:03d}.txt"), _setup, u, t
            )

        result = schemes.run(
            setup, t_final, snap_times, on_snapshot if snapshots else None
        )
        final_surface = analysis.interpolate_to_surface(
            setup.tube, result.field.values, mesh.positions
        )
        final_mass = analysis.total_mass(mesh, final_surface)
        if snapshots:
            _write_mass_csv(run_dir, mass_rows)

        norms = None
        if problem.exact_on_mesh is not None:
            exact = problem.exact_on_mesh(mesh, t_final)
            if exact is not None:
                norms = analysis.error_norms(mesh, final_surface, exact)
                error_rows.append((setup.grid.dx, n, norms))

        run_reports.append({
            "n": n,
            "dx": setup.grid.dx,
            "steps": result.steps,
            "dt_min": result.dt_min,
            "dt_max": result.dt_max,
            "sweep_iterations": result.sweep_iterations,
            "initial_mass": initial_mass,
            "final_mass": final_mass,
            "errors": norms,
            "warnings": list(result.warnings),
        })
        line = f"{experiment} n={n} dx={setup.grid.dx:.6g} steps={result.steps}"
        if norms is not None:
            line += f" l1={norms['l1']:.3e} linf={norms['linf']:.3e}"
        else:
            line += f" mass={final_mass:.6f}"
        print(line)

    if error_rows:
        _write_error_table(out, error_rows)

    report = {
        "config": {
            "experiment": experiment,
            "n": n_list,
            "order": cfg.order,
            "cfl": cfg.cfl,
            "embedding": cfg.embedding,
            "extension": ext_flag,
            "t_final": t_final,
            "snapshots": snapshots,
            "out": out,
        },
        "runs": run_reports,
        "wall_time_s": time.perf_counter() - started,
    }
    with open(os.path.join(out, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    print(f"wrote {out}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command == "list":
        return _cmd_list()
    try:
        return _cmd_run(args, parser)
    except SolverError as exc:
        print(f"surfband: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

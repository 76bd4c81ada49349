"""Command-line experiment runner.

Every subcommand writes CSV/JSON files into the output directory and prints
a JSON result on stdout.  Failures print ``{"error": {...}}`` on stderr:
exit 2 for usage errors, 1 for invalid configuration or arguments, 3 for
numerical failures during a run.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import VERSION_STRING, geometry, metrics, oracle
from .config import ConfigError, RunConfig, load_config
from .core import (
    InvalidArgumentError,
    TimeSchedule,
    WFRError,
    resolve_threads,
)
from .dynamics import simulate
from .reaction import ess, log_normalizer_estimate, random_adjoint_residual, snis_moments

log = logging.getLogger("wfrsmc")

EXIT_USAGE = 2
EXIT_INVALID = 1
EXIT_FAILURE = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fmt(x) -> str:
    return repr(float(x))


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _summary(cfg: RunConfig, results: dict, wall: Optional[float]) -> dict:
    # the output location is left out so that runs written to different
    # directories stay byte-identical
    echo = {k: v for k, v in cfg.to_dict().items() if k != "output_dir"}
    out = {"version": VERSION_STRING, "seed": cfg.seed, "config": echo, "results": results}
    if wall is not None:
        out["wall_time_s"] = wall
    return out


def _record_times(cfg: RunConfig) -> list:
    times = list(cfg.snapshots)
    t_end = cfg.schedule.t_end
    if not any(abs(t - t_end) < 1e-12 for t in times):
        times.append(t_end)
    return times


def write_ensemble_csv(path: Path, snapshots) -> None:
    """Rows ``(snapshot_t, particle_id, x_0..x_{d-1}, log_w, ell)``."""
    if not snapshots:
        raise InvalidArgumentError("no snapshots to write")
    dim = snapshots[0][1].dim
    cols = ["snapshot_t", "particle_id"] + [f"x{i}" for i in range(dim)] + ["log_w", "ell"]
    with open(path, "w", newline="") as fh:
        fh.write(",".join(cols) + "\n")
        for t, e in snapshots:
            ts = _fmt(t)
            for k in range(e.k):
                xs = ",".join(_fmt(v) for v in e.x[k])
                fh.write(f"{ts},{k},{xs},{_fmt(e.log_w[k])},{_fmt(e.ell[k])}\n")


def _ensemble_stats(e) -> dict:
    mean, var = snis_moments(e)
    return {"mean": [float(v) for v in mean], "variance": [float(v) for v in var], "ess": ess(e)}


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_sample(cfg: RunConfig, args, out: Path) -> dict:
    times = _record_times(cfg)
    traj = simulate(cfg.fields(), cfg.interpolation, cfg.schedule, cfg.particles, cfg.seed,
                    resample_scheme=cfg.resample, snapshot_times=times, mode=cfg.mode,
                    threads=args.threads)
    write_ensemble_csv(out / "ensemble.csv", traj.snapshots)
    final = _ensemble_stats(traj.final)
    return {
        "mean": final["mean"],
        "variance": final["variance"],
        "ess_trace": [[float(t), float(v)] for t, v in traj.ess_trace],
        "log_normalizer": log_normalizer_estimate(traj.final),
        "resample_times": [float(t) for t in traj.resample_times],
        "snapshots": [dict(t=float(t), **_ensemble_stats(e)) for t, e in traj.snapshots],
    }


def cmd_oracle(cfg: RunConfig, args, out: Path) -> dict:
    fields = cfg.fields()
    if fields.dim != 1:
        raise ConfigError("model1", "the grid oracle is one-dimensional")
    g = cfg.grid
    sc = cfg.schedule
    p0 = oracle.GridDensity.from_function(
        lambda x: np.exp(-0.5 * x * x / cfg.schedule_config.stationary_var), g.lo, g.hi, g.n_cells
    )
    n_steps = oracle.cfl_steps(p0, fields, cfg.interpolation, sc.t_start, sc.t_end,
                               multiple_of=sc.n_steps)
    times = _record_times(cfg)
    grid_sched = TimeSchedule(sc.t_start, sc.t_end, n_steps)
    traj = oracle.fk_pde_solve(p0, fields, cfg.interpolation, grid_sched, record_times=times)
    oracle.write_grid_csv(out / "grid.csv", traj)
    rows = []
    for t, dens in traj:
        exact = oracle.analytic_target(fields, cfg.interpolation, t, g.lo, g.hi, g.n_cells)
        rows.append({"t": float(t), "mass": dens.mass(), "mean": dens.mean(), "std": dens.std(),
                     "l1_to_analytic": oracle.l1_distance(dens, exact)})
    return {"grid_steps": n_steps, "snapshots": rows}


def cmd_equivalence(cfg: RunConfig, args, out: Path) -> dict:
    fields = cfg.fields()
    common = dict(resample_scheme=cfg.resample, threads=args.threads)
    rew = simulate(fields, cfg.interpolation, cfg.schedule, cfg.particles, cfg.seed, mode="reweight", **common)
    jmp = simulate(fields, cfg.interpolation, cfg.schedule, cfg.particles, cfg.seed, mode="jump", **common)
    result = {
        "reweight": _ensemble_stats(rew.final),
        "jump": _ensemble_stats(jmp.final),
        "wasserstein1": metrics.wasserstein1(rew.final, jmp.final),
        "tv_64_bins": metrics.tv_ensembles(rew.final, jmp.final),
        "adjoint_check": random_adjoint_residual(cfg.seed, 10, 50),
    }
    _write_json(out / "equivalence.json", result)
    return result


def _parse_point(values, name: str) -> geometry.GaussianPoint:
    try:
        return geometry.GaussianPoint(float(values[0]), float(values[1]))
    except InvalidArgumentError as exc:
        raise InvalidArgumentError(f"{name}: {exc}") from None


def cmd_geodesic(cfg: RunConfig, args, out: Path) -> dict:
    written = []
    if args.triangle:
        for i in geometry.GeodesicKind:
            for j in geometry.GeodesicKind:
                rows = geometry.triangle_rows(geometry.TRIANGLE_P, geometry.TRIANGLE_U, geometry.TRIANGLE_V,
                                              i, j, n_samples=args.samples)
                name = f"triangle_{i.value}_{j.value}.csv"
                geometry.write_triangle_csv(out / name, rows)
                written.append(name)
        return {"files": written, "median_construction": "midpoint of kind-i geodesic from p to the kind-j u-v geodesic"}
    p0 = _parse_point(args.rho0, "--rho0")
    p1 = _parse_point(args.rho1, "--rho1")
    ts = args.t if args.t is not None else [float(v) for v in np.linspace(0.0, 1.0, args.samples)]
    for t in ts:
        if not 0.0 <= t <= 1.0:
            raise InvalidArgumentError(f"--t: {t} is outside [0, 1]")
    kind = geometry.GeodesicKind(args.kind)
    g = cfg.grid if args.grid_output or kind == geometry.GeodesicKind.MIXTURE else None
    if g is not None:
        r0, r1 = p0.on_grid(g.lo, g.hi, g.n_cells), p1.on_grid(g.lo, g.hi, g.n_cells)
        samples = [(t, geometry.grid_geodesic(r0, r1, t, kind)) for t in ts]
    else:
        pts = geometry.geodesic_many([p0] * len(ts), [p1] * len(ts), ts, kind)
        samples = list(zip(ts, pts))
    name = f"geodesic_{kind.value}.csv"
    geometry.write_geodesic_csv(out / name, samples)
    summary = [dict(zip(("t", "mu", "sigma"), (float(t),) + geometry.summarize(pt))) for t, pt in samples]
    return {"files": [name], "points": summary}


def cmd_diagnose(cfg: RunConfig, args, out: Path) -> dict:
    check = args.check
    if check == "adjoint":
        result = random_adjoint_residual(cfg.seed, args.states, args.trials)
    elif check == "gamma":
        x = np.linspace(-5.0, 5.0, 201)
        gen = oracle.ou_generator(x, 1.0)
        g_lin = oracle.gamma_operator(x, x, gen)
        g2_lin = oracle.gamma2_operator(x, gen)
        q = x * x
        gap = oracle.gamma2_operator(q, gen) - oracle.gamma_operator(q, q, gen)
        result = {
            "alpha": 1.0,
            "max_abs_gamma_linear_minus_1": float(np.nanmax(np.abs(g_lin - 1.0))),
            "max_abs_gamma2_linear_minus_1": float(np.nanmax(np.abs(g2_lin - 1.0))),
            "min_gamma2_minus_gamma_quadratic": float(np.nanmin(gap)),
        }
    elif check == "variance-decay":
        k = args.particles or 100_000
        rows = []
        times = (0.5, 1.0)
        for t, ratio in zip(times, oracle.variance_decay_ratios_mc(times, k=k, seed=cfg.seed)):
            exact = math.exp(-2 * t)
            rows.append({"t": t, "ratio": ratio, "exact": exact, "relative_error": abs(ratio - exact) / exact})
        result = {"particles": k, "rows": rows}
    elif check == "chi2":
        result = {"residuals": oracle.chi2_cases()}
    elif check == "lemmas":
        result = {
            "heat_as_reaction_relative_error": oracle.heat_as_reaction_error(),
            "transport_as_reaction_relative_error": oracle.transport_as_reaction_error(),
            "heat_as_transport_l1_error": oracle.heat_as_transport_error(),
        }
    else:  # argparse restricts the choices
        raise InvalidArgumentError(f"unknown check {check!r}")
    result = {"check": check, **result}
    _write_json(out / f"diagnose_{check.replace('-', '_')}.json", result)
    return result


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON experiment configuration")
    common.add_argument("--seed", type=int, help="overrides the config seed")
    common.add_argument("--output-dir", help="overrides the config output directory")
    common.add_argument("--particles", type=int, help="overrides the config particle count")
    common.add_argument("--threads", type=int, help="worker threads (default: WFR_THREADS or all cores)")
    common.add_argument("--wall-time", action="store_true",
                        help="record wall time in summary.json (makes the file run-dependent)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="wfrsmc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("sample", parents=[common], help="run the weighted sampler")
    sub.add_parser("oracle", parents=[common], help="solve the 1-D grid PDE")
    sub.add_parser("equivalence", parents=[common], help="paired jump vs reweight runs")
    geo = sub.add_parser("geodesic", parents=[common], help="geodesic trajectories")
    geo.add_argument("--kind", choices=[k.value for k in geometry.GeodesicKind], default="fisher_rao")
    geo.add_argument("--t", type=float, nargs="+", help="interpolation times in [0, 1]")
    geo.add_argument("--rho0", type=float, nargs=2, default=[0.0, 1.0], metavar=("MU", "SIGMA"))
    geo.add_argument("--rho1", type=float, nargs=2, default=[2.0, 1.0], metavar=("MU", "SIGMA"))
    geo.add_argument("--samples", type=int, default=21, help="points per trajectory")
    geo.add_argument("--grid-output", action="store_true", help="emit densities on the config grid")
    geo.add_argument("--triangle", action="store_true", help="write the triangle CSVs for all 16 kind pairs")
    diag = sub.add_parser("diagnose", parents=[common], help="identity and consistency checks")
    diag.add_argument("--check", required=True, choices=["adjoint", "gamma", "variance-decay", "chi2", "lemmas"])
    diag.add_argument("--states", type=int, default=10)
    diag.add_argument("--trials", type=int, default=50)
    return parser


COMMANDS = {
    "sample": cmd_sample,
    "oracle": cmd_oracle,
    "equivalence": cmd_equivalence,
    "geodesic": cmd_geodesic,
    "diagnose": cmd_diagnose,
}


def _error(kind: str, message: str, code: int, **extra) -> int:
    sys.stderr.write(json.dumps({"error": {"kind": kind, "message": message, **extra}}, sort_keys=True) + "\n")
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        return _error("usage", str(exc), EXIT_USAGE)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        changes = {}
        if args.seed is not None:
            changes["seed"] = args.seed
        if args.output_dir is not None:
            changes["output_dir"] = args.output_dir
        if args.particles is not None:
            changes["particles"] = args.particles
        if changes:
            cfg = cfg.replace(**changes)
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads", "must be at least 1")
        if args.command == "diagnose" and (args.states < 2 or args.trials < 1):
            raise ConfigError("--states", "need at least 2 states and 1 trial")
        if args.command == "geodesic" and args.samples < 2:
            raise ConfigError("--samples", "need at least 2 samples")
        args.threads = resolve_threads(args.threads)
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        start = time.perf_counter()
        results = COMMANDS[args.command](cfg, args, out)
        wall = time.perf_counter() - start
        log.info("%s finished in %.2f s", args.command, wall)
        _write_json(out / "summary.json", _summary(cfg, results, wall if args.wall_time else None))
    except ConfigError as exc:
        return _error("config", str(exc), EXIT_INVALID, field=exc.field)
    except InvalidArgumentError as exc:
        return _error(exc.kind, str(exc), EXIT_INVALID)
    except WFRError as exc:
        return _error(exc.kind, str(exc), EXIT_FAILURE)
    except OSError as exc:
        return _error("io", str(exc), EXIT_FAILURE)
    sys.stdout.write(json.dumps(results, sort_keys=True) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())

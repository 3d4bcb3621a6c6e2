"""Command-line front end: run configs, experiments, result records.

Configs are strict JSON: unknown keys are rejected so a typo in a tolerance
name cannot silently invalidate a verification run. Exit codes: 0 = pass,
1 = verification failure, 2 = error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .analysis import (
    bm_sweep,
    inf_convolution_trial,
    log_concavity_check,
    logpde_residual,
    write_bm_csv,
    write_concavity_csv,
)
from .eigensolver import DEFAULT_EPS_SCHEDULE, EigenResult, SolverConfig, solve_first_eigenpair
from .energy import EnergyParams
from .errors import ConfigParse, GaussEigError, IOFailure
from .geometry import minkowski_combination, validate
from .oracles import brute_force_min, linear_p2_eigensolve, radial_annulus_solution, \
    radial_residual_check

EXPERIMENTS = ("solve", "bm-sweep", "logconcavity", "logpde", "infconv",
               "oracle-radial", "oracle-p2", "oracle-brute")

_PROBLEM_KEYS = {"polygon", "polygons", "p", "h", "eps_schedule", "grad_tol",
                 "max_iters", "n_restarts", "rng_seed"}
_TOP_KEYS = {"experiment", "problem", "t_grid", "margin", "n_pairs", "grid_n",
             "r0", "r1", "n_dim", "output_dir", "deterministic_reduction"}

THREADS_ENV = "GAUSSEIG_THREADS"


@dataclass
class RunConfig:
    experiment: str
    polygons: list                  # list of vertex lists (1 or 2 entries)
    p: float = 2.0
    h: float = 0.1
    eps_schedule: list = field(default_factory=lambda: list(DEFAULT_EPS_SCHEDULE))
    grad_tol: float = 1e-7
    max_iters: int = 3000
    n_restarts: int = 0
    rng_seed: int = 0
    t_grid: list = field(default_factory=list)
    margin: float | None = None
    n_pairs: int = 10000
    grid_n: int = 64
    r0: float = 0.5
    r1: float = 2.0
    n_dim: int = 2
    output_dir: str = "out"
    deterministic_reduction: bool = True

    def to_dict(self) -> dict:
        return asdict(self)

    def sha256(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()

    def solver_config(self) -> SolverConfig:
        return SolverConfig(p=self.p, eps_schedule=tuple(self.eps_schedule),
                            grad_tol=self.grad_tol, max_iters=self.max_iters,
                            n_restarts=self.n_restarts, rng_seed=self.rng_seed)


def _reject_unknown(d: dict, allowed: set, where: str) -> None:
    unknown = set(d) - allowed
    if unknown:
        raise ConfigParse(f"unknown key(s) in {where}: {sorted(unknown)}")


def _num(d, key, where, kind=float, required=False, default=None):
    if key not in d:
        if required:
            raise ConfigParse(f"{where}.{key} is required")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigParse(f"{where}.{key} must be a number")
    if kind is int and not float(v).is_integer():
        raise ConfigParse(f"{where}.{key} must be an integer")
    return kind(v)


def parse_config(data: dict) -> RunConfig:
    """Validate a parsed JSON document into a RunConfig (strict keys)."""
    if not isinstance(data, dict):
        raise ConfigParse("config must be a JSON object")
    _reject_unknown(data, _TOP_KEYS, "config")
    exp = data.get("experiment")
    if exp not in EXPERIMENTS:
        raise ConfigParse(f"experiment must be one of {EXPERIMENTS}, got {exp!r}")

    prob = data.get("problem", {})
    if not isinstance(prob, dict):
        raise ConfigParse("problem must be an object")
    _reject_unknown(prob, _PROBLEM_KEYS, "problem")
    if "polygon" in prob and "polygons" in prob:
        raise ConfigParse("give either problem.polygon or problem.polygons, not both")
    if "polygons" in prob:
        polys = prob["polygons"]
        if not isinstance(polys, list) or len(polys) != 2:
            raise ConfigParse("problem.polygons must list exactly 2 polygons")
    elif "polygon" in prob:
        polys = [prob["polygon"]]
    else:
        polys = []
    needs_two = exp in ("bm-sweep", "infconv")
    needs_one = exp in ("solve", "logconcavity", "logpde", "oracle-p2", "oracle-brute")
    if needs_two and len(polys) != 2:
        raise ConfigParse(f"experiment {exp} needs problem.polygons with 2 entries")
    if needs_one and len(polys) != 1:
        raise ConfigParse(f"experiment {exp} needs problem.polygon")
    for poly in polys:
        validate(poly)  # raises geometry errors early

    cfg = RunConfig(experiment=exp, polygons=[list(map(list, p)) for p in polys])
    p = _num(prob, "p", "problem", default=cfg.p)
    if not p > 1.0:
        raise ConfigParse(f"problem.p must satisfy p > 1, got {p}")
    cfg.p = p
    h = _num(prob, "h", "problem", default=cfg.h)
    if not h > 0.0:
        raise ConfigParse(f"problem.h must satisfy h > 0, got {h}")
    cfg.h = h
    if "eps_schedule" in prob:
        sched = prob["eps_schedule"]
        if (not isinstance(sched, list) or not sched
                or any(not isinstance(e, (int, float)) or e <= 0 for e in sched)
                or any(b >= a for a, b in zip(sched, sched[1:]))):
            raise ConfigParse(
                "problem.eps_schedule must be a strictly decreasing positive list")
        cfg.eps_schedule = [float(e) for e in sched]
    gt = _num(prob, "grad_tol", "problem", default=cfg.grad_tol)
    if not gt > 0.0:
        raise ConfigParse(f"problem.grad_tol must satisfy grad_tol > 0, got {gt}")
    cfg.grad_tol = gt
    mi = _num(prob, "max_iters", "problem", kind=int, default=cfg.max_iters)
    if mi < 1:
        raise ConfigParse(f"problem.max_iters must satisfy max_iters >= 1, got {mi}")
    cfg.max_iters = mi
    nr = _num(prob, "n_restarts", "problem", kind=int, default=cfg.n_restarts)
    if nr < 0:
        raise ConfigParse(f"problem.n_restarts must satisfy n_restarts >= 0, got {nr}")
    cfg.n_restarts = nr
    cfg.rng_seed = _num(prob, "rng_seed", "problem", kind=int, default=cfg.rng_seed)

    if "t_grid" in data:
        tg = data["t_grid"]
        if (not isinstance(tg, list)
                or any(not isinstance(t, (int, float)) or not 0 <= t <= 1 for t in tg)):
            raise ConfigParse("t_grid must be a list of numbers in [0, 1]")
        cfg.t_grid = [float(t) for t in tg]
    margin = _num(data, "margin", "config", default=None)
    if margin is not None and not margin > 0.0:
        raise ConfigParse(f"margin must satisfy margin > 0, got {margin}")
    cfg.margin = margin
    npairs = _num(data, "n_pairs", "config", kind=int, default=cfg.n_pairs)
    if npairs < 1:
        raise ConfigParse(f"n_pairs must satisfy n_pairs >= 1, got {npairs}")
    cfg.n_pairs = npairs
    gn = _num(data, "grid_n", "config", kind=int, default=cfg.grid_n)
    if gn < 2:
        raise ConfigParse(f"grid_n must satisfy grid_n >= 2, got {gn}")
    cfg.grid_n = gn
    cfg.r0 = _num(data, "r0", "config", default=cfg.r0)
    cfg.r1 = _num(data, "r1", "config", default=cfg.r1)
    if not 0.0 < cfg.r0 < cfg.r1:
        raise ConfigParse(f"radii must satisfy 0 < r0 < r1, got r0={cfg.r0}, r1={cfg.r1}")
    nd = _num(data, "n_dim", "config", kind=int, default=cfg.n_dim)
    if nd < 2:
        raise ConfigParse(f"n_dim must satisfy n_dim >= 2, got {nd}")
    cfg.n_dim = nd
    if "output_dir" in data:
        if not isinstance(data["output_dir"], str):
            raise ConfigParse("output_dir must be a string")
        cfg.output_dir = data["output_dir"]
    if "deterministic_reduction" in data:
        if not isinstance(data["deterministic_reduction"], bool):
            raise ConfigParse("deterministic_reduction must be a boolean")
        cfg.deterministic_reduction = data["deterministic_reduction"]
    return cfg


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigParse(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigParse(f"invalid JSON in {path}: {exc}") from exc
    return parse_config(data)


def emit_field(res: EigenResult, path) -> None:
    """Write "x y u" rows, plus a companion "x y w" file with w = -ln(max(u, floor))."""
    mesh = res.u.mesh
    u = res.u.values
    floor = 1e-8 * float(u.max())
    w = -np.log(np.maximum(u, floor))
    base, ext = os.path.splitext(str(path))
    wpath = f"{base}_w{ext or '.txt'}"
    try:
        with open(path, "w") as fh:
            for (x, y), v in zip(mesh.nodes, u):
                fh.write(f"{float(x)!r} {float(y)!r} {float(v)!r}\n")
        with open(wpath, "w") as fh:
            for (x, y), v in zip(mesh.nodes, w):
                fh.write(f"{float(x)!r} {float(y)!r} {float(v)!r}\n")
    except OSError as exc:
        raise IOFailure(f"cannot write field dump: {exc}") from exc


def _eigen_scalars(res: EigenResult) -> dict:
    from .energy import p_norm_constraint

    return {
        "lambda": res.eigenvalue,
        "p": res.p,
        "final_eps": res.final_eps,
        "mesh_h": res.mesh_h,
        "constraint": p_norm_constraint(res.u, res.p),
        "iterations": res.iterations,
        "restarts_agreeing": res.restarts_agreeing,
        "grad_norm_final": res.grad_norm_final,
        "history": [[e, l] for e, l in res.history],
    }


def _n_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def run(config_path, out_override=None) -> int:
    """Execute the experiment named by the config; return the process exit code."""
    timings: dict[str, float] = {}
    t_start = time.perf_counter()
    try:
        cfg = load_config(config_path)
        config_hash = cfg.sha256()  # identifies the config as loaded
        if out_override is not None:
            cfg.output_dir = str(out_override)
        os.makedirs(cfg.output_dir, exist_ok=True)
        results, passed = _dispatch(cfg, timings)
    except (GaussEigError, ValueError) as exc:
        # ValueError covers module precondition violations reached past parsing
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    timings["total"] = time.perf_counter() - t_start

    record = {
        "artifact_version": __version__,
        "config": cfg.to_dict(),
        "config_sha256": config_hash,
        "results": results,
        "verdict": "pass" if passed else "fail",
        "timings_s": timings,
    }
    try:
        with open(os.path.join(cfg.output_dir, "result.json"), "w") as fh:
            json.dump(record, fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        print(f"error: IOFailure: {exc}", file=sys.stderr)
        return 2
    print(f"{cfg.experiment}: {'pass' if passed else 'FAIL'} "
          f"(results in {cfg.output_dir})")
    return 0 if passed else 1


def _solve_timed(poly, cfg: RunConfig, timings, tag="solve") -> EigenResult:
    t0 = time.perf_counter()
    res = solve_first_eigenpair(validate(poly), cfg.solver_config(), cfg.h)
    timings[tag] = timings.get(tag, 0.0) + (time.perf_counter() - t0)
    return res


def _dispatch(cfg: RunConfig, timings) -> tuple[dict, bool]:
    out = cfg.output_dir
    exp = cfg.experiment

    if exp == "solve":
        res = _solve_timed(cfg.polygons[0], cfg, timings)
        emit_field(res, os.path.join(out, "field_u.txt"))
        with open(os.path.join(out, "history.csv"), "w") as fh:
            fh.write("eps,lambda_eps\n")
            for e, l in res.history:
                fh.write(f"{e!r},{l!r}\n")
        return _eigen_scalars(res), True

    if exp == "bm-sweep":
        t_grid = cfg.t_grid or [round(0.1 * k, 1) for k in range(11)]
        t0 = time.perf_counter()
        report = bm_sweep(validate(cfg.polygons[0]), validate(cfg.polygons[1]),
                          cfg.solver_config(), cfg.h, t_grid,
                          n_threads=_n_threads())
        timings["sweep"] = time.perf_counter() - t0
        write_bm_csv(report, os.path.join(out, "bm.csv"))
        results = {
            "t_grid": report.t_grid,
            "lambda_t": report.lambda_t,
            "chord_t": report.chord_t,
            "slack_t": report.slack_t,
            "min_slack": report.min_slack,
            "tolerance": report.tolerance,
        }
        return results, report.verdict

    if exp == "logconcavity":
        res = _solve_timed(cfg.polygons[0], cfg, timings)
        margin = cfg.margin if cfg.margin is not None else 3.0 * cfg.h
        t0 = time.perf_counter()
        report = log_concavity_check(res, margin, cfg.n_pairs, seed=cfg.rng_seed)
        timings["check"] = time.perf_counter() - t0
        write_concavity_csv(report, os.path.join(out, "concavity.csv"))
        results = _eigen_scalars(res)
        results.update({
            "worst_violation": report.worst_violation,
            "tolerance": report.tolerance,
            "n_pairs": report.n_pairs_tested,
            "margin": report.margin_used,
        })
        return results, report.verdict

    if exp == "logpde":
        res = _solve_timed(cfg.polygons[0], cfg, timings)
        margin = cfg.margin if cfg.margin is not None else 3.0 * cfg.h
        r_coarse = logpde_residual(res, margin)
        fine = RunConfig(**{**cfg.to_dict(), "h": 0.5 * cfg.h})
        res_fine = _solve_timed(cfg.polygons[0], fine, timings, tag="solve_fine")
        r_fine = logpde_residual(res_fine, margin)
        results = {
            "lambda": res.eigenvalue,
            "residual_h": r_coarse,
            "residual_h_half": r_fine,
            "ratio": r_coarse / r_fine if r_fine > 0 else float("inf"),
        }
        return results, r_fine < r_coarse

    if exp == "infconv":
        res0 = _solve_timed(cfg.polygons[0], cfg, timings, tag="solve0")
        res1 = _solve_timed(cfg.polygons[1], cfg, timings, tag="solve1")
        t_grid = cfg.t_grid or [0.5]
        rows = []
        passed = True
        for t in t_grid:
            if not 0.0 < t < 1.0:
                raise ConfigParse(f"infconv t values must satisfy 0 < t < 1, got {t}")
            Pt = minkowski_combination(validate(cfg.polygons[0]),
                                       validate(cfg.polygons[1]), t)
            res_t = solve_first_eigenpair(Pt, cfg.solver_config(), cfg.h)
            trial = inf_convolution_trial(res0, res1, t, grid_n=cfg.grid_n)
            chord = (1.0 - t) * res0.eigenvalue + t * res1.eigenvalue
            ok = (trial >= res_t.eigenvalue - 1e-8
                  and trial <= chord * 1.05)
            passed &= ok
            rows.append({"t": t, "lambda_t": res_t.eigenvalue, "trial_rq": trial,
                         "chord": chord, "ok": ok})
        results = {"lambda0": res0.eigenvalue, "lambda1": res1.eigenvalue,
                   "points": rows}
        return results, passed

    if exp == "oracle-radial":
        spacings = [(cfg.r1 - cfg.r0) / m for m in (40, 80, 160, 320)]
        sol = radial_annulus_solution(cfg.r0, cfg.r1, cfg.n_dim, cfg.p)
        res_good = [radial_residual_check(sol, s) for s in spacings]
        rows = list(zip(spacings, res_good))
        orders = [np.log2(a / b) for a, b in zip(res_good, res_good[1:])]
        passed = all(o >= 1.0 for o in orders)
        res_bad = None
        if cfg.p != 2.0:
            bad = radial_annulus_solution(cfg.r0, cfg.r1, cfg.n_dim, cfg.p,
                                          exponent=cfg.p - 1.0)
            res_bad = [radial_residual_check(bad, s) for s in spacings]
            # the wrong exponent must not converge: residual stays O(1)
            passed &= res_bad[-1] > 100.0 * res_good[-1]
        with open(os.path.join(out, "radial_residuals.csv"), "w") as fh:
            fh.write("spacing,residual,residual_wrong_exponent\n")
            for i, (s, r) in enumerate(rows):
                rb = res_bad[i] if res_bad is not None else ""
                fh.write(f"{s!r},{r!r},{rb!r}\n" if rb != "" else f"{s!r},{r!r},\n")
        results = {"spacings": spacings, "residuals": res_good,
                   "orders": [float(o) for o in orders],
                   "residuals_wrong_exponent": res_bad}
        return results, passed

    if exp == "oracle-p2":
        if cfg.p != 2.0:
            raise ConfigParse(f"oracle-p2 requires p = 2, got p={cfg.p}")
        res = _solve_timed(cfg.polygons[0], cfg, timings)
        t0 = time.perf_counter()
        lam_lin, _ = linear_p2_eigensolve(res.u.mesh)
        timings["oracle"] = time.perf_counter() - t0
        rel = abs(res.eigenvalue - lam_lin) / lam_lin
        passed = rel <= 1e-6
        with open(os.path.join(out, "oracle_p2.csv"), "w") as fh:
            fh.write("lambda_solver,lambda_linear,rel_diff,verdict\n")
            fh.write(f"{res.eigenvalue!r},{lam_lin!r},{rel!r},"
                     f"{'pass' if passed else 'fail'}\n")
        results = {"lambda_solver": res.eigenvalue, "lambda_linear": lam_lin,
                   "rel_diff": rel}
        return results, passed

    if exp == "oracle-brute":
        res = _solve_timed(cfg.polygons[0], cfg, timings)
        t0 = time.perf_counter()
        bf = brute_force_min(res.u.mesh, EnergyParams(cfg.p, cfg.eps_schedule[-1]),
                             rng_seed=cfg.rng_seed)
        timings["oracle"] = time.perf_counter() - t0
        rel = abs(bf - res.eigenvalue) / res.eigenvalue
        passed = bf >= res.eigenvalue - 1e-6 and rel <= 1e-4
        with open(os.path.join(out, "oracle_brute.csv"), "w") as fh:
            fh.write("lambda_solver,brute_force_min,rel_diff,verdict\n")
            fh.write(f"{res.eigenvalue!r},{bf!r},{rel!r},"
                     f"{'pass' if passed else 'fail'}\n")
        results = {"lambda_solver": res.eigenvalue, "brute_force_min": bf,
                   "rel_diff": rel}
        return results, passed

    raise ConfigParse(f"experiment {exp!r} is not implemented")


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(
        prog="gausseig",
        description="Gaussian-weighted p-Laplace eigenpair experiments")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        sp = sub.add_parser(name, help=f"run the {name} experiment")
        sp.add_argument("--config", required=True, help="path to the JSON run config")
        sp.add_argument("--out", default=None, help="override output_dir")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
    except GaussEigError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        sys.exit(2)
    if cfg.experiment != args.experiment:
        print(f"error: ConfigParse: config names experiment {cfg.experiment!r} "
              f"but subcommand is {args.experiment!r}", file=sys.stderr)
        sys.exit(2)
    sys.exit(run(args.config, out_override=args.out))


if __name__ == "__main__":
    main()

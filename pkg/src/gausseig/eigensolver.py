"""First-eigenpair solver: quotient descent with eps-continuation and restarts."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .energy import EnergyParams, NodalField, p_norm_constraint, rayleigh_gradient
from .errors import NoConvergence, RestartDisagreement, ZeroField
from .geometry import ConvexPolygon
from .mesh import TriMesh, triangulate

DEFAULT_EPS_SCHEDULE = tuple(10.0 ** (-k) for k in range(1, 9))

# agreement thresholds for independent restarts (uniqueness proxy)
RESTART_LAMBDA_RTOL = 1e-6
RESTART_FIELD_TOL = 1e-3

_ARMIJO_C = 1e-4
_MAX_BACKTRACKS = 60


@dataclass(frozen=True)
class SolverConfig:
    # grad_tol is a scale-free stationarity bound; the float64 wall where
    # quotient differences drop below machine epsilon sits near 1e-7 for
    # fine meshes, so tighter values may fail to converge
    p: float
    eps_schedule: tuple = DEFAULT_EPS_SCHEDULE
    grad_tol: float = 1e-6
    max_iters: int = 3000
    n_restarts: int = 0
    rng_seed: int = 0

    def __post_init__(self):
        if not self.p > 1.0:
            raise ValueError(f"p must satisfy p > 1, got {self.p}")
        sched = tuple(float(e) for e in self.eps_schedule)
        if not sched or any(e <= 0.0 for e in sched):
            raise ValueError("eps_schedule must be non-empty and positive")
        if any(b >= a for a, b in zip(sched, sched[1:])):
            raise ValueError("eps_schedule must be strictly decreasing")
        object.__setattr__(self, "eps_schedule", sched)
        if not self.grad_tol > 0.0:
            raise ValueError("grad_tol must be positive")
        if self.max_iters < 1 or self.n_restarts < 0:
            raise ValueError("max_iters >= 1 and n_restarts >= 0 required")


@dataclass
class MinimizeResult:
    lambda_eps: float
    u: NodalField
    iterations: int
    grad_norm: float
    converged: bool


@dataclass
class EigenResult:
    """Converged first eigenpair with solver diagnostics.

    The eigenfunction is nonnegative with unit p-norm, which fixes the
    multiplicative-constant freedom of the continuum problem.
    """

    eigenvalue: float
    u: NodalField
    p: float
    final_eps: float
    mesh_h: float
    iterations: int
    restarts_agreeing: int
    grad_norm_final: float
    history: list = field(default_factory=list)  # [(eps, lambda_eps), ...]


def _normalized(u: NodalField, p: float) -> NodalField:
    n = p_norm_constraint(u, p)
    if n < 1e-300:
        raise ZeroField("cannot normalize a numerically zero field")
    return NodalField(u.mesh, u.values / n ** (1.0 / p))


def _stationarity(g: np.ndarray, v: np.ndarray, lam: float) -> float:
    """Scale-free gradient norm ||grad R|| * ||u|| / R."""
    return float(np.linalg.norm(g) * np.linalg.norm(v) / max(lam, 1e-300))


def minimize_rq(mesh: TriMesh, params: EnergyParams, u0: NodalField,
                grad_tol: float = 1e-8, max_iters: int = 3000,
                on_iterate=None) -> MinimizeResult:
    """Descend the regularized Rayleigh quotient to a stationary point.

    Barzilai-Borwein step proposals with monotone Armijo backtracking; the
    iterate is renormalized to unit p-norm after every accepted step (the
    quotient is scale-invariant, so this costs nothing). The returned field
    is nonnegative. If max_iters is hit the best iterate is returned with
    converged=False. on_iterate, when given, is called with (iteration,
    quotient value) after every accepted step.
    """
    u = _normalized(u0, params.p)
    v = u.values.copy()
    lam, gfield = rayleigh_gradient(NodalField(mesh, v), params)
    g = gfield.values
    prev_v = prev_g = None
    iters = 0

    for iters in range(1, max_iters + 1):
        if _stationarity(g, v, lam) <= grad_tol:
            iters -= 1
            break
        gn = np.linalg.norm(g)
        ref = np.linalg.norm(v) / gn
        if prev_v is not None:
            dv = v - prev_v
            dg = g - prev_g
            denom = float(dv @ dg)
            step = float(dv @ dv) / denom if denom > 0.0 else 0.1 * ref
        else:
            step = 0.1 * ref
        step = float(np.clip(step, 1e-12 * ref, 1e3 * ref))

        accepted = False
        g2 = gn * gn
        for _ in range(_MAX_BACKTRACKS):
            w = v - step * g
            nw = p_norm_constraint(NodalField(mesh, w), params.p)
            if nw > 1e-300:
                lam_w, gfield_w = rayleigh_gradient(NodalField(mesh, w), params)
                if lam_w <= lam - _ARMIJO_C * step * g2:
                    accepted = True
                    break
            step *= 0.5
        if not accepted:
            break  # numerically stationary: no decrease along -g
        prev_v, prev_g = v, g
        scale = nw ** (-1.0 / params.p)
        v = w * scale
        g = gfield_w.values * (1.0 / scale)  # grad R is (-1)-homogeneous
        lam = lam_w
        if on_iterate is not None:
            on_iterate(iters, lam)

    converged = _stationarity(g, v, lam) <= grad_tol

    # sign/positivity normalization: |u| is also a minimizer
    if v.sum() < 0.0:
        v = -v
    if v.min() < 0.0:
        va = np.abs(v)
        lam_a, gfield_a = rayleigh_gradient(NodalField(mesh, va), params)
        if lam_a > lam * (1.0 + 1e-12) + 1e-300:
            converged = False  # genuinely sign-changing iterate; suspicious
        v, lam, g = va, lam_a, gfield_a.values
    u_final = _normalized(NodalField(mesh, v), params.p)
    return MinimizeResult(lam, u_final, iters, _stationarity(g, v, lam), converged)


def distance_init(mesh: TriMesh) -> NodalField:
    """Interpolant of the distance-to-boundary function, scaled to max 1."""
    d = mesh.polygon.boundary_distance(mesh.nodes)
    d[mesh.boundary_mask] = 0.0
    return NodalField(mesh, d / d.max())


def random_positive_init(mesh: TriMesh, rng: np.random.Generator) -> NodalField:
    vals = np.zeros(mesh.n_nodes)
    vals[mesh.interior_mask] = rng.uniform(0.1, 1.0, mesh.n_interior)
    return NodalField(mesh, vals)


def _continuation(mesh: TriMesh, cfg: SolverConfig, u0: NodalField):
    """Run minimize_rq along the eps schedule with warm starts."""
    history = []
    total_iters = 0
    res = None
    u = u0
    for eps in cfg.eps_schedule:
        res = minimize_rq(mesh, EnergyParams(cfg.p, eps), u,
                          grad_tol=cfg.grad_tol, max_iters=cfg.max_iters)
        history.append((eps, res.lambda_eps))
        total_iters += res.iterations
        u = res.u
    if not res.converged:
        raise NoConvergence(
            f"final stage eps={cfg.eps_schedule[-1]:.1e} ended with "
            f"gradient norm {res.grad_norm:.3g} > {cfg.grad_tol:.3g}")
    return res, history, total_iters


def solve_first_eigenpair(P: ConvexPolygon, cfg: SolverConfig, h: float) -> EigenResult:
    """Mesh the polygon and eps-continue to the first eigenpair.

    One deterministic start (distance function) plus cfg.n_restarts random
    positive starts; all runs must agree within the restart tolerances, a
    consequence of uniqueness of the positive eigenfunction.
    """
    mesh = triangulate(P, h)
    starts = [distance_init(mesh)]
    for k in range(cfg.n_restarts):
        starts.append(random_positive_init(mesh, np.random.default_rng(cfg.rng_seed + k)))

    runs = [_continuation(mesh, cfg, u0) for u0 in starts]
    best_idx = int(np.argmin([r[0].lambda_eps for r in runs]))
    best, history, iters = runs[best_idx]

    agreeing = 0
    for res, _, _ in runs:
        lam_ok = abs(res.lambda_eps - best.lambda_eps) <= RESTART_LAMBDA_RTOL * best.lambda_eps
        sup = np.max(np.abs(res.u.values - best.u.values))
        field_ok = sup <= RESTART_FIELD_TOL * np.max(np.abs(best.u.values))
        if lam_ok and field_ok:
            agreeing += 1
        else:
            raise RestartDisagreement(
                f"restart disagrees with best: |dlambda|/lambda="
                f"{abs(res.lambda_eps - best.lambda_eps) / best.lambda_eps:.3g}, "
                f"sup field diff={sup:.3g} (mesh too coarse or solver bug)")

    u = best.u
    if u.values.min() < -1e-12:
        raise NoConvergence(f"eigenfunction has negative node {u.values.min():.3g}")
    return EigenResult(
        eigenvalue=best.lambda_eps,
        u=u,
        p=cfg.p,
        final_eps=cfg.eps_schedule[-1],
        mesh_h=h,
        iterations=iters,
        restarts_agreeing=agreeing,
        grad_norm_final=best.grad_norm,
        history=history,
    )


def warm_start_interpolate(u_src: NodalField, mesh_dst: TriMesh) -> NodalField:
    """P1-interpolate a field onto another mesh; outside points and boundary get 0."""
    vals = u_src.mesh.interpolate(u_src.values, mesh_dst.nodes, fill=0.0)
    vals[mesh_dst.boundary_mask] = 0.0
    return NodalField(mesh_dst, vals)

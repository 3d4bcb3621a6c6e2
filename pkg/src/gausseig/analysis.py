"""Verification of the structural properties of computed eigenpairs.

Covers the log-concavity of the eigenfunction (via the concavity defect of
w = -ln u), the transformed-PDE weak residual for w, the inf-convolution
trial-function bound, and the eigenvalue inequality along Minkowski
combinations of two domains.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .eigensolver import EigenResult, SolverConfig, solve_first_eigenpair
from .energy import EnergyParams, NodalField, rayleigh_quotient
from .errors import EmptyTestSet, FloorViolation, GridTooCoarse
from .geometry import ConvexPolygon, contains_many, minkowski_combination
from .mesh import TriMesh, triangulate

# w = -ln u blows up at the boundary; fields are only probed where
# u >= U_FLOOR_REL * max(u), inside a margin that keeps a full element
# ring clear of the boundary (default margin is 3h)
U_FLOOR_REL = 1e-8
# the transformed PDE only holds where the gradient does not vanish
G_FLOOR_REL = 1e-6
_T_PROBES = (0.25, 0.5, 0.75)


@dataclass
class ConcavityReport:
    n_pairs_tested: int
    worst_violation: float
    worst_location: tuple  # (x, y, t)
    margin_used: float
    tolerance: float
    verdict: bool

    def __str__(self):
        word = "pass" if self.verdict else "FAIL"
        return (f"log-concavity {word}: worst violation {self.worst_violation:.3e} "
                f"vs tolerance {self.tolerance:.3e} over {self.n_pairs_tested} pairs")


@dataclass
class BMReport:
    t_grid: list
    lambda_t: list
    chord_t: list
    slack_t: list
    min_slack: float
    tolerance: float
    verdict: bool

    def __str__(self):
        word = "pass" if self.verdict else "FAIL"
        return (f"Brunn-Minkowski {word}: min slack {self.min_slack:.3e} "
                f"vs -tolerance {-self.tolerance:.3e} over {len(self.t_grid)} points")


def _field_of(res) -> NodalField:
    return res.u if isinstance(res, EigenResult) else res


def _sample_in_polygon(P: ConvexPolygon, margin: float, n: int,
                       rng: np.random.Generator) -> np.ndarray:
    """Uniform points inside the margin-shrunk polygon by rejection sampling."""
    lo = P.vertices.min(axis=0)
    hi = P.vertices.max(axis=0)
    out = []
    got = 0
    for _ in range(10_000):
        cand = rng.uniform(lo, hi, size=(max(64, 2 * (n - got)), 2))
        cand = cand[contains_many(P, cand, margin=margin)]
        if len(cand):
            out.append(cand)
            got += len(cand)
        if got >= n:
            break
    if got < n:
        raise FloorViolation(
            f"margin {margin} leaves too little area to sample {n} points")
    return np.vstack(out)[:n]


def _log_field_values(field: NodalField, points: np.ndarray, u_floor: float,
                      what: str) -> np.ndarray:
    u = field.mesh.interpolate(field.values, points, fill=0.0)
    if np.any(u < u_floor):
        raise FloorViolation(
            f"{what}: field value {u.min():.3g} below floor {u_floor:.3g}; "
            "margin too small")
    return -np.log(u)


def log_concavity_check(res, margin: float, n_pairs: int, tolerance: float | None = None,
                        seed: int = 0) -> ConcavityReport:
    """Sample the concavity defect c(x,y,t) = w(z_t) - (1-t)w(x) - t*w(y) of w = -ln u.

    Pairs are drawn uniformly inside the margin-shrunk polygon (their segment
    stays inside by convexity) and probed at t in {1/4, 1/2, 3/4}; the field
    is log-concave on the sampled set iff the worst defect stays below the
    interpolation-calibrated tolerance.
    """
    u = _field_of(res)
    mesh = u.mesh
    if tolerance is None:
        tolerance = calibrate_concavity_tolerance(mesh, margin, seed=seed + 1,
                                                  field=u)
    u_floor = U_FLOOR_REL * float(u.values.max())
    rng = np.random.default_rng(seed)
    xs = _sample_in_polygon(mesh.polygon, margin, n_pairs, rng)
    ys = _sample_in_polygon(mesh.polygon, margin, n_pairs, rng)
    wx = _log_field_values(u, xs, u_floor, "pair endpoints")
    wy = _log_field_values(u, ys, u_floor, "pair endpoints")

    worst = -np.inf
    worst_loc = (xs[0], ys[0], _T_PROBES[0])
    for t in _T_PROBES:
        z = (1.0 - t) * xs + t * ys
        wz = _log_field_values(u, z, u_floor, "segment points")
        c = wz - (1.0 - t) * wx - t * wy
        i = int(np.argmax(c))
        if c[i] > worst:
            worst = float(c[i])
            worst_loc = (xs[i].copy(), ys[i].copy(), t)
    return ConcavityReport(
        n_pairs_tested=n_pairs,
        worst_violation=worst,
        worst_location=worst_loc,
        margin_used=margin,
        tolerance=float(tolerance),
        verdict=worst <= tolerance,
    )


def _log_gradient_scale(field: NodalField, margin: float, u_floor: float) -> float:
    """Max |grad(-ln u)|^2 over triangles fully inside the margin-shrunk region."""
    mesh = field.mesh
    ok = (contains_many(mesh.polygon, mesh.nodes, margin=margin)
          & (field.values >= u_floor))
    tri_ok = ok[mesh.triangles].all(axis=1)
    if not tri_ok.any():
        return 0.0
    w = np.where(ok, -np.log(np.maximum(field.values, u_floor)), 0.0)
    gw = np.einsum("tl,tlk->tk", w[mesh.triangles[tri_ok]], mesh.grads[tri_ok])
    return float(np.max(np.sum(gw * gw, axis=1)))


def calibrate_concavity_tolerance(mesh: TriMesh, margin: float,
                                  n_pairs: int = 2000, seed: int = 1,
                                  field: NodalField | None = None) -> float:
    """Per-mesh O(h^2) tolerance from control fields.

    Positive control: the product of signed edge distances, analytically
    log-concave with the 1/dist^2 log-curvature of an eigenfunction at the
    boundary; its sampled defect measures the interpolation error of the
    check path. Negative control: a log-convex bump bounding the tolerance
    from above so genuine violations still fail. When the checked field is
    supplied, a gradient-scale term 0.5 * h^2 * max|grad(-ln u)|^2 is
    included: nodal-level solve error of size O(h^2) converts into log
    defects at that scale, which no static control can see.
    """
    c = mesh.polygon.centroid

    def edge_product(pts):
        d = mesh.polygon.edge_distances(pts)
        return np.prod(np.maximum(d, 0.0), axis=1)

    def convex_bump(pts):
        d = pts - c
        return np.exp(np.sum(d * d, axis=1))

    defects = []
    for f in (edge_product, convex_bump):
        control = NodalField.from_function(mesh, f)
        rep = log_concavity_check(control, margin, n_pairs, tolerance=np.inf,
                                  seed=seed)
        defects.append(max(rep.worst_violation, 0.0))
    d_pos, d_neg = defects

    g2term = 0.0
    if field is not None:
        u_floor = U_FLOOR_REL * float(field.values.max())
        g2term = 0.5 * mesh.h ** 2 * _log_gradient_scale(field, margin, u_floor)
    return float(max(1e-10, min(0.1 * d_neg, max(10.0 * d_pos, g2term))))


def midpoint_concavity_field(res, margin: float) -> float:
    """Worst midpoint concavity defect over all pairs of margin-interior nodes.

    Exhaustive O(N^2) variant of the sampled check; N is capped at 400 nodes
    to bound the pair count at 160k.
    """
    u = _field_of(res)
    mesh = u.mesh
    inside = contains_many(mesh.polygon, mesh.nodes, margin=margin) & mesh.interior_mask
    nodes = mesh.nodes[inside]
    if len(nodes) > 400:
        raise ValueError(f"{len(nodes)} margin-interior nodes exceed the 400-node cap")
    if len(nodes) < 2:
        raise EmptyTestSet("fewer than 2 margin-interior nodes")
    u_floor = U_FLOOR_REL * float(u.values.max())
    uv = u.values[inside]
    if np.any(uv < u_floor):
        raise FloorViolation(f"nodal value {uv.min():.3g} below floor inside margin")
    w = -np.log(uv)

    ii, jj = np.triu_indices(len(nodes), k=1)
    mids = 0.5 * (nodes[ii] + nodes[jj])
    wm = _log_field_values(u, mids, u_floor, "node-pair midpoints")
    c = wm - 0.5 * (w[ii] + w[jj])
    return float(c.max())


def logpde_residual(res: EigenResult, margin: float) -> float:
    """Weak residual of the equation satisfied by w = -ln u, as a weighted max.

    For interior hats phi_i supported in the margin-shrunk region, with
    |grad w| above a relative floor on the support, evaluates
    | int |grad w|^{p-2} grad w . grad phi_i dgamma
      + int (lambda + (p-1)|grad w|^p) phi_i dgamma |
    normalized by int phi_i dgamma, maximized over i. Decreases under mesh
    refinement of the solve.
    """
    u = res.u
    mesh = u.mesh
    p = res.p
    u_floor = U_FLOOR_REL * float(u.values.max())

    node_ok = contains_many(mesh.polygon, mesh.nodes, margin=margin)
    valid = node_ok & (u.values >= u_floor)
    w = np.where(valid, -np.log(np.maximum(u.values, u_floor)), 0.0)

    tri_ok = valid[mesh.triangles].all(axis=1)
    if not tri_ok.any():
        raise EmptyTestSet("no triangle lies inside the margin-shrunk region")
    gw = np.einsum("tl,tlk->tk", w[mesh.triangles], mesh.grads)
    gnorm = np.hypot(gw[:, 0], gw[:, 1])
    g_floor = G_FLOOR_REL * float(gnorm[tri_ok].max())
    tri_ok &= gnorm >= g_floor

    # hat-function test set: node i qualifies when every triangle of its fan
    # qualifies (support inside the region, gradient floor respected)
    fan_count = np.bincount(mesh.triangles.ravel(), minlength=mesh.n_nodes)
    ok_count = np.bincount(mesh.triangles[tri_ok].ravel(), minlength=mesh.n_nodes)
    test_nodes = (fan_count > 0) & (ok_count == fan_count) & mesh.interior_mask
    if not test_nodes.any():
        raise EmptyTestSet("gradient floor and margin leave no interior test hat")

    wsum = mesh.quad_weights.sum(axis=1)
    flux = gnorm ** (p - 2.0)
    # stiffness-like term per (triangle, local vertex)
    stiff = (wsum * flux)[:, None] * np.einsum("tk,tlk->tl", gw, mesh.grads)
    # load term: (lambda + (p-1)|grad w|^p) integrated against the local hats;
    # phi_l is 1/2 at the two midpoints of edges containing l
    dens = res.eigenvalue + (p - 1.0) * gnorm ** p
    b = 0.5 * mesh.quad_weights * dens[:, None]
    load = b + np.roll(b, 1, axis=1)
    hat_mass = 0.5 * mesh.quad_weights
    hat_mass = hat_mass + np.roll(hat_mass, 1, axis=1)

    tri_sel = np.flatnonzero(tri_ok)
    residual = np.bincount(mesh.triangles[tri_sel].ravel(),
                           weights=(stiff + load)[tri_sel].ravel(),
                           minlength=mesh.n_nodes)
    mass = np.bincount(mesh.triangles[tri_sel].ravel(),
                       weights=hat_mass[tri_sel].ravel(),
                       minlength=mesh.n_nodes)
    sel = test_nodes
    return float(np.max(np.abs(residual[sel]) / mass[sel]))


def inf_convolution_trial(res0: EigenResult, res1: EigenResult, t: float,
                          grid_n: int = 64, h: float | None = None) -> float:
    """Rayleigh quotient of the inf-convolution trial field on the combined domain.

    w~(z) = min over x in a grid on Omega_0 of (1-t) w0(x) + t w1((z-(1-t)x)/t),
    with infeasible points contributing +inf; the trial field exp(-w~) on the
    mesh of Omega_t is admissible, so its quotient upper-bounds lambda(Omega_t)
    and realizes the chord bound up to discretization error.
    """
    if not 0.0 < t < 1.0:
        raise ValueError("t must lie strictly between 0 and 1")
    if res0.p != res1.p:
        raise ValueError("both eigenpairs must share the same p")
    u0, u1 = res0.u, res1.u
    P0, P1 = u0.mesh.polygon, u1.mesh.polygon
    Pt = minkowski_combination(P0, P1, t)
    mesh_t = triangulate(Pt, h if h is not None else res0.mesh_h)

    floor0 = U_FLOOR_REL * float(u0.values.max())
    floor1 = U_FLOOR_REL * float(u1.values.max())

    lo = P0.vertices.min(axis=0)
    hi = P0.vertices.max(axis=0)
    gx = np.linspace(lo[0], hi[0], grid_n)
    gy = np.linspace(lo[1], hi[1], grid_n)
    grid = np.stack(np.meshgrid(gx, gy), axis=-1).reshape(-1, 2)
    vals0 = u0.mesh.interpolate(u0.values, grid, fill=0.0)
    feasible = vals0 >= floor0
    if not feasible.any():
        raise GridTooCoarse("no grid point lands inside the first domain")
    grid = grid[feasible]
    w0 = -np.log(vals0[feasible])

    zc = mesh_t.nodes[mesh_t.interior_mask]
    # candidate partners y = (z - (1-t) x) / t for every (z, x) combination
    y = (zc[:, None, :] - (1.0 - t) * grid[None, :, :]) / t
    vals1 = u1.mesh.interpolate(u1.values, y.reshape(-1, 2), fill=0.0)
    vals1 = vals1.reshape(len(zc), len(grid))
    w1 = np.where(vals1 >= floor1, -np.log(np.maximum(vals1, floor1)), np.inf)
    wt = np.min((1.0 - t) * w0[None, :] + t * w1, axis=1)
    if not np.all(np.isfinite(wt)):
        raise GridTooCoarse(
            f"{int(np.sum(~np.isfinite(wt)))} interior nodes of the combined "
            "domain found no feasible grid pair; increase grid_n")

    trial = np.zeros(mesh_t.n_nodes)
    trial[mesh_t.interior_mask] = np.exp(-wt)
    return rayleigh_quotient(NodalField(mesh_t, trial), EnergyParams(res0.p, 0.0))


def default_bm_tolerance(lambda0: float, lambda1: float, h: float,
                         solver_rtol: float = 1e-6, mesh_coeff: float = 1.0) -> float:
    """Slack allowance: solver tolerance plus an O(h^2) discretization term."""
    scale = max(lambda0, lambda1)
    return (solver_rtol + mesh_coeff * h * h) * scale


def bm_sweep(P0: ConvexPolygon, P1: ConvexPolygon, cfg: SolverConfig, h: float,
             t_grid, tolerance: float | None = None, n_threads: int = 1) -> BMReport:
    """Solve along (1-t)*P0 + t*P1 and compare lambda(t) to the chord.

    The chord is (1-t)*lambda(0) + t*lambda(1) from the endpoint solves, so
    the slack vanishes identically at t = 0 and t = 1; the inequality holds
    when the minimum slack stays above -tolerance. Sweep points are
    independent solves and may run on a thread pool.
    """
    t_grid = [float(t) for t in t_grid]
    if 0.0 not in t_grid or 1.0 not in t_grid:
        raise ValueError("t_grid must contain both endpoints 0 and 1")

    def solve_at(t):
        Pt = minkowski_combination(P0, P1, t)
        return solve_first_eigenpair(Pt, cfg, h).eigenvalue

    if n_threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            lambdas = list(pool.map(solve_at, t_grid))
    else:
        lambdas = [solve_at(t) for t in t_grid]
    lam0 = lambdas[t_grid.index(0.0)]
    lam1 = lambdas[t_grid.index(1.0)]
    if tolerance is None:
        tolerance = default_bm_tolerance(lam0, lam1, h)
    chord = [(1.0 - t) * lam0 + t * lam1 for t in t_grid]
    slack = [c - l for c, l in zip(chord, lambdas)]
    min_slack = min(slack)
    return BMReport(
        t_grid=t_grid,
        lambda_t=lambdas,
        chord_t=chord,
        slack_t=slack,
        min_slack=float(min_slack),
        tolerance=float(tolerance),
        verdict=min_slack >= -tolerance,
    )


def write_bm_csv(report: BMReport, path) -> None:
    with open(path, "w") as fh:
        fh.write("t,lambda_t,chord_t,slack_t\n")
        for t, l, c, s in zip(report.t_grid, report.lambda_t,
                              report.chord_t, report.slack_t):
            fh.write(f"{t!r},{l!r},{c!r},{s!r}\n")


def write_concavity_csv(report: ConcavityReport, path) -> None:
    with open(path, "w") as fh:
        fh.write("pairs,worst_violation,tolerance,verdict\n")
        fh.write(f"{report.n_pairs_tested},{report.worst_violation!r},"
                 f"{report.tolerance!r},{'pass' if report.verdict else 'fail'}\n")

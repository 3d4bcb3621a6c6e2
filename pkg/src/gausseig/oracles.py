"""Independent reference solutions for validating assembly and solver.

Each oracle re-derives element geometry and quadrature factors from raw
node/triangle arrays and uses its own linear algebra, so agreement with the
energy/eigensolver path is evidence rather than tautology.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.optimize
import scipy.sparse
import scipy.sparse.linalg
from scipy.integrate import quad

from .energy import NodalField
from .errors import QuadratureFailure, SingularSystem
from .mesh import TriMesh

# hat-function values at the three mid-edge quadrature points:
# PHI[l, m] = phi_l evaluated at midpoint of local edge m
_PHI = np.array([[0.5, 0.0, 0.5],
                 [0.5, 0.5, 0.0],
                 [0.0, 0.5, 0.5]])

_FLOOR = 1e-14  # same smoothing-floor convention as the discrete functional


@dataclass(eq=False)
class RadialSolution:
    """Tabulated radial solution of the weighted capacitary problem on an annulus.

    phi(r) = int_{r0}^{r} f(t)^alpha dt / int_{r0}^{r1} f(t)^alpha dt with
    f(t) = e^{t^2/2} t^{-(n-1)}. The exponent alpha = 1/(p-1) is the one
    forced by constancy of the radial flux e^{-r^2/2} r^{n-1} |phi'|^{p-2} phi'.
    """

    r0: float
    r1: float
    n_dim: int
    p: float
    alpha: float
    rs: np.ndarray
    phis: np.ndarray

    def tabulate(self, num_samples: int):
        """Fresh (r, phi) table at the requested resolution."""
        return _tabulate_phi(self.r0, self.r1, self.n_dim, self.alpha, num_samples)


def _tabulate_phi(r0, r1, n_dim, alpha, num_samples):
    def f(t):
        return np.exp(alpha * (0.5 * t * t - (n_dim - 1) * np.log(t)))

    rs = np.linspace(r0, r1, num_samples)
    segs = np.empty(num_samples - 1)
    for i in range(num_samples - 1):
        val, err = quad(f, rs[i], rs[i + 1], limit=200)
        if not np.isfinite(val) or err > 1e-10 * max(abs(val), 1e-300):
            raise QuadratureFailure(
                f"segment [{rs[i]}, {rs[i + 1]}]: value {val}, error estimate {err}")
        segs[i] = val
    total = segs.sum()
    if total <= 0.0:
        raise QuadratureFailure("non-positive normalization integral")
    phis = np.concatenate([[0.0], np.cumsum(segs)]) / total
    phis[-1] = 1.0
    return rs, phis


def radial_annulus_solution(r0: float, r1: float, n_dim: int, p: float,
                            num_samples: int = 201, exponent: float | None = None
                            ) -> RadialSolution:
    """Tabulate the radial annulus solution by adaptive 1-D quadrature.

    exponent defaults to 1/(p-1); passing p-1 reproduces a printed variant
    that the residual check demonstrates to be wrong for p != 2.
    """
    if not (0.0 < r0 < r1):
        raise ValueError("need 0 < r0 < r1")
    if not p > 1.0:
        raise ValueError("need p > 1")
    if n_dim < 2:
        raise ValueError("need n_dim >= 2")
    alpha = 1.0 / (p - 1.0) if exponent is None else float(exponent)
    rs, phis = _tabulate_phi(r0, r1, n_dim, alpha, num_samples)
    if np.any(np.diff(phis) <= 0.0):
        raise QuadratureFailure("tabulated phi is not strictly increasing")
    return RadialSolution(r0, r1, n_dim, p, alpha, rs, phis)


def radial_residual_check(sol: RadialSolution, h: float) -> float:
    """Max discrete residual of (e^{-r^2/2} r^{n-1} |phi'|^{p-2} phi')' = 0.

    phi is retabulated at spacing ~h, differentiated by centered differences;
    the result tends to 0 under refinement iff the tabulated exponent solves
    the radial equation.
    """
    m = max(5, int(round((sol.r1 - sol.r0) / h)) + 1)
    rs, phis = sol.tabulate(m)
    dr = rs[1] - rs[0]
    dphi = np.diff(phis) / dr
    rm = 0.5 * (rs[:-1] + rs[1:])
    flux = np.exp(-0.5 * rm * rm) * rm ** (sol.n_dim - 1) \
        * np.abs(dphi) ** (sol.p - 2.0) * dphi
    return float(np.max(np.abs(np.diff(flux) / dr)))


def _element_factors(nodes, triangles):
    """Areas, hat gradients and Gaussian mid-edge weights from raw arrays."""
    pts = nodes[triangles]
    e1 = pts[:, 1] - pts[:, 0]
    e2 = pts[:, 2] - pts[:, 0]
    two_area = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    grads = np.empty((len(triangles), 3, 2))
    for l in range(3):
        a = pts[:, (l + 1) % 3]
        b = pts[:, (l + 2) % 3]
        grads[:, l, 0] = (a[:, 1] - b[:, 1]) / two_area
        grads[:, l, 1] = (b[:, 0] - a[:, 0]) / two_area
    mids = np.stack([0.5 * (pts[:, i] + pts[:, j]) for i, j in ((0, 1), (1, 2), (2, 0))],
                    axis=1)
    weights = (two_area[:, None] / 6.0) * np.exp(-0.5 * np.sum(mids * mids, axis=2))
    return 0.5 * two_area, grads, weights


def linear_p2_eigensolve(mesh: TriMesh, tol: float = 1e-12, max_iters: int = 500):
    """Smallest eigenpair of the weighted linear problem K u = lambda M u.

    Weighted stiffness and mass are assembled over interior nodes with the
    3-point mid-edge rule; the smallest eigenvalue comes from inverse power
    iteration with a sparse LU inner solve. Returns (lambda, NodalField).
    """
    if mesh.n_interior < 1:
        raise SingularSystem("mesh has no interior node")
    _, grads, weights = _element_factors(mesh.nodes, mesh.triangles)
    wsum = weights.sum(axis=1)

    interior = np.flatnonzero(mesh.interior_mask)
    index = -np.ones(mesh.n_nodes, dtype=np.int64)
    index[interior] = np.arange(len(interior))

    rows, cols, kvals, mvals = [], [], [], []
    for t, tri in enumerate(mesh.triangles):
        loc = index[tri]
        for l1 in range(3):
            if loc[l1] < 0:
                continue
            for l2 in range(3):
                if loc[l2] < 0:
                    continue
                rows.append(loc[l1])
                cols.append(loc[l2])
                kvals.append(wsum[t] * float(grads[t, l1] @ grads[t, l2]))
                mvals.append(float(weights[t] @ (_PHI[l1] * _PHI[l2])))
    n = len(interior)
    K = scipy.sparse.csc_matrix((kvals, (rows, cols)), shape=(n, n))
    M = scipy.sparse.csc_matrix((mvals, (rows, cols)), shape=(n, n))

    try:
        solve = scipy.sparse.linalg.splu(K).solve
    except RuntimeError as exc:
        raise SingularSystem(f"stiffness factorization failed: {exc}") from exc

    x = np.ones(n)
    lam_old = np.inf
    for _ in range(max_iters):
        y = solve(M @ x)
        y /= np.sqrt(float(y @ (M @ y)))
        lam = float(y @ (K @ y)) / float(y @ (M @ y))
        x = y
        if abs(lam - lam_old) <= tol * max(1.0, abs(lam)):
            break
        lam_old = lam

    if x.sum() < 0.0:
        x = -x
    full = np.zeros(mesh.n_nodes)
    full[interior] = x / np.sqrt(float(x @ (M @ x)))
    return lam, NodalField(mesh, full)


def _rq_batch(nodes, triangles, weights, grads, p, eps, fields):
    """Rayleigh quotients of many full-size nodal fields, own integration path."""
    floor = _FLOOR if eps < _FLOOR else 0.0
    U = fields[:, triangles]                         # (F, T, 3)
    um = 0.5 * (U + np.roll(U, -1, axis=2))
    g = np.einsum("ftl,tlk->ftk", U, grads)
    g2 = np.sum(g * g, axis=2)
    s = floor + eps * um * um + g2[..., None]
    E = np.sum(weights[None] * s ** (0.5 * p), axis=(1, 2))
    N = np.sum(weights[None] * np.abs(um) ** p, axis=(1, 2))
    return E / N


def brute_force_min(mesh: TriMesh, params, n_samples: int = 100_000,
                    rng_seed: int = 0, n_polish: int = 10) -> float:
    """Minimum Rayleigh quotient over random positive fields plus local descent.

    Only meaningful on very coarse meshes (<= 12 interior nodes); serves as
    an upper/consistency bound for the solver on the same mesh.
    """
    if mesh.n_interior > 12:
        raise ValueError(f"brute force needs <= 12 interior nodes, got {mesh.n_interior}")
    _, grads, weights = _element_factors(mesh.nodes, mesh.triangles)
    interior = np.flatnonzero(mesh.interior_mask)
    rng = np.random.default_rng(rng_seed)

    def embed(X):
        F = np.zeros((len(X), mesh.n_nodes))
        F[:, interior] = X
        return F

    best_r = np.inf
    leaders: list[tuple[float, np.ndarray]] = []
    chunk = max(1, int(2e6 // (len(mesh.triangles) * 3 + 1)))
    remaining = int(n_samples)
    while remaining > 0:
        take = min(chunk, remaining)
        X = rng.uniform(0.05, 1.0, (take, len(interior)))
        R = _rq_batch(mesh.nodes, mesh.triangles, weights, grads,
                      params.p, params.eps, embed(X))
        order = np.argsort(R)[: n_polish]
        for i in order:
            leaders.append((float(R[i]), X[i].copy()))
        best_r = min(best_r, float(R.min()))
        remaining -= take
    leaders.sort(key=lambda t: t[0])
    leaders = leaders[:n_polish]

    def rq_one(x):
        return float(_rq_batch(mesh.nodes, mesh.triangles, weights, grads,
                               params.p, params.eps, embed(x[None]))[0])

    for _, x0 in leaders:
        res = scipy.optimize.minimize(rq_one, x0, method="BFGS",
                                      options={"gtol": 1e-10, "maxiter": 400})
        best_r = min(best_r, float(res.fun))
    return best_r

"""Regularized Gaussian p-Dirichlet energy, p-norm constraint, Rayleigh quotient.

The drift term of the weighted operator is never assembled: the factor
e^{-|x|^2/2} baked into the mesh quadrature weights encodes it, so plain
divergence-form element integrals suffice.

All three functionals (energy, constraint, their gradients) share the mesh's
3-point mid-edge quadrature; that consistency is what makes the quotient's
minimizer a discrete eigenfunction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BoundaryViolation, ZeroField
from .mesh import TriMesh

# smoothing floor added to (eps*u^2 + |grad u|^2) when eps is effectively
# zero, removing the gradient degeneracy of p < 2; part of the discrete
# functional and of its exact gradient
EPS_FLOOR = 1e-14
BOUNDARY_ZERO_TOL = 1e-14
CONSTRAINT_MIN = 1e-300


@dataclass(frozen=True)
class EnergyParams:
    """Exponent p > 1 and regularization eps >= 0."""

    p: float
    eps: float = 0.0

    def __post_init__(self):
        if not self.p > 1.0:
            raise ValueError(f"p must satisfy p > 1, got {self.p}")
        if self.eps < 0.0:
            raise ValueError(f"eps must be >= 0, got {self.eps}")

    @property
    def floor(self) -> float:
        return EPS_FLOOR if self.eps < EPS_FLOOR else 0.0


@dataclass(eq=False)
class NodalField:
    """Nodal values of a P1 function on a TriMesh."""

    mesh: TriMesh
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.mesh.n_nodes,):
            raise ValueError(f"expected {self.mesh.n_nodes} values, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("non-finite nodal values")
        self.values = v

    @classmethod
    def zero(cls, mesh: TriMesh) -> "NodalField":
        return cls(mesh, np.zeros(mesh.n_nodes))

    @classmethod
    def from_function(cls, mesh: TriMesh, f, zero_boundary: bool = False) -> "NodalField":
        vals = np.asarray(f(mesh.nodes), dtype=float)
        if zero_boundary:
            vals = vals.copy()
            vals[mesh.boundary_mask] = 0.0
        return cls(mesh, vals)

    def copy(self) -> "NodalField":
        return NodalField(self.mesh, self.values.copy())


def _require_boundary_zeros(u: NodalField) -> None:
    worst = np.abs(u.values[u.mesh.boundary_mask])
    if worst.size and worst.max() > BOUNDARY_ZERO_TOL:
        raise BoundaryViolation(
            f"boundary node value {worst.max():.3g} exceeds {BOUNDARY_ZERO_TOL}")


def _midpoint_values(mesh: TriMesh, v: np.ndarray) -> np.ndarray:
    """Field values at the mid-edge quadrature points, shape (T, 3)."""
    tv = v[mesh.triangles]
    return 0.5 * (tv + np.roll(tv, -1, axis=1))


def _tri_gradients(mesh: TriMesh, v: np.ndarray) -> np.ndarray:
    """Constant P1 gradient per triangle, shape (T, 2)."""
    return np.einsum("tl,tlk->tk", v[mesh.triangles], mesh.grads)


def dirichlet_energy(u: NodalField, params: EnergyParams) -> float:
    """Integral of (floor + eps*u^2 + |grad u|^2)^(p/2) against the Gaussian weight."""
    _require_boundary_zeros(u)
    mesh = u.mesh
    um = _midpoint_values(mesh, u.values)
    g2 = np.sum(_tri_gradients(mesh, u.values) ** 2, axis=1)
    s = params.floor + params.eps * um * um + g2[:, None]
    return float(np.sum(mesh.quad_weights * s ** (0.5 * params.p)))


def p_norm_constraint(u: NodalField, p: float) -> float:
    """Integral of |u|^p against the Gaussian weight."""
    if not p > 1.0:
        raise ValueError(f"p must satisfy p > 1, got {p}")
    mesh = u.mesh
    um = _midpoint_values(mesh, u.values)
    return float(np.sum(mesh.quad_weights * np.abs(um) ** p))


def rayleigh_quotient(u: NodalField, params: EnergyParams) -> float:
    """dirichlet_energy / p_norm_constraint; invariant under scaling of u."""
    denom = p_norm_constraint(u, params.p)
    if denom < CONSTRAINT_MIN:
        raise ZeroField(f"p-norm constraint {denom:.3g} is numerically zero")
    return dirichlet_energy(u, params) / denom


def _scatter(mesh: TriMesh, local: np.ndarray) -> np.ndarray:
    """Accumulate (T, 3) local contributions into nodal values (fixed order)."""
    return np.bincount(mesh.triangles.ravel(), weights=local.ravel(),
                       minlength=mesh.n_nodes)


def energy_gradient(u: NodalField, params: EnergyParams) -> NodalField:
    """Exact gradient of dirichlet_energy w.r.t. nodal values, zeroed on the boundary."""
    _require_boundary_zeros(u)
    mesh = u.mesh
    p, eps = params.p, params.eps
    um = _midpoint_values(mesh, u.values)
    grad_u = _tri_gradients(mesh, u.values)
    g2 = np.sum(grad_u ** 2, axis=1)
    s = params.floor + eps * um * um + g2[:, None]
    # s^((p-2)/2) with the convention 0^negative -> 0: the cofactor vanishes
    # there too, and the one-sided derivative of s^(p/2) at s=0 is 0 for p>1
    with np.errstate(divide="ignore"):
        a = np.where(s > 0.0, s, 1.0) ** (0.5 * p - 1.0)
    a = np.where(s > 0.0, a, 0.0) * mesh.quad_weights

    coef = a.sum(axis=1)                                # (T,)
    local = p * coef[:, None] * np.einsum("tk,tlk->tl", grad_u, mesh.grads)
    if eps > 0.0:
        b = 0.5 * p * eps * a * um                      # midpoint contributions
        local = local + b + np.roll(b, 1, axis=1)
    out = _scatter(mesh, local)
    out[mesh.boundary_mask] = 0.0
    return NodalField(mesh, out)


def p_norm_gradient(u: NodalField, p: float) -> NodalField:
    """Gradient of p_norm_constraint w.r.t. nodal values, zeroed on the boundary."""
    if not p > 1.0:
        raise ValueError(f"p must satisfy p > 1, got {p}")
    mesh = u.mesh
    um = _midpoint_values(mesh, u.values)
    b = 0.5 * p * mesh.quad_weights * np.abs(um) ** (p - 1.0) * np.sign(um)
    out = _scatter(mesh, b + np.roll(b, 1, axis=1))
    out[mesh.boundary_mask] = 0.0
    return NodalField(mesh, out)


def rayleigh_gradient(u: NodalField, params: EnergyParams) -> tuple[float, NodalField]:
    """Quotient value and its constrained gradient (dE - R*dN)/N in one pass."""
    denom = p_norm_constraint(u, params.p)
    if denom < CONSTRAINT_MIN:
        raise ZeroField(f"p-norm constraint {denom:.3g} is numerically zero")
    value = dirichlet_energy(u, params) / denom
    g = (energy_gradient(u, params).values
         - value * p_norm_gradient(u, params.p).values) / denom
    return value, NodalField(u.mesh, g)

import numpy as np
import pytest
from scipy.integrate import quad

import gausseig as g
from gausseig.errors import ResolutionTooCoarse
from gausseig.geometry import rectangle, regular_polygon
from gausseig.mesh import write_mesh_text


def gauss_weighted_area_square(a):
    """Reference integral of e^{-|x|^2/2} over [-a, a]^2 (1-D product rule)."""
    one_d, _ = quad(lambda x: np.exp(-0.5 * x * x), -a, a, limit=200)
    return one_d * one_d


def test_triangulate_unit_square_coarse(mesh_cache):
    m = mesh_cache("unit_square", 0.5)
    assert m.n_interior >= 1
    assert m.areas.sum() == pytest.approx(1.0, rel=1e-10)


def test_triangulate_too_coarse():
    S = g.validate([(0, 0), (1, 0), (1, 1), (0, 1)])
    with pytest.raises(ResolutionTooCoarse):
        g.triangulate(S, 2.0)


def test_triangulate_triangle_area():
    T = g.validate([(0, 0), (1, 0), (0, 1)])
    m = g.triangulate(T, 0.05)
    assert m.areas.sum() == pytest.approx(0.5, rel=1e-10)


@pytest.mark.parametrize("name,h", [("unit_square", 0.3), ("unit_square", 0.1),
                                    ("gon16", 0.15), ("rect3x1", 0.2)])
def test_mesh_invariants(mesh_cache, name, h):
    m = mesh_cache(name, h)
    assert np.all(m.areas > 0)
    assert m.areas.sum() == pytest.approx(m.polygon.area, rel=1e-10)
    bdist = m.polygon.boundary_distance(m.nodes)
    assert np.all(np.abs(bdist[m.boundary_mask]) <= 1e-10 * h)
    assert np.all(bdist[m.interior_mask] > 0)
    assert np.all(m.quad_weights > 0)
    assert m.max_edge_length <= 2.0 * h
    # the three hat gradients of any triangle sum to zero
    assert np.allclose(m.grads.sum(axis=1), 0.0, atol=1e-12)


def test_quadrature_zero_and_odd_symmetry():
    m = g.triangulate(rectangle(1.0, 1.0), 0.1)
    assert g.quadrature_integrate(m, lambda pts: np.zeros(len(pts))) == 0.0
    # odd integrand on a domain symmetric about the x2-axis
    val = g.quadrature_integrate(m, lambda pts: pts[:, 0])
    assert abs(val) <= 1e-12


def test_quadrature_tiny_square_against_product_rule():
    a = 0.01
    m = g.triangulate(rectangle(2 * a, 2 * a), 0.004)
    got = g.quadrature_integrate(m, lambda pts: np.ones(len(pts)))
    expect = gauss_weighted_area_square(a)
    assert got == pytest.approx(expect, rel=1e-4)
    assert got == pytest.approx(4 * a * a, rel=1e-4)


def test_quadrature_refinement_order():
    S = rectangle(2.0, 2.0)
    exact = gauss_weighted_area_square(1.0)
    hs = np.array([0.4, 0.2, 0.1, 0.05])
    errs = []
    for h in hs:
        m = g.triangulate(S, h)
        errs.append(abs(g.quadrature_integrate(m, lambda p: np.ones(len(p))) - exact))
    # least-squares slope: node placement jitters the constant, so single
    # consecutive ratios are noisy while the trend is ~O(h^2)
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert slope >= 1.5
    assert errs[-1] < errs[0]


def test_quadrature_accepts_nonvectorized_callable():
    m = g.triangulate(rectangle(1.0, 1.0), 0.3)
    v1 = g.quadrature_integrate(m, lambda pts: np.ones(len(pts)))
    v2 = g.quadrature_integrate(m, lambda q: 1.0)
    assert v1 == pytest.approx(v2, rel=1e-15)


def test_interpolate_nodal_exactness_and_outside_fill(mesh_cache):
    m = mesh_cache("unit_square", 0.2)
    rng = np.random.default_rng(1)
    vals = rng.normal(size=m.n_nodes)
    got = m.interpolate(vals, m.nodes)
    assert np.allclose(got, vals, atol=1e-12)
    out = m.interpolate(vals, np.array([[5.0, 5.0]]), fill=-7.0)
    assert out[0] == -7.0


def test_refine_uniform_nesting_and_marks(mesh_cache):
    m = mesh_cache("unit_square", 0.3)
    r = g.refine_uniform(m)
    assert len(r.triangles) == 4 * len(m.triangles)
    assert r.areas.sum() == pytest.approx(m.polygon.area, rel=1e-10)
    # original nodes keep their values under interpolation (nested spaces)
    rng = np.random.default_rng(2)
    vals = rng.normal(size=m.n_nodes)
    fine_vals = m.interpolate(vals, r.nodes)
    assert np.allclose(fine_vals[: m.n_nodes], vals, atol=1e-12)
    bdist = r.polygon.boundary_distance(r.nodes)
    assert np.all(np.abs(bdist[r.boundary_mask]) <= 1e-9)
    assert np.all(bdist[r.interior_mask] > 0)


def test_mesh_dump_format(tmp_path, mesh_cache):
    m = mesh_cache("unit_square", 0.4)
    path = tmp_path / "mesh.txt"
    write_mesh_text(m, path)
    lines = path.read_text().strip().split("\n")
    assert len(lines) == m.n_nodes + len(m.triangles)
    x, y, flag = lines[0].split()
    assert flag in ("0", "1")
    i, j, k = map(int, lines[-1].split())
    assert 0 <= min(i, j, k) and max(i, j, k) < m.n_nodes


def test_mesh_arrays_immutable(mesh_cache):
    # finished meshes are shared across workers; their arrays are read-only
    m = mesh_cache("unit_square", 0.4)
    for arr in (m.nodes, m.triangles, m.boundary_mask, m.areas, m.grads,
                m.quad_points, m.quad_weights):
        with pytest.raises((ValueError, RuntimeError)):
            arr[0] = arr[0]


def test_hexagon_and_triangle_domains_mesh():
    for P in (regular_polygon(6, 1.0), g.validate([(0, 0), (2, 0), (1, 1.5)])):
        m = g.triangulate(P, 0.2)
        assert m.areas.sum() == pytest.approx(P.area, rel=1e-10)
        assert m.n_interior > 0

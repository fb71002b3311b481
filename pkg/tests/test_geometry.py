import numpy as np
import pytest

from alphaharm import catalog
from alphaharm.geometry import (
    DiscreteVertexMap,
    FlatTorus,
    HyperbolicPlane,
    MeshParseError,
    UnitSphere,
    differential,
    flat_torus,
    hs_norm_sq,
    icosphere,
    integrate,
    read_mesh,
    sphere2,
    square_grid,
    torus_grid,
    write_obj,
    write_off,
)
from alphaharm.geometry.jets import christoffel
from alphaharm._jax import jnp


def test_icosphere_counts_and_area():
    errs = []
    for k in range(4):
        m = icosphere(k)
        assert m.n_faces == 20 * 4**k
        assert np.allclose(np.linalg.norm(m.vertices, axis=1), 1.0)
        errs.append(abs(m.total_area - 4 * np.pi))
    assert all(b < a for a, b in zip(errs, errs[1:]))


def test_torus_grid_is_unwrapped_and_flat():
    m = torus_grid(8, 5)
    assert m.total_area == pytest.approx(4 * np.pi**2, rel=1e-13)
    assert np.allclose(m.face_areas, m.face_areas[0])
    assert np.allclose(m.vertex_areas.sum(), m.total_area)


def test_degenerate_triangle_rejected():
    with pytest.raises(ValueError, match="degenerate triangle"):
        from alphaharm.geometry import DomainMesh

        DomainMesh(np.array([[0, 0.0], [1, 0], [2, 0]]), np.array([[0, 1, 2]]))


def test_off_obj_round_trip(tmp_path):
    m = icosphere(1)
    for name, writer in (("m.off", write_off), ("m.obj", write_obj)):
        path = tmp_path / name
        writer(m, path)
        back = read_mesh(path)
        assert np.array_equal(back.faces, m.faces)
        assert np.allclose(back.vertices, m.vertices, rtol=0, atol=1e-15)


def test_mesh_parse_error_has_line_number(tmp_path):
    path = tmp_path / "bad.off"
    path.write_text("OFF\n3 1 0\n0 0 0\n1 0 x\n0 1 0\n3 0 1 2\n")
    with pytest.raises(MeshParseError, match=r"bad\.off:4"):
        read_mesh(path)
    quad = tmp_path / "quad.obj"
    quad.write_text("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n")
    with pytest.raises(MeshParseError, match=r":5: only triangular"):
        read_mesh(quad)


def test_sphere_retraction_displacement_is_exact():
    rng = np.random.default_rng(0)
    tgt = UnitSphere(2)
    p = tgt.project(rng.standard_normal((200, 3)))
    v = tgt.tangent_project(p, 1e-9 * rng.standard_normal((200, 3)))
    new, delta = tgt.retract_with_displacement(p, v)
    assert np.allclose(np.linalg.norm(new, axis=1), 1.0)
    # the displacement agrees with the retraction to first order and is not rounding noise
    assert np.allclose(delta, v, rtol=0, atol=1e-17)
    assert np.allclose(p + delta, new, rtol=0, atol=4e-16)


def test_torus_difference_wraps():
    t = FlatTorus(2)
    a = np.array([0.1, 6.2])
    b = np.array([6.2, 0.1])
    d = t.difference(a, b)
    assert np.allclose(d, [6.1 - 2 * np.pi, 2 * np.pi - 6.1])


def test_hyperbolic_metric_and_curvature():
    h = HyperbolicPlane()
    p = np.array([0.3, -0.2])
    s = h.metric_scale(p)
    assert s == pytest.approx(4 / (1 - 0.13) ** 2)
    X, Y = np.array([1.0, 0]), np.array([0, 1.0])
    # sectional curvature -1: h(R(X,Y)Y, X) = -(|X|^2|Y|^2 - h(X,Y)^2)
    R = h.curvature(p, X, Y, Y)
    assert s * R @ X == pytest.approx(-(s * s))


def test_mesh_identity_density_converges_to_two():
    errs = []
    for k in (2, 3, 4):
        m = icosphere(k)
        psi = DiscreteVertexMap(m, UnitSphere(2), m.vertices)
        x = hs_norm_sq(psi)
        errs.append(abs(integrate(m, x) / m.total_area - 2.0))
    assert errs[-1] < 1e-3
    assert errs[0] > errs[1] > errs[2]


def test_differential_shapes(mesh_identity_s2, identity_s2):
    D = differential(mesh_identity_s2)
    assert D.shape == (mesh_identity_s2.domain.n_faces, 3, 2)
    assert differential(identity_s2, element=0).shape == (3, 2)
    with pytest.raises(IndexError):
        differential(identity_s2, element=10**6)


def test_sphere_christoffel_symbols():
    dom = sphere2(4, 8)
    u = jnp.array([0.7, 0.3])
    _, _, gam = christoffel(dom.metric, u)
    # round metric dtheta^2 + sin^2 theta dphi^2
    assert float(gam[0, 1, 1]) == pytest.approx(-np.sin(0.7) * np.cos(0.7))
    assert float(gam[1, 0, 1]) == pytest.approx(np.cos(0.7) / np.sin(0.7))


def test_analytic_volumes():
    assert sphere2(12, 24).integrate_values(np.ones(12 * 24)) == pytest.approx(4 * np.pi, rel=1e-12)
    s3 = catalog.sphere_identity(3, n=12).domain
    assert s3.integrate_values(np.ones(s3.n_points)) == pytest.approx(2 * np.pi**2, rel=1e-9)
    t3 = flat_torus(3, 4)
    assert t3.integrate_values(np.ones(t3.n_points)) == pytest.approx((2 * np.pi) ** 3, rel=1e-12)


def test_off_manifold_values_rejected(ico3):
    with pytest.raises(ValueError, match="off the target manifold"):
        DiscreteVertexMap(ico3, UnitSphere(2), 1.01 * ico3.vertices)


def test_square_grid_area():
    assert square_grid(5, (2.0, 3.0)).total_area == pytest.approx(6.0)

import numpy as np
import pytest

from alphaharm import catalog
from alphaharm.geometry import DiscreteVertexMap, FlatTorus, UnitSphere, icosphere
from alphaharm.geometry.fields import VariationField
from alphaharm.stability import (
    MAX_STABILITY_VERTICES,
    ParallelFrame,
    assemble_index_matrix,
    fd_second_variation,
    index_form,
    instability_bound,
    instability_certificate,
    instability_integrand,
    instability_sum,
    integrand_sign_check,
    jacobi_apply,
    jacobi_pairing,
    lambda_top_field,
    stability_eigenvalue,
    verify_lemma73,
)

# Frame sum for the identity of S^3 at alpha = 2: constant integrand 24 over volume 2 pi^2.
# The n=12 quadrature integrates the volume to a relative error of about 3e-10.
IDENTITY_S3_ALPHA2 = 48 * np.pi**2


def random_tangent(psi, seed, scale=1.0):
    rng = np.random.default_rng(seed)
    return VariationField(psi, values=psi.target.tangent_project(psi.values, scale * rng.standard_normal(psi.values.shape)))


@pytest.fixture(scope="module")
def ico2():
    return icosphere(2)


@pytest.fixture(scope="module")
def mesh_equator_s3(ico3):
    vals = np.hstack([ico3.vertices, np.zeros((ico3.n_vertices, 1))])
    return DiscreteVertexMap(ico3, UnitSphere(3), vals, name="equator")


def test_index_form_symmetric_bilinear(perturbed_maps):
    for psi in perturbed_maps:
        v, w, z = (random_tangent(psi, s) for s in (1, 2, 3))
        assert index_form(psi, 1.7, v, w) == pytest.approx(index_form(psi, 1.7, w, v), rel=1e-12)
        vz = VariationField(psi, values=v.values + 2.0 * z.values)
        lhs = index_form(psi, 1.7, vz, w)
        rhs = index_form(psi, 1.7, v, w) + 2.0 * index_form(psi, 1.7, z, w)
        assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10)


def test_analytic_index_form_matches_fd(identity_s2):
    v = lambda_top_field(identity_s2, [0.3, -0.5, 0.8])
    I = index_form(identity_s2, 2.0, v, v)
    assert fd_second_variation(identity_s2, 2.0, v, step=1e-2) == pytest.approx(I, rel=1e-7)


def test_mesh_index_form_matches_fd_flat_target(torus16):
    psi = DiscreteVertexMap(torus16, FlatTorus(2), torus16.vertices.copy())
    v = random_tangent(psi, 5, 0.1)
    I = index_form(psi, 2.0, v, v)
    assert fd_second_variation(psi, 2.0, v, step=1e-2) == pytest.approx(I, rel=1e-8)


def test_fd_step_underflow(identity_s2):
    v = lambda_top_field(identity_s2, [0, 0, 1.0])
    with pytest.raises(ValueError, match="underflows"):
        fd_second_variation(identity_s2, 2.0, v, step=1e-7)


def test_jacobi_duality(latitude_stretch):
    rng = np.random.default_rng(0)
    lam1, lam2 = rng.standard_normal(3), rng.standard_normal(3)
    v, w = lambda_top_field(latitude_stretch, lam1), lambda_top_field(latitude_stretch, lam2)
    assert jacobi_pairing(latitude_stretch, 1.8, v, w) == pytest.approx(index_form(latitude_stretch, 1.8, v, w),
                                                                        rel=1e-9)


def test_jacobi_requires_analytic(mesh_identity_s2):
    v = random_tangent(mesh_identity_s2, 0)
    with pytest.raises(TypeError, match="requires analytic representation"):
        jacobi_apply(mesh_identity_s2, 2.0, v)


def test_matrix_reproduces_index_form(perturbed_maps):
    psi = perturbed_maps[0]
    M = assemble_index_matrix(psi, 2.0)
    v, w = random_tangent(psi, 11), random_tangent(psi, 12)
    cv, cw = M.coefficients(v), M.coefficients(w)
    assert M.quadratic(cv, cw) == pytest.approx(index_form(psi, 2.0, v, w), rel=1e-10)
    assert np.allclose(M.to_field(cv).values, v.values, atol=1e-12)
    assert np.allclose(M.matrix, M.matrix.T)


def test_identity_s2_is_stable(ico2):
    psi = DiscreteVertexMap(ico2, UnitSphere(2), ico2.vertices)
    lam, mode = stability_eigenvalue(assemble_index_matrix(psi, 2.0))
    assert lam > 0.05
    assert mode.values.shape == psi.values.shape


def test_equator_s2_in_s3_is_unstable(mesh_equator_s3):
    lam, _ = stability_eigenvalue(assemble_index_matrix(mesh_equator_s3, 1.6))
    assert lam < -1.0


def test_matrix_size_limit():
    big = icosphere(4)
    psi = DiscreteVertexMap(big, UnitSphere(2), big.vertices)
    assert big.n_vertices > MAX_STABILITY_VERTICES
    with pytest.raises(ValueError, match="limited to"):
        assemble_index_matrix(psi, 2.0)


def test_matrix_export(tmp_path, ico2):
    psi = DiscreteVertexMap(ico2, UnitSphere(2), ico2.vertices)
    M = assemble_index_matrix(psi, 2.0)
    path = tmp_path / "A.txt"
    count = M.write_coordinates(path)
    lines = path.read_text().splitlines()
    assert lines[0] == f"# {M.size} {M.size}"
    assert len(lines) == count + 1
    back = np.zeros_like(M.matrix)
    for line in lines[1:]:
        r, c, val = line.split()
        back[int(r), int(c)] = float(val)
    assert np.array_equal(back, M.matrix)
    assert len(M.meta["map_hash"]) == 16


@pytest.mark.parametrize("psi_name", ["identity_s2", "identity_s3", "latitude_stretch"])
def test_frame_identities(request, psi_name):
    psi = request.getfixturevalue(psi_name)
    rep = verify_lemma73(psi, ParallelFrame.random(psi.target.ambient_dim, seed=4))
    assert rep.passed, rep.residuals


def test_parallel_frame_validation():
    with pytest.raises(ValueError, match="not orthonormal"):
        ParallelFrame(np.array([[1.0, 0.0], [1.0, 1.0]]))
    F = ParallelFrame.random(4, seed=0)
    assert np.allclose(F.vectors @ F.vectors.T, np.eye(4))


def test_frame_sum_identity_s3(identity_s3):
    # x = 3, alpha = 2, n = 3: integrand 2*2*(1+3)^0*3*((2-3) + (4-3)*3) = 24, volume 2 pi^2
    rep = instability_sum(identity_s3, 2.0)
    assert rep.passed
    assert rep.details["closed_form"] == pytest.approx(IDENTITY_S3_ALPHA2, rel=1e-9)
    assert rep.details["sum"] == pytest.approx(IDENTITY_S3_ALPHA2, rel=1e-9)
    # the form with the extra factor (1 + x) = 4 is four times larger
    assert rep.details["displayed_form"] == pytest.approx(4 * rep.details["closed_form"], rel=1e-14)


def test_frame_sum_matches_fd_oracle(identity_s3):
    frame = ParallelFrame.standard(4)
    fd = sum(fd_second_variation(identity_s3, 2.0, lambda_top_field(identity_s3, lam), step=1e-2) for lam in frame)
    assert fd == pytest.approx(IDENTITY_S3_ALPHA2, rel=1e-6)


def test_frame_sum_is_frame_independent(identity_s3):
    a = instability_sum(identity_s3, 1.6, ParallelFrame.random(4, seed=1)).details["sum"]
    b = instability_sum(identity_s3, 1.6).details["sum"]
    assert a == pytest.approx(b, rel=1e-10)


def test_equator_circle_frame_sum():
    # x = 1, n = 2, alpha = 2: integrand 2*2*2^0*1*(0 + 2*1) = 8 over length 2 pi
    rep = instability_sum(catalog.equator_circle(), 2.0)
    assert rep.details["sum"] == pytest.approx(16 * np.pi, rel=1e-10)


def test_great_circle_certificate():
    # radius 2: x = 1/4, bound (3-2)/(4-3) = 1
    psi = catalog.great_circle(radius=2.0)
    cert = instability_certificate(psi, 2.0)
    assert cert["hypothesis_satisfied"] and cert["verdict"] == "UNSTABLE" and cert["consistent"]
    expected = 2 * 2 * 1.25**0 * 0.25 * (-1 + 0.25) * 4 * np.pi
    assert cert["sum"] == pytest.approx(expected, rel=1e-10)
    cert = instability_certificate(psi, 1.4)
    assert cert["verdict"] == "hypothesis-vacuous" and cert["bound"] is None


def test_identity_s3_alpha16_unstable(identity_s3):
    cert = instability_certificate(identity_s3, 1.6)
    assert cert["bound"] == pytest.approx(5.0)
    assert cert["verdict"] == "UNSTABLE" and cert["hypothesis_satisfied"]


def test_frame_sum_refuses_non_critical(latitude_stretch):
    with pytest.raises(ValueError, match="not alpha-harmonic"):
        instability_sum(latitude_stretch, 2.0)


def test_frame_sum_requires_sphere(torus_shear):
    with pytest.raises(ValueError, match="sphere target"):
        instability_sum(torus_shear, 2.0)


def test_integrand_sign():
    assert integrand_sign_check(2.0, 3).passed
    assert integrand_sign_check(1.6, 3).details["bound"] == pytest.approx(5.0)
    assert integrand_sign_check(1.4, 3).details["status"] == "hypothesis-vacuous"
    assert instability_bound(1.5, 3) is None
    assert instability_integrand(0.0, 2.0, 3) == 0.0

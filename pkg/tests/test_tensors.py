import numpy as np
import pytest

from alphaharm import catalog
from alphaharm.geometry.ops import hs_norm_sq
from alphaharm.tensors import (
    SubmersionTestMap,
    balance_coefficient,
    check_minimal_fibers,
    dilation,
    div_stress_energy,
    fiber_mean_curvature,
    horizontal_mean_curvature,
    hv_split,
    stress_energy,
    stress_energy_trace,
    verify_prop42,
)


@pytest.fixture(scope="module")
def warped():
    return catalog.warped_submersion()


@pytest.fixture(scope="module")
def balanced():
    return catalog.balanced_submersion(alpha=1.4)


@pytest.mark.parametrize("alpha", [1.5, 2.0, 3.0])
def test_divergence_identity(latitude_stretch, latitude_rotation, torus_shear, alpha):
    for psi in (latitude_stretch, latitude_rotation, torus_shear):
        dim = psi.domain.dim
        fields = catalog.coordinate_fields(dim) + [catalog.frame_field(dim)]
        rep = verify_prop42(psi, alpha, fields)
        assert rep.passed, (psi.name, rep.residuals)
        assert rep.details["max_abs_divergence"] > 1e-3


def test_divergence_vanishes_for_critical_maps():
    psi = catalog.torus_linear(np.array([[1.0, 1.0], [0.0, 1.0]]), n=6)
    for Y in catalog.coordinate_fields(2):
        assert np.max(np.abs(div_stress_energy(psi, 2.0, Y))) < 1e-12


def test_divergence_rejects_meshes(mesh_identity_s2):
    with pytest.raises(TypeError, match="requires analytic maps"):
        div_stress_energy(mesh_identity_s2, 2.0, lambda u: u)


def test_stress_energy_identity_sphere(identity_s2):
    # psi^* h = g, |d psi|^2 = 2, so S = 3^alpha g - 2 alpha 3^(alpha-1) g = -3 g at alpha = 2
    S = stress_energy(identity_s2, 2.0).values
    g = identity_s2.domain.metric_values
    assert np.max(np.abs(S + 3.0 * g)) < 1e-12


@pytest.mark.parametrize("alpha", [1.5, 2.0])
def test_stress_energy_trace(latitude_rotation, perturbed_maps, alpha):
    for psi in [latitude_rotation, *perturbed_maps]:
        tr, closed = stress_energy_trace(psi, alpha)
        assert np.allclose(tr, closed, rtol=1e-12, atol=1e-12)


def test_mesh_stress_energy_converges(mesh_identity_s2):
    S = stress_energy(mesh_identity_s2, 2.0).values
    assert S.shape == (mesh_identity_s2.domain.n_faces, 2, 2)
    tr, _ = stress_energy_trace(mesh_identity_s2, 2.0)
    # identity: tr S = 2 (-3) = -6 up to discretisation error
    assert np.max(np.abs(tr + 6.0)) < 1e-2


def test_hopf_dilation_and_minimal_fibres(hopf):
    sub = SubmersionTestMap(hopf)
    assert np.allclose(sub.dilation_sq, 4.0, rtol=1e-12)
    for method in ("frame", "hessian"):
        assert np.max(np.abs(fiber_mean_curvature(sub, method))) < 1e-10


def test_hv_split_on_hopf(hopf):
    sub = SubmersionTestMap(hopf)
    from alphaharm.geometry.ops import differential

    J = differential(hopf)
    g = hopf.domain.metric_values
    rng = np.random.default_rng(3)
    for p in (0, 7, 33):
        X = rng.standard_normal(3)
        XH, XV = hv_split(sub, p, X)
        assert np.allclose(XH + XV, X)
        assert np.linalg.norm(J[p] @ XV) < 1e-10 * np.linalg.norm(X)
        assert abs(XH @ g[p] @ XV) < 1e-10 * (X @ g[p] @ X)


def test_dilation_rejects_non_conformal():
    psi = catalog.torus_linear(np.diag([1.0, 2.0]), n=4)
    with pytest.raises(ValueError, match="not horizontally conformal: anisotropy"):
        dilation(psi)


def test_rank_deficient_rejected(identity_s3):
    from alphaharm.geometry import UnitSphere

    const = catalog.constant_map(identity_s3.domain, UnitSphere(2))
    with pytest.raises(ValueError, match="not surjective"):
        SubmersionTestMap(const)


def test_warped_submersion(warped):
    sub = SubmersionTestMap(warped)
    t = warped.domain.points[:, 0]
    a = warped.meta["amplitude"]
    assert np.allclose(sub.dilation_sq, 1 + a * np.sin(t), rtol=1e-12)
    Hbar = horizontal_mean_curvature(sub, "frame")
    expected = np.zeros_like(Hbar)
    expected[:, 0] = a * np.cos(t) / (2 * (1 + a * np.sin(t)))
    assert np.max(np.abs(Hbar - expected)) < 1e-12
    assert np.max(np.abs(horizontal_mean_curvature(sub, "gradient") - expected)) < 1e-12
    assert np.max(np.abs(fiber_mean_curvature(sub))) < 1e-12


@pytest.mark.parametrize("alpha", [1.5, 2.0, 3.0])
def test_warped_minimal_fibres_check(warped, alpha):
    rep = check_minimal_fibers(warped, alpha)
    assert rep.passed, rep.residuals
    assert rep.details["fibres_minimal"] and rep.details["grad_mu2_vertical"]
    # n = 3 > 2 alpha only for alpha < 1.5
    assert rep.details["status"] == "hypotheses not satisfied"


def test_balanced_submersion_needs_mu_squared(balanced):
    rep = check_minimal_fibers(balanced, 1.4)
    assert rep.details["hypotheses_satisfied"]
    assert rep.passed, rep.residuals
    assert rep.residuals["balance"] < 1e-10
    assert rep.residuals["balance without mu^2"] > 1e-2
    assert not rep.details["fibres_minimal"] and not rep.details["grad_mu2_vertical"]
    assert rep.details["H_prediction_error"] < 1e-10


def test_fibre_curvature_paths_agree(balanced):
    sub = SubmersionTestMap(balanced)
    a, b = fiber_mean_curvature(sub, "frame"), fiber_mean_curvature(sub, "hessian")
    assert np.max(np.abs(a - b)) < 1e-10 * (1 + np.max(np.abs(a)))
    hf, hg = horizontal_mean_curvature(sub, "frame"), horizontal_mean_curvature(sub, "gradient")
    assert np.max(np.abs(hf - hg)) < 1e-10 * (1 + np.max(np.abs(hf)))


def test_general_balance_on_non_harmonic(balanced):
    """Balance plus the tension term vanishes for any horizontally conformal map."""
    rep = check_minimal_fibers(balanced, 2.5)
    assert rep.residuals["general"] < 1e-10
    assert rep.residuals["balance"] > 1e-3


def test_equal_dimensions_have_no_fibres():
    psi = catalog.torus_linear(n=4)
    with pytest.raises(ValueError, match="fibres are points"):
        fiber_mean_curvature(psi)


def test_balance_coefficient_sign():
    # at n = 2 alpha the coefficient is alpha (n-2) (1 + n mu^2)^(alpha-2)
    mu2 = np.linspace(0.1, 5, 20)
    assert np.allclose(balance_coefficient(mu2, 1.5, 3), 1.5 * (1 + 3 * mu2) ** -0.5)

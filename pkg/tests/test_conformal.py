import numpy as np
import pytest

from alphaharm import catalog
from alphaharm._jax import jax
from alphaharm.conformal import (
    build_alpha_harmonic_metric,
    conformal_factor_prop23,
    hong_dydu,
    hong_h,
    hong_hprime,
    hong_k,
    hong_kprime,
    hong_mu,
    hong_theta,
    hong_y,
    theta_function,
    validity_interval,
    verify_prop23,
)
from alphaharm.geometry import FlatTorus, UnitSphere


@pytest.fixture(scope="module")
def hong_torus():
    return catalog.hong_torus_map()


@pytest.mark.parametrize("alpha", [1.5, 2.0, 3.0])
def test_conformal_equivalence_on_non_harmonic_maps(latitude_rotation, torus_shear, alpha):
    for psi in (latitude_rotation, torus_shear):
        rep = verify_prop23(psi, alpha)
        assert rep.passed, rep.residuals
        assert rep.details["max_tau_alpha"] > 1e-2  # a genuinely non-critical map


def test_conformal_equivalence_at_alpha_one_has_constant_factor(torus_shear):
    mu = conformal_factor_prop23(torus_shear, 1.0)
    assert np.allclose(mu.values, 2.0)


def test_conformal_equivalence_requires_dimension_above_two(identity_s2):
    with pytest.raises(ValueError, match="requires m > 2"):
        conformal_factor_prop23(identity_s2, 2.0)


def test_conformal_equivalence_rejects_degenerate_maps(identity_s3):
    const = catalog.constant_map(identity_s3.domain, UnitSphere(3))
    with pytest.raises(ValueError, match="degenerate at sample 0"):
        conformal_factor_prop23(const, 2.0)


def test_h_and_k_are_inverse():
    for alpha in (1.5, 2.0, 3.0):
        t = np.linspace(2 * alpha, 2 * alpha * 50, 1000)
        assert np.max(np.abs(hong_hprime(hong_k(t, alpha), alpha) - t) / t) < 1e-12
        s = np.linspace(0, 10, 1000)
        assert np.max(np.abs(hong_k(hong_hprime(s, alpha), alpha) - s)) < 1e-12


def test_derivatives_match_finite_differences():
    alpha, m = 2.0, 5
    t = np.linspace(4.5, 30, 50)
    h = 1e-6
    assert np.allclose(hong_kprime(t, alpha), (hong_k(t + h, alpha) - hong_k(t - h, alpha)) / (2 * h), rtol=1e-7)
    u = np.linspace(1.7, 4.0, 50)
    assert np.allclose(hong_dydu(u, alpha, m), (hong_y(u + h, alpha, m) - hong_y(u - h, alpha, m)) / (2 * h), rtol=1e-6)
    assert np.allclose(hong_hprime(t, alpha), (hong_h(t + h, alpha) - hong_h(t - h, alpha)) / (2 * h), rtol=1e-8)


def test_k_domain_and_classical_errors():
    with pytest.raises(ValueError, match="defined for t >= 2 alpha"):
        hong_k(np.array([1.0]), 2.0)
    with pytest.raises(ValueError, match="alpha > 1"):
        hong_k(3.0, 1.0)
    with pytest.raises(ValueError, match="m > 2 alpha"):
        validity_interval(2.0, 4)


@pytest.mark.parametrize("alpha,m", [(2.0, 5), (1.5, 4)])
def test_theta_implicit_identity(alpha, m):
    iv = validity_interval(alpha, m)
    y = np.linspace(0, iv.eps_prime, 1000, endpoint=False)
    th = hong_theta(y, alpha, m)
    assert th[0] == pytest.approx((2 * alpha) ** (1 / (m - 2)), rel=1e-14)
    lhs, rhs = hong_hprime(y * th**2, alpha), th ** (m - 2)
    assert np.max(np.abs(lhs - rhs) / rhs) < 1e-10
    assert np.all(np.diff(th) > 0)


def test_theta_outside_interval():
    iv = validity_interval(2.0, 5)
    with pytest.raises(ValueError, match="theta undefined at y"):
        hong_theta(iv.eps_prime * 1.01, 2.0, 5)
    with pytest.raises(ValueError, match="theta undefined at y"):
        hong_theta(-0.1, 2.0, 5)


def test_theta_function_derivative():
    theta = theta_function(2.0, 5)
    y0, h = 0.2, 1e-6
    d = float(jax.grad(theta)(y0))
    fd = (hong_theta(y0 + h, 2.0, 5) - hong_theta(y0 - h, 2.0, 5)) / (2 * h)
    assert d == pytest.approx(fd, rel=1e-7)
    vals = np.asarray(jax.vmap(theta)(np.array([0.0, 0.1, 0.3])))
    assert np.allclose(vals, hong_theta(np.array([0.0, 0.1, 0.3]), 2.0, 5))


def test_hong_mu_identity(hong_torus):
    mu = hong_mu(hong_torus, 2.0)
    assert mu.meta["identity_residual"] < 1e-8
    assert mu.values.max() > mu.values.min() * (1 + 1e-3)


@pytest.mark.parametrize("alpha", [1.5, 2.0])
def test_alpha_harmonic_metric_on_torus(hong_torus, alpha):
    mu, rep = build_alpha_harmonic_metric(hong_torus, alpha)
    assert rep.passed, rep.residuals
    assert rep.residuals["max |tau_alpha_bar|"] < 1e-8


def test_alpha_harmonic_metric_is_nontrivial(hong_torus):
    """The untransformed map is not alpha-harmonic for its own metric."""
    from alphaharm.variational import alpha_tension_field

    tau = alpha_tension_field(hong_torus, 2.0).sampled()
    assert np.max(np.abs(tau)) > 1e-2


def test_hong_rejects_large_density():
    big = catalog.hong_torus_map(amplitude=0.5, base=1.2)
    with pytest.raises(ValueError, match="energy density too large"):
        hong_mu(big, 2.0)


def test_hong_rejects_non_harmonic_input(torus_shear):
    with pytest.raises(ValueError, match="not harmonic"):
        build_alpha_harmonic_metric(torus_shear, 1.2)


def test_hong_requires_m_above_two_alpha(torus_shear):
    with pytest.raises(ValueError, match="m > 2 alpha"):
        hong_mu(torus_shear, 2.0)


def test_torus_target_sanity():
    assert FlatTorus(1).dim == 1

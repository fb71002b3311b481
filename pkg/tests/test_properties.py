"""Property-based invariants (hypothesis)."""

import json

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from alphaharm.conformal import hong_hprime, hong_k, hong_theta, validity_interval
from alphaharm.geometry import DiscreteVertexMap, FlatTorus, HyperbolicPlane, UnitSphere, icosphere
from alphaharm.geometry.fields import VariationField
from alphaharm.report import dumps
from alphaharm.stability import (
    ParallelFrame,
    index_form,
    instability_bound,
    instability_integrand,
    lambda_top,
)
from alphaharm.tensors import SubmersionTestMap, hv_split, stress_energy_trace

SETTINGS = settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
seeds = st.integers(0, 2**32 - 1)
alphas = st.floats(1.0, 4.0)


@pytest.fixture(scope="module")
def ico1():
    return icosphere(1)


@pytest.fixture(scope="module")
def hopf_sub(hopf):
    return SubmersionTestMap(hopf)


def _perturbed_sphere_map(mesh, seed, eps=0.2):
    rng = np.random.default_rng(seed)
    t = UnitSphere(2)
    p = mesh.vertices
    return DiscreteVertexMap(mesh, t, t.retract(p, t.tangent_project(p, eps * rng.standard_normal(p.shape))))


def _field(psi, rng):
    return VariationField(psi, values=psi.target.tangent_project(psi.values, rng.standard_normal(psi.values.shape)))


@SETTINGS
@given(seed=seeds, alpha=alphas)
def test_index_form_symmetric(ico1, seed, alpha):
    psi = _perturbed_sphere_map(ico1, seed)
    rng = np.random.default_rng(seed + 1)
    v, w = _field(psi, rng), _field(psi, rng)
    a, b = index_form(psi, alpha, v, w), index_form(psi, alpha, w, v)
    assert a == pytest.approx(b, rel=1e-12, abs=1e-12)


@SETTINGS
@given(seed=seeds, alpha=alphas)
def test_stress_trace_identity(ico1, seed, alpha):
    psi = _perturbed_sphere_map(ico1, seed, eps=0.5)
    tr, closed = stress_energy_trace(psi, alpha)
    assert np.allclose(tr, closed, rtol=1e-12, atol=1e-12)


@SETTINGS
@given(seed=seeds, p=st.integers(0, 255))
def test_hv_split_orthogonal(hopf_sub, seed, p):
    assert hopf_sub.map.domain.n_points == 256
    g = hopf_sub.map.domain.metric_values[p]
    X = np.random.default_rng(seed).standard_normal(3)
    XH, XV = hv_split(hopf_sub, p, X)
    total = X @ g @ X
    assert XH @ g @ XH + XV @ g @ XV == pytest.approx(total, rel=1e-10)
    # splitting is idempotent
    XH2, XV2 = hv_split(hopf_sub, p, XH)
    assert np.allclose(XH2, XH, atol=1e-10) and np.allclose(XV2, 0.0, atol=1e-10)


@SETTINGS
@given(seed=seeds, scale=st.floats(1e-8, 3.0))
def test_sphere_retraction(seed, scale):
    t = UnitSphere(3)
    rng = np.random.default_rng(seed)
    p = t.project(rng.standard_normal((20, 4)))
    v = t.tangent_project(p, scale * rng.standard_normal((20, 4)))
    q, disp = t.retract_with_displacement(p, v)
    assert np.allclose(np.linalg.norm(q, axis=1), 1.0, atol=1e-14)
    assert np.allclose(p + disp, q, atol=1e-15)


@SETTINGS
@given(seed=seeds, scale=st.floats(1e-6, 10.0))
def test_hyperbolic_and_torus_retraction(seed, scale):
    rng = np.random.default_rng(seed)
    h = HyperbolicPlane()
    p = 0.9 * h.project(rng.uniform(-0.7, 0.7, (20, 2)))
    q = h.retract(p, scale * rng.standard_normal((20, 2)))
    assert np.all(np.linalg.norm(q, axis=1) < 1.0)
    t = FlatTorus(2)
    q = t.retract(rng.uniform(0, 2 * np.pi, (20, 2)), scale * rng.standard_normal((20, 2)))
    assert np.all(t.manifold_residual(q) == 0)


finite = st.floats(allow_nan=False, allow_infinity=False)


@settings(max_examples=200, deadline=None)
@given(xs=st.lists(finite, min_size=1, max_size=8))
def test_report_floats_round_trip(xs):
    back = json.loads(dumps({"values": xs}))["values"]
    assert back == xs


def test_report_non_finite():
    assert json.loads(dumps([float("nan"), float("inf"), -float("inf")])) == ["nan", "inf", "-inf"]


@SETTINGS
@given(seed=seeds, n=st.integers(2, 5))
def test_frame_bookkeeping(seed, n):
    rng = np.random.default_rng(seed)
    frame = ParallelFrame.random(n + 1, seed)
    p = UnitSphere(n).project(rng.standard_normal((10, n + 1)))
    tops = np.stack([lambda_top(lam, p) for lam in frame])  # (n+1, 10, n+1)
    # sum |Lambda^T|^2 = n and sum <Lambda, p>^2 = 1
    assert np.allclose(np.sum(tops**2, axis=(0, 2)), n)
    assert np.allclose(sum((p @ lam) ** 2 for lam in frame), 1.0)
    assert np.allclose(np.einsum("kvd,vd->kv", tops, p), 0.0, atol=1e-14)


@settings(max_examples=100, deadline=None)
@given(alpha=st.floats(1.01, 6.0), n=st.integers(2, 10), frac=st.floats(0.001, 0.999))
def test_integrand_sign(alpha, n, frac):
    bound = instability_bound(alpha, n)
    if bound is None:
        # 2 alpha <= n: the integrand is never negative-definite-certified; it is <= 0 everywhere
        assert instability_integrand(frac * 10, alpha, n) <= 0
        return
    if n > 2:
        assert instability_integrand(frac * bound, alpha, n) < 0
        assert instability_integrand(bound / frac, alpha, n) > 0 or frac > 0.999
    else:
        assert instability_integrand(frac * 10, alpha, n) > 0


@settings(max_examples=100, deadline=None)
@given(alpha=st.floats(1.05, 5.0), t_rel=st.floats(1.0, 100.0))
def test_h_k_inverse(alpha, t_rel):
    t = 2 * alpha * t_rel
    assert hong_hprime(hong_k(t, alpha), alpha) == pytest.approx(t, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(alpha=st.floats(1.05, 3.0), extra=st.integers(1, 4), a=st.floats(0.0, 0.99), b=st.floats(0.0, 0.99))
def test_theta_monotone(alpha, extra, a, b):
    m = int(np.floor(2 * alpha)) + extra
    iv = validity_interval(alpha, m)
    ya, yb = sorted((a * iv.eps_prime, b * iv.eps_prime))
    ta, tb = hong_theta(np.array([ya, yb]), alpha, m)
    assert ta <= tb

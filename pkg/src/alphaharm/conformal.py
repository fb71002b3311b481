"""Conformal changes of the domain metric that relate harmonic and alpha-harmonic maps.

Two constructions are implemented.

*Conformal equivalence.*  For ``m = dim M > 2`` and ``g_bar = mu^2 g`` the
tension fields satisfy

    tau_bar = mu^(-m) (mu^(m-2) tau + d psi(grad mu^(m-2))),

so choosing ``mu^(m-2) = 2 alpha (1 + |d psi|^2)^(alpha-1)`` gives
``mu^m tau_bar = tau_alpha``: a map is alpha-harmonic for ``g`` exactly when
it is harmonic for ``g_bar``.

*From harmonic to alpha-harmonic.*  With ``h(t) = (1 + 2t)^alpha``, its
derivative ``h'`` and the inverse ``k`` of ``h'``, the function
``y(u) = k(u^(m-2)) / u^2`` is increasing near ``u_0 = (2 alpha)^(1/(m-2))``
when ``m > 2 alpha``; its inverse ``theta`` satisfies
``h'(y theta(y)^2) = theta(y)^(m-2)``.  For a harmonic map with small energy
density ``|d psi|^2 / 2 < eps'`` (for the metric ``g_hat``), the factor
``mu = theta(|d psi|^2 / 2)`` makes ``psi`` alpha-harmonic for
``g_bar = mu^(-2) g_hat``.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._jax import array_namespace, jax, jnp
from .checks import CheckReport
from .geometry.fields import AnalyticMap, DiscreteVertexMap, MapState, SampledField, as_alpha
from .geometry.jets import MapJet
from .geometry.ops import differential, grad_scalar, hs_norm_sq

__all__ = [
    "ConformalFactor",
    "conformal_factor_prop23",
    "transform_tension",
    "verify_prop23",
    "hong_h",
    "hong_hprime",
    "hong_k",
    "hong_kprime",
    "hong_y",
    "hong_dydu",
    "ValidityInterval",
    "validity_interval",
    "hong_theta",
    "theta_function",
    "hong_mu",
    "build_alpha_harmonic_metric",
    "DEGENERACY_TOL",
]

#: smallest singular value of ``d psi`` (orthonormal frames) below which a
#: map counts as degenerate
DEGENERACY_TOL = 1e-8


@dataclass(eq=False)
class ConformalFactor:
    """Positive function ``mu`` sampled per element.

    Attributes
    ----------
    values : ndarray
        ``mu`` at the quadrature nodes (analytic) or vertices (mesh).
    provenance : str
        ``"prop23"`` (conformal equivalence) or ``"hong"`` (harmonic to
        alpha-harmonic construction).
    func : callable, optional
        JAX-traceable ``u -> mu(u)`` on analytic domains; needed for
        gradients of ``mu``.
    meta : dict
        Construction parameters and self-checks.
    """

    values: np.ndarray
    provenance: str
    func: Callable | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if self.provenance not in ("prop23", "hong", "custom"):
            raise ValueError(f"unknown provenance {self.provenance!r}")
        if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
            raise ValueError("conformal factors must be finite and strictly positive")
        self.values = vals


def _domain_dim(psi: MapState, m) -> int:
    dim = psi.domain.dim if isinstance(psi, AnalyticMap) else 2
    if m is not None and int(m) != dim:
        raise ValueError(f"m = {m} does not match the domain dimension {dim}")
    return dim


def _min_singular_values(psi: AnalyticMap) -> np.ndarray:
    """Smallest of the ``m`` singular values of ``d psi`` in orthonormal frames."""
    J = differential(psi)  # (N, d, m)
    g = psi.domain.metric_values
    L = np.linalg.cholesky(g)
    frame = np.linalg.inv(np.swapaxes(L, 1, 2))  # columns g-orthonormal
    s = np.sqrt(psi.target.metric_scale(psi.values))
    A = s[:, None, None] * (J @ frame)
    m = J.shape[2]
    sv = np.linalg.svd(A, compute_uv=False)
    if sv.shape[1] < m:
        return np.zeros(J.shape[0])
    return sv[:, m - 1]


# ---------------------------------------------------------------------------
# conformal equivalence
# ---------------------------------------------------------------------------
def conformal_factor_prop23(psi: MapState, a, m: int | None = None) -> ConformalFactor:
    """``mu = (2 alpha)^(1/(m-2)) (1 + |d psi|^2)^((alpha-1)/(m-2))``.

    Requires ``m > 2`` and a non-degenerate differential (trivial kernel).
    """
    alpha = as_alpha(a)
    m = _domain_dim(psi, m)
    if m <= 2:
        raise ValueError("conformal equivalence requires m > 2")
    if not isinstance(psi, AnalyticMap):
        raise TypeError("conformal equivalence is evaluated on analytic maps")
    smin = _min_singular_values(psi)
    bad = np.flatnonzero(smin <= DEGENERACY_TOL)
    if bad.size:
        i = int(bad[0])
        raise ValueError(
            f"map is degenerate at sample {i} (u = {psi.domain.points[i].tolist()}): "
            f"smallest singular value of d psi is {smin[i]:.3g}"
        )
    jet = psi.jet()
    c = (2.0 * alpha) ** (1.0 / (m - 2))
    e = (alpha - 1.0) / (m - 2)

    def mu(u):
        return c * (1.0 + jet.density(u)) ** e

    vals = psi.evaluate(("prop23-mu", alpha), mu)
    return ConformalFactor(vals, "prop23", mu, {"alpha": alpha, "m": m, "min_singular_value": float(smin.min())})


def transform_tension(psi: MapState, mu: ConformalFactor, m: int | None = None) -> SampledField:
    """Tension for ``g_bar = mu^2 g`` from the tension for ``g``.

    ``tau_bar = mu^(-m) (mu^(m-2) tau + d psi(grad mu^(m-2)))``.  On analytic
    maps ``mu.func`` supplies the gradient; on meshes ``mu`` is given per
    vertex and the face gradients are averaged to the vertices with area
    weights.
    """
    from .variational import tension_field

    m = _domain_dim(psi, m) if m is None else int(m)
    if m < 1:
        raise ValueError("m must be positive")
    tau = tension_field(psi).sampled()
    if isinstance(psi, AnalyticMap):
        if mu.func is None:
            raise ValueError("analytic maps need mu as a function of the chart coordinates")
        jet = psi.jet()

        def push_grad(u):
            g = psi.domain.metric(u)
            grad = jnp.linalg.solve(g, jax.grad(lambda v: mu.func(v) ** (m - 2))(u))
            return jet.jac(u) @ grad

        dterm = np.asarray(psi.domain.sample(push_grad))
        vals = mu.values
    elif isinstance(psi, DiscreteVertexMap):
        vals = mu.values
        if vals.shape != (psi.domain.n_vertices,):
            raise ValueError("mesh conformal factors need one value per vertex")
        mesh = psi.domain
        grad = grad_scalar(mesh, vals ** (m - 2))  # (F, D) in the embedding of M
        coeff = np.einsum("fda,fd->fa", mesh.edge_frames, grad)  # G (coordinates)
        coeff = np.einsum("fab,fb->fa", mesh.face_metric_inverses, coeff)
        face_push = np.einsum("fia,fa->fi", differential(psi, project=True), coeff)
        w = mesh.face_areas / 3.0
        dterm = np.zeros_like(psi.values)
        for c in range(3):
            for i in range(dterm.shape[1]):
                dterm[:, i] += np.bincount(mesh.faces[:, c], weights=w * face_push[:, i], minlength=mesh.n_vertices)
        dterm = psi.target.tangent_project(psi.values, dterm / mesh.vertex_areas[:, None])
    else:
        raise TypeError(f"unsupported map type {type(psi).__name__}")
    out = (vals[:, None] ** (m - 2) * tau + dterm) / vals[:, None] ** m
    return SampledField(psi, out, "conformal-tension")


def verify_prop23(psi: MapState, a, tol: float = 1e-8) -> CheckReport:
    """Check ``mu^m tau_bar = tau_alpha`` pointwise.

    ``tau_bar`` is computed directly as the tension for the metric
    ``mu^2 g`` (Christoffel symbols of the new metric), independently of the
    transformation law, which is reported as a second residual.
    """
    from .variational import alpha_tension_field

    alpha = as_alpha(a)
    mu = conformal_factor_prop23(psi, alpha)
    m = psi.domain.dim
    g = psi.domain.metric
    new_metric = lambda u: mu.func(u) ** 2 * g(u)  # noqa: E731
    direct = MapJet(new_metric, psi.target, psi.func)
    tau_bar = np.asarray(psi.domain.sample(direct.tension))
    tau_bar_law = transform_tension(psi, mu).values
    tau_a = alpha_tension_field(psi, alpha).sampled()
    p = psi.values
    tgt = psi.target
    scale = 1.0 + tgt.norm(p, tau_a)
    res = tgt.norm(p, mu.values[:, None] ** m * tau_bar - tau_a) / scale
    law = tgt.norm(p, tau_bar - tau_bar_law) / (1.0 + tgt.norm(p, tau_bar))
    r, r_law = float(np.max(res)), float(np.max(law))
    return CheckReport(
        "conformal-equivalence",
        passed=bool(r < tol and r_law < tol),
        residuals={"mu^m tau_bar - tau_alpha": r, "transformation law": r_law},
        tolerance=tol,
        details={
            "map": psi.name,
            "alpha": alpha,
            "m": m,
            "max_tau_alpha": float(np.max(tgt.norm(p, tau_a))),
            "mu_range": [float(mu.values.min()), float(mu.values.max())],
        },
    )


# ---------------------------------------------------------------------------
# the functions h, k, y and theta
# ---------------------------------------------------------------------------
def _require_nonclassical(alpha):
    if alpha <= 1.0:
        raise ValueError("the inverse of h' exists only for alpha > 1")


def hong_h(t, a):
    """``h(t) = (1 + 2t)^alpha``."""
    alpha = as_alpha(a)
    return (1.0 + 2.0 * t) ** alpha


def hong_hprime(t, a):
    """``h'(t) = 2 alpha (1 + 2t)^(alpha-1)``."""
    alpha = as_alpha(a)
    return 2.0 * alpha * (1.0 + 2.0 * t) ** (alpha - 1.0)


def hong_k(t, a):
    """Inverse of ``h'``: ``k(t) = ((t / (2 alpha))^(1/(alpha-1)) - 1) / 2`` for ``t >= 2 alpha``."""
    alpha = as_alpha(a)
    _require_nonclassical(alpha)
    xp = array_namespace(t)
    if xp is np and np.any(np.asarray(t) < 2.0 * alpha * (1 - 1e-15)):
        raise ValueError(f"k(t) is defined for t >= 2 alpha = {2 * alpha:g}")
    return 0.5 * ((t / (2.0 * alpha)) ** (1.0 / (alpha - 1.0)) - 1.0)


def hong_kprime(t, a):
    """``k'(t) = (t / (2 alpha))^((2-alpha)/(alpha-1)) / (4 alpha (alpha - 1))``."""
    alpha = as_alpha(a)
    _require_nonclassical(alpha)
    return (t / (2.0 * alpha)) ** ((2.0 - alpha) / (alpha - 1.0)) / (4.0 * alpha * (alpha - 1.0))


def _check_dims(alpha, m):
    _require_nonclassical(alpha)
    if not m > 2.0 * alpha:
        raise ValueError(f"the construction requires m > 2 alpha (m = {m}, alpha = {alpha:g})")


def hong_y(u, a, m: int):
    """``y(u) = k(u^(m-2)) / u^2``."""
    alpha = as_alpha(a)
    return hong_k(u ** (m - 2), alpha) / u**2


def hong_dydu(u, a, m: int):
    """``dy/du = (m-2) u^(m-5) k'(u^(m-2)) - 2 k(u^(m-2)) / u^3``."""
    alpha = as_alpha(a)
    t = u ** (m - 2)
    kt = 0.5 * ((t / (2.0 * alpha)) ** (1.0 / (alpha - 1.0)) - 1.0)
    return (m - 2) * u ** (m - 5) * hong_kprime(t, alpha) - 2.0 * kt / u**3


@dataclass(frozen=True)
class ValidityInterval:
    """Certified domain ``[0, eps')`` of ``theta`` for one ``(alpha, m)``.

    ``u_lo = h'(0)^(1/(m-2))`` and ``u_hi = h'(eps)^(1/(m-2))`` bracket the
    solution; ``y`` was sampled on ``[u_lo, u_hi]`` and found strictly
    increasing with smallest sampled slope ``min_slope``.  ``eps_prime`` is
    ``safety * (y(u_hi) - y(u_lo))``.
    """

    alpha: float
    m: int
    eps: float
    u_lo: float
    u_hi: float
    y_hi: float
    eps_prime: float
    min_slope: float
    samples: int
    safety: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@functools.lru_cache(maxsize=None)
def validity_interval(a, m: int, eps: float = 10.0, samples: int = 1000, safety: float = 0.9) -> ValidityInterval:
    """Sample ``y`` between ``h'(0)^(1/(m-2))`` and ``h'(eps)^(1/(m-2))`` and certify monotonicity."""
    alpha = as_alpha(a)
    _check_dims(alpha, m)
    u_lo = float(hong_hprime(0.0, alpha) ** (1.0 / (m - 2)))
    u_hi = float(hong_hprime(eps, alpha) ** (1.0 / (m - 2)))
    u = np.linspace(u_lo, u_hi, samples)
    y = hong_y(u, alpha, m)
    slope = hong_dydu(u, alpha, m)
    if not (np.all(np.diff(y) > 0) and np.all(slope > 0)):
        raise RuntimeError(f"y(u) is not strictly increasing on [{u_lo:g}, {u_hi:g}]")
    y_hi = float(y[-1] - y[0])
    return ValidityInterval(alpha, int(m), float(eps), u_lo, u_hi, float(y[-1]), safety * y_hi,
                            float(slope.min()), int(samples), float(safety))


def hong_theta(y, a, m: int, max_iter: int = 100):
    """Solve ``y = k(theta^(m-2)) / theta^2`` for ``theta`` on the certified interval.

    Newton's method safeguarded by bisection on the bracket
    ``[u_lo, u_hi]`` of :func:`validity_interval`, starting from
    ``theta(0) = (2 alpha)^(1/(m-2))``.  Accepts scalars or arrays.
    """
    alpha = as_alpha(a)
    iv = validity_interval(alpha, m)
    y_arr = np.asarray(y, dtype=float)
    bad = ~((y_arr >= 0) & (y_arr < iv.eps_prime))
    if np.any(bad):
        raise ValueError(f"theta undefined at y = {y_arr[bad].ravel()[0]!r} (certified interval [0, {iv.eps_prime:.6g}))")
    tol = 1e-12 * (1.0 + np.abs(y_arr))
    lo = np.full(y_arr.shape, iv.u_lo)
    hi = np.full(y_arr.shape, iv.u_hi)
    u = lo.copy()
    for _ in range(max_iter):
        f = hong_y(u, alpha, m) - y_arr
        done = np.abs(f) <= tol
        if np.all(done):
            break
        lo = np.where(f < 0, u, lo)
        hi = np.where(f > 0, u, hi)
        newton = u - f / hong_dydu(u, alpha, m)
        inside = (newton > lo) & (newton < hi)
        u = np.where(done, u, np.where(inside, newton, 0.5 * (lo + hi)))
    else:
        f = hong_y(u, alpha, m) - y_arr
        if np.any(np.abs(f) > tol):
            raise RuntimeError("theta solver did not converge")
    lhs = hong_hprime(y_arr * u**2, alpha)
    rhs = u ** (m - 2)
    if np.any(np.abs(lhs - rhs) > 1e-10 * np.abs(rhs)):
        raise RuntimeError("theta fails the implicit identity h'(y theta^2) = theta^(m-2)")
    return float(u) if np.ndim(y) == 0 else u


@functools.lru_cache(maxsize=None)
def theta_function(a, m: int):
    """JAX-differentiable ``theta`` for fixed ``(alpha, m)``.

    Values come from :func:`hong_theta` through a host callback; the
    derivative is ``1 / y'(theta)`` by the inverse function theorem.
    """
    alpha = as_alpha(a)
    validity_interval(alpha, m)

    def host(y):
        y = np.asarray(y, dtype=np.float64)
        return np.asarray(hong_theta(y, alpha, m), dtype=np.float64).reshape(y.shape)

    @jax.custom_jvp
    def theta(y):
        y = jnp.asarray(y, dtype=jnp.float64)
        return jax.pure_callback(host, jax.ShapeDtypeStruct(y.shape, jnp.float64), y, vmap_method="expand_dims")

    @theta.defjvp
    def _theta_jvp(primals, tangents):
        (y,), (dy,) = primals, tangents
        th = theta(y)
        return th, dy / hong_dydu(th, alpha, m)

    return theta


def hong_mu(psi: MapState, a, m: int | None = None) -> ConformalFactor:
    """``mu = theta(|d psi|^2 / 2)`` for a map with small energy density.

    The energy density is measured in the map's own domain metric (the
    small-energy metric the caller supplies).  Self-check:
    ``mu^(m-2) = 2 alpha (1 + |d psi|^2_bar)^(alpha-1)`` with
    ``|d psi|^2_bar = mu^2 |d psi|^2`` the density for ``mu^(-2) g``.
    """
    alpha = as_alpha(a)
    m = _domain_dim(psi, m)
    _check_dims(alpha, m)
    iv = validity_interval(alpha, m)
    x = np.asarray(hs_norm_sq(psi), dtype=float)
    y = 0.5 * x
    bad = np.flatnonzero(y >= iv.eps_prime)
    if bad.size:
        raise ValueError(
            f"energy density too large at {bad.size} samples (first: {bad[:5].tolist()}); "
            f"need |d psi|^2 / 2 < {iv.eps_prime:.6g}, max is {y.max():.6g}"
        )
    mu = np.asarray(hong_theta(y, alpha, m))
    lhs = mu ** (m - 2)
    rhs = 2.0 * alpha * (1.0 + mu**2 * x) ** (alpha - 1.0)
    eq20 = float(np.max(np.abs(lhs - rhs) / np.abs(lhs)))
    func = None
    if isinstance(psi, AnalyticMap):
        theta = theta_function(alpha, m)
        jet = psi.jet()

        def func(u):
            return theta(0.5 * jet.density(u))

    meta = {"alpha": alpha, "m": m, "validity": iv.to_dict(), "identity_residual": eq20, "max_half_density": float(y.max())}
    return ConformalFactor(mu, "hong", func, meta)


def build_alpha_harmonic_metric(psi: AnalyticMap, a, m: int | None = None, harmonic_tol: float = 1e-8,
                                tol: float = 1e-8) -> tuple[ConformalFactor, CheckReport]:
    """Conformal factor making a small-energy harmonic map alpha-harmonic.

    Computes ``mu = theta(|d psi|^2 / 2)`` and evaluates the alpha-tension of
    ``psi`` for ``g_bar = mu^(-2) g`` directly (new Christoffel symbols, new
    energy density).  The report passes when its largest pointwise norm is
    below ``tol``.
    """
    from .variational import alpha_tension_field, tension_field

    alpha = as_alpha(a)
    if not isinstance(psi, AnalyticMap):
        raise TypeError("the construction is checked on analytic maps")
    m = _domain_dim(psi, m)
    tau = tension_field(psi).sampled()
    tau_max = float(np.max(psi.target.norm(psi.values, tau)))
    if tau_max > harmonic_tol:
        raise ValueError(f"input map is not harmonic: max |tau| = {tau_max:.3g} > {harmonic_tol:g}")
    mu = hong_mu(psi, alpha, m)
    g = psi.domain.metric
    new_domain = psi.domain.with_metric(lambda u: g(u) / mu.func(u) ** 2, psi.domain.name + "-bar")
    new_map = psi.on_domain(new_domain, psi.name + "-bar")
    tau_a = alpha_tension_field(new_map, alpha).sampled()
    pointwise = psi.target.norm(psi.values, tau_a)
    r = float(np.max(pointwise))
    l2 = float(np.sqrt(new_domain.integrate_values(pointwise**2)))
    report = CheckReport(
        "alpha-harmonic-metric",
        passed=bool(r < tol and mu.meta["identity_residual"] < tol),
        residuals={"max |tau_alpha_bar|": r, "L2 |tau_alpha_bar|": l2, "mu identity": mu.meta["identity_residual"]},
        tolerance=tol,
        details={
            "map": psi.name,
            "alpha": alpha,
            "m": m,
            "input_max_tension": tau_max,
            "mu_range": [float(mu.values.min()), float(mu.values.max())],
            "validity": mu.meta["validity"],
        },
    )
    return mu, report

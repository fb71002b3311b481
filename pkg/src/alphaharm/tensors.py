"""The alpha-stress-energy tensor and diagnostics for horizontally conformal submersions.

``S_alpha = (1 + |d psi|^2)^alpha g - 2 alpha (1 + |d psi|^2)^(alpha-1) psi^* h``
satisfies ``(div S_alpha)(Y) = -h(tau_alpha, d psi(Y))``.

For a horizontally conformal map ``psi: M^m -> N^n`` with dilation ``mu``
(``h(d psi X, d psi Y) = mu^2 g(X, Y)`` on ``H = (ker d psi)^perp``) the
horizontal components of that identity read

    c (grad mu^2)^H + 2 (m - n) alpha mu^2 (1 + n mu^2)^(alpha-1) H
        + g^{-1} d psi^T h tau_alpha = 0,
    c = alpha (1 + n mu^2)^(alpha-2) ((n - 2) + n mu^2 (n - 2 alpha)),

with ``H`` the mean curvature of the fibres.  The vertical components give
``H_bar = (grad mu^2)^V / (2 mu^2)`` for the mean curvature of the horizontal
distribution.  Vectors on the domain are returned in chart coordinates.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np

from ._jax import jax, jnp
from .checks import CheckReport
from .geometry.fields import AnalyticMap, DiscreteVertexMap, MapState, SymmetricTensorField, as_alpha
from .geometry.jets import christoffel
from .geometry.ops import differential, hs_norm_sq

__all__ = [
    "stress_energy",
    "stress_energy_trace",
    "div_stress_energy",
    "verify_prop42",
    "SubmersionTestMap",
    "hv_split",
    "dilation",
    "fiber_mean_curvature",
    "horizontal_mean_curvature",
    "check_minimal_fibers",
    "balance_coefficient",
    "KERNEL_TOL",
]

#: singular values of ``d psi`` (orthonormal frames) below this span the kernel
KERNEL_TOL = 1e-8
#: singular values within this factor of the threshold make the split ambiguous
_AMBIGUITY = 100.0


# ---------------------------------------------------------------------------
# stress-energy
# ---------------------------------------------------------------------------
def stress_energy(psi: MapState, a) -> SymmetricTensorField:
    """``S_alpha`` per element in domain coordinates.

    Analytic maps: chart coordinates at the quadrature nodes, shape (N, m, m).
    Meshes: face-parameter coordinates, shape (F, 2, 2), with the pullback
    built from the same per-face differential as the energy density.
    """
    alpha = as_alpha(a)
    if isinstance(psi, AnalyticMap):
        vals = psi.evaluate("stress_energy", psi.jet().stress_energy, alpha)
    elif isinstance(psi, DiscreteVertexMap):
        mesh = psi.domain
        D = differential(psi, project=True)
        s = psi.target.metric_scale(psi.face_barycenters())
        pull = s[:, None, None] * np.einsum("fia,fib->fab", D, D)
        x = hs_norm_sq(psi)
        vals = (1 + x)[:, None, None] ** alpha * mesh.face_metrics - 2 * alpha * (1 + x)[:, None, None] ** (alpha - 1) * pull
        vals = 0.5 * (vals + np.swapaxes(vals, 1, 2))
    else:
        raise TypeError(f"unsupported map type {type(psi).__name__}")
    return SymmetricTensorField(psi.domain, vals, f"S_alpha({psi.name})")


def stress_energy_trace(psi: MapState, a) -> tuple[np.ndarray, np.ndarray]:
    """``tr_g S_alpha`` two ways: matrix trace and ``m (1+x)^alpha - 2 alpha (1+x)^(alpha-1) x``."""
    alpha = as_alpha(a)
    S = stress_energy(psi, alpha)
    if isinstance(psi, AnalyticMap):
        gi = np.linalg.inv(psi.domain.metric_values)
        m = psi.domain.dim
    else:
        gi = psi.domain.face_metric_inverses
        m = 2
    x = np.asarray(hs_norm_sq(psi))
    closed = m * (1 + x) ** alpha - 2 * alpha * (1 + x) ** (alpha - 1) * x
    return S.trace(gi), closed


def div_stress_energy(psi: MapState, a, Y) -> np.ndarray:
    """``(div S_alpha)(Y)`` at the quadrature nodes for a vector field ``Y`` (chart components)."""
    alpha = as_alpha(a)
    if not isinstance(psi, AnalyticMap):
        raise TypeError("divergence identity requires analytic maps")
    jet = psi.jet()

    def one(u, alpha):
        return jet.stress_divergence(u, alpha) @ Y(u)

    return psi.evaluate(("stress_divergence", Y), one, alpha)


def _pairing(psi: AnalyticMap, tau, Y) -> np.ndarray:
    """``h(tau, d psi(Y))`` at the nodes."""
    jet = psi.jet()
    push = psi.evaluate(("push_forward", Y), lambda u: jet.jac(u) @ Y(u))
    return psi.target.inner(psi.values, tau, push)


def verify_prop42(psi: AnalyticMap, a, fields, tol: float = 1e-8) -> CheckReport:
    """Check ``(div S_alpha)(Y) + h(tau_alpha, d psi(Y)) = 0`` for every field in ``fields``."""
    from .variational import alpha_tension_field

    alpha = as_alpha(a)
    tau = alpha_tension_field(psi, alpha).sampled()
    worst, worst_abs = 0.0, 0.0
    for Y in fields:
        lhs = div_stress_energy(psi, alpha, Y)
        rhs = _pairing(psi, tau, Y)
        worst = max(worst, float(np.max(np.abs(lhs + rhs) / (1.0 + np.abs(rhs)))))
        worst_abs = max(worst_abs, float(np.max(np.abs(lhs))))
    return CheckReport(
        "stress-energy-divergence",
        passed=bool(worst < tol),
        residuals={"div S(Y) + h(tau_alpha, d psi Y)": worst},
        tolerance=tol,
        details={"map": psi.name, "alpha": alpha, "fields": len(fields), "max_abs_divergence": worst_abs},
    )


# ---------------------------------------------------------------------------
# horizontally conformal submersions
# ---------------------------------------------------------------------------
class SubmersionTestMap:
    """Analytic submersion with its vertical/horizontal splitting and dilation.

    Construction validates that ``d psi`` has rank ``n = dim N`` at every
    node and that the map is horizontally conformal
    (``g^{-1} psi^* h = mu^2 P_H`` with ``P_H`` a projector).
    """

    def __init__(self, psi: AnalyticMap, conformal_tol: float = 1e-8):
        if not isinstance(psi, AnalyticMap):
            raise TypeError("submersion diagnostics run on analytic maps")
        self.map = psi
        self.m = psi.domain.dim
        self.n = psi.target.dim
        if self.m < self.n:
            raise ValueError("a submersion needs dim M >= dim N")
        sv = self.singular_values
        if np.any(sv[:, self.n - 1] <= KERNEL_TOL):
            i = int(np.argmin(sv[:, self.n - 1]))
            raise ValueError(f"d psi is not surjective at sample {i} (singular value {sv[i, self.n - 1]:.3g})")
        self.dilation_sq = _dilation_from_singular_values(sv, self.n, conformal_tol)

    @property
    def name(self):
        return self.map.name

    @cached_property
    def _frames(self):
        """Cholesky factors ``g = L L^T`` and orthonormal-coordinate differentials."""
        g = self.map.domain.metric_values
        L = np.linalg.cholesky(g)
        Linv_T = np.linalg.inv(np.swapaxes(L, 1, 2))
        J = differential(self.map)
        s = np.sqrt(self.map.target.metric_scale(self.map.values))
        A = s[:, None, None] * (J @ Linv_T)  # (N, d, m) in orthonormal coordinates
        return L, Linv_T, A

    @cached_property
    def _svd(self):
        _, _, A = self._frames
        U, sv, Wt = np.linalg.svd(A, full_matrices=True)
        full = np.zeros((A.shape[0], self.m))
        full[:, : sv.shape[1]] = sv
        return full, Wt

    @property
    def singular_values(self) -> np.ndarray:
        return self._svd[0]

    # -- pointwise JAX building blocks ------------------------------------
    def _pointwise(self):
        psi = self.map
        jet = psi.jet()
        n = self.n
        metric = psi.domain.metric

        def ghp(u):
            return jnp.linalg.solve(metric(u), jet.pullback(u))  # g^{-1} psi^* h = mu^2 P_H

        def mu2(u):
            return jnp.trace(ghp(u)) / n

        def P_H(u):
            G = ghp(u)
            return n * G / jnp.trace(G)

        def P_V(u):
            return jnp.eye(self.m) - P_H(u)

        return jet, metric, mu2, P_H, P_V


def _as_submersion(obj) -> SubmersionTestMap:
    return obj if isinstance(obj, SubmersionTestMap) else SubmersionTestMap(obj)


def hv_split(sub, p: int, X) -> tuple[np.ndarray, np.ndarray]:
    """Split ``X`` (chart components at node ``p``) into horizontal and vertical parts.

    The kernel of ``d psi`` is spanned by the right singular vectors whose
    singular values are below :data:`KERNEL_TOL`; singular values within a
    factor 100 of the threshold make the split ambiguous and raise.
    """
    sub = _as_submersion(sub)
    sv, Wt = sub._svd
    L, Linv_T, _ = sub._frames
    s = sv[p]
    near = (s > KERNEL_TOL / _AMBIGUITY) & (s < KERNEL_TOL * _AMBIGUITY)
    if np.any(near):
        raise ValueError(f"kernel of d psi is ambiguous at sample {p}: singular values {s[near].tolist()}")
    X = np.asarray(X, dtype=float)
    kernel = Wt[p][s <= KERNEL_TOL].T  # (m, k) orthonormal coordinates
    y = L[p].T @ X
    yV = kernel @ (kernel.T @ y)
    XV = Linv_T[p] @ yV
    return X - XV, XV


def _dilation_from_singular_values(sv: np.ndarray, n: int, conformal_tol: float) -> np.ndarray:
    h = sv[:, :n] ** 2
    mu2 = h.mean(axis=1)
    spread = np.max(np.abs(h - mu2[:, None]), axis=1) / mu2
    if np.any(spread > conformal_tol):
        i = int(np.argmax(spread))
        raise ValueError(f"map is not horizontally conformal: anisotropy {spread[i]:.3g} at sample {i}")
    return mu2


def dilation(sub, conformal_tol: float = 1e-8) -> np.ndarray:
    """``mu^2`` per node from the horizontal singular values of ``d psi``.

    All ``n`` horizontal singular values must agree: their squares are
    ``h(d psi E, d psi E)`` for orthonormal horizontal ``E``.  A relative
    spread above ``conformal_tol`` means the map is not horizontally
    conformal and raises.
    """
    if isinstance(sub, SubmersionTestMap):
        return _dilation_from_singular_values(sub.singular_values, sub.n, conformal_tol)
    return SubmersionTestMap(sub, conformal_tol).dilation_sq


def _covariant_sum(metric, fields_fn, u, m):
    """``sum_kl g^{kl} nabla_{V_k} V_l`` for ``V_l = fields_fn(u)[:, l]``."""
    g, gi, gam = christoffel(metric, u)
    V = fields_fn(u)  # (m, m): column l is V_l
    dV = jax.jacfwd(fields_fn)(u)  # [a, l, i] = d_i V_l^a
    # nabla_{V_k} V_l = V_k^i d_i V_l + Gamma(V_k, V_l)
    deriv = jnp.einsum("ik,ali->akl", V, dV)
    conn = jnp.einsum("aij,ik,jl->akl", gam, V, V)
    return jnp.einsum("kl,akl->a", gi, deriv + conn)


def fiber_mean_curvature(sub, method: str = "frame") -> np.ndarray:
    """Mean curvature ``H`` of the fibres at every node, chart components (N, m).

    ``"frame"``: ``H = P_H sum_kl g^{kl} nabla_{P_V d_k}(P_V d_l) / (m - n)``,
    the frame sum over vertical orthonormal vectors written as a metric
    trace.  ``"hessian"``: from the second fundamental form of the map,
    ``sum_vertical (nabla d psi)(e, e) = -(m - n) d psi(H)``, pulled back to
    the horizontal space with ``g^{-1} d psi^T h / mu^2``.
    """
    sub = _as_submersion(sub)
    m, n = sub.m, sub.n
    if m == n:
        raise ValueError("fibres are points when dim M = dim N")
    jet, metric, mu2, P_H, P_V = sub._pointwise()
    s_fn = sub.map.target.metric_scale
    if method == "frame":

        def one(u):
            return P_H(u) @ _covariant_sum(metric, P_V, u, m) / (m - n)

    elif method == "hessian":

        def one(u):
            gi = jnp.linalg.inv(metric(u))
            Pv = P_V(u)
            gv = Pv @ gi  # vertical part of the inverse metric
            hess = jet.hessian(u)
            tr = jnp.einsum("kl,akl->a", gv, hess)
            p = sub.map.func(u)
            J = jet.jac(u)
            return -(gi @ (J.T @ (s_fn(p) * tr))) / (mu2(u) * (m - n))

    else:
        raise ValueError("method must be 'frame' or 'hessian'")
    return np.asarray(sub.map.domain.sample(one))


def horizontal_mean_curvature(sub, method: str = "frame") -> np.ndarray:
    """Mean curvature ``H_bar`` of the horizontal distribution, chart components (N, m).

    ``"frame"``: ``P_V sum_kl g^{kl} nabla_{P_H d_k}(P_H d_l) / n``.
    ``"gradient"``: ``(grad mu^2)^V / (2 mu^2)``.
    """
    sub = _as_submersion(sub)
    m, n = sub.m, sub.n
    jet, metric, mu2, P_H, P_V = sub._pointwise()
    if method == "frame":

        def one(u):
            return P_V(u) @ _covariant_sum(metric, P_H, u, m) / n

    elif method == "gradient":

        def one(u):
            grad = jnp.linalg.solve(metric(u), jax.grad(mu2)(u))
            return P_V(u) @ grad / (2.0 * mu2(u))

    else:
        raise ValueError("method must be 'frame' or 'gradient'")
    return np.asarray(sub.map.domain.sample(one))


def balance_coefficient(mu2, alpha: float, n: int):
    """``alpha (1 + n mu^2)^(alpha-2) ((n - 2) + n mu^2 (n - 2 alpha))``."""
    return alpha * (1 + n * mu2) ** (alpha - 2) * ((n - 2) + n * mu2 * (n - 2 * alpha))


def _gnorm(g, v):
    return np.sqrt(np.einsum("nij,ni,nj->n", g, v, v))


def check_minimal_fibers(sub, a, tension_tol: float = 1e-8, tol: float = 1e-6, small: float = 1e-8) -> CheckReport:
    """Evaluate the fibre-minimality balance for a horizontally conformal map.

    Residuals (pointwise ``g``-norms, maxima over the nodes, relative to the
    size of the largest term):

    * ``balance``: ``c (grad mu^2)^H + 2 (m-n) alpha mu^2 (1+n mu^2)^(alpha-1) H``,
      which vanishes for alpha-harmonic maps;
    * ``balance without mu^2``: the same with the factor ``mu^2`` on the
      ``H`` term dropped, as the balance is sometimes written;
    * ``general``: ``balance + g^{-1} d psi^T h tau_alpha``, which vanishes
      for every horizontally conformal map.

    The verdict compares "fibres minimal" (``max |H| < small``) with
    "``grad mu^2`` vertical" (``max |(grad mu^2)^H| < small``).  The report
    passes when the general residual is below ``tol`` and, if the
    hypotheses ``m > n``, ``n > 2 alpha`` and alpha-harmonicity hold, the
    balance residual is below ``tol`` and the two statements agree.
    """
    from .variational import alpha_tension_field

    alpha = as_alpha(a)
    sub = _as_submersion(sub)
    psi = sub.map
    m, n = sub.m, sub.n
    if m == n:
        raise ValueError("fibres are points when dim M = dim N")
    jet, metric, mu2_fn, P_H, P_V = sub._pointwise()

    def grad_h(u):
        return P_H(u) @ jnp.linalg.solve(metric(u), jax.grad(mu2_fn)(u))

    gradH = np.asarray(psi.domain.sample(grad_h))
    H = fiber_mean_curvature(sub, "frame")
    mu2 = sub.dilation_sq
    g = psi.domain.metric_values
    gi = np.linalg.inv(g)
    tau = alpha_tension_field(psi, alpha).sampled()
    J = differential(psi)
    s = psi.target.metric_scale(psi.values)
    tau_term = np.einsum("nij,nai,na->nj", gi, J, s[:, None] * tau)

    c = balance_coefficient(mu2, alpha, n)[:, None]
    w = (2 * (m - n) * alpha * (1 + n * mu2) ** (alpha - 1))[:, None]
    t1, t2, t2_lit = c * gradH, w * mu2[:, None] * H, w * H
    scale = 1.0 + max(np.max(_gnorm(g, t1)), np.max(_gnorm(g, t2)), np.max(_gnorm(g, tau_term)))
    r_bal = float(np.max(_gnorm(g, t1 + t2)) / scale)
    r_lit = float(np.max(_gnorm(g, t1 + t2_lit)) / scale)
    r_gen = float(np.max(_gnorm(g, t1 + t2 + tau_term)) / scale)

    # H solved from the balance, with and without the factor mu^2
    H_pred = -(c / (w * mu2[:, None])) * gradH
    H_pred_lit = -(c / w) * gradH
    h_scale = 1.0 + float(np.max(_gnorm(g, H)))
    pred_err = float(np.max(_gnorm(g, H - H_pred)) / h_scale)
    pred_err_lit = float(np.max(_gnorm(g, H - H_pred_lit)) / h_scale)

    tau_max = float(np.max(psi.target.norm(psi.values, tau)))
    hyp = {
        "m > n": bool(m > n),
        "n > 2 alpha": bool(n > 2 * alpha),
        "alpha-harmonic": bool(tau_max < tension_tol),
    }
    hyp_ok = all(hyp.values())
    H_max = float(np.max(_gnorm(g, H)))
    gradH_max = float(np.max(_gnorm(g, gradH)))
    minimal = H_max < small
    vertical = gradH_max < small
    passed = r_gen < tol and (not hyp_ok or (r_bal < tol and minimal == vertical))
    return CheckReport(
        "minimal-fibres",
        passed=bool(passed),
        residuals={"balance": r_bal, "balance without mu^2": r_lit, "general": r_gen},
        tolerance=tol,
        details={
            "map": psi.name,
            "alpha": alpha,
            "m": m,
            "n": n,
            "hypotheses": hyp,
            "hypotheses_satisfied": hyp_ok,
            "status": "ok" if hyp_ok else "hypotheses not satisfied",
            "max_tau_alpha": tau_max,
            "max_H": H_max,
            "max_grad_mu2_horizontal": gradH_max,
            "fibres_minimal": bool(minimal),
            "grad_mu2_vertical": bool(vertical),
            "H_prediction_error": pred_err,
            "H_prediction_error_without_mu2": pred_err_lit,
            "coefficient_range": [float(c.min()), float(c.max())],
            "mu2_range": [float(mu2.min()), float(mu2.max())],
        },
    )

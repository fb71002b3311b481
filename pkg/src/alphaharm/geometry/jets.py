"""Pointwise differential geometry of analytic maps via automatic differentiation.

:class:`MapJet` bundles a domain metric ``u -> g(u)``, a target and a map
``u -> psi(u)`` (all JAX-traceable) and exposes pointwise quantities as pure
functions of the chart coordinate ``u`` (and, where relevant, the exponent
``alpha``).  They are meant to be wrapped in ``jax.vmap``/``jax.jit`` by the
callers.  Index conventions: ``J[a, i] = d psi^a / d u^i`` and
``Gamma[k, i, j]`` are the domain Christoffel symbols.
"""

from __future__ import annotations

from .._jax import jax, jnp

__all__ = ["christoffel", "MapJet"]


def christoffel(metric_fn, u):
    """Return ``(g, g^{-1}, Gamma)`` at ``u`` with ``Gamma[k, i, j] = Gamma^k_ij``."""
    g = metric_fn(u)
    dg = jax.jacfwd(metric_fn)(u)  # dg[a, b, c] = d_c g_ab
    gi = jnp.linalg.inv(g)
    lower = 0.5 * (jnp.einsum("jli->ijl", dg) + jnp.einsum("ilj->ijl", dg) - dg)
    return g, gi, jnp.einsum("kl,ijl->kij", gi, lower)


class MapJet:
    """Pointwise jets of ``psi`` with respect to a domain metric.

    Parameters
    ----------
    metric_fn : callable
        ``u -> g(u)``.
    target : TargetManifold
    func : callable
        ``u -> psi(u)`` in target coordinates.
    """

    def __init__(self, metric_fn, target, func):
        self.metric_fn = metric_fn
        self.target = target
        self.func = func

    # -- first and second order data ------------------------------------
    def jac(self, u):
        return jax.jacfwd(self.func)(u)

    def pullback(self, u):
        """``psi^* h`` as an ``(m, m)`` matrix."""
        p = self.func(u)
        J = self.jac(u)
        return self.target.metric_scale(p) * (J.T @ J)

    def density(self, u):
        """``|d psi|^2 = tr(g^{-1} psi^* h)``."""
        gi = jnp.linalg.inv(self.metric_fn(u))
        return jnp.sum(gi * self.pullback(u))

    def _conn_pairs(self, p, A, B):
        """``Gamma_N(p; A[:, i], B[:, j])`` for all pairs, shape ``(m_A, m_B, d)``."""
        return self.target.connection(p, A.T[:, None, :], B.T[None, :, :])

    def hessian(self, u):
        """Second fundamental form ``(nabla d psi)(d_i, d_j)``, shape ``(d, m, m)``."""
        p = self.func(u)
        J = self.jac(u)
        H = jax.jacfwd(self.jac)(u)
        _, _, gam = christoffel(self.metric_fn, u)
        conn = jnp.moveaxis(self._conn_pairs(p, J, J), -1, 0)
        return H - jnp.einsum("kij,ak->aij", gam, J) + conn

    def tension(self, u):
        gi = jnp.linalg.inv(self.metric_fn(u))
        return jnp.einsum("ij,aij->a", gi, self.hessian(u))

    def weight(self, u, alpha):
        """``F = 2 alpha (1 + |d psi|^2)^(alpha - 1)``."""
        return 2.0 * alpha * (1.0 + self.density(u)) ** (alpha - 1.0)

    def alpha_tension(self, u, alpha):
        """``tau_alpha = F tau + d psi(grad F)``."""
        gi = jnp.linalg.inv(self.metric_fn(u))
        F, dF = jax.value_and_grad(self.weight)(u, alpha)
        return F * self.tension(u) + self.jac(u) @ (gi @ dF)

    def alpha_tension_divergence(self, u, alpha):
        """``tau_alpha`` in divergence form, an independent evaluation path.

        ``(1/sqrt|g|) d_i(sqrt|g| F g^{ij} d_j psi) + F g^{ij} Gamma_N(d_i psi, d_j psi)``.
        """

        def flux(v):
            g = self.metric_fn(v)
            gi = jnp.linalg.inv(g)
            return jnp.sqrt(jnp.linalg.det(g)) * self.weight(v, alpha) * (self.jac(v) @ gi)

        g = self.metric_fn(u)
        gi = jnp.linalg.inv(g)
        div = jnp.einsum("aii->a", jax.jacfwd(flux)(u)) / jnp.sqrt(jnp.linalg.det(g))
        J = self.jac(u)
        conn = self._conn_pairs(self.func(u), J, J)
        return div + self.weight(u, alpha) * jnp.einsum("ij,ija->a", gi, conn)

    def energy_density(self, u, alpha):
        return (1.0 + self.density(u)) ** alpha

    # -- sections along psi ---------------------------------------------
    def covariant(self, u, v_fn):
        """``nabla_{d_i} v`` as a ``(d, m)`` matrix for a section ``v_fn``."""
        p = self.func(u)
        J = self.jac(u)
        v = v_fn(u)
        dv = jax.jacfwd(v_fn)(u)
        conn = self.target.connection(p, J.T, v[None, :])  # (m, d)
        return dv + conn.T

    def index_integrand(self, u, alpha, v_fn, w_fn):
        """Pointwise second-variation integrand (Hessian form) for ``v`` and ``w``."""
        p = self.func(u)
        J = self.jac(u)
        gi = jnp.linalg.inv(self.metric_fn(u))
        s = self.target.metric_scale(p)
        x = self.density(u)
        F = 2.0 * alpha * (1.0 + x) ** (alpha - 1.0)
        B = 4.0 * alpha * (alpha - 1.0) * (1.0 + x) ** (alpha - 2.0)
        nv, nw = self.covariant(u, v_fn), self.covariant(u, w_fn)
        v, w = v_fn(u), w_fn(u)
        pair_v = s * jnp.sum(gi * (nv.T @ J))
        pair_w = s * jnp.sum(gi * (nw.T @ J))
        grad_term = s * jnp.sum(gi * (nv.T @ nw))
        R = self.target.curvature(p, v[None, None, :], J.T[:, None, :], J.T[None, :, :])  # (m, m, d)
        curv = s * jnp.einsum("ij,ija,a->", gi, R, w)
        return B * pair_v * pair_w + F * grad_term - F * curv

    def _trace_nabla(self, u, omega_fn):
        """``Tr_g nabla omega`` for a section-valued 1-form ``omega_fn(u)`` of shape ``(d, m)``."""
        p = self.func(u)
        J = self.jac(u)
        _, gi, gam = christoffel(self.metric_fn, u)
        om = omega_fn(u)
        dom = jax.jacfwd(omega_fn)(u)  # [a, j, i] = d_i omega_j^a
        conn = jnp.moveaxis(self._conn_pairs(p, J, om), -1, 0)  # [a, i, j] = Gamma(d_i psi, omega_j)
        return (
            jnp.einsum("ij,aji->a", gi, dom)
            + jnp.einsum("ij,aij->a", gi, conn)
            - jnp.einsum("ij,kij,ak->a", gi, gam, om)
        )

    def jacobi(self, u, alpha, v_fn):
        """Jacobi operator ``J(v)`` whose L2 pairing gives ``I(v, w) = -int h(J v, w)``."""

        def grad_form(y):
            return self.weight(y, alpha) * self.covariant(y, v_fn)

        def radial_form(y):
            gi = jnp.linalg.inv(self.metric_fn(y))
            s = self.target.metric_scale(self.func(y))
            x = self.density(y)
            B = 4.0 * alpha * (alpha - 1.0) * (1.0 + x) ** (alpha - 2.0)
            J = self.jac(y)
            return B * s * jnp.sum(gi * (self.covariant(y, v_fn).T @ J)) * J

        p = self.func(u)
        J = self.jac(u)
        gi = jnp.linalg.inv(self.metric_fn(u))
        v = v_fn(u)
        R = self.target.curvature(p, v[None, None, :], J.T[:, None, :], J.T[None, :, :])
        curv = self.weight(u, alpha) * jnp.einsum("ij,ija->a", gi, R)
        return curv + self._trace_nabla(u, radial_form) + self._trace_nabla(u, grad_form)

    # -- stress-energy ----------------------------------------------------
    def stress_energy(self, u, alpha):
        """``S_alpha = (1 + |d psi|^2)^alpha g - 2 alpha (1 + |d psi|^2)^(alpha-1) psi^* h``."""
        g = self.metric_fn(u)
        x = self.density(u)
        return (1.0 + x) ** alpha * g - 2.0 * alpha * (1.0 + x) ** (alpha - 1.0) * self.pullback(u)

    def stress_divergence(self, u, alpha):
        """Covector ``(div S_alpha)_j = g^{ik} (nabla_k S)_{ij}``."""
        _, gi, gam = christoffel(self.metric_fn, u)
        S = self.stress_energy(u, alpha)
        dS = jax.jacfwd(self.stress_energy)(u, alpha)  # [i, j, k] = d_k S_ij
        return (
            jnp.einsum("ik,ijk->j", gi, dS)
            - jnp.einsum("ik,lki,lj->j", gi, gam, S)
            - jnp.einsum("ik,lkj,il->j", gi, gam, S)
        )

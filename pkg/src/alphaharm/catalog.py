"""Named analytic test maps and variation fields with known closed-form behaviour.

Every builder returns an :class:`~alphaharm.geometry.AnalyticMap` whose
``meta`` records the facts the tests rely on (dimensions, expected energy
density, dilation, ...).  Quadrature resolutions are keyword arguments so
tests can trade accuracy for speed.
"""

from __future__ import annotations

import numpy as np

from ._jax import jnp
from .geometry.analytic import (
    AnalyticDomain,
    Chart,
    circle,
    flat_torus,
    sphere2,
    sphere2_embedding,
    sphere3,
    sphere3_embedding,
    tensor_rule,
)
from .geometry.fields import AnalyticMap
from .geometry.targets import FlatTorus, HyperbolicPlane, UnitSphere

__all__ = [
    "sphere_identity",
    "constant_map",
    "equator_circle",
    "great_circle",
    "latitude_stretch",
    "latitude_rotation",
    "torus_linear",
    "torus_shear",
    "torus_projection",
    "hopf_map",
    "warped_submersion",
    "balanced_submersion",
    "hyperbolic_circle",
    "hong_torus_map",
    "coordinate_fields",
    "frame_field",
    "build",
    "MAP_BUILDERS",
]


def sphere_identity(dim: int = 2, n: int = 16) -> AnalyticMap:
    """Identity of the unit ``S^2`` (polar chart) or ``S^3`` (Hopf chart)."""
    if dim == 2:
        dom = sphere2(n, 2 * n)
        return AnalyticMap(dom, UnitSphere(2), sphere2_embedding, "identity-S2", {"density": 2.0})
    if dim == 3:
        dom = sphere3(max(n // 2, 4), n)
        return AnalyticMap(dom, UnitSphere(3), sphere3_embedding, "identity-S3", {"density": 3.0})
    raise ValueError("identity maps are provided for S^2 and S^3")


def constant_map(domain: AnalyticDomain, target=None, point=None) -> AnalyticMap:
    """Constant map to ``point`` (default: the north pole of ``S^2``)."""
    target = target or UnitSphere(2)
    if point is None:
        point = np.zeros(target.ambient_dim)
        point[-1] = 1.0 if target.kind == "sphere" else 0.0
    q = jnp.asarray(point, dtype=float)
    return AnalyticMap(domain, target, lambda u: q + 0.0 * u[0], "constant", {"density": 0.0})


def equator_circle(n: int = 64) -> AnalyticMap:
    """Totally geodesic equator ``S^1 -> S^2``, ``|d psi|^2 = 1``."""

    def f(u):
        return jnp.stack([jnp.cos(u[0]), jnp.sin(u[0]), 0.0 * u[0]])

    return AnalyticMap(circle(n), UnitSphere(2), f, "equator-S1-S2", {"density": 1.0})


def great_circle(radius: float = 2.0, target_dim: int = 3, n: int = 64) -> AnalyticMap:
    """Circle of the given radius onto a great circle of ``S^n`` at unit speed in the angle.

    ``|d psi|^2 = 1 / radius^2``; the map is a constant-speed geodesic and hence
    alpha-harmonic for every alpha.
    """

    def f(u):
        z = [jnp.cos(u[0]), jnp.sin(u[0])] + [0.0 * u[0]] * (target_dim - 1)
        return jnp.stack(z)

    return AnalyticMap(circle(n, radius), UnitSphere(target_dim), f, f"great-circle(r={radius:g})",
                       {"density": 1.0 / radius**2})


def latitude_stretch(eps: float = 0.3, n: int = 16) -> AnalyticMap:
    """``S^2 -> S^2``, ``(theta, phi) -> (theta + eps sin(theta) cos(theta), phi)``.

    Smooth, degree one and not harmonic for ``eps != 0``.
    """

    def f(u):
        th = u[0] + eps * jnp.sin(u[0]) * jnp.cos(u[0])
        return sphere2_embedding(jnp.stack([th, u[1]]))

    return AnalyticMap(sphere2(n, 2 * n), UnitSphere(2), f, f"latitude-stretch({eps:g})", {"eps": eps})


def latitude_rotation(eps: float = 0.3, n: int = 12) -> AnalyticMap:
    """``S^3 -> S^3`` rotating the first Hopf angle by ``eps sin(2 eta)``.

    A diffeomorphism (non-degenerate) that is not harmonic.
    """

    def f(u):
        return sphere3_embedding(jnp.stack([u[0], u[1] + eps * jnp.sin(2 * u[0]), u[2]]))

    return AnalyticMap(sphere3(max(n // 2, 4), n), UnitSphere(3), f, f"latitude-rotation({eps:g})", {"eps": eps})


def torus_linear(matrix=None, n: int = 12, scale: float = 1.0, dim: int | None = None) -> AnalyticMap:
    """Linear map ``x -> A x`` between flat tori (integer ``A`` descends to the quotient).

    With ``scale`` the domain metric is ``scale^2 I``; the energy density is
    ``|A|_F^2 / scale^2``.  The default is the winding ``A = I`` of ``T^2``.
    """
    A = np.eye(dim or 2) if matrix is None else np.asarray(matrix, dtype=float)
    k, m = A.shape
    if not np.allclose(A, np.round(A)):
        raise ValueError("linear torus maps need an integer matrix")
    Aj = jnp.asarray(A)
    dom = flat_torus(m, n, scale)
    dens = float(np.sum(A**2)) / scale**2
    return AnalyticMap(dom, FlatTorus(k), lambda u: Aj @ u, f"torus-linear{A.astype(int).tolist()}",
                       {"density": dens, "matrix": A.tolist(), "scale": scale})


def torus_shear(eps: float = 0.2, n: int = 8) -> AnalyticMap:
    """``T^3 -> T^3``, ``x -> x + eps (sin x2, sin x3, sin x1)``: a non-harmonic diffeomorphism."""

    def f(u):
        return u + eps * jnp.stack([jnp.sin(u[1]), jnp.sin(u[2]), jnp.sin(u[0])])

    return AnalyticMap(flat_torus(3, n), FlatTorus(3), f, f"torus-shear({eps:g})", {"eps": eps})


def torus_projection(dim: int = 2, n: int = 12) -> AnalyticMap:
    """Riemannian submersion ``T^dim -> T^1`` onto the first angle (dilation 1)."""
    return AnalyticMap(flat_torus(dim, n), FlatTorus(1), lambda u: u[:1], f"torus-projection-T{dim}",
                       {"dilation_sq": 1.0})


def hopf_map(n: int = 12) -> AnalyticMap:
    """Hopf fibration ``S^3 -> S^2`` to the unit sphere; horizontally conformal with ``mu^2 = 4``."""

    def f(u):
        eta, x1, x2 = u[0], u[1], u[2]
        s = jnp.sin(2 * eta)
        return jnp.stack([s * jnp.cos(x1 - x2), s * jnp.sin(x1 - x2), -jnp.cos(2 * eta)])

    return AnalyticMap(sphere3(max(n // 2, 4), n), UnitSphere(2), f, "hopf", {"dilation_sq": 4.0})


def _product_circle_s3(metric, n_t: int, n_eta: int, n_xi: int, name: str) -> AnalyticDomain:
    pts, w = tensor_rule(
        [
            ("periodic", 0.0, 2 * np.pi, n_t),
            ("gauss", 0.0, np.pi / 2, n_eta),
            ("periodic", 0.0, 2 * np.pi, n_xi),
            ("periodic", 0.0, 2 * np.pi, n_xi),
        ]
    )
    chart = Chart(metric, pts, w, (2 * np.pi, None, 2 * np.pi, 2 * np.pi), "t-hopf")
    return AnalyticDomain(4, [chart], name)


def _s3_metric_block(u, factor):
    return factor * jnp.stack([1.0, jnp.sin(u[1]) ** 2, jnp.cos(u[1]) ** 2])


def warped_submersion(amplitude: float = 0.5, n_t: int = 8, n_eta: int = 6, n_xi: int = 8) -> AnalyticMap:
    """Projection ``S^1 x S^3 -> S^3`` for ``g = dt^2 + lambda(t)^(-2) g_S3``.

    Horizontally conformal with dilation ``mu^2 = lambda^2 = 1 + amplitude sin t``,
    whose gradient is vertical; the fibres are geodesics and the map is
    alpha-harmonic for every alpha.
    """

    def lam2(u):
        return 1.0 + amplitude * jnp.sin(u[0])

    def metric(u):
        return jnp.diag(jnp.concatenate([jnp.ones(1), _s3_metric_block(u, 1.0 / lam2(u))]))

    dom = _product_circle_s3(metric, n_t, n_eta, n_xi, "S1xS3-warped")
    return AnalyticMap(dom, UnitSphere(3), lambda u: sphere3_embedding(u[1:]), "warped-submersion",
                       {"dilation_sq": lam2, "amplitude": amplitude})


def balanced_fiber_length(s, alpha: float, m: int = 4, n: int = 3):
    """Fibre length factor ``Phi(s) = (s^(n-2) (1 + n s)^(2-2 alpha))^(1/(2(m-n)))``.

    With fibre metric ``Phi(mu^2)^2 dt^2`` the fibre mean curvature
    ``H = -(grad log Phi)^H`` exactly balances the horizontal gradient of the
    dilation in the alpha-stress-energy identity, so the submersion is
    alpha-harmonic.
    """
    return (s ** (n - 2) * (1.0 + n * s) ** (2.0 - 2.0 * alpha)) ** (1.0 / (2.0 * (m - n)))


def balanced_submersion(alpha: float = 1.4, a_t: float = 0.25, a_eta: float = 0.5, n_t: int = 8, n_eta: int = 6,
                        n_xi: int = 8) -> AnalyticMap:
    """Alpha-harmonic projection ``S^1 x S^3 -> S^3`` whose dilation has a horizontal gradient.

    ``g = Phi(mu^2)^2 dt^2 + mu^(-2) g_S3`` with
    ``mu^2 = (1 + a_t sin t)(1 + a_eta sin^2 eta)`` and ``Phi`` from
    :func:`balanced_fiber_length`.  The fibres are not minimal.
    """

    def mu2(u):
        return (1.0 + a_t * jnp.sin(u[0])) * (1.0 + a_eta * jnp.sin(u[1]) ** 2)

    def metric(u):
        s = mu2(u)
        phi = balanced_fiber_length(s, alpha)
        return jnp.diag(jnp.concatenate([jnp.reshape(phi**2, (1,)), _s3_metric_block(u, 1.0 / s)]))

    dom = _product_circle_s3(metric, n_t, n_eta, n_xi, "S1xS3-balanced")
    return AnalyticMap(dom, UnitSphere(3), lambda u: sphere3_embedding(u[1:]), f"balanced-submersion({alpha:g})",
                       {"dilation_sq": mu2, "alpha": alpha})


def hyperbolic_circle(radius: float = 0.5, n: int = 64) -> AnalyticMap:
    """Unit circle onto a Euclidean circle in the Poincare disk: ``theta -> r (cos theta, sin theta)``.

    Not a geodesic (closed curves in the hyperbolic plane are never
    harmonic); used as a non-critical test map for identities that hold
    for every map.
    """

    def f(u):
        return radius * jnp.stack([jnp.cos(u[0]), jnp.sin(u[0])])

    return AnalyticMap(circle(n), HyperbolicPlane(), f, f"hyperbolic-circle({radius:g})", {})


def hong_torus_map(n: int = 6, amplitude: float = 1.0, base: float = 3.0) -> AnalyticMap:
    """Harmonic ``T^5 -> T^1``, ``x -> x1``, for ``g = a(x1)(dx1^2 + dx2^2) + dx3^2 + dx4^2 + dx5^2``.

    ``a = base + amplitude sin x1``.  Harmonic because the first two
    coordinates carry a conformally flat 2-dimensional metric; the energy
    density ``1/a`` varies along the image direction, so the conformal
    factor built from it is not trivially compatible with the map.
    """

    def metric(u):
        a = base + amplitude * jnp.sin(u[0])
        return jnp.diag(jnp.stack([a, a, 1.0, 1.0, 1.0]))

    dom = flat_torus(5, n, metric=metric, name="T5-conformal")
    return AnalyticMap(dom, FlatTorus(1), lambda u: u[:1], "hong-torus", {"density_range": [1 / (base + amplitude), 1 / (base - amplitude)]})


def coordinate_fields(dim: int):
    """Coordinate vector fields ``d_i`` as JAX functions of the chart point."""
    out = []
    for i in range(dim):
        e = np.zeros(dim)
        e[i] = 1.0
        ej = jnp.asarray(e)
        out.append(lambda u, ej=ej: ej + 0.0 * u[0])
    return out


def frame_field(dim: int):
    """A smooth non-constant vector field in chart coordinates."""

    def Y(u):
        comps = [jnp.cos(u[(i + 1) % dim]) + 0.5 * jnp.sin(u[i]) for i in range(dim)]
        return jnp.stack(comps)

    return Y


MAP_BUILDERS = {
    "identity-S2": lambda **kw: sphere_identity(2, **kw),
    "identity-S3": lambda **kw: sphere_identity(3, **kw),
    "equator-S1-S2": equator_circle,
    "great-circle": great_circle,
    "latitude-stretch": latitude_stretch,
    "latitude-rotation": latitude_rotation,
    "torus-linear": torus_linear,
    "torus-shear": torus_shear,
    "torus-projection": torus_projection,
    "hopf": hopf_map,
    "warped-submersion": warped_submersion,
    "balanced-submersion": balanced_submersion,
    "hyperbolic-circle": hyperbolic_circle,
    "hong-torus": hong_torus_map,
}


def build(name: str, **params) -> AnalyticMap:
    """Build a catalog map by name with keyword parameters."""
    try:
        builder = MAP_BUILDERS[name]
    except KeyError:
        raise ValueError(f"unknown analytic map {name!r}; choose from {sorted(MAP_BUILDERS)}") from None
    return builder(**params)

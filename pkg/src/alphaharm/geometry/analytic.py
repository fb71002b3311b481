"""Analytic domain manifolds given by charts with quadrature.

An :class:`AnalyticDomain` is a list of charts.  Each chart carries a
JAX-traceable metric ``u -> g(u)`` and a tensor-product quadrature rule in its
coordinates.  Integrals are ``sum_q w_q sqrt(det g(u_q)) f(u_q)``.

Gauss-Legendre nodes are used along non-periodic coordinates (which keeps
samples away from polar coordinate singularities) and the trapezoidal rule,
spectrally accurate for smooth periodic integrands, along periodic ones.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .._jax import jax, jnp

__all__ = [
    "Chart",
    "AnalyticDomain",
    "tensor_rule",
    "sphere2",
    "sphere3",
    "circle",
    "flat_torus",
    "unit_square",
    "sphere2_embedding",
    "sphere3_embedding",
]


def _axis_rule(kind, a, b, n):
    if n < 1:
        raise ValueError("quadrature needs at least one node per axis")
    if kind == "gauss":
        x, w = np.polynomial.legendre.leggauss(n)
        return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w
    if kind == "periodic":
        h = (b - a) / n
        return a + h * np.arange(n), np.full(n, h)
    raise ValueError(f"unknown quadrature axis kind {kind!r}")


def tensor_rule(axes):
    """Tensor-product quadrature from a list of ``(kind, a, b, n)`` axis rules.

    Returns points of shape ``(N, m)`` and weights of shape ``(N,)`` for the
    coordinate (Lebesgue) measure.
    """
    nodes, weights = zip(*(_axis_rule(*ax) for ax in axes))
    grids = np.meshgrid(*nodes, indexing="ij")
    wgrids = np.meshgrid(*weights, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    w = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    return pts, w


@dataclass(frozen=True, eq=False)
class Chart:
    """Coordinate chart with metric and quadrature.

    Parameters
    ----------
    metric : callable
        JAX-traceable ``u -> g(u)`` returning an ``(m, m)`` symmetric positive
        definite matrix.
    points, weights : ndarray
        Quadrature nodes ``(N, m)`` and coordinate weights ``(N,)``.
    periods : tuple
        Period of each coordinate (``None`` for non-periodic ones).
    """

    metric: Callable
    points: np.ndarray
    weights: np.ndarray
    periods: tuple = ()
    name: str = "chart"


class AnalyticDomain:
    """Closed Riemannian manifold described by charts with quadrature.

    Parameters
    ----------
    dim : int
        Dimension ``m``.
    charts : list of Chart
        Charts whose quadrature rules together integrate over the manifold.
    name : str
        Label used in reports.
    volume : float, optional
        Known total volume, used only for reporting.
    embedding : callable, optional
        JAX-traceable chart-to-ambient map for domains that are submanifolds
        (used by identity-type test maps).
    """

    def __init__(self, dim: int, charts, name: str = "domain", volume=None, embedding=None):
        charts = list(charts)
        if not charts:
            raise ValueError("a domain needs at least one chart")
        for c in charts:
            if c.points.ndim != 2 or c.points.shape[1] != dim:
                raise ValueError("chart points must have shape (N, dim)")
        if len(charts) > 1:
            raise NotImplementedError("multi-chart domains are not needed by the built-in catalog")
        self.dim = int(dim)
        self.charts = charts
        self.name = name
        self.volume = volume
        self.embedding = embedding
        self._cache: dict = {}

    @property
    def chart(self) -> Chart:
        return self.charts[0]

    @property
    def metric(self) -> Callable:
        return self.chart.metric

    @property
    def points(self) -> np.ndarray:
        return self.chart.points

    @property
    def weights(self) -> np.ndarray:
        return self.chart.weights

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    def _compiled(self, key, fn):
        if key not in self._cache:
            self._cache[key] = jax.jit(jax.vmap(fn))
        return self._cache[key]

    @property
    def metric_values(self) -> np.ndarray:
        if "g" not in self._cache:
            self._cache["g"] = np.asarray(self._compiled("g_fn", self.metric)(jnp.asarray(self.points)))
        return self._cache["g"]

    @property
    def volume_density(self) -> np.ndarray:
        """``sqrt(det g)`` at the quadrature nodes."""
        return np.sqrt(np.linalg.det(self.metric_values))

    @property
    def measure(self) -> np.ndarray:
        """Riemannian quadrature weights ``w_q sqrt(det g(u_q))``."""
        if "measure" not in self._cache:
            self._cache["measure"] = self.weights * self.volume_density
        return self._cache["measure"]

    def integrate_values(self, values) -> float:
        """Integrate sampled values ``(N,)`` against the Riemannian measure."""
        values = np.asarray(values, dtype=float)
        if values.shape != (self.n_points,):
            raise ValueError(f"expected {self.n_points} samples, got shape {values.shape}")
        return float(np.sum(self.measure * values))

    def sample(self, fn, key=None):
        """Evaluate a pointwise JAX function at every node (jit + vmap, cached by ``key``)."""
        compiled = self._compiled(key, fn) if key is not None else jax.jit(jax.vmap(fn))
        return compiled(jnp.asarray(self.points))

    def with_metric(self, metric: Callable, name: str | None = None) -> "AnalyticDomain":
        """Same coordinates and quadrature, different metric."""
        c = self.chart
        chart = Chart(metric, c.points, c.weights, c.periods, c.name)
        return AnalyticDomain(self.dim, [chart], name or self.name + "'", None, self.embedding)

    def conformal(self, factor: Callable, name: str | None = None) -> "AnalyticDomain":
        """Domain with metric ``factor(u) * g(u)``."""
        g = self.metric
        return self.with_metric(lambda u: factor(u) * g(u), name)

    def describe(self) -> dict:
        return {"name": self.name, "dim": self.dim, "samples": self.n_points}

    def __repr__(self):
        return f"AnalyticDomain({self.name!r}, dim={self.dim}, samples={self.n_points})"


def sphere2_embedding(u):
    th, ph = u[0], u[1]
    return jnp.stack([jnp.sin(th) * jnp.cos(ph), jnp.sin(th) * jnp.sin(ph), jnp.cos(th)])


def sphere3_embedding(u):
    eta, x1, x2 = u[0], u[1], u[2]
    return jnp.stack(
        [jnp.sin(eta) * jnp.cos(x1), jnp.sin(eta) * jnp.sin(x1), jnp.cos(eta) * jnp.cos(x2), jnp.cos(eta) * jnp.sin(x2)]
    )


def sphere2(n_theta: int = 24, n_phi: int = 48, radius: float = 1.0) -> AnalyticDomain:
    """Round 2-sphere in polar coordinates ``(theta, phi)``."""
    r2 = radius**2

    def metric(u):
        return r2 * jnp.diag(jnp.stack([1.0, jnp.sin(u[0]) ** 2]))

    pts, w = tensor_rule([("gauss", 0.0, np.pi, n_theta), ("periodic", 0.0, 2 * np.pi, n_phi)])
    chart = Chart(metric, pts, w, (None, 2 * np.pi), "polar")
    return AnalyticDomain(2, [chart], "S2", 4 * np.pi * r2, sphere2_embedding)


def sphere3(n_eta: int = 12, n_xi: int = 24) -> AnalyticDomain:
    """Unit 3-sphere in Hopf coordinates ``(eta, xi1, xi2)``.

    ``(z1, z2) = (e^{i xi1} sin eta, e^{i xi2} cos eta)`` with metric
    ``d eta^2 + sin^2 eta d xi1^2 + cos^2 eta d xi2^2``.
    """

    def metric(u):
        return jnp.diag(jnp.stack([1.0, jnp.sin(u[0]) ** 2, jnp.cos(u[0]) ** 2]))

    pts, w = tensor_rule(
        [("gauss", 0.0, np.pi / 2, n_eta), ("periodic", 0.0, 2 * np.pi, n_xi), ("periodic", 0.0, 2 * np.pi, n_xi)]
    )
    chart = Chart(metric, pts, w, (None, 2 * np.pi, 2 * np.pi), "hopf")
    return AnalyticDomain(3, [chart], "S3", 2 * np.pi**2, sphere3_embedding)


def circle(n: int = 64, radius: float = 1.0) -> AnalyticDomain:
    """Circle of the given radius, angle coordinate in ``[0, 2 pi)``."""
    r2 = radius**2

    def metric(u):
        return jnp.full((1, 1), r2) + 0.0 * u[0]

    pts, w = tensor_rule([("periodic", 0.0, 2 * np.pi, n)])
    chart = Chart(metric, pts, w, (2 * np.pi,), "angle")
    return AnalyticDomain(1, [chart], f"S1(r={radius:g})", 2 * np.pi * radius, None)


def flat_torus(dim: int, n: int = 16, scale: float = 1.0, metric: Callable | None = None, name=None) -> AnalyticDomain:
    """Torus ``[0, 2 pi)^dim`` with metric ``scale^2 I`` or a custom periodic metric."""
    s2 = scale**2
    if metric is None:
        def metric(u):
            return s2 * jnp.eye(dim) + 0.0 * u[0]
        volume = (2 * np.pi * scale) ** dim
    else:
        volume = None
    pts, w = tensor_rule([("periodic", 0.0, 2 * np.pi, n)] * dim)
    chart = Chart(metric, pts, w, (2 * np.pi,) * dim, "angles")
    return AnalyticDomain(dim, [chart], name or f"T{dim}", volume, None)


def unit_square(n: int = 12) -> AnalyticDomain:
    """Flat unit square (a chart with boundary, used for local checks)."""

    def metric(u):
        return jnp.eye(2) + 0.0 * u[0]

    pts, w = tensor_rule([("gauss", 0.0, 1.0, n)] * 2)
    return AnalyticDomain(2, [Chart(metric, pts, w, (None, None), "square")], "square", 1.0, None)

"""Maps, variation fields and tensor fields on mesh or analytic domains."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .._jax import jax, jnp
from .analytic import AnalyticDomain
from .jets import MapJet
from .mesh import DomainMesh
from .targets import TargetManifold

__all__ = [
    "AlphaParameter",
    "as_alpha",
    "MapState",
    "DiscreteVertexMap",
    "AnalyticMap",
    "VariationField",
    "SampledField",
    "SymmetricTensorField",
]


@dataclass(frozen=True)
class AlphaParameter:
    """Exponent ``alpha >= 1`` of the energy; ``alpha == 1`` is the classical case."""

    value: float

    def __post_init__(self):
        v = float(self.value)
        if not np.isfinite(v) or v < 1.0:
            raise ValueError(f"alpha must be a finite number >= 1, got {self.value!r}")
        object.__setattr__(self, "value", v)

    @property
    def classical(self) -> bool:
        return self.value == 1.0

    def __float__(self):
        return self.value


def as_alpha(a) -> float:
    """Validate an exponent given as a number or :class:`AlphaParameter`."""
    return a.value if isinstance(a, AlphaParameter) else AlphaParameter(a).value


class MapState:
    """Common base of :class:`DiscreteVertexMap` and :class:`AnalyticMap`."""

    domain: DomainMesh | AnalyticDomain
    target: TargetManifold
    name: str

    @property
    def is_mesh(self) -> bool:
        return isinstance(self, DiscreteVertexMap)


@dataclass(eq=False)
class DiscreteVertexMap(MapState):
    """Piecewise linear map given by one target point per mesh vertex.

    Parameters
    ----------
    domain : DomainMesh
    target : TargetManifold
    values : ndarray, shape (V, d)
        Vertex images in target coordinates.
    validate : bool
        Reject values that are off the target manifold by more than ``1e-9``.
    """

    domain: DomainMesh
    target: TargetManifold
    values: np.ndarray
    name: str = "mesh-map"
    validate: bool = True

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != (self.domain.n_vertices, self.target.ambient_dim):
            raise ValueError(
                f"values must have shape ({self.domain.n_vertices}, {self.target.ambient_dim}), got {vals.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("map values must be finite")
        if self.validate:
            res = self.target.manifold_residual(vals)
            if np.any(res > 1e-9):
                bad = int(np.argmax(res))
                raise ValueError(f"vertex {bad} is off the target manifold (residual {res[bad]:.3g})")
        self.values = vals

    def with_values(self, values, name=None) -> "DiscreteVertexMap":
        return DiscreteVertexMap(self.domain, self.target, values, name or self.name, self.validate)

    @property
    def corner_values(self) -> np.ndarray:
        """Vertex images gathered on face corners, shape (F, 3, d)."""
        return self.values[self.domain.faces]

    def face_differentials(self) -> np.ndarray:
        """Parameter derivatives ``[psi_1 - psi_0, psi_2 - psi_0]`` per face, shape (F, d, 2).

        Differences are taken in the target's coordinate difference (wrapped on
        the torus).
        """
        c = self.corner_values
        d1 = self.target.difference(c[:, 0], c[:, 1])
        d2 = self.target.difference(c[:, 0], c[:, 2])
        return np.stack([d1, d2], axis=-1)

    def face_barycenters(self) -> np.ndarray:
        """Mean of the (unwrapped) corner images per face, shape (F, d)."""
        c = self.corner_values
        D = self.face_differentials()
        return c[:, 0] + (D[..., 0] + D[..., 1]) / 3.0


@dataclass(eq=False)
class AnalyticMap(MapState):
    """Map given by a JAX-traceable function of the chart coordinates.

    Parameters
    ----------
    domain : AnalyticDomain
    target : TargetManifold
    func : callable
        ``u -> psi(u)`` returning target coordinates (ambient point for the
        sphere, lifted angles for the torus, disk point for the hyperbolic
        plane).
    name : str
    """

    domain: AnalyticDomain
    target: TargetManifold
    func: Callable
    name: str = "analytic-map"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self._cache: dict = {}

    def jet(self) -> MapJet:
        return MapJet(self.domain.metric, self.target, self.func)

    def evaluate(self, key, fn, *args) -> np.ndarray:
        """Evaluate ``fn(u, *args)`` at every quadrature node.

        The vectorised, compiled function is cached under ``key`` so that
        repeated calls with different scalar arguments (such as ``alpha``) do
        not recompile.
        """
        comp = self._cache.get(key)
        if comp is None:
            comp = jax.jit(jax.vmap(fn, in_axes=(0,) + (None,) * len(args)))
            self._cache[key] = comp
        return np.asarray(comp(jnp.asarray(self.domain.points), *args))

    @property
    def values(self) -> np.ndarray:
        return self.evaluate("values", self.func)

    def on_domain(self, domain: AnalyticDomain, name=None) -> "AnalyticMap":
        """Same formula on another domain (for example with a conformally changed metric)."""
        return AnalyticMap(domain, self.target, self.func, name or self.name, dict(self.meta))


@dataclass(eq=False)
class VariationField:
    """Section of the pullback bundle along a map.

    On meshes ``values`` holds one target tangent vector per vertex.  On
    analytic domains ``func`` is a JAX-traceable ``u -> v(u)``.
    """

    map: MapState
    values: np.ndarray | None = None
    func: Callable | None = None
    name: str = "field"
    check_tangent: bool = True

    def __post_init__(self):
        if self.map.is_mesh:
            if self.values is None:
                raise ValueError("mesh variation fields need per-vertex values")
            vals = np.array(self.values, dtype=float)
            if vals.shape != self.map.values.shape:
                raise ValueError(f"field values must have shape {self.map.values.shape}")
            if self.check_tangent:
                p = self.map.values
                off = np.linalg.norm(vals - self.map.target.tangent_project(p, vals), axis=-1)
                scale = 1.0 + np.linalg.norm(vals, axis=-1)
                if np.any(off > 1e-9 * scale):
                    raise ValueError(f"field is not tangent at vertex {int(np.argmax(off / scale))}")
            self.values = vals
        else:
            if self.func is None:
                raise ValueError("analytic variation fields need a function")
            if self.check_tangent:
                p = np.asarray(self.map.values)
                v = self.sampled()
                off = np.linalg.norm(v - np.asarray(self.map.target.tangent_project(p, v)), axis=-1)
                if np.any(off > 1e-9 * (1.0 + np.linalg.norm(v, axis=-1))):
                    raise ValueError(f"field {self.name!r} is not tangent along the map")

    def sampled(self) -> np.ndarray:
        if self.map.is_mesh:
            return self.values
        return self.map.evaluate(("field", self), self.func)


@dataclass(eq=False)
class SampledField:
    """Section along an analytic map known only at its quadrature nodes, shape (N, d)."""

    map: MapState
    values: np.ndarray
    name: str = "field"

    def sampled(self) -> np.ndarray:
        return self.values


@dataclass(eq=False)
class SymmetricTensorField:
    """Symmetric 2-tensor sampled per element, shape ``(N, m, m)``."""

    domain: DomainMesh | AnalyticDomain
    values: np.ndarray
    name: str = "tensor"

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 3 or vals.shape[1] != vals.shape[2]:
            raise ValueError("tensor values must have shape (N, m, m)")
        asym = np.max(np.abs(vals - np.swapaxes(vals, 1, 2)), initial=0.0)
        if asym > 1e-12 * (1.0 + np.max(np.abs(vals), initial=0.0)):
            raise ValueError(f"tensor field is not symmetric (max asymmetry {asym:.3g})")
        self.values = vals

    def trace(self, metric_inverse) -> np.ndarray:
        """``tr_g S`` given the inverse metric per element."""
        return np.einsum("nij,nij->n", np.asarray(metric_inverse), self.values)


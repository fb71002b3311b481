"""Pointwise and integral operations shared by mesh and analytic maps."""

from __future__ import annotations

import numpy as np

from .._jax import jax, jnp
from .analytic import AnalyticDomain
from .fields import AnalyticMap, DiscreteVertexMap, MapState
from .discrete import face_density
from .mesh import CORNER_DIFF, DomainMesh
from .targets import TargetManifold

__all__ = ["differential", "hs_norm_sq", "grad_scalar", "integrate", "curvature"]


def differential(psi: MapState, element: int | None = None, project: bool = True) -> np.ndarray:
    """Matrix of ``d psi`` in chart (analytic) or face-parameter (mesh) coordinates.

    Parameters
    ----------
    psi : DiscreteVertexMap or AnalyticMap
    element : int, optional
        Face index (mesh) or quadrature-node index (analytic).  ``None``
        returns all elements stacked.
    project : bool
        Mesh only: project the columns onto the target tangent space at the
        face barycenter image.

    Returns
    -------
    ndarray, shape (d, m) or (N, d, m)
    """
    if isinstance(psi, DiscreteVertexMap):
        D = psi.face_differentials()
        if project:
            p = psi.target.project(psi.face_barycenters())
            D = np.swapaxes(psi.target.tangent_project(p[:, None, :], np.swapaxes(D, 1, 2)), 1, 2)
    elif isinstance(psi, AnalyticMap):
        jet = psi.jet()
        D = psi.evaluate("jac", jet.jac)
    else:
        raise TypeError(f"unsupported map type {type(psi).__name__}")
    if element is None:
        return D
    if not 0 <= element < D.shape[0]:
        raise IndexError(f"element {element} out of range")
    return D[element]


def hs_norm_sq(psi: MapState, element: int | None = None) -> np.ndarray | float:
    """``|d psi|^2 = tr(g^{-1} d psi^T h d psi)`` per element.

    On meshes this is the per-face energy density of the piecewise linear
    map (see :mod:`alphaharm.geometry.discrete`): on the sphere the face
    differential is tangent-projected at the normalised barycenter image, on
    the hyperbolic plane the metric scale is taken at the barycenter.
    """
    if isinstance(psi, DiscreteVertexMap):
        x = mesh_density(psi.domain, psi.target, psi.face_differentials(), psi.face_barycenters())
    elif isinstance(psi, AnalyticMap):
        x = psi.evaluate("density", psi.jet().density)
    else:
        raise TypeError(f"unsupported map type {type(psi).__name__}")
    if element is None:
        return x
    return float(x[element])


def mesh_density(mesh: DomainMesh, target: TargetManifold, D: np.ndarray, bary: np.ndarray) -> np.ndarray:
    """Per-face density for face differentials ``D`` (F, d, 2) and barycenter images."""
    return face_density(target, mesh.face_metric_inverses, D, bary)


def grad_scalar(domain, field) -> np.ndarray:
    """Riemannian gradient of a scalar field.

    Mesh: ``field`` holds vertex values; the result is the per-face constant
    gradient of the piecewise linear interpolant as an embedding-space vector,
    shape (F, D).  Analytic: ``field`` is a JAX-traceable ``u -> f(u)``; the
    result is ``g^{-1} df`` in chart coordinates at each node, shape (N, m).
    """
    if isinstance(domain, DomainMesh):
        vals = np.asarray(field, dtype=float)
        if vals.shape != (domain.n_vertices,):
            raise ValueError("mesh scalar fields must have one value per vertex")
        df = vals[domain.faces] @ CORNER_DIFF  # (F, 2)
        coeff = np.einsum("fab,fb->fa", domain.face_metric_inverses, df)
        return np.einsum("fda,fa->fd", domain.edge_frames, coeff)
    if isinstance(domain, AnalyticDomain):
        if not callable(field):
            raise TypeError("analytic scalar fields must be given as a function of the chart coordinates")

        def one(u):
            return jnp.linalg.solve(domain.metric(u), jax.grad(field)(u))

        return np.asarray(domain.sample(one))
    raise TypeError(f"unsupported domain type {type(domain).__name__}")


def integrate(domain, field, where: str | None = None) -> float:
    """Integrate a scalar field over the domain.

    Mesh: ``field`` holds per-face values (``where="faces"``) or per-vertex
    values (``where="vertices"``, lumped areas).  Analytic: sampled values at
    the quadrature nodes or a JAX-traceable function.
    """
    if isinstance(domain, DomainMesh):
        vals = np.asarray(field, dtype=float)
        if where is None:
            where = "faces" if vals.shape == (domain.n_faces,) else "vertices"
        if where == "faces":
            if vals.shape != (domain.n_faces,):
                raise ValueError("expected one value per face")
            return float(np.sum(domain.face_areas * vals))
        if where == "vertices":
            if vals.shape != (domain.n_vertices,):
                raise ValueError("expected one value per vertex")
            return float(np.sum(domain.vertex_areas * vals))
        raise ValueError("where must be 'faces' or 'vertices'")
    if isinstance(domain, AnalyticDomain):
        vals = np.asarray(domain.sample(field)) if callable(field) else field
        return domain.integrate_values(vals)
    raise TypeError(f"unsupported domain type {type(domain).__name__}")


def curvature(target: TargetManifold, p, X, Y, Z):
    """Riemann curvature ``R(X, Y)Z`` of the target at ``p``."""
    return target.curvature(p, X, Y, Z)

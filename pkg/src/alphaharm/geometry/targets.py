"""Target manifolds.

Every target is represented in coordinates where its metric is a scalar
multiple of the Euclidean one, ``h(p) = s(p) I``:

* the unit sphere sits in its ambient Euclidean space (``s = 1``),
* the flat torus uses angle coordinates (``s = 1``),
* the hyperbolic plane uses the Poincare disk (``s = 4 / (1 - |z|^2)^2``),
* a user supplied embedded submanifold uses the ambient metric (``s = 1``).

The same methods serve mesh code (NumPy arrays) and analytic code (JAX
arrays, including tracers).  All methods act on the last axis and broadcast
over leading axes.

Curvature follows the convention ``R(X, Y)Z = ∇_X ∇_Y Z - ∇_Y ∇_X Z - ∇_[X,Y] Z``
so that the unit sphere has ``R(X, Y)Z = <Y, Z>X - <X, Z>Y``.

The connection term ``connection(p, a, b)`` is the bilinear correction with
``∇_X V = dV(X) + connection(p, dψ X, V)`` for a section ``V`` along a map.
"""

from __future__ import annotations

import numpy as np

from .._jax import array_namespace, jax, jnp

__all__ = [
    "TargetManifold",
    "UnitSphere",
    "FlatTorus",
    "HyperbolicPlane",
    "EmbeddedCustom",
    "make_target",
]


def _dot(a, b):
    return (a * b).sum(-1)


class TargetManifold:
    """Base class for the supported targets.

    Attributes
    ----------
    kind : str
        Variant tag (``"sphere"``, ``"torus"``, ``"hyperbolic"`` or ``"custom"``).
    dim : int
        Intrinsic dimension ``n``.
    ambient_dim : int
        Number of coordinates used to represent a point.
    """

    kind = "abstract"
    dim: int
    ambient_dim: int
    #: sign of the sectional curvature when it is constant, else ``None``
    curvature_sign: int | None = None

    # -- point handling ---------------------------------------------------
    def project(self, q):
        raise NotImplementedError

    def retract(self, p, v):
        """Move from ``p`` along tangent vector ``v`` and land on the manifold."""
        return self.project(p + v)

    def retract_with_displacement(self, p, v):
        """Retraction together with an accurate displacement ``R(p, v) - p``.

        The displacement is the one between the exact points the coordinates
        represent, free of the rounding incurred when the new point is stored.
        Line searches use it to resolve energy changes far below the rounding
        level of the coordinates.
        """
        new = self.retract(p, v)
        return new, self.difference(p, new)

    def tangent_project(self, p, v):
        raise NotImplementedError

    def difference(self, a, b):
        """Coordinate difference ``b - a`` (wrapped where coordinates are periodic)."""
        return b - a

    def manifold_residual(self, q):
        """Distance-like violation of the constraint defining the manifold."""
        q = np.asarray(q, dtype=float)
        return np.zeros(q.shape[:-1])

    # -- metric -----------------------------------------------------------
    def metric_scale(self, p):
        xp = array_namespace(p)
        return xp.ones(p.shape[:-1])

    def metric_scale_grad(self, p):
        xp = array_namespace(p)
        return xp.zeros(p.shape)

    def inner(self, p, a, b):
        return self.metric_scale(p) * _dot(a, b)

    def norm(self, p, a):
        xp = array_namespace(p, a)
        return xp.sqrt(self.inner(p, a, a))

    # -- connection and curvature -----------------------------------------
    def connection(self, p, a, b):
        xp = array_namespace(p, a, b)
        return xp.zeros(xp.broadcast_shapes(p.shape, a.shape, b.shape))

    def covariant_derivative(self, p, dpsi_x, v, dv_x):
        """``∇_X V`` from the ordinary derivative ``dv_x = dV(X)``."""
        return dv_x + self.connection(p, dpsi_x, v)

    def curvature(self, p, X, Y, Z):
        xp = array_namespace(p, X, Y, Z)
        return xp.zeros(xp.broadcast_shapes(X.shape, Y.shape, Z.shape))

    # -- frames -----------------------------------------------------------
    def tangent_basis(self, p):
        """Deterministic ``h``-orthonormal tangent basis, shape ``(..., n, d)``."""
        p = np.asarray(p, dtype=float)
        eye = np.broadcast_to(np.eye(self.dim), p.shape[:-1] + (self.dim, self.dim))
        scale = 1.0 / np.sqrt(self.metric_scale(p))
        return eye * scale[..., None, None]

    def describe(self) -> dict:
        return {"kind": self.kind, "dim": self.dim}

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim})"


class UnitSphere(TargetManifold):
    """Unit sphere ``S^n`` in ``R^(n+1)``."""

    kind = "sphere"
    curvature_sign = 1

    def __init__(self, dim: int = 2):
        if dim < 1:
            raise ValueError("sphere dimension must be at least 1")
        self.dim = int(dim)
        self.ambient_dim = self.dim + 1

    def project(self, q):
        xp = array_namespace(q)
        r = xp.sqrt(_dot(q, q))
        if xp is np and np.any(r == 0):
            raise ValueError("cannot project the origin onto the sphere")
        return q / r[..., None]

    def tangent_project(self, p, v):
        return v - _dot(v, p)[..., None] * p

    def retract_with_displacement(self, p, v):
        # exact points are q / |q|; with r0 = |p| and r1 = |p + v| the
        # displacement is v / r1 + p (r0 - r1) / (r0 r1), where
        # r0 - r1 = -(2 p.v + |v|^2) / (r0 + r1) has no cancellation
        p = np.asarray(p, dtype=float)
        q = p + v
        r0 = np.sqrt(_dot(p, p))
        r1 = np.sqrt(_dot(q, q))
        dr = -(2.0 * _dot(p, v) + _dot(v, v)) / (r0 + r1)
        delta = v / r1[..., None] + p * (dr / (r0 * r1))[..., None]
        return q / r1[..., None], delta

    def manifold_residual(self, q):
        q = np.asarray(q, dtype=float)
        return np.abs(np.sqrt(_dot(q, q)) - 1.0)

    def connection(self, p, a, b):
        return _dot(a, b)[..., None] * p

    def covariant_derivative(self, p, dpsi_x, v, dv_x):
        # for a tangent section the Levi-Civita derivative is the tangential
        # part of the ambient derivative
        return self.tangent_project(p, dv_x)

    def curvature(self, p, X, Y, Z):
        return _dot(Y, Z)[..., None] * X - _dot(X, Z)[..., None] * Y

    def second_fundamental_form(self, p, X, Y):
        """Second fundamental form ``B(X, Y) = -<X, Y> p`` of the unit sphere."""
        return -_dot(X, Y)[..., None] * p

    def shape_operator(self, p, W, X):
        """Shape operator ``A^W X`` for a normal vector ``W`` at ``p``."""
        return -_dot(p, W)[..., None] * X

    def tangent_basis(self, p):
        # Gram-Schmidt on the coordinate axes, dropping the axis most aligned
        # with p; the remaining projected axes always span the tangent space.
        p = np.asarray(p, dtype=float)
        flat = p.reshape(-1, self.ambient_dim)
        drop = np.argmax(np.abs(flat), axis=1)
        eye = np.eye(self.ambient_dim)
        out = np.empty((flat.shape[0], self.dim, self.ambient_dim))
        for i, (q, k) in enumerate(zip(flat, drop)):
            basis = []
            for j in range(self.ambient_dim):
                if j == k:
                    continue
                v = eye[j] - q[j] * q
                for b in basis:
                    v = v - (v @ b) * b
                basis.append(v / np.linalg.norm(v))
            out[i] = basis
        return out.reshape(p.shape[:-1] + (self.dim, self.ambient_dim))


class FlatTorus(TargetManifold):
    """Flat torus ``R^n / (2 pi Z)^n`` in angle coordinates."""

    kind = "torus"
    curvature_sign = 0

    def __init__(self, dim: int = 2):
        if dim < 1:
            raise ValueError("torus dimension must be at least 1")
        self.dim = int(dim)
        self.ambient_dim = self.dim

    def project(self, q):
        xp = array_namespace(q)
        return xp.mod(q, 2 * np.pi)

    def tangent_project(self, p, v):
        return v

    def retract_with_displacement(self, p, v):
        return self.project(p + v), np.array(v, dtype=float)

    def difference(self, a, b):
        xp = array_namespace(a, b)
        d = b - a
        # wrap to (-pi, pi]
        return d - 2 * np.pi * xp.ceil((d - np.pi) / (2 * np.pi))


class HyperbolicPlane(TargetManifold):
    """Hyperbolic plane in the Poincare disk model, curvature -1."""

    kind = "hyperbolic"
    curvature_sign = -1
    #: points are kept strictly inside this radius
    max_radius = 1.0 - 1e-9

    def __init__(self, dim: int = 2):
        if dim != 2:
            raise ValueError("only the hyperbolic plane (dim=2) is supported")
        self.dim = 2
        self.ambient_dim = 2

    def project(self, q):
        xp = array_namespace(q)
        r = xp.sqrt(_dot(q, q))
        factor = xp.where(r > self.max_radius, self.max_radius / xp.maximum(r, 1e-300), 1.0)
        return q * factor[..., None]

    def tangent_project(self, p, v):
        return v

    def manifold_residual(self, q):
        q = np.asarray(q, dtype=float)
        return np.maximum(np.sqrt(_dot(q, q)) - self.max_radius, 0.0)

    def metric_scale(self, p):
        return 4.0 / (1.0 - _dot(p, p)) ** 2

    def metric_scale_grad(self, p):
        return 16.0 * p / ((1.0 - _dot(p, p)) ** 3)[..., None]

    def log_scale_grad(self, p):
        """Gradient of ``phi = log(2 / (1 - |z|^2))`` (Euclidean)."""
        return 2.0 * p / (1.0 - _dot(p, p))[..., None]

    def connection(self, p, a, b):
        g = self.log_scale_grad(p)
        return _dot(g, a)[..., None] * b + _dot(g, b)[..., None] * a - _dot(a, b)[..., None] * g

    def curvature(self, p, X, Y, Z):
        s = self.metric_scale(p)[..., None]
        return -(s * _dot(Y, Z)[..., None] * X - s * _dot(X, Z)[..., None] * Y)


class EmbeddedCustom(TargetManifold):
    """Embedded submanifold of Euclidean space given by a closest-point projection.

    Parameters
    ----------
    projection : callable
        JAX-traceable map ``R^d -> R^d`` sending nearby points to the
        manifold.  Its Jacobian on the manifold must be the orthogonal tangent
        projector.
    dim : int
        Intrinsic dimension.
    ambient_dim : int
        Dimension ``d`` of the ambient space.
    name : str
        Label used in reports.

    The connection and curvature are derived from the second fundamental
    form ``B(a, b) = (D(dP)(p)[a]) b`` through the Gauss equation.
    """

    kind = "custom"

    def __init__(self, projection, dim: int, ambient_dim: int, name: str = "custom"):
        self._proj = projection
        self.dim = int(dim)
        self.ambient_dim = int(ambient_dim)
        self.name = name
        self._jac = jax.jacfwd(projection)
        self._djac = jax.jacfwd(self._jac)

    def _batched(self, fn, *args):
        args = [jnp.asarray(a) for a in args]
        shape = jnp.broadcast_shapes(*[a.shape[:-1] for a in args])
        flat = [jnp.broadcast_to(a, shape + a.shape[-1:]).reshape(-1, a.shape[-1]) for a in args]
        out = jax.vmap(fn)(*flat)
        return out.reshape(shape + out.shape[1:])

    def _wrap(self, fn, *args):
        xp = array_namespace(*args)
        out = self._batched(fn, *args)
        return np.asarray(out) if xp is np else out

    def project(self, q):
        return self._wrap(self._proj, q)

    def projector(self, p):
        return self._wrap(self._jac, p)

    def tangent_project(self, p, v):
        return self._wrap(lambda pp, vv: self._jac(pp) @ vv, p, v)

    def manifold_residual(self, q):
        q = np.asarray(q, dtype=float)
        return np.linalg.norm(np.asarray(self.project(q)) - q, axis=-1)

    def _sff(self, p, a, b):
        dP = self._djac(p)  # dP[i, j, k] = d P_ij / d p_k
        return jnp.einsum("ijk,k,j->i", dP, a, b)

    def second_fundamental_form(self, p, X, Y):
        return self._wrap(self._sff, p, X, Y)

    def connection(self, p, a, b):
        return self._wrap(lambda pp, aa, bb: -self._sff(pp, aa, bb), p, a, b)

    def covariant_derivative(self, p, dpsi_x, v, dv_x):
        return self.tangent_project(p, dv_x)

    def curvature(self, p, X, Y, Z):
        def one(pp, xx, yy, zz):
            # <R(X,Y)Z, W> = <B(Y,Z), B(X,W)> - <B(X,Z), B(Y,W)>; take W over
            # the projector columns so the result is a tangent vector
            P = self._jac(pp)
            byz = self._sff(pp, yy, zz)
            bxz = self._sff(pp, xx, zz)
            dP = self._djac(pp)
            bx = jnp.einsum("ijk,k->ij", dP, xx) @ P  # columns B(X, P e_j)
            by = jnp.einsum("ijk,k->ij", dP, yy) @ P
            coeff = byz @ bx - bxz @ by
            return P @ coeff

        return self._wrap(one, p, X, Y, Z)

    def tangent_basis(self, p):
        p = np.asarray(p, dtype=float)
        P = np.asarray(self.projector(p)).reshape(-1, self.ambient_dim, self.ambient_dim)
        out = np.empty((P.shape[0], self.dim, self.ambient_dim))
        for i, Pi in enumerate(P):
            u, s, _ = np.linalg.svd(Pi)
            out[i] = u[:, : self.dim].T
        return out.reshape(p.shape[:-1] + (self.dim, self.ambient_dim))

    def describe(self) -> dict:
        return {"kind": self.kind, "dim": self.dim, "name": self.name}


def make_target(kind: str, dim: int = 2) -> TargetManifold:
    """Construct one of the built-in targets from its variant tag."""
    kinds = {"sphere": UnitSphere, "torus": FlatTorus, "hyperbolic": HyperbolicPlane}
    if kind not in kinds:
        raise ValueError(f"unknown target kind {kind!r}; expected one of {sorted(kinds)}")
    return kinds[kind](dim)

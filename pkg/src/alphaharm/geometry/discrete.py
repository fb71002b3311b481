"""Per-face kernels for piecewise linear maps on triangle meshes.

A face with corner images ``U = [u_0, u_1, u_2]`` has parameter differential
``D = [u_1 - u_0, u_2 - u_0] = U C`` (target coordinates) and metric inverse
``G^{-1}``.  The face density is

* sphere: ``x = tr(G^{-1} D^T P D)`` with ``P`` the tangent projector at the
  normalised barycenter image ``n = b / |b|``;
* hyperbolic plane: ``x = s(b) tr(G^{-1} D^T D)`` with the disk metric scale
  ``s`` at the barycenter ``b``;
* flat torus and custom targets: ``x = tr(G^{-1} D^T D)``.

Projecting on the sphere keeps the density intrinsic to first order; it also
makes the energy insensitive (to first order in the mesh size) to rounding
errors normal to the sphere, which matters when energy differences of order
``1e-15`` decide a line search.
"""

from __future__ import annotations

import numpy as np

from .mesh import CORNER_DIFF

__all__ = ["face_differentials", "face_density", "face_density_and_grad", "face_density_change"]


def face_differentials(tgt, corners):
    """``D`` from corner images ``(..., 3, d)`` using wrapped coordinate differences."""
    c0 = corners[..., 0, :]
    return np.stack([tgt.difference(c0, corners[..., 1, :]), tgt.difference(c0, corners[..., 2, :])], axis=-1)


def face_density(tgt, Gi, D, bary):
    """Per-face density ``x`` for differentials ``D (..., d, 2)`` and barycenters ``b (..., d)``."""
    q = np.einsum("...ab,...ia,...ib->...", Gi, D, D)
    if tgt.kind == "sphere":
        n = bary / np.linalg.norm(bary, axis=-1, keepdims=True)
        a = np.einsum("...ia,...i->...a", D, n)
        return q - np.einsum("...ab,...a,...b->...", Gi, a, a)
    if tgt.kind == "hyperbolic":
        return tgt.metric_scale(bary) * q
    return q


def face_density_and_grad(tgt, Gi, D, bary):
    """Density ``x`` (F,) and its derivative with respect to the corner images (F, d, 3)."""
    M = np.einsum("fia,fab,cb->fic", D, Gi, CORNER_DIFF)  # (F, d, 3)
    q = np.einsum("fab,fia,fib->f", Gi, D, D)
    if tgt.kind == "sphere":
        nb = np.linalg.norm(bary, axis=-1)
        n = bary / nb[:, None]
        a = np.einsum("fia,fi->fa", D, n)
        x = q - np.einsum("fab,fa,fb->f", Gi, a, a)
        Sn = np.einsum("fia,fab,fb->fi", D, Gi, a)  # D G^{-1} D^T n
        PM = M - n[:, :, None] * np.einsum("fi,fic->fc", n, M)[:, None, :]
        PSn = Sn - n * np.einsum("fi,fi->f", n, Sn)[:, None]
        grad = 2.0 * PM - (2.0 / (3.0 * nb))[:, None, None] * PSn[:, :, None]
        return x, grad
    if tgt.kind == "hyperbolic":
        s = tgt.metric_scale(bary)
        grad = 2.0 * s[:, None, None] * M + (q / 3.0)[:, None, None] * tgt.metric_scale_grad(bary)[:, :, None]
        return s * q, grad
    return q, 2.0 * M


def face_density_change(tgt, Gi, D_old, bary_old, dD, dbary):
    """``x(D_old + dD, b_old + db) - x(D_old, b_old)`` without cancellation."""
    D_new = D_old + dD
    dq = np.einsum("fab,fia,fib->f", Gi, dD, D_new + D_old)
    if tgt.kind == "sphere":
        b_new = bary_old + dbary
        n_old = bary_old / np.linalg.norm(bary_old, axis=-1, keepdims=True)
        n_new = b_new / np.linalg.norm(b_new, axis=-1, keepdims=True)
        a_old = np.einsum("fia,fi->fa", D_old, n_old)
        a_new = np.einsum("fia,fi->fa", D_new, n_new)
        da = np.einsum("fia,fi->fa", dD, n_new) + np.einsum("fia,fi->fa", D_old, n_new - n_old)
        return dq - np.einsum("fab,fa,fb->f", Gi, da, a_new + a_old)
    if tgt.kind == "hyperbolic":
        b_new = bary_old + dbary
        r_old = 1.0 - (bary_old * bary_old).sum(-1)
        r_new = 1.0 - (b_new * b_new).sum(-1)
        dr2 = (dbary * (b_new + bary_old)).sum(-1)  # |b_new|^2 - |b_old|^2
        ds = 4.0 * dr2 * (r_old + r_new) / (r_old**2 * r_new**2)
        q_old = np.einsum("fab,fia,fib->f", Gi, D_old, D_old)
        return tgt.metric_scale(b_new) * dq + ds * q_old
    return dq

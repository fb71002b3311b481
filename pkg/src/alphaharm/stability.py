"""Second variation of the alpha-energy.

The index form of ``psi`` at variation fields ``v, w`` along ``psi`` is

    I(v, w) = int B <nabla v, d psi> <nabla w, d psi> + F <nabla v, nabla w>
                  - F h(Tr_g R^N(v, d psi) d psi, w)  dV,

with ``F = 2 alpha (1 + |d psi|^2)^(alpha-1)`` and
``B = 4 alpha (alpha-1) (1 + |d psi|^2)^(alpha-2)``.  Analytic maps evaluate
it with exact derivatives; meshes use one barycentric point per face with
the map differential and the field values tangent-projected at the
(normalised) barycenter image.

For sphere targets the tangential parts ``Lambda^T = Lambda - <Lambda, p> p``
of a parallel orthonormal frame of the ambient space give, at an
alpha-harmonic map,

    sum_k I(Lambda_k^T, Lambda_k^T)
        = int 2 alpha (1 + x)^(alpha-2) x ((2 - n) + (2 alpha - n) x) dV,   x = |d psi|^2,

which is negative (so ``psi`` is unstable) whenever ``0 < x < (n-2)/(2 alpha - n)``
everywhere on the support of ``d psi``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.linalg

from ._jax import jax, jnp
from .checks import CheckReport
from .geometry.fields import AnalyticMap, DiscreteVertexMap, MapState, SampledField, VariationField, as_alpha
from .geometry.jets import MapJet
from .geometry.mesh import CORNER_DIFF
from .variational import alpha_energy, tension_norm

__all__ = [
    "index_form",
    "jacobi_apply",
    "IndexFormMatrix",
    "assemble_index_matrix",
    "stability_eigenvalue",
    "fd_second_variation",
    "ParallelFrame",
    "lambda_top",
    "lambda_top_field",
    "verify_lemma73",
    "instability_integrand",
    "instability_sum",
    "instability_certificate",
    "integrand_sign_check",
    "MAX_STABILITY_VERTICES",
]

#: largest mesh for which the dense index matrix is assembled
MAX_STABILITY_VERTICES = 1500


def _weights(x, alpha):
    F = 2.0 * alpha * (1.0 + x) ** (alpha - 1.0)
    B = 4.0 * alpha * (alpha - 1.0) * (1.0 + x) ** (alpha - 2.0)
    return F, B


def _check_field(psi, v):
    if not isinstance(v, VariationField):
        raise TypeError("variation fields must be VariationField instances")
    if v.map is not psi:
        raise ValueError(f"field {v.name!r} is not defined along this map")


# ---------------------------------------------------------------------------
# per-face data for meshes
# ---------------------------------------------------------------------------
@dataclass
class _FaceData:
    p: np.ndarray  # (F, d) projected barycenter images
    Dp: np.ndarray  # (F, d, 2) tangent-projected differentials
    s: np.ndarray  # (F,) metric scale
    x: np.ndarray  # (F,) density
    Gi: np.ndarray  # (F, 2, 2)
    areas: np.ndarray  # (F,)


def _face_data(psi: DiscreteVertexMap) -> _FaceData:
    tgt = psi.target
    p = tgt.project(psi.face_barycenters())
    D = psi.face_differentials()
    Dp = np.swapaxes(tgt.tangent_project(p[:, None, :], np.swapaxes(D, 1, 2)), 1, 2)
    s = tgt.metric_scale(p)
    Gi = psi.domain.face_metric_inverses
    x = s * np.einsum("fab,fia,fib->f", Gi, Dp, Dp)
    return _FaceData(p, Dp, s, x, Gi, psi.domain.face_areas)


def _face_field(tgt, fd: _FaceData, Vc):
    """Covariant derivative (F, ..., d, 2) and barycenter value (F, ..., d) of corner vectors ``Vc (F, ..., 3, d)``."""
    extra = Vc.ndim - 3
    p = fd.p.reshape(fd.p.shape[:1] + (1,) * extra + fd.p.shape[1:])
    Dp = fd.Dp.reshape(fd.Dp.shape[:1] + (1,) * extra + fd.Dp.shape[1:])
    vb = tgt.tangent_project(p, Vc.mean(axis=-2))
    dV = np.einsum("...ci,ca->...ia", Vc, CORNER_DIFF)
    cols = []
    for a in range(2):
        raw = dV[..., a] + tgt.connection(p, Dp[..., a], vb)
        cols.append(tgt.tangent_project(p, raw))
    return np.stack(cols, axis=-1), vb


def _curvature_trace(tgt, fd: _FaceData, vb):
    """``Tr_g R^N(v, d psi) d psi`` per face for barycenter vectors ``vb (F, ..., d)``."""
    extra = vb.ndim - 2
    p = fd.p.reshape(fd.p.shape[:1] + (1,) * extra + fd.p.shape[1:])
    Dp = fd.Dp.reshape(fd.Dp.shape[:1] + (1,) * extra + fd.Dp.shape[1:])
    Gi = fd.Gi.reshape(fd.Gi.shape[:1] + (1,) * extra + (2, 2))
    out = np.zeros_like(vb)
    for i in range(2):
        for j in range(2):
            out = out + Gi[..., i, j, None] * tgt.curvature(p, vb, Dp[..., i], Dp[..., j])
    return out


def _mesh_index_density(psi: DiscreteVertexMap, alpha, v_vals, w_vals):
    fd = _face_data(psi)
    tgt = psi.target
    F, B = _weights(fd.x, alpha)
    nv, vb = _face_field(tgt, fd, v_vals[psi.domain.faces])
    nw, wb = _face_field(tgt, fd, w_vals[psi.domain.faces])
    pv = fd.s * np.einsum("fab,fia,fib->f", fd.Gi, nv, fd.Dp)
    pw = fd.s * np.einsum("fab,fia,fib->f", fd.Gi, nw, fd.Dp)
    grad = fd.s * np.einsum("fab,fia,fib->f", fd.Gi, nv, nw)
    curv = fd.s * np.einsum("fi,fi->f", _curvature_trace(tgt, fd, vb), wb)
    return fd.areas * (B * pv * pw + F * grad - F * curv)


# ---------------------------------------------------------------------------
# index form and Jacobi operator
# ---------------------------------------------------------------------------
def index_form(psi: MapState, a, v: VariationField, w: VariationField) -> float:
    """Second variation ``I(v, w)`` of the alpha-energy at ``psi``."""
    alpha = as_alpha(a)
    _check_field(psi, v)
    _check_field(psi, w)
    if isinstance(psi, DiscreteVertexMap):
        return float(np.sum(_mesh_index_density(psi, alpha, v.values, w.values)))
    if isinstance(psi, AnalyticMap):
        jet = psi.jet()
        fn = lambda u, alpha: jet.index_integrand(u, alpha, v.func, w.func)  # noqa: E731
        vals = psi.evaluate(("index_form", v.func, w.func), fn, alpha)
        return psi.domain.integrate_values(vals)
    raise TypeError(f"unsupported map type {type(psi).__name__}")


def jacobi_apply(psi: MapState, a, v: VariationField) -> SampledField:
    """Jacobi operator ``J_alpha(v)`` at the quadrature nodes, with ``I(v, w) = -int h(J_alpha v, w)``."""
    alpha = as_alpha(a)
    if not isinstance(psi, AnalyticMap):
        raise TypeError("Jacobi operator requires analytic representation")
    _check_field(psi, v)
    jet = psi.jet()
    fn = lambda u, alpha: jet.jacobi(u, alpha, v.func)  # noqa: E731
    return SampledField(psi, psi.evaluate(("jacobi", v.func), fn, alpha), f"J({v.name})")


def jacobi_pairing(psi: AnalyticMap, a, v: VariationField, w: VariationField) -> float:
    """``-int h(J_alpha v, w) dV``, which equals ``I(v, w)`` on closed domains."""
    Jv = jacobi_apply(psi, a, v).sampled()
    return -psi.domain.integrate_values(psi.target.inner(psi.values, Jv, w.sampled()))


# ---------------------------------------------------------------------------
# assembled form
# ---------------------------------------------------------------------------
@dataclass
class IndexFormMatrix:
    """Index form of a mesh map in per-vertex tangent coordinates.

    Coefficient ``c[i*n + r]`` multiplies ``bases[i, r]``, an ``h``-orthonormal
    tangent vector at the image of vertex ``i``.

    Attributes
    ----------
    matrix : ndarray, shape (V n, V n)
    mass : ndarray, shape (V n,)
        Lumped mass (vertex areas; the bases are orthonormal).
    bases : ndarray, shape (V, n, d)
    map : DiscreteVertexMap
    meta : dict
        ``alpha``, a hash of the map and the quadrature rule.
    """

    matrix: np.ndarray
    mass: np.ndarray
    bases: np.ndarray
    map: DiscreteVertexMap
    meta: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def coefficients(self, v: VariationField) -> np.ndarray:
        """Tangent coordinates of a mesh variation field."""
        s = self.map.target.metric_scale(self.map.values)
        return (s[:, None] * np.einsum("vrd,vd->vr", self.bases, v.values)).ravel()

    def to_field(self, c, name="field") -> VariationField:
        vals = np.einsum("vr,vrd->vd", np.asarray(c).reshape(self.bases.shape[:2]), self.bases)
        return VariationField(self.map, values=vals, name=name, check_tangent=False)

    def quadratic(self, c, d=None) -> float:
        c = np.asarray(c, dtype=float)
        d = c if d is None else np.asarray(d, dtype=float)
        return float(c @ self.matrix @ d)

    def write_coordinates(self, path, tol: float = 0.0) -> int:
        """Write ``row col value`` lines for entries with ``|value| > tol``; returns the count."""
        rows, cols = np.nonzero(np.abs(self.matrix) > tol)
        with open(path, "w") as fh:
            fh.write(f"# {self.size} {self.size}\n")
            for r, c in zip(rows, cols):
                fh.write(f"{r} {c} {self.matrix[r, c]:.17g}\n")
        return len(rows)


def _map_hash(psi: DiscreteVertexMap) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(psi.values).tobytes())
    h.update(np.ascontiguousarray(psi.domain.faces).tobytes())
    return h.hexdigest()[:16]


def assemble_index_matrix(psi: DiscreteVertexMap, a) -> IndexFormMatrix:
    """Dense index matrix with ``c^T A d = index_form(v, w)`` for the fields with coefficients ``c, d``."""
    alpha = as_alpha(a)
    if not isinstance(psi, DiscreteVertexMap):
        raise TypeError("index matrices are assembled on mesh maps")
    mesh = psi.domain
    if mesh.n_vertices > MAX_STABILITY_VERTICES:
        raise ValueError(f"stability analysis is limited to {MAX_STABILITY_VERTICES} vertices, got {mesh.n_vertices}")
    tgt = psi.target
    n, d = tgt.dim, tgt.ambient_dim
    bases = tgt.tangent_basis(psi.values)  # (V, n, d)
    fd = _face_data(psi)
    F, B = _weights(fd.x, alpha)
    faces = mesh.faces
    nf = faces.shape[0]
    # one local basis field per (corner, direction): corner values (F, 3n, 3, d)
    Vc = np.zeros((nf, 3, n, 3, d))
    for c in range(3):
        Vc[:, c, :, c, :] = bases[faces[:, c]]
    Vc = Vc.reshape(nf, 3 * n, 3, d)
    nab, vb = _face_field(tgt, fd, Vc)  # (F, 3n, d, 2), (F, 3n, d)
    pair = fd.s[:, None] * np.einsum("fab,fkia,fib->fk", fd.Gi, nab, fd.Dp)
    grad = fd.s[:, None, None] * np.einsum("fab,fkia,flib->fkl", fd.Gi, nab, nab)
    curv = fd.s[:, None, None] * np.einsum("fki,fli->fkl", _curvature_trace(tgt, fd, vb), vb)
    local = B[:, None, None] * pair[:, :, None] * pair[:, None, :] + F[:, None, None] * (grad - curv)
    local = fd.areas[:, None, None] * local
    dof = (faces[:, :, None] * n + np.arange(n)[None, None, :]).reshape(nf, 3 * n)
    A = np.zeros((mesh.n_vertices * n, mesh.n_vertices * n))
    np.add.at(A, (dof[:, :, None], dof[:, None, :]), local)
    A = 0.5 * (A + A.T)
    mass = np.repeat(mesh.vertex_areas, n)
    meta = {
        "alpha": alpha,
        "map_hash": _map_hash(psi),
        "quadrature": "one point per face at the barycenter image",
        "vertices": mesh.n_vertices,
        "tangent_dim": n,
    }
    return IndexFormMatrix(A, mass, bases, psi, meta)


def stability_eigenvalue(matrix: IndexFormMatrix) -> tuple[float, VariationField]:
    """Smallest eigenvalue of ``A x = lambda M x`` and its eigenvector as a field."""
    M = matrix.mass
    if np.any(~np.isfinite(M)) or np.any(M <= 0):
        raise ValueError("mass matrix is not positive definite (degenerate mesh)")
    w, X = scipy.linalg.eigh(matrix.matrix, np.diag(M), subset_by_index=[0, 0])
    return float(w[0]), matrix.to_field(X[:, 0], name="lowest-mode")


# ---------------------------------------------------------------------------
# finite-difference oracle
# ---------------------------------------------------------------------------
def _retracted(target, p, v, t):
    if target.kind == "torus":
        return p + t * v  # lifted coordinates: no wrapping
    return target.project(p + t * v)


def fd_second_variation(psi: MapState, a, v: VariationField, step: float = 1e-3) -> float:
    """Second derivative of ``t -> E_alpha(R(psi + t v))`` at ``t = 0``.

    Central differences at steps ``h`` and ``h/2`` combined by Richardson
    extrapolation.  ``R`` is the target's projection retraction, so the result
    equals ``I(v, v)`` only at critical points: elsewhere it also contains
    ``-int h(tau_alpha, d^2 R / dt^2)``.
    """
    alpha = as_alpha(a)
    _check_field(psi, v)
    if not (step > 1e-6):
        raise ValueError(f"finite-difference step {step!r} underflows (needs > 1e-6)")
    tgt = psi.target
    if isinstance(psi, DiscreteVertexMap):

        def energy(t):
            vals = _retracted(tgt, psi.values, v.values, t)
            return alpha_energy(psi.with_values(vals), alpha)

    elif isinstance(psi, AnalyticMap):
        metric = psi.domain.metric

        def dens(u, t, alpha):
            f = lambda y: _retracted(tgt, psi.func(y), v.func(y), t)  # noqa: E731
            return MapJet(metric, tgt, f).energy_density(u, alpha)

        def energy(t):
            return psi.domain.integrate_values(psi.evaluate(("fd_energy", v.func), dens, t, alpha))

    else:
        raise TypeError(f"unsupported map type {type(psi).__name__}")
    e0 = energy(0.0)

    def second(h):
        return (energy(h) - 2.0 * e0 + energy(-h)) / h**2

    return float((4.0 * second(step / 2) - second(step)) / 3.0)


# ---------------------------------------------------------------------------
# sphere targets: parallel frames
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class ParallelFrame:
    """Orthonormal basis of the ambient space ``R^(n+1)`` of ``S^n`` (rows of ``vectors``)."""

    vectors: np.ndarray

    def __post_init__(self):
        V = np.array(self.vectors, dtype=float)
        if V.ndim != 2 or V.shape[0] != V.shape[1]:
            raise ValueError("a parallel frame needs n+1 vectors in R^(n+1)")
        err = np.max(np.abs(V @ V.T - np.eye(V.shape[0])))
        if err > 1e-12:
            raise ValueError(f"frame vectors are not orthonormal (error {err:.3g})")
        object.__setattr__(self, "vectors", V)

    @classmethod
    def standard(cls, ambient_dim: int) -> "ParallelFrame":
        return cls(np.eye(ambient_dim))

    @classmethod
    def random(cls, ambient_dim: int, seed: int) -> "ParallelFrame":
        rng = np.random.default_rng(seed)
        Q, R = np.linalg.qr(rng.standard_normal((ambient_dim, ambient_dim)))
        return cls((Q * np.sign(np.diag(R))).T)

    def __len__(self):
        return self.vectors.shape[0]

    def __iter__(self):
        return iter(self.vectors)


def lambda_top(lam, p):
    """Tangential part ``Lambda - <Lambda, p> p`` of a constant vector at points ``p`` of the unit sphere."""
    xp = jnp if isinstance(p, jax.Array) else np
    lam = xp.asarray(lam)
    return lam - (p @ lam)[..., None] * p


def _require_sphere(psi):
    if psi.target.kind != "sphere":
        raise ValueError("parallel-frame variations require a sphere target")


def lambda_top_field(psi: MapState, lam) -> VariationField:
    """``Lambda^T`` along ``psi`` as a variation field."""
    _require_sphere(psi)
    lam = np.asarray(lam, dtype=float)
    if isinstance(psi, DiscreteVertexMap):
        return VariationField(psi, values=lambda_top(lam, psi.values), name=f"Lambda^T{lam.tolist()}")
    lam_j = jnp.asarray(lam)
    return VariationField(psi, func=lambda u: lambda_top(lam_j, psi.func(u)), name=f"Lambda^T{lam.tolist()}")


def verify_lemma73(psi: AnalyticMap, frame: ParallelFrame | None = None, tol: float = 1e-10) -> CheckReport:
    """Check the pointwise identities for ``Lambda^T`` along a map into the unit sphere.

    For every node, frame vector ``Lambda`` and coordinate direction ``X``
    (with ``p = psi(u)``):

    1. ``nabla_X Lambda^T = A^{Lambda^perp}(d psi X)`` (shape operator of the sphere);
    2. ``<nabla_X Lambda^T, d psi X> = -|d psi X|^2 <p, Lambda>``;
    3. ``|nabla_X Lambda^T|^2 = |d psi X|^2 <p, Lambda>^2``;
    4. ``<R(Lambda^T, d psi X) d psi X, Lambda^T> = |d psi X|^2 |Lambda^T|^2 - <d psi X, Lambda>^2``.

    Also reports the frame bookkeeping ``sum_k <p, Lambda_k>^2 = 1`` and
    ``sum_k |Lambda_k^T|^2 = n``.  Residuals are ``|lhs - rhs| / (1 + |rhs|)``.
    """
    _require_sphere(psi)
    if not isinstance(psi, AnalyticMap):
        raise TypeError("the pointwise frame identities are checked on analytic maps")
    tgt = psi.target
    frame = frame or ParallelFrame.standard(tgt.ambient_dim)
    if len(frame) != tgt.ambient_dim:
        raise ValueError("frame size does not match the target's ambient dimension")
    jet = psi.jet()

    def items(u, lam):
        p = psi.func(u)
        J = jet.jac(u)  # (d, m): column i is d psi(d_i)
        top_fn = lambda y: lambda_top(lam, psi.func(y))  # noqa: E731
        nab = jet.covariant(u, top_fn)  # (d, m)
        top = top_fn(u)
        perp = (p @ lam) * p
        pl = p @ lam
        res = []
        X2 = jnp.sum(J * J, axis=0)
        # item 1, all components
        shape = tgt.shape_operator(p[None, :], perp[None, :], J.T)  # (m, d)
        res.append(jnp.max(jnp.abs(nab.T - shape) / (1.0 + jnp.abs(shape))))
        lhs2 = jnp.sum(nab * J, axis=0)
        rhs2 = -X2 * pl
        res.append(jnp.max(jnp.abs(lhs2 - rhs2) / (1.0 + jnp.abs(rhs2))))
        lhs3 = jnp.sum(nab * nab, axis=0)
        rhs3 = X2 * pl**2
        res.append(jnp.max(jnp.abs(lhs3 - rhs3) / (1.0 + jnp.abs(rhs3))))
        R = tgt.curvature(p[None, :], jnp.broadcast_to(top, J.T.shape), J.T, J.T)  # (m, d)
        lhs4 = R @ top
        rhs4 = X2 * (top @ top) - (J.T @ lam) ** 2
        res.append(jnp.max(jnp.abs(lhs4 - rhs4) / (1.0 + jnp.abs(rhs4))))
        return jnp.stack(res)

    lams = jnp.asarray(frame.vectors)
    fn = lambda u, lams: jax.vmap(lambda lam: items(u, lam))(lams)  # noqa: E731
    vals = psi.evaluate("lemma73", fn, lams)  # (N, K, 4)
    worst = vals.max(axis=(0, 1))
    p = psi.values
    dots = p @ frame.vectors.T  # (N, K)
    tops = frame.vectors[None, :, :] - dots[..., None] * p[:, None, :]
    book1 = float(np.max(np.abs((dots**2).sum(axis=1) - 1.0)))
    book2 = float(np.max(np.abs((tops**2).sum(axis=(1, 2)) - tgt.dim)))
    residuals = {f"item {i + 1}": float(worst[i]) for i in range(4)}
    residuals["sum <p, Lambda_k>^2 = 1"] = book1
    residuals["sum |Lambda_k^T|^2 = n"] = book2
    return CheckReport(
        "parallel-frame-identities",
        passed=bool(max(residuals.values()) < tol),
        residuals=residuals,
        tolerance=tol,
        details={"map": psi.name, "frame_size": len(frame), "samples": int(p.shape[0])},
    )


# ---------------------------------------------------------------------------
# instability
# ---------------------------------------------------------------------------
def instability_integrand(x, alpha: float, n: int):
    """``2 alpha (1 + x)^(alpha-2) x ((2 - n) + (2 alpha - n) x)``."""
    x = np.asarray(x, dtype=float)
    return 2.0 * alpha * (1.0 + x) ** (alpha - 2.0) * x * ((2 - n) + (2 * alpha - n) * x)


def _displayed_integrand(x, alpha: float, n: int):
    """``C ((2 - n) + (2 alpha - n) x)`` with ``C = 2 alpha (1 + x)^(alpha-1) x``; larger by ``1 + x``."""
    x = np.asarray(x, dtype=float)
    return 2.0 * alpha * (1.0 + x) ** (alpha - 1.0) * x * ((2 - n) + (2 * alpha - n) * x)


def _integrate_density(psi: MapState, vals):
    if isinstance(psi, DiscreteVertexMap):
        return float(np.sum(psi.domain.face_areas * vals))
    return psi.domain.integrate_values(vals)


def instability_sum(psi: MapState, a, frame: ParallelFrame | None = None, tension_tol: float = 1e-6,
                    rtol: float | None = None) -> CheckReport:
    """``sum_k I(Lambda_k^T, Lambda_k^T)`` by the index form and by its closed form.

    Refuses maps whose alpha-tension has L2 norm above ``tension_tol``.
    The report's ``details`` hold the index-form sum (``sum``), the closed
    form, and the closed form with the extra factor ``1 + |d psi|^2``
    (``displayed_form``) for comparison.  Passes when the two evaluations
    agree to ``rtol`` (default ``1e-8`` analytic, ``1e-3`` mesh).
    """
    from .geometry.ops import hs_norm_sq

    alpha = as_alpha(a)
    _require_sphere(psi)
    tn = tension_norm(psi, alpha)
    if not tn < tension_tol:
        raise ValueError(f"map is not alpha-harmonic: tension norm {tn:.3g} exceeds {tension_tol:g}")
    n = psi.target.dim
    if rtol is None:
        rtol = 1e-3 if psi.is_mesh else 1e-8
    frame = frame or ParallelFrame.standard(psi.target.ambient_dim)
    terms = []
    for lam in frame:
        v = lambda_top_field(psi, lam)
        terms.append(index_form(psi, alpha, v, v))
    total = float(np.sum(terms))
    x = np.asarray(hs_norm_sq(psi))
    closed = _integrate_density(psi, instability_integrand(x, alpha, n))
    displayed = _integrate_density(psi, _displayed_integrand(x, alpha, n))
    rel = abs(total - closed) / max(abs(closed), 1e-300) if closed != 0 else abs(total)
    return CheckReport(
        "frame-index-sum",
        passed=bool(rel < rtol),
        residuals={"index form vs closed form": rel},
        tolerance=rtol,
        details={
            "map": psi.name,
            "alpha": alpha,
            "n": n,
            "sum": total,
            "closed_form": closed,
            "displayed_form": displayed,
            "terms": terms,
            "tension_norm": tn,
        },
    )


def instability_bound(alpha: float, n: int) -> float | None:
    """``(n - 2)/(2 alpha - n)``, or ``None`` when ``2 alpha <= n`` makes it vacuous."""
    if 2 * alpha <= n:
        return None
    return (n - 2) / (2 * alpha - n)


def instability_certificate(psi: MapState, a, **kwargs) -> dict:
    """Verdict record for the frame-sum instability test.

    Verdicts: ``"UNSTABLE"`` when the frame sum is negative,
    ``"no certificate"`` otherwise, and ``"hypothesis-vacuous"`` when
    ``2 alpha <= n``.  ``consistent`` is false when the hypothesis
    ``max |d psi|^2 < bound`` holds (with ``d psi`` not identically zero)
    but the sum is not negative.
    """
    from .geometry.ops import hs_norm_sq

    alpha = as_alpha(a)
    _require_sphere(psi)
    n = psi.target.dim
    bound = instability_bound(alpha, n)
    x = np.asarray(hs_norm_sq(psi))
    xmax = float(np.max(x))
    report = instability_sum(psi, alpha, **kwargs)
    total = report.details["sum"]
    nonconstant = xmax > 1e-12
    hyp = bound is not None and nonconstant and xmax < bound
    if bound is None:
        verdict = "hypothesis-vacuous"
    else:
        verdict = "UNSTABLE" if total < 0 else "no certificate"
    return {
        "bound": bound,
        "max_density": xmax,
        "hypothesis_satisfied": bool(hyp),
        "sum": total,
        "closed_form": report.details["closed_form"],
        "displayed_form": report.details["displayed_form"],
        "two_path_agreement": report.residuals["index form vs closed form"],
        "two_path_passed": report.passed,
        "verdict": verdict,
        "consistent": bool((not hyp) or total < 0),
    }


def integrand_sign_check(alpha: float, n: int, samples: int = 1000) -> CheckReport:
    """Sign of the frame-sum integrand against the bound ``(n - 2)/(2 alpha - n)``.

    Checks that the integrand is negative on a grid of ``0 < x < bound``
    and that its bracket ``(2 - n) + (2 alpha - n) x`` vanishes exactly at
    the bound (evaluated in rational arithmetic).  When ``2 alpha <= n`` the
    bound is reported vacuous.
    """
    alpha = as_alpha(alpha)
    bound = instability_bound(alpha, n)
    if bound is None:
        return CheckReport("integrand-sign", True, {}, 0.0,
                           {"alpha": alpha, "n": n, "bound": None, "status": "hypothesis-vacuous"})
    xs = bound * (np.arange(1, samples + 1) / (samples + 1))
    vals = instability_integrand(xs, alpha, n)
    a_q = Fraction(alpha)
    b_q = Fraction(n - 2) / (2 * a_q - n)
    bracket_at_bound = (2 - n) + (2 * a_q - n) * b_q
    beyond = instability_integrand(np.array([bound * 1.01, bound * 2]), alpha, n)
    passed = bool(np.all(vals < 0) and bracket_at_bound >= 0 and np.all(beyond > 0)) if n > 2 else bool(
        bracket_at_bound >= 0)
    return CheckReport(
        "integrand-sign",
        passed=passed,
        residuals={"max integrand below bound": float(vals.max()) if vals.size else 0.0},
        tolerance=0.0,
        details={
            "alpha": alpha,
            "n": n,
            "bound": bound,
            "bracket_at_bound": float(bracket_at_bound),
            "negative_below_bound": bool(np.all(vals < 0)),
            "positive_above_bound": bool(np.all(beyond > 0)),
            "status": "ok",
        },
    )

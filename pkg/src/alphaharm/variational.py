"""The alpha-energy, tension fields, finite-difference oracles and gradient flow.

Conventions
-----------
``E_alpha(psi) = int (1 + |d psi|^2)^alpha dV``.  Its first variation along a
section ``v`` is ``-int h(tau_alpha, v) dV`` with
``tau_alpha = F tau + d psi(grad F)`` and ``F = 2 alpha (1 + |d psi|^2)^(alpha-1)``.

On meshes the energy is ``sum_f A_f (1 + x_f)^alpha`` with the per-face
density ``x_f`` of :func:`alphaharm.geometry.ops.hs_norm_sq`.  Discrete
tension fields are negative lumped-mass-normalised Riemannian gradients:
``tau_i = -(1 / (m_i s_i)) P_i dE/dpsi_i`` where ``m_i`` is the vertex area,
``s_i`` the target metric scale and ``P_i`` the tangent projector.  For the
classical tension the energy is the Dirichlet energy ``1/2 int |d psi|^2``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .geometry.fields import AnalyticMap, DiscreteVertexMap, MapState, SampledField, VariationField, as_alpha
from .geometry.discrete import face_density, face_density_and_grad, face_density_change, face_differentials
from .geometry.mesh import CORNER_DIFF
from .geometry.ops import hs_norm_sq

__all__ = [
    "alpha_energy",
    "dirichlet_energy",
    "tension_field",
    "alpha_tension_field",
    "tension_norm",
    "fd_energy_gradient",
    "FlowOptions",
    "FlowReport",
    "minimize_alpha_energy",
]


# ---------------------------------------------------------------------------
# energies
# ---------------------------------------------------------------------------
def alpha_energy(psi: MapState, a) -> float:
    """``E_alpha(psi) = int (1 + |d psi|^2)^alpha dV``."""
    alpha = as_alpha(a)
    if isinstance(psi, DiscreteVertexMap):
        x = hs_norm_sq(psi)
        return float(np.sum(psi.domain.face_areas * (1.0 + x) ** alpha))
    if isinstance(psi, AnalyticMap):
        dens = psi.evaluate("energy_density", psi.jet().energy_density, alpha)
        return psi.domain.integrate_values(dens)
    raise TypeError(f"unsupported map type {type(psi).__name__}")


def dirichlet_energy(psi: MapState) -> float:
    """Classical energy ``1/2 int |d psi|^2 dV``."""
    x = hs_norm_sq(psi)
    if isinstance(psi, DiscreteVertexMap):
        return float(0.5 * np.sum(psi.domain.face_areas * x))
    return 0.5 * psi.domain.integrate_values(x)


# ---------------------------------------------------------------------------
# mesh gradients
# ---------------------------------------------------------------------------
def _mesh_energy_gradient(psi: DiscreteVertexMap, dphi) -> np.ndarray:
    """Euclidean gradient of ``sum_f A_f phi(x_f)`` with respect to the vertex values.

    ``dphi`` maps the face densities to ``phi'(x_f)``.
    """
    mesh, tgt = psi.domain, psi.target
    x, dx = face_density_and_grad(tgt, mesh.face_metric_inverses, psi.face_differentials(), psi.face_barycenters())
    w = mesh.face_areas * dphi(x)
    corner = w[:, None, None] * dx
    V, d = mesh.n_vertices, tgt.ambient_dim
    grad = np.zeros((V, d))
    for c in range(3):
        idx = mesh.faces[:, c]
        for i in range(d):
            grad[:, i] += np.bincount(idx, weights=corner[:, i, c], minlength=V)
    return grad


def _mesh_tension_from_gradient(psi: DiscreteVertexMap, grad: np.ndarray) -> np.ndarray:
    p = psi.values
    denom = psi.domain.vertex_areas * psi.target.metric_scale(p)
    return -psi.target.tangent_project(p, grad) / denom[:, None]


def _analytic_field(psi: AnalyticMap, key, fn, *args) -> SampledField:
    return SampledField(psi, psi.evaluate(key, fn, *args), key)


def tension_field(psi: MapState):
    """Tension field ``tau = Tr_g nabla d psi``.

    Returns a :class:`VariationField` on meshes and a sampled field (with a
    ``values`` array at the quadrature nodes) on analytic maps.
    """
    if isinstance(psi, DiscreteVertexMap):
        grad = _mesh_energy_gradient(psi, lambda x: np.full_like(x, 0.5))
        tau = _mesh_tension_from_gradient(psi, grad)
        return VariationField(psi, values=tau, name="tension", check_tangent=False)
    if isinstance(psi, AnalyticMap):
        return _analytic_field(psi, "tension", psi.jet().tension)
    raise TypeError(f"unsupported map type {type(psi).__name__}")


def alpha_tension_field(psi: MapState, a):
    """``tau_alpha = F tau + d psi(grad F)`` with ``F = 2 alpha (1 + |d psi|^2)^(alpha-1)``."""
    alpha = as_alpha(a)
    if isinstance(psi, DiscreteVertexMap):
        grad = _mesh_energy_gradient(psi, lambda x: alpha * (1.0 + x) ** (alpha - 1.0))
        tau = _mesh_tension_from_gradient(psi, grad)
        return VariationField(psi, values=tau, name="alpha-tension", check_tangent=False)
    if isinstance(psi, AnalyticMap):
        return _analytic_field(psi, "alpha_tension", psi.jet().alpha_tension, alpha)
    raise TypeError(f"unsupported map type {type(psi).__name__}")


def tension_norm(psi: MapState, a=None) -> float:
    """L2 norm of ``tau_alpha`` (or of ``tau`` when ``a`` is None) over the domain."""
    tau = tension_field(psi) if a is None else alpha_tension_field(psi, a)
    vals = tau.sampled()
    sq = psi.target.inner(psi.values, vals, vals)
    if isinstance(psi, DiscreteVertexMap):
        return float(np.sqrt(np.sum(psi.domain.vertex_areas * sq)))
    return float(np.sqrt(psi.domain.integrate_values(sq)))


# ---------------------------------------------------------------------------
# finite-difference oracle
# ---------------------------------------------------------------------------
def fd_energy_gradient(psi: DiscreteVertexMap, a, step: float = 1e-6) -> np.ndarray:
    """Central-difference Riemannian gradient of ``E_alpha`` per vertex.

    Each vertex is moved along an ``h``-orthonormal tangent basis by
    ``+-step`` and retracted to the target; the energy change is evaluated on
    the faces incident to that vertex (the rest of the energy is unchanged).
    The raw result satisfies ``fd_i ~ -m_i tau_alpha,i`` with ``m_i`` the
    lumped vertex area.

    Returns
    -------
    ndarray, shape (V, d)
    """
    alpha = as_alpha(a)
    if not isinstance(psi, DiscreteVertexMap):
        raise TypeError("fd_energy_gradient needs a mesh map")
    if not step > 0:
        raise ValueError("step must be positive")
    scale = np.max(np.abs(psi.values)) + 1.0
    if step < 64 * np.finfo(float).eps * scale:
        raise ValueError(f"step {step:g} is too small: perturbations underflow relative to coordinates of size {scale:g}")
    mesh, tgt = psi.domain, psi.target
    basis = tgt.tangent_basis(psi.values)  # (V, n, d)
    F, n = mesh.n_faces, tgt.dim
    corners = psi.corner_values  # (F, 3, d)
    Gi = mesh.face_metric_inverses
    A = mesh.face_areas

    def face_energy(c):
        D = face_differentials(tgt, c)
        bary = c[:, 0, :] + (D[..., 0] + D[..., 1]) / 3.0
        return (1.0 + face_density(tgt, Gi, D, bary)) ** alpha

    grad = np.zeros_like(psi.values)
    for c in range(3):
        vid = mesh.faces[:, c]
        b = basis[vid]  # (F, n, d)
        diffs = np.empty((F, n))
        for k in range(n):
            vals = []
            for sgn in (1.0, -1.0):
                moved = tgt.retract(corners[:, c], sgn * step * b[:, k])
                cc = corners.copy()
                cc[:, c] = moved
                vals.append(face_energy(cc))
            diffs[:, k] = A * (vals[0] - vals[1]) / (2.0 * step)
        contrib = np.einsum("fk,fkd->fd", diffs, b)
        for i in range(tgt.ambient_dim):
            grad[:, i] += np.bincount(vid, weights=contrib[:, i], minlength=mesh.n_vertices)
    return grad


# ---------------------------------------------------------------------------
# gradient flow
# ---------------------------------------------------------------------------
@dataclass
class FlowOptions:
    """Options of :func:`minimize_alpha_energy`.

    ``method`` is ``"lbfgs"`` (limited-memory quasi-Newton steps, the
    default) or ``"gd"`` (steepest descent).  ``metric`` selects the inner
    product that turns the energy differential into a gradient: ``"l2"`` uses
    the lumped mass matrix (the steepest-descent direction is ``tau_alpha``
    itself), ``"h1"`` uses ``c K + M`` with the cotangent stiffness ``K``
    scaled by the mean face weight ``c`` of the initial map.  The Sobolev
    metric removes the ``1/h^2`` stiffness of the mass metric so the iteration
    count does not grow under refinement; for L-BFGS it is the initial inverse
    Hessian.

    ``step_growth`` multiplies the last accepted step before the next
    steepest-descent line search; L-BFGS line searches start from ``t = 1``.
    """

    max_iters: int = 5000
    tension_tol: float = 1e-6
    initial_step: float = 1.0
    armijo: float = 1e-4
    backtrack: float = 0.5
    max_backtracks: int = 60
    step_growth: float = 2.0
    max_step: float = 1e3
    metric: str = "h1"
    method: str = "lbfgs"
    memory: int = 10

    def __post_init__(self):
        if self.metric not in ("l2", "h1"):
            raise ValueError("metric must be 'l2' or 'h1'")
        if self.method not in ("lbfgs", "gd"):
            raise ValueError("method must be 'lbfgs' or 'gd'")
        if self.memory < 1:
            raise ValueError("L-BFGS memory must be at least 1")
        if not self.tension_tol > 0:
            raise ValueError("tension tolerance must be positive")
        if not self.initial_step > 0:
            raise ValueError("initial step must be positive")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtrack factor must lie in (0, 1)")
        if not 0 < self.armijo < 1:
            raise ValueError("Armijo constant must lie in (0, 1)")
        if self.max_iters < 0:
            raise ValueError("max_iters must be non-negative")


@dataclass
class FlowReport:
    """Summary of a gradient-flow run.

    ``energies`` starts with the initial energy and has one entry per accepted
    step; it is accumulated from cancellation-free energy differences, each of
    which is negative, so the sequence never increases.
    """

    iterations: int
    energies: list
    tension_norms: list
    steps: list
    final_tension_norm: float
    reason: str
    alpha: float
    classical: bool
    elapsed: float = 0.0
    final_energy_direct: float = float("nan")
    extra: dict = field(default_factory=dict)

    def to_dict(self, include_timing: bool = True) -> dict:
        out = {
            "iterations": self.iterations,
            "energies": list(self.energies),
            "tension_norms": list(self.tension_norms),
            "steps": list(self.steps),
            "final_tension_norm": self.final_tension_norm,
            "final_energy_direct": self.final_energy_direct,
            "reason": self.reason,
            "alpha": self.alpha,
            "classical": self.classical,
        }
        if include_timing:
            out["elapsed_seconds"] = self.elapsed
        return out


def _energy_change(psi: DiscreteVertexMap, displacement: np.ndarray, alpha: float, x_old: np.ndarray) -> float:
    """``E(psi + displacement) - E(psi)`` computed from differences to avoid cancellation."""
    mesh, tgt = psi.domain, psi.target
    delta = displacement[mesh.faces]  # (F, 3, d)
    dD = np.einsum("fci,ca->fia", delta, CORNER_DIFF)
    dx = face_density_change(
        tgt, mesh.face_metric_inverses, psi.face_differentials(), psi.face_barycenters(), dD, delta.mean(axis=1)
    )
    base = 1.0 + x_old
    de = base**alpha * np.expm1(alpha * np.log1p(dx / base))
    return float(np.sum(mesh.face_areas * de))


def _stiffness_matrix(mesh):
    from scipy import sparse

    K = mesh.stiffness_blocks
    rows = np.repeat(mesh.faces, 3, axis=1).ravel()
    cols = np.tile(mesh.faces, (1, 3)).ravel()
    return sparse.csc_matrix((K.ravel(), (rows, cols)), shape=(mesh.n_vertices,) * 2)


class _LBFGSMemory:
    """Curvature pairs for the two-loop recursion, kept tangent to the current map."""

    def __init__(self, size):
        self.size = size
        self.pairs: list = []

    def clear(self):
        self.pairs = []

    def apply(self, q, precond):
        alphas = []
        for s, y, rho in reversed(self.pairs):
            a = rho * np.sum(s * q)
            alphas.append(a)
            q = q - a * y
        z = precond(q)
        for (s, y, rho), a in zip(self.pairs, reversed(alphas)):
            z = z + (a - rho * np.sum(y * z)) * s
        return z

    def update(self, project, s, y):
        self.pairs = [(project(a), project(b), 0.0) for a, b, _ in self.pairs]
        self.pairs = [(a, b, 1.0 / sy) for a, b, _ in self.pairs if (sy := np.sum(a * b)) > 1e-30]
        s, y = project(s), project(y)
        sy = float(np.sum(s * y))
        if sy > 1e-30:
            self.pairs.append((s, y, 1.0 / sy))
            if len(self.pairs) > self.size:
                self.pairs.pop(0)


def minimize_alpha_energy(initial: DiscreteVertexMap, a, opts: FlowOptions | None = None, callback=None):
    """Minimise ``E_alpha`` over mesh maps by retracted descent with Armijo backtracking.

    The energy differential at the vertices is ``g = -M s tau_alpha`` (lumped
    mass ``M``, target metric scale ``s``).  The search direction is
    ``-H g`` projected to the target tangent spaces, with ``H`` the inverse of
    the chosen metric (steepest descent) or its L-BFGS update.  A trial map
    ``R(psi + t d)`` is accepted when ``E(new) <= E(old) + c t <g, d>``, where
    the energy difference is computed without cancellation, so the recorded
    energies never increase.  The flow stops once the L2 norm of
    ``tau_alpha`` is below the tolerance.

    Returns
    -------
    (DiscreteVertexMap, FlowReport)
    """
    from scipy import sparse
    from scipy.sparse.linalg import splu

    alpha = as_alpha(a)
    opts = opts or FlowOptions()
    if not isinstance(initial, DiscreteVertexMap):
        raise TypeError("the gradient flow runs on mesh maps")
    start = time.perf_counter()
    psi = initial.with_values(initial.target.project(initial.values)) if initial.validate else initial
    tgt = psi.target
    mesh = psi.domain
    mass = mesh.vertex_areas

    if opts.metric == "h1":
        x0 = hs_norm_sq(psi)
        c = float(np.sum(mesh.face_areas * 2 * alpha * (1 + x0) ** (alpha - 1)) / mesh.total_area)
        lu = splu((c * _stiffness_matrix(mesh) + sparse.diags(mass)).tocsc())
        precond = lu.solve
    else:
        def precond(q):
            return q / mass[:, None]

    def state(m):
        tau = alpha_tension_field(m, alpha).values
        g = -(mass * tgt.metric_scale(m.values))[:, None] * tau
        return g, float(np.sqrt(-np.sum(g * tau)))

    memory = _LBFGSMemory(opts.memory) if opts.method == "lbfgs" else None
    energy = alpha_energy(psi, alpha)
    g, norm = state(psi)
    energies, norms, steps = [energy], [norm], []
    t_gd = opts.initial_step
    resets = 0
    reason = "max-iters"
    it = 0
    while True:
        if norm < opts.tension_tol:
            reason = "tension-below-tol"
            break
        if it >= opts.max_iters:
            reason = "max-iters"
            break
        if memory is not None:
            d = tgt.tangent_project(psi.values, memory.apply(-g, precond))
            slope = -float(np.sum(g * d))
            if not slope > 0:
                memory.clear()
                resets += 1
                d = tgt.tangent_project(psi.values, precond(-g))
                slope = -float(np.sum(g * d))
            t = 1.0
        else:
            d = tgt.tangent_project(psi.values, precond(-g))
            slope = -float(np.sum(g * d))
            t = t_gd
        x_old = hs_norm_sq(psi)
        accepted = False
        for _ in range(opts.max_backtracks):
            trial, delta = tgt.retract_with_displacement(psi.values, t * d)
            dE = _energy_change(psi, delta, alpha, x_old)
            if dE <= -opts.armijo * t * slope and dE < 0:
                accepted = True
                break
            t *= opts.backtrack
        if not accepted:
            reason = "line-search-failure"
            break
        new = psi.with_values(trial)
        g_new, norm = state(new)
        if memory is not None:
            memory.update(lambda v: tgt.tangent_project(new.values, v), delta, g_new - g)
        else:
            t_gd = min(t * opts.step_growth, opts.max_step)
        psi, g = new, g_new
        energy += dE
        it += 1
        energies.append(energy)
        norms.append(norm)
        steps.append(t)
        if callback is not None:
            callback(it, psi, energy, norm)
    report = FlowReport(
        iterations=it,
        energies=energies,
        tension_norms=norms,
        steps=steps,
        final_tension_norm=norm,
        reason=reason,
        alpha=alpha,
        classical=alpha == 1.0,
        elapsed=time.perf_counter() - start,
        final_energy_direct=alpha_energy(psi, alpha),
        extra={"metric": opts.metric, "method": opts.method, "direction_resets": resets},
    )
    return psi, report

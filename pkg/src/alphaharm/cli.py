"""Batch experiment runner.

Usage::

    alphaharm --config experiment.toml [--out report.json] [--reproducible] [--verbose]

The configuration is a TOML file::

    command = "energy"          # see COMMANDS
    alpha = [1.5, 2.0]          # a number or a list, each >= 1
    seed = 0                    # required when the input is randomised
    output = "report.json"      # optional, overridden by --out
    series = "series.csv"       # optional CSV series (flow, stability)
    matrix_output = "A.txt"     # optional index matrix export (stability)

    [domain]                    # icosphere | torus-grid | square-grid | file | analytic
    kind = "icosphere"
    subdivisions = 4

    [target]                    # sphere | torus | hyperbolic
    kind = "sphere"
    dim = 2

    [map]                       # mesh: identity | constant | linear; analytic: name + params
    kind = "identity"
    perturbation = 0.0

    [solver]                    # gradient-flow options, plus fd_step, flow, eigenvalues
    [tolerances]                # named overrides, see DEFAULT_TOLERANCES

Exit status: 0 when every asserted check passes, 1 when a check fails
(the failing checks are named on stderr), 2 for configuration errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import tomli

from . import __version__
from .report import SCHEMA_VERSION, dumps, strip_timings, write_series

log = logging.getLogger("alphaharm")

COMMANDS = (
    "energy",
    "flow",
    "gradcheck",
    "conformal-check",
    "hong-check",
    "tensor-check",
    "fiber-check",
    "stability",
    "sphere-instability",
    "lemma73",
)
MESH_COMMANDS = {"flow", "gradcheck", "stability"}
ANALYTIC_COMMANDS = {"conformal-check", "hong-check", "tensor-check", "fiber-check", "lemma73"}

DEFAULT_TOLERANCES = {
    "residual": 1e-8,  # identity residuals on analytic maps
    "gradient": 1e-3,  # relative L2 error of the finite-difference gradient
    "energy_rtol": 5e-3,  # relative error against energy_expected
    "eigenvalue": 1e-8,  # lowest eigenvalue floor for non-positively curved targets
    "balance": 1e-6,  # fibre balance residual
    "two_path": None,  # frame-sum agreement (default 1e-8 analytic, 1e-3 mesh)
    "tension": 1e-6,  # L2 tension norm accepted as alpha-harmonic
    "energy_expected": None,  # optional reference energy (number or list per alpha)
}

_TOP_KEYS = {"command", "seed", "alpha", "output", "series", "matrix_output", "domain", "target", "map", "solver",
             "tolerances"}
_DOMAIN_KEYS = {
    "icosphere": {"subdivisions", "radius"},
    "torus-grid": {"n", "m"},
    "square-grid": {"n"},
    "file": {"path"},
    "analytic": set(),
}
_TARGET_KEYS = {"kind", "dim"}
_MESH_MAP_KEYS = {"kind", "point", "matrix", "perturbation"}
_ANALYTIC_MAP_KEYS = {"name", "params"}
_SOLVER_EXTRA = {"fd_step", "flow", "eigenvalues"}


class ConfigError(ValueError):
    """Invalid experiment configuration (exit status 2)."""


@dataclass
class ExperimentConfig:
    """Validated experiment description."""

    command: str
    alphas: list
    domain: dict
    target: dict
    map: dict
    solver: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    seed: int | None = None
    output: str | None = None
    series: str | None = None
    matrix_output: str | None = None

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("output")
        d.pop("series")
        d.pop("matrix_output")
        return d

    @property
    def is_analytic(self) -> bool:
        return self.domain["kind"] == "analytic"

    def tol(self, key):
        return self.tolerances[key]


def _reject_unknown(section: str, got: dict, allowed: set):
    extra = sorted(set(got) - set(allowed))
    if extra:
        raise ConfigError(f"unknown key(s) in {section}: {', '.join(extra)}")


def _table(raw, key) -> dict:
    val = raw.get(key, {})
    if not isinstance(val, dict):
        raise ConfigError(f"[{key}] must be a table")
    return dict(val)


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a TOML configuration string."""
    from .variational import FlowOptions

    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"config is not valid TOML: {exc}") from None
    _reject_unknown("the top level", raw, _TOP_KEYS)
    command = raw.get("command")
    if command not in COMMANDS:
        raise ConfigError(f"command must be one of {', '.join(COMMANDS)}; got {command!r}")
    alpha = raw.get("alpha", 2.0)
    alphas = alpha if isinstance(alpha, list) else [alpha]
    if not alphas:
        raise ConfigError("alpha list is empty")
    for a in alphas:
        if isinstance(a, bool) or not isinstance(a, (int, float)) or not np.isfinite(a) or a < 1:
            raise ConfigError(f"alpha values must be numbers >= 1, got {a!r}")
    alphas = [float(a) for a in alphas]
    seed = raw.get("seed")
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int)):
        raise ConfigError("seed must be an integer")

    domain = _table(raw, "domain")
    kind = domain.get("kind")
    if kind not in _DOMAIN_KEYS:
        raise ConfigError(f"domain kind must be one of {', '.join(_DOMAIN_KEYS)}; got {kind!r}")
    _reject_unknown("[domain]", domain, _DOMAIN_KEYS[kind] | {"kind"})
    target = _table(raw, "target")
    _reject_unknown("[target]", target, _TARGET_KEYS)
    mp = _table(raw, "map")
    if kind == "analytic":
        _reject_unknown("[map]", mp, _ANALYTIC_MAP_KEYS)
        if "name" not in mp:
            raise ConfigError("analytic domains need [map] name = <catalog map>")
        if not isinstance(mp.get("params", {}), dict):
            raise ConfigError("[map] params must be a table")
        if command in MESH_COMMANDS:
            raise ConfigError(f"command {command!r} needs a mesh domain")
    else:
        if command in ANALYTIC_COMMANDS:
            raise ConfigError(f"command {command!r} needs an analytic domain")
        if "kind" not in target:
            raise ConfigError("mesh domains need [target] kind")
        _reject_unknown("[map]", mp, _MESH_MAP_KEYS)
        mp.setdefault("kind", "identity")
        pert = mp.get("perturbation", 0.0)
        if not isinstance(pert, (int, float)) or pert < 0:
            raise ConfigError("perturbation must be a non-negative number")
        if pert > 0 and seed is None:
            raise ConfigError("a seed is required for randomised inputs (map perturbation > 0)")

    solver = _table(raw, "solver")
    flow_fields = {f.name for f in dataclasses.fields(FlowOptions)}
    _reject_unknown("[solver]", solver, flow_fields | _SOLVER_EXTRA)
    tolerances = _table(raw, "tolerances")
    _reject_unknown("[tolerances]", tolerances, set(DEFAULT_TOLERANCES))
    tolerances = {**DEFAULT_TOLERANCES, **tolerances}
    for key in ("output", "series", "matrix_output"):
        if key in raw and not isinstance(raw[key], str):
            raise ConfigError(f"{key} must be a path string")
    return ExperimentConfig(command, alphas, domain, target, mp, solver, tolerances, seed, raw.get("output"),
                            raw.get("series"), raw.get("matrix_output"))


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)


# ---------------------------------------------------------------------------
# building inputs
# ---------------------------------------------------------------------------
def _build_target(spec: dict):
    from .geometry.targets import make_target

    try:
        return make_target(spec["kind"], int(spec.get("dim", 2)))
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"invalid target: {exc}") from None


def _build_mesh(spec: dict):
    from .geometry.mesh import icosphere, square_grid, torus_grid
    from .geometry.meshio import read_mesh

    kind = spec["kind"]
    try:
        if kind == "icosphere":
            return icosphere(int(spec.get("subdivisions", 3)), float(spec.get("radius", 1.0)))
        if kind == "torus-grid":
            return torus_grid(int(spec.get("n", 16)), spec.get("m"))
        if kind == "square-grid":
            return square_grid(int(spec.get("n", 16)))
        return read_mesh(spec["path"])
    except KeyError as exc:
        raise ConfigError(f"[domain] is missing {exc}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read mesh: {exc}") from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def build_map(cfg: ExperimentConfig):
    """Map described by the configuration."""
    from . import catalog
    from .geometry.fields import DiscreteVertexMap

    if cfg.is_analytic:
        try:
            psi = catalog.build(cfg.map["name"], **cfg.map.get("params", {}))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"cannot build analytic map: {exc}") from None
        if cfg.target:
            kind, dim = cfg.target.get("kind", psi.target.kind), cfg.target.get("dim", psi.target.dim)
            if kind != psi.target.kind or dim != psi.target.dim:
                raise ConfigError(f"map {psi.name!r} has target {psi.target.kind}/{psi.target.dim}, "
                                  f"config says {kind}/{dim}")
        return psi
    mesh = _build_mesh(cfg.domain)
    tgt = _build_target(cfg.target)
    kind = cfg.map["kind"]
    V, d = mesh.n_vertices, tgt.ambient_dim
    try:
        if kind == "constant":
            point = np.asarray(cfg.map.get("point", tgt.project(np.eye(d)[-1]) if tgt.kind == "sphere"
                                           else np.full(d, 0.1)), dtype=float)
            vals = np.tile(tgt.project(point), (V, 1))
        elif kind == "identity":
            pos = mesh.vertices
            if pos.shape[1] > d:
                raise ConfigError(f"mesh embedding dimension {pos.shape[1]} exceeds target coordinates {d}")
            vals = np.zeros((V, d))
            vals[:, : pos.shape[1]] = pos
            vals = tgt.project(vals)
        elif kind == "linear":
            if tgt.kind != "torus":
                raise ConfigError("linear maps need a torus target")
            A = np.asarray(cfg.map.get("matrix", np.eye(d, mesh.vertices.shape[1])), dtype=float)
            if A.shape != (d, mesh.vertices.shape[1]):
                raise ConfigError(f"matrix must have shape ({d}, {mesh.vertices.shape[1]})")
            vals = tgt.project(mesh.vertices @ A.T)
        else:
            raise ConfigError(f"mesh map kind must be identity, constant or linear; got {kind!r}")
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"cannot build map: {exc}") from None
    pert = float(cfg.map.get("perturbation", 0.0))
    if pert > 0:
        rng = np.random.default_rng(cfg.seed)
        noise = tgt.tangent_project(vals, pert * rng.standard_normal(vals.shape))
        vals = tgt.retract(vals, noise)
    return DiscreteVertexMap(mesh, tgt, vals, name=f"{kind}-{mesh.name}")


def _flow_options(cfg):
    from .variational import FlowOptions

    opts = {k: v for k, v in cfg.solver.items() if k not in _SOLVER_EXTRA}
    try:
        return FlowOptions(**opts)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid solver options: {exc}") from None


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------
class _Run:
    """Collects results, asserted checks and series for one experiment."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.results: list = []
        self.checks: list = []
        self.series: tuple | None = None

    def check(self, name: str, passed: bool, **info):
        self.checks.append({"name": name, "passed": bool(passed), **info})
        log.info("check %s: %s", name, "pass" if passed else "FAIL")


def _expected(cfg, i):
    e = cfg.tol("energy_expected")
    if isinstance(e, list):
        return e[i] if i < len(e) else None
    return e


def _cmd_energy(run: _Run, psi):
    from .variational import alpha_energy, dirichlet_energy

    for i, a in enumerate(run.cfg.alphas):
        e = alpha_energy(psi, a)
        row = {"alpha": a, "energy": e, "dirichlet_energy": dirichlet_energy(psi)}
        exp = _expected(run.cfg, i)
        if exp is not None:
            rel = abs(e - exp) / abs(exp)
            row.update(expected=exp, relative_error=rel)
            run.check(f"energy(alpha={a:g})", rel < run.cfg.tol("energy_rtol"), relative_error=rel)
        run.results.append(row)


def _cmd_flow(run: _Run, psi):
    from .variational import minimize_alpha_energy

    opts = _flow_options(run.cfg)
    rows = []
    for a in run.cfg.alphas:
        _, rep = minimize_alpha_energy(psi, a, opts)
        d = rep.to_dict()
        monotone = bool(np.all(np.diff(rep.energies) <= 0))
        converged = rep.final_tension_norm < opts.tension_tol
        d.update(monotone=monotone, converged=converged)
        exp = _expected(run.cfg, len(run.results))
        if exp is not None:
            rel = abs(rep.final_energy_direct - exp) / abs(exp)
            d.update(expected=exp, relative_error=rel)
            run.check(f"flow-energy(alpha={a:g})", rel < run.cfg.tol("energy_rtol"), relative_error=rel)
        run.results.append(d)
        run.check(f"flow-converged(alpha={a:g})", converged, final_tension_norm=rep.final_tension_norm)
        run.check(f"flow-monotone(alpha={a:g})", monotone)
        for it, (e, t) in enumerate(zip(rep.energies, rep.tension_norms)):
            rows.append([a, it, e, t])
    run.series = (["alpha", "iteration", "energy", "tension_norm"], rows)


def gradient_check(psi, a, step: float = 1e-6) -> float:
    """Relative L2 error between the mass-normalised finite-difference gradient and ``-tau_alpha``."""
    from .variational import alpha_tension_field, fd_energy_gradient

    fd = fd_energy_gradient(psi, a, step)
    tau = alpha_tension_field(psi, a).values
    m = psi.domain.vertex_areas
    p = psi.values
    diff = fd / m[:, None] + tau
    num = np.sum(m * psi.target.inner(p, diff, diff))
    den = np.sum(m * psi.target.inner(p, tau, tau))
    return float(np.sqrt(num / den))


def _cmd_gradcheck(run: _Run, psi):
    step = float(run.cfg.solver.get("fd_step", 1e-6))
    for a in run.cfg.alphas:
        err = gradient_check(psi, a, step)
        run.results.append({"alpha": a, "relative_l2_error": err, "step": step})
        run.check(f"gradient(alpha={a:g})", err < run.cfg.tol("gradient"), relative_l2_error=err)


def _report_check(run: _Run, rep, label):
    run.results.append(rep.to_dict())
    run.check(label, rep.passed, residuals=rep.residuals)


def _cmd_conformal(run: _Run, psi):
    from .conformal import verify_prop23

    for a in run.cfg.alphas:
        _report_check(run, verify_prop23(psi, a, run.cfg.tol("residual")), f"conformal-equivalence(alpha={a:g})")


def _cmd_hong(run: _Run, psi):
    from .conformal import build_alpha_harmonic_metric

    tol = run.cfg.tol("residual")
    for a in run.cfg.alphas:
        _, rep = build_alpha_harmonic_metric(psi, a, harmonic_tol=tol, tol=tol)
        _report_check(run, rep, f"alpha-harmonic-metric(alpha={a:g})")


def _cmd_tensor(run: _Run, psi):
    from . import catalog
    from .tensors import stress_energy_trace, verify_prop42

    m = psi.domain.dim
    fields = catalog.coordinate_fields(m)[:3] + [catalog.frame_field(m)]
    for a in run.cfg.alphas:
        _report_check(run, verify_prop42(psi, a, fields, run.cfg.tol("residual")), f"stress-divergence(alpha={a:g})")
        tr, closed = stress_energy_trace(psi, a)
        rel = float(np.max(np.abs(tr - closed) / (1.0 + np.abs(closed))))
        run.results.append({"alpha": a, "trace_identity_residual": rel})
        run.check(f"stress-trace(alpha={a:g})", rel < 1e-12, residual=rel)


def _cmd_fiber(run: _Run, psi):
    from .tensors import SubmersionTestMap, check_minimal_fibers, horizontal_mean_curvature

    sub = SubmersionTestMap(psi)
    g = psi.domain.metric_values
    hb = horizontal_mean_curvature(sub, "frame") - horizontal_mean_curvature(sub, "gradient")
    two_path = float(np.max(np.sqrt(np.einsum("nij,ni,nj->n", g, hb, hb))))
    run.results.append({"horizontal_mean_curvature_two_path": two_path,
                        "dilation_range": [float(sub.dilation_sq.min()), float(sub.dilation_sq.max())]})
    run.check("horizontal-mean-curvature", two_path < run.cfg.tol("residual"), residual=two_path)
    for a in run.cfg.alphas:
        rep = check_minimal_fibers(sub, a, tension_tol=run.cfg.tol("residual"), tol=run.cfg.tol("balance"))
        _report_check(run, rep, f"minimal-fibres(alpha={a:g})")


def _maybe_flow(run: _Run, psi, a):
    from .variational import minimize_alpha_energy

    if psi.is_mesh and run.cfg.solver.get("flow", False):
        psi, rep = minimize_alpha_energy(psi, a, _flow_options(run.cfg))
        return psi, rep.to_dict()
    return psi, None


def _cmd_stability(run: _Run, psi0):
    import scipy.linalg

    from .stability import assemble_index_matrix
    from .variational import tension_norm

    k = int(run.cfg.solver.get("eigenvalues", 6))
    rows = []
    for a in run.cfg.alphas:
        psi, flow = _maybe_flow(run, psi0, a)
        M = assemble_index_matrix(psi, a)
        if np.any(M.mass <= 0):
            raise ValueError("mass matrix is not positive definite (degenerate mesh)")
        k_eff = min(k, M.size)
        w = scipy.linalg.eigh(M.matrix, np.diag(M.mass), eigvals_only=True, subset_by_index=[0, k_eff - 1])
        tn = tension_norm(psi, a)
        lam = float(w[0])
        res = {"alpha": a, "eigenvalues": w.tolist(), "lambda_min": lam, "tension_norm": tn, "meta": M.meta,
               "verdict": "discretely stable" if lam >= -run.cfg.tol("eigenvalue") else "discretely unstable"}
        if flow is not None:
            res["flow"] = flow
        run.results.append(res)
        rows += [[a, i, float(v)] for i, v in enumerate(w)]
        if psi.target.curvature_sign is not None and psi.target.curvature_sign <= 0:
            harmonic = tn < run.cfg.tol("tension")
            run.check(f"alpha-harmonic(alpha={a:g})", harmonic, tension_norm=tn)
            run.check(f"non-positive-curvature-stability(alpha={a:g})", lam >= -run.cfg.tol("eigenvalue"),
                      lambda_min=lam)
        if run.cfg.matrix_output:
            M.write_coordinates(run.cfg.matrix_output)
    run.series = (["alpha", "index", "eigenvalue"], rows)


def _cmd_sphere_instability(run: _Run, psi0):
    from .stability import instability_certificate, integrand_sign_check

    for a in run.cfg.alphas:
        psi, flow = _maybe_flow(run, psi0, a)
        cert = instability_certificate(psi, a, tension_tol=run.cfg.tol("tension"), rtol=run.cfg.tol("two_path"))
        sign = integrand_sign_check(a, psi.target.dim)
        res = {"alpha": a, "map": psi.name, **cert, "integrand_sign": sign.to_dict()}
        if flow is not None:
            res["flow"] = flow
        run.results.append(res)
        run.check(f"frame-sum-two-path(alpha={a:g})", cert["two_path_passed"], agreement=cert["two_path_agreement"])
        run.check(f"certificate-consistency(alpha={a:g})", cert["consistent"])
        run.check(f"integrand-sign(alpha={a:g})", sign.passed)


def _cmd_lemma73(run: _Run, psi):
    from .stability import ParallelFrame, verify_lemma73

    frames = [("standard", ParallelFrame.standard(psi.target.ambient_dim))]
    if run.cfg.seed is not None:
        frames.append((f"random(seed={run.cfg.seed})", ParallelFrame.random(psi.target.ambient_dim, run.cfg.seed)))
    for label, frame in frames:
        rep = verify_lemma73(psi, frame, tol=1e-10)
        rep.details["frame"] = label
        _report_check(run, rep, f"frame-identities({label})")


_DISPATCH = {
    "energy": _cmd_energy,
    "flow": _cmd_flow,
    "gradcheck": _cmd_gradcheck,
    "conformal-check": _cmd_conformal,
    "hong-check": _cmd_hong,
    "tensor-check": _cmd_tensor,
    "fiber-check": _cmd_fiber,
    "stability": _cmd_stability,
    "sphere-instability": _cmd_sphere_instability,
    "lemma73": _cmd_lemma73,
}


def run(cfg: ExperimentConfig, reproducible: bool = False) -> tuple[dict, tuple | None]:
    """Execute an experiment; returns the report and an optional CSV series ``(header, rows)``."""
    t0 = time.perf_counter()
    psi = build_map(cfg)
    state = _Run(cfg)
    error = None
    try:
        _DISPATCH[cfg.command](state, psi)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        error = str(exc)
        state.check(cfg.command, False, error=error)
    report = {
        "schema": SCHEMA_VERSION,
        "version": __version__,
        "command": cfg.command,
        "config": cfg.to_dict(),
        "map": {"name": psi.name, "domain": getattr(psi.domain, "name", ""), "target": psi.target.describe()},
        "results": state.results,
        "checks": state.checks,
        "passed": all(c["passed"] for c in state.checks),
        "timings": {"elapsed_seconds": time.perf_counter() - t0},
    }
    if error is not None:
        report["error"] = error
    if reproducible:
        report = strip_timings(report)
    return report, state.series


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="alphaharm", description="Run an alpha-energy experiment from a config file.")
    parser.add_argument("--config", required=True, help="TOML experiment file")
    parser.add_argument("--out", help="JSON report path (default: config 'output', else stdout)")
    parser.add_argument("--reproducible", action="store_true", help="omit timings so reports are byte-identical")
    parser.add_argument("--verbose", action="store_true", help="log progress to stderr")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        report, series = run(cfg, reproducible=args.reproducible)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = args.out or cfg.output
    text = dumps(report)
    if out:
        Path(out).write_text(text)
        log.info("wrote %s", out)
    else:
        sys.stdout.write(text)
    if series is not None:
        spath = cfg.series or (str(Path(out).with_suffix(".csv")) if out else None)
        if spath:
            write_series(spath, *series)
    failed = [c["name"] for c in report["checks"] if not c["passed"]]
    if failed:
        print(f"failed checks: {', '.join(failed)}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

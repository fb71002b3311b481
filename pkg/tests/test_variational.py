import numpy as np
import pytest

from alphaharm import catalog
from alphaharm.cli import gradient_check
from alphaharm.geometry import DiscreteVertexMap, FlatTorus, UnitSphere, VariationField, icosphere, torus_grid
from alphaharm.variational import (
    FlowOptions,
    alpha_energy,
    alpha_tension_field,
    dirichlet_energy,
    fd_energy_gradient,
    minimize_alpha_energy,
    tension_field,
    tension_norm,
)

from conftest import perturbed


def test_constant_map_energy_is_volume(ico3):
    psi = DiscreteVertexMap(ico3, UnitSphere(2), np.tile([0, 0, 1.0], (ico3.n_vertices, 1)))
    assert alpha_energy(psi, 3) == pytest.approx(ico3.total_area, rel=1e-14)
    assert dirichlet_energy(psi) == 0.0
    assert tension_norm(psi, 2) == 0.0


def test_analytic_identity_energies(identity_s2, identity_s3):
    assert alpha_energy(identity_s2, 2) == pytest.approx(36 * np.pi, rel=1e-10)
    assert alpha_energy(identity_s3, 1.5) == pytest.approx(16 * np.pi**2, rel=1e-8)
    assert dirichlet_energy(identity_s2) == pytest.approx(4 * np.pi, rel=1e-10)


def test_alpha_one_is_affine_in_dirichlet(mesh_identity_s2):
    # E_1 = Vol + 2 E_Dirichlet
    psi = mesh_identity_s2
    assert alpha_energy(psi, 1) == pytest.approx(psi.domain.total_area + 2 * dirichlet_energy(psi), rel=1e-13)


def test_alpha_rejects_values_below_one(mesh_identity_s2):
    with pytest.raises(ValueError, match="alpha must be"):
        alpha_energy(mesh_identity_s2, 0.5)


def test_analytic_tension_two_paths(latitude_stretch):
    jet = latitude_stretch.jet()
    a = latitude_stretch.evaluate("alpha_tension", jet.alpha_tension, 2.0)
    b = latitude_stretch.evaluate("alpha_tension_div", jet.alpha_tension_divergence, 2.0)
    assert np.max(np.abs(a - b)) < 1e-10 * (1 + np.max(np.abs(a)))
    assert np.max(np.abs(a)) > 0.1  # the map is not alpha-harmonic


def test_identity_is_alpha_harmonic(identity_s2):
    for a in (1.0, 1.5, 3.0):
        assert tension_norm(identity_s2, a) < 1e-12


@pytest.mark.parametrize("alpha", [1.5, 2.0, 3.0])
def test_fd_gradient_matches_tension(perturbed_maps, alpha):
    for psi in perturbed_maps:
        assert gradient_check(psi, alpha) < 1e-3


def test_fd_gradient_step_underflow(mesh_identity_s2):
    with pytest.raises(ValueError, match="too small"):
        fd_energy_gradient(mesh_identity_s2, 2, step=1e-18)


def test_mesh_tension_is_tangent(perturbed_maps):
    psi = perturbed_maps[0]
    tau = alpha_tension_field(psi, 2).values
    assert np.max(np.abs(np.einsum("vi,vi->v", tau, psi.values))) < 1e-12


def test_flow_sphere_monotone_and_converges(ico3):
    psi0 = perturbed(ico3, UnitSphere(2), ico3.vertices, 0.15, 4)
    psi, rep = minimize_alpha_energy(psi0, 2.0, FlowOptions(tension_tol=1e-7))
    assert rep.reason == "tension-below-tol"
    assert np.all(np.diff(rep.energies) <= 0)
    assert rep.final_tension_norm < 1e-7
    # discrete minimiser sits close to the continuum value 36 pi
    assert rep.final_energy_direct == pytest.approx(36 * np.pi, rel=1e-2)
    assert rep.energies[-1] == pytest.approx(rep.final_energy_direct, rel=1e-12)


def test_flow_gradient_descent_method(torus16):
    psi0 = perturbed(torus16, FlatTorus(2), torus16.vertices.copy(), 0.1, 5)
    _, rep = minimize_alpha_energy(psi0, 1.5, FlowOptions(method="gd", tension_tol=1e-6, max_iters=4000))
    assert rep.final_tension_norm < 1e-6
    assert rep.final_energy_direct == pytest.approx((1 + 2) ** 1.5 * 4 * np.pi**2, rel=1e-10)


def test_flow_options_validation():
    with pytest.raises(ValueError):
        FlowOptions(metric="sobolev")
    with pytest.raises(ValueError):
        FlowOptions(method="newton")


def test_classical_tension_of_equator(identity_s2):
    tau = tension_field(catalog.equator_circle()).sampled()
    assert np.max(np.abs(tau)) < 1e-12

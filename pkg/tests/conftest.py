"""Shared, session-scoped test maps (analytic maps cache their compiled kernels)."""

import numpy as np
import pytest

from alphaharm import catalog
from alphaharm.geometry import DiscreteVertexMap, FlatTorus, HyperbolicPlane, UnitSphere, icosphere, torus_grid


@pytest.fixture(scope="session")
def identity_s2():
    return catalog.sphere_identity(2)


@pytest.fixture(scope="session")
def identity_s3():
    return catalog.sphere_identity(3, n=12)


@pytest.fixture(scope="session")
def latitude_stretch():
    return catalog.latitude_stretch()


@pytest.fixture(scope="session")
def latitude_rotation():
    return catalog.latitude_rotation(n=8)


@pytest.fixture(scope="session")
def torus_shear():
    return catalog.torus_shear()


@pytest.fixture(scope="session")
def hopf():
    return catalog.hopf_map(8)


@pytest.fixture(scope="session")
def ico3():
    return icosphere(3)


@pytest.fixture(scope="session")
def mesh_identity_s2(ico3):
    return DiscreteVertexMap(ico3, UnitSphere(2), ico3.vertices, name="identity")


@pytest.fixture(scope="session")
def torus16():
    return torus_grid(16)


def perturbed(mesh, target, values, eps, seed):
    """Seeded tangent perturbation of a mesh map, retracted to the target."""
    rng = np.random.default_rng(seed)
    noise = target.tangent_project(values, eps * rng.standard_normal(values.shape))
    return DiscreteVertexMap(mesh, target, target.retract(values, noise))


@pytest.fixture(scope="session")
def perturbed_maps(ico3, torus16):
    """Three non-critical mesh maps into the sphere, torus and hyperbolic plane."""
    s2 = perturbed(ico3, UnitSphere(2), ico3.vertices, 0.1, 0)
    t2 = perturbed(torus16, FlatTorus(2), torus16.vertices.copy(), 0.2, 1)
    ball = 0.4 * ico3.vertices[:, :2]
    h2 = perturbed(ico3, HyperbolicPlane(), ball, 0.05, 2)
    return [s2, t2, h2]


#: one "PASS/FAIL criterion k: ..." line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES: dict = {}


def record(number: int, passed: bool, summary: str) -> None:
    """Record and print the verdict line for acceptance criterion ``number``."""
    line = f"{'PASS' if passed else 'FAIL'} criterion {number:2d}: {summary}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])

"""Domains, targets, maps and pointwise geometric operations."""

from .analytic import AnalyticDomain, Chart, circle, flat_torus, sphere2, sphere3, tensor_rule, unit_square
from .fields import (
    AlphaParameter,
    AnalyticMap,
    DiscreteVertexMap,
    MapState,
    SampledField,
    SymmetricTensorField,
    VariationField,
    as_alpha,
)
from .jets import MapJet, christoffel
from .mesh import DomainMesh, icosphere, square_grid, torus_grid
from .meshio import MeshParseError, read_mesh, read_obj, read_off, write_obj, write_off
from .ops import curvature, differential, grad_scalar, hs_norm_sq, integrate
from .targets import EmbeddedCustom, FlatTorus, HyperbolicPlane, TargetManifold, UnitSphere, make_target

__all__ = [
    "AnalyticDomain", "Chart", "circle", "flat_torus", "sphere2", "sphere3", "tensor_rule", "unit_square",
    "AlphaParameter", "AnalyticMap", "DiscreteVertexMap", "MapState", "SampledField", "SymmetricTensorField",
    "VariationField", "as_alpha", "MapJet", "christoffel", "DomainMesh", "icosphere", "square_grid",
    "torus_grid", "MeshParseError", "read_mesh", "read_obj", "read_off", "write_obj", "write_off",
    "curvature", "differential", "grad_scalar", "hs_norm_sq", "integrate", "EmbeddedCustom", "FlatTorus",
    "HyperbolicPlane", "TargetManifold", "UnitSphere", "make_target",
]

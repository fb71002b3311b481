"""Alpha-energy of maps between Riemannian manifolds.

Discrete and analytic tools for the energy ``E_alpha(psi) = int (1 + |d psi|^2)^alpha``,
its tension field, conformal reductions to harmonic maps, the stress-energy
tensor, horizontally conformal submersions and second-variation stability.
"""

__version__ = "0.1.0"

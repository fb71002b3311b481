"""Shared JAX import with double precision enabled.

Every module that differentiates analytic maps imports ``jax`` and ``jnp``
from here so that 64-bit mode is switched on before any array is created.
"""

import jax

jax.config.update("jax_enable_x64", True)

import jax.numpy as jnp  # noqa: E402

__all__ = ["jax", "jnp", "array_namespace"]


def array_namespace(*arrays):
    """Return ``jnp`` if any argument is a JAX array or tracer, else ``numpy``."""
    import numpy as np

    for a in arrays:
        if isinstance(a, jax.Array):
            return jnp
    return np

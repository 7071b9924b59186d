"""Guiding vector field assembly on an implicit manifold.

The desired path is the zero set of p = m - k - 1 surface functions
restricted to the manifold.  The field is the sum of a propagation term
(orthogonal to every constraint gradient and every projected surface
gradient, built from alternating cofactors) and a convergence term
(gain-weighted descent on the squared surface errors).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, NamedTuple

import numpy as np

from .manifold import ConstraintSystem

__all__ = [
    "SurfaceStack",
    "FieldBreakdown",
    "riemannian_gradients",
    "orthogonal_term",
    "convergence_term",
    "field_value",
    "field_components",
    "lyapunov",
    "lyapunov_decay",
    "validate_dimensions",
]

ScalarFn = Callable[[np.ndarray], np.ndarray]
VectorFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class SurfaceStack:
    """Surface functions cutting the path out of the manifold.

    surfaces[i] maps (..., m) -> (...,), gradients[i] maps
    (..., m) -> (..., m) (ambient gradients; projection onto the tangent
    space happens at evaluation time).  gains are the positive weights
    of the convergence term.  propagation_sign flips the travel
    direction along the path.
    """

    surfaces: tuple[ScalarFn, ...]
    gradients: tuple[VectorFn, ...]
    gains: np.ndarray
    propagation_sign: int = 1
    values_fused: Callable[[np.ndarray], np.ndarray] | None = None
    gradients_fused: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self) -> None:
        if len(self.surfaces) != len(self.gradients):
            raise ValueError(
                f"{len(self.surfaces)} surfaces vs {len(self.gradients)} gradients"
            )
        gains = np.atleast_1d(np.asarray(self.gains, dtype=float))
        if gains.shape != (len(self.surfaces),):
            raise ValueError(f"gains shape {gains.shape} != ({len(self.surfaces)},)")
        if np.any(gains <= 0):
            raise ValueError(f"gains must be positive, got {gains}")
        if self.propagation_sign not in (1, -1):
            raise ValueError(f"propagation_sign must be +1 or -1, got {self.propagation_sign}")
        object.__setattr__(self, "gains", gains)

    @property
    def n_surfaces(self) -> int:
        return len(self.surfaces)

    def errors(self, x: np.ndarray) -> np.ndarray:
        """Stacked surface values phi_i(x), shape (..., p)."""
        x = np.asarray(x, dtype=float)
        if self.values_fused is not None:
            return self.values_fused(x)
        return np.stack([s(x) for s in self.surfaces], axis=-1)

    def ambient_gradients(self, x: np.ndarray) -> np.ndarray:
        """Unprojected gradients, shape (..., p, m)."""
        x = np.asarray(x, dtype=float)
        if self.gradients_fused is not None:
            return self.gradients_fused(x)
        return np.stack([g(x) for g in self.gradients], axis=-2)


class FieldBreakdown(NamedTuple):
    chi: np.ndarray          # (..., m) full field
    orthogonal: np.ndarray   # (..., m) propagation part
    convergence: np.ndarray  # (..., m) error descent part (already negated in chi)
    errors: np.ndarray       # (..., p) surface values
    gradients: np.ndarray    # (..., p, m) projected surface gradients


def validate_dimensions(constraints: ConstraintSystem, surfaces: SurfaceStack) -> None:
    m, k, p = constraints.ambient_dim, constraints.k, surfaces.n_surfaces
    if p != m - k - 1:
        raise ValueError(
            f"need m - k - 1 = {m - k - 1} surface functions for a 1D path, got {p}"
        )
    if p < 1:
        raise ValueError(f"ambient dim {m} with {k} constraints leaves no path codimension")


def riemannian_gradients(
    constraints: ConstraintSystem, surfaces: SurfaceStack, x: np.ndarray
) -> np.ndarray:
    """Project every ambient surface gradient onto ker J, shape (..., p, m)."""
    grads = surfaces.ambient_gradients(x)
    if constraints.k == 0:
        return grads
    J = constraints.jacobian(x)
    gram = J @ np.swapaxes(J, -1, -2)
    # least squares normal components for all p gradients in one solve
    rhs = np.einsum("...km,...pm->...kp", J, grads)
    y = np.linalg.solve(gram, rhs)
    return grads - np.einsum("...km,...kp->...pm", J, y)


@lru_cache(maxsize=None)
def _minor_row_index(m: int) -> np.ndarray:
    """Row indices keeping all but one row, shape (m, m - 1)."""
    keep = np.empty((m, m - 1), dtype=np.intp)
    for r in range(m):
        keep[r] = [i for i in range(m) if i != r]
    return keep


@lru_cache(maxsize=None)
def _cofactor_signs(m: int) -> np.ndarray:
    # component i (1-based) carries (-1)^(i + m)
    return np.array([(-1.0) ** (r + 1 + m) for r in range(m)])


def orthogonal_term(
    constraints: ConstraintSystem,
    surfaces: SurfaceStack,
    x: np.ndarray,
    projected_gradients: np.ndarray | None = None,
) -> np.ndarray:
    """Propagation direction from alternating cofactors, shape (..., m).

    Builds the (m, m-1) matrix whose columns are the k constraint
    gradients followed by the p projected surface gradients, then takes
    the signed determinants of the row-dropped minors.  The result is
    orthogonal to every column by construction.
    """
    x = np.asarray(x, dtype=float)
    m = constraints.ambient_dim
    if projected_gradients is None:
        projected_gradients = riemannian_gradients(constraints, surfaces, x)
    if constraints.k:
        J = constraints.jacobian(x)
        cols = np.concatenate(
            [np.swapaxes(J, -1, -2), np.swapaxes(projected_gradients, -1, -2)], axis=-1
        )
    else:
        cols = np.swapaxes(projected_gradients, -1, -2)
    minors = cols[..., _minor_row_index(m), :]          # (..., m, m-1, m-1)
    comps = _cofactor_signs(m) * np.linalg.det(minors)  # one batched det call
    return surfaces.propagation_sign * comps


def convergence_term(
    surfaces: SurfaceStack,
    errors: np.ndarray,
    projected_gradients: np.ndarray,
) -> np.ndarray:
    """sum_i gain_i * phi_i * grad phi_i, shape (..., m)."""
    weighted = surfaces.gains * errors
    return np.einsum("...p,...pm->...m", weighted, projected_gradients)


def field_components(
    constraints: ConstraintSystem, surfaces: SurfaceStack, x: np.ndarray
) -> FieldBreakdown:
    """Full field chi = orthogonal - convergence with its ingredients."""
    x = np.asarray(x, dtype=float)
    errors = surfaces.errors(x)
    grads = riemannian_gradients(constraints, surfaces, x)
    orth = orthogonal_term(constraints, surfaces, x, projected_gradients=grads)
    conv = convergence_term(surfaces, errors, grads)
    return FieldBreakdown(orth - conv, orth, conv, errors, grads)


def field_value(
    constraints: ConstraintSystem, surfaces: SurfaceStack, x: np.ndarray
) -> np.ndarray:
    """Just chi(x), shape (..., m)."""
    return field_components(constraints, surfaces, x).chi


def lyapunov(surfaces: SurfaceStack, errors: np.ndarray) -> np.ndarray:
    """V = sum_i gain_i * phi_i^2, shape (...)."""
    return np.einsum("...p,...p->...", surfaces.gains * errors, errors)


def lyapunov_decay(
    constraints: ConstraintSystem, surfaces: SurfaceStack, x: np.ndarray
) -> np.ndarray:
    """Exact dV/dt along the field: -2 || convergence term ||^2.

    Follows from phi_i being constant along the propagation part and
    from the projected gradients absorbing the constraint directions.
    """
    parts = field_components(constraints, surfaces, x)
    conv = parts.convergence
    return -2.0 * np.einsum("...m,...m->...", conv, conv)

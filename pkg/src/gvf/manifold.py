"""Implicit manifolds F(x) = a, their tangent projectors, and retraction.

The workspace is the regular level set M = F^{-1}(a) of k constraint
functions on R^m (k = 0 means the whole ambient space).  Everything here
is batched: state arrays have shape (..., m) and all operations map over
the leading axes.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "ConstraintSystem",
    "RankDeficient",
    "RetractionDiverged",
    "ON_MANIFOLD_TOL",
    "MAX_NEWTON_ITERS",
    "RANK_TOL",
]

ON_MANIFOLD_TOL = 1e-10
MAX_NEWTON_ITERS = 50
RANK_TOL = 1e-8


class RankDeficient(RuntimeError):
    """The constraint Jacobian lost row rank at the evaluation point."""


class RetractionDiverged(RuntimeError):
    """Gauss-Newton pullback onto the manifold failed to converge."""


ScalarFn = Callable[[np.ndarray], np.ndarray]
VectorFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class ConstraintSystem:
    """k constraint functions, their gradients, and the regular value a.

    functions[j] maps (..., m) -> (...,); gradients[j] maps
    (..., m) -> (..., m).  Fused evaluators can be supplied to avoid
    per-function Python overhead on hot paths; when omitted they are
    assembled from the per-function tuples.
    """

    ambient_dim: int
    functions: tuple[ScalarFn, ...]
    gradients: tuple[VectorFn, ...]
    target: np.ndarray
    values_fused: Callable[[np.ndarray], np.ndarray] | None = None
    jacobian_fused: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self) -> None:
        if len(self.functions) != len(self.gradients):
            raise ValueError(
                f"{len(self.functions)} functions vs {len(self.gradients)} gradients"
            )
        tgt = np.atleast_1d(np.asarray(self.target, dtype=float))
        if tgt.shape != (len(self.functions),):
            raise ValueError(f"target shape {tgt.shape} != ({len(self.functions)},)")
        object.__setattr__(self, "target", tgt)

    @property
    def k(self) -> int:
        return len(self.functions)

    @classmethod
    def unconstrained(cls, ambient_dim: int) -> "ConstraintSystem":
        return cls(ambient_dim, (), (), np.zeros(0))

    def values(self, x: np.ndarray) -> np.ndarray:
        """Stacked constraint values, shape (..., k)."""
        x = np.asarray(x, dtype=float)
        if self.k == 0:
            return np.zeros(x.shape[:-1] + (0,))
        if self.values_fused is not None:
            return self.values_fused(x)
        return np.stack([f(x) for f in self.functions], axis=-1)

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        """Constraint Jacobian rows, shape (..., k, m)."""
        x = np.asarray(x, dtype=float)
        if self.k == 0:
            return np.zeros(x.shape[:-1] + (0, self.ambient_dim))
        if self.jacobian_fused is not None:
            return self.jacobian_fused(x)
        return np.stack([g(x) for g in self.gradients], axis=-2)

    def residual(self, x: np.ndarray) -> np.ndarray:
        """Max-norm constraint violation, shape (...)."""
        x = np.asarray(x, dtype=float)
        if self.k == 0:
            return np.zeros(x.shape[:-1])
        return np.max(np.abs(self.values(x) - self.target), axis=-1)

    def tangent_project(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Orthogonal projection of v onto ker J(x), shape (..., m).

        Uses the Gram system J J^T y = J v and subtracts J^T y, which is
        the least squares removal of the normal component.
        """
        v = np.asarray(v, dtype=float)
        if self.k == 0:
            return np.array(v, copy=True)
        J = self.jacobian(x)
        gram = J @ np.swapaxes(J, -1, -2)
        rhs = np.einsum("...km,...m->...k", J, v)
        y = np.linalg.solve(gram, rhs[..., None])[..., 0]
        return v - np.einsum("...km,...k->...m", J, y)

    def singular_values(self, x: np.ndarray) -> np.ndarray:
        """Singular values of J(x), shape (..., k), descending."""
        if self.k == 0:
            raise ValueError("no constraints, Jacobian is empty")
        return np.linalg.svd(self.jacobian(x), compute_uv=False)

    def regularity_margin(self, x: np.ndarray) -> np.ndarray:
        """Smallest singular value of J(x); +inf when k = 0."""
        x = np.asarray(x, dtype=float)
        if self.k == 0:
            return np.full(x.shape[:-1], np.inf)
        return self.singular_values(x)[..., -1]

    def retract(self, x: np.ndarray) -> np.ndarray:
        """Pull x back onto F(x) = a by Gauss-Newton least squares.

        Iterates x <- x - J^T (J J^T)^{-1} (F(x) - a) until the residual
        max-norm drops below ON_MANIFOLD_TOL.  Raises RankDeficient if
        the Jacobian is (numerically) row rank deficient at the starting
        point, RetractionDiverged on iteration exhaustion or non-finite
        values.
        """
        x = np.array(np.asarray(x, dtype=float), copy=True)
        if self.k == 0:
            return x
        for it in range(MAX_NEWTON_ITERS):
            vals = self.values(x) - self.target
            res = np.max(np.abs(vals), axis=-1)
            if not np.all(np.isfinite(res)):
                raise RetractionDiverged("non-finite constraint values during retraction")
            active = res > ON_MANIFOLD_TOL
            if not np.any(active):
                return x
            J = self.jacobian(x)
            if it == 0:
                sv = np.linalg.svd(J, compute_uv=False)
                floor = RANK_TOL * np.maximum(1.0, sv[..., 0])
                bad = sv[..., -1] < floor
                if np.any(bad):
                    worst = float(np.min(sv[..., -1]))
                    raise RankDeficient(
                        f"constraint Jacobian rank deficient at {int(np.sum(bad))} "
                        f"point(s), smallest singular value {worst:.3e}"
                    )
            gram = J @ np.swapaxes(J, -1, -2)
            y = np.linalg.solve(gram, vals[..., None])[..., 0]
            step = np.einsum("...km,...k->...m", J, y)
            x = x - np.where(active[..., None], step, 0.0)
            if not np.all(np.isfinite(x)):
                raise RetractionDiverged("retraction produced non-finite coordinates")
        res = np.max(np.abs(self.values(x) - self.target), axis=-1)
        raise RetractionDiverged(
            f"no convergence in {MAX_NEWTON_ITERS} iterations, "
            f"worst residual {float(np.max(res)):.3e}"
        )

    def is_on_manifold(self, x: np.ndarray, tol: float = ON_MANIFOLD_TOL) -> np.ndarray:
        return self.residual(x) <= tol

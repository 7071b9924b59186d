"""Sparse multivariate polynomials with precomputed partial derivatives.

Most built-in scenarios (and every user-supplied one) describe their
constraint and surface functions as polynomials in the ambient
coordinates.  Keeping them in sparse term form gives exact analytic
gradients without symbolic machinery at call time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = ["Polynomial"]


@dataclass(frozen=True)
class Polynomial:
    """A polynomial sum(coeff * prod(x_j ** e_j)) over ambient coordinates.

    terms holds (coefficient, exponents) pairs where exponents is one
    integer per ambient coordinate.  All terms must agree on the number
    of variables.
    """

    terms: tuple[tuple[float, tuple[int, ...]], ...]

    def __post_init__(self) -> None:
        if not self.terms:
            raise ValueError("polynomial needs at least one term (use a zero constant)")
        dims = {len(exps) for _, exps in self.terms}
        if len(dims) != 1:
            raise ValueError(f"inconsistent term dimensions: {sorted(dims)}")

    @property
    def nvars(self) -> int:
        return len(self.terms[0][1])

    @classmethod
    def constant(cls, value: float, nvars: int) -> "Polynomial":
        return cls(((float(value), (0,) * nvars),))

    @classmethod
    def coordinate(cls, index: int, nvars: int) -> "Polynomial":
        exps = [0] * nvars
        exps[index] = 1
        return cls(((1.0, tuple(exps)),))

    def __call__(self, x: np.ndarray) -> np.ndarray:
        """Evaluate at x with shape (..., nvars); returns shape (...)."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.nvars:
            raise ValueError(f"expected last axis {self.nvars}, got {x.shape[-1]}")
        out = np.zeros(x.shape[:-1])
        for coeff, exps in self.terms:
            term = np.full(x.shape[:-1], coeff)
            for j, e in enumerate(exps):
                if e == 1:
                    term = term * x[..., j]
                elif e > 1:
                    term = term * x[..., j] ** e
            out += term
        return out

    @cached_property
    def partials(self) -> tuple["Polynomial", ...]:
        """One differentiated polynomial per variable."""
        out = []
        for j in range(self.nvars):
            terms = []
            for coeff, exps in self.terms:
                e = exps[j]
                if e == 0:
                    continue
                new = list(exps)
                new[j] = e - 1
                terms.append((coeff * e, tuple(new)))
            if not terms:
                terms.append((0.0, (0,) * self.nvars))
            out.append(Polynomial(tuple(terms)))
        return tuple(out)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        """Analytic gradient at x, shape (..., nvars)."""
        x = np.asarray(x, dtype=float)
        return np.stack([p(x) for p in self.partials], axis=-1)

    def __repr__(self) -> str:
        bits = []
        for coeff, exps in self.terms:
            mono = "*".join(f"x{j}^{e}" for j, e in enumerate(exps) if e)
            bits.append(f"{coeff:g}{'*' + mono if mono else ''}")
        return "Poly(" + " + ".join(bits) + ")"

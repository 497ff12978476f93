"""Generalized Haar bases orthonormal in L2(sigma).

Basis functions are sigma-step functions on the equal-measure dyadic
tree of a bounded working domain, so every inner product reduces to a
finite sum of cell masses and orthonormality is exact by construction.
The truncation index is N = 2**depth; the tail of a Karhunen-Loeve
expansion over this basis is exactly the Parseval residual.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError
from .measure import MeasurableSet, MeasureSpace, Partition
from .quadrature import integrate_interval


@dataclass(frozen=True)
class BasisFunction:
    """A sigma-step function: constant coefficients on disjoint cells."""

    index: int
    support_cells: tuple[tuple[MeasurableSet, float], ...]

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        out = np.zeros_like(u)
        for cell, coeff in self.support_cells:
            for a, b in cell.intervals:
                out[(u >= a) & (u < b)] = coeff
        return out


class OrthoBasis:
    """2**depth orthonormal sigma-step functions on an equal-measure
    dyadic splitting of the domain.

    Index 0 is the normalized constant; index 2**level + j (for
    0 <= j < 2**level < 2**depth) is the Haar function on dyadic node
    (level, j), positive on its left child.
    """

    def __init__(self, space: MeasureSpace, domain: MeasurableSet, depth: int,
                 leaves: Partition):
        self.space = space
        self.domain = domain
        self.depth = depth
        self.leaves = leaves.cells
        self.leaf_measures = np.asarray(leaves.cell_measures, dtype=float)
        n = len(self.leaves)
        if n != 2 ** depth:
            raise ValueError(f"expected {2 ** depth} leaves, got {n}")
        # node mass sums per level: _sigma[l] has 2**l entries
        sums = [self.leaf_measures]
        for _ in range(depth):
            sums.append(sums[-1].reshape(-1, 2).sum(axis=1))
        self._sigma = sums[::-1]
        self.total_measure = float(self._sigma[0][0])
        if not (self.total_measure > 0):
            raise ValueError("domain must have positive measure")
        # per-level left/right Haar values: +1/sqrt(2 sigma(L)), -1/sqrt(2 sigma(R))
        self._left_val = [1.0 / np.sqrt(2.0 * self._sigma[l + 1][0::2])
                          for l in range(depth)]
        self._right_val = [-1.0 / np.sqrt(2.0 * self._sigma[l + 1][1::2])
                           for l in range(depth)]

    @property
    def size(self) -> int:
        return 2 ** self.depth

    # -- dyadic tree ----------------------------------------------------

    def dyadic_cell(self, level: int, j: int) -> MeasurableSet:
        """Union of leaves under node (level, j)."""
        width = 2 ** (self.depth - level)
        pieces = []
        for leaf in self.leaves[j * width:(j + 1) * width]:
            pieces.extend(leaf.intervals)
        return MeasurableSet.from_intervals(pieces)

    def dyadic_cells(self, level: int) -> list[MeasurableSet]:
        if not 0 <= level <= self.depth:
            raise ValueError(f"level must be in 0..{self.depth}")
        return [self.dyadic_cell(level, j) for j in range(2 ** level)]

    @cached_property
    def functions(self) -> tuple[BasisFunction, ...]:
        out = [BasisFunction(0, ((self.domain,
                                  1.0 / math.sqrt(self.total_measure)),))]
        for level in range(self.depth):
            for j in range(2 ** level):
                left = self.dyadic_cell(level + 1, 2 * j)
                right = self.dyadic_cell(level + 1, 2 * j + 1)
                out.append(BasisFunction(
                    2 ** level + j,
                    ((left, float(self._left_val[level][j])),
                     (right, float(self._right_val[level][j])))))
        return tuple(out)

    # -- fast transforms -------------------------------------------------

    def coefficients_from_leaf_integrals(self, m: np.ndarray) -> np.ndarray:
        """Map leaf integrals m_j = int_{leaf_j} f dsigma to basis
        coefficients <f, phi_k>_sigma. Linear, O(N log N)."""
        m = np.asarray(m, dtype=float)
        c = np.empty(self.size)
        c[0] = m.sum() / math.sqrt(self.total_measure)
        sums = m
        stack = [m]
        for _ in range(self.depth - 1):
            stack.append(stack[-1].reshape(-1, 2).sum(axis=1))
        # stack[i] holds level depth-i sums; Haar at level l needs level l+1 sums
        for level in range(self.depth):
            child = stack[self.depth - 1 - level]
            c[2 ** level:2 ** (level + 1)] = (
                child[0::2] * self._left_val[level]
                + child[1::2] * self._right_val[level])
        return c

    def reconstruct_leaf_values(self, c: np.ndarray) -> np.ndarray:
        """Leaf values of sum_k c_k phi_k (inverse of the projection for
        functions piecewise constant on the leaves)."""
        c = np.asarray(c, dtype=float)
        vals = np.full(self.size, c[0] / math.sqrt(self.total_measure))
        for level in range(self.depth):
            coeffs = c[2 ** level:2 ** (level + 1)]
            w = np.empty(2 ** (level + 1))
            w[0::2] = coeffs * self._left_val[level]
            w[1::2] = coeffs * self._right_val[level]
            vals += np.repeat(w, 2 ** (self.depth - level - 1))
        return vals

    def leaf_value_matrix(self) -> np.ndarray:
        """Dense (N, N) matrix of basis-function values on the leaves."""
        out = np.empty((self.size, self.size))
        unit = np.zeros(self.size)
        for k in range(self.size):
            unit[:] = 0.0
            unit[k] = 1.0
            out[k] = self.reconstruct_leaf_values(unit)
        return out

    # -- projections ------------------------------------------------------

    def leaf_integrals_of(self, f) -> np.ndarray:
        """int_{leaf_j} f dsigma for each leaf.

        f may be a MeasurableSet (its indicator), an object exposing
        step-function cells (.support_cells or .cells of (set, coeff)
        pairs), or a callable evaluated pointwise.
        """
        if isinstance(f, MeasurableSet):
            if not f.is_subset_of(self.domain):
                raise DomainError(f"{f} is not inside the basis domain")
            return np.array([self.space.measure_of(leaf.intersect(f))
                             for leaf in self.leaves])
        # step-structured objects project exactly through cell masses,
        # even when they also happen to be callable
        cells = getattr(f, "support_cells", None)
        if cells is None:
            cells = getattr(f, "cells", None)
        if cells is not None:
            m = np.zeros(self.size)
            for cell, coeff in cells:
                if not cell.is_subset_of(self.domain):
                    raise DomainError(f"{cell} is not inside the basis domain")
                m += coeff * np.array(
                    [self.space.measure_of(leaf.intersect(cell))
                     for leaf in self.leaves])
            return m
        if callable(f):
            dens = self.space.density
            out = np.empty(self.size)
            for j, leaf in enumerate(self.leaves):
                val = 0.0
                for a, b in leaf.intervals:
                    val += integrate_interval(
                        lambda u: float(f(u)) * float(dens(u)), a, b,
                        self.space.quadrature)
                val += sum(mass * float(f(x))
                           for x, mass in self.space.atoms_in(leaf))
                out[j] = val
            return out
        raise TypeError(f"cannot project object of type {type(f)!r}")

    def project(self, f) -> np.ndarray:
        """Coefficient vector c_k = <f, phi_k>_sigma."""
        return self.coefficients_from_leaf_integrals(self.leaf_integrals_of(f))

    def parseval_residual(self, A: MeasurableSet) -> float:
        """sigma(A) - sum_k <chi_A, phi_k>^2 >= 0; zero iff chi_A is in
        the span of the basis."""
        c = self.project(A)
        return self.space.measure_of(A) - float(np.dot(c, c))

    # -- fixture dump ------------------------------------------------------

    def to_json(self) -> list[dict]:
        rows = []
        for fn in self.functions:
            cells = []
            for cell, coeff in fn.support_cells:
                cells.extend([[a, b, coeff] for a, b in cell.intervals])
            rows.append({"k": fn.index, "cells": cells})
        return rows

    def dump_json(self, path: str):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1, sort_keys=True)


def load_basis_dump(path: str) -> list[dict]:
    """Reload a basis dump for fixture replay: list of {k, cells} rows
    with cells as [a, b, coeff] triples."""
    with open(path) as fh:
        return json.load(fh)


def build_haar_basis(space: MeasureSpace, domain: MeasurableSet,
                     depth: int) -> OrthoBasis:
    """Constant + Haar-tree basis on the equal-measure dyadic splitting
    of the domain at the given depth.

    Requires 0 < sigma(domain) < inf, and a non-atomic measure on the
    domain when depth >= 1.
    """
    if depth < 0:
        raise ValueError("depth must be >= 0")
    leaves = space.equal_measure_partition(domain, 2 ** depth)
    return OrthoBasis(space, domain, depth, leaves)


def project(space: MeasureSpace, f, basis: OrthoBasis) -> np.ndarray:
    """Coefficients <f, phi_k>_sigma of f against the basis."""
    assert basis.space is space or basis.space == space
    return basis.project(f)


def parseval_residual(space: MeasureSpace, A: MeasurableSet,
                      basis: OrthoBasis) -> float:
    """Truncation deficit sigma(A) - sum_k |<chi_A, phi_k>|^2."""
    assert basis.space is space or basis.space == space
    return basis.parseval_residual(A)

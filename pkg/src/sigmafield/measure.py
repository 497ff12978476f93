"""Sigma-finite tempered measures on the real line.

Measurable sets are finite disjoint unions of half-open intervals
[a, b), so set algebra is exact. Measures are a density (integrable on
compacts) plus finitely many atoms; atoms exist to exercise the
non-refinable negative cases and every operation that needs arbitrarily
fine partitions rejects them.
"""

from __future__ import annotations

import json
import math
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ConfigError, NotRefinableError, QuadratureError
from .quadrature import (DEFAULT_QUADRATURE, QuadratureConfig, SweepResult,
                         integrate_interval, truncation_sweep)

SPLIT_TOL = 1e-12  # absolute bisection tolerance on split coordinates


# ---------------------------------------------------------------------------
# measurable sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MeasurableSet:
    """Finite disjoint union of half-open intervals [a, b), canonical form.

    Intervals are sorted, pairwise disjoint, and adjacent touching
    intervals are merged, so equal sets compare equal.
    """

    intervals: tuple[tuple[float, float], ...]

    @staticmethod
    def empty() -> "MeasurableSet":
        return MeasurableSet(())

    @staticmethod
    def interval(a: float, b: float) -> "MeasurableSet":
        return MeasurableSet.from_intervals([(a, b)])

    @staticmethod
    def from_intervals(pairs: Iterable[tuple[float, float]]) -> "MeasurableSet":
        cleaned = []
        for a, b in pairs:
            a, b = float(a), float(b)
            if not (math.isfinite(a) and math.isfinite(b)):
                raise ValueError("interval endpoints must be finite")
            if a == b:
                continue
            if a > b:
                raise ValueError(f"interval [{a}, {b}) has negative length")
            cleaned.append((a, b))
        cleaned.sort()
        merged: list[tuple[float, float]] = []
        for a, b in cleaned:
            if merged and a < merged[-1][1]:
                raise ValueError("intervals overlap")
            if merged and a == merged[-1][1]:
                merged[-1] = (merged[-1][0], b)
            else:
                merged.append((a, b))
        return MeasurableSet(tuple(merged))

    @property
    def is_empty(self) -> bool:
        return not self.intervals

    @property
    def length(self) -> float:
        return sum(b - a for a, b in self.intervals)

    @property
    def bounds(self) -> tuple[float, float]:
        if self.is_empty:
            raise ValueError("empty set has no bounds")
        return self.intervals[0][0], self.intervals[-1][1]

    def contains(self, x: float) -> bool:
        return any(a <= x < b for a, b in self.intervals)

    def is_subset_of(self, other: "MeasurableSet") -> bool:
        return self.intersect(other) == self

    def intersect(self, other: "MeasurableSet") -> "MeasurableSet":
        out = []
        for a1, b1 in self.intervals:
            for a2, b2 in other.intervals:
                lo, hi = max(a1, a2), min(b1, b2)
                if lo < hi:
                    out.append((lo, hi))
        return MeasurableSet.from_intervals(out)

    def union(self, other: "MeasurableSet") -> "MeasurableSet":
        pairs = sorted(self.intervals + other.intervals)
        merged: list[list[float]] = []
        for a, b in pairs:
            if merged and a <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], b)
            else:
                merged.append([a, b])
        return MeasurableSet(tuple((a, b) for a, b in merged))

    def clip(self, lo: float, hi: float) -> "MeasurableSet":
        """Intersection with [lo, hi); lo/hi may be +-inf."""
        out = []
        for a, b in self.intervals:
            a2, b2 = max(a, lo), min(b, hi)
            if a2 < b2:
                out.append((a2, b2))
        return MeasurableSet.from_intervals(out)

    def split_at(self, cuts: Sequence[float]) -> list["MeasurableSet"]:
        """Partition into pieces delimited by the sorted cut coordinates."""
        edges = [-math.inf, *cuts, math.inf]
        pieces = []
        for lo, hi in zip(edges[:-1], edges[1:]):
            piece = self.clip(lo, hi)
            pieces.append(piece)
        return pieces

    def __str__(self) -> str:
        if self.is_empty:
            return "{}"
        return " u ".join(f"[{a:g}, {b:g})" for a, b in self.intervals)


def intersect(a: MeasurableSet, b: MeasurableSet) -> MeasurableSet:
    """Canonical intersection of two measurable sets."""
    return a.intersect(b)


# ---------------------------------------------------------------------------
# densities
# ---------------------------------------------------------------------------

class Density:
    """Nonnegative density on the line, optionally with an exact
    antiderivative used to bypass quadrature."""

    def __init__(self, fn: Callable, name: str = "custom",
                 antiderivative: Callable | None = None):
        self._fn = fn
        self.name = name
        self._antiderivative = antiderivative

    def __call__(self, u):
        return self._fn(np.asarray(u, dtype=float))

    def integral(self, a: float, b: float) -> float | None:
        """Exact integral over [a, b], or None when only quadrature works."""
        if self._antiderivative is None:
            return None
        return float(self._antiderivative(b) - self._antiderivative(a))

    def __repr__(self) -> str:
        return f"Density({self.name!r})"


class PiecewisePolynomialDensity(Density):
    """Density given by polynomial coefficient rows on disjoint intervals.

    pieces: sequence of (a, b, coeffs) with coeffs in increasing degree.
    Exact integration via per-piece antiderivatives.
    """

    def __init__(self, pieces: Sequence[tuple[float, float, Sequence[float]]]):
        rows = sorted((float(a), float(b), tuple(float(c) for c in coeffs))
                      for a, b, coeffs in pieces)
        for (a1, b1, _), (a2, _, _) in zip(rows[:-1], rows[1:]):
            if a2 < b1:
                raise ValueError("piecewise density pieces overlap")
        self.pieces = tuple(rows)

        def fn(u):
            u = np.asarray(u, dtype=float)
            out = np.zeros_like(u)
            for a, b, coeffs in self.pieces:
                mask = (u >= a) & (u < b)
                if mask.any():
                    out[mask] = np.polynomial.polynomial.polyval(u[mask], coeffs)
            return out

        super().__init__(fn, name="piecewise-polynomial")

    def integral(self, a: float, b: float) -> float:
        if a > b:
            return -self.integral(b, a)
        total = 0.0
        for pa, pb, coeffs in self.pieces:
            lo, hi = max(a, pa), min(b, pb)
            if lo < hi:
                anti = np.polynomial.polynomial.polyint(coeffs)
                total += float(np.polynomial.polynomial.polyval(hi, anti)
                               - np.polynomial.polynomial.polyval(lo, anti))
        return total


def resolve_density(name: str) -> Density:
    """Builtin density by name: lebesgue, normalized-lebesgue, power:ALPHA,
    cauchy-like:P, zero."""
    if name == "lebesgue":
        return Density(lambda u: np.ones_like(u), "lebesgue",
                       antiderivative=lambda x: x)
    if name == "normalized-lebesgue":
        c = 1.0 / (2.0 * math.pi)
        return Density(lambda u: np.full_like(u, c), "normalized-lebesgue",
                       antiderivative=lambda x: c * x)
    if name == "zero":
        return Density(lambda u: np.zeros_like(u), "zero",
                       antiderivative=lambda x: 0.0)
    if name.startswith("power:"):
        alpha = float(name.split(":", 1)[1])
        if alpha <= -1.0:
            raise ConfigError(f"power density |u|^{alpha} is not locally integrable")

        def anti(x, alpha=alpha):
            return math.copysign(abs(x) ** (alpha + 1.0), x) / (alpha + 1.0)

        return Density(lambda u, a=alpha: np.abs(u) ** a, name,
                       antiderivative=anti)
    if name.startswith("cauchy-like:"):
        p = float(name.split(":", 1)[1])
        if p == 1.0:
            return Density(lambda u: 1.0 / (1.0 + u * u), name,
                           antiderivative=math.atan)
        return Density(lambda u, p=p: (1.0 + u * u) ** (-p), name)
    raise ConfigError(f"unknown builtin density {name!r}")


# ---------------------------------------------------------------------------
# measure space
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MeasureSpace:
    """Density + finite atoms on the real line, with quadrature settings.

    Immutable after construction; safe to share across workers.
    """

    density: Density
    atoms: tuple[tuple[float, float], ...] = ()
    quadrature: QuadratureConfig = DEFAULT_QUADRATURE

    def __post_init__(self):
        atoms = tuple(sorted((float(x), float(m)) for x, m in self.atoms))
        for x, m in atoms:
            if m < 0:
                raise ValueError(f"atom at {x} has negative mass {m}")
        object.__setattr__(self, "atoms", atoms)

    # -- basic measure evaluation -------------------------------------

    def _interval_density_mass(self, a: float, b: float) -> float:
        exact = self.density.integral(a, b)
        if exact is not None:
            return exact
        return integrate_interval(lambda u: float(self.density(u)), a, b,
                                  self.quadrature)

    def atoms_in(self, A: MeasurableSet) -> list[tuple[float, float]]:
        return [(x, m) for x, m in self.atoms if m > 0 and A.contains(x)]

    def measure_of(self, A: MeasurableSet) -> float:
        """sigma(A) = integral of the density over A plus atom masses in A."""
        total = 0.0
        for a, b in A.intervals:
            total += self._interval_density_mass(a, b)
        total += sum(m for _, m in self.atoms_in(A))
        if not math.isfinite(total):
            raise QuadratureError(f"sigma({A}) is not finite")
        if total < 0:
            if total < -1e-12 * max(1.0, A.length):
                raise QuadratureError(f"sigma({A}) came back negative: {total}")
            total = 0.0
        return total

    # -- temperedness ---------------------------------------------------

    def temperedness_check(self, p: int, truncation: float) -> float:
        """Integral of dsigma(u)/(u^2+1)^p over |u| <= truncation."""
        if truncation <= 0:
            raise ValueError("truncation must be positive")
        if p < 0:
            raise ValueError("p must be a nonnegative integer")

        def fn(u):
            return float(self.density(u)) / (u * u + 1.0) ** p

        val = integrate_interval(fn, -truncation, 0.0, self.quadrature)
        val += integrate_interval(fn, 0.0, truncation, self.quadrature)
        val += sum(m / (x * x + 1.0) ** p
                   for x, m in self.atoms if m > 0 and -truncation <= x <= truncation)
        return val

    def temperedness_sweep(self, p: int, start: float = 16.0,
                           rel_tol: float = 1e-6) -> SweepResult:
        """Doubling-truncation sweep of the temperedness integral.

        converged=False flags divergence (Cauchy criterion never met).
        The default tolerance is a convergence probe, not an accuracy
        target: tempered measures with 1/u^2-type integrands shed mass
        like 1/cutoff, so 1e-6 keeps the sweep inside the cutoff cap.
        """
        def panel(lo, hi):
            def fn(u):
                return float(self.density(u)) / (u * u + 1.0) ** p

            val = integrate_interval(fn, lo, hi, self.quadrature)
            val += integrate_interval(fn, -hi, -lo, self.quadrature)
            val += sum(m / (x * x + 1.0) ** p for x, m in self.atoms
                       if m > 0 and (lo <= abs(x) < hi or (lo == 0.0 and x == 0.0)))
            return val

        return truncation_sweep(panel, start=start, rel_tol=rel_tol)

    # -- partitions -----------------------------------------------------

    def _quantile_in_interval(self, a: float, b: float, mass: float) -> float:
        """Coordinate x in [a, b] with density mass of [a, x) equal to mass,
        found by bisection to SPLIT_TOL."""
        lo, hi = a, b
        while hi - lo > SPLIT_TOL:
            mid = 0.5 * (lo + hi)
            if self._interval_density_mass(a, mid) < mass:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    def _require_nonatomic(self, A: MeasurableSet, what: str):
        blocking = self.atoms_in(A)
        if blocking:
            x, m = blocking[0]
            raise NotRefinableError(
                f"{what}: atom of mass {m} at {x} inside {A} blocks refinement",
                atom=(x, m))

    def equal_measure_partition(self, A: MeasurableSet, n: int) -> Partition:
        """Split A into n cells of measure sigma(A)/n via cumulative-measure
        bisection. Requires a non-atomic measure on A."""
        if n < 1:
            raise ValueError("n must be a positive integer")
        self._require_nonatomic(A, "equal_measure_partition")
        total = self.measure_of(A)
        if not (0.0 < total < math.inf):
            raise ValueError(f"need 0 < sigma(A) < inf, got {total}")
        if n == 1:
            return Partition(A, (A,), (total,))

        interval_masses = [self._interval_density_mass(a, b)
                           for a, b in A.intervals]
        cum = np.concatenate([[0.0], np.cumsum(interval_masses)])
        cuts = []
        for i in range(1, n):
            target = total * (i / n)
            k = int(np.searchsorted(cum, target, side="right") - 1)
            k = min(k, len(A.intervals) - 1)
            a, b = A.intervals[k]
            cuts.append(self._quantile_in_interval(a, b, target - cum[k]))
        pieces = A.split_at(cuts)
        cells = tuple(p for p in pieces if not p.is_empty)
        if len(cells) != n:
            raise QuadratureError(
                f"equal split of {A} into {n} produced {len(cells)} cells")
        measures = tuple(self.measure_of(c) for c in cells)
        if abs(sum(measures) - total) > 1e-9 * max(total, 1.0):
            raise QuadratureError("partition masses do not add up to sigma(A)")
        return Partition(A, cells, measures)

    def equal_length_partition(self, A: MeasurableSet, n: int) -> Partition:
        """Split A at equal-length cuts (atoms allowed; used for the
        non-convergence negative controls)."""
        if n < 1:
            raise ValueError("n must be a positive integer")
        if A.is_empty:
            raise ValueError("cannot partition the empty set")
        total_len = A.length
        cuts, acc = [], 0.0
        targets = [total_len * i / n for i in range(1, n)]
        ti = 0
        for a, b in A.intervals:
            while ti < len(targets) and acc + (b - a) > targets[ti]:
                cuts.append(a + (targets[ti] - acc))
                ti += 1
            acc += b - a
        cells = tuple(p for p in A.split_at(cuts) if not p.is_empty)
        measures = tuple(self.measure_of(c) for c in cells)
        return Partition(A, cells, measures)

    def refine_to_mesh(self, A: MeasurableSet, eps: float) -> Partition:
        """Equal-measure partition with mesh (max cell measure) below eps."""
        if eps <= 0:
            raise ValueError("eps must be positive")
        self._require_nonatomic(A, "refine_to_mesh")
        total = self.measure_of(A)
        if not math.isfinite(total):
            raise ValueError("sigma(A) must be finite")
        n = max(1, math.ceil(total / eps))
        if n > 1 and total / n >= eps:
            n += 1
        part = self.equal_measure_partition(A, n)
        if n > 1 and part.mesh >= eps * (1.0 + 1e-9):
            raise QuadratureError(
                f"refine_to_mesh missed target mesh {eps}: got {part.mesh}")
        return part


@dataclass(frozen=True)
class Partition:
    """Disjoint cells covering a parent set, with their measures."""

    parent: MeasurableSet
    cells: tuple[MeasurableSet, ...]
    cell_measures: tuple[float, ...] = field(default=())

    @property
    def mesh(self) -> float:
        return max(self.cell_measures)

    def __len__(self) -> int:
        return len(self.cells)


def lower_variation(partition: Partition) -> float:
    """Sum of squared cell measures: the quantity whose infimum over
    partitions decides whether the quadratic variation collapses to a
    constant."""
    return float(np.sum(np.square(partition.cell_measures)))


# ---------------------------------------------------------------------------
# measure definition files
# ---------------------------------------------------------------------------

def measure_space_from_dict(spec: dict) -> MeasureSpace:
    """Build a MeasureSpace from a measure-definition mapping.

    Schema: {density: name | [[a, b, [c0, c1, ...]], ...],
             atoms: [[x, mass], ...],
             quadrature: {rel_tol, abs_tol, max_panels}}
    """
    if not isinstance(spec, dict):
        raise ConfigError("measure definition must be a mapping")
    unknown = set(spec) - {"density", "atoms", "quadrature"}
    if unknown:
        raise ConfigError(f"unknown measure keys: {sorted(unknown)}")
    dens_spec = spec.get("density", "lebesgue")
    if isinstance(dens_spec, str):
        density = resolve_density(dens_spec)
    elif isinstance(dens_spec, (list, tuple)):
        try:
            density = PiecewisePolynomialDensity(
                [(row[0], row[1], row[2]) for row in dens_spec])
        except (ValueError, IndexError, TypeError) as exc:
            raise ConfigError(f"bad piecewise density table: {exc}") from exc
    else:
        raise ConfigError("density must be a builtin name or a piecewise table")
    atoms = tuple((float(x), float(m)) for x, m in spec.get("atoms", []))
    qspec = spec.get("quadrature", {})
    unknown = set(qspec) - {"rel_tol", "abs_tol", "max_panels"}
    if unknown:
        raise ConfigError(f"unknown quadrature keys: {sorted(unknown)}")
    cfg = QuadratureConfig(
        rel_tol=float(qspec.get("rel_tol", DEFAULT_QUADRATURE.rel_tol)),
        abs_tol=float(qspec.get("abs_tol", DEFAULT_QUADRATURE.abs_tol)),
        max_panels=int(qspec.get("max_panels", DEFAULT_QUADRATURE.max_panels)))
    return MeasureSpace(density=density, atoms=atoms, quadrature=cfg)


def load_measure_file(path: str) -> MeasureSpace:
    """Read a measure definition from a .json or .toml file."""
    text = open(path, "rb").read()
    if str(path).endswith(".toml"):
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        data = tomllib.loads(text.decode())
    elif str(path).endswith(".json"):
        data = json.loads(text.decode())
    else:
        raise ConfigError(f"measure file {path} must end in .json or .toml")
    return measure_space_from_dict(data)


def measure_of(space: MeasureSpace, A: MeasurableSet) -> float:
    """sigma(A); see MeasureSpace.measure_of."""
    return space.measure_of(A)


def temperedness_check(space: MeasureSpace, p: int, truncation: float) -> float:
    """Truncated temperedness integral; see MeasureSpace.temperedness_check."""
    return space.temperedness_check(p, truncation)


def equal_measure_partition(space: MeasureSpace, A: MeasurableSet,
                            n: int) -> Partition:
    return space.equal_measure_partition(A, n)


def refine_to_mesh(space: MeasureSpace, A: MeasurableSet, eps: float) -> Partition:
    return space.refine_to_mesh(A, eps)

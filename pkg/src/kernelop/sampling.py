"""
Seeded uniform collocation sampling in box domains.

Random numbers come from numpy's ``PCG64`` bit generator seeded directly with
the caller's integer seed, so a given ``(domain, n, seed)`` reproduces the same
points on every platform numpy supports.  Uniform variates on the open unit
interval are formed as ``k / 2**53`` with ``k`` drawn from ``[1, 2**53)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigurationError, ShapeError
from .operators import Region, as_regions

_TWO53 = float(2**53)


@dataclass(frozen=True)
class BoxDomain:
    """Axis-aligned box; ``time_axis`` marks the time coordinate if any."""

    lower: tuple
    upper: tuple
    time_axis: Optional[int] = None

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.upper))
        if len(lo) != len(hi):
            raise ShapeError("lower and upper bounds differ in length")
        if any(a >= b for a, b in zip(lo, hi)):
            raise ConfigurationError("box requires lower < upper componentwise")
        if self.time_axis is not None and not 0 <= self.time_axis < len(lo):
            raise ConfigurationError("time_axis out of range")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def unit(cls, dimension: int, time_axis: Optional[int] = None) -> "BoxDomain":
        return cls((0.0,) * dimension, (1.0,) * dimension, time_axis)

    @property
    def dimension(self) -> int:
        return len(self.lower)

    def boundary_faces(self):
        """``(axis, pinned_value, measure)`` for every non-time face."""
        lo = np.array(self.lower)
        hi = np.array(self.upper)
        faces = []
        for axis in range(self.dimension):
            if axis == self.time_axis:
                continue
            others = [j for j in range(self.dimension) if j != axis]
            measure = float(np.prod(hi[others] - lo[others])) if others else 1.0
            faces.append((axis, lo[axis], measure))
            faces.append((axis, hi[axis], measure))
        return faces


@dataclass
class LabeledSampleSet:
    """Collocation points with region tags and optional observed values."""

    points: np.ndarray
    regions: np.ndarray
    values: Optional[np.ndarray] = None
    seed: Optional[int] = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim != 2:
            raise ShapeError("points must be an (N, d) array")
        self.regions = as_regions(self.regions, self.points.shape[0])
        if self.values is not None:
            self.values = np.asarray(self.values, dtype=float)
            if self.values.shape != (self.points.shape[0],):
                raise ShapeError("values must have one entry per point")

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    def count(self, region: Region) -> int:
        return int(np.sum(self.regions == region))

    def subset(self, index) -> "LabeledSampleSet":
        values = None if self.values is None else self.values[index]
        return LabeledSampleSet(self.points[index], self.regions[index], values, self.seed)

    def with_values(self, values) -> "LabeledSampleSet":
        return LabeledSampleSet(self.points, self.regions, values, self.seed)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            d = self.dimension
            writer.writerow([f"x_{i + 1}" for i in range(d)] + ["region", "value"])
            for i in range(len(self)):
                value = "" if self.values is None else repr(float(self.values[i]))
                writer.writerow(
                    [repr(float(v)) for v in self.points[i]]
                    + [Region(self.regions[i]).name.lower(), value]
                )

    @classmethod
    def from_csv(cls, path) -> "LabeledSampleSet":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            d = sum(1 for h in header if h.startswith("x_"))
            rows = list(reader)
        points = np.array([[float(v) for v in r[:d]] for r in rows]).reshape(len(rows), d)
        regions = [Region.parse(r[d]) for r in rows]
        raw = [r[d + 1] if len(r) > d + 1 else "" for r in rows]
        values = None
        if rows and all(v != "" for v in raw):
            values = np.array([float(v) for v in raw])
        return cls(points, regions, values)


def _open_uniform(rng: np.random.Generator, size) -> np.ndarray:
    return rng.integers(1, 2**53, size=size, dtype=np.int64) / _TWO53


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def _empty(domain: BoxDomain, seed) -> LabeledSampleSet:
    return LabeledSampleSet(np.zeros((0, domain.dimension)), [], seed=seed)


def sample_interior(domain: BoxDomain, n: int, seed: int) -> LabeledSampleSet:
    if n < 0:
        raise ConfigurationError("sample count must be non-negative")
    if n == 0:
        return _empty(domain, seed)
    lo = np.array(domain.lower)
    hi = np.array(domain.upper)
    u = _open_uniform(_rng(seed), (n, domain.dimension))
    points = lo + u * (hi - lo)
    # guard against rounding onto the faces for tiny boxes
    points = np.clip(points, np.nextafter(lo, hi), np.nextafter(hi, lo))
    return LabeledSampleSet(points, [Region.INTERIOR] * n, seed=seed)


def sample_boundary(domain: BoxDomain, n: int, seed: int) -> LabeledSampleSet:
    """Uniform points on the non-time faces, each face weighted by its measure."""
    if n < 0:
        raise ConfigurationError("sample count must be non-negative")
    faces = domain.boundary_faces()
    if n == 0 or not faces:
        if n:
            raise ConfigurationError("domain has no spatial boundary faces")
        return _empty(domain, seed)
    rng = _rng(seed)
    measures = np.array([m for _, _, m in faces])
    choice = rng.choice(len(faces), size=n, p=measures / measures.sum())
    lo = np.array(domain.lower)
    hi = np.array(domain.upper)
    points = lo + _open_uniform(rng, (n, domain.dimension)) * (hi - lo)
    for f, (axis, pinned, _) in enumerate(faces):
        points[choice == f, axis] = pinned
    return LabeledSampleSet(points, [Region.BOUNDARY] * n, seed=seed)


def sample_initial(domain: BoxDomain, n: int, seed: int) -> LabeledSampleSet:
    """Uniform points on the ``t = t_min`` slice of a space-time box."""
    if domain.time_axis is None:
        raise ConfigurationError("initial sampling needs a domain with a time axis")
    if n < 0:
        raise ConfigurationError("sample count must be non-negative")
    if n == 0:
        return _empty(domain, seed)
    lo = np.array(domain.lower)
    hi = np.array(domain.upper)
    points = lo + _rng(seed).random((n, domain.dimension)) * (hi - lo)
    points[:, domain.time_axis] = lo[domain.time_axis]
    return LabeledSampleSet(points, [Region.INITIAL] * n, seed=seed)


def merge(sets: Sequence[LabeledSampleSet]) -> LabeledSampleSet:
    """Concatenate sample sets, ordered interior, boundary, then initial.

    The reordering is stable, so points keep their relative order within each
    region.  Values survive only if every input carries them.
    """
    sets = [s for s in sets if s is not None]
    nonempty = [s for s in sets if len(s)]
    if not nonempty:
        return sets[0] if sets else LabeledSampleSet(np.zeros((0, 1)), [])
    d = nonempty[0].dimension
    if any(s.dimension != d for s in nonempty):
        raise ShapeError("cannot merge sample sets of different dimensions")
    points = np.concatenate([s.points for s in nonempty])
    regions = np.concatenate([s.regions for s in nonempty])
    values = None
    if all(s.values is not None for s in nonempty):
        values = np.concatenate([s.values for s in nonempty])
    order = np.argsort(regions, kind="stable")
    seed = nonempty[0].seed if len(nonempty) == 1 else None
    return LabeledSampleSet(
        points[order], regions[order], None if values is None else values[order], seed
    )


def sample_problem_points(
    domain: BoxDomain, n_interior: int, n_boundary: int, n_initial: int, seed: int
) -> LabeledSampleSet:
    """Draw interior, boundary and initial points from independent streams."""
    s_int, s_bnd, s_ini = (
        int(c.generate_state(1)[0]) for c in np.random.SeedSequence(seed).spawn(3)
    )
    sets = [sample_interior(domain, n_interior, s_int), sample_boundary(domain, n_boundary, s_bnd)]
    if n_initial:
        sets.append(sample_initial(domain, n_initial, s_ini))
    out = merge(sets)
    out.seed = seed
    return out

"""The six configurable rendering attributes and their mixture-of-Gaussians distributions.

Each attribute is modeled by an equal-weight mixture of Gaussians with fixed
variances; only the component means are ever optimized. The means of all
components, concatenated in a fixed order, form the flattened parameter
vector that the coordinate-search optimizer walks.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass

import numpy as np


class AttributeKind(enum.Enum):
    IN_PLANE_ROTATION = "in_plane_rotation"
    AZIMUTH = "azimuth"
    LIGHT_INTENSITY = "light_intensity"
    LIGHT_DIRECTION = "light_direction"
    CAMERA_HEIGHT = "camera_height"
    CAMERA_DISTANCE = "camera_distance"


# Fixed attribute order; also the flattened-parameter order.
KIND_ORDER: tuple[AttributeKind, ...] = tuple(AttributeKind)

RANGES: dict[AttributeKind, tuple[float, float]] = {
    AttributeKind.IN_PLANE_ROTATION: (0.0, 360.0),
    AttributeKind.AZIMUTH: (0.0, 360.0),
    AttributeKind.LIGHT_INTENSITY: (0.0, 100.0),
    AttributeKind.LIGHT_DIRECTION: (0.0, 180.0),
    AttributeKind.CAMERA_HEIGHT: (0.0, 100.0),
    AttributeKind.CAMERA_DISTANCE: (0.0, 100.0),
}

# Angular kinds wrap modulo 360; all others clip to their range.
CIRCULAR_KINDS = frozenset(
    {AttributeKind.IN_PLANE_ROTATION, AttributeKind.AZIMUTH}
)

DEFAULT_COMPONENT_COUNTS: dict[AttributeKind, int] = {
    AttributeKind.IN_PLANE_ROTATION: 3,
    AttributeKind.AZIMUTH: 6,
    AttributeKind.LIGHT_INTENSITY: 1,
    AttributeKind.LIGHT_DIRECTION: 1,
    AttributeKind.CAMERA_HEIGHT: 1,
    AttributeKind.CAMERA_DISTANCE: 1,
}

DEFAULT_GRID_STEPS: dict[AttributeKind, int] = {
    AttributeKind.IN_PLANE_ROTATION: 12,
    AttributeKind.AZIMUTH: 12,
    AttributeKind.LIGHT_INTENSITY: 10,
    AttributeKind.LIGHT_DIRECTION: 6,
    AttributeKind.CAMERA_HEIGHT: 10,
    AttributeKind.CAMERA_DISTANCE: 5,
}

DEFAULT_VARIANCES: dict[AttributeKind, float] = {
    AttributeKind.IN_PLANE_ROTATION: 10.0,
    AttributeKind.AZIMUTH: 20.0,
    AttributeKind.LIGHT_INTENSITY: 0.63,
    AttributeKind.LIGHT_DIRECTION: 7.07,
    AttributeKind.CAMERA_HEIGHT: 0.4,
    AttributeKind.CAMERA_DISTANCE: 0.6,
}


def normalize(kind: AttributeKind, value: float) -> float:
    """Wrap circular kinds into [0, 360); clip clamped kinds to their range."""
    if not math.isfinite(value):
        raise ValueError(f"non-finite value for {kind.value}: {value!r}")
    if kind in CIRCULAR_KINDS:
        return float(value) % 360.0
    lo, hi = RANGES[kind]
    return min(max(float(value), lo), hi)


@dataclass(frozen=True)
class AttributeVector:
    """One concrete realization of the six attributes, fed to the renderer."""

    in_plane_rotation: float
    azimuth: float
    light_intensity: float
    light_direction: float
    camera_height: float
    camera_distance: float

    def __getitem__(self, kind: AttributeKind) -> float:
        return getattr(self, kind.value)

    def normalized(self) -> "AttributeVector":
        return AttributeVector(
            **{k.value: normalize(k, self[k]) for k in KIND_ORDER}
        )

    def as_dict(self) -> dict[str, float]:
        return {k.value: self[k] for k in KIND_ORDER}

    @classmethod
    def from_dict(cls, d: dict[str, float]) -> "AttributeVector":
        return cls(**{k.value: float(d[k.value]) for k in KIND_ORDER})


@dataclass(frozen=True)
class GaussianComponent:
    """Mean/variance pair in the attribute's own units. Variance is fixed."""

    mean: float
    variance: float

    def __post_init__(self):
        if self.variance < 0:
            raise ValueError(f"negative variance: {self.variance}")


@dataclass(frozen=True)
class AttributeDistribution:
    """Per-attribute equal-weight Gaussian mixtures.

    Immutable; updates go through :meth:`with_parameter`, which replaces a
    single component mean in the flattened parameter vector.
    """

    components: tuple[tuple[GaussianComponent, ...], ...]  # one tuple per kind

    def __post_init__(self):
        if len(self.components) != len(KIND_ORDER):
            raise ValueError("expected one component tuple per attribute kind")

    def components_for(self, kind: AttributeKind) -> tuple[GaussianComponent, ...]:
        return self.components[KIND_ORDER.index(kind)]

    @property
    def n_params(self) -> int:
        return sum(len(c) for c in self.components)

    def theta(self) -> np.ndarray:
        """Flattened vector of all component means, in kind order."""
        return np.array(
            [c.mean for comps in self.components for c in comps], dtype=float
        )

    def param_kind(self, index: int) -> AttributeKind:
        """Kind owning flattened parameter ``index`` (0-based)."""
        kind, _ = self._locate(index)
        return kind

    def _locate(self, index: int) -> tuple[AttributeKind, int]:
        if not 0 <= index < self.n_params:
            raise IndexError(f"parameter index {index} out of range")
        offset = index
        for kind, comps in zip(KIND_ORDER, self.components):
            if offset < len(comps):
                return kind, offset
            offset -= len(comps)
        raise AssertionError("unreachable")

    def get_parameter(self, index: int) -> float:
        kind, j = self._locate(index)
        return self.components_for(kind)[j].mean

    def with_parameter(self, index: int, value: float) -> "AttributeDistribution":
        """Copy with exactly one component mean replaced."""
        kind, j = self._locate(index)
        lo, hi = RANGES[kind]
        if not lo <= value <= hi:
            raise ValueError(
                f"value {value} outside range [{lo}, {hi}] for {kind.value}"
            )
        new = []
        for k, comps in zip(KIND_ORDER, self.components):
            if k is kind:
                comps = tuple(
                    GaussianComponent(float(value), c.variance) if jj == j else c
                    for jj, c in enumerate(comps)
                )
            new.append(comps)
        return AttributeDistribution(tuple(new))

    def with_theta(self, theta: np.ndarray) -> "AttributeDistribution":
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_params,):
            raise ValueError(f"theta must have length {self.n_params}")
        new, i = [], 0
        for comps in self.components:
            new.append(
                tuple(
                    GaussianComponent(float(theta[i + j]), c.variance)
                    for j, c in enumerate(comps)
                )
            )
            i += len(comps)
        return AttributeDistribution(tuple(new))

    def sample(self, n: int, seed) -> list[AttributeVector]:
        """Draw n attribute vectors; each attribute picks a mixture component
        uniformly, draws a Gaussian variate, then normalizes into range."""
        if n < 1:
            raise ValueError("n must be >= 1")
        rng = np.random.default_rng(seed)
        cols = {}
        for kind, comps in zip(KIND_ORDER, self.components):
            idx = rng.integers(0, len(comps), size=n)
            means = np.array([c.mean for c in comps])[idx]
            stds = np.sqrt(np.array([c.variance for c in comps])[idx])
            raw = rng.normal(means, stds)
            cols[kind.value] = [normalize(kind, v) for v in raw]
        return [
            AttributeVector(**{name: vals[i] for name, vals in cols.items()})
            for i in range(n)
        ]

    # -- serialization (versioned) --------------------------------------

    SCHEMA = "attribute-distribution/1"

    def to_json(self) -> str:
        doc = {
            "schema": self.SCHEMA,
            "attributes": {
                kind.value: {
                    "means": [c.mean for c in comps],
                    "variances": [c.variance for c in comps],
                    "weights": [1.0 / len(comps)] * len(comps),
                }
                for kind, comps in zip(KIND_ORDER, self.components)
            },
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "AttributeDistribution":
        doc = json.loads(text)
        if doc.get("schema") != cls.SCHEMA:
            raise ValueError(f"unsupported schema: {doc.get('schema')!r}")
        comps = []
        for kind in KIND_ORDER:
            entry = doc["attributes"][kind.value]
            comps.append(
                tuple(
                    GaussianComponent(float(m), float(v))
                    for m, v in zip(entry["means"], entry["variances"])
                )
            )
        return cls(tuple(comps))


@dataclass(frozen=True)
class UniformAttributeDistribution:
    """Baseline sampler: every attribute uniform over its full range.

    Duck-typed drop-in for :class:`AttributeDistribution` wherever only
    ``sample`` is needed (baseline dataset generation and scoring).
    """

    def sample(self, n: int, seed) -> list[AttributeVector]:
        if n < 1:
            raise ValueError("n must be >= 1")
        rng = np.random.default_rng(seed)
        cols = {}
        for kind in KIND_ORDER:
            lo, hi = RANGES[kind]
            cols[kind.value] = rng.uniform(lo, hi, size=n)
        return [
            AttributeVector(**{name: float(vals[i]) for name, vals in cols.items()})
            for i in range(n)
        ]


def grid_for_kind(kind: AttributeKind, steps: int) -> tuple[float, ...]:
    """Uniform candidate grid across the kind's range.

    Circular kinds step around the circle without repeating the wrap point
    (e.g. 12 azimuth steps give 0..330 at 30 degree intervals); clamped kinds
    include both endpoints.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    lo, hi = RANGES[kind]
    if kind in CIRCULAR_KINDS:
        step = (hi - lo) / steps
        return tuple(lo + i * step for i in range(steps))
    if steps == 1:
        return (lo,)
    return tuple(np.linspace(lo, hi, steps))


@dataclass(frozen=True)
class SearchSpace:
    """Per flattened parameter: the ordered grid of candidate mean values."""

    grids: tuple[tuple[float, ...], ...]
    kinds: tuple[AttributeKind, ...]  # kind owning each flattened parameter

    def __post_init__(self):
        if len(self.grids) != len(self.kinds):
            raise ValueError("grids and kinds must align")
        for grid, kind in zip(self.grids, self.kinds):
            lo, hi = RANGES[kind]
            if list(grid) != sorted(set(grid)):
                raise ValueError(f"grid for {kind.value} not ascending/unique")
            if grid[0] < lo or grid[-1] > hi:
                raise ValueError(f"grid for {kind.value} leaves range")

    @property
    def n_params(self) -> int:
        return len(self.grids)

    @property
    def total_candidates(self) -> int:
        return sum(len(g) for g in self.grids)

    @classmethod
    def build(
        cls,
        component_counts: dict[AttributeKind, int] | None = None,
        grid_steps: dict[AttributeKind, int] | None = None,
    ) -> "SearchSpace":
        counts = dict(DEFAULT_COMPONENT_COUNTS)
        if component_counts:
            counts.update(component_counts)
        steps = dict(DEFAULT_GRID_STEPS)
        if grid_steps:
            steps.update(grid_steps)
        grids, kinds = [], []
        for kind in KIND_ORDER:
            grid = grid_for_kind(kind, steps[kind])
            for _ in range(counts[kind]):
                grids.append(grid)
                kinds.append(kind)
        return cls(tuple(grids), tuple(kinds))


def default_distribution(
    component_counts: dict[AttributeKind, int] | None = None,
    variances: dict[AttributeKind, float] | None = None,
    grid_steps: dict[AttributeKind, int] | None = None,
) -> AttributeDistribution:
    """Distribution with every mean at the lowest grid value of its kind."""
    counts = dict(DEFAULT_COMPONENT_COUNTS)
    if component_counts:
        counts.update(component_counts)
    var = dict(DEFAULT_VARIANCES)
    if variances:
        var.update(variances)
    steps = dict(DEFAULT_GRID_STEPS)
    if grid_steps:
        steps.update(grid_steps)
    comps = []
    for kind in KIND_ORDER:
        lowest = grid_for_kind(kind, steps[kind])[0]
        comps.append(
            tuple(GaussianComponent(lowest, var[kind]) for _ in range(counts[kind]))
        )
    return AttributeDistribution(tuple(comps))

"""Discretization of the (diopter x age x height) box."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, GridMismatchError

DEFAULT_AGES = (10, 70)
DEFAULT_HEIGHT_BINS = 128
SAMPLES_PER_SPACING = 4


@dataclass(frozen=True, eq=False)
class Grid:
    """Sample nodes on the diopter axis, one row per age, midpoint height bins.

    Each diopter node owns the cell between the midpoints to its neighbours
    (end cells are clipped to the range). ``depth_measure`` is the length of
    that cell in metres, so summing a quantity against it integrates over
    distance, not over diopters.
    """

    diopters: np.ndarray
    ages: np.ndarray
    height_bins: int

    def __post_init__(self):
        d = np.asarray(self.diopters, dtype=float)
        a = np.asarray(self.ages, dtype=float)
        if d.ndim != 1 or d.size < 1 or a.ndim != 1 or a.size < 1:
            raise ConfigError("grid axes must be non-empty 1-D arrays")
        if self.height_bins < 1:
            raise ConfigError("height_bins must be >= 1")
        if np.any(d <= 0):
            raise ConfigError("diopter nodes must be positive")
        if d.size > 1 and np.any(np.diff(d) <= 0):
            raise ConfigError("diopter nodes must be strictly increasing")
        if a.size > 1 and np.any(np.diff(a) <= 0):
            raise ConfigError("ages must be strictly increasing")
        d.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "diopters", d)
        object.__setattr__(self, "ages", a)

    @classmethod
    def uniform(cls, d_min, d_max, depth_cols, age_lo=DEFAULT_AGES[0], age_hi=DEFAULT_AGES[1],
                height_bins=DEFAULT_HEIGHT_BINS):
        if not 0 < d_min < d_max:
            raise ConfigError("need 0 < d_min < d_max")
        if depth_cols < 2:
            raise ConfigError("depth_cols must be >= 2")
        if age_hi < age_lo:
            raise ConfigError("age range is empty")
        return cls(np.linspace(d_min, d_max, int(depth_cols)),
                   np.arange(age_lo, age_hi + 1, dtype=float), int(height_bins))

    @property
    def depth_cols(self) -> int:
        return self.diopters.size

    @property
    def age_rows(self) -> int:
        return self.ages.size

    @property
    def n_pixels(self) -> int:
        return self.depth_cols * self.age_rows * self.height_bins

    @property
    def d_min(self) -> float:
        return float(self.diopters[0])

    @property
    def d_max(self) -> float:
        return float(self.diopters[-1])

    @property
    def depths(self) -> np.ndarray:
        return 1.0 / self.diopters

    @property
    def height_midpoints(self) -> np.ndarray:
        return (np.arange(self.height_bins) + 0.5) / self.height_bins

    @property
    def cell_edges(self) -> np.ndarray:
        d = self.diopters
        if d.size == 1:
            return np.array([d[0], d[0]])
        mid = 0.5 * (d[1:] + d[:-1])
        return np.concatenate([[d[0]], mid, [d[-1]]])

    @property
    def depth_measure(self) -> np.ndarray:
        e = self.cell_edges
        return 1.0 / e[:-1] - 1.0 / e[1:]

    @property
    def diopter_measure(self) -> np.ndarray:
        return np.diff(self.cell_edges)

    def shape(self):
        return (self.age_rows, self.depth_cols, self.height_bins)

    def same_as(self, other: "Grid") -> bool:
        return (self.height_bins == other.height_bins
                and self.diopters.shape == other.diopters.shape
                and self.ages.shape == other.ages.shape
                and np.array_equal(self.diopters, other.diopters)
                and np.array_equal(self.ages, other.ages))

    def require_same(self, other: "Grid", what="grid"):
        if not self.same_as(other):
            raise GridMismatchError(f"{what} was built on a different grid")


def aligned_columns(n_knolls: int, samples_per_spacing: int = SAMPLES_PER_SPACING) -> int:
    """Column count that puts every knoll center of an n-knoll train on a node."""
    return max(2, samples_per_spacing * max(n_knolls - 1, 1) + 1)

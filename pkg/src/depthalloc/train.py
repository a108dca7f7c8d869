"""DoF profile ("knoll") trains sampled on a Grid."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError
from .grid import Grid
from .optics import FWHM_TO_SIGMA, AccommodationModel, DofTable


def knoll_count(d_min: float, d_max: float, spacing: float) -> int:
    """Number of profiles at nominal spacing, both range ends included.

    Rounds the number of intervals to the nearest integer, so a 0.5-7.08 D
    range at 0.044 D gives 151 profiles.
    """
    if not spacing > 0:
        raise DomainError("spacing must be positive")
    if not 0 < d_min <= d_max:
        raise DomainError("need 0 < d_min <= d_max")
    return int(math.floor((d_max - d_min) / spacing + 0.5)) + 1


def train_centers(d_min: float, d_max: float, spacing: float) -> np.ndarray:
    n = knoll_count(d_min, d_max, spacing)
    if n == 1:
        return np.array([float(d_min)])
    return np.linspace(d_min, d_max, n)


def gaussian_profile(diopters, center, sigma):
    return np.exp(-0.5 * ((np.asarray(diopters, dtype=float) - center) / sigma) ** 2)


def knoll_values(grid: Grid, centers, sigma: float, amplitudes) -> np.ndarray:
    """Array (n, age_rows, depth_cols) of masked Gaussian profiles."""
    centers = np.asarray(centers, dtype=float)
    amplitudes = np.asarray(amplitudes, dtype=float)
    prof = gaussian_profile(grid.diopters[None, :], centers[:, None], sigma)  # (n, C)
    reach = centers[:, None] <= amplitudes[None, :]  # (n, R)
    return prof[:, None, :] * reach[:, :, None]


@dataclass(frozen=True)
class Knoll:
    center: float
    sigma: float
    values: np.ndarray  # (age_rows, depth_cols)


@dataclass(frozen=True, eq=False)
class KnollTrain:
    centers: np.ndarray
    sigma: float
    values: np.ndarray  # (n, age_rows, depth_cols)
    d_min: float
    d_max: float
    spacing: float
    grid: Grid
    pupil_mm: float | None = None

    def __post_init__(self):
        c = np.asarray(self.centers, dtype=float)
        if c.size > 1 and np.any(np.diff(c) <= 0):
            raise ConfigError("knoll centers must be strictly increasing")
        v = np.asarray(self.values, dtype=float)
        if v.shape != (c.size, self.grid.age_rows, self.grid.depth_cols):
            raise ConfigError("knoll values do not match the grid")
        if np.any(v < 0) or np.any(v > 1):
            raise ConfigError("knoll values must lie in [0, 1]")
        c.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.centers.size

    @property
    def n(self) -> int:
        return self.centers.size

    @property
    def depths_cm(self) -> np.ndarray:
        return 100.0 / self.centers

    @property
    def knolls(self) -> list:
        return [Knoll(float(c), self.sigma, self.values[i]) for i, c in enumerate(self.centers)]

    def subset(self, indices) -> "KnollTrain":
        idx = np.asarray(sorted(indices), dtype=int)
        return KnollTrain(self.centers[idx], self.sigma, self.values[idx], self.d_min,
                          self.d_max, self.spacing, self.grid, self.pupil_mm)

    def to_csv(self, path):
        """One row per (knoll, age); columns after ``age`` are intensities at each grid depth."""
        depth_hdr = [f"{z:.9g}" for z in self.grid.depths]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["center_diopter", "age"] + depth_hdr)
            for i, c in enumerate(self.centers):
                for r, age in enumerate(self.grid.ages):
                    w.writerow([f"{c:.9g}", f"{age:g}"] + [f"{x:.6g}" for x in self.values[i, r]])


def build_train(d_min, d_max, spacing, pupil_mm, grid: Grid, model: AccommodationModel | None = None,
                dof: DofTable | None = None) -> KnollTrain:
    """Profiles centred at uniform diopter steps from d_min to d_max.

    Each profile is a Gaussian in diopters with the pupil's FWHM and is zero
    on age rows whose amplitude cannot reach its center.
    """
    if not 0 < d_min < d_max:
        raise DomainError("need 0 < d_min < d_max")
    model = model or AccommodationModel()
    fwhm = (dof or DofTable()).lookup(pupil_mm)
    centers = train_centers(d_min, d_max, spacing)
    sigma = fwhm * FWHM_TO_SIGMA
    vals = knoll_values(grid, centers, sigma, model.amplitude(grid.ages))
    return KnollTrain(centers, sigma, vals, float(d_min), float(d_max), float(spacing), grid,
                      float(pupil_mm))


def train_from_centers(centers, pupil_mm, grid: Grid, model=None, dof=None) -> KnollTrain:
    """Profiles at arbitrary centers (used for the eye's own quantized planes)."""
    model = model or AccommodationModel()
    fwhm = (dof or DofTable()).lookup(pupil_mm)
    c = np.sort(np.asarray(centers, dtype=float))
    sigma = fwhm * FWHM_TO_SIGMA
    vals = knoll_values(grid, c, sigma, model.amplitude(grid.ages))
    sp = float(np.min(np.diff(c))) if c.size > 1 else 0.0
    return KnollTrain(c, sigma, vals, grid.d_min, grid.d_max, sp, grid, float(pupil_mm))

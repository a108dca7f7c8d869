"""Accommodation amplitude, depth of field and monocular focal-plane quantization."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError

FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))  # 1/2.3548

AGE_DOMAIN = (5.0, 90.0)

# Sigmoid defaults, frozen by the calibration tests (see README, "Calibration").
DEFAULT_AMPLITUDE_MAX = 15.0
DEFAULT_AMPLITUDE_MIN = 0.05
DEFAULT_MIDPOINT_AGE = 32.0
DEFAULT_SLOPE = 0.10

DEFAULT_FWHM = {6.0: 0.15, 3.0: 0.70, 2.0: 1.08}


def diopter_to_depth(d):
    """Optical power (D) to distance (m)."""
    arr = np.asarray(d, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError("diopter value must be positive")
    out = 1.0 / arr
    return float(out) if out.ndim == 0 else out


def depth_to_diopter(z):
    arr = np.asarray(z, dtype=float)
    if np.any(~(arr > 0)):
        raise DomainError("distance must be positive")
    out = 1.0 / arr
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class AccommodationModel:
    """Maximum accommodative amplitude as a decreasing sigmoid of age.

    ``A(age) = amplitude_min + (amplitude_max - amplitude_min) / (1 + exp(slope * (age - midpoint_age)))``

    ``rest_offset_d`` is added to every amplitude; it stays 0 unless a
    relaxed-eye power offset is wanted.
    """

    amplitude_max: float = DEFAULT_AMPLITUDE_MAX
    midpoint_age: float = DEFAULT_MIDPOINT_AGE
    slope: float = DEFAULT_SLOPE
    amplitude_min: float = DEFAULT_AMPLITUDE_MIN
    rest_offset_d: float = 0.0

    def __post_init__(self):
        if not (0 < self.amplitude_max <= 15.0):
            raise ConfigError("amplitude_max must lie in (0, 15] D")
        if not (0 <= self.amplitude_min < self.amplitude_max):
            raise ConfigError("amplitude_min must lie in [0, amplitude_max)")
        if not self.slope > 0:
            raise ConfigError("slope must be positive for a decreasing amplitude")
        if self.rest_offset_d < 0:
            raise ConfigError("rest_offset_d must be nonnegative")

    def amplitude(self, age):
        a = np.asarray(age, dtype=float)
        lo, hi = AGE_DOMAIN
        if np.any((a < lo) | (a > hi)) or np.any(np.isnan(a)):
            raise DomainError(f"age must lie in [{lo:g}, {hi:g}] years")
        span = self.amplitude_max - self.amplitude_min
        # exp argument is bounded by slope*85, fine for any sane slope
        out = self.amplitude_min + span / (1.0 + np.exp(self.slope * (a - self.midpoint_age)))
        out = out + self.rest_offset_d
        return float(out) if out.ndim == 0 else out


def max_accommodation(age, model: AccommodationModel | None = None):
    return (model or AccommodationModel()).amplitude(age)


@dataclass(frozen=True)
class PupilSetting:
    diameter: float
    dof_fwhm: float

    def __post_init__(self):
        if not self.dof_fwhm > 0:
            raise ConfigError("dof_fwhm must be positive")

    @property
    def sigma(self) -> float:
        return self.dof_fwhm * FWHM_TO_SIGMA


@dataclass(frozen=True)
class DofTable:
    """Pupil diameter (mm) to DoF FWHM (D). Only the configured diameters are valid."""

    fwhm: dict = field(default_factory=lambda: dict(DEFAULT_FWHM))

    def __post_init__(self):
        for k, v in self.fwhm.items():
            if not v > 0:
                raise ConfigError(f"DoF FWHM for {k} mm must be positive")

    def lookup(self, pupil_mm: float) -> float:
        for k, v in self.fwhm.items():
            if math.isclose(float(k), float(pupil_mm), abs_tol=1e-9):
                return float(v)
        raise ConfigError(
            f"unsupported pupil diameter {pupil_mm:g} mm; configured: "
            + ", ".join(f"{float(k):g}" for k in sorted(self.fwhm))
        )

    def pupil(self, pupil_mm: float) -> PupilSetting:
        return PupilSetting(float(pupil_mm), self.lookup(pupil_mm))


def dof_fwhm(pupil_mm: float, table: DofTable | None = None) -> float:
    return (table or DofTable()).lookup(pupil_mm)


def geometric_dof_fwhm(pupil_mm: float, ref_pupil_mm: float = 6.0, ref_fwhm: float = 0.15) -> float:
    """Blur-circle scaling: DoF inversely proportional to pupil diameter.

    A reference value only; the shipped DoF table is calibrated instead.
    """
    if not (pupil_mm > 0 and ref_pupil_mm > 0 and ref_fwhm > 0):
        raise DomainError("pupil diameters and reference FWHM must be positive")
    return ref_fwhm * ref_pupil_mm / pupil_mm


def focal_plane_diopters(amplitude: float, step: float, d_stop: float) -> np.ndarray:
    """Planes at amplitude, amplitude - step, ... down to (and including) d_stop."""
    if not step > 0:
        raise DomainError("step must be positive")
    if amplitude < d_stop:
        return np.empty(0)
    # tolerance keeps an exact landing on d_stop inside the list
    k = int(math.floor((amplitude - d_stop) / step + 1e-9))
    return amplitude - step * np.arange(k + 1)


def iterate_focal_planes(age, pupil_mm, z_stop=10.0, model=None, dof=None) -> list:
    """Distances (cm) of the eye's distinguishable focal planes, nearest first.

    The first plane sits at the near point 1/A(age); each further plane is one
    DoF step farther in diopters. Iteration stops once a plane would lie beyond
    ``z_stop`` metres.
    """
    if not z_stop > 0:
        raise DomainError("z_stop must be positive")
    amp = max_accommodation(age, model)
    d = focal_plane_diopters(amp, dof_fwhm(pupil_mm, dof), 1.0 / z_stop)
    return [100.0 / x for x in d]

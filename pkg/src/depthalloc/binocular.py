"""Stereoscopic depth-level quantization and Ogle horopter traces."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError, GeometricLimitError

ARCMIN = math.pi / (180.0 * 60.0)

# Hering-Hillebrand deviation measured at five fixation distances (m, H).
H_TABLE = ((4.5, 0.108), (7.3, 0.068), (2.37, 0.203), (1.29, 0.366), (5.5, 0.086))

# Illustrative mean IPDs (mm) spanning the between-group range of anthropometric
# surveys; replace with a measured table when one is available.
DEFAULT_IPD_TABLE_MM = (60.9, 62.4, 63.6, 64.7, 65.8)


@dataclass(frozen=True)
class StereoParams:
    ipd: float = 0.064
    acuity: float = 0.5 * ARCMIN
    z_start: float = 0.25
    z_stop: float = 15.0
    vernier_floor: float = 100e-6

    def __post_init__(self):
        if not self.ipd > 0:
            raise ConfigError("IPD must be positive")
        if not self.acuity > 0:
            raise ConfigError("acuity must be positive")
        if not 0 < self.z_start < self.z_stop:
            raise ConfigError("need 0 < z_start < z_stop")
        if self.vernier_floor < 0:
            raise ConfigError("vernier floor must be nonnegative")

    @property
    def z_limit(self) -> float:
        """Distance at which a single acuity step reaches infinity."""
        return self.ipd / self.acuity

    @classmethod
    def from_units(cls, ipd_mm=64.0, acuity_arcmin=0.5, z_start_m=0.25, z_stop_m=15.0, vernier_floor_um=100.0):
        return cls(ipd_mm * 1e-3, acuity_arcmin * ARCMIN, z_start_m, z_stop_m, vernier_floor_um * 1e-6)


def disparity_angle(z, dz, ipd):
    """Small-angle disparity between depths z and z + dz."""
    return dz * ipd / (z * z + z * dz)


def disparity_step(z, params: StereoParams):
    """Depth increment whose disparity equals the acuity: dz = d z^2 / (I - d z)."""
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0):
        raise DomainError("distance must be positive")
    d, I = params.acuity, params.ipd
    if np.any(d * z >= I):
        raise GeometricLimitError("disparity step undefined at or beyond the geometric limit", I / d)
    out = d * z * z / (I - d * z)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class HoropterLevels:
    distances: np.ndarray
    steps: np.ndarray  # step taken from each level to the next candidate
    floor_binds_below: float | None = None  # distance where the vernier floor stops binding
    floor_applied: bool = False

    @property
    def count(self) -> int:
        return int(self.distances.size)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "z_m", "delta_z_m"])
            for i, (z, dz) in enumerate(zip(self.distances, self.steps)):
                w.writerow([i, f"{z:.12g}", f"{dz:.12g}"])


def floor_crossover(params: StereoParams) -> float:
    """Distance below which the disparity step is smaller than the vernier floor."""
    d, I, f = params.acuity, params.ipd, params.vernier_floor
    # d z^2 = f (I - d z)  ->  d z^2 + f d z - f I = 0
    return (-f * d + math.sqrt((f * d) ** 2 + 4 * d * f * I)) / (2 * d)


def iterate_horopters(params: StereoParams, apply_floor: bool = False, to_limit: bool = False,
                      max_levels: int = 10_000_000) -> HoropterLevels:
    """Levels from z_start, each one disparity step beyond the last, up to z_stop.

    ``to_limit`` ignores z_stop and steps until the next step would cross the
    geometric limit I/delta. With ``apply_floor`` steps are at least the vernier floor.
    """
    if not to_limit and params.z_stop >= params.z_limit:
        raise GeometricLimitError("z_stop lies beyond the geometric limit", params.z_limit)
    d, I = params.acuity, params.ipd
    floor = params.vernier_floor if apply_floor else 0.0
    zs, steps = [], []
    z = params.z_start
    while len(zs) < max_levels:
        if d * z >= I:
            break
        zs.append(z)
        dz = max(d * z * z / (I - d * z), floor)
        steps.append(dz)
        nz = z + dz
        if (not to_limit and nz > params.z_stop) or not np.isfinite(nz):
            break
        z = nz
    binds = floor_crossover(params) if apply_floor and floor > 0 else None
    return HoropterLevels(np.array(zs), np.array(steps), binds, apply_floor)


def continuous_count(params: StereoParams, z_start=None, z_stop=None) -> float:
    """Integral of 1/dz over [z_start, z_stop]: (I/d)(1/z0 - 1/z1) - ln(z1/z0)."""
    z0 = params.z_start if z_start is None else z_start
    z1 = params.z_stop if z_stop is None else z_stop
    d, I = params.acuity, params.ipd
    return (I / d) * (1.0 / z0 - 1.0 / z1) - math.log(z1 / z0)


def ipd_sensitivity(counts) -> float:
    """Relative spread (max - min) / mean of level counts over an IPD set."""
    c = np.asarray(list(counts), dtype=float)
    if c.size < 2:
        raise DomainError("need at least two IPD values")
    return float((c.max() - c.min()) / c.mean())


def counts_for_ipds(ipds_mm, base: StereoParams, apply_floor=False) -> list:
    out = []
    for ipd in ipds_mm:
        p = StereoParams(ipd * 1e-3, base.acuity, base.z_start, base.z_stop, base.vernier_floor)
        out.append(iterate_horopters(p, apply_floor).count)
    return out


@dataclass(frozen=True)
class HModel:
    """H as a straight line in dioptric distance: H = slope / z + intercept."""

    slope: float
    intercept: float
    rms: float

    def __call__(self, z):
        return self.slope / np.asarray(z, dtype=float) + self.intercept


def fit_H(table=H_TABLE) -> HModel:
    pts = np.asarray(table, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] != 2:
        raise DomainError("need at least two (z, H) pairs")
    if np.any(pts[:, 0] <= 0):
        raise DomainError("fixation distances must be positive")
    x = 1.0 / pts[:, 0]
    if np.ptp(x) == 0:
        raise DomainError("all pairs share one dioptric distance; slope undefined")
    slope, intercept = np.polyfit(x, pts[:, 1], 1)
    resid = pts[:, 1] - (slope * x + intercept)
    return HModel(float(slope), float(intercept), float(np.sqrt(np.mean(resid ** 2))))


@dataclass(frozen=True)
class HoropterTrace:
    fixation_z: float
    H: float
    a: float
    points: np.ndarray  # (k, 2) of (x, y)
    omitted: int = 0  # samples dropped for a negative discriminant

    def residuals(self) -> np.ndarray:
        return ogle_residual(self.points[:, 0], self.points[:, 1], self.fixation_z, self.a, self.H)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x_m", "y_m"])
            for x, y in self.points:
                w.writerow([f"{x:.12g}", f"{y:.12g}"])


def ogle_coefficients(x, z, a, H, b=None):
    """Quadratic coefficients in y of the Ogle conic at abscissa x.

    The default b = z / (1 + Hz/2a) is the value that puts the fixation point
    (0, z) on the conic for every H; it equals z when H = 0.
    """
    k = H * z / (2.0 * a)
    b = z / (1.0 + k) if b is None else b
    A = 1.0 + k
    B = -((z * z - a * a) / b + H * a)
    C = np.asarray(x, dtype=float) ** 2 * (1.0 - k) - a * a + H * a * z / 2.0
    return A, B, C


def ogle_residual(x, y, z, a, H, b=None):
    A, B, C = ogle_coefficients(x, z, a, H, b)
    y = np.asarray(y, dtype=float)
    return A * y * y + B * y + C


def horopter_trace(fixation_z: float, ipd: float, H: float, x_samples: int = 201,
                   x_extent: float | None = None) -> HoropterTrace:
    """Points of the Ogle horopter for fixation at (0, z), eyes at (+-a, 0).

    For each x the larger root in y is kept (the branch through the fixation point).
    """
    z, a = float(fixation_z), ipd / 2.0
    if not ipd > 0:
        raise DomainError("IPD must be positive")
    if not z > a:
        raise DomainError("fixation distance must exceed half the IPD")
    if x_samples < 1:
        raise DomainError("need at least one sample")
    if x_extent is None:
        x_extent = 0.5 * (z + a * a / z)  # radius of the H = 0 circle
    xs = np.linspace(-x_extent, x_extent, x_samples) if x_samples > 1 else np.zeros(1)
    xs = 0.5 * (xs - xs[::-1])  # exactly antisymmetric, so the middle sample is x = 0
    # evaluate |x| so that +x and -x get identical y
    A, B, C = ogle_coefficients(np.abs(xs), z, a, H)
    pts = []
    omitted = 0
    for x, c in zip(xs, np.atleast_1d(C)):
        if abs(A) < 1e-15:
            if B == 0:
                omitted += 1
                continue
            pts.append((x, -c / B))
            continue
        disc = B * B - 4 * A * c
        if disc < 0:
            omitted += 1
            continue
        sq = math.sqrt(disc)
        # numerically stable pair of roots
        q = -0.5 * (B + math.copysign(sq, B)) if B != 0 else -0.5 * sq
        r1 = q / A
        r2 = c / q if q != 0 else r1
        pts.append((x, max(r1, r2)))
    return HoropterTrace(z, float(H), a, np.array(pts).reshape(-1, 2), omitted)


def vieth_muller_circle(z: float, a: float):
    """Center (0, yc) and radius of the circle through (+-a, 0) and (0, z)."""
    yc = 0.5 * (z - a * a / z)
    return yc, 0.5 * (z + a * a / z)


def vertical_horopter(z: float, samples: int = 91, max_elevation_deg: float = 45.0) -> np.ndarray:
    """Vertical profile: sphere of radius z about the IPD midpoint, as (y, v) pairs."""
    if not z > 0:
        raise DomainError("distance must be positive")
    phi = np.radians(np.linspace(-max_elevation_deg, max_elevation_deg, samples))
    return np.column_stack([z * np.cos(phi), z * np.sin(phi)])

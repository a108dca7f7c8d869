"""Importance weights over the (age x depth) domain."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
from scipy import stats

from .errors import ConfigError, DomainError, ParseError
from .grid import Grid

AGE_SPAN = (10.0, 70.0)
BUNDLED_POPULATION = "us_population_2019.csv"


def gamma_weight(age, k: float, theta: float):
    """Gamma(k, theta) density at ``age``."""
    if not (k > 0 and theta > 0):
        raise DomainError("gamma shape and scale must be positive")
    a = np.asarray(age, dtype=float)
    if np.any(a < 0):
        raise DomainError("age must be nonnegative")
    out = stats.gamma.pdf(a, k, scale=theta)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class AgeDistribution:
    kind: str = "uniform"
    k: float = 3.0
    theta: float = 10.0
    # (age_low, age_high, density) with density = count / bin width
    table: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.kind not in ("uniform", "gamma", "table"):
            raise ConfigError(f"unknown age distribution kind {self.kind!r}")
        if self.kind == "gamma" and not (self.k > 0 and self.theta > 0):
            raise ConfigError("gamma shape and scale must be positive")
        if self.kind == "table" and not self.table:
            raise ConfigError("table age distribution needs at least one bin")

    def weights(self, ages) -> np.ndarray:
        """Per-row weights, normalized to sum 1 over the supplied ages."""
        a = np.asarray(ages, dtype=float)
        if self.kind == "uniform":
            w = np.ones_like(a)
        elif self.kind == "gamma":
            w = gamma_weight(a, self.k, self.theta) * np.ones_like(a)
        else:
            w = np.zeros_like(a)
            top = max(hi for _, hi, _ in self.table)
            for lo, hi, dens in self.table:
                inside = (a >= lo) & ((a < hi) | ((hi == top) & (a == hi)))
                w[inside] = dens
        s = w.sum()
        if not s > 0:
            raise DomainError("age distribution has no mass on the grid ages")
        return w / s


def _parse_number(text, lineno, name):
    try:
        return float(text)
    except (TypeError, ValueError):
        raise ParseError(f"{name} {text!r} is not a number", lineno) from None


def parse_population_table(text: str, span=AGE_SPAN) -> AgeDistribution:
    rows = []
    reader = csv.reader(io.StringIO(text))
    header_seen = False
    for lineno, rec in enumerate(reader, start=1):
        if not rec or not "".join(rec).strip() or rec[0].lstrip().startswith("#"):
            continue
        if not header_seen:
            names = [c.strip() for c in rec]
            if names != ["age_low", "age_high", "count"]:
                raise ParseError("expected header age_low,age_high,count", lineno)
            header_seen = True
            continue
        if len(rec) != 3:
            raise ParseError(f"expected 3 fields, got {len(rec)}", lineno)
        lo = _parse_number(rec[0], lineno, "age_low")
        hi = _parse_number(rec[1], lineno, "age_high")
        cnt = _parse_number(rec[2], lineno, "count")
        if not hi > lo:
            raise ParseError("age_high must exceed age_low", lineno)
        if cnt < 0:
            raise ParseError("negative count", lineno)
        rows.append((lo, hi, cnt, lineno))
    if not header_seen:
        raise ParseError("missing header")
    rows.sort(key=lambda r: r[0])
    for prev, cur in zip(rows, rows[1:]):
        if cur[0] < prev[1]:
            raise ParseError(f"bin [{cur[0]:g}, {cur[1]:g}) overlaps [{prev[0]:g}, {prev[1]:g})", cur[3])
    lo_span, hi_span = span
    clipped = []
    for lo, hi, cnt, lineno in rows:
        if hi <= lo_span or lo > hi_span:
            continue
        clipped.append((lo, hi, cnt / (hi - lo), lineno))
    if not clipped or sum(c for _, _, c, _ in clipped) <= 0:
        raise ParseError(f"no bin with positive count covers [{lo_span:g}, {hi_span:g}]")
    if clipped[0][0] > lo_span:
        raise ParseError(f"ages below {clipped[0][0]:g} are not covered", clipped[0][3])
    for prev, cur in zip(clipped, clipped[1:]):
        if cur[0] > prev[1]:
            raise ParseError(f"gap between {prev[1]:g} and {cur[0]:g}", cur[3])
    if clipped[-1][1] < hi_span:
        raise ParseError(f"ages above {clipped[-1][1]:g} are not covered", clipped[-1][3])
    return AgeDistribution(kind="table", table=tuple((lo, hi, d) for lo, hi, d, _ in clipped))


def load_population_table(source=None) -> AgeDistribution:
    """Read an ``age_low,age_high,count`` CSV; None loads the bundled US table."""
    if source is None:
        text = resources.files("depthalloc.data").joinpath(BUNDLED_POPULATION).read_text()
    else:
        with open(source, newline="") as fh:
            text = fh.read()
    return parse_population_table(text)


@dataclass(frozen=True)
class DepthEmphasis:
    """Emphasis over the depth axis; ``mean``/``sd`` are in D or in metres."""

    kind: str = "none"
    mean: float = 0.0
    sd: float = 1.0

    def __post_init__(self):
        if self.kind not in ("none", "gaussian_diopter", "gaussian_depth"):
            raise ConfigError(f"unknown depth emphasis kind {self.kind!r}")
        if self.kind != "none" and not self.sd > 0:
            raise ConfigError("emphasis sd must be positive")

    def weights(self, diopters) -> np.ndarray:
        d = np.asarray(diopters, dtype=float)
        if self.kind == "none":
            return np.ones_like(d)
        x = d if self.kind == "gaussian_diopter" else 1.0 / d
        return np.exp(-0.5 * ((x - self.mean) / self.sd) ** 2)


@dataclass(frozen=True, eq=False)
class WeightField:
    values: np.ndarray  # (age_rows, depth_cols)
    age_vector: np.ndarray
    depth_vector: np.ndarray
    grid: Grid

    def pixel_weights(self) -> np.ndarray:
        """Length-p vector in (age, depth, height) order, constant over height."""
        return np.repeat(self.values.reshape(-1), self.grid.height_bins)


def build_weight_field(ages: AgeDistribution, depth: DepthEmphasis, grid: Grid) -> WeightField:
    a = ages.weights(grid.ages)
    d = depth.weights(grid.diopters)
    a = a / a.max() if a.max() > 0 else a
    d = d / d.max() if d.max() > 0 else d
    vals = np.outer(a, d)
    peak = vals.max()
    if not peak > 0:
        raise DomainError("weight field is identically zero")
    vals = vals / peak
    return WeightField(vals, a, d, grid)

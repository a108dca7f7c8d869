"""Hypograph indicator matrices, condensing, and coverage error.

Pixels are ordered (age row, depth column, height bin). A pixel belongs to the
hypograph of knoll i when the midpoint of its height bin lies on or below the
knoll's value in that cell. Rows of the indicator matrix are stored bit-packed
(knoll 0 is the most significant bit of byte 0), so byte-wise lexicographic
order of packed rows is the lexicographic order of the binary patterns.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .errors import ConfigError, DomainError, GridMismatchError
from .grid import Grid
from .optics import AccommodationModel, DofTable, focal_plane_diopters
from .train import KnollTrain, train_from_centers
from .weighting import WeightField

WEIGHT_MODES = ("measure", "profile-scale")


# ---------------------------------------------------------------- containers

@dataclass(frozen=True, eq=False)
class HypographMatrix:
    """Binary p x n matrix, bit-packed by row, with a weight per pixel."""

    packed: np.ndarray  # (p, ceil(n/8)) uint8
    n: int
    pixel_weights: np.ndarray
    grid: Grid | None = None

    @property
    def p(self) -> int:
        return self.packed.shape[0]

    def dense(self) -> np.ndarray:
        return unpack_rows(self.packed, self.n)

    @property
    def entries(self) -> sparse.csc_matrix:
        return sparse.csc_matrix(self.dense().astype(np.int8))

    def column_popcount(self) -> np.ndarray:
        return self.dense().sum(axis=0)


@dataclass(frozen=True, eq=False)
class CondensedMatrix:
    """Distinct row patterns of a hypograph matrix with multiplicities.

    ``counts[j]`` is the number of pixels in super-pixel j and ``u[j]`` their
    summed weight. With unit pixel weights ``u == counts``.
    """

    packed: np.ndarray
    n: int
    counts: np.ndarray
    u: np.ndarray

    @property
    def p_c(self) -> int:
        return self.packed.shape[0]

    @property
    def patterns(self) -> np.ndarray:
        return unpack_rows(self.packed, self.n)

    @property
    def entries(self) -> np.ndarray:
        """Row-sums of identical rows: multiplicity times the binary pattern."""
        return self.counts[:, None] * self.patterns.astype(np.int64)

    @property
    def total_weight(self) -> float:
        return float(self.u.sum())

    def pattern_csr(self) -> sparse.csr_matrix:
        return sparse.csr_matrix(self.patterns.astype(np.float64))

    def objective(self, selection) -> float:
        return covered_weight(self, selection)

    def to_triplets(self, path, u_path=None):
        """Write nonzero (row, col) pairs; the u vector goes to a sidecar file."""
        rows, cols = np.nonzero(self.patterns)
        with open(path, "w") as fh:
            fh.write("row,col\n")
            for r, c in zip(rows.tolist(), cols.tolist()):
                fh.write(f"{r},{c}\n")
        u_path = u_path or f"{path}.u"
        with open(u_path, "w") as fh:
            fh.write("row,count,u\n")
            for j, (cnt, w) in enumerate(zip(self.counts.tolist(), self.u.tolist())):
                fh.write(f"{j},{cnt},{w!r}\n")
        return path, u_path


def unpack_rows(packed: np.ndarray, n: int) -> np.ndarray:
    if packed.shape[0] == 0:
        return np.zeros((0, n), dtype=bool)
    return np.unpackbits(packed, axis=1, count=n).astype(bool)


def pack_rows(dense) -> np.ndarray:
    d = np.asarray(dense, dtype=bool)
    if d.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    return np.packbits(d, axis=1)


def hypograph_from_dense(matrix, pixel_weights=None) -> HypographMatrix:
    """Wrap an explicit 0/1 matrix (tests, small worked examples)."""
    m = np.asarray(matrix)
    if m.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    if not np.all((m == 0) | (m == 1)):
        raise ValueError("indicator entries must be 0 or 1")
    w = np.ones(m.shape[0]) if pixel_weights is None else np.asarray(pixel_weights, dtype=float)
    if w.shape != (m.shape[0],) or np.any(w < 0):
        raise ValueError("pixel weights must be a nonnegative vector, one per row")
    return HypographMatrix(pack_rows(m), m.shape[1], w)


# ---------------------------------------------------------------- measures

def effective_values(train: KnollTrain, weights: WeightField | None, weight_mode: str):
    if weight_mode not in WEIGHT_MODES:
        raise ConfigError(f"weight_mode must be one of {WEIGHT_MODES}")
    if weights is not None:
        train.grid.require_same(weights.grid, "weight field")
    if weight_mode == "profile-scale" and weights is not None:
        return train.values * weights.values[None, :, :]
    return train.values


def cell_weights(grid: Grid, weights: WeightField | None, weight_mode: str = "measure") -> np.ndarray:
    """(age_rows, depth_cols) weight of one pixel of each cell, summing to the box measure.

    The depth axis is integrated in metres; each height bin gets 1/height_bins.
    """
    if weight_mode not in WEIGHT_MODES:
        raise ConfigError(f"weight_mode must be one of {WEIGHT_MODES}")
    base = np.broadcast_to(grid.depth_measure / grid.height_bins, (grid.age_rows, grid.depth_cols))
    if weights is not None and weight_mode == "measure":
        grid.require_same(weights.grid, "weight field")
        return base * weights.values
    return np.array(base)


def bins_covered(values, height_bins: int) -> np.ndarray:
    """Number of midpoint height bins at or below each value."""
    v = np.clip(np.asarray(values, dtype=float), 0.0, 1.0)
    # midpoint (h + 1/2)/H <= v  <=>  h <= vH - 1/2
    return np.clip(np.floor(v * height_bins + 0.5), 0, height_bins).astype(np.int64)


def union_coverage(values: np.ndarray, grid: Grid, cw: np.ndarray, indices=None) -> float:
    """Covered weight of the union of the chosen knolls, evaluated cell by cell.

    Independent of the indicator matrix: it uses the pointwise maximum of the
    profiles, which is what the hypograph union encodes.
    """
    v = values if indices is None else values[np.asarray(sorted(indices), dtype=int)]
    if v.shape[0] == 0:
        return 0.0
    top = v.max(axis=0)
    return float((bins_covered(top, grid.height_bins) * cw).sum())


def box_weight(grid: Grid, cw: np.ndarray) -> float:
    return float(cw.sum() * grid.height_bins)


# ---------------------------------------------------------------- rasterize / condense

def _check_train_grid(train: KnollTrain, grid: Grid):
    if not train.grid.same_as(grid):
        raise GridMismatchError("train was sampled on a different grid")


def _row_bits(vals_row: np.ndarray, heights: np.ndarray) -> np.ndarray:
    """Packed pattern rows for one age row: vals_row is (n, C); output (C*H, nbytes)."""
    bits = vals_row.T[:, None, :] >= heights[None, :, None]  # (C, H, n)
    return np.packbits(bits.reshape(-1, vals_row.shape[0]), axis=1)


def rasterize(train: KnollTrain, grid: Grid, weights: WeightField | None = None,
              weight_mode: str = "measure") -> HypographMatrix:
    """Full indicator matrix. Memory grows as p*n/8 bytes; meant for small grids."""
    _check_train_grid(train, grid)
    vals = effective_values(train, weights, weight_mode)
    cw = cell_weights(grid, weights, weight_mode)
    h = grid.height_midpoints
    blocks = [_row_bits(vals[:, r, :], h) for r in range(grid.age_rows)]
    packed = np.concatenate(blocks, axis=0) if blocks else np.zeros((0, (train.n + 7) // 8), np.uint8)
    pw = np.repeat(cw.reshape(-1), grid.height_bins)
    return HypographMatrix(packed, train.n, pw, grid)


def _group(packed: np.ndarray, weights: np.ndarray, counts: np.ndarray | None = None):
    if packed.shape[0] == 0:
        return packed, np.zeros(0, np.int64), np.zeros(0)
    packed = np.ascontiguousarray(packed)
    nb = packed.shape[1]
    # a void view compares rows with memcmp, i.e. byte-wise lexicographic order
    keys = packed.view(np.dtype((np.void, nb))).reshape(-1)
    uk, inv = np.unique(keys, return_inverse=True)
    uniq = uk.view(np.uint8).reshape(-1, nb)
    inv = inv.reshape(-1)
    cnt = np.bincount(inv, weights=counts, minlength=uniq.shape[0])
    u = np.bincount(inv, weights=weights, minlength=uniq.shape[0])
    return uniq, np.rint(cnt).astype(np.int64), u


def condense(m: HypographMatrix) -> CondensedMatrix:
    """Merge identical rows; output rows are sorted lexicographically by pattern."""
    uniq, cnt, u = _group(m.packed, m.pixel_weights)
    return CondensedMatrix(uniq, m.n, cnt, u)


def condense_train(train: KnollTrain, grid: Grid | None = None, weights: WeightField | None = None,
                   weight_mode: str = "measure") -> CondensedMatrix:
    """condense(rasterize(...)) computed one age row at a time."""
    grid = grid or train.grid
    _check_train_grid(train, grid)
    vals = effective_values(train, weights, weight_mode)
    cw = cell_weights(grid, weights, weight_mode)
    h = grid.height_midpoints
    parts_p, parts_c, parts_u = [], [], []
    for r in range(grid.age_rows):
        bits = _row_bits(vals[:, r, :], h)
        pw = np.repeat(cw[r], grid.height_bins)
        up, uc, uu = _group(bits, pw)
        parts_p.append(up)
        parts_c.append(uc)
        parts_u.append(uu)
    packed = np.concatenate(parts_p, axis=0)
    cnt = np.concatenate(parts_c).astype(float)
    u = np.concatenate(parts_u)
    uniq, c2, u2 = _group(packed, u, cnt)
    return CondensedMatrix(uniq, train.n, c2, u2)


# ---------------------------------------------------------------- objective

def selection_mask(selection, n: int) -> np.ndarray:
    if hasattr(selection, "alpha"):
        a = np.asarray(selection.alpha, dtype=float)
        if a.shape != (n,):
            raise DomainError("selection length does not match the matrix")
        return a > 0.5
    mask = np.zeros(n, dtype=bool)
    idx = np.asarray(list(selection), dtype=int)
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise DomainError("selection index out of range")
    mask[idx] = True
    return mask


def covered_rows(cm: CondensedMatrix, mask: np.ndarray) -> np.ndarray:
    if not mask.any():
        return np.zeros(cm.p_c, dtype=bool)
    sel = np.packbits(mask)
    return np.any(cm.packed & sel[None, :], axis=1)


def covered_weight(cm: CondensedMatrix, selection) -> float:
    """Sum of u over super-pixels hit by at least one selected knoll."""
    cov = covered_rows(cm, selection_mask(selection, cm.n))
    return float(cm.u[cov].sum())


def coverage_error(selection, m: CondensedMatrix, total_weight: float | None = None) -> float:
    """Uncovered fraction of the box for the selected knolls."""
    total = m.total_weight if total_weight is None else float(total_weight)
    if not total > 0:
        raise DomainError("total weight must be positive")
    return 1.0 - covered_weight(m, selection) / total


# ---------------------------------------------------------------- intrinsic error

@dataclass(frozen=True)
class IntrinsicSpec:
    """How the eye's own quantization is laid out for the intrinsic error.

    Planes start at the near point of ``reference_age`` and step by the DoF of
    ``step_pupil_mm`` until they pass ``z_stop_m``; they are then rendered with
    the profile width of the pupil under evaluation.
    """

    reference_age: float = 10.0
    step_pupil_mm: float = 6.0
    z_stop_m: float = 10.0


def intrinsic_planes(model: AccommodationModel, dof: DofTable, spec: IntrinsicSpec) -> np.ndarray:
    amp = model.amplitude(spec.reference_age)
    return focal_plane_diopters(amp, dof.lookup(spec.step_pupil_mm), 1.0 / spec.z_stop_m)


def intrinsic_error(pupil_mm, d_min, d_max, grid: Grid | None = None, model=None, dof=None,
                    spec: IntrinsicSpec | None = None, weights: WeightField | None = None,
                    weight_mode: str = "measure") -> float:
    """Coverage error left when every one of the eye's own focal planes is shown."""
    model = model or AccommodationModel()
    dof = dof or DofTable()
    spec = spec or IntrinsicSpec()
    if grid is None:
        from .grid import aligned_columns
        from .train import knoll_count
        grid = Grid.uniform(d_min, d_max, aligned_columns(knoll_count(d_min, d_max, 0.044)))
    elif not (np.isclose(grid.d_min, d_min) and np.isclose(grid.d_max, d_max)):
        raise GridMismatchError("grid range differs from the requested range")
    planes = intrinsic_planes(model, dof, spec)
    if planes.size == 0:
        return 1.0
    tr = train_from_centers(planes, pupil_mm, grid, model, dof)
    vals = effective_values(tr, weights, weight_mode)
    cw = cell_weights(grid, weights, weight_mode)
    return 1.0 - union_coverage(vals, grid, cw) / box_weight(grid, cw)

import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from depthalloc.coverage import (IntrinsicSpec, bins_covered, box_weight, cell_weights, condense,
                                 condense_train, coverage_error, covered_weight, hypograph_from_dense,
                                 intrinsic_error, rasterize, union_coverage)
from depthalloc.errors import DomainError, GridMismatchError
from depthalloc.grid import Grid
from depthalloc.optics import AccommodationModel, DofTable
from depthalloc.train import KnollTrain, build_train, train_from_centers
from depthalloc.weighting import AgeDistribution, DepthEmphasis, build_weight_field

from conftest import small_train

SMALL_ROWS = [[1, 1, 0]] * 3 + [[0, 1, 0]] * 2 + [[1, 1, 1]]


def _rows_with_u(cm):
    return sorted((tuple(int(x) for x in e), float(u)) for e, u in zip(cm.entries, cm.u))


def test_six_by_three_example():
    cm = condense(hypograph_from_dense(np.array(SMALL_ROWS)))
    assert cm.p_c == 3
    assert _rows_with_u(cm) == sorted([((3, 3, 0), 3.0), ((0, 2, 0), 2.0), ((1, 1, 1), 1.0)])
    # patterns come out in lexicographic order
    pats = [tuple(r) for r in cm.patterns]
    assert pats == sorted(pats)


def test_identical_and_distinct_rows():
    same = condense(hypograph_from_dense(np.ones((50, 4), dtype=int)))
    assert same.p_c == 1 and same.counts[0] == 50
    distinct = np.array(list(itertools.product([0, 1], repeat=5)))
    cm = condense(hypograph_from_dense(distinct[::-1]))
    assert cm.p_c == 32
    np.testing.assert_array_equal(cm.patterns, distinct)


def test_hypograph_input_validation():
    with pytest.raises(ValueError):
        hypograph_from_dense(np.array([[0, 2]]))
    with pytest.raises(ValueError):
        hypograph_from_dense(np.array([[0, 1]]), pixel_weights=[-1.0])


def _const_train(grid, levels):
    vals = np.stack([np.full((grid.age_rows, grid.depth_cols), v) for v in levels])
    c = np.linspace(grid.d_min, grid.d_max, len(levels))
    return KnollTrain(c, 0.1, vals, grid.d_min, grid.d_max, 0.1, grid)


def test_constant_knolls():
    g = Grid.uniform(0.5, 2.0, 9, 10, 12, 8)
    m = rasterize(_const_train(g, [1.0, 0.0]), g)
    dense = m.dense()
    assert dense[:, 0].all() and not dense[:, 1].any()
    cm = condense(m)
    assert coverage_error([0], cm) == pytest.approx(0.0, abs=1e-15)
    assert coverage_error([], cm) == 1.0
    assert coverage_error([1], cm) == 1.0


def test_single_gaussian_popcount_matches_riemann_sum(train_small):
    g = train_small.grid
    m = rasterize(train_small.subset([4]), g)
    per_cell = m.dense()[:, 0].reshape(g.age_rows, g.depth_cols, g.height_bins).sum(axis=2)
    v = train_small.values[4]
    assert np.all(np.abs(per_cell / g.height_bins - v) <= 0.5 / g.height_bins + 1e-12)
    np.testing.assert_array_equal(per_cell, bins_covered(v, g.height_bins))


def test_streamed_condensing_matches_full(train_small):
    full = condense(rasterize(train_small, train_small.grid))
    streamed = condense_train(train_small)
    np.testing.assert_array_equal(full.packed, streamed.packed)
    np.testing.assert_array_equal(full.counts, streamed.counts)
    np.testing.assert_allclose(full.u, streamed.u, rtol=1e-12)


def test_conservation(train_small):
    m = rasterize(train_small, train_small.grid)
    cm = condense(m)
    assert cm.u.sum() == pytest.approx(m.pixel_weights.sum(), rel=1e-12)
    assert cm.counts.sum() == m.p


def test_grid_mismatch(train_small):
    other = Grid.uniform(0.5, 3.0, 21, height_bins=16)
    with pytest.raises(GridMismatchError):
        rasterize(train_small, other)


def test_direct_union_oracle(train_small, condensed_small, rng):
    g = train_small.grid
    cw = cell_weights(g, None)
    total = box_weight(g, cw)
    assert condensed_small.total_weight == pytest.approx(total, rel=1e-12)
    for _ in range(30):
        k = int(rng.integers(0, train_small.n + 1))
        sel = rng.choice(train_small.n, size=k, replace=False)
        direct = union_coverage(train_small.values, g, cw, sel)
        assert covered_weight(condensed_small, sel) == pytest.approx(direct, rel=1e-10, abs=1e-12)


def test_weighted_union_oracle(train_small, rng):
    g = train_small.grid
    wf = build_weight_field(AgeDistribution("gamma", 3, 10), DepthEmphasis("gaussian_diopter", 1.5, 0.5), g)
    for mode in ("measure", "profile-scale"):
        cm = condense_train(train_small, weights=wf, weight_mode=mode)
        cw = cell_weights(g, wf, mode)
        vals = train_small.values * (wf.values[None] if mode == "profile-scale" else 1.0)
        sel = rng.choice(train_small.n, size=3, replace=False)
        assert covered_weight(cm, sel) == pytest.approx(union_coverage(vals, g, cw, sel), rel=1e-10)


def test_selection_validation(condensed_small):
    with pytest.raises(DomainError):
        coverage_error([condensed_small.n], condensed_small)
    with pytest.raises(DomainError):
        coverage_error([0], condensed_small, total_weight=0.0)


@given(arrays(np.int8, st.tuples(st.integers(1, 300), st.integers(1, 12)), elements=st.integers(0, 1)),
       st.data())
def test_condensing_transparent(dense, data):
    p, n = dense.shape
    w = data.draw(arrays(np.float64, p, elements=st.floats(0, 5)))
    m = hypograph_from_dense(dense, w)
    cm = condense(m)
    assert cm.u.sum() == pytest.approx(w.sum(), rel=1e-12, abs=1e-12)
    assert len({r.tobytes() for r in cm.packed}) == cm.p_c
    alpha = data.draw(arrays(np.bool_, n))
    direct = float(w[(dense[:, alpha] > 0).any(axis=1)].sum()) if alpha.any() else 0.0
    assert covered_weight(cm, np.flatnonzero(alpha)) == pytest.approx(direct, rel=1e-9, abs=1e-12)


def test_monotone_and_submodular(condensed_small, rng):
    n = condensed_small.n
    f = lambda s: covered_weight(condensed_small, sorted(s))
    for _ in range(100):
        perm = rng.permutation(n)
        k = int(rng.integers(2, n))
        big = set(perm[:k].tolist())
        small = set(perm[: int(rng.integers(0, k))].tolist())
        extra = int(perm[k])
        assert f(big | {extra}) >= f(big) - 1e-12
        assert f(small | {extra}) - f(small) >= f(big | {extra}) - f(big) - 1e-12


def test_height_refinement_stability():
    coarse = small_train(bins=16)
    fine = small_train(bins=32)
    for i in (0, 5, 10):
        a = 1 - coverage_error([i], condense_train(coarse))
        b = 1 - coverage_error([i], condense_train(fine))
        assert abs(a - b) < 1 / 16


def test_triplet_export(tmp_path):
    cm = condense(hypograph_from_dense(np.array(SMALL_ROWS)))
    t, u = cm.to_triplets(tmp_path / "pi.csv")
    lines = open(t).read().splitlines()
    assert lines[0] == "row,col" and len(lines) == 1 + int(cm.patterns.sum())
    assert open(u).read().splitlines()[0] == "row,count,u"


def test_intrinsic_single_plane_equals_single_knoll():
    g = Grid.uniform(0.5, 7.08, 201, height_bins=32)
    model = AccommodationModel()
    dof = DofTable({6.0: 100.0, 3.0: 0.75, 2.0: 1.08})  # one step covers everything: one plane
    err = intrinsic_error(3, 0.5, 7.08, g, model, dof)
    tr = train_from_centers([model.amplitude(10)], 3, g, model, dof)
    assert err == pytest.approx(coverage_error([0], condense_train(tr)), rel=1e-12)


def test_intrinsic_range_check():
    g = Grid.uniform(0.5, 7.08, 21, height_bins=8)
    with pytest.raises(GridMismatchError):
        intrinsic_error(3, 0.09, 7.08, g)


def test_intrinsic_no_planes_is_total_error():
    g = Grid.uniform(0.5, 7.08, 21, height_bins=8)
    spec = IntrinsicSpec(reference_age=10, step_pupil_mm=6, z_stop_m=0.01)  # stop beyond the near point
    assert intrinsic_error(3, 0.5, 7.08, g, spec=spec) == 1.0

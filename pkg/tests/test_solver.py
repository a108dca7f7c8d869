import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from depthalloc.coverage import condense, covered_weight, hypograph_from_dense
from depthalloc.errors import DomainError, SolverError, SolverTimeout
from depthalloc.solver import (AllocationProblem, LpModel, ReducedProgram, bounded_simplex, dual_bound,
                               equidistant_baseline, equidistant_targets, greedy_select, selection_record,
                               solve_lp, solve_mbp, sweep)
from depthalloc.solver.mbp import as_condensed

from instances import exhaustive, knoll_problem


@pytest.mark.parametrize("seed", range(25))
def test_matches_exhaustive(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 13))
    cm, dense = knoll_problem(rng, n)
    for T in range(1, min(4, n) + 1):
        sel = solve_mbp(AllocationProblem(cm, T))
        best, arg = exhaustive(dense, T)
        assert sel.objective == pytest.approx(best, abs=1e-9)
        assert sel.indices == arg
        assert solve_lp(AllocationProblem(cm, T)).objective >= sel.objective - 1e-7


def test_tie_break_prefers_lowest_indices():
    # four identical knolls: every pair is optimal, the canonical one is (0, 1)
    dense = np.array([[1, 1, 1, 1], [1, 1, 1, 1], [0, 0, 0, 0]])
    sel = solve_mbp(AllocationProblem(condense(hypograph_from_dense(dense)), 2))
    assert sel.indices == (0, 1)
    assert sel.certificate in ("lp_integral", "branch_and_bound")


def test_size_is_exactly_T_even_when_fewer_suffice():
    dense = np.array([[1, 0, 0], [1, 0, 0]])
    sel = solve_mbp(AllocationProblem(condense(hypograph_from_dense(dense)), 2))
    assert sel.indices == (0, 1)


def test_trivial_budgets(condensed_small):
    n = condensed_small.n
    assert solve_mbp(AllocationProblem(condensed_small, 0)).indices == ()
    assert solve_mbp(AllocationProblem(condensed_small, n)).indices == tuple(range(n))
    with pytest.raises(DomainError):
        AllocationProblem(condensed_small, n + 1)
    with pytest.raises(DomainError):
        AllocationProblem(condensed_small, -1)


def test_fractional_root_needs_branching():
    # one super-pixel per pair of four knolls; two knolls reach 5 of the 6 pairs,
    # while alpha = 1/2 everywhere covers all of them in the relaxation
    dense = np.array([[int(i in pair) for i in range(4)] for pair in itertools.combinations(range(4), 2)])
    p = AllocationProblem(condense(hypograph_from_dense(dense)), 2)
    lp = solve_lp(p)
    assert not lp.is_integral()
    assert lp.objective == pytest.approx(6.0)
    sel = solve_mbp(p)
    assert sel.certificate == "branch_and_bound"
    assert sel.indices == (0, 1) and sel.objective == 5.0


def test_hypograph_input_row_per_pixel(rng):
    cm, dense = knoll_problem(rng, 8)
    m = hypograph_from_dense(dense)
    a = solve_mbp(AllocationProblem(m, 3))
    b = solve_mbp(AllocationProblem(cm, 3))
    assert a.indices == b.indices
    assert as_condensed(m).p_c == m.p
    with pytest.raises(TypeError):
        as_condensed(dense)


@pytest.mark.parametrize("seed", range(10))
def test_simplex_agrees_with_highs(seed):
    rng = np.random.default_rng(100 + seed)
    cm, _ = knoll_problem(rng, int(rng.integers(3, 10)), cols=20, bins=8)
    rp = ReducedProgram.from_condensed(cm)
    T = int(rng.integers(1, cm.n))
    lo = np.zeros(cm.n)
    hi = np.ones(cm.n)
    if cm.n > 3:
        hi[int(rng.integers(cm.n))] = 0.0
        lo[int(rng.integers(cm.n))] = 1.0
    h = LpModel(rp, T, "highs").solve(lo, hi)
    s = LpModel(rp, T, "simplex").solve(lo, hi)
    if h is None:
        assert s is None
        return
    assert s.objective == pytest.approx(h.objective, rel=1e-8, abs=1e-8)
    # weak duality from each engine's own duals
    for sol in (h, s):
        assert dual_bound(rp, sol.duals, T, lo, hi) >= h.objective - 1e-7


def test_dual_bound_tight_at_root(condensed_small):
    rp = ReducedProgram.from_condensed(condensed_small)
    sol = LpModel(rp, 3).solve()
    lo, hi = np.zeros(rp.n), np.ones(rp.n)
    assert dual_bound(rp, sol.duals, 3, lo, hi) == pytest.approx(sol.objective, rel=1e-7)


def test_bounded_simplex_small_lp():
    # max x + y, x + 2y <= 4, 3x + y <= 6, 0 <= x, y <= 1.5
    r = bounded_simplex(np.array([1.0, 1.0]), np.array([[1.0, 2.0], [3.0, 1.0]]), np.array([4.0, 6.0]),
                        np.array([1.5, 1.5]))
    assert r.objective == pytest.approx(2.75, abs=1e-12)
    np.testing.assert_allclose(r.x, [1.5, 1.25], atol=1e-12)


def test_unknown_engine(condensed_small):
    with pytest.raises(SolverError):
        solve_mbp(AllocationProblem(condensed_small, 2), engine="cplex")


def test_simplex_engine_end_to_end(condensed_small):
    a = solve_mbp(AllocationProblem(condensed_small, 2), engine="simplex")
    b = solve_mbp(AllocationProblem(condensed_small, 2))
    assert a.indices == b.indices


def test_timeout_raises_with_exit_code(condensed_small):
    with pytest.raises(SolverTimeout) as exc:
        solve_mbp(AllocationProblem(condensed_small, 3), timeout_s=1e-12)
    assert exc.value.exit_code == 3


@given(st.integers(0, 10_000), st.integers(1, 4))
def test_greedy_and_random_never_beat_optimum(seed, T):
    rng = np.random.default_rng(seed)
    cm, _ = knoll_problem(rng, 10, cols=24, bins=8)
    p = AllocationProblem(cm, T)
    opt = solve_mbp(p)
    g = greedy_select(p)
    assert g.objective <= opt.objective + 1e-9
    assert g.objective >= (1 - 1 / np.e) * opt.objective - 1e-9
    rand = rng.choice(10, size=T, replace=False)
    assert covered_weight(cm, rand) <= opt.objective + 1e-9


def test_greedy_lowest_index_on_ties():
    dense = np.array([[1, 1, 0], [0, 0, 1]])
    sel = greedy_select(AllocationProblem(condense(hypograph_from_dense(dense)), 1))
    assert sel.indices == (0,) and sel.certificate == "baseline"


def test_equidistant_targets():
    np.testing.assert_allclose(equidistant_targets(0.5, 7.08, 1, "diopter"), [3.79])
    np.testing.assert_allclose(equidistant_targets(0.5, 7.08, 3, "diopter"), [0.5, 3.79, 7.08])
    z = 1 / equidistant_targets(0.5, 2.0, 3, "depth")
    np.testing.assert_allclose(z, [0.5, 1.25, 2.0])
    with pytest.raises(DomainError):
        equidistant_targets(0.5, 2.0, 0, "depth")
    with pytest.raises(DomainError):
        equidistant_targets(0.5, 2.0, 2, "log")


def test_equidistant_collapse(train_small):
    idx = equidistant_baseline(train_small, train_small.n + 5, "diopter")
    assert idx == tuple(range(train_small.n))
    assert equidistant_baseline(train_small, 2, "depth") == (0, train_small.n - 1)


def test_sweep_records(condensed_small, train_small):
    res = sweep(AllocationProblem(condensed_small, 1), [1, 2, 3])
    errs = [res[T].coverage_error for T in (1, 2, 3)]
    assert errs == sorted(errs, reverse=True)
    rec = selection_record(res[2], train_small.centers, 2)
    assert set(rec) == {"T", "mode", "indices", "centers_diopter", "depths_cm", "objective",
                        "coverage_error", "certificate"}
    with pytest.raises(DomainError):
        sweep(AllocationProblem(condensed_small, 1), [0])

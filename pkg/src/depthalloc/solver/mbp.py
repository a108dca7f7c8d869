"""Exact budgeted coverage: LP relaxation first, branch-and-bound when it is fractional.

Among equally good selections the canonical answer is the lexicographically
smallest index set of size exactly min(T, n); coverage never decreases when a
knoll is added, so such a set always exists.
"""
from __future__ import annotations

import heapq
import itertools
import time
from dataclasses import dataclass, field

import numpy as np

from ..coverage import CondensedMatrix, HypographMatrix, covered_rows, covered_weight
from ..errors import DomainError, SolverError, SolverTimeout
from .lp import LpModel, LpSolution, ReducedProgram, dual_bound

INTEGRALITY_TOL = 1e-6
CERTIFICATES = ("lp_integral", "branch_and_bound", "baseline")


def as_condensed(m) -> CondensedMatrix:
    """Accept a CondensedMatrix, or treat each row of a HypographMatrix as its own super-pixel."""
    if isinstance(m, CondensedMatrix):
        return m
    if isinstance(m, HypographMatrix):
        return CondensedMatrix(m.packed, m.n, np.ones(m.p, dtype=np.int64), np.asarray(m.pixel_weights, float))
    raise TypeError("expected a CondensedMatrix or HypographMatrix")


@dataclass(eq=False)
class AllocationProblem:
    condensed: CondensedMatrix
    budget: int
    total_weight: float | None = None
    _reduced: ReducedProgram | None = field(default=None, repr=False)

    def __post_init__(self):
        self.condensed = as_condensed(self.condensed)
        if int(self.budget) != self.budget or self.budget < 0:
            raise DomainError("budget T must be a nonnegative integer")
        self.budget = int(self.budget)
        if self.budget > self.n:
            raise DomainError(f"budget T={self.budget} exceeds the number of knolls n={self.n}")
        if self.total_weight is None:
            self.total_weight = self.condensed.total_weight
        if not self.total_weight > 0:
            raise DomainError("total weight must be positive")

    @property
    def n(self) -> int:
        return self.condensed.n

    @property
    def reduced(self) -> ReducedProgram:
        if self._reduced is None:
            self._reduced = ReducedProgram.from_condensed(self.condensed)
        return self._reduced

    def with_budget(self, T: int) -> "AllocationProblem":
        return AllocationProblem(self.condensed, T, self.total_weight, self._reduced)

    def objective(self, indices) -> float:
        return covered_weight(self.condensed, indices)

    def tolerance(self) -> float:
        return 1e-9 * max(1.0, float(self.condensed.u.sum()))


@dataclass(frozen=True, eq=False)
class Selection:
    indices: tuple
    alpha: np.ndarray
    objective: float
    coverage_error: float
    certificate: str
    lp_objective: float | None = None
    nodes: int = 0
    lp_solves: int = 0
    wall_ms: float = 0.0

    def __post_init__(self):
        if self.certificate not in CERTIFICATES:
            raise ValueError(f"unknown certificate {self.certificate!r}")

    @property
    def size(self) -> int:
        return len(self.indices)


def make_selection(problem: AllocationProblem, indices, certificate, **extra) -> Selection:
    idx = tuple(sorted(int(i) for i in indices))
    alpha = np.zeros(problem.n)
    alpha[list(idx)] = 1.0
    obj = problem.objective(idx)
    return Selection(idx, alpha, obj, 1.0 - obj / problem.total_weight, certificate, **extra)


class _Search:
    """Best-bound branch-and-bound over alpha with LP bounds."""

    def __init__(self, problem: AllocationProblem, engine: str, deadline: float | None):
        self.p = problem
        self.rp = problem.reduced
        self.engine = engine
        self.deadline = deadline
        self.T = problem.budget
        self.tol = problem.tolerance()
        self.nodes = 0
        self.lp_solves = 0
        self._pat = None
        self.model = LpModel(self.rp, self.T, engine)

    def submodular_bound(self, fixed, candidates, slots) -> float:
        """f(A) plus the best ``slots`` single-knoll gains over A; valid since coverage is submodular."""
        cm = self.p.condensed
        if self._pat is None:
            self._pat = cm.pattern_csr()
        mask = np.zeros(self.p.n, dtype=bool)
        mask[list(fixed)] = True
        cov = covered_rows(cm, mask)
        base = float(cm.u[cov].sum())
        if slots <= 0 or len(candidates) == 0:
            return base
        gains = self._pat.T @ (cm.u * ~cov)
        g = np.sort(gains[np.asarray(candidates, dtype=int)])[::-1]
        return base + float(g[:slots].sum())

    def lp(self, lo, hi) -> LpSolution | None:
        self._check_time(None, None)
        self.lp_solves += 1
        return self.model.solve(lo, hi)

    def _check_time(self, incumbent, gap):
        if self.deadline is not None and time.perf_counter() > self.deadline:
            raise SolverTimeout("branch-and-bound time limit reached", incumbent, gap)

    def rounded(self, sol: LpSolution, lo, hi) -> tuple:
        """Top-T alphas (ties to the lower index) respecting the node's fixings."""
        a = np.where(hi < 0.5, -1.0, sol.alpha_frac)
        a = np.where(lo > 0.5, 2.0, a)
        order = np.lexsort((np.arange(self.p.n), -a))
        pick = [int(i) for i in order[: self.T] if a[i] > 1e-12 or lo[i] > 0.5]
        return tuple(sorted(pick))

    def run(self, lo, hi, target=None, incumbent=None, root=None):
        """Maximize under fixings. With ``target`` set, stop as soon as a selection
        reaching target - tol is found and prune nodes that cannot reach it.
        Returns (best_set, best_value, root_solution) or (None, -inf, root) if the
        target is unreachable.
        """
        best_set, best_val = None, -np.inf
        if incumbent is not None:
            best_set, best_val = incumbent, self.p.objective(incumbent)
        counter = itertools.count()
        root = root if root is not None else self.lp(lo, hi)
        if root is None:
            return None, -np.inf, None
        heap = [(-root.objective, next(counter), lo, hi, root)]
        while heap:
            neg_bound, _, nlo, nhi, sol = heapq.heappop(heap)
            bound = -neg_bound
            cutoff = (target - self.tol) if target is not None else (best_val + self.tol)
            if bound < cutoff:
                if target is None:
                    break
                continue
            self.nodes += 1
            gap = None if best_set is None else max(bound - best_val, 0.0)
            self._check_time(best_set, gap)
            cand = self.rounded(sol, nlo, nhi)
            val = self.p.objective(cand)
            if val > best_val + self.tol or best_set is None:
                best_set, best_val = cand, val
            if target is not None and best_val >= target - self.tol:
                return best_set, best_val, root
            frac = np.minimum(sol.alpha_frac, 1.0 - sol.alpha_frac)
            frac = np.where(nlo == nhi, 0.0, frac)
            if frac.max() <= INTEGRALITY_TOL:
                continue  # integral LP optimum: the rounding above already evaluated it
            j = int(np.argmax(frac))  # most fractional, lowest index on ties
            for v in (1.0, 0.0):
                clo, chi = nlo.copy(), nhi.copy()
                clo[j] = chi[j] = v
                child = self.lp(clo, chi)
                if child is None:
                    continue
                limit = (target - self.tol) if target is not None else (best_val + self.tol)
                if child.objective >= limit:
                    heapq.heappush(heap, (-child.objective, next(counter), clo, chi, child))
        if target is not None and (best_set is None or best_val < target - self.tol):
            return None, -np.inf, root
        return best_set, best_val, root


def _lexicographic_refine(search: _Search, best: tuple, value: float, root: LpSolution) -> tuple:
    """Smallest index set of size min(T, n) whose coverage equals ``value`` (within tol)."""
    n, T, tol = search.p.n, min(search.T, search.p.n), search.tol
    rp = search.rp
    # Known optimal set consistent with the fixings so far.
    known = set(best)
    lo, hi = np.zeros(n), np.ones(n)
    chosen = []
    for i in range(n):
        if len(chosen) == T:
            break
        left = T - len(chosen)
        free_after = n - i
        if free_after == left:
            chosen.extend(range(i, n))
            break
        if i in known or len(known) < T:
            known.add(i)
            chosen.append(i)
            lo[i] = 1.0
            continue
        tlo, thi = lo.copy(), hi.copy()
        tlo[i] = 1.0
        rest = [j for j in range(i + 1, n) if hi[j] > 0.5]
        if search.submodular_bound(chosen + [i], rest, left - 1) < value - tol:
            hi[i] = 0.0
            continue
        if dual_bound(rp, root.duals, search.T, tlo, thi) < value - tol:
            hi[i] = 0.0
            continue
        found, _, _ = search.run(tlo, thi, target=value)
        if found is not None:
            known = set(found)
            chosen.append(i)
            lo[i] = 1.0
        else:
            hi[i] = 0.0
    return tuple(sorted(chosen))


def solve_mbp(problem: AllocationProblem, engine: str = "highs", timeout_s: float | None = None) -> Selection:
    """Globally optimal selection of at most T knolls (exactly min(T, n) in the canonical answer)."""
    t0 = time.perf_counter()
    T, n = problem.budget, problem.n
    if T > n:
        raise DomainError("budget exceeds the number of knolls")
    if T == 0:
        return make_selection(problem, (), "lp_integral", lp_objective=0.0, wall_ms=0.0)
    if T == n:
        return make_selection(problem, range(n), "lp_integral", lp_objective=problem.objective(range(n)),
                              wall_ms=(time.perf_counter() - t0) * 1e3)
    deadline = None if timeout_s is None else t0 + timeout_s
    search = _Search(problem, engine, deadline)
    lo, hi = np.zeros(n), np.ones(n)
    root = search.lp(lo, hi)
    if root is None:
        raise SolverError("LP relaxation infeasible")
    integral = root.is_integral(INTEGRALITY_TOL)
    try:
        if integral:
            best = tuple(int(i) for i in np.flatnonzero(root.alpha_frac > 0.5))
            value = problem.objective(best)
            if value < root.objective - 1e-6 * max(1.0, abs(root.objective)):
                raise SolverError("integral LP point does not reproduce its objective")
        else:
            best, value, _ = search.run(lo, hi, root=root)
            if best is None:
                raise SolverError("branch-and-bound found no feasible selection")
        final = _lexicographic_refine(search, best, value, root)
    except SolverTimeout as exc:
        inc = exc.incumbent
        sel = make_selection(problem, inc, "branch_and_bound") if inc is not None else None
        raise SolverTimeout(str(exc), sel, exc.gap) from None
    sel_obj = problem.objective(final)
    if sel_obj < value - search.tol:
        raise SolverError("tie-break refinement lost optimality")
    return make_selection(problem, final, "lp_integral" if integral else "branch_and_bound",
                          lp_objective=root.objective, nodes=search.nodes, lp_solves=search.lp_solves,
                          wall_ms=(time.perf_counter() - t0) * 1e3)

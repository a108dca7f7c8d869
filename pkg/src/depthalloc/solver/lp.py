"""LP relaxation of the budgeted hypograph coverage program.

For super-pixel j with binary pattern P_j and weight u_j:

    max  sum_j u_j beta_j
    s.t. beta_j <= P_j . alpha,  0 <= beta_j <= 1,  sum(alpha) <= T,  lo <= alpha <= hi

Super-pixels hit by no knoll are dropped. Super-pixels hit by exactly one knoll
are folded into a linear term on alpha, since min(1, alpha_i) = alpha_i on [0, 1].
"""
from __future__ import annotations

from dataclasses import dataclass, field

import highspy
import numpy as np
from scipy import sparse

from ..coverage import CondensedMatrix
from ..errors import SolverError
from .simplex import bounded_simplex

ENGINES = ("highs", "simplex")


@dataclass(frozen=True, eq=False)
class ReducedProgram:
    """LP data shared by every node of a search."""

    n: int
    linear: np.ndarray  # folded singleton weight per knoll
    rows: sparse.csr_matrix  # (m, n) patterns of multi-knoll super-pixels
    w: np.ndarray  # weights of those super-pixels

    @property
    def m(self) -> int:
        return self.rows.shape[0]

    @classmethod
    def from_condensed(cls, cm: CondensedMatrix) -> "ReducedProgram":
        pat = cm.patterns
        deg = pat.sum(axis=1)
        single = deg == 1
        linear = np.zeros(cm.n)
        if single.any():
            idx = np.argmax(pat[single], axis=1)
            linear = np.bincount(idx, weights=cm.u[single], minlength=cm.n).astype(float)
        keep = (deg >= 2) & (cm.u > 0)
        rows = sparse.csr_matrix(pat[keep].astype(np.float64))
        return cls(cm.n, linear, rows, cm.u[keep].astype(float))

    def constraint_matrix(self) -> sparse.csc_matrix:
        """Rows: beta_j - P_j.alpha <= 0 for each super-pixel, then sum(alpha) <= T."""
        n, m = self.n, self.m
        cover = sparse.hstack([-self.rows, sparse.identity(m, format="csr")], format="csr")
        budget = sparse.csr_matrix(np.concatenate([np.ones(n), np.zeros(m)])[None, :])
        return sparse.vstack([cover, budget], format="csc")


@dataclass(frozen=True, eq=False)
class LpSolution:
    alpha_frac: np.ndarray
    beta: np.ndarray  # weighted coverage per multi-knoll super-pixel, 0 <= beta_j <= u_j
    objective: float
    duals: np.ndarray = field(repr=False)  # row duals (coverage rows, then budget), >= 0

    def is_integral(self, tol=1e-6) -> bool:
        a = self.alpha_frac
        return bool(np.all(np.minimum(np.abs(a), np.abs(1 - a)) <= tol))


class LpModel:
    """The relaxation for one budget; alpha bounds change between solves.

    The HiGHS engine keeps its basis between calls, so re-solving after a bound
    change (a branch-and-bound child, a tie-break probe) is a warm start.
    """

    def __init__(self, rp: ReducedProgram, T: int, engine: str = "highs"):
        if engine not in ENGINES:
            raise SolverError(f"unknown LP engine {engine!r}")
        self.rp, self.T, self.engine = rp, int(T), engine
        self._h = None
        if engine == "highs":
            self._build_highs()

    def _build_highs(self):
        rp = self.rp
        n, m = rp.n, rp.m
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("threads", 1)
        h.setOptionValue("random_seed", 0)
        h.setOptionValue("primal_feasibility_tolerance", 1e-10)
        h.setOptionValue("dual_feasibility_tolerance", 1e-10)
        lp = highspy.HighsLp()
        lp.num_col_ = n + m
        lp.num_row_ = m + 1
        lp.col_cost_ = np.concatenate([rp.linear, rp.w])
        lp.col_lower_ = np.zeros(n + m)
        lp.col_upper_ = np.ones(n + m)
        A = rp.constraint_matrix()
        lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
        lp.a_matrix_.start_ = A.indptr
        lp.a_matrix_.index_ = A.indices
        lp.a_matrix_.value_ = A.data
        lp.row_lower_ = np.full(m + 1, -highspy.kHighsInf)
        lp.row_upper_ = np.concatenate([np.zeros(m), [float(self.T)]])
        lp.sense_ = highspy.ObjSense.kMaximize
        status = h.passModel(lp)
        if status == highspy.HighsStatus.kError:
            raise SolverError("HiGHS rejected the LP")
        self._h = h
        self._idx = np.arange(n, dtype=np.int32)

    def solve(self, lo=None, hi=None) -> LpSolution | None:
        """Optimum under alpha bounds; None when the bounds are infeasible."""
        rp = self.rp
        lo = np.zeros(rp.n) if lo is None else np.asarray(lo, dtype=float)
        hi = np.ones(rp.n) if hi is None else np.asarray(hi, dtype=float)
        if lo.sum() > self.T + 1e-9:
            return None
        if self.engine == "highs":
            alpha, beta, duals = self._run_highs(lo, hi)
        else:
            alpha, beta, duals = self._run_simplex(lo, hi)
        alpha = np.clip(alpha, lo, hi)
        beta = np.clip(beta, 0.0, 1.0)
        obj = float(rp.linear @ alpha + rp.w @ beta)
        if not np.isfinite(obj):
            raise SolverError("LP solver returned a non-finite objective")
        return LpSolution(alpha, beta * rp.w, obj, duals)

    def _run_highs(self, lo, hi):
        h, n = self._h, self.rp.n
        h.changeColsBounds(n, self._idx, lo, hi)
        h.run()
        status = h.getModelStatus()
        if status != highspy.HighsModelStatus.kOptimal:
            raise SolverError(f"LP solver failed: {h.modelStatusToString(status)}")
        sol = h.getSolution()
        x = np.asarray(sol.col_value, dtype=float)
        duals = np.maximum(np.asarray(sol.row_dual, dtype=float), 0.0)
        return x[:n], x[n:], duals

    def _run_simplex(self, lo, hi):
        rp = self.rp
        n, m = rp.n, rp.m
        A = rp.constraint_matrix().toarray()
        b = np.concatenate([np.zeros(m), [float(self.T)]])
        # shift alpha by its lower bound so every right-hand side stays nonnegative
        b_shift = np.maximum(b - A[:, :n] @ lo, 0.0)
        ub = np.concatenate([hi - lo, np.ones(m)])
        c = np.concatenate([rp.linear, rp.w])
        r = bounded_simplex(c, A, b_shift, ub)
        return r.x[:n] + lo, r.x[n:], r.duals


def solve_reduced(rp: ReducedProgram, T, lo=None, hi=None, engine="highs") -> LpSolution | None:
    return LpModel(rp, T, engine).solve(lo, hi)


def dual_bound(rp: ReducedProgram, duals: np.ndarray, T, lo, hi) -> float:
    """Upper bound on the LP value under alpha bounds [lo, hi], from any duals y >= 0.

    Weak duality: c.x <= y.b + sum_j max over the box of (c - A'y)_j x_j.
    """
    y = np.maximum(np.asarray(duals, dtype=float), 0.0)
    m = rp.m
    y_cov, y_bud = y[:m], y[m]
    r_alpha = rp.linear + rp.rows.T @ y_cov - y_bud
    r_beta = rp.w - y_cov
    ub = y_bud * T
    ub += np.maximum(r_alpha * lo, r_alpha * hi).sum()
    ub += np.maximum(r_beta, 0.0).sum()
    return float(ub)


def solve_lp(problem, engine="highs") -> LpSolution:
    """Relaxation of an AllocationProblem (see ``solver.mbp``)."""
    rp = problem.reduced
    if problem.budget == 0:
        return LpSolution(np.zeros(rp.n), np.zeros(rp.m), 0.0, np.zeros(rp.m + 1))
    sol = LpModel(rp, problem.budget, engine).solve()
    if sol is None:
        raise SolverError("LP relaxation infeasible")
    return sol

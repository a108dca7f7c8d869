"""Dense bounded-variable primal simplex.

Solves   max c.x   s.t.  A x <= b,  0 <= x <= ub   with b >= 0,
so the all-slack basis is feasible from the start. Pricing is Dantzig's
largest reduced cost; after a run of degenerate pivots it falls back to
Bland's smallest-index rule, which cannot cycle.

Meant for small problems and as an independent route against HiGHS.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import SolverError

_TOL = 1e-9


@dataclass
class SimplexResult:
    x: np.ndarray
    objective: float
    duals: np.ndarray  # one per row, >= 0
    iterations: int


def bounded_simplex(c, A, b, ub, max_iter=50_000, degenerate_switch=50) -> SimplexResult:
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    m, n = A.shape
    if np.any(b < -_TOL):
        raise SolverError("bounded_simplex needs b >= 0")
    ub_all = np.concatenate([np.asarray(ub, dtype=float), np.full(m, np.inf)])
    cost = np.concatenate([c, np.zeros(m)])
    # tableau rows hold B^-1 [A I]; xb holds basic values
    tab = np.hstack([A, np.eye(m)])
    xb = np.maximum(b.copy(), 0.0)
    basis = np.arange(n, n + m)
    at_upper = np.zeros(n + m, dtype=bool)
    is_basic = np.zeros(n + m, dtype=bool)
    is_basic[basis] = True

    degenerate_run = 0
    it = 0
    while True:
        it += 1
        if it > max_iter:
            raise SolverError("simplex iteration limit reached")
        y = cost[basis] @ tab  # c_B B^-1 [A I]
        d = cost - y
        improving = np.where(at_upper, d < -_TOL, d > _TOL) & ~is_basic
        improving &= ~((ub_all == 0) & ~at_upper)  # fixed-at-zero columns cannot move
        cand = np.flatnonzero(improving)
        if cand.size == 0:
            break
        if degenerate_run >= degenerate_switch:
            j = int(cand[0])
        else:
            j = int(cand[np.argmax(np.abs(d[cand]))])
        sgn = -1.0 if at_upper[j] else 1.0
        col = tab[:, j] * sgn  # x_B changes by -theta*col as x_j moves by sgn*theta

        theta = ub_all[j]
        leave, leave_to_upper = -1, False
        for i in range(m):
            a = col[i]
            if a > _TOL:
                t = xb[i] / a
                up = False
            elif a < -_TOL:
                ubi = ub_all[basis[i]]
                if not np.isfinite(ubi):
                    continue
                t = (ubi - xb[i]) / (-a)
                up = True
            else:
                continue
            if t < theta - _TOL or (abs(t - theta) <= _TOL and leave >= 0 and basis[i] < basis[leave]):
                theta, leave, leave_to_upper = t, i, up
        if not np.isfinite(theta):
            raise SolverError("LP is unbounded")
        theta = max(theta, 0.0)
        degenerate_run = degenerate_run + 1 if theta <= _TOL else 0

        xb -= theta * col
        if leave < 0:
            at_upper[j] = not at_upper[j]
            continue
        # pivot x_j into row `leave`
        entering_value = (ub_all[j] - theta) if at_upper[j] else theta
        old = basis[leave]
        piv = tab[leave, j]
        tab[leave] /= piv
        for i in range(m):
            if i != leave and tab[i, j] != 0.0:
                tab[i] -= tab[i, j] * tab[leave]
        basis[leave] = j
        is_basic[j] = True
        is_basic[old] = False
        at_upper[j] = False
        at_upper[old] = leave_to_upper
        xb[leave] = entering_value
        # recompute basic values from scratch occasionally to limit drift
        if it % 64 == 0:
            xb = _basic_values(tab, b, basis, at_upper, ub_all, n, m, A)

    x = np.where(at_upper, ub_all, 0.0)
    x[basis] = xb
    x = x[:n]
    x = np.clip(x, 0.0, np.asarray(ub, dtype=float))
    duals = np.maximum(y[n:], 0.0)
    return SimplexResult(x, float(c @ x), duals, it)


def _basic_values(tab, b, basis, at_upper, ub_all, n, m, A):
    full = np.hstack([A, np.eye(m)])
    B = full[:, basis]
    nb = np.flatnonzero(at_upper)
    rhs = b - full[:, nb] @ ub_all[nb] if nb.size else b.copy()
    return np.linalg.solve(B, rhs)

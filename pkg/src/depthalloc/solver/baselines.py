"""Reference allocations: greedy marginal gain and equidistant placement."""
from __future__ import annotations

import time

import numpy as np

from ..coverage import covered_rows, selection_mask
from ..errors import DomainError
from ..train import KnollTrain
from .mbp import AllocationProblem, Selection, make_selection

EQUIDISTANT_MODES = ("depth", "diopter")


def greedy_select(problem: AllocationProblem) -> Selection:
    """T rounds of largest marginal gain; ties go to the lowest index."""
    t0 = time.perf_counter()
    cm = problem.condensed
    pat = cm.pattern_csr()
    tol = problem.tolerance()
    chosen = []
    uncovered = np.ones(cm.p_c, dtype=bool)
    for _ in range(problem.budget):
        gains = pat.T @ (cm.u * uncovered)
        gains[chosen] = -np.inf
        g = gains.max()
        i = int(np.flatnonzero(gains >= g - tol)[0])
        chosen.append(i)
        uncovered &= ~covered_rows(cm, selection_mask([i], cm.n))
    return make_selection(problem, chosen, "baseline", wall_ms=(time.perf_counter() - t0) * 1e3)


def equidistant_targets(d_min: float, d_max: float, T: int, mode: str) -> np.ndarray:
    """Target diopters, uniformly spaced in the chosen coordinate (ends included)."""
    if T < 1:
        raise DomainError("T must be >= 1")
    if mode not in EQUIDISTANT_MODES:
        raise DomainError(f"mode must be one of {EQUIDISTANT_MODES}")
    if mode == "diopter":
        lo, hi = d_min, d_max
    else:
        lo, hi = 1.0 / d_max, 1.0 / d_min
    pts = np.array([(lo + hi) / 2.0]) if T == 1 else np.linspace(lo, hi, T)
    return pts if mode == "diopter" else 1.0 / pts


def equidistant_indices(train: KnollTrain, T: int, mode: str) -> tuple:
    targets = equidistant_targets(train.d_min, train.d_max, T, mode)
    if mode == "diopter":
        dist = np.abs(train.centers[None, :] - targets[:, None])
    else:
        dist = np.abs(1.0 / train.centers[None, :] - 1.0 / targets[:, None])
    picks = np.argmin(dist, axis=1)  # first minimum = lower index on ties
    return tuple(sorted(set(int(i) for i in picks)))


def equidistant_baseline(train: KnollTrain, T: int, mode: str, problem: AllocationProblem | None = None):
    """Knolls nearest T equally spaced targets.

    With ``problem`` given the result is a scored Selection; otherwise only the
    index tuple is returned. Targets that land on the same knoll collapse.
    """
    idx = equidistant_indices(train, T, mode)
    if problem is None:
        return idx
    return make_selection(problem, idx, "baseline")

"""Solve one rasterized problem for several budgets and export the results."""
from __future__ import annotations

import csv
import json

import numpy as np

from ..errors import DomainError
from .mbp import AllocationProblem, Selection, solve_mbp


def sweep(problem: AllocationProblem, T_list, engine="highs", timeout_s=None) -> dict:
    """Map T -> Selection. The condensed matrix and reduced program are shared."""
    out = {}
    for T in T_list:
        if int(T) != T or T < 1 or T > problem.n:
            raise DomainError(f"invalid budget T={T} for n={problem.n}")
        out[int(T)] = solve_mbp(problem.with_budget(int(T)), engine=engine, timeout_s=timeout_s)
    return out


def selection_record(sel: Selection, centers, T: int, mode="optimized") -> dict:
    """JSON-ready summary. Timing is left out so reruns produce identical files."""
    c = np.asarray(centers, dtype=float)[list(sel.indices)]
    return {
        "T": int(T),
        "mode": mode,
        "indices": list(sel.indices),
        "centers_diopter": [round(float(x), 12) for x in c],
        "depths_cm": [round(100.0 / float(x), 9) for x in c],
        "objective": float(sel.objective),
        "coverage_error": float(sel.coverage_error),
        "certificate": sel.certificate,
    }


def write_json(record: dict, path):
    with open(path, "w") as fh:
        json.dump(record, fh, indent=2, sort_keys=True)
        fh.write("\n")


SWEEP_COLUMNS = ["T", "mode", "indices", "depths_cm", "coverage_error", "certificate"]


def write_sweep_csv(records, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_COLUMNS)
        for r in records:
            w.writerow([r["T"], r["mode"], " ".join(map(str, r["indices"])),
                        " ".join(f"{d:.3f}" for d in r["depths_cm"]),
                        f"{r['coverage_error']:.9f}", r["certificate"]])

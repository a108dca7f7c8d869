"""Named presets for the published figure configurations.

A scenario is a list of (label, overrides) runs; most have a single run. The
overrides are merged into the base configuration before validation.
"""
from __future__ import annotations

from .config import RunConfig, from_dict, merge
from .errors import ConfigError

NEAR_2M = {"d_min": 0.5, "d_max": 7.08}
FAR_11M = {"d_min": 0.09, "d_max": 7.08}

GAMMA_AGE = {"age": {"kind": "gamma", "k": 3.0, "theta": 10.0}}
US_AGE = {"age": {"kind": "table", "table_path": None}}
DIOPTER_TARGET = {"depth": {"kind": "gaussian_diopter", "mean": 1.5, "sd": 0.5}}
DEPTH_TARGET = {"depth": {"kind": "gaussian_depth", "mean": 0.66, "sd": 0.20}}

UNWEIGHTED = {"age": {"kind": "uniform"}, "depth": {"kind": "none"}}


def _run(pupil, rng, *parts):
    out = {"pupil_mm": float(pupil), **rng}
    out = merge(out, UNWEIGHTED)
    for p in parts:
        out = merge(out, p)
    return out


def _weighted_rows(pupil, rng):
    """The four weighting rows shared by the optimized-allocation figures."""
    return {
        "a": _run(pupil, rng, GAMMA_AGE),
        "b": _run(pupil, rng, US_AGE),
        "c": _run(pupil, rng, US_AGE, DIOPTER_TARGET),
        "d": _run(pupil, rng, US_AGE, DEPTH_TARGET),
    }


def _build():
    s = {}
    for pupil in (3, 2):
        for tag, rng in (("2m", NEAR_2M), ("11m", FAR_11M)):
            s[f"unweighted_{pupil}mm_{tag}"] = [("", _run(pupil, rng))]
    for fig, pupil in (("fig4", 3), ("fig6", 2)):
        for row, ov in _weighted_rows(pupil, NEAR_2M).items():
            s[fig + row] = [("", ov)]
    s["fig5"] = [("p2mm", _run(2, NEAR_2M)), ("p3mm", _run(3, NEAR_2M))]
    s["fig9a"] = [("", _run(3, NEAR_2M))]
    s["fig9b"] = [("", _run(3, FAR_11M))]
    s["fig9c"] = [("", _run(2, NEAR_2M))]
    s["fig9d"] = [("", _run(2, FAR_11M))]
    supp = []
    for pupil in (3, 2):
        for row, ov in _weighted_rows(pupil, FAR_11M).items():
            supp.append((f"p{pupil}mm_{row}", ov))
    s["supp_fig1"] = supp
    return s


SCENARIOS = _build()


def scenario_names() -> list:
    return sorted(SCENARIOS)


def scenario_runs(name: str, base: dict | None = None) -> list:
    """[(label, RunConfig)] for a scenario; labels are '' for single-run scenarios."""
    if name not in SCENARIOS:
        raise ConfigError(f"unknown scenario {name!r}; known: {', '.join(scenario_names())}")
    base = base or {}
    out = []
    for label, ov in SCENARIOS[name]:
        data = merge(merge(base, ov), {"scenario_name": name})
        out.append((label, from_dict(data)))
    return out


def scenario_config(name: str, base: dict | None = None) -> RunConfig:
    runs = scenario_runs(name, base)
    if len(runs) != 1:
        raise ConfigError(f"scenario {name!r} has {len(runs)} runs")
    return runs[0][1]

"""Stages behind the CLI commands. Each returns its results and the files it wrote."""
from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .binocular import (StereoParams, continuous_count, counts_for_ipds, fit_H, horopter_trace,
                        ipd_sensitivity, iterate_horopters)
from .config import RunConfig
from .coverage import IntrinsicSpec, condense_train, intrinsic_error
from .errors import ConfigError, DomainError
from .grid import Grid, aligned_columns
from .manifest import RunManifest
from .optics import iterate_focal_planes
from .solver import (AllocationProblem, equidistant_baseline, greedy_select, selection_record,
                     sweep, write_json, write_sweep_csv)
from .train import build_train, knoll_count
from .weighting import AgeDistribution, DepthEmphasis, build_weight_field, load_population_table

BASELINE_MODES = ("greedy", "equidistant_depth", "equidistant_diopter")


# ---------------------------------------------------------------- allocation

def build_grid(cfg: RunConfig) -> Grid:
    n = knoll_count(cfg.d_min, cfg.d_max, cfg.spacing_d)
    cols = cfg.grid.depth_cols or aligned_columns(n)
    return Grid.uniform(cfg.d_min, cfg.d_max, cols, cfg.grid.age_lo, cfg.grid.age_hi, cfg.grid.height_bins)


def age_distribution(cfg: RunConfig) -> AgeDistribution:
    a = cfg.age
    if a.kind == "table":
        return load_population_table(a.table_path)
    return AgeDistribution(a.kind, a.k, a.theta)


def weight_field(cfg: RunConfig, grid: Grid):
    """None when both axes are unweighted, so the plain measure is used."""
    if cfg.age.kind == "uniform" and cfg.depth.kind == "none":
        return None
    depth = DepthEmphasis(cfg.depth.kind, cfg.depth.mean, cfg.depth.sd)
    return build_weight_field(age_distribution(cfg), depth, grid)


@dataclass
class AllocationResult:
    n_knolls: int
    centers: np.ndarray
    p: int
    p_c: int
    intrinsic_error: float
    optimized: dict  # T -> Selection
    baselines: dict = field(default_factory=dict)  # mode -> {T -> Selection}

    def errors(self, mode="optimized") -> dict:
        src = self.optimized if mode == "optimized" else self.baselines[mode]
        return {T: s.coverage_error for T, s in src.items()}


def run_allocation(cfg: RunConfig, manifest: RunManifest | None = None, t_max: int | None = None):
    manifest = manifest or RunManifest(cfg.scenario_name, cfg.hash(), "allocate")
    t_max = cfg.solver.t_max if t_max is None else t_max
    if t_max < 1:
        raise ConfigError("T must be at least 1")
    model, dof = cfg.accommodation_model(), cfg.dof_table()
    with manifest.stage("train"):
        grid = build_grid(cfg)
        train = build_train(cfg.d_min, cfg.d_max, cfg.spacing_d, cfg.pupil_mm, grid, model, dof)
        weights = weight_field(cfg, grid)
    if t_max > train.n:
        raise ConfigError(f"t_max={t_max} exceeds the {train.n} knolls of the train")
    with manifest.stage("condense"):
        cm = condense_train(train, grid, weights, cfg.weight_mode)
        problem = AllocationProblem(cm, 1)
    Ts = list(range(1, t_max + 1))
    with manifest.stage("solve"):
        opt = sweep(problem, Ts, cfg.solver.engine, cfg.solver.timeout_s)
    with manifest.stage("baselines"):
        base = {
            "greedy": {T: greedy_select(problem.with_budget(T)) for T in Ts},
            "equidistant_depth": {T: equidistant_baseline(train, T, "depth", problem) for T in Ts},
            "equidistant_diopter": {T: equidistant_baseline(train, T, "diopter", problem) for T in Ts},
        }
    with manifest.stage("intrinsic"):
        a = cfg.intrinsic
        spec = IntrinsicSpec(a.reference_age, a.step_pupil_mm, a.z_stop_m)
        intr = intrinsic_error(cfg.pupil_mm, cfg.d_min, cfg.d_max, grid, model, dof, spec, weights,
                               cfg.weight_mode)
    return AllocationResult(train.n, train.centers, grid.n_pixels, cm.p_c, intr, opt, base)


def write_allocation(res: AllocationResult, cfg: RunConfig, out_dir, manifest: RunManifest, root=None):
    root = root or out_dir
    os.makedirs(out_dir, exist_ok=True)
    records = [selection_record(s, res.centers, T) for T, s in res.optimized.items()]
    for mode in BASELINE_MODES:
        records += [selection_record(s, res.centers, T, mode) for T, s in res.baselines[mode].items()]
    summary = {
        "scenario_name": cfg.scenario_name,
        "pupil_mm": cfg.pupil_mm,
        "d_min": cfg.d_min,
        "d_max": cfg.d_max,
        "n_knolls": res.n_knolls,
        "pixels": res.p,
        "super_pixels": res.p_c,
        "intrinsic_error": res.intrinsic_error,
        "records": records,
    }
    paths = {
        "selections": os.path.join(out_dir, "selections.json"),
        "sweep": os.path.join(out_dir, "sweep.csv"),
        "comparison": os.path.join(out_dir, "comparison.csv"),
    }
    write_json(summary, paths["selections"])
    write_sweep_csv(records, paths["sweep"])
    with open(paths["comparison"], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["T", "optimized", *BASELINE_MODES, "intrinsic"])
        for T, s in res.optimized.items():
            row = [T, f"{s.coverage_error:.9f}"]
            row += [f"{res.baselines[m][T].coverage_error:.9f}" for m in BASELINE_MODES]
            w.writerow(row + [f"{res.intrinsic_error:.9f}"])
    for p in paths.values():
        manifest.add(root, p)
    return paths


# ---------------------------------------------------------------- monocular quantization

MONOCULAR_COLUMNS = ["age", "pupil_mm", "plane_index", "distance_cm", "diopter"]


def quantize_monocular(cfg: RunConfig) -> list:
    m = cfg.monocular
    if not m.ages:
        raise ConfigError("monocular.ages is empty")
    if not m.pupils:
        raise ConfigError("monocular.pupils is empty")
    model, dof = cfg.accommodation_model(), cfg.dof_table()
    rows = []
    for age in m.ages:
        for pupil in m.pupils:
            for i, cm in enumerate(iterate_focal_planes(age, pupil, m.z_stop_m, model, dof)):
                rows.append((age, pupil, i, cm, 100.0 / cm))
    return rows


def write_monocular(rows, out_dir, manifest: RunManifest) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "focal_planes.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(MONOCULAR_COLUMNS)
        for age, pupil, i, cm, d in rows:
            w.writerow([f"{age:g}", f"{pupil:g}", i, f"{cm:.9g}", f"{d:.9g}"])
    manifest.add(out_dir, path)
    return path


# ---------------------------------------------------------------- binocular

def stereo_params(cfg: RunConfig) -> StereoParams:
    b = cfg.binocular
    return StereoParams.from_units(b.ipd_mm, b.acuity_arcmin, b.z_start_m, b.z_stop_m, b.vernier_floor_um)


def run_binocular(cfg: RunConfig, out_dir, manifest: RunManifest) -> dict:
    b = cfg.binocular
    os.makedirs(out_dir, exist_ok=True)
    with manifest.stage("levels"):
        params = stereo_params(cfg)
        levels = iterate_horopters(params, b.apply_floor)
        levels_path = os.path.join(out_dir, "levels.csv")
        levels.to_csv(levels_path)
        manifest.add(out_dir, levels_path)
        counts = counts_for_ipds(b.ipd_table_mm, params, b.apply_floor) if len(b.ipd_table_mm) >= 2 else []
    with manifest.stage("traces"):
        hfit = fit_H()
        traces = {}
        for z in b.fixation_m:
            H = b.H if b.H is not None else float(hfit(z))
            if not z > params.ipd / 2:
                raise DomainError(f"fixation distance {z:g} m must exceed half the IPD")
            tr = horopter_trace(z, params.ipd, H, b.x_samples)
            path = os.path.join(out_dir, f"trace_{z:g}m.csv")
            tr.to_csv(path)
            manifest.add(out_dir, path)
            traces[z] = tr
    summary = {
        "count": levels.count,
        "continuous_estimate": continuous_count(params),
        "floor_applied": b.apply_floor,
        "floor_binds_below_m": levels.floor_binds_below,
        "z_limit_m": params.z_limit,
        "ipd_table_mm": list(b.ipd_table_mm),
        "ipd_counts": counts,
        "ipd_spread": ipd_sensitivity(counts) if counts else None,
        "H_fit": {"slope": hfit.slope, "intercept": hfit.intercept, "rms": hfit.rms},
        "traces": {f"{z:g}": {"H": t.H, "points": len(t.points), "omitted": t.omitted,
                              "max_residual": float(np.max(np.abs(t.residuals()))) if len(t.points) else 0.0}
                   for z, t in traces.items()},
    }
    path = os.path.join(out_dir, "binocular.json")
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    manifest.add(out_dir, path)
    return {"levels": levels, "traces": traces, "summary": summary}

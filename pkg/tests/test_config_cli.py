import csv
import json
import os

import numpy as np
import pytest
import yaml

from depthalloc import cli
from depthalloc.config import RunConfig, dump_config, from_dict, load_config, parse_text
from depthalloc.errors import ConfigError
from depthalloc.scenarios import SCENARIOS, scenario_config, scenario_runs

SMALL = {"grid": {"depth_cols": 81, "height_bins": 16}, "solver": {"t_max": 2}}


def write_cfg(path, data):
    path.write_text(yaml.safe_dump(data))
    return str(path)


def test_round_trip_lossless():
    cfg = from_dict({"pupil_mm": 2, "dof_fwhm": {2: 1.1, "3": 0.7, 6.0: 0.15}, "binocular": {"fixation_m": [1, 2]}})
    again = from_dict(parse_text(dump_config(cfg)))
    assert again == cfg
    assert from_dict(json.loads(cfg.to_json())) == cfg
    assert cfg.dof_fwhm == {"2": 1.1, "3": 0.7, "6": 0.15}


@pytest.mark.parametrize("data,key", [
    ({"pupil": 3}, "pupil"),
    ({"grid": {"cols": 3}}, "grid.cols"),
    ({"binocular": {"ipd": 64}}, "binocular.ipd"),
])
def test_unknown_keys_rejected(data, key):
    with pytest.raises(ConfigError, match=key.replace(".", r"\.")):
        from_dict(data)


@pytest.mark.parametrize("data", [
    {"pupil_mm": "three"}, {"grid": {"height_bins": 1.5}}, {"binocular": {"apply_floor": 1}},
    {"d_min": 2.0, "d_max": 1.0}, {"weight_mode": "x"}, {"solver": {"t_max": 0}}, [1, 2],
])
def test_bad_values(data):
    with pytest.raises(ConfigError):
        from_dict(data)


def test_hash_ignores_location_only(tmp_path):
    a = RunConfig()
    b = from_dict({"output_dir": "/elsewhere"})
    assert a.hash() == b.hash()
    assert a.hash() != from_dict({"pupil_mm": 2.0}).hash()
    t1, t2 = tmp_path / "a.csv", tmp_path / "b.csv"
    t1.write_text("age_low,age_high,count\n10,70,1\n")
    t2.write_text("age_low,age_high,count\n10,70,1\n")
    h1 = from_dict({"age": {"kind": "table", "table_path": str(t1)}}).hash()
    h2 = from_dict({"age": {"kind": "table", "table_path": str(t2)}}).hash()
    assert h1 == h2


def test_paths_resolve_against_config_file(tmp_path):
    sub = tmp_path / "cfgs"
    sub.mkdir()
    p = write_cfg(sub / "run.yaml", {"output_dir": "res", "age": {"kind": "table", "table_path": "pop.csv"}})
    cfg = load_config(p)
    assert cfg.output_dir == str(sub / "res")
    assert cfg.age.table_path == str(sub / "pop.csv")


def test_scenario_names_cover_figures():
    names = set(SCENARIOS)
    for fig in ("fig4", "fig6", "fig9"):
        assert {fig + c for c in "abcd"} <= names
    assert {"fig5", "supp_fig1", "unweighted_3mm_2m", "unweighted_3mm_11m",
            "unweighted_2mm_2m", "unweighted_2mm_11m"} <= names
    for n in names:
        for label, cfg in scenario_runs(n):
            assert cfg.scenario_name == n
    assert len(scenario_runs("supp_fig1")) == 8


def test_scenario_settings():
    c = scenario_config("fig4d")
    assert (c.pupil_mm, c.d_min, c.age.kind, c.depth.kind, c.depth.mean) == (3.0, 0.5, "table", "gaussian_depth", 0.66)
    c = scenario_config("fig6a")
    assert (c.pupil_mm, c.age.kind, c.age.k, c.age.theta) == (2.0, "gamma", 3.0, 10.0)
    assert scenario_config("fig9b").d_min == 0.09
    with pytest.raises(ConfigError):
        scenario_runs("fig12")
    with pytest.raises(ConfigError):
        scenario_config("fig5")


# ---------------------------------------------------------------- command line

def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def manifest_files(out):
    with open(out / "manifest.json") as fh:
        return json.load(fh)["files"]


def listed_outputs(out):
    found = []
    for root, _, files in os.walk(out):
        for f in files:
            rel = os.path.relpath(os.path.join(root, f), out).replace(os.sep, "/")
            if rel != "manifest.json":
                found.append(rel)
    return sorted(found)


def test_quantize_default(tmp_path):
    out = tmp_path / "q"
    assert cli.main(["quantize-monocular", "--output-dir", str(out)]) == 0
    rows = read_csv(out / "focal_planes.csv")
    assert list(rows[0]) == ["age", "pupil_mm", "plane_index", "distance_cm", "diopter"]
    at10 = [r for r in rows if r["age"] == "10" and r["pupil_mm"] == "2"]
    assert len(at10) == 13
    assert manifest_files(out) == listed_outputs(out) == ["focal_planes.csv"]


def test_quantize_anchor_ages(tmp_path):
    cfg = write_cfg(tmp_path / "c.yaml", {"monocular": {"ages": [10, 50], "pupils": [2]}})
    out = tmp_path / "q"
    assert cli.main(["quantize-monocular", "--config", cfg, "--output-dir", str(out)]) == 0
    rows = read_csv(out / "focal_planes.csv")
    assert [sum(r["age"] == a for r in rows) for a in ("10", "50")] == [13, 2]


def test_quantize_empty_ages(tmp_path):
    cfg = write_cfg(tmp_path / "c.yaml", {"monocular": {"ages": []}})
    assert cli.main(["quantize-monocular", "--config", cfg, "--output-dir", str(tmp_path / "q")]) == 2


def test_allocate_small_and_idempotent(tmp_path):
    cfg = write_cfg(tmp_path / "c.yaml", SMALL)
    outs = []
    for k in range(2):
        out = tmp_path / f"a{k}"
        assert cli.main(["allocate", "--config", cfg, "--output-dir", str(out)]) == 0
        outs.append(out)
    files = manifest_files(outs[0])
    assert files == listed_outputs(outs[0]) == ["comparison.csv", "selections.json", "sweep.csv"]
    for f in files:
        assert (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes()
    comp = read_csv(outs[0] / "comparison.csv")
    assert [r["T"] for r in comp] == ["1", "2"]
    assert set(comp[0]) == {"T", "optimized", "greedy", "equidistant_depth", "equidistant_diopter", "intrinsic"}
    for r in comp:
        assert float(r["optimized"]) <= min(float(r[m]) for m in ("greedy", "equidistant_depth",
                                                                   "equidistant_diopter")) + 1e-12


def test_allocate_batch_scenario_manifest(tmp_path):
    cfg = write_cfg(tmp_path / "c.yaml", {**SMALL, "solver": {"t_max": 1}})
    out = tmp_path / "f5"
    assert cli.main(["allocate", "--config", cfg, "--scenario", "fig5", "--output-dir", str(out)]) == 0
    assert manifest_files(out) == listed_outputs(out)
    assert {f.split("/")[0] for f in manifest_files(out)} == {"p2mm", "p3mm"}


def test_allocate_usage_errors(tmp_path):
    cfg = write_cfg(tmp_path / "c.yaml", SMALL)
    assert cli.main(["allocate", "--config", cfg, "--t-max", "0", "--output-dir", str(tmp_path / "x")]) == 2
    assert cli.main(["allocate", "--config", cfg, "--t-max", "9999", "--output-dir", str(tmp_path / "x")]) == 2
    assert cli.main(["allocate", "--scenario", "nope", "--output-dir", str(tmp_path / "x")]) == 2
    with pytest.raises(SystemExit) as exc:
        cli.main(["allocate", "--t-max", "two"])
    assert exc.value.code == 2


def test_allocate_timeout_exit_code(tmp_path):
    cfg = write_cfg(tmp_path / "c.yaml", {**SMALL, "solver": {"t_max": 2, "timeout_s": 1e-9}})
    assert cli.main(["allocate", "--config", cfg, "--output-dir", str(tmp_path / "x")]) == 3


def test_missing_config_is_io_error(tmp_path):
    assert cli.main(["allocate", "--config", str(tmp_path / "missing.yaml")]) == 4


def test_binocular_defaults(tmp_path):
    out = tmp_path / "b"
    assert cli.main(["binocular", "--output-dir", str(out)]) == 0
    summary = json.loads((out / "binocular.json").read_text())
    assert summary["count"] == pytest.approx(1731, rel=0.02)
    assert len(read_csv(out / "levels.csv")) == summary["count"]
    assert manifest_files(out) == listed_outputs(out)


def test_binocular_traces_with_override(tmp_path):
    out = tmp_path / "b"
    rc = cli.main(["binocular", "--fixation-m", "0.4,2.37", "--H", "0", "--output-dir", str(out)])
    assert rc == 0
    traces = sorted(f for f in manifest_files(out) if f.startswith("trace_"))
    assert traces == ["trace_0.4m.csv", "trace_2.37m.csv"]
    for z, name in ((0.4, traces[0]), (2.37, traces[1])):
        pts = np.array([[float(r["x_m"]), float(r["y_m"])] for r in read_csv(out / name)])
        a = 0.032
        yc, r = 0.5 * (z - a * a / z), 0.5 * (z + a * a / z)
        assert np.abs(np.hypot(pts[:, 0], pts[:, 1] - yc) - r).max() < 1e-9 * z


def test_binocular_bad_ipd(tmp_path):
    assert cli.main(["binocular", "--ipd-mm", "0", "--output-dir", str(tmp_path / "b")]) == 2


def test_threads_env(tmp_path, monkeypatch):
    monkeypatch.setenv("DEPTHALLOC_THREADS", "many")
    assert cli.main(["allocate", "--output-dir", str(tmp_path / "x")]) == 2

"""Weighted presets at full resolution: two-plane picks land near the expected depths."""
import functools

import pytest

from depthalloc.pipeline import run_allocation
from depthalloc.scenarios import scenario_config

REL = 0.15


@functools.lru_cache(maxsize=None)
def two_plane_depths(name):
    res = run_allocation(scenario_config(name), t_max=2)
    return tuple(sorted(100.0 / res.centers[i] for i in res.optimized[2].indices)), res


@pytest.mark.parametrize("name, want", [("fig4b", (83, 170)), ("fig4d", (58, 87))])
def test_two_plane_allocation(name, want):
    got, _ = two_plane_depths(name)
    assert got == pytest.approx(want, rel=REL)


def test_near_emphasis_pulls_planes_closer():
    plain, _ = two_plane_depths("fig4b")
    near, _ = two_plane_depths("fig4d")
    assert near[1] < plain[1]

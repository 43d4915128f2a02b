from __future__ import annotations

import json

from eventgraph import duality, oracle


def test_single_scene_agrees():
    r = duality.check_scene(0)
    assert r.pairs > 0 and r.agree == r.pairs


def test_c3_violating_removal_is_excluded():
    r = duality.check_scene(1)
    assert r.excluded_removals >= 1
    assert r.agree == r.pairs


def test_injected_fault_produces_counterexample():
    rep = duality.run_suite(60, inject_fault=True)
    assert not rep.ok
    cx = rep.minimal_counterexample()
    assert cx.predicted_diverges and not cx.oracle_absent
    dumped = json.loads(cx.dump())
    assert oracle.scene_from_json(dumped["scene"]) == oracle.random_scene(cx.seed)


def test_suite_is_deterministic_and_parallel_safe():
    a = duality.run_suite(6, seed=10)
    b = duality.run_suite(6, seed=10, jobs=3)
    assert (a.scenes, a.pairs, a.agree, a.excluded_removals) == (b.scenes, b.pairs, b.agree, b.excluded_removals)


def test_empty_report_is_not_ok():
    assert not duality.DualityReport().ok

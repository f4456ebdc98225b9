from __future__ import annotations

import random

import pytest

from perfloop.antipattern import (
    Metric,
    PatternKind,
    ThresholdBand,
    default_bands,
    detect_blob,
    detect_paf,
    fuzzy_prob,
    load_bands,
    metrics_for_component,
)
from perfloop.arch_model import annotate, load_model
from perfloop.errors import ValidationError


def _band(lower, upper, metric=Metric.MAX_HW_UTIL):
    return ThresholdBand(metric=metric, lower=lower, upper=upper)


def test_fuzzy_prob_boundaries_exact():
    band = _band(0.4, 0.8)
    assert fuzzy_prob(0.4, band) == 0.0
    assert fuzzy_prob(0.8, band) == 1.0
    assert fuzzy_prob(0.6, band) == pytest.approx(0.5, abs=1e-12)


def test_fuzzy_prob_clamps_outside_band():
    band = _band(0.4, 0.8)
    assert fuzzy_prob(0.9, band) == 1.0
    assert fuzzy_prob(0.1, band) == 0.0


def test_fuzzy_prob_monotone_over_random_samples():
    rng = random.Random(123)
    for _ in range(10_000):
        lb = rng.uniform(-5, 5)
        ub = lb + rng.uniform(1e-6, 10)
        band = _band(lb, ub)
        f1 = rng.uniform(lb - 2, ub + 2)
        f2 = rng.uniform(lb - 2, ub + 2)
        if f1 > f2:
            f1, f2 = f2, f1
        p1, p2 = fuzzy_prob(f1, band), fuzzy_prob(f2, band)
        assert 0.0 <= p1 <= 1.0 and 0.0 <= p2 <= 1.0
        assert p1 <= p2


def test_band_requires_spread():
    with pytest.raises(ValidationError):
        _band(0.5, 0.5)


ANNOTATED = """
components:
  - name: front
    operations:
      - name: render
        service_demand: 0.2
      - name: assets
        service_demand: 0.01
  - name: store
    operations:
      - name: lookup
        service_demand: 0.05
  - name: audit
    operations:
      - name: log
        service_demand: 0.02
nodes:
  - name: n-front
    hosts: [front]
    utilization: 0.9
  - name: n-store
    hosts: [store]
    utilization: 0.4
  - name: n-audit
    hosts: [audit]
    utilization: 0.2
node_links:
  - [n-front, n-store]
  - [n-front, n-audit]
scenarios:
  - name: Shop
    workload: {pattern: OPEN, rate: 2.0}
    steps:
      - {caller: store, callee: front, operation: render}
      - {caller: front, callee: store, operation: lookup}
      - {caller: front, callee: store, operation: lookup}
      - {caller: front, callee: store, operation: lookup}
      - {caller: front, callee: store, operation: lookup}
      - {caller: audit, callee: front, operation: assets}
  - name: Audit
    workload: {pattern: OPEN, rate: 0.2}
    steps:
      - {caller: front, callee: audit, operation: log, prob: 0.5}
"""


@pytest.fixture
def annotated_model():
    return load_model(ANNOTATED)


def test_metrics_component_never_called(annotated_model):
    # store is called, audit only via a guard; front's callers span scenarios
    metrics = metrics_for_component(annotated_model, "front", "Shop")
    assert metrics["numClientConnects"] == 2  # store and audit call front
    assert metrics["numMsgs"]["store"] == 5  # 1 inbound + 4 outbound
    assert metrics["maxHwUtil"]["store"] == pytest.approx(0.9)


def test_metrics_four_steps_between_pair(annotated_model):
    metrics = metrics_for_component(annotated_model, "store", "Shop")
    assert metrics["numMsgs"]["front"] == 5
    # brute-force recount over the scenario's steps
    steps = annotated_model.scenario("Shop").steps
    count = sum(1 for s in steps if {s.caller, s.callee} == {"store", "front"})
    assert metrics["numMsgs"]["front"] == count


def test_default_bands_mean_and_max():
    doc = """
components:
  - name: a
    operations: [{name: opa, service_demand: 0.1}]
  - name: b
    operations: [{name: opb, service_demand: 0.2}]
  - name: c
    operations: [{name: opc, service_demand: 0.3}]
nodes:
  - name: na
    hosts: [a]
    utilization: 0.2
  - name: nb
    hosts: [b]
    utilization: 0.4
  - name: nc
    hosts: [c]
    utilization: 0.9
node_links: []
scenarios:
  - name: s
    workload: {pattern: OPEN, rate: 1.0}
    steps:
      - {caller: a, callee: b, operation: opb}
"""
    bands, warnings = default_bands(load_model(doc))
    util_band = bands[Metric.MAX_HW_UTIL]
    assert util_band.lower == pytest.approx(0.5)  # mean of 0.2/0.4/0.9
    assert util_band.upper == pytest.approx(0.9)
    demand_band = bands[Metric.RES_DEMAND]
    assert demand_band.lower == pytest.approx(0.2)
    assert demand_band.upper == pytest.approx(0.3)
    # single message pair -> zero spread, widened band with a warning
    assert bands[Metric.NUM_MSGS].upper == pytest.approx(1.1)
    assert any("numMsgs" in w for w in warnings)


def test_default_bands_degenerate_single_component(minimal_model):
    model = annotate(minimal_model, "node_utilization", "container-web", 0.5)
    bands, warnings = default_bands(model)
    band = bands[Metric.MAX_HW_UTIL]
    assert band.lower == pytest.approx(0.5)
    assert band.upper == pytest.approx(0.55)
    assert any("zero spread" in w for w in warnings)


def test_load_bands_overrides():
    bands = load_bands('{"maxHwUtil": {"lb": 0.3, "ub": 0.7}}')
    assert bands[Metric.MAX_HW_UTIL].lower == 0.3
    assert bands[Metric.MAX_HW_UTIL].upper == 0.7


def _bands_for_tables():
    return {
        Metric.NUM_CLIENT_CONNECTS: _band(1.0, 3.0, Metric.NUM_CLIENT_CONNECTS),
        Metric.NUM_MSGS: _band(1.1, 2.0, Metric.NUM_MSGS),
        Metric.MAX_HW_UTIL: _band(0.2, 0.88, Metric.MAX_HW_UTIL),
        Metric.RES_DEMAND: _band(0.05, 0.18, Metric.RES_DEMAND),
    }


def test_detect_blob_product_and_ranking(annotated_model):
    bands = _bands_for_tables()
    occurrences = detect_blob(annotated_model, bands, "Shop")
    assert occurrences, "front should be flagged"
    top = occurrences[0]
    assert top.kind is PatternKind.BLOB
    assert top.target == "front"
    assert len(top.literals) == 3
    product = 1.0
    for lit in top.literals:
        product *= lit.probability
    assert top.probability == product  # exact, not approximate
    # canonical order: probability descending, then name
    probs = [o.probability for o in occurrences]
    assert probs == sorted(probs, reverse=True)


def test_detect_blob_missing_band_errors(annotated_model):
    with pytest.raises(ValidationError, match="numMsgs"):
        detect_blob(annotated_model, {Metric.NUM_CLIENT_CONNECTS: _band(0, 1)}, "Shop")


def test_detect_paf_gate_excludes_conditional_ops(annotated_model):
    bands = _bands_for_tables()
    occurrences = detect_paf(annotated_model, bands, "Audit")
    # the only operation in Audit runs with probability 0.5: excluded entirely
    assert occurrences == []


def test_detect_paf_two_literals_product(annotated_model):
    bands = _bands_for_tables()
    occurrences = detect_paf(annotated_model, bands, "Shop")
    by_target = {o.target: o for o in occurrences}
    assert "front/render" in by_target
    occ = by_target["front/render"]
    assert len(occ.literals) == 2
    assert occ.probability == occ.literals[0].probability * occ.literals[1].probability


def test_detection_monotone_in_utilization(annotated_model):
    bands = _bands_for_tables()
    low = detect_blob(annotated_model, bands, "Shop")
    hotter = annotate(annotated_model, "node_utilization", "n-store", 0.85)
    high = detect_blob(hotter, bands, "Shop")
    low_by_target = {o.target: o.probability for o in low}
    high_by_target = {o.target: o.probability for o in high}
    for target, p in low_by_target.items():
        assert high_by_target.get(target, 0.0) >= p - 1e-12


def test_reporting_floor_suppresses_weak_occurrences(annotated_model):
    bands = _bands_for_tables()
    all_occ = detect_blob(annotated_model, bands, "Shop", floor=0.0)
    floored = detect_blob(annotated_model, bands, "Shop", floor=0.5)
    assert len(floored) <= len(all_occ)
    assert all(o.probability >= 0.5 for o in floored)

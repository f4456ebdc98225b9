from __future__ import annotations

import random
from fractions import Fraction

import pytest

from oracles import ctmc_closed_network
from perfloop.arch_model import annotate, load_model
from perfloop.errors import ValidationError
from perfloop.qn import QNModel, QNStation, build_qn, mva_exact, open_to_closed, predict_for_workload
from perfloop.refactoring import clone_component


def _qn(demands, population, think=0.0):
    return QNModel(
        stations=tuple(QNStation(node_ref=f"n{i}", demand=d) for i, d in enumerate(demands)),
        population=population,
        think_time=think,
    )


def test_single_customer_single_station():
    result = mva_exact(_qn([1.0], 1))
    assert result.throughput == pytest.approx(1.0)
    assert result.response_time == pytest.approx(1.0)
    assert result.utilizations[0] == pytest.approx(1.0)
    assert result.queue_lengths[0] == pytest.approx(1.0)


def test_zero_population_all_zero():
    result = mva_exact(_qn([2.0, 0.5], 0))
    assert result.throughput == 0.0
    assert result.response_time == 0.0
    assert result.queue_lengths == (0.0, 0.0)


def test_two_station_exact_fractions():
    result = mva_exact(_qn([2.0, 1.0], 2))
    assert result.throughput == pytest.approx(3 / 7, abs=1e-15)
    assert result.response_time == pytest.approx(14 / 3, abs=1e-12)
    assert result.queue_lengths[0] == pytest.approx(10 / 7, abs=1e-15)
    assert result.queue_lengths[1] == pytest.approx(4 / 7, abs=1e-15)


def test_two_station_hand_recursion_with_fractions():
    # independent re-derivation of the same case with exact rationals
    demands = [Fraction(2), Fraction(1)]
    q = [Fraction(0), Fraction(0)]
    for n in range(1, 3):
        r = [d * (1 + qi) for d, qi in zip(demands, q)]
        x = Fraction(n) / sum(r)
        q = [x * ri for ri in r]
    assert x == Fraction(3, 7)
    assert sum(d * (1 + 0) for d in demands) != sum(r)  # recursion actually advanced
    assert sum(r) == Fraction(14, 3)


def test_littles_law_at_every_population_step():
    rng = random.Random(1)
    for _ in range(50):
        demands = [rng.uniform(0.05, 3.0) for _ in range(rng.randint(1, 4))]
        think = rng.choice([0.0, rng.uniform(0.0, 5.0)])
        for n in range(0, 6):
            result = mva_exact(_qn(demands, n, think))
            if n == 0:
                continue
            assert n == pytest.approx(
                result.throughput * (result.response_time + think), abs=1e-12
            )


def test_utilization_bounded_and_monotone_throughput():
    demands = [0.8, 0.3, 0.5]
    last_x, last_r = 0.0, 0.0
    for n in range(1, 30):
        result = mva_exact(_qn(demands, n))
        assert all(u <= 1.0 + 1e-12 for u in result.utilizations)
        assert result.throughput >= last_x - 1e-12
        assert result.response_time >= last_r - 1e-12
        last_x, last_r = result.throughput, result.response_time


def test_bottleneck_asymptote():
    demands = [0.8, 0.3, 0.5]
    result = mva_exact(_qn(demands, 200))
    assert result.throughput == pytest.approx(1 / 0.8, rel=0.01)


def test_demand_scaling():
    base = mva_exact(_qn([0.4, 0.9], 3))
    scaled = mva_exact(_qn([0.8, 1.8], 3))
    assert scaled.response_time == pytest.approx(2 * base.response_time, rel=1e-12)
    assert scaled.throughput == pytest.approx(base.throughput / 2, rel=1e-12)
    for a, b in zip(scaled.residence_times, base.residence_times):
        assert a == pytest.approx(2 * b, rel=1e-12)


def test_mva_agrees_with_ctmc_oracle_randomized():
    rng = random.Random(99)
    for _ in range(200):
        k = rng.randint(1, 3)
        demands = [round(rng.uniform(0.1, 3.0), 3) for _ in range(k)]
        population = rng.randint(0, 4)
        think = rng.choice([0.0, round(rng.uniform(0.1, 2.0), 3)])
        mva = mva_exact(_qn(demands, population, think))
        oracle = ctmc_closed_network(demands, population, think)
        assert mva.throughput == pytest.approx(oracle["X"], abs=1e-9)
        if population > 0:
            assert mva.response_time == pytest.approx(oracle["R"], abs=1e-9)
        for q_mva, q_oracle in zip(mva.queue_lengths, oracle["Q"]):
            assert q_mva == pytest.approx(q_oracle, abs=1e-9)
        for u_mva, u_oracle in zip(mva.utilizations, oracle["U"]):
            assert u_mva == pytest.approx(u_oracle, abs=1e-9)


BUILD_MODEL = """
components:
  - name: svc
    operations:
      - name: op
        service_demand: 0.1
nodes:
  - name: n-svc
    hosts: [svc]
node_links: []
scenarios:
  - name: only
    workload: {pattern: CLOSED, population: 1, think_time: 0.0}
    steps:
      - {caller: svc, callee: svc, operation: op}
"""


def test_build_single_station():
    model = load_model(BUILD_MODEL)
    qn = build_qn(model, [("only", 1.0)])
    assert len(qn.stations) == 1
    assert qn.stations[0].demand == pytest.approx(0.1)
    assert qn.population == 1


def test_build_after_clone_splits_demand():
    model = clone_component(load_model(BUILD_MODEL), "svc")
    qn = build_qn(model, [("only", 1.0)])
    assert len(qn.stations) == 2
    assert sorted(s.demand for s in qn.stations) == [pytest.approx(0.05)] * 2


def test_build_weighted_mix_halves_disjoint_demands():
    doc = """
components:
  - name: a
    operations:
      - name: opa
        service_demand: 0.2
  - name: b
    operations:
      - name: opb
        service_demand: 0.4
nodes:
  - name: na
    hosts: [a]
  - name: nb
    hosts: [b]
node_links: []
scenarios:
  - name: sa
    workload: {pattern: OPEN, rate: 1.0}
    steps:
      - {caller: a, callee: a, operation: opa}
  - name: sb
    workload: {pattern: OPEN, rate: 1.0}
    steps:
      - {caller: b, callee: b, operation: opb}
"""
    model = load_model(doc)
    qn = build_qn(model, [("sa", 0.5), ("sb", 0.5)])
    by_node = {s.node_ref: s.demand for s in qn.stations}
    assert by_node["na"] == pytest.approx(0.1)
    assert by_node["nb"] == pytest.approx(0.2)


def test_build_missing_demand_names_operation():
    model = load_model(BUILD_MODEL.replace("\n        service_demand: 0.1", ""))
    with pytest.raises(ValidationError, match="svc/op"):
        build_qn(model, [("only", 1.0)])


def test_build_empty_mix_rejected():
    model = load_model(BUILD_MODEL)
    with pytest.raises(ValidationError, match="mix"):
        build_qn(model, [])


def test_predict_trivial_station():
    model = load_model(BUILD_MODEL)
    prediction = predict_for_workload(model, "only")
    assert prediction["resp_time_s"] == pytest.approx(0.1)
    assert prediction["node_utilization"]["n-svc"] == pytest.approx(1.0)


def test_open_to_closed_interactive_fit():
    qn = _qn([0.1], 0)
    fitted = open_to_closed(rate=5.0, measured_resp_time=0.4, qn=qn)
    assert fitted.population == 2  # round(5.0 * 0.4)
    # think time comes from one interactive-law refinement: Z = N/rate - R(Z=0)
    r_at_zero = mva_exact(_qn([0.1], 2)).response_time
    assert fitted.think_time == pytest.approx(max(0.0, 2 / 5.0 - r_at_zero))


def test_open_to_closed_clamps_population_to_one():
    fitted = open_to_closed(rate=0.2, measured_resp_time=0.1, qn=_qn([0.1], 0))
    assert fitted.population == 1


def test_clone_of_busy_station_improves_predicted_resp_time():
    rng = random.Random(7)
    for _ in range(40):
        demand = rng.uniform(0.2, 1.0)
        others = [rng.uniform(0.01, demand * 0.6) for _ in range(rng.randint(0, 2))]
        population = rng.randint(2, 8)
        base = mva_exact(_qn([demand, *others], population))
        if base.utilizations[0] <= 0.5:
            continue
        split = mva_exact(_qn([demand / 2, demand / 2, *others], population))
        assert split.response_time < base.response_time


def test_clone_web_beats_clone_items_for_desktop_like_mix():
    # two-tier shape: the front component dominates the entry scenario,
    # so replicating it must help that scenario more than replicating the
    # backing store does
    doc = """
components:
  - name: web
    operations:
      - name: home
        service_demand: 0.21
  - name: items
    operations:
      - name: find
        service_demand: 0.042
nodes:
  - name: n-web
    hosts: [web]
  - name: n-items
    hosts: [items]
node_links:
  - [n-web, n-items]
scenarios:
  - name: Desktop
    workload: {pattern: OPEN, rate: 3.8}
    steps:
      - {caller: web, callee: web, operation: home}
      - {caller: web, callee: items, operation: find}
"""
    model = load_model(doc)
    model = annotate(model, "scenario_resp_time", "Desktop", 1.5)
    base = predict_for_workload(model, "Desktop")["resp_time_s"]
    with_web = predict_for_workload(clone_component(model, "web"), "Desktop")["resp_time_s"]
    with_items = predict_for_workload(clone_component(model, "items"), "Desktop")["resp_time_s"]
    assert with_web < with_items < base

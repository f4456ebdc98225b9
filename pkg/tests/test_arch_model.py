from __future__ import annotations

import pytest

from conftest import MINIMAL_MODEL
from perfloop.arch_model import ANNOTATION_KINDS, annotate, diff, dump_model, load_model
from perfloop.errors import TargetNotFoundError, ValidationError
from perfloop.fixtures import load_fixture
from perfloop.refactoring import clone_component


def test_minimal_document_loads_with_version_zero(minimal_model):
    assert minimal_model.version == 0
    assert [c.name for c in minimal_model.components] == ["web"]
    assert minimal_model.scenario("Browse").workload.rate == 1.0


def test_component_deployed_twice_rejected():
    doc = MINIMAL_MODEL.replace(
        "node_links: []",
        "  - name: container-other\n    hosts: [web]\nnode_links: []",
    )
    with pytest.raises(ValidationError, match="deployed twice"):
        load_model(doc)


def test_dangling_references_name_element_and_field():
    doc = MINIMAL_MODEL.replace("callee: web", "callee: ghost")
    with pytest.raises(ValidationError, match="ghost"):
        load_model(doc)
    doc = MINIMAL_MODEL.replace("operation: home", "operation: nope")
    with pytest.raises(ValidationError, match="nope"):
        load_model(doc)


def test_eshopper_fixture_has_nine_components():
    fx = load_fixture("eshopper")
    assert len(fx.model.components) == 9


def test_step_probability_range():
    doc = MINIMAL_MODEL.replace(
        "{caller: web, callee: web, operation: home}",
        "{caller: web, callee: web, operation: home, prob: 1.5}",
    )
    with pytest.raises(ValidationError, match="probability"):
        load_model(doc)


def test_annotate_scenario_resp_time(minimal_model):
    # the Desktop scenario's measured 1.564 s response time
    annotated = annotate(minimal_model, "scenario_resp_time", "Browse", 1.564)
    assert annotated.scenario("Browse").resp_time == 1.564
    assert annotated.version == minimal_model.version + 1
    assert minimal_model.scenario("Browse").resp_time is None  # original untouched


def test_annotate_out_of_range_utilization(minimal_model):
    with pytest.raises(ValidationError, match=r"\[0, 1\]"):
        annotate(minimal_model, "node_utilization", "container-web", 1.2)


def test_annotate_unknown_target_and_kind(minimal_model):
    with pytest.raises(TargetNotFoundError):
        annotate(minimal_model, "scenario_resp_time", "Ghost", 1.0)
    with pytest.raises(ValidationError, match="annotation kind"):
        annotate(minimal_model, "latency", "Browse", 1.0)


def test_annotate_twice_idempotent_content_version_plus_two(minimal_model):
    once = annotate(minimal_model, "service_demand", "web/home", 0.125)
    twice = annotate(once, "service_demand", "web/home", 0.125)
    assert dump_model(once) == dump_model(twice)
    assert twice.version == minimal_model.version + 2


def test_annotate_preserves_structure(three_tier_model):
    annotated = three_tier_model
    for kind, target, value in [
        ("service_demand", "web/home", 0.1),
        ("node_utilization", "container-web", 0.8),
        ("scenario_resp_time", "Browse", 0.5),
        ("scenario_throughput", "Browse", 2.0),
    ]:
        assert kind in ANNOTATION_KINDS
        annotated = annotate(annotated, kind, target, value)
    assert diff(three_tier_model, annotated).empty


def test_load_dump_round_trip(three_tier_model):
    annotated = annotate(three_tier_model, "service_demand", "items/find", 0.05)
    annotated = annotate(annotated, "node_utilization", "container-items", 0.33)
    reloaded = load_model(dump_model(annotated))
    assert dump_model(reloaded) == dump_model(annotated)
    assert reloaded.operation("items", "find").service_demand == 0.05
    assert reloaded.node("container-items").utilization == 0.33


def test_diff_self_is_empty(three_tier_model):
    assert diff(three_tier_model, three_tier_model).empty


def test_diff_against_clone(three_tier_model):
    cloned = clone_component(three_tier_model, "web")
    delta = diff(three_tier_model, cloned)
    assert delta.added_components == ("cloned-web",)
    assert delta.added_nodes == ("cloned-container-web",)
    assert len(delta.added_links) == 2  # mirrors gw-web and web-items
    assert not delta.removed_components and not delta.retargeted_steps


def test_diff_antisymmetry(three_tier_model):
    cloned = clone_component(three_tier_model, "items")
    forward = diff(three_tier_model, cloned)
    backward = diff(cloned, three_tier_model)
    assert forward.added_components == backward.removed_components
    assert forward.added_nodes == backward.removed_nodes
    assert forward.added_links == backward.removed_links


def test_diff_change_list_reconstructs_structure(three_tier_model):
    cloned = clone_component(three_tier_model, "web")
    delta = diff(three_tier_model, cloned)
    names = {c.name for c in three_tier_model.components} | set(delta.added_components)
    names -= set(delta.removed_components)
    assert names == {c.name for c in cloned.components}
    links = {l.as_pair() for l in three_tier_model.node_links} | set(delta.added_links)
    links -= set(delta.removed_links)
    assert links == {l.as_pair() for l in cloned.node_links}

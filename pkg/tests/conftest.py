from __future__ import annotations

import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from perfloop.arch_model import load_model
from perfloop.trace_ingest import build_log_model, parse_spans, parse_utilization

MINIMAL_MODEL = """
components:
  - name: web
    operations:
      - name: home
nodes:
  - name: container-web
    hosts: [web]
node_links: []
scenarios:
  - name: Browse
    workload: {pattern: OPEN, rate: 1.0}
    steps:
      - {caller: web, callee: web, operation: home}
"""

THREE_TIER_MODEL = """
components:
  - name: gw
    operations: []
  - name: web
    operations:
      - name: home
      - name: admin
  - name: items
    operations:
      - name: find
      - name: count
nodes:
  - name: container-gw
    hosts: [gw]
  - name: container-web
    hosts: [web]
  - name: container-items
    hosts: [items]
node_links:
  - [container-gw, container-web]
  - [container-web, container-items]
scenarios:
  - name: Browse
    workload: {pattern: OPEN, rate: 2.0}
    steps:
      - {caller: gw, callee: web, operation: home}
      - {caller: web, callee: items, operation: find}
      - {caller: web, callee: items, operation: count}
  - name: Admin
    workload: {pattern: OPEN, rate: 0.5}
    steps:
      - {caller: gw, callee: web, operation: admin}
      - {caller: web, callee: items, operation: count}
"""


@pytest.fixture
def minimal_model():
    return load_model(MINIMAL_MODEL)


@pytest.fixture
def three_tier_model():
    return load_model(THREE_TIER_MODEL)


def make_span(
    trace_id="t1",
    span_id="s1",
    parent_id=None,
    name="home",
    timestamp=1_000_000,
    duration=20_000,
    kind="SERVER",
    service="web",
) -> dict:
    rec = {
        "traceId": trace_id,
        "id": span_id,
        "name": name,
        "timestamp": timestamp,
        "duration": duration,
        "kind": kind,
        "localEndpoint": {"serviceName": service},
    }
    if parent_id:
        rec["parentId"] = parent_id
    return rec


def log_from_records(records, util=()):
    spans = parse_spans(json.dumps(records))
    samples = parse_utilization(json.dumps(list(util)))
    return build_log_model(spans, samples)

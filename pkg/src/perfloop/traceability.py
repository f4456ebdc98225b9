"""Generate explicit traceability links between a log model (runtime side)
and an architecture model (design side).

Four fixed correspondence rules, all name-based:
  Service2Component   service name == component name
  EndPoint2Signature  normalized endpoint name == operation name
  Span2Message        normalized span endpoint == step operation
  Trace2UseCase       normalized root-span endpoint == first step operation
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from enum import Enum

from perfloop.arch_model import ArchModel
from perfloop.errors import TargetNotFoundError
from perfloop.trace_ingest import LogModel

_URL_PREFIX = re.compile(r"^[a-z][a-z0-9+.-]*://[^/]*/?")


def normalize_endpoint(name: str, trim_url_prefix: bool = True) -> str:
    """Strip scheme+host ("http://categories/category" -> "category") and
    any leading slash so endpoint names compare against operation names."""
    if trim_url_prefix:
        name = _URL_PREFIX.sub("", name)
    return name.lstrip("/")


class LinkRule(str, Enum):
    TRACE2USECASE = "Trace2UseCase"
    SPAN2MESSAGE = "Span2Message"
    ENDPOINT2SIGNATURE = "EndPoint2Signature"
    SERVICE2COMPONENT = "Service2Component"


class Side(str, Enum):
    LEFT = "LEFT"  # runtime / log model
    RIGHT = "RIGHT"  # design / architecture model


@dataclass(frozen=True)
class TraceLinkEnd:
    side: Side
    element_kind: str
    element_ref: str


@dataclass(frozen=True)
class TraceLink:
    rule: LinkRule
    left_ends: tuple[TraceLinkEnd, ...]
    right_ends: tuple[TraceLinkEnd, ...]

    def _sort_key(self) -> tuple:
        return (
            self.rule.value,
            tuple(e.element_ref for e in self.left_ends),
            tuple(e.element_ref for e in self.right_ends),
        )


@dataclass(frozen=True)
class TraceModel:
    left_model_ref: str
    right_model_ref: str
    links: tuple[TraceLink, ...]
    known_refs: frozenset[str] = field(default=frozenset())
    unmatched_report: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "left": self.left_model_ref,
            "right": self.right_model_ref,
            "links": [
                {
                    "rule": link.rule.value,
                    "left": [
                        {"kind": e.element_kind, "ref": e.element_ref} for e in link.left_ends
                    ],
                    "right": [
                        {"kind": e.element_kind, "ref": e.element_ref} for e in link.right_ends
                    ],
                }
                for link in self.links
            ],
        }


def _left(kind: str, ref: str) -> TraceLinkEnd:
    return TraceLinkEnd(side=Side.LEFT, element_kind=kind, element_ref=ref)


def _right(kind: str, ref: str) -> TraceLinkEnd:
    return TraceLinkEnd(side=Side.RIGHT, element_kind=kind, element_ref=ref)


def _link(rule: LinkRule, left: TraceLinkEnd, right: TraceLinkEnd) -> TraceLink:
    return TraceLink(rule=rule, left_ends=(left,), right_ends=(right,))


def generate_links(
    log: LogModel, arch: ArchModel, trim_url_prefix: bool = True
) -> TraceModel:
    """Pure function of its inputs; output canonically ordered by rule then
    end refs. Unmatched elements yield no link but appear in the report."""
    links: set[TraceLink] = set()

    comp_names = {c.name for c in arch.components}
    for service in log.services:
        if service.name in comp_names:
            links.add(
                _link(
                    LinkRule.SERVICE2COMPONENT,
                    _left("Service", service.ref),
                    _right("Component", f"component:{service.name}"),
                )
            )

    ops_by_name: dict[str, list[str]] = {}
    for op in arch.all_operations():
        ops_by_name.setdefault(op.name, []).append(op.ref)
    for endpoint in log.endpoints:
        for op_ref in ops_by_name.get(normalize_endpoint(endpoint.name, trim_url_prefix), []):
            links.add(
                _link(
                    LinkRule.ENDPOINT2SIGNATURE,
                    _left("EndPoint", endpoint.ref),
                    _right("Operation", f"operation:{op_ref}"),
                )
            )

    steps_by_op: dict[str, list[str]] = {}
    for scenario in arch.scenarios:
        for i, step in enumerate(scenario.steps):
            steps_by_op.setdefault(step.operation, []).append(f"step:{scenario.name}/{i}")
    for trace in log.traces:
        for span in trace.spans:
            span_ref = f"span:{trace.id}/{span.span_id}"
            for step_ref in steps_by_op.get(normalize_endpoint(span.name, trim_url_prefix), []):
                links.add(
                    _link(
                        LinkRule.SPAN2MESSAGE,
                        _left("Span", span_ref),
                        _right("Message", step_ref),
                    )
                )

    first_ops = {s.name: s.steps[0].operation for s in arch.scenarios}
    for trace in log.traces:
        root_name = normalize_endpoint(trace.root.name, trim_url_prefix)
        for scenario_name, first_op in first_ops.items():
            if root_name == first_op:
                links.add(
                    _link(
                        LinkRule.TRACE2USECASE,
                        _left("Trace", trace.ref),
                        _right("UseCase", f"scenario:{scenario_name}"),
                    )
                )

    known: set[str] = set()
    for trace in log.traces:
        known.add(trace.ref)
        known.update(f"span:{trace.id}/{s.span_id}" for s in trace.spans)
    known.update(s.ref for s in log.services)
    known.update(e.ref for e in log.endpoints)
    known.update(f"component:{c.name}" for c in arch.components)
    known.update(f"operation:{op.ref}" for op in arch.all_operations())
    known.update(f"scenario:{s.name}" for s in arch.scenarios)
    for scenario in arch.scenarios:
        known.update(f"step:{scenario.name}/{i}" for i in range(len(scenario.steps)))

    ordered = tuple(sorted(links, key=TraceLink._sort_key))
    tm = TraceModel(
        left_model_ref="log",
        right_model_ref="arch",
        links=ordered,
        known_refs=frozenset(known),
    )
    return replace(tm, unmatched_report=coverage_report(tm, log, arch))


def links_for(trace_model: TraceModel, element_ref: str) -> list[TraceLink]:
    """All links containing the element as an end."""
    if trace_model.known_refs and element_ref not in trace_model.known_refs:
        raise TargetNotFoundError(f"unknown element ref {element_ref!r}")
    return [
        link
        for link in trace_model.links
        if any(e.element_ref == element_ref for e in link.left_ends + link.right_ends)
    ]


def coverage_report(trace_model: TraceModel, log: LogModel, arch: ArchModel) -> dict:
    """Elements participating in zero links of their rule."""
    linked: dict[LinkRule, set[str]] = {rule: set() for rule in LinkRule}
    for link in trace_model.links:
        for end in link.left_ends + link.right_ends:
            linked[link.rule].add(end.element_ref)

    return {
        "unmatched_services": sorted(
            s.name for s in log.services if s.ref not in linked[LinkRule.SERVICE2COMPONENT]
        ),
        "unmatched_endpoints": sorted(
            f"{e.service_name}/{e.name}"
            for e in log.endpoints
            if e.ref not in linked[LinkRule.ENDPOINT2SIGNATURE]
        ),
        "unmatched_traces": sorted(
            t.id for t in log.traces if t.ref not in linked[LinkRule.TRACE2USECASE]
        ),
        "unmatched_scenarios": sorted(
            s.name
            for s in arch.scenarios
            if f"scenario:{s.name}" not in linked[LinkRule.TRACE2USECASE]
        ),
    }

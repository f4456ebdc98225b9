"""Parse Zipkin-style span records and utilization samples into a log model.

Wire format, one object per span (array or newline-delimited):
    {"traceId": hex, "id": hex, "parentId": hex?, "name": str,
     "timestamp": int µs, "duration": int µs, "kind": "SERVER"|"CLIENT"?,
     "localEndpoint": {"serviceName": str}}
Utilization samples:
    {"service": str, "start": int µs, "end": int µs, "utilization": 0..1}
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

from perfloop.errors import ParseError, ValidationError


class SpanKind(str, Enum):
    SERVER = "SERVER"
    CLIENT = "CLIENT"
    UNDEFINED = "UNDEFINED"


@dataclass(frozen=True)
class SpanRecord:
    """One timed operation event inside a distributed trace."""

    trace_id: str
    span_id: str
    parent_id: str | None
    name: str
    timestamp: int  # µs since epoch
    duration: int  # µs
    kind: SpanKind
    service_name: str

    def __post_init__(self) -> None:
        if not self.trace_id or not self.span_id:
            raise ValidationError("span trace_id and span_id must be non-empty")
        if self.duration < 0:
            raise ValidationError(f"span {self.span_id}: negative duration {self.duration}")


@dataclass(frozen=True)
class UtilizationSample:
    """CPU utilization of one service over one observation window."""

    service_name: str
    window_start: int  # µs
    window_end: int  # µs
    utilization: float

    def __post_init__(self) -> None:
        if self.window_end <= self.window_start:
            raise ValidationError(
                f"utilization sample for {self.service_name}: window_end must exceed window_start"
            )
        if not 0.0 <= self.utilization <= 1.0:
            raise ValidationError(
                f"utilization sample for {self.service_name}: {self.utilization} outside [0, 1]"
            )


@dataclass(frozen=True)
class EndPoint:
    """A request URL, owned by exactly one service."""

    service_name: str
    name: str

    @property
    def ref(self) -> str:
        return f"endpoint:{self.service_name}/{self.name}"


@dataclass(frozen=True)
class Service:
    name: str
    utilization: float
    measured: bool = True  # False when no samples existed and 0 was assumed

    @property
    def ref(self) -> str:
        return f"service:{self.name}"


@dataclass(frozen=True)
class Trace:
    """Causally related spans of one request, ordered by timestamp."""

    id: str
    spans: tuple[SpanRecord, ...]

    @property
    def ref(self) -> str:
        return f"trace:{self.id}"

    @property
    def root(self) -> SpanRecord:
        for span in self.spans:
            if span.parent_id is None:
                return span
        raise ValidationError(f"trace {self.id} has no root span")


@dataclass(frozen=True)
class LogModel:
    traces: tuple[Trace, ...]
    services: tuple[Service, ...]
    endpoints: tuple[EndPoint, ...]
    warnings: tuple[str, ...] = field(default=())

    def service(self, name: str) -> Service:
        for svc in self.services:
            if svc.name == name:
                return svc
        raise ValidationError(f"unknown service {name!r}")

    @property
    def span_count(self) -> int:
        return sum(len(t.spans) for t in self.traces)


_REQUIRED_SPAN_FIELDS = ("traceId", "id", "timestamp", "duration")


def _decode_records(data: bytes | str, what: str) -> list[dict]:
    """Accept a JSON array or newline-delimited JSON objects."""
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    stripped = text.strip()
    if not stripped:
        return []
    if stripped.startswith("["):
        try:
            records = json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{what}: invalid JSON array: {exc}") from exc
        if not isinstance(records, list):
            raise ParseError(f"{what}: expected a JSON array")
        return records
    records = []
    for lineno, line in enumerate(stripped.splitlines()):
        line = line.strip()
        if not line:
            continue
        try:
            records.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise ParseError(f"{what}: record {lineno}: invalid JSON: {exc}") from exc
    return records


def parse_spans(data: bytes | str) -> list[SpanRecord]:
    """Decode wire-format span records; unknown fields are ignored."""
    spans = []
    for index, rec in enumerate(_decode_records(data, "spans")):
        if not isinstance(rec, dict):
            raise ParseError(f"span record {index}: expected an object")
        for fieldname in _REQUIRED_SPAN_FIELDS:
            if fieldname not in rec:
                raise ParseError(f"span record {index}: missing required field {fieldname!r}")
        try:
            kind = SpanKind(rec["kind"]) if "kind" in rec else SpanKind.UNDEFINED
        except ValueError:
            raise ParseError(
                f"span record {index}: field 'kind': unknown value {rec['kind']!r}"
            ) from None
        endpoint = rec.get("localEndpoint") or {}
        if not isinstance(endpoint, dict):
            raise ParseError(f"span record {index}: field 'localEndpoint': expected an object")
        try:
            span = SpanRecord(
                trace_id=str(rec["traceId"]),
                span_id=str(rec["id"]),
                parent_id=str(rec["parentId"]) if rec.get("parentId") else None,
                name=str(rec.get("name", "")),
                timestamp=int(rec["timestamp"]),
                duration=int(rec["duration"]),
                kind=kind,
                service_name=str(endpoint.get("serviceName", "")),
            )
        except (TypeError, ValueError) as exc:
            raise ParseError(f"span record {index}: {exc}") from exc
        except ValidationError as exc:
            raise ParseError(f"span record {index}: {exc}") from exc
        spans.append(span)
    return spans


def parse_utilization(data: bytes | str) -> list[UtilizationSample]:
    """Decode wire-format utilization samples."""
    samples = []
    for index, rec in enumerate(_decode_records(data, "utilization samples")):
        if not isinstance(rec, dict):
            raise ParseError(f"utilization record {index}: expected an object")
        for fieldname in ("service", "start", "end", "utilization"):
            if fieldname not in rec:
                raise ParseError(
                    f"utilization record {index}: missing required field {fieldname!r}"
                )
        try:
            samples.append(
                UtilizationSample(
                    service_name=str(rec["service"]),
                    window_start=int(rec["start"]),
                    window_end=int(rec["end"]),
                    utilization=float(rec["utilization"]),
                )
            )
        except (TypeError, ValueError, ValidationError) as exc:
            raise ParseError(f"utilization record {index}: {exc}") from exc
    return samples


def spans_to_wire(spans: list[SpanRecord] | tuple[SpanRecord, ...]) -> str:
    """Serialize spans back to the wire format (newline-delimited)."""
    lines = []
    for span in spans:
        rec: dict = {
            "traceId": span.trace_id,
            "id": span.span_id,
            "name": span.name,
            "timestamp": span.timestamp,
            "duration": span.duration,
            "localEndpoint": {"serviceName": span.service_name},
        }
        if span.parent_id is not None:
            rec["parentId"] = span.parent_id
        if span.kind is not SpanKind.UNDEFINED:
            rec["kind"] = span.kind.value
        lines.append(json.dumps(rec, sort_keys=True))
    return "\n".join(lines)


def utilization_to_wire(samples: list[UtilizationSample]) -> str:
    lines = []
    for s in samples:
        lines.append(
            json.dumps(
                {
                    "service": s.service_name,
                    "start": s.window_start,
                    "end": s.window_end,
                    "utilization": s.utilization,
                },
                sort_keys=True,
            )
        )
    return "\n".join(lines)


def build_log_model(
    spans: list[SpanRecord], util: list[UtilizationSample] | None = None
) -> LogModel:
    """Group spans into traces, derive services and endpoints, validate structure.

    Duplicate span ids within a trace keep the first occurrence (warned).
    Service utilization is the time-weighted mean of that service's samples;
    services without samples get utilization 0 and a warning flag.
    """
    util = util or []
    warnings: list[str] = []

    by_trace: dict[str, list[SpanRecord]] = {}
    for span in spans:
        by_trace.setdefault(span.trace_id, []).append(span)

    traces = []
    for trace_id in sorted(by_trace):
        group = sorted(by_trace[trace_id], key=lambda s: (s.timestamp, s.span_id))
        seen: dict[str, SpanRecord] = {}
        deduped = []
        for span in group:
            if span.span_id in seen:
                warnings.append(f"trace {trace_id}: duplicate span id {span.span_id}, kept first")
                continue
            seen[span.span_id] = span
            deduped.append(span)
        roots = [s for s in deduped if s.parent_id is None]
        if len(roots) != 1:
            raise ValidationError(
                f"trace {trace_id}: expected exactly one root span, found {len(roots)}"
            )
        for span in deduped:
            if span.parent_id is not None and span.parent_id not in seen:
                raise ValidationError(
                    f"trace {trace_id}: span {span.span_id} has dangling parent {span.parent_id}"
                )
        traces.append(Trace(id=trace_id, spans=tuple(deduped)))

    samples_by_service: dict[str, list[UtilizationSample]] = {}
    for sample in util:
        samples_by_service.setdefault(sample.service_name, []).append(sample)

    service_names = sorted(
        {s.service_name for s in spans if s.service_name} | set(samples_by_service)
    )
    services = []
    for name in service_names:
        samples = samples_by_service.get(name)
        if not samples:
            warnings.append(f"service {name}: no utilization samples, assuming 0")
            services.append(Service(name=name, utilization=0.0, measured=False))
            continue
        weight = sum(s.window_end - s.window_start for s in samples)
        mean = sum(s.utilization * (s.window_end - s.window_start) for s in samples) / weight
        services.append(Service(name=name, utilization=mean))

    endpoints = sorted({(s.service_name, s.name) for s in spans if s.service_name})
    return LogModel(
        traces=tuple(traces),
        services=tuple(services),
        endpoints=tuple(EndPoint(service_name=sn, name=n) for sn, n in endpoints),
        warnings=tuple(warnings),
    )


def summarize(log: LogModel) -> dict:
    """Report trace/span counts and per-service span counts and mean durations (µs)."""
    per_service: dict[str, dict] = {}
    for trace in log.traces:
        for span in trace.spans:
            entry = per_service.setdefault(span.service_name, {"spans": 0, "total_us": 0})
            entry["spans"] += 1
            entry["total_us"] += span.duration
    services = {
        name: {
            "spans": entry["spans"],
            "mean_duration_us": entry["total_us"] / entry["spans"],
        }
        for name, entry in sorted(per_service.items())
    }
    return {
        "traces": len(log.traces),
        "spans": log.span_count,
        "services": services,
    }

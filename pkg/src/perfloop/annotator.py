"""Compute performance indices from monitored data through the trace model
and write them into the architecture model's annotation slots.

Service demand follows D = V * S: V is the mean number of matching spans
per linked scenario invocation, S the mean SERVER-span duration in seconds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from perfloop.arch_model import ArchModel, annotate
from perfloop.errors import TargetNotFoundError
from perfloop.trace_ingest import LogModel, SpanKind
from perfloop.traceability import LinkRule, TraceModel, normalize_endpoint

US_PER_S = 1_000_000


@dataclass(frozen=True)
class DemandEstimate:
    operation_ref: str  # "component/operation"
    visits_per_invocation: float  # V
    mean_service_time: float  # S, seconds
    demand: float  # D = V * S, seconds
    sample_count: int

    def to_dict(self) -> dict:
        return {
            "operation": self.operation_ref,
            "visits": self.visits_per_invocation,
            "service_time_s": self.mean_service_time,
            "demand_s": self.demand,
            "samples": self.sample_count,
        }


@dataclass(frozen=True)
class MeasuredIndices:
    scenario_resp_time: dict[str, float]  # seconds
    scenario_throughput: dict[str, float]  # per second
    service_utilization: dict[str, float]
    warnings: tuple[str, ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "scenarios": {
                name: {
                    "resp_time_s": self.scenario_resp_time[name],
                    "throughput_per_s": self.scenario_throughput[name],
                }
                for name in sorted(self.scenario_resp_time)
            },
            "services": {
                name: {"utilization": u}
                for name, u in sorted(self.service_utilization.items())
            },
        }


def queueing_warnings(log: LogModel, gap_tolerance_us: int = 5000) -> list[str]:
    """Advisory check that a calibration log really was collected under
    light load: a gap between consecutive spans hints at queueing upstream."""
    flagged = []
    for trace in log.traces:
        for prev, cur in zip(trace.spans, trace.spans[1:]):
            if cur.timestamp - (prev.timestamp + prev.duration) > gap_tolerance_us:
                flagged.append(f"trace {trace.id}: span gap exceeds {gap_tolerance_us} µs")
                break
    return flagged


def _linked_traces(tm: TraceModel) -> dict[str, list[str]]:
    """scenario name -> trace ids linked by Trace2UseCase."""
    out: dict[str, list[str]] = {}
    for link in tm.links:
        if link.rule is not LinkRule.TRACE2USECASE:
            continue
        trace_id = link.left_ends[0].element_ref.split(":", 1)[1]
        scenario = link.right_ends[0].element_ref.split(":", 1)[1]
        out.setdefault(scenario, []).append(trace_id)
    return out


def _linked_operations(tm: TraceModel) -> dict[str, list[str]]:
    """normalized endpoint name -> operation refs linked by EndPoint2Signature."""
    out: dict[str, list[str]] = {}
    for link in tm.links:
        if link.rule is not LinkRule.ENDPOINT2SIGNATURE:
            continue
        endpoint_ref = link.left_ends[0].element_ref  # endpoint:<service>/<name>
        ep_name = endpoint_ref.split(":", 1)[1].split("/", 1)[1]
        op_ref = link.right_ends[0].element_ref.split(":", 1)[1]
        out.setdefault(normalize_endpoint(ep_name), []).append(op_ref)
    return out


def estimate_demands(
    log: LogModel, tm: TraceModel
) -> tuple[list[DemandEstimate], list[str]]:
    """Per linked operation: S = mean SERVER-span duration, V = mean matching
    spans per Trace2UseCase-linked trace, D = V*S. Returns (estimates, report)
    where the report lists operations excluded for lack of spans and any
    light-load warnings. UNDEFINED-kind spans are excluded."""
    report = list(queueing_warnings(log))

    linked_trace_ids = {tid for ids in _linked_traces(tm).values() for tid in ids}
    op_by_endpoint = _linked_operations(tm)

    durations: dict[str, list[int]] = {}  # op ref -> SERVER span durations (µs)
    visits: dict[str, dict[str, int]] = {}  # op ref -> trace id -> span count
    for trace in log.traces:
        for span in trace.spans:
            if span.kind is not SpanKind.SERVER:
                continue
            for op_ref in op_by_endpoint.get(normalize_endpoint(span.name), []):
                durations.setdefault(op_ref, []).append(span.duration)
                if trace.id in linked_trace_ids:
                    per_trace = visits.setdefault(op_ref, {})
                    per_trace[trace.id] = per_trace.get(trace.id, 0) + 1

    estimates = []
    all_linked_ops = sorted({ref for refs in op_by_endpoint.values() for ref in refs})
    model_ops = {
        ref.split(":", 1)[1] for ref in tm.known_refs if ref.startswith("operation:")
    }
    for op_ref in sorted(model_ops - set(all_linked_ops)):
        report.append(f"operation {op_ref}: no linked endpoint, excluded")
    for op_ref in all_linked_ops:
        samples = durations.get(op_ref, [])
        if not samples:
            report.append(f"operation {op_ref}: no linked SERVER spans, excluded")
            continue
        mean_s = sum(samples) / len(samples) / US_PER_S
        per_trace_counts = visits.get(op_ref, {})
        if per_trace_counts:
            v = sum(per_trace_counts.values()) / len(per_trace_counts)
        else:
            v = 1.0  # spans exist but none inside a linked trace
            report.append(f"operation {op_ref}: no spans in linked traces, visits defaulted to 1")
        estimates.append(
            DemandEstimate(
                operation_ref=op_ref,
                visits_per_invocation=v,
                mean_service_time=mean_s,
                demand=v * mean_s,
                sample_count=len(samples),
            )
        )
    return estimates, report


def measure_indices(log: LogModel, tm: TraceModel, window: float) -> MeasuredIndices:
    """Scenario response time = mean root-span duration of linked traces;
    throughput = linked-trace count / window; utilization passed through."""
    if window <= 0:
        raise ValueError("window must be positive")
    warnings = []
    traces_by_id = {t.id: t for t in log.traces}
    resp: dict[str, float] = {}
    thr: dict[str, float] = {}
    for scenario, trace_ids in sorted(_linked_traces(tm).items()):
        present = [traces_by_id[tid] for tid in trace_ids if tid in traces_by_id]
        if not present:
            warnings.append(f"scenario {scenario}: zero linked traces, omitted")
            continue
        resp[scenario] = sum(t.root.duration for t in present) / len(present) / US_PER_S
        thr[scenario] = len(present) / window
    return MeasuredIndices(
        scenario_resp_time=resp,
        scenario_throughput=thr,
        service_utilization={s.name: s.utilization for s in log.services},
        warnings=tuple(warnings),
    )


def write_back(
    model: ArchModel, demands: list[DemandEstimate], indices: MeasuredIndices | None = None
) -> ArchModel:
    """Apply demands and indices to their annotation slots. Structure is
    untouched; the version counter is incremented exactly once."""
    start_version = model.version
    for est in demands:
        model = annotate(model, "service_demand", est.operation_ref, est.demand)
    if indices is not None:
        for scenario, value in sorted(indices.scenario_resp_time.items()):
            model = annotate(model, "scenario_resp_time", scenario, value)
        for scenario, value in sorted(indices.scenario_throughput.items()):
            model = annotate(model, "scenario_throughput", scenario, value)
        node_values: dict[str, float] = {}
        for service, value in sorted(indices.service_utilization.items()):
            if not model.has_component(service):
                raise TargetNotFoundError(
                    f"measured service {service!r} has no matching component"
                )
            node = model.node_of(service)
            # several components may share a node: keep the max (conservative)
            node_values[node.name] = max(node_values.get(node.name, 0.0), value)
        for node_name, value in sorted(node_values.items()):
            model = annotate(model, "node_utilization", node_name, min(value, 1.0))
    return ArchModel(
        components=model.components,
        nodes=model.nodes,
        node_links=model.node_links,
        scenarios=model.scenarios,
        version=start_version + 1,
    )


def demands_table(demands: list[DemandEstimate]) -> str:
    """Aligned text table for CLI output."""
    header = f"{'operation':<40} {'V':>8} {'S [s]':>12} {'D [s]':>12} {'n':>6}"
    rows = [header, "-" * len(header)]
    for est in demands:
        rows.append(
            f"{est.operation_ref:<40} {est.visits_per_invocation:>8.3f} "
            f"{est.mean_service_time:>12.6f} {est.demand:>12.6f} {est.sample_count:>6d}"
        )
    return "\n".join(rows)


def indices_table(indices: MeasuredIndices) -> str:
    lines = [f"{'scenario':<24} {'respT [s]':>12} {'X [1/s]':>10}"]
    lines.append("-" * len(lines[0]))
    for name in sorted(indices.scenario_resp_time):
        lines.append(
            f"{name:<24} {indices.scenario_resp_time[name]:>12.6f} "
            f"{indices.scenario_throughput[name]:>10.4f}"
        )
    lines.append("")
    lines.append(f"{'service':<24} {'U':>8}")
    lines.append("-" * 33)
    for name, u in sorted(indices.service_utilization.items()):
        lines.append(f"{name:<24} {u:>8.4f}")
    return "\n".join(lines)

"""Closed product-form queueing network built from the annotated
architecture model, solved by exact single-class Mean-Value Analysis.

Recursion for n = 1..N:
    R_k(n) = D_k * (1 + Q_k(n-1))
    X(n)   = n / (Z + sum_k R_k(n))
    Q_k(n) = X(n) * R_k(n)
Stations are FCFS and load-independent; think time is modeled via Z only.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from perfloop.arch_model import ArchModel, WorkloadPattern
from perfloop.errors import TargetNotFoundError, ValidationError


@dataclass(frozen=True)
class QNStation:
    node_ref: str
    demand: float  # seconds per job

    def __post_init__(self) -> None:
        if self.demand < 0:
            raise ValidationError(f"station {self.node_ref}: negative demand")


@dataclass(frozen=True)
class QNModel:
    stations: tuple[QNStation, ...]
    population: int
    think_time: float

    def __post_init__(self) -> None:
        if not self.stations:
            raise ValidationError("queueing model needs at least one station")
        if self.population < 0 or self.think_time < 0:
            raise ValidationError("population and think time must be non-negative")

    @property
    def demands(self) -> tuple[float, ...]:
        return tuple(s.demand for s in self.stations)


@dataclass(frozen=True)
class MVAResult:
    throughput: float  # X
    response_time: float  # R = sum of residence times
    residence_times: tuple[float, ...]  # R_k
    queue_lengths: tuple[float, ...]  # Q_k
    utilizations: tuple[float, ...]  # U_k = X * D_k
    demands: tuple[float, ...]  # D_k
    station_refs: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "throughput_per_s": self.throughput,
            "response_time_s": self.response_time,
            "stations": [
                {
                    "node": ref,
                    "demand_s": d,
                    "residence_s": r,
                    "queue_length": q,
                    "utilization": u,
                }
                for ref, d, r, q, u in zip(
                    self.station_refs, self.demands, self.residence_times,
                    self.queue_lengths, self.utilizations,
                )
            ],
        }


def mva_exact(qn: QNModel) -> MVAResult:
    """Exact MVA; N = 0 yields the all-zero result."""
    demands = qn.demands
    k = len(demands)
    q = [0.0] * k
    x = 0.0
    r = [0.0] * k
    for n in range(1, qn.population + 1):
        r = [demands[i] * (1.0 + q[i]) for i in range(k)]
        x = n / (qn.think_time + sum(r))
        q = [x * r[i] for i in range(k)]
    return MVAResult(
        throughput=x,
        response_time=sum(r),
        residence_times=tuple(r),
        queue_lengths=tuple(q),
        utilizations=tuple(x * d for d in demands),
        demands=demands,
        station_refs=tuple(s.node_ref for s in qn.stations),
    )


def build_qn(model: ArchModel, scenario_mix: list[tuple[str, float]]) -> QNModel:
    """Aggregate per-node demands over the weighted scenario mix.

    A step calling component c contributes weight * prob * demand(c, op),
    split equally among c and its clone replicas (each on its own node).
    Population/think time are taken from the workload when the mix is a
    single CLOSED scenario, else left zero for the caller to fill in.
    """
    if not scenario_mix:
        raise ValidationError("scenario mix must not be empty")
    total_weight = sum(w for _, w in scenario_mix)
    if abs(total_weight - 1.0) > 1e-9:
        raise ValidationError(f"scenario mix weights must sum to 1, got {total_weight}")

    node_demand: dict[str, float] = {}
    for scenario_name, weight in scenario_mix:
        scenario = model.scenario(scenario_name)
        for step in scenario.steps:
            replicas = [step.callee, *model.clones_of(step.callee)]
            owners = [
                name
                for name in replicas
                if any(op.name == step.operation for op in model.component(name).operations)
            ]
            if not owners:
                raise TargetNotFoundError(
                    f"scenario {scenario_name}: no component serves {step.callee}/{step.operation}"
                )
            for owner in owners:
                op = model.operation(owner, step.operation)
                if op.service_demand is None:
                    raise ValidationError(
                        f"operation {op.ref} has no service demand annotation"
                    )
                share = weight * step.exec_probability * op.service_demand / len(owners)
                node = model.node_of(owner).name
                node_demand[node] = node_demand.get(node, 0.0) + share

    stations = tuple(
        QNStation(node_ref=name, demand=d) for name, d in sorted(node_demand.items()) if d > 0
    )
    if not stations:
        raise ValidationError("scenario mix produced no positive station demand")

    population, think = 0, 0.0
    if len(scenario_mix) == 1:
        workload = model.scenario(scenario_mix[0][0]).workload
        if workload.pattern is WorkloadPattern.CLOSED:
            population, think = workload.population, workload.think_time
    return QNModel(stations=stations, population=population, think_time=think)


def open_to_closed(rate: float, measured_resp_time: float, qn: QNModel) -> QNModel:
    """Fit an open arrival rate to a closed (N, Z) pair via the interactive
    law: N = round(rate * respT) clamped to >= 1, then one Z = N/rate - R
    refinement using the predicted R at Z = 0."""
    population = max(1, round(rate * measured_resp_time))
    base = replace(qn, population=population, think_time=0.0)
    predicted = mva_exact(base)
    think = max(0.0, population / rate - predicted.response_time)
    return replace(qn, population=population, think_time=think)


def predict_for_workload(model: ArchModel, scenario_name: str) -> dict:
    """Solve the scenario's queueing model and map results back to node names.

    OPEN workloads are converted to a closed population using the scenario's
    measured response-time annotation (required).
    """
    scenario = model.scenario(scenario_name)
    qn = build_qn(model, [(scenario_name, 1.0)])
    if scenario.workload.pattern is WorkloadPattern.OPEN:
        if scenario.resp_time is None:
            raise ValidationError(
                f"scenario {scenario_name}: OPEN workload needs a measured resp_time annotation"
            )
        qn = open_to_closed(scenario.workload.rate, scenario.resp_time, qn)
    result = mva_exact(qn)
    return {
        "scenario": scenario_name,
        "resp_time_s": result.response_time,
        "throughput_per_s": result.throughput,
        "population": qn.population,
        "think_time_s": qn.think_time,
        "node_utilization": dict(zip(result.station_refs, result.utilizations)),
        "node_residence_s": dict(zip(result.station_refs, result.residence_times)),
    }


def mva_table(result: MVAResult) -> str:
    """Aligned text table for CLI output."""
    header = f"{'station':<32} {'D [s]':>10} {'R_k [s]':>10} {'Q_k':>8} {'U_k':>8}"
    lines = [header, "-" * len(header)]
    for ref, d, r, q, u in zip(
        result.station_refs, result.demands, result.residence_times, result.queue_lengths,
        result.utilizations,
    ):
        lines.append(f"{ref:<32} {d:>10.6f} {r:>10.6f} {q:>8.4f} {u:>8.4f}")
    lines.append(f"totals: X = {result.throughput:.6f}/s, R = {result.response_time:.6f} s")
    return "\n".join(lines)

"""Deterministic discrete-event simulator standing in for the running
microservice system.

Scenarios arrive as Poisson streams; each arrival walks its steps in
sequence through FCFS single-server instances with exponential service
times. Every executed step emits a SERVER span whose duration is the true
queue+service sojourn; the trace's root span carries the end-to-end
response time. Runtime refactorings (replica + round-robin, operation
re-routing) are applied online between runs. Identical (seed, system, run
config) triples produce bit-identical outputs.

Time is milliseconds internally and microseconds on the wire.
"""

from __future__ import annotations

import copy
import heapq
import random
from dataclasses import dataclass, field

from perfloop.arch_model import ArchModel, Scenario
from perfloop.errors import TargetNotFoundError, ValidationError

MS_PER_S = 1_000.0
US_PER_MS = 1_000.0


@dataclass
class SimInstance:
    name: str  # doubles as the service name on emitted spans
    node: str
    op_means_ms: dict[str, float]
    # per-run state
    queue: list = field(default_factory=list)
    serving: object | None = None
    busy_ms: float = 0.0


@dataclass
class Route:
    instances: list[str]
    cursor: int = 0

    def next_instance(self) -> str:
        name = self.instances[self.cursor]
        self.cursor = (self.cursor + 1) % len(self.instances)
        return name


@dataclass
class SimSystem:
    instances: dict[str, SimInstance]
    routes: dict[tuple[str, str], Route]  # (callee component, operation) -> route
    scenarios: tuple[Scenario, ...]
    generation: int = 0


@dataclass(frozen=True)
class SimRunConfig:
    seed: int
    duration_s: float
    warmup_s: float
    arrivals: tuple[tuple[str, float], ...]  # (scenario name, rate per second)
    service_means: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.warmup_s >= self.duration_s:
            raise ValidationError("warmup must be shorter than the run duration")
        for scenario, rate in self.arrivals:
            if rate < 0:
                raise ValidationError(f"arrival rate for {scenario} must be >= 0")

    @staticmethod
    def from_dict(raw: dict) -> SimRunConfig:
        return SimRunConfig(
            seed=int(raw["seed"]),
            duration_s=float(raw["duration_s"]),
            warmup_s=float(raw["warmup_s"]),
            arrivals=tuple(
                (str(a["scenario"]), float(a["rate_per_s"])) for a in raw.get("arrivals", [])
            ),
            service_means={str(k): float(v) for k, v in (raw.get("service_means") or {}).items()},
        )

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "duration_s": self.duration_s,
            "warmup_s": self.warmup_s,
            "arrivals": [{"scenario": s, "rate_per_s": r} for s, r in self.arrivals],
            "service_means": dict(sorted(self.service_means.items())),
        }


@dataclass(frozen=True)
class SimOutput:
    spans: tuple[dict, ...]  # wire-format span objects
    utilization: tuple[dict, ...]  # wire-format utilization samples
    arrivals: int
    completed: int  # finished before the horizon
    errors: int  # in flight when the horizon closed
    emitted_traces: int  # completed post-warmup traces present in `spans`


def resolve_service_mean(
    component: str, operation: str, model: ArchModel, table: dict[str, float]
) -> float:
    """Lookup order: "component/operation" table key, bare operation key,
    then the model's service-demand annotation."""
    for key in (f"{component}/{operation}", operation):
        if key in table:
            return table[key]
    op = model.operation(component, operation)
    if op.service_demand is not None:
        return op.service_demand
    raise ValidationError(f"no service-time mean for operation {component}/{operation}")


def instantiate(model: ArchModel, service_means: dict[str, float] | None = None) -> SimSystem:
    """One instance per component on its node; each (callee, operation) pair
    routes to the callee and its clone replicas, in model order."""
    table = service_means or {}
    needed: set[tuple[str, str]] = set()
    for scenario in model.scenarios:
        for step in scenario.steps:
            needed.add((step.callee, step.operation))

    instances: dict[str, SimInstance] = {}
    for comp in model.components:
        means = {}
        for op in comp.operations:
            try:
                means[op.name] = resolve_service_mean(comp.name, op.name, model, table) * MS_PER_S
            except ValidationError:
                if any(callee == comp.name and opname == op.name for callee, opname in needed) or (
                    comp.is_clone_of is not None
                ):
                    raise
                continue  # component never invoked; mean not required
        instances[comp.name] = SimInstance(
            name=comp.name, node=model.node_of(comp.name).name, op_means_ms=means
        )

    routes: dict[tuple[str, str], Route] = {}
    for callee, opname in sorted(needed):
        serving = [callee, *model.clones_of(callee)]
        owners = [
            name
            for name in serving
            if any(op.name == opname for op in model.component(name).operations)
        ]
        if not owners:
            raise ValidationError(f"no component serves {callee}/{opname}")
        for owner in owners:
            if opname not in instances[owner].op_means_ms:
                instances[owner].op_means_ms[opname] = resolve_service_mean(
                    owner, opname, model, table
                ) * MS_PER_S
        routes[(callee, opname)] = Route(instances=owners)

    return SimSystem(instances=instances, routes=routes, scenarios=model.scenarios)


def apply_system_refactoring(sys: SimSystem, action) -> SimSystem:
    """Return a new system with the action applied online; the topology
    generation counter increments by one."""
    from perfloop.refactoring import ActionKind  # local import avoids a cycle

    out = copy.deepcopy(sys)
    if action.kind is ActionKind.CLONE:
        component = action.target
        if component not in out.instances:
            raise TargetNotFoundError(f"unknown service {component!r}")
        original = out.instances[component]
        replica_name = _fresh(f"cloned-{component}", set(out.instances))
        out.instances[replica_name] = SimInstance(
            name=replica_name,
            node=_fresh(f"cloned-container-{component}", {i.node for i in out.instances.values()}),
            op_means_ms=dict(original.op_means_ms),
        )
        for route in out.routes.values():
            if component in route.instances:
                route.instances.append(replica_name)
    else:
        component, operation = action.component, action.operation
        if component not in out.instances:
            raise TargetNotFoundError(f"unknown service {component!r}")
        key = (component, operation)
        if key not in out.routes:
            raise TargetNotFoundError(f"no route for operation {component}/{operation}")
        mean = out.instances[component].op_means_ms.get(operation)
        if mean is None:
            raise TargetNotFoundError(f"{component} does not serve {operation}")
        new_name = _fresh(f"cloned-{component}", set(out.instances))
        out.instances[new_name] = SimInstance(
            name=new_name,
            node=_fresh(f"cloned-container-{component}", {i.node for i in out.instances.values()}),
            op_means_ms={operation: mean},
        )
        out.instances[component].op_means_ms.pop(operation, None)
        out.routes[key] = Route(instances=[new_name])
    out.generation += 1
    return out


def _fresh(base: str, taken: set[str]) -> str:
    if base not in taken:
        return base
    suffix = 2
    while f"{base}-{suffix}" in taken:
        suffix += 1
    return f"{base}-{suffix}"


@dataclass
class _Job:
    trace_id: str
    arrival_ms: float
    steps: list[tuple[str, str, float, str]]  # (callee, operation, service_ms, span_id)
    index: int = 0
    spans: list[dict] = field(default_factory=list)
    last_span_id: str | None = None
    enqueued_ms: float = 0.0


def run(sys: SimSystem, cfg: SimRunConfig) -> SimOutput:
    """Execute one simulation run; the system's queues are reset first."""
    rng = random.Random(cfg.seed)
    horizon_ms = cfg.duration_s * MS_PER_S
    warmup_ms = cfg.warmup_s * MS_PER_S

    scenarios = {s.name: s for s in sys.scenarios}
    for name, _ in cfg.arrivals:
        if name not in scenarios:
            raise TargetNotFoundError(f"run config references unknown scenario {name!r}")
    for inst in sys.instances.values():
        inst.queue = []
        inst.serving = None
        inst.busy_ms = 0.0

    heap: list[tuple[float, int, int, object]] = []
    seq = 0
    ARRIVAL, DONE = 0, 1

    def push(t: float, kind: int, payload: object) -> None:
        nonlocal seq
        heapq.heappush(heap, (t, seq, kind, payload))
        seq += 1

    for scenario_name, rate in cfg.arrivals:
        if rate > 0:
            push(rng.expovariate(rate) * MS_PER_S, ARRIVAL, scenario_name)

    spans_out: list[dict] = []
    arrivals = completed = errors = emitted = 0

    def start_service(inst: SimInstance, t: float) -> None:
        job, service_ms = inst.serving
        end = t + service_ms
        inst.busy_ms += max(0.0, min(end, horizon_ms) - max(t, warmup_ms))
        push(end, DONE, inst.name)

    def enqueue_step(job: _Job, t: float) -> None:
        callee, operation, service_ms, _span_id = job.steps[job.index]
        inst = sys.instances[sys.routes[(callee, operation)].next_instance()]
        job.enqueued_ms = t
        if inst.serving is None:
            inst.serving = (job, service_ms)
            start_service(inst, t)
        else:
            inst.queue.append((job, service_ms))

    def finish_job(job: _Job, t: float) -> None:
        nonlocal completed, emitted
        completed += 1
        if job.arrival_ms >= warmup_ms and job.spans:
            # root span reports the end-to-end response time
            job.spans[0]["duration"] = round((t - job.arrival_ms) * US_PER_MS)
            spans_out.extend(job.spans)
            emitted += 1

    def advance(job: _Job, t: float) -> None:
        while job.index < len(job.steps) and job.steps[job.index][2] < 0:
            job.index += 1  # step not executed this time (probability draw)
        if job.index >= len(job.steps):
            finish_job(job, t)
        else:
            enqueue_step(job, t)

    while heap:
        t, _, kind, payload = heapq.heappop(heap)
        if t > horizon_ms:
            break
        if kind == ARRIVAL:
            scenario_name = payload
            scenario = scenarios[scenario_name]
            rate = dict(cfg.arrivals)[scenario_name]
            push(t + rng.expovariate(rate) * MS_PER_S, ARRIVAL, scenario_name)
            arrivals += 1
            trace_id = f"{rng.getrandbits(64):016x}"
            steps = []
            for step in scenario.steps:
                executed = step.exec_probability >= 1.0 or rng.random() < step.exec_probability
                mean = sys.instances[
                    sys.routes[(step.callee, step.operation)].instances[0]
                ].op_means_ms[step.operation]
                service_ms = rng.expovariate(1.0 / mean) if executed else -1.0
                steps.append(
                    (step.callee, step.operation, service_ms, f"{rng.getrandbits(64):016x}")
                )
            job = _Job(trace_id=trace_id, arrival_ms=t, steps=steps)
            advance(job, t)
        else:
            inst = sys.instances[payload]
            job, service_ms = inst.serving
            callee, operation, _, span_id = job.steps[job.index]
            job.spans.append(
                {
                    "traceId": job.trace_id,
                    "id": span_id,
                    **({"parentId": job.last_span_id} if job.last_span_id else {}),
                    "name": operation,
                    "timestamp": round(job.enqueued_ms * US_PER_MS),
                    "duration": round((t - job.enqueued_ms) * US_PER_MS),
                    "kind": "SERVER",
                    "localEndpoint": {"serviceName": inst.name},
                }
            )
            job.last_span_id = span_id
            job.index += 1
            if inst.queue:
                inst.serving = inst.queue.pop(0)
                start_service(inst, t)
            else:
                inst.serving = None
            advance(job, t)

    for inst in sys.instances.values():
        errors += len(inst.queue) + (1 if inst.serving is not None else 0)

    window_ms = horizon_ms - warmup_ms
    util = tuple(
        {
            "service": name,
            "start": round(warmup_ms * US_PER_MS),
            "end": round(horizon_ms * US_PER_MS),
            "utilization": min(1.0, inst.busy_ms / window_ms),
        }
        for name, inst in sorted(sys.instances.items())
    )
    return SimOutput(
        spans=tuple(spans_out),
        utilization=util,
        arrivals=arrivals,
        completed=completed,
        errors=errors,
        emitted_traces=emitted,
    )

"""Design-side architecture model: components, operations, nodes, deployment,
scenarios, plus the annotation slots that carry measured performance indices.

The model document is YAML with top-level keys components[], nodes[],
node_links[], scenarios[]; annotations appear inline under their elements.
Every mutation returns a new model with the version counter incremented.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field, replace
from enum import Enum

import yaml

from perfloop.errors import TargetNotFoundError, ValidationError


class WorkloadPattern(str, Enum):
    OPEN = "OPEN"
    CLOSED = "CLOSED"


@dataclass(frozen=True)
class Workload:
    pattern: WorkloadPattern
    rate: float | None = None  # per second, OPEN
    population: int | None = None  # CLOSED
    think_time: float | None = None  # seconds, CLOSED

    def __post_init__(self) -> None:
        if self.pattern is WorkloadPattern.OPEN:
            if self.rate is None or self.rate <= 0:
                raise ValidationError("OPEN workload requires rate > 0")
        else:
            if self.population is None or self.population < 0:
                raise ValidationError("CLOSED workload requires population >= 0")
            if self.think_time is None or self.think_time < 0:
                raise ValidationError("CLOSED workload requires think_time >= 0")


@dataclass(frozen=True)
class Operation:
    name: str  # doubles as the endpoint path for log matching
    owner: str
    service_demand: float | None = None  # seconds, annotation slot

    def __post_init__(self) -> None:
        if self.service_demand is not None and self.service_demand < 0:
            raise ValidationError(f"operation {self.ref}: negative service demand")

    @property
    def ref(self) -> str:
        return f"{self.owner}/{self.name}"


@dataclass(frozen=True)
class Component:
    name: str
    operations: tuple[Operation, ...]
    is_clone_of: str | None = None

    def operation(self, name: str) -> Operation:
        for op in self.operations:
            if op.name == name:
                return op
        raise TargetNotFoundError(f"component {self.name} has no operation {name!r}")


@dataclass(frozen=True)
class Node:
    name: str
    hosts: tuple[str, ...]
    utilization: float | None = None  # annotation slot

    def __post_init__(self) -> None:
        if self.utilization is not None and not 0.0 <= self.utilization <= 1.0:
            raise ValidationError(f"node {self.name}: utilization outside [0, 1]")


@dataclass(frozen=True)
class NodeLink:
    """Unordered pair of node names."""

    endpoints: frozenset[str]

    def __post_init__(self) -> None:
        if len(self.endpoints) != 2:
            raise ValidationError(f"node link must join two distinct nodes: {set(self.endpoints)}")

    @staticmethod
    def between(a: str, b: str) -> NodeLink:
        return NodeLink(endpoints=frozenset((a, b)))

    def other(self, name: str) -> str:
        (other,) = self.endpoints - {name}
        return other

    def as_pair(self) -> tuple[str, str]:
        return tuple(sorted(self.endpoints))  # type: ignore[return-value]


@dataclass(frozen=True)
class Step:
    caller: str
    callee: str
    operation: str
    exec_probability: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 < self.exec_probability <= 1.0:
            raise ValidationError(
                f"step {self.caller}->{self.callee}.{self.operation}: probability outside (0, 1]"
            )


@dataclass(frozen=True)
class Scenario:
    name: str
    workload: Workload
    steps: tuple[Step, ...]
    resp_time: float | None = None  # seconds, annotation slot
    throughput: float | None = None  # per second, annotation slot

    def __post_init__(self) -> None:
        if not self.steps:
            raise ValidationError(f"scenario {self.name}: steps must be non-empty")


@dataclass(frozen=True)
class ArchModel:
    components: tuple[Component, ...]
    nodes: tuple[Node, ...]
    node_links: tuple[NodeLink, ...]
    scenarios: tuple[Scenario, ...]
    version: int = 0

    # -- lookups ---------------------------------------------------------

    def component(self, name: str) -> Component:
        for comp in self.components:
            if comp.name == name:
                return comp
        raise TargetNotFoundError(f"unknown component {name!r}")

    def has_component(self, name: str) -> bool:
        return any(c.name == name for c in self.components)

    def node(self, name: str) -> Node:
        for node in self.nodes:
            if node.name == name:
                return node
        raise TargetNotFoundError(f"unknown node {name!r}")

    def scenario(self, name: str) -> Scenario:
        for scenario in self.scenarios:
            if scenario.name == name:
                return scenario
        raise TargetNotFoundError(f"unknown scenario {name!r}")

    def operation(self, component: str, operation: str) -> Operation:
        return self.component(component).operation(operation)

    def node_of(self, component: str) -> Node:
        for node in self.nodes:
            if component in node.hosts:
                return node
        raise TargetNotFoundError(f"component {component!r} is not deployed on any node")

    def links_of(self, node_name: str) -> tuple[NodeLink, ...]:
        return tuple(l for l in self.node_links if node_name in l.endpoints)

    def all_operations(self) -> tuple[Operation, ...]:
        return tuple(op for comp in self.components for op in comp.operations)

    def clones_of(self, component: str) -> tuple[str, ...]:
        """Transitive clone descendants of a component, in model order."""
        out: list[str] = []
        frontier = {component}
        while True:
            added = [
                c.name
                for c in self.components
                if c.is_clone_of in frontier and c.name not in out and c.name != component
            ]
            if not added:
                return tuple(out)
            out.extend(added)
            frontier = set(added)


def validate(model: ArchModel) -> None:
    """Check referential integrity and the one-node-per-component rule."""
    comp_names = [c.name for c in model.components]
    if len(comp_names) != len(set(comp_names)):
        raise ValidationError("duplicate component names")
    node_names = [n.name for n in model.nodes]
    if len(node_names) != len(set(node_names)):
        raise ValidationError("duplicate node names")
    scen_names = [s.name for s in model.scenarios]
    if len(scen_names) != len(set(scen_names)):
        raise ValidationError("duplicate scenario names")

    comp_set = set(comp_names)
    node_set = set(node_names)

    for comp in model.components:
        op_names = [op.name for op in comp.operations]
        if len(op_names) != len(set(op_names)):
            raise ValidationError(f"component {comp.name}: duplicate operation names")
        for op in comp.operations:
            if op.owner != comp.name:
                raise ValidationError(f"operation {op.ref}: owner field mismatch")
        if comp.is_clone_of is not None and comp.is_clone_of not in comp_set:
            raise ValidationError(f"component {comp.name}: clone_of references unknown component")

    deployments: dict[str, str] = {}
    for node in model.nodes:
        for hosted in node.hosts:
            if hosted not in comp_set:
                raise ValidationError(f"node {node.name}: hosts unknown component {hosted!r}")
            if hosted in deployments:
                raise ValidationError(
                    f"component {hosted!r} deployed twice ({deployments[hosted]} and {node.name})"
                )
            deployments[hosted] = node.name
    for comp in comp_set:
        if comp not in deployments:
            raise ValidationError(f"component {comp!r} is not deployed on any node")

    seen_links = set()
    for link in model.node_links:
        for end in link.endpoints:
            if end not in node_set:
                raise ValidationError(f"node link references unknown node {end!r}")
        if link.endpoints in seen_links:
            raise ValidationError(f"duplicate node link {link.as_pair()}")
        seen_links.add(link.endpoints)

    ops_by_component = {c.name: {op.name for op in c.operations} for c in model.components}
    for scenario in model.scenarios:
        for i, step in enumerate(scenario.steps):
            where = f"scenario {scenario.name} step {i}"
            if step.caller not in comp_set:
                raise ValidationError(f"{where}: unknown caller {step.caller!r}")
            if step.callee not in comp_set:
                raise ValidationError(f"{where}: unknown callee {step.callee!r}")
            if step.operation not in ops_by_component[step.callee]:
                raise ValidationError(
                    f"{where}: operation {step.operation!r} does not belong to {step.callee!r}"
                )


# -- document I/O ----------------------------------------------------------


def load_model(text: str) -> ArchModel:
    """Parse and validate a model document; the result has version 0."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ValidationError(f"model document is not valid YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValidationError("model document must be a mapping")

    def _require(mapping: dict, key: str, where: str):
        if key not in mapping:
            raise ValidationError(f"{where}: missing field {key!r}")
        return mapping[key]

    components = []
    for raw in doc.get("components", []):
        name = _require(raw, "name", "component")
        ops = []
        for raw_op in raw.get("operations", []):
            if isinstance(raw_op, str):
                raw_op = {"name": raw_op}
            ops.append(
                Operation(
                    name=_require(raw_op, "name", f"component {name} operation"),
                    owner=name,
                    service_demand=raw_op.get("service_demand"),
                )
            )
        components.append(
            Component(name=name, operations=tuple(ops), is_clone_of=raw.get("clone_of"))
        )

    nodes = []
    for raw in doc.get("nodes", []):
        name = _require(raw, "name", "node")
        nodes.append(
            Node(name=name, hosts=tuple(raw.get("hosts", [])), utilization=raw.get("utilization"))
        )

    links = []
    for raw in doc.get("node_links", []):
        if not isinstance(raw, (list, tuple)) or len(raw) != 2:
            raise ValidationError(f"node_links entries must be pairs, got {raw!r}")
        links.append(NodeLink.between(str(raw[0]), str(raw[1])))

    scenarios = []
    for raw in doc.get("scenarios", []):
        name = _require(raw, "name", "scenario")
        raw_wl = _require(raw, "workload", f"scenario {name}")
        try:
            pattern = WorkloadPattern(str(raw_wl.get("pattern", "")).upper())
        except ValueError:
            raise ValidationError(
                f"scenario {name}: workload pattern must be OPEN or CLOSED"
            ) from None
        workload = Workload(
            pattern=pattern,
            rate=raw_wl.get("rate"),
            population=raw_wl.get("population"),
            think_time=raw_wl.get("think_time"),
        )
        steps = tuple(
            Step(
                caller=_require(raw_step, "caller", f"scenario {name} step {i}"),
                callee=_require(raw_step, "callee", f"scenario {name} step {i}"),
                operation=_require(raw_step, "operation", f"scenario {name} step {i}"),
                exec_probability=raw_step.get("prob", 1.0),
            )
            for i, raw_step in enumerate(raw.get("steps", []))
        )
        scenarios.append(
            Scenario(
                name=name,
                workload=workload,
                steps=steps,
                resp_time=raw.get("resp_time"),
                throughput=raw.get("throughput"),
            )
        )

    model = ArchModel(
        components=tuple(components),
        nodes=tuple(nodes),
        node_links=tuple(links),
        scenarios=tuple(scenarios),
        version=0,
    )
    validate(model)
    return model


def dump_model(model: ArchModel) -> str:
    """Serialize a model back to the document format (round-trips structure
    and annotations; the version counter is not part of the document)."""
    doc: dict = {
        "components": [
            {
                "name": c.name,
                **({"clone_of": c.is_clone_of} if c.is_clone_of else {}),
                "operations": [
                    {
                        "name": op.name,
                        **(
                            {"service_demand": op.service_demand}
                            if op.service_demand is not None
                            else {}
                        ),
                    }
                    for op in c.operations
                ],
            }
            for c in model.components
        ],
        "nodes": [
            {
                "name": n.name,
                "hosts": list(n.hosts),
                **({"utilization": n.utilization} if n.utilization is not None else {}),
            }
            for n in model.nodes
        ],
        "node_links": [list(l.as_pair()) for l in model.node_links],
        "scenarios": [
            {
                "name": s.name,
                "workload": (
                    {"pattern": "OPEN", "rate": s.workload.rate}
                    if s.workload.pattern is WorkloadPattern.OPEN
                    else {
                        "pattern": "CLOSED",
                        "population": s.workload.population,
                        "think_time": s.workload.think_time,
                    }
                ),
                **({"resp_time": s.resp_time} if s.resp_time is not None else {}),
                **({"throughput": s.throughput} if s.throughput is not None else {}),
                "steps": [
                    {
                        "caller": st.caller,
                        "callee": st.callee,
                        "operation": st.operation,
                        **({"prob": st.exec_probability} if st.exec_probability != 1.0 else {}),
                    }
                    for st in s.steps
                ],
            }
            for s in model.scenarios
        ],
    }
    buf = io.StringIO()
    yaml.safe_dump(doc, buf, sort_keys=False)
    return buf.getvalue()


# -- annotation ------------------------------------------------------------

ANNOTATION_KINDS = ("service_demand", "node_utilization", "scenario_resp_time", "scenario_throughput")


def annotate(model: ArchModel, kind: str, target: str, value: float) -> ArchModel:
    """Set one annotation slot; returns a new model with version + 1.

    Targets: service_demand -> "component/operation"; node_utilization ->
    node name; scenario_resp_time / scenario_throughput -> scenario name.
    """
    if kind not in ANNOTATION_KINDS:
        raise ValidationError(f"unknown annotation kind {kind!r}")
    if value < 0:
        raise ValidationError(f"annotation {kind} on {target}: negative value {value}")

    if kind == "service_demand":
        if "/" not in target:
            raise TargetNotFoundError(f"service_demand target must be component/operation: {target!r}")
        comp_name, op_name = target.split("/", 1)
        comp = model.component(comp_name)
        comp.operation(op_name)  # raises if missing
        new_ops = tuple(
            replace(op, service_demand=value) if op.name == op_name else op
            for op in comp.operations
        )
        new_components = tuple(
            replace(c, operations=new_ops) if c.name == comp_name else c for c in model.components
        )
        return replace(model, components=new_components, version=model.version + 1)

    if kind == "node_utilization":
        model.node(target)
        if value > 1.0:
            raise ValidationError(f"node utilization {value} outside [0, 1]")
        new_nodes = tuple(
            replace(n, utilization=value) if n.name == target else n for n in model.nodes
        )
        return replace(model, nodes=new_nodes, version=model.version + 1)

    model.scenario(target)
    slot = "resp_time" if kind == "scenario_resp_time" else "throughput"
    new_scenarios = tuple(
        replace(s, **{slot: value}) if s.name == target else s for s in model.scenarios
    )
    return replace(model, scenarios=new_scenarios, version=model.version + 1)


# -- structural diff --------------------------------------------------------


@dataclass(frozen=True)
class ModelDiff:
    """Structural delta between two models; annotations are ignored."""

    added_components: tuple[str, ...]
    removed_components: tuple[str, ...]
    changed_components: tuple[str, ...]  # same name, different operation set
    added_nodes: tuple[str, ...]
    removed_nodes: tuple[str, ...]
    added_links: tuple[tuple[str, str], ...]
    removed_links: tuple[tuple[str, str], ...]
    retargeted_steps: tuple[dict, ...]  # {scenario, index, from, to}

    @property
    def empty(self) -> bool:
        return not any(
            (
                self.added_components,
                self.removed_components,
                self.changed_components,
                self.added_nodes,
                self.removed_nodes,
                self.added_links,
                self.removed_links,
                self.retargeted_steps,
            )
        )

    def to_dict(self) -> dict:
        return {
            "added_components": list(self.added_components),
            "removed_components": list(self.removed_components),
            "changed_components": list(self.changed_components),
            "added_nodes": list(self.added_nodes),
            "removed_nodes": list(self.removed_nodes),
            "added_links": [list(p) for p in self.added_links],
            "removed_links": [list(p) for p in self.removed_links],
            "retargeted_steps": list(self.retargeted_steps),
        }


def diff(a: ArchModel, b: ArchModel) -> ModelDiff:
    a_comps = {c.name: tuple(sorted(op.name for op in c.operations)) for c in a.components}
    b_comps = {c.name: tuple(sorted(op.name for op in c.operations)) for c in b.components}
    a_links = {l.as_pair() for l in a.node_links}
    b_links = {l.as_pair() for l in b.node_links}

    retargeted = []
    a_scen = {s.name: s for s in a.scenarios}
    for scenario in b.scenarios:
        old = a_scen.get(scenario.name)
        if old is None or len(old.steps) != len(scenario.steps):
            continue
        for i, (old_step, new_step) in enumerate(zip(old.steps, scenario.steps)):
            if old_step.operation == new_step.operation and old_step.callee != new_step.callee:
                retargeted.append(
                    {
                        "scenario": scenario.name,
                        "index": i,
                        "from": old_step.callee,
                        "to": new_step.callee,
                    }
                )

    return ModelDiff(
        added_components=tuple(sorted(set(b_comps) - set(a_comps))),
        removed_components=tuple(sorted(set(a_comps) - set(b_comps))),
        changed_components=tuple(
            sorted(n for n in set(a_comps) & set(b_comps) if a_comps[n] != b_comps[n])
        ),
        added_nodes=tuple(sorted({n.name for n in b.nodes} - {n.name for n in a.nodes})),
        removed_nodes=tuple(sorted({n.name for n in a.nodes} - {n.name for n in b.nodes})),
        added_links=tuple(sorted(b_links - a_links)),
        removed_links=tuple(sorted(a_links - b_links)),
        retargeted_steps=tuple(retargeted),
    )

"""Clone and move-operation refactorings on the architecture model, plus
candidate enumeration for detected occurrences and a seeded random baseline.

Clone adds "cloned-<name>" on a new "cloned-container-<name>" node whose
links mirror the original node's; scenarios are untouched (replica traffic
is balanced at the queueing/simulation level). Move-operation extracts one
operation into a new single-operation component and retargets exactly the
steps that call it.
"""

from __future__ import annotations

import random
import warnings
from dataclasses import dataclass, replace
from enum import Enum
from statistics import median

from perfloop.antipattern import AntipatternOccurrence, PatternKind
from perfloop.arch_model import ArchModel, Component, Node, NodeLink, Operation
from perfloop.errors import ValidationError


class ActionKind(str, Enum):
    CLONE = "CLONE"
    MOVE_OPERATION = "MOVE_OPERATION"


class Provenance(str, Enum):
    ANTIPATTERN_DRIVEN = "ANTIPATTERN_DRIVEN"
    RANDOM = "RANDOM"


@dataclass(frozen=True)
class RefactoringAction:
    kind: ActionKind
    target: str  # component name, or "component/operation" for moves
    provenance: Provenance
    source_occurrence: str | None = None  # "<kind>:<target>@<scenario>"

    @property
    def component(self) -> str:
        return self.target.split("/", 1)[0]

    @property
    def operation(self) -> str | None:
        return self.target.split("/", 1)[1] if "/" in self.target else None

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "target": self.target,
            "provenance": self.provenance.value,
            "occurrence": self.source_occurrence,
        }

    @staticmethod
    def from_dict(raw: dict) -> RefactoringAction:
        return RefactoringAction(
            kind=ActionKind(raw["kind"]),
            target=str(raw["target"]),
            provenance=Provenance(raw.get("provenance", "ANTIPATTERN_DRIVEN")),
            source_occurrence=raw.get("occurrence"),
        )


def _fresh_name(base: str, taken: set[str]) -> str:
    if base not in taken:
        return base
    suffix = 2
    while f"{base}-{suffix}" in taken:
        suffix += 1
    return f"{base}-{suffix}"


def _add_replica_topology(
    model: ArchModel, source_component: str, new_component: Component
) -> tuple[tuple[Node, ...], tuple[NodeLink, ...], str]:
    """New node hosting the replica, linked like the source component's node."""
    source_node = model.node_of(source_component)
    node_name = _fresh_name(
        f"cloned-container-{source_component}", {n.name for n in model.nodes}
    )
    new_node = Node(name=node_name, hosts=(new_component.name,), utilization=source_node.utilization)
    existing = {l.endpoints for l in model.node_links}
    mirrored = []
    for link in model.links_of(source_node.name):
        candidate = NodeLink.between(node_name, link.other(source_node.name))
        if candidate.endpoints not in existing:
            mirrored.append(candidate)
            existing.add(candidate.endpoints)
    return (*model.nodes, new_node), (*model.node_links, *mirrored), node_name


def clone_component(model: ArchModel, component: str) -> ArchModel:
    """Add a replica component with identical operations on its own node."""
    original = model.component(component)
    if original.is_clone_of is not None:
        warnings.warn(f"cloning {component}, which is itself a clone", stacklevel=2)
    clone_name = _fresh_name(f"cloned-{component}", {c.name for c in model.components})
    clone = Component(
        name=clone_name,
        operations=tuple(
            Operation(name=op.name, owner=clone_name, service_demand=op.service_demand)
            for op in original.operations
        ),
        is_clone_of=component,
    )
    nodes, links, _ = _add_replica_topology(model, component, clone)
    return replace(
        model,
        components=(*model.components, clone),
        nodes=nodes,
        node_links=links,
        version=model.version + 1,
    )


def move_operation(model: ArchModel, component: str, operation: str) -> ArchModel:
    """Extract one operation into a new single-operation component and
    retarget the steps that call it."""
    original = model.component(component)
    moved = original.operation(operation)  # raises if unknown
    if len(original.operations) < 2:
        raise ValidationError(
            f"component {component} has a single operation; use a clone instead"
        )
    new_name = _fresh_name(f"cloned-{component}", {c.name for c in model.components})
    new_component = Component(
        name=new_name,
        operations=(replace(moved, owner=new_name),),
        is_clone_of=None,  # not a balanced replica: it takes over the operation
    )
    stripped = replace(
        original, operations=tuple(op for op in original.operations if op.name != operation)
    )
    components = tuple(
        stripped if c.name == component else c for c in model.components
    ) + (new_component,)

    scenarios = tuple(
        replace(
            scenario,
            steps=tuple(
                replace(step, callee=new_name)
                if step.callee == component and step.operation == operation
                else step
                for step in scenario.steps
            ),
        )
        for scenario in model.scenarios
    )
    nodes, links, _ = _add_replica_topology(model, component, new_component)
    return replace(
        model,
        components=components,
        nodes=nodes,
        node_links=links,
        scenarios=scenarios,
        version=model.version + 1,
    )


def apply_action(model: ArchModel, action: RefactoringAction) -> ArchModel:
    if action.kind is ActionKind.CLONE:
        return clone_component(model, action.target)
    return move_operation(model, action.component, action.operation)


def _movable_operations(model: ArchModel, component: str) -> list[Operation]:
    comp = model.component(component)
    if len(comp.operations) < 2:
        return []
    annotated = [op for op in comp.operations if op.service_demand is not None]
    if not annotated:
        return list(comp.operations)
    cutoff = median(op.service_demand for op in annotated)
    return [op for op in annotated if op.service_demand >= cutoff]


def enumerate_candidates(
    model: ArchModel, occurrences: list[AntipatternOccurrence]
) -> list[RefactoringAction]:
    """Clone / move-operation candidates per occurrence, deduplicated.

    Blob targets get a clone plus moves for the component's operations at
    or above its median demand; PaF targets get a move of the flagged
    operation plus a clone of its owner.
    """
    seen: set[tuple[ActionKind, str]] = set()
    actions = []

    def _add(kind: ActionKind, target: str, occurrence: AntipatternOccurrence) -> None:
        key = (kind, target)
        if key in seen:
            return
        seen.add(key)
        actions.append(
            RefactoringAction(
                kind=kind,
                target=target,
                provenance=Provenance.ANTIPATTERN_DRIVEN,
                source_occurrence=(
                    f"{occurrence.kind.value}:{occurrence.target}@{occurrence.scenario}"
                ),
            )
        )

    for occurrence in occurrences:
        if occurrence.kind is PatternKind.BLOB:
            component = occurrence.target
            _add(ActionKind.CLONE, component, occurrence)
            for op in _movable_operations(model, component):
                _add(ActionKind.MOVE_OPERATION, op.ref, occurrence)
        else:
            component, operation = occurrence.target.split("/", 1)
            if len(model.component(component).operations) >= 2:
                _add(ActionKind.MOVE_OPERATION, occurrence.target, occurrence)
            _add(ActionKind.CLONE, component, occurrence)
    return actions


def random_action(
    model: ArchModel,
    seed: int,
    exclude: tuple[RefactoringAction, ...] = (),
) -> RefactoringAction:
    """Uniformly pick a kind then a valid target with a seeded generator.

    `exclude` removes specific (kind, target) pairs from the draw, so a
    random baseline can be kept disjoint from the driven candidates.
    """
    if not model.components:
        raise ValidationError("model has no components")
    rng = random.Random(seed)
    excluded = {(a.kind, a.target) for a in exclude}

    def _targets(kind: ActionKind) -> list[str]:
        if kind is ActionKind.CLONE:
            pool = [c.name for c in model.components]
        else:
            pool = [
                op.ref
                for c in model.components
                if len(c.operations) >= 2
                for op in c.operations
            ]
        return [t for t in pool if (kind, t) not in excluded]

    first = rng.choice([ActionKind.CLONE, ActionKind.MOVE_OPERATION])
    for kind in (first, ActionKind.MOVE_OPERATION if first is ActionKind.CLONE else ActionKind.CLONE):
        targets = _targets(kind)
        if targets:
            return RefactoringAction(
                kind=kind, target=rng.choice(targets), provenance=Provenance.RANDOM
            )
    raise ValidationError("no valid refactoring target in the model")

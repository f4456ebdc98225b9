"""Fuzzy detection of the Blob and Pipe-and-Filter performance antipatterns
over an annotated architecture model.

A metric value F against a threshold band [LB, UB] violates with
probability 1 - (UB - F) / (UB - LB), clamped to [0, 1]. An occurrence's
probability is the exact product of its literal probabilities:
  Blob: numClientConnects * numMsgs(best partner) * maxHwUtil(pair hosts)
  PaF:  resDemand * maxHwUtil, gated on the operation being executed
        unconditionally (product of step probabilities along the path = 1).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

from perfloop.arch_model import ArchModel
from perfloop.errors import ValidationError

DEFAULT_REPORT_FLOOR = 0.01


class Metric(str, Enum):
    NUM_CLIENT_CONNECTS = "numClientConnects"
    NUM_MSGS = "numMsgs"
    MAX_HW_UTIL = "maxHwUtil"
    RES_DEMAND = "resDemand"


class PatternKind(str, Enum):
    BLOB = "BLOB"
    PAF = "PAF"


@dataclass(frozen=True)
class ThresholdBand:
    metric: Metric
    lower: float
    upper: float

    def __post_init__(self) -> None:
        if self.upper <= self.lower:
            raise ValidationError(
                f"band for {self.metric.value}: upper bound must exceed lower bound"
            )


@dataclass(frozen=True)
class LiteralProbability:
    metric: Metric
    element_ref: str
    raw_value: float
    probability: float

    def to_dict(self) -> dict:
        return {
            "metric": self.metric.value,
            "element": self.element_ref,
            "value": self.raw_value,
            "p": self.probability,
        }


@dataclass(frozen=True)
class AntipatternOccurrence:
    kind: PatternKind
    target: str  # component name (BLOB) or component/operation (PAF)
    scenario: str
    literals: tuple[LiteralProbability, ...]
    probability: float

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "target": self.target,
            "scenario": self.scenario,
            "literals": [lit.to_dict() for lit in self.literals],
            "probability": self.probability,
        }


def fuzzy_prob(value: float, band: ThresholdBand) -> float:
    """Violation probability of a metric value against a fuzzy band.

    Linear inside the band, clamped to 0 below the lower bound and to 1
    above the upper bound.
    """
    p = 1.0 - (band.upper - value) / (band.upper - band.lower)
    return min(1.0, max(0.0, p))


def blob_occurrence_probability(p_connects: float, p_msgs: float, p_util: float) -> float:
    """Blob occurrence probability: exact product of its three literals."""
    return p_connects * p_msgs * p_util


def paf_occurrence_probability(p_demand: float, p_util: float) -> float:
    """Pipe-and-Filter occurrence probability: product of its two literals
    (the unconditional-execution literal is a gate, always 1 when reported)."""
    return p_demand * p_util


def _callers(model: ArchModel, component: str) -> set[str]:
    return {
        step.caller
        for scenario in model.scenarios
        for step in scenario.steps
        if step.callee == component and step.caller != component
    }


def _pair_messages(model: ArchModel, component: str, scenario_name: str) -> dict[str, int]:
    """Messages exchanged (either direction) with each partner within a scenario."""
    counts: dict[str, int] = {}
    for step in model.scenario(scenario_name).steps:
        if step.caller == component and step.callee != component:
            counts[step.callee] = counts.get(step.callee, 0) + 1
        elif step.callee == component and step.caller != component:
            counts[step.caller] = counts.get(step.caller, 0) + 1
    return counts


def _node_util(model: ArchModel, component: str) -> float:
    util = model.node_of(component).utilization
    if util is None:
        raise ValidationError(
            f"node {model.node_of(component).name} has no utilization annotation"
        )
    return util


def metrics_for_component(model: ArchModel, component: str, scenario: str) -> dict:
    """numClientConnects (all scenarios), per-partner numMsgs (this scenario),
    and per-partner maxHwUtil over both hosts of the pair."""
    model.component(component)
    partners = _pair_messages(model, component, scenario)
    return {
        "numClientConnects": len(_callers(model, component)),
        "numMsgs": partners,
        "maxHwUtil": {
            partner: max(_node_util(model, component), _node_util(model, partner))
            for partner in partners
        },
    }


def default_bands(model: ArchModel) -> tuple[dict[Metric, ThresholdBand], list[str]]:
    """Per-metric bands from the model-wide distribution: LB = mean,
    UB = max; a degenerate spread widens UB by 10% and warns."""
    # message counts are per unordered pair per scenario, counted once
    seen_pairs = set()
    msgs = []
    for scenario in model.scenarios:
        for c in model.components:
            for partner, count in _pair_messages(model, c.name, scenario.name).items():
                key = (scenario.name, frozenset((c.name, partner)))
                if key not in seen_pairs:
                    seen_pairs.add(key)
                    msgs.append(float(count))

    populations: dict[Metric, list[float]] = {
        Metric.NUM_CLIENT_CONNECTS: [
            float(len(_callers(model, c.name))) for c in model.components
        ],
        Metric.NUM_MSGS: msgs,
        Metric.MAX_HW_UTIL: [
            n.utilization for n in model.nodes if n.utilization is not None
        ],
        Metric.RES_DEMAND: [
            op.service_demand for op in model.all_operations() if op.service_demand is not None
        ],
    }

    bands: dict[Metric, ThresholdBand] = {}
    warnings = []
    for metric, values in populations.items():
        if not values:
            warnings.append(f"metric {metric.value}: no values in model, band skipped")
            continue
        mean = sum(values) / len(values)
        top = max(values)
        if top <= mean:  # all values equal
            widened = top * 1.1 if top > 0 else 0.1
            warnings.append(
                f"metric {metric.value}: zero spread, widened band to ({mean}, {widened})"
            )
            bands[metric] = ThresholdBand(metric=metric, lower=mean, upper=widened)
        else:
            bands[metric] = ThresholdBand(metric=metric, lower=mean, upper=top)
    return bands, warnings


def load_bands(text: str) -> dict[Metric, ThresholdBand]:
    """Parse a threshold config file: {"numMsgs": {"lb": ..., "ub": ...}, ...}."""
    raw = json.loads(text)
    bands = {}
    for key, bounds in raw.items():
        metric = Metric(key)
        bands[metric] = ThresholdBand(
            metric=metric, lower=float(bounds["lb"]), upper=float(bounds["ub"])
        )
    return bands


def _sorted_occurrences(
    occurrences: list[AntipatternOccurrence],
) -> list[AntipatternOccurrence]:
    return sorted(occurrences, key=lambda o: (-o.probability, o.target, o.scenario))


def _require_band(bands: dict[Metric, ThresholdBand], metric: Metric) -> ThresholdBand:
    band = bands.get(metric)
    if band is None:
        raise ValidationError(f"missing threshold band for {metric.value}")
    return band


def detect_blob(
    model: ArchModel,
    bands: dict[Metric, ThresholdBand],
    scenario: str,
    floor: float = DEFAULT_REPORT_FLOOR,
) -> list[AntipatternOccurrence]:
    """One occurrence per component; the message/utilization pair literals
    take the partner maximizing their joint product (existential partner).
    Bands are required only for metrics the model actually exercises."""
    occurrences = []
    for comp in model.components:
        metrics = metrics_for_component(model, comp.name, scenario)
        if not metrics["numMsgs"]:
            continue  # isolated in this scenario
        p_connects = fuzzy_prob(
            float(metrics["numClientConnects"]), _require_band(bands, Metric.NUM_CLIENT_CONNECTS)
        )
        best = None
        for partner, count in sorted(metrics["numMsgs"].items()):
            p_msgs = fuzzy_prob(float(count), _require_band(bands, Metric.NUM_MSGS))
            p_util = fuzzy_prob(
                metrics["maxHwUtil"][partner], _require_band(bands, Metric.MAX_HW_UTIL)
            )
            if best is None or p_msgs * p_util > best[1] * best[2]:
                best = (partner, p_msgs, p_util, count, metrics["maxHwUtil"][partner])
        partner, p_msgs, p_util, msg_count, pair_util = best
        probability = blob_occurrence_probability(p_connects, p_msgs, p_util)
        if probability < floor:
            continue
        occurrences.append(
            AntipatternOccurrence(
                kind=PatternKind.BLOB,
                target=comp.name,
                scenario=scenario,
                literals=(
                    LiteralProbability(
                        Metric.NUM_CLIENT_CONNECTS,
                        comp.name,
                        float(metrics["numClientConnects"]),
                        p_connects,
                    ),
                    LiteralProbability(
                        Metric.NUM_MSGS, f"{comp.name}<->{partner}", float(msg_count), p_msgs
                    ),
                    LiteralProbability(
                        Metric.MAX_HW_UTIL, f"{comp.name}<->{partner}", pair_util, p_util
                    ),
                ),
                probability=probability,
            )
        )
    return _sorted_occurrences(occurrences)


def detect_paf(
    model: ArchModel,
    bands: dict[Metric, ThresholdBand],
    scenario_name: str,
    floor: float = DEFAULT_REPORT_FLOOR,
) -> list[AntipatternOccurrence]:
    """One occurrence per unconditionally executed operation in the scenario.

    Operations whose cumulative execution probability along the path is
    below 1 are excluded entirely (the gate literal must equal one).
    """
    scenario = model.scenario(scenario_name)
    occurrences = []
    seen: set[str] = set()
    path_prob = 1.0
    for step in scenario.steps:
        path_prob *= step.exec_probability
        op = model.operation(step.callee, step.operation)
        if op.ref in seen:
            continue
        seen.add(op.ref)
        if path_prob < 1.0:
            continue  # gate: must be executed unconditionally
        if op.service_demand is None:
            raise ValidationError(f"operation {op.ref} has no service demand annotation")
        p_demand = fuzzy_prob(op.service_demand, _require_band(bands, Metric.RES_DEMAND))
        util = _node_util(model, step.callee)
        p_util = fuzzy_prob(util, _require_band(bands, Metric.MAX_HW_UTIL))
        probability = paf_occurrence_probability(p_demand, p_util)
        if probability < floor:
            continue
        occurrences.append(
            AntipatternOccurrence(
                kind=PatternKind.PAF,
                target=op.ref,
                scenario=scenario_name,
                literals=(
                    LiteralProbability(Metric.RES_DEMAND, op.ref, op.service_demand, p_demand),
                    LiteralProbability(
                        Metric.MAX_HW_UTIL, model.node_of(step.callee).name, util, p_util
                    ),
                ),
                probability=probability,
            )
        )
    return _sorted_occurrences(occurrences)


def detect_all(
    model: ArchModel,
    bands: dict[Metric, ThresholdBand],
    floor: float = DEFAULT_REPORT_FLOOR,
) -> list[AntipatternOccurrence]:
    """Blob + PaF over every scenario, ranked by probability descending."""
    occurrences: list[AntipatternOccurrence] = []
    for scenario in model.scenarios:
        occurrences.extend(detect_blob(model, bands, scenario.name, floor))
        occurrences.extend(detect_paf(model, bands, scenario.name, floor))
    return _sorted_occurrences(occurrences)

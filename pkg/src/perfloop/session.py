"""Orchestrates the continuous performance-engineering loop: measure the
(simulated) system, build traceability, annotate the model, detect
antipatterns, preview candidate actions via MVA, apply the chosen action to
model and system, and re-measure.

Sessions are deterministic: measurement seeds derive from (session seed,
iteration), and a recorded session replays to bit-identical indices.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum

from perfloop import antipattern, refactoring, simulator
from perfloop.annotator import estimate_demands, measure_indices, write_back
from perfloop.arch_model import ArchModel, dump_model, load_model
from perfloop.errors import PerfloopError, ValidationError
from perfloop.qn import predict_for_workload
from perfloop.refactoring import RefactoringAction, apply_action
from perfloop.trace_ingest import build_log_model, parse_spans, parse_utilization
from perfloop.traceability import generate_links

_SEED_STRIDE = 1_000_003


class ApplyScope(str, Enum):
    MODEL_ONLY = "MODEL_ONLY"
    MODEL_AND_SYSTEM = "MODEL_AND_SYSTEM"


class BatchStatus(str, Enum):
    CLEAN = "CLEAN"  # all occurrence probabilities below the floor
    ITERATION_CAP = "ITERATION_CAP"
    NO_IMPROVING_ACTION = "NO_IMPROVING_ACTION"


@dataclass(frozen=True)
class SessionConfig:
    seed: int = 1
    floor: float = antipattern.DEFAULT_REPORT_FLOOR
    target_scenario: str | None = None  # None: follow the top occurrence
    calibration_rate: float = 0.2  # per scenario, light enough to avoid queueing
    calibration_duration_s: float = 120.0
    calibration_warmup_s: float = 5.0
    bands: dict | None = None  # metric name -> {"lb": .., "ub": ..}

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "floor": self.floor,
            "target_scenario": self.target_scenario,
            "calibration_rate": self.calibration_rate,
            "calibration_duration_s": self.calibration_duration_s,
            "calibration_warmup_s": self.calibration_warmup_s,
            "bands": self.bands,
        }

    @staticmethod
    def from_dict(raw: dict) -> SessionConfig:
        return SessionConfig(
            seed=int(raw.get("seed", 1)),
            floor=float(raw.get("floor", antipattern.DEFAULT_REPORT_FLOOR)),
            target_scenario=raw.get("target_scenario"),
            calibration_rate=float(raw.get("calibration_rate", 0.2)),
            calibration_duration_s=float(raw.get("calibration_duration_s", 120.0)),
            calibration_warmup_s=float(raw.get("calibration_warmup_s", 5.0)),
            bands=raw.get("bands"),
        )


@dataclass
class IterationRecord:
    iteration: int
    measured: dict  # MeasuredIndices.to_dict()
    occurrences: list[dict]
    action: dict | None = None
    predicted: dict | None = None  # preview at decision time
    post_action_measured: dict | None = None  # filled by the next measurement

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "measured": self.measured,
            "occurrences": self.occurrences,
            "action": self.action,
            "predicted": self.predicted,
            "post_action_measured": self.post_action_measured,
        }


@dataclass
class SessionState:
    model: ArchModel
    system: simulator.SimSystem
    run_config: simulator.SimRunConfig
    config: SessionConfig
    bands: dict
    iteration: int = 0
    history: list[IterationRecord] = field(default_factory=list)
    demand_report: list[str] = field(default_factory=list)

    @property
    def current_indices(self) -> dict:
        return self.history[-1].measured if self.history else {}

    def content_hash(self) -> int:
        payload = (
            dump_model(self.model),
            self.system.generation,
            self.iteration,
            json.dumps([r.to_dict() for r in self.history], sort_keys=True),
        )
        return hash(payload)


def _measurement_seed(config: SessionConfig, iteration: int) -> int:
    return config.seed * _SEED_STRIDE + iteration


def _run_and_ingest(system: simulator.SimSystem, run_cfg: simulator.SimRunConfig):
    """Run the simulator and ingest its output through the wire format."""
    output = simulator.run(system, run_cfg)
    spans = parse_spans(json.dumps(list(output.spans)))
    util = parse_utilization(json.dumps(list(output.utilization)))
    return build_log_model(spans, util), output


def _measure(state_model: ArchModel, system, run_cfg, seed: int):
    cfg = replace(run_cfg, seed=seed)
    log, _ = _run_and_ingest(system, cfg)
    tm = generate_links(log, state_model)
    window = cfg.duration_s - cfg.warmup_s
    return measure_indices(log, tm, window)


def start_session(
    model: ArchModel,
    run_config: simulator.SimRunConfig,
    config: SessionConfig | None = None,
) -> SessionState:
    """Calibrate demands under a light workload, measure under the configured
    workload, annotate the model, and detect the initial occurrences."""
    config = config or SessionConfig()
    system = simulator.instantiate(model, run_config.service_means)

    calib_cfg = replace(
        run_config,
        seed=config.seed * _SEED_STRIDE - 1,
        duration_s=config.calibration_duration_s,
        warmup_s=config.calibration_warmup_s,
        arrivals=tuple(
            (name, min(rate, config.calibration_rate)) for name, rate in run_config.arrivals
        ),
    )
    calib_log, calib_out = _run_and_ingest(system, calib_cfg)
    if not calib_out.spans:
        raise ValidationError("calibration run produced no spans")
    calib_tm = generate_links(calib_log, model)
    demands, demand_report = estimate_demands(calib_log, calib_tm)

    indices = _measure(model, system, run_config, _measurement_seed(config, 0))
    model = write_back(model, demands, indices)

    if config.bands:
        bands = antipattern.load_bands(json.dumps(config.bands))
    else:
        bands, _ = antipattern.default_bands(model)

    state = SessionState(
        model=model,
        system=system,
        run_config=run_config,
        config=config,
        bands=bands,
        demand_report=demand_report,
    )
    state.history.append(
        IterationRecord(
            iteration=0,
            measured=indices.to_dict(),
            occurrences=[o.to_dict() for o in detect(state)],
        )
    )
    return state


def detect(state: SessionState) -> list[antipattern.AntipatternOccurrence]:
    """Blob + PaF over all scenarios, ranked by probability descending."""
    return antipattern.detect_all(state.model, state.bands, state.config.floor)


def preview(state: SessionState, action: RefactoringAction) -> dict:
    """Predict the action's effect on every scenario without touching state."""
    return preview_on(state.model, state.model, action)


def apply(state: SessionState, action: RefactoringAction, scope: ApplyScope) -> SessionState:
    """Apply the action; MODEL_AND_SYSTEM also refactors the simulator online
    and re-measures. A system failure rolls the model change back."""
    return apply_many(state, [action], scope)


def apply_many(
    state: SessionState, actions: list[RefactoringAction], scope: ApplyScope
) -> SessionState:
    """Several actions in a row (multiple-session mode), then one re-measure.

    State commits only after all applies and the re-measure succeed, so any
    failure leaves the session unchanged (model changes rolled back). A
    single action is recorded as itself; a list is recorded as one MULTIPLE
    entry carrying all of them.
    """
    if not actions:
        return state

    predicted = None
    new_model = state.model
    for action in actions:
        predicted = preview_on(new_model, state.model, action)
        new_model = apply_action(new_model, action)
    action_dict = (
        actions[0].to_dict()
        if len(actions) == 1
        else {"kind": "MULTIPLE", "actions": [a.to_dict() for a in actions]}
    )

    if scope is ApplyScope.MODEL_ONLY:
        state.model = new_model
        current = state.history[-1]
        current.action = action_dict
        current.predicted = predicted
        return state

    new_system = state.system
    for action in actions:
        new_system = simulator.apply_system_refactoring(new_system, action)
    indices = _measure(
        new_model, new_system, state.run_config,
        _measurement_seed(state.config, state.iteration + 1),
    )
    new_model = write_back(new_model, [], indices)

    current = state.history[-1]
    current.action = action_dict
    current.predicted = predicted
    current.post_action_measured = indices.to_dict()

    state.model = new_model
    state.system = new_system
    state.iteration += 1
    state.history.append(
        IterationRecord(
            iteration=state.iteration,
            measured=indices.to_dict(),
            occurrences=[o.to_dict() for o in detect(state)],
        )
    )
    return state


def preview_on(model: ArchModel, baseline_model: ArchModel, action: RefactoringAction) -> dict:
    """Preview an action against an intermediate model (multiple-session
    chains) while reporting deltas from the session baseline."""
    refactored = apply_action(model, action)
    out: dict = {"action": action.to_dict(), "scenarios": {}}
    node_util: dict[str, float] = {}
    for scenario in baseline_model.scenarios:
        base = predict_for_workload(baseline_model, scenario.name)
        pred = predict_for_workload(refactored, scenario.name)
        out["scenarios"][scenario.name] = {
            "resp_time_s": pred["resp_time_s"],
            "baseline_resp_time_s": base["resp_time_s"],
            "delta_resp_time_s": pred["resp_time_s"] - base["resp_time_s"],
        }
        for node, util in pred["node_utilization"].items():
            node_util[node] = max(node_util.get(node, 0.0), util)
    out["node_utilization"] = dict(sorted(node_util.items()))
    out["max_predicted_utilization"] = max(node_util.values())
    return out


def _target_scenario(state: SessionState, occurrence: antipattern.AntipatternOccurrence) -> str:
    return state.config.target_scenario or occurrence.scenario


def pick_best_action(
    state: SessionState, occurrence: antipattern.AntipatternOccurrence
) -> tuple[RefactoringAction, dict] | None:
    """Smallest predicted response time on the target scenario; ties break on
    lower maximum predicted utilization. None if no candidate improves."""
    target = _target_scenario(state, occurrence)
    candidates = refactoring.enumerate_candidates(state.model, [occurrence])
    best: tuple[float, float, RefactoringAction, dict] | None = None
    for action in candidates:
        try:
            pv = preview(state, action)
        except PerfloopError:
            continue
        resp = pv["scenarios"][target]["resp_time_s"]
        key = (resp, pv["max_predicted_utilization"])
        if best is None or key < (best[0], best[1]):
            best = (resp, pv["max_predicted_utilization"], action, pv)
    if best is None:
        return None
    baseline = best[3]["scenarios"][target]["baseline_resp_time_s"]
    if best[0] >= baseline:
        return None
    return best[2], best[3]


def run_batch(
    state: SessionState, floor: float | None = None, max_iterations: int = 10
) -> tuple[SessionState, BatchStatus]:
    """Repeat detect -> top occurrence -> best preview -> apply until every
    probability is below the floor or the iteration cap is hit."""
    floor = state.config.floor if floor is None else floor
    for _ in range(max_iterations):
        occurrences = detect(state)
        if not occurrences or occurrences[0].probability < floor:
            return state, BatchStatus.CLEAN
        choice = pick_best_action(state, occurrences[0])
        if choice is None:
            return state, BatchStatus.NO_IMPROVING_ACTION
        action, _ = choice
        state = apply(state, action, ApplyScope.MODEL_AND_SYSTEM)
    occurrences = detect(state)
    if not occurrences or occurrences[0].probability < floor:
        return state, BatchStatus.CLEAN
    return state, BatchStatus.ITERATION_CAP


def comparison_rows(state: SessionState) -> dict:
    """Before/after response times per scenario and utilizations per service
    for every applied action, shaped for side-by-side bar charts."""
    scenario_rows = []
    service_rows = []
    for record in state.history:
        if record.action is None or record.post_action_measured is None:
            continue
        label = (
            record.action.get("kind", "") + " " + record.action.get("target", "")
        ).strip() or "multiple actions"
        before, after = record.measured, record.post_action_measured
        for name in sorted(before.get("scenarios", {})):
            if name not in after.get("scenarios", {}):
                continue
            scenario_rows.append(
                {
                    "iteration": record.iteration,
                    "action": label,
                    "scenario": name,
                    "resp_time_before_s": before["scenarios"][name]["resp_time_s"],
                    "resp_time_after_s": after["scenarios"][name]["resp_time_s"],
                }
            )
        for name in sorted(before.get("services", {})):
            if name not in after.get("services", {}):
                continue
            service_rows.append(
                {
                    "iteration": record.iteration,
                    "action": label,
                    "service": name,
                    "utilization_before": before["services"][name]["utilization"],
                    "utilization_after": after["services"][name]["utilization"],
                }
            )
    return {"scenarios": scenario_rows, "services": service_rows}


# -- persistence / replay ----------------------------------------------------


def save_record(state: SessionState, initial_model_doc: str) -> str:
    """Append-only record enabling bit-exact replay: a header line with the
    session inputs, then one line per iteration record."""
    header = {
        "kind": "perfloop-session",
        "config": state.config.to_dict(),
        "model_doc": initial_model_doc,
        "run_config": state.run_config.to_dict(),
    }
    lines = [json.dumps(header, sort_keys=True)]
    lines.extend(json.dumps(r.to_dict(), sort_keys=True) for r in state.history)
    return "\n".join(lines) + "\n"


def replay_record(record_text: str) -> tuple[SessionState, list[str]]:
    """Re-execute a recorded session; returns the new state and a list of
    mismatches (empty when the replay reproduces all measured indices)."""
    lines = [line for line in record_text.splitlines() if line.strip()]
    header = json.loads(lines[0])
    if header.get("kind") != "perfloop-session":
        raise ValidationError("not a session record file")
    records = [json.loads(line) for line in lines[1:]]

    model = load_model(header["model_doc"])
    run_cfg = simulator.SimRunConfig.from_dict(header["run_config"])
    config = SessionConfig.from_dict(header["config"])
    state = start_session(model, run_cfg, config)

    mismatches = []
    for record in records:
        if record["action"] is not None and record["post_action_measured"] is not None:
            if record["action"].get("kind") == "MULTIPLE":
                actions = [RefactoringAction.from_dict(a) for a in record["action"]["actions"]]
                state = apply_many(state, actions, ApplyScope.MODEL_AND_SYSTEM)
            else:
                action = RefactoringAction.from_dict(record["action"])
                state = apply(state, action, ApplyScope.MODEL_AND_SYSTEM)
    for original, replayed in zip(records, state.history):
        if json.dumps(original["measured"], sort_keys=True) != json.dumps(
            replayed.measured, sort_keys=True
        ):
            mismatches.append(f"iteration {original['iteration']}: measured indices differ")
    if len(records) != len(state.history):
        mismatches.append(
            f"record count differs: recorded {len(records)}, replayed {len(state.history)}"
        )
    return state, mismatches

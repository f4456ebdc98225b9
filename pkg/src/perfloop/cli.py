"""Command-line interface composing the pipeline modules.

Usage errors exit 2 (argparse default); pipeline errors exit 1 with the
module's error text on stderr. Structured outputs are canonical JSON so
scripts and the HTTP gateway see identical bytes.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

from perfloop import antipattern, session as session_mod, simulator
from perfloop.annotator import (
    demands_table,
    estimate_demands,
    indices_table,
    measure_indices,
    write_back,
)
from perfloop.arch_model import dump_model, load_model
from perfloop.errors import PerfloopError
from perfloop.fixtures import load_fixture
from perfloop.qn import predict_for_workload
from perfloop.refactoring import RefactoringAction, apply_action, random_action
from perfloop.serialize import to_canonical_json
from perfloop.trace_ingest import (
    build_log_model,
    parse_spans,
    parse_utilization,
    summarize,
    utilization_to_wire,
)
from perfloop.traceability import generate_links
from perfloop.simulator import SimRunConfig


def _read(path: str) -> str:
    return Path(path).read_text()


def _write_or_print(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text if text.endswith("\n") else text + "\n")
    else:
        print(text)


def _load_log(args):
    spans = parse_spans(_read(args.spans))
    util = parse_utilization(_read(args.util)) if args.util else []
    return build_log_model(spans, util)


def _load_bands(args, model):
    if args.bands:
        return antipattern.load_bands(_read(args.bands))
    bands, _ = antipattern.default_bands(model)
    return bands


def _session_from_args(args) -> session_mod.SessionState:
    config = session_mod.SessionConfig(
        seed=args.seed,
        floor=args.floor,
        target_scenario=getattr(args, "target", None),
    )
    if args.fixture:
        fx = load_fixture(args.fixture)
        model, run_cfg = fx.model, fx.run_config
    else:
        if not (args.model and args.run):
            raise PerfloopError("provide --fixture or both --model and --run")
        model = load_model(_read(args.model))
        run_cfg = SimRunConfig.from_dict(json.loads(_read(args.run)))
    return session_mod.start_session(model, run_cfg, config)


def cmd_ingest(args) -> int:
    log = _load_log(args)
    report = summarize(log)
    if log.warnings:
        report = {**report, "warnings": list(log.warnings)}
    _write_or_print(to_canonical_json(report), args.out)
    return 0


def cmd_link(args) -> int:
    log = _load_log(args)
    arch = load_model(_read(args.model))
    tm = generate_links(log, arch)
    payload = {"trace_model": tm.to_dict(), "coverage": tm.unmatched_report}
    _write_or_print(to_canonical_json(payload), args.out)
    return 0


def cmd_annotate(args) -> int:
    log = _load_log(args)
    arch = load_model(_read(args.model))
    tm = generate_links(log, arch)
    demands, report = estimate_demands(log, tm)
    indices = measure_indices(log, tm, args.window)
    annotated = write_back(arch, demands, indices)
    if args.out:
        Path(args.out).write_text(dump_model(annotated))
    print(demands_table(demands))
    print()
    print(indices_table(indices))
    for line in report:
        print(f"note: {line}", file=sys.stderr)
    return 0


def cmd_detect(args) -> int:
    model = load_model(_read(args.model))
    bands = _load_bands(args, model)
    occurrences = antipattern.detect_all(model, bands, args.floor)
    _write_or_print(to_canonical_json([o.to_dict() for o in occurrences]), args.out)
    return 0


def cmd_preview(args) -> int:
    model = load_model(_read(args.model))
    action = RefactoringAction.from_dict(json.loads(args.action))
    refactored = apply_action(model, action)
    payload = {
        "action": action.to_dict(),
        "scenarios": {
            s.name: {
                "baseline": predict_for_workload(model, s.name),
                "predicted": predict_for_workload(refactored, s.name),
            }
            for s in model.scenarios
        },
    }
    _write_or_print(to_canonical_json(payload), args.out)
    return 0


def cmd_refactor(args) -> int:
    model = load_model(_read(args.model))
    if args.action == "random":
        action = random_action(model, args.seed)
    else:
        action = RefactoringAction.from_dict(json.loads(args.action))
    refactored = apply_action(model, action)
    _write_or_print(dump_model(refactored), args.out)
    print(f"applied {action.kind.value} on {action.target}", file=sys.stderr)
    return 0


def cmd_simulate(args) -> int:
    model = load_model(_read(args.model))
    cfg = SimRunConfig.from_dict(json.loads(_read(args.run)))
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    system = simulator.instantiate(model, cfg.service_means)
    output = simulator.run(system, cfg)
    span_lines = "\n".join(json.dumps(s, sort_keys=True) for s in output.spans)
    _write_or_print(span_lines, args.out)
    if args.util_out:
        samples = parse_utilization(json.dumps(list(output.utilization)))
        Path(args.util_out).write_text(utilization_to_wire(samples) + "\n")
    print(
        f"arrivals={output.arrivals} completed={output.completed} "
        f"errors={output.errors} traces={output.emitted_traces}",
        file=sys.stderr,
    )
    return 0


def cmd_session(args) -> int:
    state = _session_from_args(args)
    if args.apply:
        actions = json.loads(args.apply)
        if isinstance(actions, dict):
            actions = [actions]
        scope = session_mod.ApplyScope(args.scope)
        state = session_mod.apply_many(
            state, [RefactoringAction.from_dict(a) for a in actions], scope
        )
    if args.record:
        doc = load_fixture(args.fixture).model_doc if args.fixture else _read(args.model)
        Path(args.record).write_text(session_mod.save_record(state, doc))
    payload = {
        "iteration": state.iteration,
        "indices": state.current_indices,
        "occurrences": state.history[-1].occurrences,
    }
    _write_or_print(to_canonical_json(payload), args.out)
    return 0


def cmd_batch(args) -> int:
    state = _session_from_args(args)
    state, status = session_mod.run_batch(state, floor=args.floor, max_iterations=args.max)
    if args.record:
        doc = load_fixture(args.fixture).model_doc if args.fixture else _read(args.model)
        Path(args.record).write_text(session_mod.save_record(state, doc))
    rows = [f"{'it':>3} {'action':<40} {'top occurrence':<32} {'p':>6}"]
    for record in state.history:
        action = record.action or {}
        top = record.occurrences[0] if record.occurrences else None
        rows.append(
            f"{record.iteration:>3} "
            f"{(action.get('kind', '-') + ' ' + action.get('target', '')).strip():<40} "
            f"{(top['kind'] + ':' + top['target']) if top else '-':<32} "
            f"{top['probability'] if top else 0:>6.2f}"
        )
    print("\n".join(rows))
    print(f"status: {status.value}")
    _write_or_print(
        to_canonical_json(
            {
                "status": status.value,
                "iterations": state.iteration,
                "comparison": session_mod.comparison_rows(state),
            }
        ),
        args.out,
    )
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from perfloop.api import create_app

    port = int(os.environ.get("PERFLOOP_PORT", args.port))
    uvicorn.run(create_app(), host=args.host, port=port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="perfloop", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common_session(p):
        p.add_argument("--fixture", help="built-in fixture name")
        p.add_argument("--model", help="model document path")
        p.add_argument("--run", help="run config path")
        p.add_argument("--seed", type=int, default=1)
        p.add_argument("--floor", type=float, default=antipattern.DEFAULT_REPORT_FLOOR)
        p.add_argument("--target", help="target scenario for action ranking")
        p.add_argument("--record", help="write a replayable session record here")
        p.add_argument("--out")

    p = sub.add_parser("ingest", help="parse spans into a log model summary")
    p.add_argument("--spans", required=True)
    p.add_argument("--util")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_ingest)

    p = sub.add_parser("link", help="generate design-runtime traceability links")
    p.add_argument("--model", required=True)
    p.add_argument("--spans", required=True)
    p.add_argument("--util")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_link)

    p = sub.add_parser("annotate", help="estimate demands, measure indices, write back")
    p.add_argument("--model", required=True)
    p.add_argument("--spans", required=True)
    p.add_argument("--util")
    p.add_argument("--window", type=float, required=True, help="measurement window in seconds")
    p.add_argument("--out", help="write the annotated model here")
    p.set_defaults(fn=cmd_annotate)

    p = sub.add_parser("detect", help="detect antipattern occurrences")
    p.add_argument("--model", required=True)
    p.add_argument("--bands", help="threshold config file (JSON)")
    p.add_argument("--floor", type=float, default=antipattern.DEFAULT_REPORT_FLOOR)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_detect)

    p = sub.add_parser("preview", help="MVA what-if for a refactoring action")
    p.add_argument("--model", required=True)
    p.add_argument("--action", required=True, help='JSON, e.g. {"kind":"CLONE","target":"web"}')
    p.add_argument("--out")
    p.set_defaults(fn=cmd_preview)

    p = sub.add_parser("refactor", help="apply a refactoring action to a model")
    p.add_argument("--model", required=True)
    p.add_argument("--action", required=True, help="JSON action or the word 'random'")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_refactor)

    p = sub.add_parser("simulate", help="run the system simulator")
    p.add_argument("--model", required=True)
    p.add_argument("--run", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="span output path (wire format)")
    p.add_argument("--util-out", dest="util_out", help="utilization sample output path")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("session", help="start a session: calibrate, measure, detect")
    common_session(p)
    p.add_argument("--apply", help="JSON action (or list of actions) to apply after starting")
    p.add_argument("--scope", choices=["MODEL_ONLY", "MODEL_AND_SYSTEM"],
                   default="MODEL_AND_SYSTEM")
    p.set_defaults(fn=cmd_session)

    p = sub.add_parser("batch", help="run the batch loop until clean or capped")
    common_session(p)
    p.add_argument("--max", type=int, default=10)
    p.set_defaults(fn=cmd_batch)

    p = sub.add_parser("serve", help="start the HTTP gateway")
    p.add_argument("--port", type=int, default=8070)
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except PerfloopError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

from __future__ import annotations

import json

import pytest
from fastapi.testclient import TestClient

from perfloop.api import create_app
from perfloop.cli import main as cli_main
from perfloop.serialize import to_canonical_json

MODEL_DOC = """
components:
  - name: entry
    operations: []
  - name: hot
    operations:
      - name: work
      - name: side
  - name: cold
    operations:
      - name: tick
nodes:
  - name: n-entry
    hosts: [entry]
  - name: n-hot
    hosts: [hot]
  - name: n-cold
    hosts: [cold]
node_links:
  - [n-entry, n-hot]
  - [n-hot, n-cold]
scenarios:
  - name: Main
    workload: {pattern: OPEN, rate: 8.0}
    steps:
      - {caller: entry, callee: hot, operation: work}
      - {caller: hot, callee: cold, operation: tick}
"""

RUN_CONFIG = {
    "seed": 9,
    "duration_s": 45.0,
    "warmup_s": 5.0,
    "arrivals": [{"scenario": "Main", "rate_per_s": 8.0}],
    "service_means": {"work": 0.1, "side": 0.005, "tick": 0.004},
}


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


@pytest.fixture(scope="module")
def session_id(client):
    response = client.post(
        "/sessions",
        json={
            "model_doc": MODEL_DOC,
            "run_config": RUN_CONFIG,
            "config": {"seed": 5, "calibration_duration_s": 30.0, "target_scenario": "Main"},
        },
    )
    assert response.status_code == 201, response.text
    return response.json()["session"]


def test_health(client):
    response = client.get("/health")
    assert response.status_code == 200
    assert response.text == "ok"


def test_unknown_session_404(client):
    assert client.get("/sessions/nope/indices").status_code == 404


def test_indices_and_model(client, session_id):
    indices = client.get(f"/sessions/{session_id}/indices")
    assert indices.status_code == 200
    body = indices.json()
    assert body["iteration"] == 0
    assert "Main" in body["indices"]["scenarios"]
    model = client.get(f"/sessions/{session_id}/model").json()
    assert model["generation"] == 0
    assert "components" in model["document"]


def test_antipatterns_listed(client, session_id):
    body = client.get(f"/sessions/{session_id}/antipatterns").json()
    assert body["occurrences"]
    assert body["occurrences"][0]["probability"] >= body["occurrences"][-1]["probability"]


def test_preview_invalid_target_422(client, session_id):
    response = client.post(
        f"/sessions/{session_id}/preview",
        json={"action": {"kind": "CLONE", "target": "ghost"}},
    )
    assert response.status_code == 422


def test_preview_valid(client, session_id):
    response = client.post(
        f"/sessions/{session_id}/preview",
        json={"action": {"kind": "CLONE", "target": "hot"}},
    )
    assert response.status_code == 200
    assert response.json()["scenarios"]["Main"]["delta_resp_time_s"] < 0


def test_apply_then_history_has_post_indices(client, session_id):
    response = client.post(
        f"/sessions/{session_id}/apply",
        json={"action": {"kind": "CLONE", "target": "hot"}, "scope": "MODEL_AND_SYSTEM"},
    )
    assert response.status_code == 200, response.text
    assert response.json()["iteration"] == 1
    assert response.json()["system_generation"] == 1
    history = client.get(f"/sessions/{session_id}/history").json()["history"]
    assert history[0]["action"]["target"] == "hot"
    assert history[0]["post_action_measured"] is not None
    assert history[1]["measured"] == history[0]["post_action_measured"]


def test_http_payload_is_canonical_serialization(client, session_id):
    raw = client.get(f"/sessions/{session_id}/indices")
    assert raw.text == to_canonical_json(json.loads(raw.text))


def test_fixture_backed_session(client):
    response = client.post(
        "/sessions",
        json={"fixture": "mm1", "config": {"seed": 2, "calibration_duration_s": 30.0}},
    )
    assert response.status_code == 201
    sid = response.json()["session"]
    indices = client.get(f"/sessions/{sid}/indices").json()
    assert indices["indices"]["scenarios"]["stream"]["resp_time_s"] > 0


def test_invalid_session_body_422(client):
    response = client.post("/sessions", json={"fixture": "nope"})
    assert response.status_code == 422


def test_concurrent_mutation_gets_409():
    from perfloop.api import SessionRegistry, create_app

    registry = SessionRegistry()
    local = TestClient(create_app(registry))
    created = local.post(
        "/sessions",
        json={
            "model_doc": MODEL_DOC,
            "run_config": RUN_CONFIG,
            "config": {"seed": 6, "calibration_duration_s": 30.0},
        },
    )
    sid = created.json()["session"]
    session = registry.get(sid)
    assert session.lock.acquire(blocking=False)  # simulate a writer in flight
    try:
        response = local.post(
            f"/sessions/{sid}/apply",
            json={"action": {"kind": "CLONE", "target": "hot"}, "scope": "MODEL_AND_SYSTEM"},
        )
        assert response.status_code == 409
        measure = local.post(f"/sessions/{sid}/measure")
        assert measure.status_code == 409
    finally:
        session.lock.release()
    # reads stay lock-free while the writer holds the session
    assert local.get(f"/sessions/{sid}/indices").status_code == 200


def test_measure_endpoint_refreshes_indices(client, session_id):
    response = client.post(f"/sessions/{session_id}/measure")
    assert response.status_code == 200
    body = response.json()
    assert "Main" in body["indices"]["scenarios"]
    current = client.get(f"/sessions/{session_id}/indices").json()
    assert current["indices"] == body["indices"]


# -- CLI ---------------------------------------------------------------------


@pytest.fixture()
def model_path(tmp_path):
    path = tmp_path / "model.yaml"
    path.write_text(MODEL_DOC)
    return str(path)


@pytest.fixture()
def run_path(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps(RUN_CONFIG))
    return str(path)


def test_cli_simulate_then_ingest_roundtrip(model_path, run_path, tmp_path, capsys):
    spans = tmp_path / "spans.ndjson"
    util = tmp_path / "util.ndjson"
    exit_code = cli_main(
        ["simulate", "--model", model_path, "--run", run_path,
         "--out", str(spans), "--util-out", str(util)]
    )
    assert exit_code == 0
    exit_code = cli_main(["ingest", "--spans", str(spans), "--util", str(util)])
    assert exit_code == 0
    report = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert report["traces"] > 0
    assert report["spans"] >= report["traces"]


def test_cli_detect_on_clean_model(tmp_path, capsys):
    doc = """
components:
  - name: a
    operations: [{name: op, service_demand: 0.01}]
  - name: b
    operations: [{name: bop, service_demand: 0.02}]
nodes:
  - name: na
    hosts: [a]
    utilization: 0.01
  - name: nb
    hosts: [b]
    utilization: 0.02
node_links: []
scenarios:
  - name: s
    workload: {pattern: OPEN, rate: 0.1}
    steps:
      - {caller: a, callee: a, operation: op, prob: 0.5}
"""
    path = tmp_path / "clean.yaml"
    path.write_text(doc)
    exit_code = cli_main(["detect", "--model", str(path)])
    assert exit_code == 0
    out = capsys.readouterr().out.strip()
    assert json.loads(out) == []


def test_cli_usage_error_exits_two(capsys):
    with pytest.raises(SystemExit) as exc:
        cli_main(["detect"])  # missing --model
    assert exc.value.code == 2


def test_cli_pipeline_error_exits_one(tmp_path, capsys):
    path = tmp_path / "bad.yaml"
    path.write_text("components: [{name: a}]\nnodes: []\nscenarios: []")
    exit_code = cli_main(["detect", "--model", str(path)])
    assert exit_code == 1
    assert "error:" in capsys.readouterr().err


def test_cli_full_pipeline_chain(model_path, run_path, tmp_path, capsys):
    spans = tmp_path / "spans.ndjson"
    util = tmp_path / "util.ndjson"
    annotated = tmp_path / "annotated.yaml"
    assert cli_main(["simulate", "--model", model_path, "--run", run_path,
                     "--out", str(spans), "--util-out", str(util)]) == 0
    assert cli_main(["link", "--model", model_path, "--spans", str(spans)]) == 0
    linked = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert linked["trace_model"]["links"]
    assert cli_main(["annotate", "--model", model_path, "--spans", str(spans),
                     "--util", str(util), "--window", "40", "--out", str(annotated)]) == 0
    capsys.readouterr()
    assert cli_main(["detect", "--model", str(annotated)]) == 0
    occurrences = json.loads(capsys.readouterr().out.strip())
    assert occurrences and occurrences[0]["target"].startswith("hot")
    assert cli_main(["preview", "--model", str(annotated),
                     "--action", '{"kind": "CLONE", "target": "hot"}']) == 0
    preview = json.loads(capsys.readouterr().out.strip())
    main = preview["scenarios"]["Main"]
    assert main["predicted"]["resp_time_s"] < main["baseline"]["resp_time_s"]
    assert cli_main(["refactor", "--model", str(annotated),
                     "--action", '{"kind": "CLONE", "target": "hot"}',
                     "--out", str(tmp_path / "refactored.yaml")]) == 0
    refactored = (tmp_path / "refactored.yaml").read_text()
    assert "cloned-hot" in refactored


def test_cli_session_apply_with_scope(model_path, run_path, capsys):
    exit_code = cli_main(
        ["session", "--model", model_path, "--run", run_path, "--seed", "5",
         "--target", "Main", "--apply", '{"kind": "CLONE", "target": "hot"}',
         "--scope", "MODEL_AND_SYSTEM"]
    )
    assert exit_code == 0
    payload = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert payload["iteration"] == 1


def test_cli_batch_prints_iteration_table(model_path, run_path, tmp_path, capsys):
    record = tmp_path / "session.ndjson"
    exit_code = cli_main(
        ["batch", "--model", model_path, "--run", run_path, "--seed", "5",
         "--floor", "0.6", "--max", "2", "--target", "Main", "--record", str(record)]
    )
    assert exit_code == 0
    out = capsys.readouterr().out
    assert "status:" in out
    assert record.exists()
    header = json.loads(record.read_text().splitlines()[0])
    assert header["kind"] == "perfloop-session"


def test_cli_and_http_detect_agree(client, tmp_path, capsys):
    # same underlying call -> byte-identical canonical serialization
    response = client.post(
        "/sessions",
        json={
            "model_doc": MODEL_DOC,
            "run_config": RUN_CONFIG,
            "config": {"seed": 5, "calibration_duration_s": 30.0, "target_scenario": "Main"},
        },
    )
    sid = response.json()["session"]
    http_occurrences = client.get(f"/sessions/{sid}/antipatterns")
    model_doc = client.get(f"/sessions/{sid}/model").json()["document"]

    model_file = tmp_path / "annotated.yaml"
    model_file.write_text(model_doc)
    bands_file = tmp_path / "bands.json"
    from perfloop.antipattern import default_bands
    from perfloop.arch_model import load_model

    bands, _ = default_bands(load_model(model_doc))
    bands_file.write_text(
        json.dumps({m.value: {"lb": b.lower, "ub": b.upper} for m, b in bands.items()})
    )
    exit_code = cli_main(["detect", "--model", str(model_file), "--bands", str(bands_file)])
    assert exit_code == 0
    cli_out = capsys.readouterr().out.strip()
    assert cli_out == to_canonical_json(json.loads(http_occurrences.text)["occurrences"])

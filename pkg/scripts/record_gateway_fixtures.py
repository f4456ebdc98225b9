#!/usr/bin/env python3
"""Record real gateway responses for the web UI snapshot tests.

Writes one JSON file per endpoint under frontend/test/fixtures/. Re-run
whenever the gateway serialization changes, and commit the output.
"""

from __future__ import annotations

import json
from pathlib import Path

from fastapi.testclient import TestClient

from perfloop.api import create_app

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


def main() -> None:
    out_dir = Path(__file__).parent.parent / "frontend" / "test" / "fixtures"
    out_dir.mkdir(parents=True, exist_ok=True)
    client = TestClient(create_app())

    created = client.post(
        "/sessions",
        json={
            "model_doc": MODEL_DOC,
            "run_config": RUN_CONFIG,
            "config": {"seed": 5, "calibration_duration_s": 30.0, "target_scenario": "Main"},
        },
    )
    created.raise_for_status()
    sid = created.json()["session"]

    preview = client.post(
        f"/sessions/{sid}/preview", json={"action": {"kind": "CLONE", "target": "hot"}}
    )
    preview.raise_for_status()
    (out_dir / "preview.json").write_text(preview.text + "\n")

    applied = client.post(
        f"/sessions/{sid}/apply",
        json={"action": {"kind": "CLONE", "target": "hot"}, "scope": "MODEL_AND_SYSTEM"},
    )
    applied.raise_for_status()

    for name in ("indices", "antipatterns", "history", "candidates"):
        response = client.get(f"/sessions/{sid}/{name}")
        response.raise_for_status()
        (out_dir / f"{name}.json").write_text(response.text + "\n")

    print(f"recorded fixtures for session {sid} in {out_dir}")
    print(json.dumps(client.get(f"/sessions/{sid}/indices").json()["indices"]["scenarios"]))


if __name__ == "__main__":
    main()

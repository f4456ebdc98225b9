"""Canonical JSON used by both the CLI and the HTTP gateway, so the two
surfaces emit byte-identical payloads for the same underlying call."""

from __future__ import annotations

import json


def to_canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False,
                      allow_nan=False)

"""Desk-scale case-study fixtures: an e-commerce shop shape (9 services,
three scenarios at 3.8 / 225 / 17.5 users per second), a train-ticketing
subset (rebook / verification-code / sso / admin-user at 4.5 / 2.75 per
second), and two analytic queueing fixtures with closed-form expectations.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from importlib import resources

from perfloop.arch_model import ArchModel, load_model
from perfloop.errors import TargetNotFoundError, ValidationError
from perfloop.simulator import SimRunConfig

FIXTURE_NAMES = ("eshopper", "trainticket-subset", "mm1", "two-station")


@dataclass(frozen=True)
class Fixture:
    name: str
    model_doc: str
    model: ArchModel
    run_config: SimRunConfig
    expected: dict  # expected-values table; entries carry provenance tags


def _read(filename: str) -> str:
    return (resources.files("perfloop.fixtures") / "data" / filename).read_text()


def _manifest() -> dict:
    return json.loads(_read("manifest.json"))


def load_fixture(name: str) -> Fixture:
    """Load a named fixture, verifying its files against the manifest."""
    if name not in FIXTURE_NAMES:
        raise TargetNotFoundError(f"unknown fixture {name!r}; known: {', '.join(FIXTURE_NAMES)}")
    manifest = _manifest()
    entry = manifest["fixtures"][name]
    contents = {}
    for filename, checksum in entry["files"].items():
        text = _read(filename)
        digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
        if digest != checksum:
            raise ValidationError(
                f"fixture {name}: {filename} does not match its manifest checksum"
            )
        contents[filename] = text

    model_doc = contents[f"{name}.model.yaml"]
    return Fixture(
        name=name,
        model_doc=model_doc,
        model=load_model(model_doc),
        run_config=SimRunConfig.from_dict(json.loads(contents[f"{name}.run.json"])),
        expected=json.loads(contents[f"{name}.expected.json"]),
    )

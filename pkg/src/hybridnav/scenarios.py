"""Scenario files: YAML documents checked against a bundled JSON schema."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
import yaml

from .controller import ControllerParams, HybridState
from .geometry import ConvexPolytope, HalfspaceBox, Sphere
from .sensor import SensorConfig
from .simulator import SimConfig
from .world import World

DATA = resources.files("hybridnav") / "data"


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    world: World
    params: ControllerParams
    initial_states: tuple[HybridState, ...]
    sensor: SensorConfig | None = None
    sim_overrides: dict = field(default_factory=dict)
    description: str = ""
    source: Path | None = None

    def sim_config(self, **overrides) -> SimConfig:
        """Scenario defaults, then caller overrides (``None`` values are ignored)."""
        kw = dict(self.sim_overrides)
        kw.update({k: v for k, v in overrides.items() if v is not None})
        return SimConfig(**kw)


def _schema() -> dict:
    return json.loads((DATA / "scenario.schema.json").read_text())


def corpus_path(name: str) -> Path:
    """Path of a bundled scenario, e.g. ``corpus_path("study1")``."""
    return Path(str(DATA / "scenarios" / f"{name}.yaml"))


def _shape(spec: dict):
    kind = spec["type"]
    if kind == "sphere":
        return Sphere(spec["center"], spec["radius"])
    if kind == "polytope":
        return ConvexPolytope(np.asarray(spec["vertices"], dtype=float))
    return HalfspaceBox(spec["lo"], spec["hi"])


def _state(spec: dict) -> HybridState:
    return HybridState.initial(
        spec["x"],
        m=spec.get("m", 0),
        h=spec.get("h"),
        a=spec.get("a"),
        s=spec.get("s", 0.0),
    )


def parse(doc: dict, source: Path | None = None) -> Scenario:
    try:
        jsonschema.validate(doc, _schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ScenarioError(f"{source or 'scenario'}: {where}: {exc.message}") from None

    robot = doc["robot"]
    ws = doc.get("workspace")
    try:
        world = World(
            tuple(_shape(o) for o in doc["obstacles"]),
            robot["radius"],
            robot["safety_margin"],
            HalfspaceBox(ws["lo"], ws["hi"]) if ws else None,
        )
        c = doc["controller"]
        params = ControllerParams.create(
            c["kappa_s"], c["kappa_r"], c["gamma"], c["epsilon"], world.r_a,
            gamma_a=c.get("gamma_a"), gamma_s=c.get("gamma_s"),
        )
    except ValueError as exc:
        raise ScenarioError(f"{source or 'scenario'}: {exc}") from None
    sensor = SensorConfig(**doc["sensor"]) if "sensor" in doc else None
    return Scenario(
        name=doc["name"],
        world=world,
        params=params,
        initial_states=tuple(_state(s) for s in doc["initial_states"]),
        sensor=sensor,
        sim_overrides=dict(doc.get("simulation", {})),
        description=doc.get("description", "").strip(),
        source=source,
    )


def load(path) -> Scenario:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ScenarioError(f"{path}: not valid YAML ({exc})") from None
    if not isinstance(doc, dict):
        raise ScenarioError(f"{path}: top level must be a mapping")
    return parse(doc, source=path)


def with_sensor(sc: Scenario, sensor: SensorConfig) -> Scenario:
    return replace(sc, sensor=sensor)

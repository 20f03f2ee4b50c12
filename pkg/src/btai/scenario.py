"""Scenario files: a versioned YAML document with states, actions, the
behavior tree, the initial world and an optional perturbation schedule.

Parsing validates every cross-reference and reports the file and the
offending reference; serialization is the exact inverse so scenarios
round-trip."""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from . import bt
from .domain import (
    ActionTemplate,
    DomainError,
    Predicate,
    StateRegistry,
    StateVar,
    achieve_matrix,
)
from .world import PerturbationEvent, World

FORMAT_VERSION = "btai-scenario/1"


class ScenarioError(ValueError):
    """Parse or validation failure, annotated with the source file."""

    def __init__(self, source: str, message: str):
        super().__init__(f"{source}: {message}")
        self.source = source


@dataclass
class Scenario:
    name: str
    states: list[StateVar]
    actions: list[ActionTemplate]
    bt_spec: dict
    fluents: dict[str, int]
    observable: dict[str, bool]
    noise_p: float = 0.0
    perturbations: list[PerturbationEvent] = field(default_factory=list)
    budget_ticks: int = 100
    deterministic: bool = True
    seed: int = 0
    source: str = "<memory>"

    def registry(self) -> StateRegistry:
        return StateRegistry(self.states)

    def actions_by_name(self) -> dict[str, ActionTemplate]:
        return {a.name: a for a in self.actions}

    def build_tree(self) -> bt.BTNode:
        return bt.build_tree(self.bt_spec, self.registry(), self.actions_by_name())

    def make_world(self, seed: Optional[int] = None,
                   deterministic: Optional[bool] = None) -> World:
        return World(
            self.registry(),
            self.fluents,
            self.observable,
            seed=self.seed if seed is None else seed,
            noise_p=self.noise_p,
            deterministic=self.deterministic if deterministic is None else deterministic,
        )


def _parse_predicate(raw, source) -> Predicate:
    try:
        return Predicate(str(raw["state"]), int(raw.get("index", 0)))
    except (KeyError, TypeError) as exc:
        raise ScenarioError(source, f"bad predicate entry {raw!r}") from exc


def _parse_action(raw, registry: StateRegistry, source) -> ActionTemplate:
    try:
        name = str(raw["name"])
    except (KeyError, TypeError) as exc:
        raise ScenarioError(source, f"action entry missing a name: {raw!r}") from exc
    pre = tuple(_parse_predicate(p, source) for p in raw.get("pre", []))
    post = []
    for p in raw.get("post", []):
        try:
            post.append((str(p["state"]), int(p.get("index", 0))))
        except (KeyError, TypeError) as exc:
            raise ScenarioError(source, f"action {name}: bad postcondition {p!r}") from exc
    transitions = {}
    explicit = raw.get("transitions", {})
    for sid, idx in post:
        if sid not in registry:
            raise ScenarioError(source, f"action {name}: unknown state {sid!r}")
        if sid in explicit:
            transitions[sid] = np.asarray(explicit[sid], dtype=float)
        else:
            transitions[sid] = achieve_matrix(registry.get(sid).m, idx)
    for sid in explicit:
        if sid not in transitions:
            raise ScenarioError(
                source, f"action {name}: transition for {sid!r} has no postcondition")
    action = ActionTemplate(
        name=name,
        parameters=tuple(raw.get("parameters", [])),
        preconditions=pre,
        postconditions=tuple(post),
        transitions=transitions,
        duration_ticks=int(raw.get("duration", 3)),
        success_prob=(float(raw["success_prob"])
                      if "success_prob" in raw else None),
    )
    try:
        registry.validate_action(action)
    except (DomainError, KeyError) as exc:
        raise ScenarioError(source, f"action {name}: {exc}") from exc
    return action


def scenario_from_dict(data: dict, source: str = "<memory>") -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioError(source, "document must be a mapping")
    if data.get("format") != FORMAT_VERSION:
        raise ScenarioError(
            source, f"missing or unsupported format header (need {FORMAT_VERSION!r})")
    for key in ("name", "states", "actions", "bt", "world"):
        if key not in data:
            raise ScenarioError(source, f"missing section {key!r}")

    states = []
    for raw in data["states"]:
        try:
            labels = tuple(str(v) for v in raw["values"])
            states.append(StateVar(str(raw["id"]), len(labels), labels))
        except (KeyError, TypeError, DomainError) as exc:
            raise ScenarioError(source, f"bad state entry {raw!r}: {exc}") from exc
    try:
        registry = StateRegistry(states)
    except DomainError as exc:
        raise ScenarioError(source, str(exc)) from exc

    actions = [_parse_action(raw, registry, source) for raw in data["actions"]]
    names = [a.name for a in actions]
    if len(set(names)) != len(names):
        raise ScenarioError(source, "duplicate action names")

    world = data["world"]
    fluents = {str(k): int(v) for k, v in world.get("fluents", {}).items()}
    for state in registry:
        if state.id not in fluents:
            raise ScenarioError(source, f"world.fluents missing state {state.id!r}")
        if not 0 <= fluents[state.id] < state.m:
            raise ScenarioError(source, f"world.fluents[{state.id}] out of range")
    for sid in fluents:
        if sid not in registry:
            raise ScenarioError(source, f"world.fluents names unknown state {sid!r}")
    observable = {s.id: bool(world.get("observable", {}).get(s.id, True))
                  for s in registry}
    for sid in world.get("observable", {}):
        if sid not in registry:
            raise ScenarioError(source, f"world.observable names unknown state {sid!r}")

    perturbations = []
    last_tick = None
    for raw in data.get("perturbations", []):
        try:
            at_tick = int(raw["at_tick"])
        except (KeyError, TypeError) as exc:
            raise ScenarioError(source, f"perturbation missing at_tick: {raw!r}") from exc
        if last_tick is not None and at_tick < last_tick:
            raise ScenarioError(source, "perturbation ticks must be non-decreasing")
        last_tick = at_tick
        assignments = []
        for sid, idx in raw.get("set", {}).items():
            if sid not in registry:
                raise ScenarioError(source, f"perturbation names unknown state {sid!r}")
            assignments.append((str(sid), int(idx)))
        obs_changes = []
        for sid, flag in raw.get("observable", {}).items():
            if sid not in registry:
                raise ScenarioError(source, f"perturbation names unknown state {sid!r}")
            obs_changes.append((str(sid), bool(flag)))
        perturbations.append(PerturbationEvent(at_tick, tuple(assignments),
                                               tuple(obs_changes)))

    budget = int(data.get("budget_ticks", 100))
    if budget < 1:
        raise ScenarioError(source, "budget_ticks must be >= 1")

    scenario = Scenario(
        name=str(data["name"]),
        states=states,
        actions=actions,
        bt_spec=data["bt"],
        fluents=fluents,
        observable=observable,
        noise_p=float(world.get("noise_p", 0.0)),
        perturbations=perturbations,
        budget_ticks=budget,
        deterministic=bool(data.get("deterministic", True)),
        seed=int(data.get("seed", 0)),
        source=source,
    )
    try:
        scenario.build_tree()
    except bt.TreeError as exc:
        raise ScenarioError(source, str(exc)) from exc
    return scenario


def parse_scenario(path) -> Scenario:
    path = Path(path)
    if not path.exists():
        raise ScenarioError(str(path), "file does not exist")
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ScenarioError(str(path), f"YAML parse error: {exc}") from exc
    return scenario_from_dict(data, source=str(path))


def scenario_to_dict(sc: Scenario) -> dict:
    def pred(p: Predicate):
        return {"state": p.state_id, "index": p.required_index}

    return {
        "format": FORMAT_VERSION,
        "name": sc.name,
        "states": [{"id": s.id, "values": list(s.value_labels)} for s in sc.states],
        "actions": [
            {
                "name": a.name,
                **({"parameters": list(a.parameters)} if a.parameters else {}),
                **({"pre": [pred(p) for p in a.preconditions]} if a.preconditions else {}),
                **({"post": [{"state": sid, "index": idx}
                             for sid, idx in a.postconditions]} if a.postconditions else {}),
                "transitions": {sid: [[float(x) for x in row] for row in b]
                                for sid, b in a.transitions.items()},
                "duration": a.duration_ticks,
                **({"success_prob": a.success_prob}
                   if a.success_prob is not None else {}),
            }
            for a in sc.actions
        ],
        "bt": sc.bt_spec,
        "world": {
            "fluents": dict(sc.fluents),
            "observable": dict(sc.observable),
            "noise_p": sc.noise_p,
        },
        "perturbations": [
            {
                "at_tick": e.at_tick,
                "set": {sid: idx for sid, idx in e.assignments},
                "observable": {sid: flag for sid, flag in e.observability_changes},
            }
            for e in sc.perturbations
        ],
        "budget_ticks": sc.budget_ticks,
        "deterministic": sc.deterministic,
        "seed": sc.seed,
    }


def serialize_scenario(sc: Scenario) -> str:
    return yaml.safe_dump(scenario_to_dict(sc), sort_keys=False)


def shipped_scenario_path(name: str) -> Path:
    """Path of a scenario file bundled with the package."""
    return Path(importlib.resources.files("btai") / "scenarios" / name)

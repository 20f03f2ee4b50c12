"""Symbolic world model: states, observations, predicates, action templates
and the run-time prior (preference) bookkeeping.

States are small categorical variables; beliefs over them live on the simplex
and the logical state is the one-hot argmax used to evaluate predicates.
Preferences come from two sources: nominal entries written by the behavior
tree (value 1) and pushed entries for missing action preconditions (value 2,
higher priority, removed as soon as they hold).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

import numpy as np

from .inference import ModelError, check_stochastic_matrix, safe_log, softmax

NOMINAL_PREFERENCE = 1.0
PUSHED_PREFERENCE = 2.0

#: probability of reaching the target value from elsewhere in one action
ACT_PROB = 0.9
#: probability of staying at the target value once reached
STAY_PROB = 0.95


class UnknownStateError(KeyError):
    """A state id was used that is not in the registry."""


class DomainError(ValueError):
    """Ill-formed domain definition."""


@dataclass(frozen=True)
class StateVar:
    id: str
    m: int
    value_labels: tuple[str, ...]

    def __post_init__(self):
        if self.m < 2:
            raise DomainError(f"state {self.id}: need at least 2 values")
        if len(self.value_labels) != self.m or len(set(self.value_labels)) != self.m:
            raise DomainError(f"state {self.id}: need {self.m} unique value labels")


@dataclass(frozen=True)
class Predicate:
    """Run-time check that a state currently has a specific value."""

    state_id: str
    required_index: int


@dataclass(frozen=True)
class Observation:
    state_id: str
    one_hot: Optional[np.ndarray]  # None when the state is unobservable

    @property
    def absent(self) -> bool:
        return self.one_hot is None


@dataclass(frozen=True)
class LogicalState:
    state_id: str
    one_hot: np.ndarray

    @property
    def index(self) -> int:
        return int(np.argmax(self.one_hot))


def achieve_matrix(m: int, target: int, act_prob: float = ACT_PROB,
                   stay_prob: float = STAY_PROB) -> np.ndarray:
    """Transition matrix of an action that drives a state to ``target``.

    From any other value the target is reached with ``act_prob``; once there
    the state is kept with ``stay_prob`` (mass leaks uniformly elsewhere).
    For m=2 this reproduces the canonical moveTo matrix [[.95,.9],[.05,.1]].
    """
    b = np.zeros((m, m))
    for j in range(m):
        if j == target:
            b[:, j] = (1.0 - stay_prob) / (m - 1)
            b[target, j] = stay_prob
        else:
            b[:, j] = 0.0
            b[target, j] = act_prob
            b[j, j] = 1.0 - act_prob
    return b


_BASE_NAME = re.compile(r"^([^(]+)")


@dataclass(frozen=True, eq=False)
class ActionTemplate:
    """Named action with preconditions, postconditions and state transitions.

    ``postconditions`` lists (state_id, target index) pairs; ``transitions``
    holds the corresponding transition matrices (states not listed are left
    untouched, i.e. evolve under the identity).
    """

    name: str
    parameters: tuple[str, ...] = ()
    preconditions: tuple[Predicate, ...] = ()
    postconditions: tuple[tuple[str, int], ...] = ()
    transitions: Mapping[str, np.ndarray] = field(default_factory=dict)
    duration_ticks: int = 3
    success_prob: Optional[float] = None   # explicit override, else derived

    def __post_init__(self):
        if self.duration_ticks < 1:
            raise DomainError(f"action {self.name}: duration must be >= 1")
        if self.success_prob is not None and not 0.0 <= self.success_prob <= 1.0:
            raise DomainError(f"action {self.name}: success_prob must be in [0, 1]")

    @property
    def base_name(self) -> str:
        return _BASE_NAME.match(self.name).group(1)

    @property
    def success_probability(self) -> float:
        """Dominant entry of the declared transition columns (1 for no-ops),
        unless an explicit success_prob was given."""
        if self.success_prob is not None:
            return self.success_prob
        probs = [float(np.max(b)) for b in self.transitions.values()]
        return min(probs) if probs else 1.0

    def post_index(self, state_id: str) -> Optional[int]:
        for sid, idx in self.postconditions:
            if sid == state_id:
                return idx
        return None


class StateRegistry:
    """Ordered, read-only registry of the symbolic states."""

    def __init__(self, states: Iterable[StateVar]):
        self._states: dict[str, StateVar] = {}
        for s in states:
            if s.id in self._states:
                raise DomainError(f"duplicate state id {s.id}")
            self._states[s.id] = s

    def __contains__(self, state_id: str) -> bool:
        return state_id in self._states

    def __iter__(self):
        return iter(self._states.values())

    def __len__(self):
        return len(self._states)

    def get(self, state_id: str) -> StateVar:
        try:
            return self._states[state_id]
        except KeyError:
            raise UnknownStateError(state_id) from None

    def likelihood(self, state_id: str) -> np.ndarray:
        # symbolic perception maps observations one-to-one onto states
        return np.eye(self.get(state_id).m)

    def uniform_beliefs(self) -> dict[str, np.ndarray]:
        return {s.id: np.full(s.m, 1.0 / s.m) for s in self}

    def validate_predicate(self, pred: Predicate):
        state = self.get(pred.state_id)
        if not 0 <= pred.required_index < state.m:
            raise DomainError(
                f"predicate on {pred.state_id}: index {pred.required_index} "
                f"out of range for m={state.m}")

    def validate_action(self, action: ActionTemplate):
        for pred in action.preconditions:
            self.validate_predicate(pred)
        post = dict(action.postconditions)
        for sid, idx in action.postconditions:
            state = self.get(sid)
            if not 0 <= idx < state.m:
                raise DomainError(f"action {action.name}: bad postcondition index on {sid}")
        for sid, b in action.transitions.items():
            state = self.get(sid)
            mat = check_stochastic_matrix(b, f"{action.name} transition[{sid}]")
            if mat.shape[0] != state.m:
                raise DomainError(f"action {action.name}: transition[{sid}] wrong size")
            if sid not in post:
                raise DomainError(
                    f"action {action.name}: transition on {sid} without a postcondition")
            target = post[sid]
            for j in range(state.m):
                if j != target and int(np.argmax(mat[:, j])) != target:
                    raise DomainError(
                        f"action {action.name}: transition[{sid}] column {j} does not "
                        f"move mass toward postcondition index {target}")


def update_beliefs(
    beliefs: Mapping[str, np.ndarray],
    observations: Mapping[str, Observation],
    last_action: Optional[ActionTemplate],
    registry: StateRegistry,
) -> dict[str, np.ndarray]:
    """One perception step: propagate each belief through the last action's
    transition (identity where the action did not act) and fold in the
    observation evidence where present."""
    for sid in observations:
        if sid not in registry:
            raise UnknownStateError(sid)
    updated: dict[str, np.ndarray] = {}
    for state in registry:
        b = np.asarray(beliefs[state.id], dtype=float)
        trans = None
        if last_action is not None:
            trans = last_action.transitions.get(state.id)
        obs = observations.get(state.id)
        absent = obs is None or obs.absent
        if trans is None and absent:
            # no evidence and identity dynamics: the softmax of the clamped
            # log-identity would sharpen the belief, so leave it alone
            updated[state.id] = b.copy()
            continue
        v = safe_log(trans if trans is not None else np.eye(state.m)) @ b
        if not absent:
            v = v + safe_log(registry.likelihood(state.id)).T @ obs.one_hot
        updated[state.id] = softmax(v)
    return updated


def logical_state(beliefs: Mapping[str, np.ndarray]) -> dict[str, LogicalState]:
    """One-hot argmax of each belief; ties resolve to the lowest index.

    Entries within 1e-9 of the maximum count as tied, so the tie rule is not
    decided by floating-point residue of the clamped-log updates."""
    out: dict[str, LogicalState] = {}
    for sid, b in beliefs.items():
        b = np.asarray(b, dtype=float)
        tied = np.nonzero(b >= b.max() - 1e-9)[0]
        one_hot = np.zeros_like(b)
        one_hot[int(tied[0])] = 1.0
        out[sid] = LogicalState(sid, one_hot)
    return out


def holds(pred: Predicate, logical: Mapping[str, LogicalState],
          registry: StateRegistry) -> bool:
    registry.validate_predicate(pred)
    if pred.state_id not in logical:
        raise UnknownStateError(pred.state_id)
    return logical[pred.state_id].one_hot[pred.required_index] == 1.0


@dataclass(frozen=True)
class PriorEntry:
    state_id: str
    index: int
    value: float
    origin: str  # "bt" or "precondition"


class PriorSet:
    """Run-time preference store.

    Nominal entries are keyed by the behavior-tree node that wrote them and
    are rewritten every tick; pushed entries persist until their predicate
    holds.  When both address the same state the pushed value wins on the
    index it sets.
    """

    def __init__(self):
        self._nominal: dict[object, tuple[tuple[str, int], ...]] = {}
        self._pushed: dict[str, int] = {}

    def set_nominal(self, key, targets: Iterable[tuple[str, int]]):
        self._nominal[key] = tuple(targets)

    def clear_nominal(self, key=None):
        if key is None:
            self._nominal.clear()
        else:
            self._nominal.pop(key, None)

    def push(self, pred: Predicate):
        # at most one pushed entry per state: a newer push replaces the old
        self._pushed[pred.state_id] = pred.required_index

    def pushed_predicates(self) -> list[Predicate]:
        return [Predicate(sid, idx) for sid, idx in self._pushed.items()]

    def remove_pushed(self, state_id: str):
        self._pushed.pop(state_id, None)

    def has_pushed(self, state_id: str) -> bool:
        return state_id in self._pushed

    def nominal_targets(self) -> list[tuple[str, int]]:
        out = []
        for targets in self._nominal.values():
            out.extend(targets)
        return out

    def assemble(self, state_id: str, m: int) -> np.ndarray:
        """Log-preference vector for one state: nominal 1s, pushed 2s, else 0."""
        c = np.zeros(m)
        for targets in self._nominal.values():
            for sid, idx in targets:
                if sid == state_id:
                    c[idx] = NOMINAL_PREFERENCE
        if state_id in self._pushed:
            c[self._pushed[state_id]] = PUSHED_PREFERENCE
        return c

    def assemble_all(self, registry: StateRegistry) -> dict[str, np.ndarray]:
        return {s.id: self.assemble(s.id, s.m) for s in registry}

"""Discrete active-inference engine over factorized categorical state models.

Each symbolic state is one independent factor with its own likelihood matrix
``A`` (identity in this package), per-action transition matrices ``B``, prior
belief ``D`` and log-preference vector ``C``.  Policies are one-step action
sequences scored over a two-step horizon: per-policy posterior beliefs are
obtained by iterated forward-backward softmax sweeps, policies are ranked by
variational plus expected free energy, and the next action is read off the
policy posterior.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

EPS = 1e-16
SWEEP_TOL = 1e-6
MAX_SWEEPS = 10
DEFAULT_HORIZON = 2
IDLE = "Idle"


class ModelError(ValueError):
    """Inconsistent generative model (shape mismatch, bad distribution)."""


class NoPoliciesError(ModelError):
    """Policy posterior requested over an empty policy set."""


def safe_log(p) -> np.ndarray:
    """Elementwise ln(max(p, 1e-16)); exact wherever p >= 1e-16."""
    return np.log(np.maximum(np.asarray(p, dtype=float), EPS))


def softmax(v) -> np.ndarray:
    """Stable softmax (max-subtracted); invariant to constant shifts."""
    v = np.asarray(v, dtype=float)
    z = np.exp(v - v.max())
    return z / z.sum()


def check_categorical(p, name: str = "distribution", tol: float = 1e-9) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ModelError(f"{name} must be a non-empty vector")
    if np.any(p < -tol) or np.any(p > 1 + tol):
        raise ModelError(f"{name} entries must lie in [0, 1]")
    if abs(p.sum() - 1.0) > tol:
        raise ModelError(f"{name} must sum to 1 (got {p.sum():.12f})")
    return p


def check_stochastic_matrix(mat, name: str = "matrix") -> np.ndarray:
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ModelError(f"{name} must be square")
    for j in range(mat.shape[1]):
        check_categorical(mat[:, j], f"{name} column {j}")
    return mat


@dataclass(frozen=True)
class Factor:
    """Generative model of a single symbolic state.

    ``transitions`` maps action name to that action's transition matrix for
    this state; actions without an entry leave the state alone (identity).
    """

    likelihood: np.ndarray                   # A, m x m
    transitions: Mapping[str, np.ndarray]    # action name -> B, m x m
    prior: np.ndarray                        # D, current belief, length m
    preferences: np.ndarray                  # C, log-preferences, length m

    def __post_init__(self):
        a = check_stochastic_matrix(self.likelihood, "likelihood")
        d = check_categorical(self.prior, "prior belief")
        c = np.asarray(self.preferences, dtype=float)
        if not np.all(np.isfinite(c)):
            raise ModelError("preferences must be finite")
        if c.shape != d.shape or a.shape[0] != d.shape[0]:
            raise ModelError("factor dimensions disagree")
        for name, b in self.transitions.items():
            if check_stochastic_matrix(b, f"transition[{name}]").shape != a.shape:
                raise ModelError(f"transition[{name}] has wrong shape")

    @property
    def m(self) -> int:
        return self.prior.shape[0]

    def transition(self, action: str) -> np.ndarray:
        b = self.transitions.get(action)
        if b is None:
            return np.eye(self.m)
        return np.asarray(b, dtype=float)


def _check_observation(o, m: int):
    if o is None:
        return None
    o = np.asarray(o, dtype=float)
    if o.shape != (m,):
        raise ModelError("observation length does not match state size")
    return o


def update_posterior_states(
    transitions: Sequence[np.ndarray],
    likelihood: np.ndarray,
    prior: np.ndarray,
    observations: Sequence[Optional[np.ndarray]],
    horizon: int = DEFAULT_HORIZON,
) -> list[np.ndarray]:
    """Policy-conditioned posterior beliefs s_tau for tau = 1..horizon.

    ``transitions`` holds the policy's per-step transition matrices (length
    horizon - 1) and ``observations`` the available one-hot outcomes (None
    for future steps).  Each belief is the softmax of the forward message
    (log-transition applied to the previous belief; the log prior at tau=1),
    the backward message (transposed log-transition applied to the next
    belief) and the observation evidence, swept until the maximum absolute
    change drops below 1e-6 or 10 iterations elapse.
    """
    if horizon < 1:
        raise ModelError("horizon must be >= 1")
    if len(transitions) != horizon - 1:
        raise ModelError("need one transition matrix per policy step")
    if len(observations) > horizon:
        raise ModelError("more observations than time steps")
    a = np.asarray(likelihood, dtype=float)
    d = check_categorical(prior, "prior belief")
    m = d.shape[0]
    if a.shape != (m, m):
        raise ModelError("likelihood shape does not match state size")
    obs = [None] * horizon
    for t, o in enumerate(observations):
        obs[t] = _check_observation(o, m)

    log_a = safe_log(a)
    log_bs = [safe_log(b) for b in transitions]
    log_d = safe_log(d)

    beliefs = [np.full(m, 1.0 / m) for _ in range(horizon)]
    for _ in range(MAX_SWEEPS):
        delta = 0.0
        for t in range(horizon):
            v = log_d.copy() if t == 0 else log_bs[t - 1] @ beliefs[t - 1]
            if t < horizon - 1:
                v = v + log_bs[t].T @ beliefs[t + 1]
            if obs[t] is not None:
                v = v + log_a.T @ obs[t]
            new = softmax(v)
            delta = max(delta, float(np.max(np.abs(new - beliefs[t]))))
            beliefs[t] = new
        if delta < SWEEP_TOL:
            break
    return beliefs


def variational_free_energy(
    beliefs: Sequence[np.ndarray],
    transitions: Sequence[np.ndarray],
    likelihood: np.ndarray,
    prior: np.ndarray,
    observations: Sequence[Optional[np.ndarray]],
) -> float:
    """Policy-specific variational free energy accumulated over the horizon.

    Uses the same step conventions as :func:`update_posterior_states`: the
    transition term at tau=1 is the log prior, and the observation term is
    skipped for steps without an outcome.
    """
    horizon = len(beliefs)
    if len(transitions) != horizon - 1:
        raise ModelError("need one transition matrix per policy step")
    log_a = safe_log(likelihood)
    obs = list(observations) + [None] * (horizon - len(observations))
    total = 0.0
    for t in range(horizon):
        s = np.asarray(beliefs[t], dtype=float)
        v = safe_log(s)
        if t == 0:
            v = v - safe_log(prior)
        else:
            v = v - safe_log(transitions[t - 1]) @ beliefs[t - 1]
        if obs[t] is not None:
            v = v - log_a.T @ np.asarray(obs[t], dtype=float)
        total += float(s @ v)
    return total


def expected_free_energy(
    beliefs: Sequence[np.ndarray],
    likelihood: np.ndarray,
    preferences: np.ndarray,
    current_step: int = 1,
) -> float:
    """Expected free energy over future steps: expected cost plus ambiguity.

    For each tau past the current step, the predicted outcome o = A s is
    scored against the log-preferences (cost) and against the conditional
    outcome entropy encoded in A (ambiguity).
    """
    a = np.asarray(likelihood, dtype=float)
    c = np.asarray(preferences, dtype=float)
    if c.shape[0] != a.shape[0]:
        raise ModelError("preference length does not match state size")
    # ambiguity weights: column sums of A * ln A (zero entries contribute 0)
    ambiguity = np.einsum("ij,ij->j", a, safe_log(a))
    total = 0.0
    for t in range(current_step, len(beliefs)):
        s = np.asarray(beliefs[t], dtype=float)
        o = a @ s
        total += float(o @ (safe_log(o) - c)) + float(s @ ambiguity)
    return total


def policy_posterior(free_energies, expected_free_energies) -> np.ndarray:
    """Posterior over policies: softmax(-G - F)."""
    f = np.asarray(free_energies, dtype=float)
    g = np.asarray(expected_free_energies, dtype=float)
    if f.shape != g.shape or f.ndim != 1:
        raise ModelError("F and G must be vectors of equal length")
    if f.size == 0:
        raise NoPoliciesError("empty policy set")
    return softmax(-g - f)


def bayesian_model_average(policy_probs, per_policy_beliefs) -> np.ndarray:
    """Policy-probability-weighted average of per-policy beliefs at one step."""
    pi = check_categorical(policy_probs, "policy posterior")
    stacked = np.asarray([np.asarray(b, dtype=float) for b in per_policy_beliefs])
    if stacked.shape[0] != pi.shape[0]:
        raise ModelError("one belief per policy required")
    return pi @ stacked


def select_action(policy_probs, policies: Sequence[Sequence[str]]) -> str:
    """First-step action of the most likely policy.

    Policies sharing a first action pool their probability mass; exact ties
    go to the action that appears first in the policy list.
    """
    pi = np.asarray(policy_probs, dtype=float)
    if pi.size == 0 or len(policies) != pi.size:
        raise NoPoliciesError("need one probability per policy")
    scores: dict[str, float] = {}
    for p, policy in zip(pi, policies):
        u = policy[0]
        scores[u] = scores.get(u, 0.0) + float(p)
    best = None
    for u, score in scores.items():  # insertion order = declaration order
        if best is None or score > scores[best]:
            best = u
    return best


@dataclass
class InferenceOutcome:
    """Everything one action-selection round produced."""

    policies: list[tuple[str, ...]]
    policy_probs: np.ndarray
    free_energy: np.ndarray
    expected_free_energy: np.ndarray
    # state id -> [policy][tau] belief vectors
    per_policy_beliefs: dict[str, list[list[np.ndarray]]]
    # state id -> [tau] averaged belief vectors
    averaged_beliefs: dict[str, list[np.ndarray]] = field(default_factory=dict)
    chosen_action: str = IDLE


def preferences_satisfied(
    factors: Mapping[str, Factor],
    observations: Mapping[str, Optional[np.ndarray]],
) -> bool:
    """True when the current most likely value of every state is already a
    maximally preferred one, i.e. no action can reduce expected cost."""
    for sid, factor in factors.items():
        o = observations.get(sid)
        belief = factor.prior
        if o is not None:
            belief = softmax(safe_log(belief) + safe_log(factor.likelihood).T @ np.asarray(o, float))
        current = int(np.argmax(belief))
        if factor.preferences[current] < factor.preferences.max() - 1e-12:
            return False
    return True


def run_active_inference(
    factors: Mapping[str, Factor],
    actions: Sequence[str],
    observations: Mapping[str, Optional[np.ndarray]],
    horizon: int = DEFAULT_HORIZON,
    idle_action: str = IDLE,
) -> InferenceOutcome:
    """One full action-selection round over all state factors.

    Builds one one-step policy per candidate action, evaluates per-policy
    beliefs, F and G independently per factor (summing F and G across
    factors), forms the policy posterior, Bayesian-averages the beliefs and
    picks the action.  When every preference is already satisfied the idle
    action is returned outright: the exact expected-free-energy score would
    otherwise favour stochastic self-transitions over doing nothing.
    """
    if not actions:
        raise NoPoliciesError("no candidate actions")
    policies = [(a,) for a in actions]
    n = len(policies)
    f_total = np.zeros(n)
    g_total = np.zeros(n)
    per_policy: dict[str, list[list[np.ndarray]]] = {}

    for sid, factor in factors.items():
        o1 = observations.get(sid)
        obs = [o1] + [None] * (horizon - 1)
        per_policy[sid] = []
        for p, (action,) in enumerate(policies):
            bs = [factor.transition(action)] * (horizon - 1)
            beliefs = update_posterior_states(bs, factor.likelihood, factor.prior, obs, horizon)
            f_total[p] += variational_free_energy(beliefs, bs, factor.likelihood, factor.prior, obs)
            g_total[p] += expected_free_energy(beliefs, factor.likelihood, factor.preferences)
            per_policy[sid].append(beliefs)

    pi = policy_posterior(f_total, g_total)
    averaged = {
        sid: [bayesian_model_average(pi, [per_policy[sid][p][t] for p in range(n)])
              for t in range(horizon)]
        for sid in factors
    }
    if preferences_satisfied(factors, observations):
        chosen = idle_action
    else:
        chosen = select_action(pi, policies)
    return InferenceOutcome(
        policies=policies,
        policy_probs=pi,
        free_energy=f_total,
        expected_free_energy=g_total,
        per_policy_beliefs=per_policy,
        averaged_beliefs=averaged,
        chosen_action=chosen,
    )

"""Independent brute-force evaluator of the inference math.

Deliberately written without numpy (pure python lists + math) and without
importing anything from the package under test, so agreement between the two
implementations is meaningful.  Follows the same pinned numerics: log clamp
1e-16, sweep tolerance 1e-6, at most 10 sweeps, horizon 2, softmax(-G - F).
"""

import math

EPS = 1e-16
SWEEP_TOL = 1e-6
MAX_SWEEPS = 10


def slog(x):
    return math.log(x if x > EPS else EPS)


def softmax(v):
    mx = max(v)
    exps = [math.exp(x - mx) for x in v]
    total = sum(exps)
    return [x / total for x in exps]


def matvec_log(mat, vec):
    """Rows of elementwise-log(mat) dotted with vec."""
    return [sum(slog(mat[i][j]) * vec[j] for j in range(len(vec)))
            for i in range(len(mat))]


def matvec_log_t(mat, vec):
    """Columns of elementwise-log(mat) dotted with vec (transpose product)."""
    n = len(mat)
    return [sum(slog(mat[j][i]) * vec[j] for j in range(n)) for i in range(n)]


def posterior_states(transitions, likelihood, prior, observations, horizon=2):
    """Forward-backward sweep for one policy, mirroring the pinned schedule."""
    m = len(prior)
    obs = list(observations) + [None] * (horizon - len(observations))
    beliefs = [[1.0 / m] * m for _ in range(horizon)]
    for _ in range(MAX_SWEEPS):
        delta = 0.0
        for t in range(horizon):
            if t == 0:
                v = [slog(prior[i]) for i in range(m)]
            else:
                v = matvec_log(transitions[t - 1], beliefs[t - 1])
            if t < horizon - 1:
                back = matvec_log_t(transitions[t], beliefs[t + 1])
                v = [v[i] + back[i] for i in range(m)]
            if obs[t] is not None:
                ev = matvec_log_t(likelihood, obs[t])
                v = [v[i] + ev[i] for i in range(m)]
            new = softmax(v)
            delta = max(delta, max(abs(new[i] - beliefs[t][i]) for i in range(m)))
            beliefs[t] = new
        if delta < SWEEP_TOL:
            break
    return beliefs


def free_energy(beliefs, transitions, likelihood, prior, observations):
    horizon = len(beliefs)
    m = len(prior)
    obs = list(observations) + [None] * (horizon - len(observations))
    total = 0.0
    for t in range(horizon):
        s = beliefs[t]
        if t == 0:
            base = [slog(prior[i]) for i in range(m)]
        else:
            base = matvec_log(transitions[t - 1], beliefs[t - 1])
        for i in range(m):
            term = slog(s[i]) - base[i]
            if obs[t] is not None:
                term -= sum(slog(likelihood[j][i]) * obs[t][j] for j in range(m))
            total += s[i] * term
    return total


def expected_free_energy(beliefs, likelihood, preferences, current_step=1):
    m = len(preferences)
    total = 0.0
    for t in range(current_step, len(beliefs)):
        s = beliefs[t]
        o = [sum(likelihood[i][j] * s[j] for j in range(m)) for i in range(m)]
        total += sum(o[i] * (slog(o[i]) - preferences[i]) for i in range(m))
        total += sum(
            s[j] * sum(likelihood[i][j] * slog(likelihood[i][j]) for i in range(m))
            for j in range(m))
    return total


def identity(m):
    return [[1.0 if i == j else 0.0 for j in range(m)] for i in range(m)]


def evaluate_model(factors, actions, observations, horizon=2):
    """Full selection round over a factorized model.

    ``factors``: state id -> dict with keys a (likelihood rows), b (action
    name -> transition rows, optional per action), d (prior), c (preferences).
    ``observations``: state id -> one-hot list or None.
    Returns (F per policy, G per policy, policy posterior, averaged beliefs).
    """
    n = len(actions)
    F = [0.0] * n
    G = [0.0] * n
    per_policy = {sid: [] for sid in factors}
    for p, action in enumerate(actions):
        for sid, fac in factors.items():
            m = len(fac["d"])
            b = fac.get("b", {}).get(action) or identity(m)
            bs = [b] * (horizon - 1)
            obs = [observations.get(sid)]
            beliefs = posterior_states(bs, fac["a"], fac["d"], obs, horizon)
            F[p] += free_energy(beliefs, bs, fac["a"], fac["d"], obs)
            G[p] += expected_free_energy(beliefs, fac["a"], fac["c"])
            per_policy[sid].append(beliefs)
    pi = softmax([-G[p] - F[p] for p in range(n)])
    averaged = {}
    for sid, fac in factors.items():
        m = len(fac["d"])
        averaged[sid] = [
            [sum(pi[p] * per_policy[sid][p][t][i] for p in range(n))
             for i in range(m)]
            for t in range(horizon)
        ]
    return F, G, pi, averaged

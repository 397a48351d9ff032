"""Exact optimal online policy for finite discrete instances.

Backward induction on Phi_{t-1}(x) = E[max(Phi_t(x), Phi_t(X_t) - f x)],
with Phi_n(x) = x.  States are the union of member supports plus 0: the
recurrence only ever visits held values from that set.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .distributions import Instance, is_discrete, support_points

__all__ = [
    "ValueTable",
    "solve_bellman",
    "optimal_value",
    "act",
    "brute_force_value",
    "exact_markov_value",
]


@dataclass
class ValueTable:
    instance: Instance
    f: float
    states: np.ndarray  # sorted, states[0] == 0
    values: np.ndarray  # (n+1, n_states); values[t] = Phi_t on states

    def state_index(self, x: float) -> int:
        i = int(np.searchsorted(self.states, x))
        if i >= len(self.states) or abs(self.states[i] - x) > 1e-9 * max(1.0, abs(x)):
            raise KeyError(f"unknown state {x}")
        return i


def _member_support(inst: Instance) -> list[tuple[np.ndarray, np.ndarray]]:
    out = []
    for d in inst.dists:
        if not is_discrete(d):
            raise ValueError(f"{d!r} is not discrete; discretize the instance first")
        vals, probs = support_points(d)
        out.append((np.asarray(vals), np.asarray(probs)))
    return out


def solve_bellman(inst: Instance, f: float) -> ValueTable:
    """Exact value grid over t = 0..n and all reachable held states."""
    members = _member_support(inst)
    states = np.asarray(sorted({0.0} | {v for vals, _ in members for v in vals}))
    n = inst.n
    values = np.empty((n + 1, len(states)))
    values[n] = states
    for t in range(n, 0, -1):
        vals, probs = members[t - 1]
        idx = np.searchsorted(states, vals)
        accept = values[t][idx]  # Phi_t(X_t) per support value
        keep = values[t]
        # E over X_t of max(keep, accept - f*state)
        values[t - 1] = (probs[:, None] * np.maximum(keep[None, :], accept[:, None] - f * states[None, :])).sum(axis=0)
    return ValueTable(inst, f, states, values)


def optimal_value(inst: Instance, f: float) -> float:
    """Expected net reward of the optimal online policy, Phi_0(0)."""
    return float(solve_bellman(inst, f).values[0, 0])


def act(table: ValueTable, t: int, held: float, observed: float) -> bool:
    """Accept iff Phi_t(observed) - f*held > Phi_t(held); ties skip."""
    if not 1 <= t <= table.instance.n:
        raise ValueError(f"stage t must be in [1, n], got {t}")
    hi = table.state_index(held)
    oi = table.state_index(observed)
    return table.values[t, oi] - table.f * held > table.values[t, hi]


def brute_force_value(inst: Instance, f: float, policy_fn, cap: int = 10**6) -> float:
    """Exact expected net reward of a deterministic policy by enumerating all
    realization tuples.

    policy_fn(t, held, observed) -> bool, with t 1-based.
    """
    members = _member_support(inst)
    size = 1
    for vals, _ in members:
        size *= len(vals)
        if size > cap:
            raise ValueError(f"realization space exceeds cap {cap}")
    total = 0.0
    for combo in itertools.product(*(range(len(vals)) for vals, _ in members)):
        p = 1.0
        held = 0.0
        cost = 0.0
        for t, ci in enumerate(combo, start=1):
            vals, probs = members[t - 1]
            p *= probs[ci]
            obs = vals[ci]
            if obs > 0.0 and policy_fn(t, held, obs):
                cost += f * held
                held = obs
        total += p * (held - cost)
    return total


def exact_markov_value(inst: Instance, f: float, policy_fn) -> float:
    """Exact expected net reward of a Markov policy (decision depends only on
    (t, held, observed)) by propagating the held-state distribution.

    Equivalent to full enumeration but linear in the number of stages.
    """
    members = _member_support(inst)
    states = sorted({0.0} | {v for vals, _ in members for v in vals})
    s_idx = {v: i for i, v in enumerate(states)}
    # weight[i] = P(holding states[i]); track expected accumulated cost jointly
    weight = np.zeros(len(states))
    cost = np.zeros(len(states))
    weight[0] = 1.0
    for t in range(1, inst.n + 1):
        vals, probs = members[t - 1]
        new_w = np.zeros_like(weight)
        new_c = np.zeros_like(cost)
        for i, held in enumerate(states):
            if weight[i] == 0.0:
                continue
            for obs, p in zip(vals, probs):
                if obs > 0.0 and policy_fn(t, held, obs):
                    j = s_idx[obs]
                    new_w[j] += weight[i] * p
                    new_c[j] += (cost[i] + weight[i] * f * held) * p
                else:
                    new_w[i] += weight[i] * p
                    new_c[i] += cost[i] * p
        weight, cost = new_w, new_c
    return float(np.dot(weight, states) - cost.sum())

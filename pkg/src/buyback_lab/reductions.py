"""Instance transformations: discretize to a geometric grid, split discrete
members into two-point blocks, reorder two-point members ascending.

Each step can only make an instance (weakly) harder for the online player
while keeping the offline benchmark essentially unchanged.
"""
from __future__ import annotations

import math

from .distributions import (
    DiscreteFinite,
    Instance,
    PointMass,
    ScaledBernoulli,
    cdf,
    expected_max,
    is_discrete,
    max_expected_excess,
    support_points,
)

__all__ = ["discretize", "split_to_bernoulli", "monotonize"]


def discretize(inst: Instance, delta: float = 0.01) -> Instance:
    """Round every member up to the grid {delta*(1+delta)^k * M}, capping the
    tail where E[(X_max - M')_+] <= delta*M.
    """
    if not 0.0 < delta < 0.5:
        raise ValueError(f"delta must be in (0, 0.5), got {delta}")
    m = expected_max(inst)
    if m <= 0.0:
        raise ValueError("expected maximum must be positive")
    # smallest cap with E[(X_max - v)_+] <= delta*M
    lo, hi = 0.0, m
    while max_expected_excess(inst, hi) > delta * m:
        hi *= 2.0
        if hi > 1e18:
            raise ValueError("tail cap search failed")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if max_expected_excess(inst, mid) <= delta * m:
            hi = mid
        else:
            lo = mid
        if hi - lo <= delta * m * 1e-3:
            break
    m_cap = hi
    k_top = max(0, math.ceil(math.log(max(m_cap / (delta * m), 1.0), 1.0 + delta)))
    grid = [delta * (1.0 + delta) ** k * m for k in range(k_top + 1)]

    members = []
    for d in inst.dists:
        probs = []
        prev = -math.inf
        for v in grid:
            probs.append(max(cdf(d, min(v, m_cap) if v >= grid[-1] else v) - (cdf(d, prev) if prev >= 0 else 0.0), 0.0))
            prev = v
        # everything above the second-to-last grid point lands on the top one
        probs[-1] = max(1.0 - (cdf(d, grid[-2]) if len(grid) > 1 else 0.0), 0.0)
        support, mass = [], []
        for v, p in zip(grid, probs):
            if p > 0.0:
                support.append(v)
                mass.append(p)
        total = sum(mass)
        mass = [p / total for p in mass]
        if len(support) == 1:
            members.append(PointMass(support[0]))
        else:
            members.append(DiscreteFinite(tuple(support), tuple(mass)))
    return Instance(tuple(members))


def split_to_bernoulli(inst: Instance) -> Instance:
    """Split each discrete member with positive supports v1 < ... < vk into k
    consecutive two-point variables so the block maximum is distributed as
    the original member.
    """
    members = []
    for d in inst.dists:
        if not is_discrete(d):
            raise ValueError(f"{d!r} is not discrete; discretize first")
        vals, probs = support_points(d)
        cum = 0.0
        block = []
        for v, p in zip(vals, probs):
            cum += p
            if v <= 0.0:
                continue
            if cum <= 0.0:
                raise ValueError(f"degenerate member: P[X <= {v}] = 0")
            block.append(ScaledBernoulli(v, p / cum))
        if not block:
            raise ValueError(f"member {d!r} is identically zero")
        members.extend(block)
    return Instance(tuple(members))


def monotonize(inst: Instance) -> Instance:
    """Stable-sort two-point members ascending by value."""
    for d in inst.dists:
        if not isinstance(d, ScaledBernoulli):
            raise ValueError("monotonize expects an all-two-point instance")
    return Instance(tuple(sorted(inst.dists, key=lambda d: d.v)))

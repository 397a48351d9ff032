"""Named instance generators: hard/worst-case families and the random
families used by the experiment harness.
"""
from __future__ import annotations

import math

import numpy as np

from .distributions import (
    Gpd,
    Instance,
    JitteredBernoulli,
    PointMass,
    ScaledBernoulli,
    lower_bound,
    upper_bound,
)
from .phi import PhiTables

__all__ = [
    "two_var_hard",
    "three_var_hard",
    "indifference_instance",
    "jittered_indifference_instance",
    "multistage_instance",
    "random_gpd_instance",
    "bounded_instance",
]


def two_var_hard(f: float) -> Instance:
    """X1 = 1 deterministic, X2 = (1+f) w.p. 1/(1+f)."""
    if f <= 0:
        raise ValueError(f"need f > 0, got {f}")
    return Instance((PointMass(1.0), ScaledBernoulli(1.0 + f, 1.0 / (1.0 + f))))


def three_var_hard(f: float) -> Instance:
    """Three-variable indifference construction, valid for 0 < f < 1."""
    if not 0.0 < f < 1.0:
        raise ValueError(f"three-variable construction needs 0 < f < 1, got {f}")
    x = (f + 2.0 + math.sqrt(f * (2.0 - f))) / 2.0
    p3 = (x - 1.0 - f) / ((1.0 + f) * (x - 1.0))
    return Instance(
        (
            PointMass(1.0),
            ScaledBernoulli(x, 1.0 / x),
            ScaledBernoulli(x * (1.0 + f), p3),
        )
    )


def _indifference_values(tables: PhiTables) -> tuple[list[float], list[float]]:
    ks = tables.orbit()
    n = len(ks) - 1
    if n < 2:
        raise ValueError("degenerate orbit")
    k1 = ks[1]
    ps, xs = [], []
    x = 1.0
    for i in range(1, n + 1):
        ps.append((ks[i] - ks[i - 1]) / ks[i])
        if i >= 2:
            x *= ks[i] / (ks[i] - k1)
        xs.append(x)
    return xs, ps


def indifference_instance(tables: PhiTables) -> Instance:
    """Worst-case two-point instance built from the orbit of 0: the i-th
    variable is the maximum with probability k_i - k_{i-1}, and values make
    the optimal policy indifferent at every step.
    """
    xs, ps = _indifference_values(tables)
    members = []
    for x, p in zip(xs, ps):
        members.append(PointMass(x) if p >= 1.0 else ScaledBernoulli(x, p))
    return Instance(tuple(members))


def jittered_indifference_instance(tables: PhiTables, jitter: float = 1e-6) -> Instance:
    """Same construction with each atom smeared uniformly by +-jitter, giving
    continuous positive values for the order-agnostic policy.
    """
    xs, ps = _indifference_values(tables)
    return Instance(tuple(JitteredBernoulli(x, p, jitter * x) for x, p in zip(xs, ps)))


def multistage_instance(f: float) -> Instance:
    """Chain of n = ceil(log2(1/f)) fair two-point variables with values
    shrinking so every swap decision is indifferent.
    """
    if not 0.0 < f < 0.25:
        raise ValueError(f"multistage construction needs 0 < f < 1/4, got {f}")
    n = math.ceil(math.log2(1.0 / f))
    cf = f / (1.0 + f)
    a = [1.0]
    for k in range(0, n - 1):
        nxt = (1.0 - cf * 2.0**k) * a[-1]
        if nxt <= 0.0:
            raise ValueError("multistage values became nonpositive")
        a.append(nxt)
    a.reverse()
    return Instance(tuple(ScaledBernoulli(v, 0.5) for v in a))


def random_gpd_instance(rng: np.random.Generator, n: int = 7) -> Instance:
    """n independent GPD members with mu ~ U(0,16), sigma ~ U(0,4),
    shape ~ U(-1, 0.5)."""
    members = []
    for _ in range(n):
        mu = float(rng.uniform(0.0, 16.0))
        sigma = float(rng.uniform(0.0, 4.0))
        xi = float(rng.uniform(-1.0, 0.5))
        members.append(Gpd(mu, max(sigma, 1e-12), xi))
    return Instance(tuple(members))


def bounded_instance(rng: np.random.Generator, alpha: float, f: float) -> Instance:
    """Random discrete instance whose maximum lies in [alpha, (1+f)*alpha):
    one member is pinned at alpha and the rest are two-point draws below
    (1+f)*alpha.
    """
    if alpha <= 0 or f <= 0:
        raise ValueError("need alpha > 0 and f > 0")
    hi = (1.0 + f) * alpha
    for _ in range(100):
        k = int(rng.integers(3, 6))
        members: list = [PointMass(alpha)]
        for _ in range(k - 1):
            v = float(rng.uniform(alpha, hi * (1.0 - 1e-12)))
            q = float(rng.uniform(0.1, 0.9))
            members.append(ScaledBernoulli(v, q))
        order = rng.permutation(k)
        inst = Instance(tuple(members[i] for i in order))
        lo_max = max(lower_bound(d) for d in inst.dists)
        hi_max = max(upper_bound(d) for d in inst.dists)
        if lo_max >= alpha and hi_max < hi:
            return inst
    raise RuntimeError("bounded instance construction failed validation")

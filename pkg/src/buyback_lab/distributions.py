"""Value distributions, instances, and the distribution of the running maximum.

All distributions are immutable; samplers take an externally owned numpy
Generator so callers control reproducibility and parallelism.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

__all__ = [
    "ScaledBernoulli",
    "DiscreteFinite",
    "Gpd",
    "PointMass",
    "JitteredBernoulli",
    "Distribution",
    "Instance",
    "cdf",
    "cdf_left",
    "cdf_fn",
    "quantile",
    "quantile_fn",
    "sample",
    "sample_many",
    "mean",
    "upper_bound",
    "lower_bound",
    "is_discrete",
    "support_points",
    "max_cdf",
    "max_cdf_left",
    "max_quantile",
    "expected_max",
    "max_expected_excess",
    "max_ess_inf",
    "instance_to_json",
    "instance_from_json",
]

_PROB_TOL = 1e-12


@dataclass(frozen=True)
class ScaledBernoulli:
    """Two-point variable: value `v` with probability `q`, else 0."""

    v: float
    q: float

    def __post_init__(self):
        if self.v < 0:
            raise ValueError(f"value must be nonnegative, got {self.v}")
        if not 0.0 <= self.q <= 1.0:
            raise ValueError(f"probability must be in [0,1], got {self.q}")


@dataclass(frozen=True)
class DiscreteFinite:
    """Finite-support distribution; support strictly increasing, probs sum to 1."""

    support: tuple[float, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        sup = tuple(float(x) for x in self.support)
        pr = tuple(float(p) for p in self.probs)
        object.__setattr__(self, "support", sup)
        object.__setattr__(self, "probs", pr)
        if len(sup) != len(pr) or not sup:
            raise ValueError("support and probs must be equal-length and nonempty")
        if any(b <= a for a, b in zip(sup, sup[1:])):
            raise ValueError("support must be strictly increasing")
        if sup[0] < 0:
            raise ValueError("support must be nonnegative")
        if any(p < 0 for p in pr):
            raise ValueError("probs must be nonnegative")
        if abs(sum(pr) - 1.0) > _PROB_TOL:
            raise ValueError(f"probs must sum to 1, got {sum(pr)}")


@dataclass(frozen=True)
class Gpd:
    """Generalized Pareto with location mu, scale sigma > 0, shape xi.

    xi = 0 is treated as the exponential limit.  xi < 0 gives bounded
    support [mu, mu - sigma/xi].
    """

    mu: float
    sigma: float
    xi: float

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError(f"scale must be positive, got {self.sigma}")


@dataclass(frozen=True)
class PointMass:
    v: float

    def __post_init__(self):
        if self.v < 0:
            raise ValueError(f"value must be nonnegative, got {self.v}")


@dataclass(frozen=True)
class JitteredBernoulli:
    """Atomless variant of ScaledBernoulli: Uniform(v-jitter, v+jitter) w.p. q, else 0.

    Used when a policy requires continuous positive values but the target
    instance is two-point shaped.
    """

    v: float
    q: float
    jitter: float

    def __post_init__(self):
        if self.jitter <= 0 or self.v - self.jitter < 0:
            raise ValueError("need 0 < jitter <= v")
        if not 0.0 <= self.q <= 1.0:
            raise ValueError(f"probability must be in [0,1], got {self.q}")


Distribution = ScaledBernoulli | DiscreteFinite | Gpd | PointMass | JitteredBernoulli


@dataclass(frozen=True)
class Instance:
    """Ordered sequence of independent value distributions (arrival order)."""

    dists: tuple[Distribution, ...]

    def __post_init__(self):
        object.__setattr__(self, "dists", tuple(self.dists))
        if not self.dists:
            raise ValueError("instance needs at least one distribution")

    @property
    def n(self) -> int:
        return len(self.dists)


# ---------------------------------------------------------------------------
# pointwise CDF / quantile / sampling


def cdf(d: Distribution, x: float) -> float:
    """P[X <= x]; right-continuous."""
    if isinstance(d, ScaledBernoulli):
        if x < 0:
            return 0.0
        return 1.0 if x >= d.v else 1.0 - d.q
    if isinstance(d, PointMass):
        return 1.0 if x >= d.v else 0.0
    if isinstance(d, DiscreteFinite):
        total = 0.0
        for s, p in zip(d.support, d.probs):
            if s > x:
                break
            total += p
        return min(total, 1.0)
    if isinstance(d, JitteredBernoulli):
        if x < 0:
            return 0.0
        lo, hi = d.v - d.jitter, d.v + d.jitter
        if x >= hi:
            return 1.0
        if x <= lo:
            return 1.0 - d.q
        return 1.0 - d.q + d.q * (x - lo) / (hi - lo)
    if isinstance(d, Gpd):
        if x <= d.mu:
            return 0.0
        z = (x - d.mu) / d.sigma
        if d.xi == 0.0:
            return 1.0 - math.exp(-z)
        arg = 1.0 + d.xi * z
        if arg <= 0.0:
            # only reachable for xi < 0 beyond the upper endpoint
            return 1.0
        return 1.0 - arg ** (-1.0 / d.xi)
    raise TypeError(f"unknown distribution {d!r}")


def cdf_left(d: Distribution, x: float) -> float:
    """P[X < x]; left limit of the CDF."""
    if isinstance(d, ScaledBernoulli):
        if x <= 0:
            return 0.0
        return 1.0 if x > d.v else 1.0 - d.q
    if isinstance(d, PointMass):
        return 1.0 if x > d.v else 0.0
    if isinstance(d, DiscreteFinite):
        total = 0.0
        for s, p in zip(d.support, d.probs):
            if s >= x:
                break
            total += p
        return min(total, 1.0)
    if isinstance(d, (JitteredBernoulli, Gpd)):
        # atomless above 0; JitteredBernoulli's only atom is at 0
        if x <= 0:
            return 0.0
        return cdf(d, x)
    raise TypeError(f"unknown distribution {d!r}")


def quantile(d: Distribution, p: float) -> float:
    """Generalized inverse inf{x : F(x) >= p}; requires p in (0, 1]."""
    if not 0.0 < p <= 1.0:
        raise ValueError(f"quantile requires p in (0,1], got {p}")
    if isinstance(d, ScaledBernoulli):
        return 0.0 if p <= 1.0 - d.q else d.v
    if isinstance(d, PointMass):
        return d.v
    if isinstance(d, DiscreteFinite):
        total = 0.0
        for s, pr in zip(d.support, d.probs):
            total += pr
            if total >= p - _PROB_TOL:
                return s
        return d.support[-1]
    if isinstance(d, JitteredBernoulli):
        if p <= 1.0 - d.q:
            return 0.0
        return d.v - d.jitter + 2.0 * d.jitter * (p - (1.0 - d.q)) / d.q
    if isinstance(d, Gpd):
        if p == 1.0:
            if d.xi < 0:
                return d.mu - d.sigma / d.xi
            return math.inf
        if d.xi == 0.0:
            return d.mu - d.sigma * math.log1p(-p)
        return d.mu + d.sigma * ((1.0 - p) ** (-d.xi) - 1.0) / d.xi
    raise TypeError(f"unknown distribution {d!r}")


def sample(d: Distribution, rng: np.random.Generator) -> float:
    """One inverse-transform draw."""
    return quantile(d, 1.0 - float(rng.random()))


def sample_many(d: Distribution, rng: np.random.Generator, size: int) -> np.ndarray:
    """Vectorized inverse-transform draws (same stream layout as repeated sample())."""
    u = 1.0 - rng.random(size)
    if isinstance(d, ScaledBernoulli):
        return np.where(u <= 1.0 - d.q, 0.0, d.v)
    if isinstance(d, PointMass):
        return np.full(size, d.v)
    if isinstance(d, DiscreteFinite):
        cum = np.cumsum(d.probs)
        idx = np.searchsorted(cum, u - _PROB_TOL, side="left")
        idx = np.minimum(idx, len(d.support) - 1)
        return np.asarray(d.support)[idx]
    if isinstance(d, JitteredBernoulli):
        lo = d.v - d.jitter
        vals = lo + 2.0 * d.jitter * (u - (1.0 - d.q)) / d.q
        return np.where(u <= 1.0 - d.q, 0.0, vals)
    if isinstance(d, Gpd):
        if d.xi == 0.0:
            return d.mu - d.sigma * np.log1p(-u)
        return d.mu + d.sigma * ((1.0 - u) ** (-d.xi) - 1.0) / d.xi
    raise TypeError(f"unknown distribution {d!r}")


def cdf_fn(d: Distribution):
    """Specialized scalar CDF closure for hot loops."""
    if isinstance(d, ScaledBernoulli):
        v, base = d.v, 1.0 - d.q
        return lambda x: 0.0 if x < 0.0 else (1.0 if x >= v else base)
    if isinstance(d, PointMass):
        v = d.v
        return lambda x: 1.0 if x >= v else 0.0
    if isinstance(d, JitteredBernoulli):
        lo, hi, q = d.v - d.jitter, d.v + d.jitter, d.q
        base, slope = 1.0 - d.q, d.q / (2.0 * d.jitter)

        def _cdf_j(x, lo=lo, hi=hi, base=base, slope=slope):
            if x < 0.0:
                return 0.0
            if x >= hi:
                return 1.0
            if x <= lo:
                return base
            return base + slope * (x - lo)

        return _cdf_j
    if isinstance(d, Gpd):
        mu, sigma, xi = d.mu, d.sigma, d.xi
        if xi == 0.0:

            def _cdf_e(x, mu=mu, sigma=sigma):
                return 0.0 if x <= mu else 1.0 - math.exp(-(x - mu) / sigma)

            return _cdf_e

        def _cdf_g(x, mu=mu, sigma=sigma, xi=xi, e=-1.0 / xi):
            if x <= mu:
                return 0.0
            arg = 1.0 + xi * (x - mu) / sigma
            if arg <= 0.0:
                return 1.0
            return 1.0 - arg**e

        return _cdf_g
    return lambda x, d=d: cdf(d, x)


def quantile_fn(d: Distribution):
    """Specialized scalar quantile closure for hot loops (p in (0, 1])."""
    if isinstance(d, ScaledBernoulli):
        v, base = d.v, 1.0 - d.q
        return lambda p: 0.0 if p <= base else v
    if isinstance(d, PointMass):
        v = d.v
        return lambda p: v
    if isinstance(d, JitteredBernoulli):
        lo, q, base, w = d.v - d.jitter, d.q, 1.0 - d.q, 2.0 * d.jitter
        return lambda p: 0.0 if p <= base else lo + w * (p - base) / q
    if isinstance(d, Gpd):
        mu, sigma, xi = d.mu, d.sigma, d.xi
        if xi == 0.0:
            return lambda p: mu - sigma * math.log1p(-p) if p < 1.0 else math.inf
        if xi < 0.0:
            top = mu - sigma / xi
            return lambda p: mu + sigma * ((1.0 - p) ** (-xi) - 1.0) / xi if p < 1.0 else top
        return lambda p: mu + sigma * ((1.0 - p) ** (-xi) - 1.0) / xi if p < 1.0 else math.inf
    return lambda p, d=d: quantile(d, p)


def mean(d: Distribution) -> float:
    if isinstance(d, ScaledBernoulli):
        return d.v * d.q
    if isinstance(d, PointMass):
        return d.v
    if isinstance(d, DiscreteFinite):
        return float(np.dot(d.support, d.probs))
    if isinstance(d, JitteredBernoulli):
        return d.v * d.q
    if isinstance(d, Gpd):
        if d.xi >= 1.0:
            raise ValueError("GPD with shape >= 1 has infinite mean")
        return d.mu + d.sigma / (1.0 - d.xi)
    raise TypeError(f"unknown distribution {d!r}")


def upper_bound(d: Distribution) -> float:
    """Essential supremum (inf for unbounded)."""
    if isinstance(d, ScaledBernoulli):
        return d.v if d.q > 0 else 0.0
    if isinstance(d, PointMass):
        return d.v
    if isinstance(d, DiscreteFinite):
        for s, p in zip(reversed(d.support), reversed(d.probs)):
            if p > 0:
                return s
        return 0.0
    if isinstance(d, JitteredBernoulli):
        return d.v + d.jitter if d.q > 0 else 0.0
    if isinstance(d, Gpd):
        return d.mu - d.sigma / d.xi if d.xi < 0 else math.inf
    raise TypeError(f"unknown distribution {d!r}")


def lower_bound(d: Distribution) -> float:
    """Essential infimum (smallest value taken with positive probability)."""
    if isinstance(d, (ScaledBernoulli, JitteredBernoulli)):
        return 0.0 if d.q < 1.0 else (d.v - d.jitter if isinstance(d, JitteredBernoulli) else d.v)
    if isinstance(d, PointMass):
        return d.v
    if isinstance(d, DiscreteFinite):
        for s, p in zip(d.support, d.probs):
            if p > 0:
                return s
        return 0.0
    if isinstance(d, Gpd):
        return d.mu
    raise TypeError(f"unknown distribution {d!r}")


def is_discrete(d: Distribution) -> bool:
    return isinstance(d, (ScaledBernoulli, DiscreteFinite, PointMass))


def support_points(d: Distribution) -> tuple[tuple[float, ...], tuple[float, ...]]:
    """(values, probs) of a discrete distribution, zero atom included."""
    if isinstance(d, ScaledBernoulli):
        if d.q >= 1.0:
            return (d.v,), (1.0,)
        if d.q <= 0.0:
            return (0.0,), (1.0,)
        return (0.0, d.v), (1.0 - d.q, d.q)
    if isinstance(d, PointMass):
        return (d.v,), (1.0,)
    if isinstance(d, DiscreteFinite):
        return d.support, d.probs
    raise TypeError(f"{d!r} is not discrete")


# ---------------------------------------------------------------------------
# running maximum


def max_cdf(inst: Instance, x: float) -> float:
    """CDF of max_i X_i: product of member CDFs."""
    out = 1.0
    for d in inst.dists:
        out *= cdf(d, x)
        if out == 0.0:
            return 0.0
    return out


def max_cdf_left(inst: Instance, x: float) -> float:
    out = 1.0
    for d in inst.dists:
        out *= cdf_left(d, x)
        if out == 0.0:
            return 0.0
    return out


def max_ess_inf(inst: Instance) -> float:
    """Smallest possible value of the maximum."""
    return max(lower_bound(d) for d in inst.dists)


def max_quantile(inst: Instance, p: float) -> float:
    """Generalized inverse of max_cdf, inf{x : F_max(x) >= p}."""
    if not 0.0 < p <= 1.0:
        raise ValueError(f"quantile requires p in (0,1], got {p}")
    if all(is_discrete(d) for d in inst.dists):
        vals = sorted({v for d in inst.dists for v in support_points(d)[0]})
        for v in vals:
            if max_cdf(inst, v) >= p - _PROB_TOL:
                return v
        return vals[-1]
    hi = max(upper_bound(d) for d in inst.dists)
    if math.isinf(hi):
        hi = max(quantile(d, min(p, 1.0 - 1e-15)) for d in inst.dists)
        while max_cdf(inst, hi) < p:
            hi *= 2.0
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if max_cdf(inst, mid) >= p:
            hi = mid
        else:
            lo = mid
    return hi


def _max_support(inst: Instance) -> tuple[np.ndarray, np.ndarray]:
    """Exact distribution of the maximum of an all-discrete instance."""
    vals = sorted({v for d in inst.dists for v in support_points(d)[0]})
    vals = np.asarray(vals)
    cdf_vals = np.array([max_cdf(inst, v) for v in vals])
    probs = np.diff(cdf_vals, prepend=0.0)
    keep = probs > 0
    return vals[keep], probs[keep]


def expected_max(inst: Instance, method: str = "auto") -> float:
    """E[max_i X_i]; exact for all-discrete instances, quadrature otherwise."""
    for d in inst.dists:
        if isinstance(d, Gpd) and d.xi >= 1.0:
            raise ValueError("expected_max diverges: GPD member has shape >= 1")
    discrete = all(is_discrete(d) for d in inst.dists)
    if method == "exact" or (method == "auto" and discrete):
        if not discrete:
            raise ValueError("exact expected_max needs an all-discrete instance")
        vals, probs = _max_support(inst)
        return float(np.dot(vals, probs))
    # integrate P[max > x] over [0, upper)
    bounds = [upper_bound(d) for d in inst.dists]
    if any(math.isinf(b) for b in bounds):
        upper = max(quantile(d, 1.0 - 1e-12) for d in inst.dists)
    else:
        upper = max(bounds)
    if upper <= 0.0:
        return 0.0
    breaks = sorted(
        {b for d in inst.dists for b in (lower_bound(d), upper_bound(d)) if 0.0 < b < upper}
    )
    if discrete:
        breaks = sorted({v for d in inst.dists for v in support_points(d)[0] if 0.0 < v < upper})
    total, _ = quad(
        lambda x: 1.0 - max_cdf(inst, x),
        0.0,
        upper,
        points=breaks if breaks else None,
        limit=200 + 10 * len(breaks),
        epsrel=1e-10,
        epsabs=1e-12,
    )
    return float(total)


def max_expected_excess(inst: Instance, t: float) -> float:
    """E[(max_i X_i - t)_+]."""
    if all(is_discrete(d) for d in inst.dists):
        vals, probs = _max_support(inst)
        return float(np.dot(np.maximum(vals - t, 0.0), probs))
    bounds = [upper_bound(d) for d in inst.dists]
    if any(math.isinf(b) for b in bounds):
        upper = max(quantile(d, 1.0 - 1e-12) for d in inst.dists)
    else:
        upper = max(bounds)
    if upper <= t:
        return 0.0
    out, _ = quad(lambda x: 1.0 - max_cdf(inst, x), t, upper, limit=200, epsrel=1e-10, epsabs=1e-13)
    return float(out)


# ---------------------------------------------------------------------------
# JSON wire format


def _dist_to_obj(d: Distribution) -> dict:
    if isinstance(d, ScaledBernoulli):
        return {"kind": "bernoulli", "v": d.v, "q": d.q}
    if isinstance(d, PointMass):
        return {"kind": "point", "v": d.v}
    if isinstance(d, DiscreteFinite):
        return {"kind": "discrete", "support": list(d.support), "probs": list(d.probs)}
    if isinstance(d, Gpd):
        return {"kind": "gpd", "mu": d.mu, "sigma": d.sigma, "xi": d.xi}
    if isinstance(d, JitteredBernoulli):
        return {"kind": "jitter-bernoulli", "v": d.v, "q": d.q, "jitter": d.jitter}
    raise TypeError(f"unknown distribution {d!r}")


def _dist_from_obj(obj: dict) -> Distribution:
    kind = obj["kind"]
    if kind == "bernoulli":
        return ScaledBernoulli(obj["v"], obj["q"])
    if kind == "point":
        return PointMass(obj["v"])
    if kind == "discrete":
        return DiscreteFinite(tuple(obj["support"]), tuple(obj["probs"]))
    if kind == "gpd":
        return Gpd(obj["mu"], obj["sigma"], obj["xi"])
    if kind == "jitter-bernoulli":
        return JitteredBernoulli(obj["v"], obj["q"], obj["jitter"])
    raise ValueError(f"unknown distribution kind {kind!r}")


def instance_to_json(inst: Instance) -> str:
    return json.dumps({"dists": [_dist_to_obj(d) for d in inst.dists]})


def instance_from_json(text: str) -> Instance:
    obj = json.loads(text)
    return Instance(tuple(_dist_from_obj(o) for o in obj["dists"]))

"""Online policies and the run engine with buyback accounting.

A policy is a per-run state machine: `start(rng)` resets it, then
`decide(t, held, observed, rng)` is called once per arrival with the
engine's actually-held value.  The engine charges f * held on every swap.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distributions import (
    Distribution,
    Gpd,
    Instance,
    JitteredBernoulli,
    cdf_fn,
    is_discrete,
    max_ess_inf,
    max_expected_excess,
    max_quantile,
    expected_max,
    mean as dist_mean,
    quantile_fn,
    upper_bound,
)
from .dp import ValueTable, act
from .phi import PhiTables

__all__ = [
    "Decision",
    "RunOutcome",
    "run_policy",
    "dp_policy",
    "order_agnostic_policy",
    "threshold_greedy_policy",
    "median_policy",
    "bhk_policy",
    "bhk_default_gamma",
    "bk_policy",
    "bk_default_rho",
    "bounded_threshold_policy",
    "two_var_optimal_value",
    "POLICY_NAMES",
]


@dataclass(frozen=True)
class Decision:
    accept: bool


@dataclass(frozen=True)
class RunOutcome:
    final_value: float
    buyback_cost: float
    net: float


def run_policy(policy, inst: Instance, realization, rng: np.random.Generator, f: float) -> RunOutcome:
    """Feed one realization through a policy with exact buyback accounting."""
    if len(realization) != inst.n:
        raise ValueError("realization length must match the instance")
    policy.start(rng)
    held = 0.0
    cost = 0.0
    for t, obs in enumerate(realization, start=1):
        obs = float(obs)
        if policy.decide(t, held, obs, rng):
            if obs <= 0.0:
                raise RuntimeError("policy accepted a zero value")
            cost += f * held
            held = obs
    out = RunOutcome(held, cost, held - cost)
    if policy.never_overpays and out.net < -1e-12:
        raise AssertionError(f"{policy.name} produced negative net {out.net}")
    return out


class _Policy:
    name = "policy"
    never_overpays = False

    def start(self, rng: np.random.Generator) -> None:  # pragma: no cover
        pass

    def decide(self, t: int, held: float, observed: float, rng: np.random.Generator) -> bool:
        raise NotImplementedError


class DpPolicy(_Policy):
    """Optimal policy read off a solved value table."""

    name = "dp"
    never_overpays = True

    def __init__(self, table: ValueTable):
        self.table = table
        self.f = table.f

    def decide(self, t, held, observed, rng):
        if observed <= 0.0:
            return False
        return act(self.table, t, held, observed)


def dp_policy(table: ValueTable) -> DpPolicy:
    return DpPolicy(table)


class OrderAgnosticPolicy(_Policy):
    """Randomized adaptive-threshold policy driven by the solved swap curve.

    Tracks the running peak; on each new peak it fills the value gap with a
    suffix-intensity PPP, walks flags upward while the peak clears the
    current threshold, and accepts the peak with the probability that makes
    the expected held value equal the last flagged one.  Thresholds live in
    quantile space of the maximum, so no CDF inversion is ever needed.
    """

    name = "oa"

    def __init__(self, tables: PhiTables, inst: Instance, boost: bool = False, tracer=None):
        for d in inst.dists:
            if is_discrete(d):
                raise ValueError("order-agnostic policy needs atomless positive values")
        self.tables = tables
        self.inst = inst
        self.boost = boost
        self.tracer = tracer
        self.f = tables.f
        self._cdfs = [cdf_fn(d) for d in inst.dists]
        self._quantiles = [quantile_fn(d) for d in inst.dists]
        self._n = inst.n

    def _fmax(self, x: float) -> float:
        out = 1.0
        for fc in self._cdfs:
            out *= fc(x)
            if out == 0.0:
                return 0.0
        return out

    def start(self, rng):
        self._tq = self.tables.sample_initial_threshold(rng)
        self._peak = 0.0
        self._zhat = 0.0

    def _sample_gap(self, i: int, lo: float, hi: float, floor_q: float, rng) -> list[float]:
        """Suffix-intensity PPP on (lo, hi]; generation stops once the union
        quantile falls below floor_q, where points can no longer matter."""
        pts = []
        u = rng.random
        for r in range(i - 1, self._n):
            b = self._cdfs[r](hi)
            if b <= 0.0:
                continue
            a = self._cdfs[r](lo)
            inv = self._quantiles[r]
            q = b
            while True:
                q *= u()
                if q <= a:
                    break
                x = inv(q)
                if x <= lo:
                    break
                if self._fmax(x) < floor_q:
                    break
                if x <= hi:
                    pts.append(x)
        pts.sort()
        return pts

    def decide(self, t, held, observed, rng):
        if observed <= self._peak:
            return False
        x = observed
        z = self._zhat
        qx = self._fmax(x)
        trace_floor = self.tracer.floor_q if self.tracer is not None else 1.0
        floor = min(self._tq, trace_floor)
        pts = self._sample_gap(t, self._peak, x, floor, rng) if (qx >= self._tq or self.tracer) else []
        self._peak = x

        flags = []
        ptr = 0
        while qx >= self._tq:
            cand = None
            while ptr < len(pts):
                if self._fmax(pts[ptr]) >= self._tq:
                    cand = pts[ptr]
                    break
                ptr += 1
            if cand is None:
                cand = x
            if cand == self._zhat:
                break  # quantile-1 degeneracy: nothing above the threshold advances
            self._zhat = cand
            flags.append(cand)
            self._tq = self.tables.tau(self._fmax(cand))

        if self.tracer is not None:
            self.tracer.record(self, pts, x, flags)

        if self._zhat <= z:
            return False
        p = (self._zhat - z) / (x - z)
        if self.boost and qx > self.tables.y1:
            p = 1.0
        return p >= 1.0 or float(rng.random()) < p


class FlagTracer:
    """Optional diagnostics: per-point sampled/flagged records in quantile
    space, and per-run final pretend-vs-held values."""

    def __init__(self, floor_q: float = 0.02):
        self.floor_q = floor_q
        self.sampled_q: list[float] = []
        self.flagged: list[bool] = []

    def record(self, policy, pts, peak, flags):
        flagged = set(flags)
        for x in list(pts) + [peak]:
            q = policy._fmax(x)
            if q >= self.floor_q:
                self.sampled_q.append(q)
                self.flagged.append(x in flagged)


def order_agnostic_policy(
    tables: PhiTables, inst: Instance, boost: bool = False, tracer: FlagTracer | None = None
) -> OrderAgnosticPolicy:
    return OrderAgnosticPolicy(tables, inst, boost, tracer)


class ThresholdGreedyPolicy(_Policy):
    """Accept the first value above the f/(1+2f)-quantile of the maximum,
    then swap whenever the margin is positive (obs > (1+f) * held)."""

    name = "tg"
    never_overpays = True

    def __init__(self, f: float, inst: Instance, variant: str = "quantile"):
        if f <= 0:
            raise ValueError("need f > 0")
        self.f = f
        if variant == "quantile":
            self.threshold = max_quantile(inst, f / (1.0 + 2.0 * f))
        elif variant == "case1":
            # conservative no-buyback alternative keyed off the median
            t_med = max_quantile(inst, 0.5)
            alpha = (t_med - (expected_max(inst) - max_expected_excess(inst, t_med))) / t_med
            beta = max_expected_excess(inst, t_med) / expected_max(inst)
            if alpha < (1.0 - 2.0 * beta) / (8.0 - 9.0 * beta):
                t_med = (1.0 - 3.0 * alpha) * t_med
            self.threshold = t_med
        else:
            raise ValueError(f"unknown variant {variant!r}")
        self._swap_factor = 1.0 + f if variant == "quantile" else math.inf

    def decide(self, t, held, observed, rng):
        if observed <= 0.0:
            return False
        if held == 0.0:
            return observed >= self.threshold
        return observed > self._swap_factor * held


def threshold_greedy_policy(f: float, inst: Instance, variant: str = "quantile") -> ThresholdGreedyPolicy:
    return ThresholdGreedyPolicy(f, inst, variant)


class MedianPolicy(_Policy):
    """Accept the first value at or above the median of the maximum; never
    buy back."""

    name = "median"
    never_overpays = True
    f = 0.0

    def __init__(self, inst: Instance):
        self.threshold = max_quantile(inst, 0.5)

    def decide(self, t, held, observed, rng):
        return held == 0.0 and observed >= self.threshold and observed > 0.0


def median_policy(inst: Instance) -> MedianPolicy:
    return MedianPolicy(inst)


def bhk_default_gamma(f: float) -> float:
    """Swap margin maximizing the worst ratio over geometric adversarial
    chains (the adversary either extends the chain or dangles one last value
    just below the next swap trigger)."""

    def worst_ratio(g: float) -> float:
        worst = 1.0
        chain = 0.0  # sum of discarded values relative to the final hold
        for ell in range(21):
            top = g**ell
            paid = f * chain
            worst = min(worst, (top - paid) / top, (top - paid) / (top * g))
            chain += top
        return worst

    lo, hi = (1.0 + f) * (1.0 + 1e-9), 4.0 * (1.0 + f)
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = worst_ratio(c), worst_ratio(d)
    for _ in range(80):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = worst_ratio(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = worst_ratio(d)
    return 0.5 * (a + b)


class BhkPolicy(_Policy):
    """Greedy with a multiplicative swap margin gamma > 1 + f; accepts the
    first positive value."""

    name = "bhk"
    never_overpays = True

    def __init__(self, f: float, gamma: float | None = None):
        if f <= 0:
            raise ValueError("need f > 0")
        gamma = bhk_default_gamma(f) if gamma is None else gamma
        if gamma <= 1.0 + f:
            raise ValueError(f"gamma must exceed 1 + f, got {gamma}")
        self.f = f
        self.gamma = gamma

    def decide(self, t, held, observed, rng):
        if observed <= 0.0:
            return False
        return held == 0.0 or observed > self.gamma * held


def bhk_policy(f: float, gamma: float | None = None) -> BhkPolicy:
    return BhkPolicy(f, gamma)


def bk_default_rho(f: float) -> float:
    """Grid ratio maximizing the randomized geometric-chain lower bound
    (1 - f/(r-1)) * (r-1)/(r ln r); reproduces the known constants of the
    randomized-grid greedy (e.g. ~0.373 at f=1)."""

    def bound(r: float) -> float:
        if r <= 1.0 + f:
            return -1.0
        return (1.0 - f / (r - 1.0)) * (r - 1.0) / (r * math.log(r))

    a, b = (1.0 + f) * (1.0 + 1e-6), 200.0 * (1.0 + f)
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    for _ in range(100):
        if bound(c) >= bound(d):
            b, d = d, c
            c = b - invphi * (b - a)
        else:
            a, c = c, d
            d = a + invphi * (b - a)
    return 0.5 * (a + b)


class BkPolicy(_Policy):
    """Greedy on values rounded down to a randomized geometric grid
    {c * rho^k}; swaps when the rounded value strictly increases.

    The cited construction leaves the grid ratio to its own analysis; the
    default maximizes the randomized chain bound for the given f (a flat
    f-independent ratio goes badly negative for large f).
    """

    name = "bk"

    def __init__(self, f: float, rho: float | None = None):
        if f <= 0:
            raise ValueError("need f > 0")
        self.f = f
        self.rho = rho if rho is not None else bk_default_rho(f)

    def start(self, rng):
        self._offset = self.rho ** float(rng.random())

    def _round_down(self, v: float) -> float:
        k = math.floor(math.log(v / self._offset, self.rho))
        return self._offset * self.rho**k

    def decide(self, t, held, observed, rng):
        if observed <= 0.0:
            return False
        if held == 0.0:
            return True
        return self._round_down(observed) > self._round_down(held)


def bk_policy(f: float, rho: float | None = None) -> BkPolicy:
    return BkPolicy(f, rho)


class BoundedThresholdPolicy(_Policy):
    """Single-threshold, no-buyback policies for instances whose maximum is
    confined to [alpha, (1+f) alpha)."""

    name = "bounded"
    never_overpays = True

    def __init__(self, inst: Instance, f: float, variant: str):
        if f <= 0:
            raise ValueError("need f > 0")
        self.f = f
        alpha = max_ess_inf(inst)
        if variant == "mean":
            self.threshold = max(expected_max(inst) * (1.0 + f) / (1.0 + 2.0 * f), alpha)
        elif variant == "quantile":
            self.threshold = max_quantile(inst, f * f / ((1.0 + f) * (1.0 + 2.0 * f)))
        elif variant == "fixedpoint":
            self.threshold = max(self._fixed_point(inst, f), alpha)
        else:
            raise ValueError(f"unknown variant {variant!r}")
        self.name = f"bounded-{variant}"

    @staticmethod
    def _fixed_point(inst: Instance, f: float) -> float:
        target = f / (1.0 + f)
        lo = 0.0
        hi = max(upper_bound(d) for d in inst.dists)
        if math.isinf(hi):
            hi = max_quantile(inst, 1.0 - 1e-12)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if max_expected_excess(inst, mid) - target * mid > 0.0:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-14 * max(hi, 1.0):
                break
        return 0.5 * (lo + hi)

    def decide(self, t, held, observed, rng):
        return held == 0.0 and observed >= self.threshold and observed > 0.0


def bounded_threshold_policy(inst: Instance, f: float, variant: str) -> BoundedThresholdPolicy:
    return BoundedThresholdPolicy(inst, f, variant)


def two_var_optimal_value(x1: float, d2: Distribution, f: float) -> float:
    """Optimal conditional value with two variables: keep x1 and swap only
    when profitable, or ignore it; exact for discrete d2."""
    if x1 < 0:
        raise ValueError("need x1 >= 0")
    if is_discrete(d2):
        from .distributions import support_points

        vals, probs = support_points(d2)
        e2 = sum(v * p for v, p in zip(vals, probs))
        gain = sum(max(v - (1.0 + f) * x1, 0.0) * p for v, p in zip(vals, probs))
    else:
        inst2 = Instance((d2,))
        e2 = dist_mean(d2)
        gain = max_expected_excess(inst2, (1.0 + f) * x1)
    return max(e2, x1 + gain)


POLICY_NAMES = (
    "dp",
    "oa",
    "tg",
    "median",
    "bhk",
    "bk",
    "bounded-mean",
    "bounded-quantile",
    "bounded-fixedpoint",
)

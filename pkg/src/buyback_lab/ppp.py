"""Scale-invariant Poisson point process samplers and the online generator
that fills the gap between successive peaks.

A PPP with intensity 1/t on (a, b] is generated descending from b by the
multiplicative chain t <- t*U: the largest point below tau0 is uniform on
(0, tau0), so the chain is exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distributions import Distribution, Instance, cdf, cdf_fn, quantile, quantile_fn

__all__ = ["PointSet", "sample_scale_invariant", "sample_interval_ppp", "OnlinePpp"]

QUANTILE_FLOOR = 1e-12


@dataclass(frozen=True)
class PointSet:
    """Strictly increasing points within (lo, hi]."""

    points: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)


def sample_scale_invariant(rng: np.random.Generator, a: float, b: float) -> PointSet:
    """Points of a PPP with intensity 1/t on (a, b], 0 < a < b <= 1."""
    if not 0.0 < a <= b <= 1.0:
        raise ValueError(f"need 0 < a <= b <= 1, got ({a}, {b}]")
    pts = []
    t = b
    while True:
        t *= float(rng.random())
        if t <= a:
            break
        pts.append(t)
    pts.reverse()
    return PointSet(tuple(pts))


def sample_interval_ppp(
    rng: np.random.Generator,
    dists: tuple[Distribution, ...] | list[Distribution],
    lo: float,
    hi: float,
) -> PointSet:
    """Union over members of PPPs with intensity measure -log F_r on values
    in (lo, hi]; member atoms receive Poisson-many copies automatically via
    the generalized-inverse mapping.
    """
    if not 0.0 <= lo < hi:
        raise ValueError(f"need 0 <= lo < hi, got ({lo}, {hi}]")
    pts: list[float] = []
    for d in dists:
        b = cdf(d, hi)
        a = cdf(d, lo)
        if b <= 0.0 or b <= a:
            continue
        if a <= 0.0:
            raise ValueError(
                f"member {d!r} has zero CDF at {lo}: interval carries infinite intensity"
            )
        for q in sample_scale_invariant(rng, a, b):
            x = quantile(d, q)
            if lo < x <= hi:
                pts.append(x)
    pts.sort()
    return PointSet(tuple(pts))


class OnlinePpp:
    """Online union PPP over a running peak.

    On each new peak x, fills (peak, x] with points at the remaining-suffix
    intensity -sum_{r>=i} log F_r and appends x itself.  Members whose CDF
    vanishes at the current peak are sampled down to `quantile_floor` in
    their own quantile space: the omitted points sit within that quantile of
    the member's essential infimum.
    """

    def __init__(self, inst: Instance, quantile_floor: float = QUANTILE_FLOOR):
        self.inst = inst
        self.peak = 0.0
        self.quantile_floor = quantile_floor
        self._cdfs = [cdf_fn(d) for d in inst.dists]
        self._quantiles = [quantile_fn(d) for d in inst.dists]

    def reset(self) -> None:
        self.peak = 0.0

    def step(self, i: int, x_obs: float, rng: np.random.Generator) -> PointSet:
        """Observe X_i (1-based); returns generated points including the peak."""
        if not 1 <= i <= self.inst.n:
            raise ValueError(f"index {i} outside 1..{self.inst.n}")
        if x_obs <= self.peak:
            return PointSet(())
        pts = [x_obs]
        peak = self.peak
        u = rng.random
        for r in range(i - 1, self.inst.n):
            b = self._cdfs[r](x_obs)
            if b <= 0.0:
                continue
            a = max(self._cdfs[r](peak), b * self.quantile_floor)
            inv = self._quantiles[r]
            q = b
            while True:
                q *= u()
                if q <= a:
                    break
                x = inv(q)
                if peak < x <= x_obs:
                    pts.append(x)
        self.peak = x_obs
        pts.sort()
        return PointSet(tuple(pts))

"""Backward construction of the swap-threshold curve y_f and its inverse.

For a buyback factor f > 0 and a candidate ratio theta, the curve starts
from a closed-form top segment on [2 - 1/theta, 1] and is extended backward
segment by segment: the breakpoints r_{i+1} = y(r_i) telescope down until
they pass c_f = f/(1+f).  A run either reaches c_f with y(c_f) <= 0
(success) or fails; bisection over theta pins the critical ratio where
y(c_f) = 0.
"""
from __future__ import annotations

import json
import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Segment",
    "SolveOutcome",
    "YSolution",
    "DERIVATIVE_CONDITION",
    "NON_MONOTONE",
    "BREAKPOINT_OVERFLOW",
    "Y_POSITIVE_AT_CF",
    "initial_segment",
    "extend_segment",
    "solve_for_theta",
    "solve_theta",
    "closed_form_theta",
    "closed_form_y",
    "theta_upper",
]

DERIVATIVE_CONDITION = "derivative-condition"
NON_MONOTONE = "non-monotone"
BREAKPOINT_OVERFLOW = "breakpoint-overflow"
Y_POSITIVE_AT_CF = "y-positive-at-cf"

# derivative-condition failures within this absolute slack are treated as
# passes; equality is approached near the critical theta
TOL_SLOPE = 1e-9
_YP_FLOOR = 1e-13


def theta_upper(f: float) -> float:
    """Largest candidate ratio, (1+f)/(1+2f)."""
    return (1.0 + f) / (1.0 + 2.0 * f)


@dataclass(frozen=True)
class Segment:
    """One backward-constructed piece of the curve: knots (t, y, y')."""

    t: np.ndarray
    y: np.ndarray
    yp: np.ndarray

    @property
    def lo(self) -> float:
        return float(self.t[0])

    @property
    def hi(self) -> float:
        return float(self.t[-1])

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def __len__(self) -> int:
        return len(self.t)


@dataclass
class SolveOutcome:
    """Result of one fixed-theta shot: success with y(c_f), or a failure reason."""

    success: bool
    y_at_cf: float | None
    reason: str | None
    segments: list[Segment]
    breakpoints: list[float]


def initial_segment(f: float, theta: float, grid_n: int = 4096) -> Segment:
    """Closed-form top segment on [2 - 1/theta, 1]."""
    if f <= 0:
        raise ValueError(f"buyback factor must be positive, got {f}")
    if grid_n < 64:
        raise ValueError(f"grid_n must be >= 64, got {grid_n}")
    if theta < 0.5:
        raise ValueError(f"theta must be >= 1/2, got {theta}")
    y1 = 2.0 - 1.0 / theta
    if y1 >= 1.0:
        raise ValueError(f"degenerate start: 2 - 1/theta = {y1} >= 1")
    cf = f / (1.0 + f)
    t = np.linspace(y1, 1.0, grid_n + 1)
    y = 1.0 - 1.0 / theta + cf + (t - cf) ** 2 / (1.0 - cf)
    yp = 2.0 * (t - cf) / (1.0 - cf)
    return Segment(t, y, yp)


def _integrand(f: float, seg: Segment) -> np.ndarray:
    cf = f / (1.0 + f)
    dt = seg.t - cf
    return (seg.y - cf) / dt * (2.0 * seg.yp - seg.y / dt)


def extend_segment(f: float, prev: Segment) -> Segment | SolveOutcome:
    """Extend the curve one breakpoint down, onto [y(prev.lo), prev.lo].

    New knot abscissae are the y-values of prev; new values come from
    cumulative trapezoid integration of the backward identity; new
    derivatives from the governing equation.  Returns a failure outcome
    when the extension breaks monotonicity or the slope condition.
    """
    cf = f / (1.0 + f)
    if prev.width <= 0.0:
        empty = np.empty(0)
        return Segment(empty, empty.copy(), empty.copy())
    if prev.lo <= cf:
        raise ValueError("extension requires prev.lo > c_f")
    if np.any(prev.yp[prev.t > cf] <= _YP_FLOOR):
        return SolveOutcome(False, None, DERIVATIVE_CONDITION, [], [])

    g = _integrand(f, prev)
    # cumulative integral from each knot up to prev.hi, composite trapezoid
    cell = 0.5 * (g[1:] + g[:-1]) * np.diff(prev.t)
    tail = np.concatenate([np.cumsum(cell[::-1])[::-1], [0.0]])
    t_new = prev.y.copy()
    y_new = prev.y[0] - tail
    dt = t_new - cf
    with np.errstate(divide="ignore", invalid="ignore"):
        yp_new = dt / (prev.t - cf) * (2.0 - t_new / (prev.yp * (prev.t - cf)))

    inside = t_new > cf + 1e-15
    if np.any(np.diff(y_new[inside]) <= 0.0):
        return SolveOutcome(False, None, NON_MONOTONE, [], [])
    bad = yp_new[inside] < y_new[inside] / dt[inside] - TOL_SLOPE
    if np.any(bad):
        return SolveOutcome(False, None, DERIVATIVE_CONDITION, [], [])

    # keep knots above c_f plus one bracketing knot below for interpolation
    first = max(int(np.argmax(inside)) - 1, 0) if inside.any() else 0
    return Segment(t_new[first:], y_new[first:], yp_new[first:])


def _y_at(seg: Segment, x: float) -> float:
    return float(np.interp(x, seg.t, seg.y))


def solve_for_theta(f: float, theta: float, grid_n: int = 4096) -> SolveOutcome:
    """Shoot the backward construction at a fixed theta and classify it."""
    cf = f / (1.0 + f)
    seg = initial_segment(f, theta, grid_n)
    segments = [seg]
    breakpoints = [1.0, seg.lo]
    cap = math.ceil(1.0 + 1.0 / f) + 2

    while breakpoints[-1] > cf:
        if len(breakpoints) - 1 >= cap:
            return SolveOutcome(False, None, BREAKPOINT_OVERFLOW, segments, breakpoints)
        nxt = extend_segment(f, segments[-1])
        if isinstance(nxt, SolveOutcome):
            nxt.segments = segments
            nxt.breakpoints = breakpoints
            return nxt
        segments.append(nxt)
        breakpoints.append(nxt.lo)

    y_cf = _y_at(segments[-1], cf)
    if y_cf > 0.0:
        return SolveOutcome(False, y_cf, Y_POSITIVE_AT_CF, segments, breakpoints)
    return SolveOutcome(True, y_cf, None, segments, breakpoints)


def closed_form_theta(f: float) -> float | None:
    """Known explicit ratios: f >= 1 and f in [1/3, 1)."""
    if f >= 1.0:
        return (1.0 + f) / (1.0 + 2.0 * f)
    if f >= 1.0 / 3.0:
        s = math.sqrt(f * (2.0 - f))
        return (1.0 + f) * (s + 1.0) / ((1.0 + f) * s + 3.0 * f + 1.0)
    return None


def closed_form_y(f: float, t: float) -> float:
    """Explicit curve for the two closed-form regimes (f >= 1/3)."""
    cf = f / (1.0 + f)
    if f >= 1.0:
        return (1.0 + f) * (t - cf) ** 2
    if f < 1.0 / 3.0:
        raise ValueError("no closed form below f = 1/3")
    theta = closed_form_theta(f)
    y1 = 2.0 - 1.0 / theta
    a = f * (1.0 - math.sqrt(f * (2.0 - f))) ** 2 / ((1.0 + f) * (1.0 - f) ** 2)
    if t >= y1:
        return (t - cf) ** 2 / (1.0 - cf) - a
    return math.sqrt((1.0 + f) / (t + a)) * (
        (t - cf) ** 2 - cf * (math.sqrt(t + a) - math.sqrt(cf + a)) ** 2
    )


@dataclass
class YSolution:
    """Solved curve at the critical ratio, normalized so y(c_f) = 0.

    Raw segments and breakpoints are kept for serialization and residual
    checks; evaluation uses a merged monotone polyline with an exact
    quadratic window at the bottom (the curve is tangent to zero at c_f, so
    its inverse has square-root shape there and a chord would misbehave).
    """

    f: float
    theta: float
    c_f: float
    y1: float
    breakpoints: list[float]
    segments: list[Segment]
    success: bool
    y_at_cf_raw: float
    _ts: np.ndarray = field(default=None, repr=False)
    _ys: np.ndarray = field(default=None, repr=False)
    root_coeff: float = 0.0
    t_anchor: float = 0.0
    s_anchor: float = 0.0

    def __post_init__(self):
        if self._ts is None:
            self._build_polyline()

    def _build_polyline(self):
        ts, ys = [], []
        for seg in reversed(self.segments):  # ascending t
            for tt, yy in zip(seg.t, seg.y):
                if tt <= self.c_f + 1e-15 or yy <= 0.0:
                    continue
                if ts and tt <= ts[-1] + 1e-15:
                    continue
                ts.append(float(tt))
                ys.append(float(yy))
        if not ts:
            raise ValueError("no usable knots above c_f")
        ts_arr = np.asarray(ts)
        ys_arr = np.asarray(ys)
        if np.any(np.diff(ys_arr) <= 0.0):
            raise ValueError("solution knots are not strictly increasing")

        # anchor at the deepest knot whose value is large relative to the
        # integration noise; below it the curve is modeled by the exact
        # quadratic tangent to zero at c_f (its derivative vanishes there,
        # so a chord from (c_f, 0) would distort the inverse badly)
        s_target = min(1e-5, max(0.25 * self.y1, 1e-14))
        idx = int(np.searchsorted(ys_arr, s_target))
        idx = min(idx, len(ys_arr) - 1)
        t_a, s_a = float(ts_arr[idx]), float(ys_arr[idx])
        self.root_coeff = s_a / (t_a - self.c_f) ** 2
        self.t_anchor = t_a
        self.s_anchor = s_a
        self._ts = ts_arr[idx:]
        self._ys = ys_arr[idx:]

    # -- evaluation ---------------------------------------------------------

    def eval_y(self, t: float) -> float:
        if not self.c_f - 1e-9 <= t <= 1.0 + 1e-9:
            raise ValueError(f"t={t} outside [c_f, 1] = [{self.c_f}, 1]")
        t = min(max(t, self.c_f), 1.0)
        if t <= self.t_anchor:
            return self.root_coeff * (t - self.c_f) ** 2
        return float(np.interp(t, self._ts, self._ys))

    def eval_tau(self, s: float) -> float:
        if not -1e-12 <= s <= 1.0 + 1e-12:
            raise ValueError(f"s={s} outside [0, 1]")
        s = min(max(s, 0.0), 1.0)
        if s >= self.y1:
            return 1.0
        if s <= self.s_anchor:
            return self.c_f + math.sqrt(s / self.root_coeff)
        return float(np.interp(s, self._ys, self._ts))

    def eval_y_prime(self, t: float) -> float:
        """Derivative interpolated within the containing raw segment."""
        if t <= self.t_anchor:
            return 2.0 * self.root_coeff * (t - self.c_f)
        for seg in self.segments:
            if seg.lo <= t <= seg.hi:
                return float(np.interp(t, seg.t, seg.yp))
        raise ValueError(f"t={t} outside solved domain")

    # -- serialization ------------------------------------------------------

    def to_json(self) -> str:
        return json.dumps(
            {
                "f": self.f,
                "theta": self.theta,
                "c_f": self.c_f,
                "y1": self.y1,
                "breakpoints": self.breakpoints,
                "y_at_cf_raw": self.y_at_cf_raw,
                "segments": [
                    {"t": seg.t.tolist(), "y": seg.y.tolist(), "yp": seg.yp.tolist()}
                    for seg in self.segments
                ],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "YSolution":
        obj = json.loads(text)
        segs = [
            Segment(np.asarray(s["t"]), np.asarray(s["y"]), np.asarray(s["yp"]))
            for s in obj["segments"]
        ]
        return cls(
            f=obj["f"],
            theta=obj["theta"],
            c_f=obj["c_f"],
            y1=obj["y1"],
            breakpoints=list(obj["breakpoints"]),
            segments=segs,
            success=True,
            y_at_cf_raw=obj["y_at_cf_raw"],
        )


def _assemble(f: float, theta: float, outcome: SolveOutcome) -> YSolution:
    cf = f / (1.0 + f)
    return YSolution(
        f=f,
        theta=theta,
        c_f=cf,
        y1=2.0 - 1.0 / theta,
        breakpoints=list(outcome.breakpoints),
        segments=list(outcome.segments),
        success=True,
        y_at_cf_raw=outcome.y_at_cf if outcome.y_at_cf is not None else 0.0,
    )


def solve_theta(
    f: float,
    tol_theta: float = 1e-7,
    grid_n: int = 4096,
    tol_y: float = 1e-6,
) -> YSolution:
    """Bisect over theta to the critical ratio where y(c_f) = 0."""
    if f <= 0:
        raise ValueError(f"buyback factor must be positive, got {f}")

    def classify(theta: float) -> tuple[str, SolveOutcome]:
        out = solve_for_theta(f, theta, grid_n)
        if out.y_at_cf is not None and abs(out.y_at_cf) <= tol_y:
            return "done", out
        if out.success:
            return "low", out  # y(c_f) < -tol: theta can rise
        return "high", out

    hi = theta_upper(f)
    verdict, out = classify(hi)
    if verdict == "done":
        return _assemble(f, hi, out)
    if verdict == "low":
        raise RuntimeError(f"upper ratio candidate unexpectedly succeeds for f={f}")

    lo = 0.5
    verdict, out_lo = classify(lo)
    if verdict == "done":
        return _assemble(f, lo, out_lo)
    if verdict != "low":
        raise RuntimeError(
            f"no sign change: theta={lo} gives {out_lo.reason or out_lo.y_at_cf} for f={f}"
        )

    # bisect to the requested interval width, then keep polishing: the pick
    # density scales like 1/sqrt(s) near zero, so downstream tables want
    # |y(c_f)| at the noise floor, far below the documented stopping tol
    polish_target = 5e-14
    best_theta, best_out = lo, out_lo
    for _ in range(200):
        if hi - lo < tol_theta and abs(best_out.y_at_cf) <= max(polish_target, tol_y * 1e-12):
            break
        if hi - lo <= 0.0 or 0.5 * (lo + hi) in (lo, hi):
            break
        mid = 0.5 * (lo + hi)
        verdict, out = classify(mid)
        if verdict == "done" and abs(out.y_at_cf) <= polish_target:
            return _assemble(f, mid, out)
        if out.success:
            lo, out_lo = mid, out
            if abs(out.y_at_cf) < abs(best_out.y_at_cf):
                best_theta, best_out = mid, out
        else:
            hi = mid
    return _assemble(f, best_theta, best_out)

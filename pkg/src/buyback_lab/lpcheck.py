"""Constructive dual solution for the discrete generalized-flow program and
its feasibility check.

Given activation probabilities q_1..q_n, the cumulative landmarks are
r_t = prod_{s>t}(1-q_s); the candidate solution integrates the continuous
first-pick/swap densities over the landmark cells:

    x_{0,t} = int_{r_{t-1}}^{r_t} h,     x_{s,t} = int int g,

with h(t) = phi(t) below k1 and k1^2 phi(k1)/t^2 above, and
g(s,t) = phi(s) tau(s)/t^2 on t > tau(s).  Both reduce to closed forms in
the cumulative pick integrals once each cell is split at the swap-threshold
crossings, so no per-entry quadrature is needed.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .phi import PhiTables

__all__ = ["DualSolution", "build_dual_solution", "check_feasibility"]


@dataclass
class DualSolution:
    n: int
    q: np.ndarray  # activation probabilities, q[0] unused placeholder
    r: np.ndarray  # landmarks r_0..r_n with r_n = 1
    x0: np.ndarray  # x0[t] = x_{0,t}, 1-based in t
    x: np.ndarray  # x[s, t] = x_{s,t} for 1 <= s < t <= n
    theta: float
    f: float

    @property
    def q_hat(self) -> np.ndarray:
        return np.diff(self.r)


def _h_integral(tables: PhiTables, a: float, b: float) -> float:
    """int_a^b h with h = phi below k1 and k1^2 phi(k1)/t^2 above."""
    k1 = tables.k1
    out = 0.0
    lo, hi = max(a, 0.0), min(b, k1)
    if hi > lo:
        out += tables.integral_phi(hi) - tables.integral_phi(lo)
    lo, hi = max(a, k1), b
    if hi > lo:
        out += k1 * k1 * tables.phi(k1) * (1.0 / lo - 1.0 / hi)
    return out


def _swap_mass(tables: PhiTables, a: float, b: float, u_lo: float, u_hi: float) -> float:
    """int_{r=a}^{b} int_{u=u_lo}^{u_hi} g(r, u) du dr via cell splitting.

    For fixed r the inner integral is phi(r) tau(r) (1/max(tau(r), u_lo)
    - 1/u_hi) on tau(r) < u_hi; splitting [a, b] where tau crosses u_lo and
    u_hi makes each piece exact in the cumulative pick integrals.
    """
    if u_hi <= u_lo or b <= a:
        return 0.0
    sol = tables.sol
    # tau(r) < u_lo  <=>  r < y(u_lo)   (tau >= c_f kills crossings below)
    def y_clip(u: float) -> float:
        if u >= 1.0:
            return sol.y1
        if u <= sol.c_f:
            return 0.0
        return sol.eval_y(u)

    cross_lo = y_clip(u_lo)
    cross_hi = y_clip(u_hi)
    out = 0.0
    # piece 1: tau(r) <= u_lo, inner = phi tau (1/u_lo - 1/u_hi)
    lo, hi = a, min(b, cross_lo)
    if hi > lo:
        out += (tables.integral_phi_tau(hi) - tables.integral_phi_tau(lo)) * (
            1.0 / u_lo - 1.0 / u_hi
        )
    # piece 2: u_lo < tau(r) < u_hi, inner = phi - phi tau / u_hi
    lo, hi = max(a, cross_lo), min(b, cross_hi)
    if hi > lo:
        out += (tables.integral_phi(hi) - tables.integral_phi(lo)) - (
            tables.integral_phi_tau(hi) - tables.integral_phi_tau(lo)
        ) / u_hi
    return out


def build_dual_solution(tables: PhiTables, q, theta: float | None = None) -> DualSolution:
    """Candidate flow for activation probabilities q.

    Unless q already starts with 1, a deterministic dummy variable with
    q = 1 is prepended so the landmark cells tile all of (0, 1]; swaps out
    of the dummy cell are first accepts of the later variable, and swaps
    within it telescope away.  Coverage is only enforced for t >= 2, which
    exempts the dummy.
    """
    q = list(float(v) for v in q)
    if any(v <= 0.0 or v > 1.0 for v in q):
        raise ValueError("activation probabilities must lie in (0, 1]")
    if not q or q[0] < 1.0:
        q = [1.0] + q
    q = np.asarray(q)
    n = len(q)
    if n < 1 or n > 51:
        raise ValueError("need 1 <= n <= 50 activation probabilities")
    r = np.empty(n + 1)
    r[n] = 1.0
    for t in range(n - 1, -1, -1):
        r[t] = r[t + 1] * (1.0 - q[t])

    x0 = np.zeros(n + 1)
    for t in range(1, n + 1):
        x0[t] = _h_integral(tables, r[t - 1], r[t])
    x = np.zeros((n + 1, n + 1))
    for s in range(1, n + 1):
        for t in range(s + 1, n + 1):
            x[s, t] = _swap_mass(tables, r[s - 1], r[s], r[t - 1], r[t])
    if np.any(x0 < -1e-9) or np.any(x < -1e-9):
        raise AssertionError("negative flow entry")
    return DualSolution(
        n=n,
        q=q,
        r=r,
        x0=np.maximum(x0, 0.0),
        x=np.maximum(x, 0.0),
        theta=theta if theta is not None else tables.theta,
        f=tables.f,
    )


def check_feasibility(sol: DualSolution, theta: float | None = None) -> float:
    """Largest constraint violation (positive = infeasible by that much)."""
    theta = sol.theta if theta is None else theta
    n, q, x0, x = sol.n, sol.q, sol.x0, sol.x
    q_hat = sol.q_hat
    worst = -math.inf
    cum0 = 0.0
    for t in range(1, n + 1):
        worst = max(worst, x0[t] - q[t - 1] * (1.0 - cum0))
        cum0 += x0[t]
    for s in range(1, n + 1):
        into_s = x0[s] + x[1:s, s].sum()
        out_s = 0.0
        for t in range(s + 1, n + 1):
            worst = max(worst, x[s, t] - q[t - 1] * (into_s - out_s))
            out_s += x[s, t]
    for t in range(2, n + 1):
        into_t = x0[t] + x[1:t, t].sum()
        out_t = x[t, t + 1 :].sum()
        worst = max(worst, theta * q_hat[t - 1] - (into_t - (1.0 + sol.f) * out_t))
    return worst


def report_json(sol: DualSolution, theta: float) -> str:
    violation = check_feasibility(sol, theta)
    return json.dumps(
        {
            "f": sol.f,
            "theta": theta,
            "n": sol.n,
            "max_violation": violation,
            "feasible": bool(violation <= 1e-5),
        }
    )

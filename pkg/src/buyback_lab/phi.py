"""Per-quantile pick density phi, the first-pick threshold CDF G, and the
orbit of 0 under the inverse swap map.

phi(s) = theta / ((1+f) tau(s) - f) diverges like s^(-1/2) at 0 because the
solved curve is tangent to zero at c_f.  Integrals are therefore computed in
t-space through the substitution s = y(t), where the integrand
theta * y'(t) / ((1+f)(t - c_f)) is smooth; only the sliver below the
deepest knot uses the exact quadratic root window of the YSolution.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .ode import YSolution

__all__ = ["PhiTables", "build_tables"]


@dataclass
class PhiTables:
    sol: YSolution
    # cumulative integrals keyed by the knot values s_i = y(t_i)
    _s: np.ndarray = field(repr=False, default=None)
    _cum_phi: np.ndarray = field(repr=False, default=None)
    _cum_phi_tau: np.ndarray = field(repr=False, default=None)
    g_norm: float = 1.0

    @property
    def f(self) -> float:
        return self.sol.f

    @property
    def theta(self) -> float:
        return self.sol.theta

    @property
    def k1(self) -> float:
        return self.sol.c_f

    @property
    def y1(self) -> float:
        return self.sol.y1

    def __post_init__(self):
        if self._s is not None:
            return
        sol = self.sol
        cf = sol.c_f
        scale = sol.theta / (1.0 + sol.f)

        # Deep knots carry absolute value error comparable to their size, so
        # all integration runs over t with the formula-propagated derivative
        # (robust) and only values >= s_anchor are used as interpolation keys.
        svals: list[float] = []
        cum1: list[float] = []
        cum2: list[float] = []
        run1 = run2 = 0.0
        seeded = False
        for seg in reversed(sol.segments):  # bottom to top
            keep = seg.t > cf + 1e-15
            if not keep.any():
                continue
            t = seg.t[keep]
            y = seg.y[keep]
            w1 = scale * seg.yp[keep] / (t - cf)
            w2 = w1 * t
            if not seeded:
                # sliver [c_f, t_min]: the integrand tends to a constant there
                run1 = w1[0] * (t[0] - cf)
                run2 = 0.5 * (w1[0] * cf + w2[0]) * (t[0] - cf)
                seeded = True
            for j in range(1, len(t)):
                run1 += 0.5 * (w1[j - 1] + w1[j]) * (t[j] - t[j - 1])
                run2 += 0.5 * (w2[j - 1] + w2[j]) * (t[j] - t[j - 1])
                if y[j] >= sol.s_anchor and (not svals or y[j] > svals[-1] + 1e-18):
                    svals.append(float(y[j]))
                    cum1.append(run1)
                    cum2.append(run2)
        if not svals:
            raise ValueError("no usable knots above the anchor")
        self._s = np.asarray(svals)
        self._cum_phi = np.asarray(cum1)
        self._cum_phi_tau = np.asarray(cum2)
        self._top_phi = self._cum_phi[-1]
        self._top_phi_tau = self._cum_phi_tau[-1]
        self._anchor_phi = self._cum_phi[0]
        self._anchor_phi_tau = self._cum_phi_tau[0]
        self._s_lowest = s_low = self._s[0]
        # window shapes from the quadratic root model (tau = c_f + sqrt(s/C)):
        # int phi ~ 2A sqrt(s), int phi*tau ~ 2A c_f sqrt(s) + A s/sqrt(C),
        # each rescaled to hit the anchored t-space credits exactly
        amp = sol.theta * math.sqrt(sol.root_coeff) / (1.0 + sol.f)
        self._w_phi = 2.0 * amp * math.sqrt(s_low)
        self._w_tau_a = 2.0 * amp * cf * math.sqrt(s_low)
        self._w_tau_b = amp * s_low / math.sqrt(sol.root_coeff)
        self.g_norm = self.g_raw(self.k1)

    # below the lowest key the pick integrals follow the root-window shapes
    def _root_int_phi(self, s: float) -> float:
        return self._anchor_phi * math.sqrt(max(s, 0.0) / self._s_lowest)

    def _root_int_phi_tau(self, s: float) -> float:
        s = max(s, 0.0)
        u = s / self._s_lowest
        shape = self._w_tau_a * math.sqrt(u) + self._w_tau_b * u
        return self._anchor_phi_tau * shape / (self._w_tau_a + self._w_tau_b)

    # -- pointwise ----------------------------------------------------------

    def tau(self, s: float) -> float:
        return self.sol.eval_tau(s)

    def phi(self, t: float) -> float:
        """theta / ((1+f) tau(t) - f); equals theta on [y(1), 1]."""
        if t <= 0.0:
            raise ValueError(f"phi needs t > 0, got {t}")
        if t > 1.0 + 1e-12:
            raise ValueError(f"phi needs t <= 1, got {t}")
        return self.theta / ((1.0 + self.f) * self.sol.eval_tau(min(t, 1.0)) - self.f)

    def integral_phi(self, s: float) -> float:
        """int_0^s phi(r) dr."""
        if s <= 0.0:
            return 0.0
        if s <= self._s_lowest:
            return self._root_int_phi(s)
        if s >= self.y1:
            return self._top_phi + self.theta * (min(s, 1.0) - self.y1)
        return float(np.interp(s, self._s, self._cum_phi))

    def integral_phi_tau(self, s: float) -> float:
        """int_0^s phi(r) tau(r) dr."""
        if s <= 0.0:
            return 0.0
        if s <= self._s_lowest:
            return self._root_int_phi_tau(s)
        if s >= self.y1:
            return self._top_phi_tau + self.theta * (min(s, 1.0) - self.y1)
        return float(np.interp(s, self._s, self._cum_phi_tau))

    # -- first-pick threshold CDF ------------------------------------------

    def g_raw(self, t: float) -> float:
        return t * self.phi(t) + self.integral_phi(t)

    def g_cdf(self, t: float) -> float:
        """CDF of the initial threshold on (0, k1], normalized so G(k1) = 1."""
        if not 0.0 < t <= self.k1 + 1e-12:
            raise ValueError(f"G is defined on (0, k1], got {t}")
        return min(self.g_raw(min(t, self.k1)) / self.g_norm, 1.0)

    @property
    def g_normalization_gap(self) -> float:
        """|G_raw(k1) - 1| before normalization."""
        return abs(self.g_norm - 1.0)

    def sample_initial_threshold(self, rng: np.random.Generator) -> float:
        """Inverse-transform draw from G on (0, k1]."""
        u = (1.0 - float(rng.random())) * self.g_norm
        g_low = self.g_raw(self._s_lowest)
        if u <= g_low:
            # below the lowest key G scales like sqrt(t)
            return self._s_lowest * (u / g_low) ** 2
        if not hasattr(self, "_g_grid"):
            mask = self._s <= self.k1 + 1e-15
            tg = np.append(self._s[mask], self.k1)
            gg = np.array([self.g_raw(float(t)) for t in tg])
            gg = np.maximum.accumulate(gg)
            self._g_grid = (tg, gg)
        tg, gg = self._g_grid
        return float(np.interp(u, gg, tg))

    # -- orbit of 0 under tau -------------------------------------------------

    def orbit(self) -> list[float]:
        """k_0 = 0 < k_1 = c_f < ... < k_{n-1} < k_n = 1 with y(k_{i+1}) = k_i."""
        ks = [0.0]
        cur = 0.0
        cap = int(1.0 + 1.0 / self.f) + 3
        while cur < self.y1 - 1e-9:
            cur = self.sol.eval_tau(cur)
            ks.append(cur)
            if len(ks) > cap:
                raise RuntimeError("orbit exceeded its length cap; solution inconsistent")
        ks.append(1.0)
        return ks

    # -- residuals used by the verification suite ---------------------------

    def budget_residual(self, n_pts: int = 1024) -> float:
        """max over (0, k1] of t*phi(t) - (1 - int_0^t phi): should be <= 0."""
        ts = np.geomspace(max(self._s_lowest, 1e-12), self.k1, n_pts)
        worst = -math.inf
        for t in ts:
            worst = max(worst, t * self.phi(float(t)) - (1.0 - self.integral_phi(float(t))))
        return worst

    def balance_residual(self, n_pts: int = 256) -> float:
        """max over [k1, 1] of |t*phi(t) - (1 - int_{y(t)}^t phi)|."""
        ts = np.linspace(self.k1, 1.0, n_pts)
        worst = 0.0
        for t in ts:
            yt = self.sol.eval_y(float(t))
            inner = self.integral_phi(float(t)) - self.integral_phi(max(yt, 0.0))
            worst = max(worst, abs(t * self.phi(float(t)) - (1.0 - inner)))
        return worst

    def moment_residual(self, n_pts: int = 256) -> float:
        """max over [k1, 1] of |t^2 phi(t) - k1^2 phi(k1) - int_0^{y(t)} phi*tau|."""
        ts = np.linspace(self.k1, 1.0, n_pts)
        base = self.k1**2 * self.phi(self.k1)
        worst = 0.0
        for t in ts:
            yt = self.sol.eval_y(float(t))
            worst = max(
                worst, abs(t * t * self.phi(float(t)) - base - self.integral_phi_tau(max(yt, 0.0)))
            )
        return worst


def build_tables(sol: YSolution) -> PhiTables:
    if not sol.success:
        raise ValueError("phi tables need a successful solution")
    return PhiTables(sol)

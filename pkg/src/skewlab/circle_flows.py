"""Four commuting flows on the circle R/Z and the homomorphism F: R^4 -> Diff(S^1).

Flow ``i`` (1-based) is generated by

    X_i(s) = ln 2 * (s - p_i) * beta((s - p_i) / rho),
    beta(u) = exp(1 - 1/(1 - u^2)) for |u| < 1, else 0,

with ``p_i = (4i - 3)/16`` and ``rho = 1/16``, so X_i is supported on the arc
``((2i-2)/8, (2i-1)/8)`` and ``X_i'(p_i) = ln 2``: the time-t map has derivative
exactly ``2**t`` at its repelling point.  Derivatives are carried as log2.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import minimize_scalar

LN2 = float(np.log(2.0))

__all__ = [
    "FlowSpec",
    "FlowSystem",
    "wrap",
    "circle_distance",
    "circle_difference",
    "bump",
    "LN2",
]


def wrap(s):
    """Reduce to [0, 1)."""
    out = np.mod(s, 1.0)
    # mod can round up to exactly 1.0 for tiny negative inputs
    return np.where(out >= 1.0, 0.0, out) if isinstance(out, np.ndarray) else (0.0 if out >= 1.0 else out)


def circle_difference(a, b):
    """Signed shortest difference ``a - b`` on R/Z, in [-1/2, 1/2)."""
    return np.mod(np.asarray(a) - np.asarray(b) + 0.5, 1.0) - 0.5


def circle_distance(a, b):
    d = np.abs(np.mod(np.asarray(a) - np.asarray(b), 1.0))
    return np.minimum(d, 1.0 - d)


def bump(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1.0
    ui = u[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - ui * ui))
    return out


def _bump_log_slope_factor(u):
    # d/du [u beta(u)] = beta(u) * (1 - 2u^2/(1-u^2)^2)
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1.0
    ui = u[inside]
    one_m = 1.0 - ui * ui
    out[inside] = np.exp(1.0 - 1.0 / one_m) * (1.0 - 2.0 * ui * ui / (one_m * one_m))
    return out


@dataclass(frozen=True)
class FlowSpec:
    index: int
    center: float
    radius: float
    bump_radius: float
    rate: float = LN2

    @property
    def arc(self) -> tuple[float, float]:
        return (self.center - self.radius, self.center + self.radius)

    def contains(self, s):
        return np.abs(np.asarray(s, dtype=float) - self.center) < self.radius

    def field(self, s):
        d = np.asarray(s, dtype=float) - self.center
        return self.rate * d * bump(d / self.radius)

    def field_prime(self, s):
        d = np.asarray(s, dtype=float) - self.center
        return self.rate * _bump_log_slope_factor(d / self.radius)

    def to_dict(self) -> dict:
        lo, hi = self.arc
        return {
            "index": self.index,
            "arc": [lo, hi],
            "fixed_point": self.center,
            "rho": self.radius,
            "bump_radius": self.bump_radius,
            "rate": self.rate,
        }


def default_specs() -> tuple[FlowSpec, ...]:
    return tuple(
        FlowSpec(index=i, center=(4 * i - 3) / 16, radius=1 / 16, bump_radius=1 / 32)
        for i in range(1, 5)
    )


@dataclass(frozen=True)
class FlowSystem:
    """The four flows plus integrator tolerances. Immutable; evaluations are pure."""

    specs: tuple[FlowSpec, ...] = field(default_factory=default_specs)
    rtol: float = 1e-12
    atol: float = 1e-14

    def __post_init__(self):
        if len(self.specs) != 4:
            raise ValueError("F needs exactly four flows")
        arcs = sorted(sp.arc for sp in self.specs)
        for (_, hi), (lo, _) in zip(arcs, arcs[1:]):
            if not lo > hi:
                raise ValueError("flow supports must be pairwise disjoint")
        if arcs[0][0] < 0 or arcs[-1][1] > 1:
            raise ValueError("flow supports must lie inside [0, 1]")

    def spec(self, i: int) -> FlowSpec:
        return self.specs[i - 1]

    @property
    def fixed_points(self) -> np.ndarray:
        return np.array([sp.center for sp in self.specs])

    def sup_field_prime(self) -> float:
        """K = max_i sup |X_i'|, from a dense grid refined by bounded minimization."""
        vals = []
        for sp in self.specs:
            g = lambda u: -abs(float(_bump_log_slope_factor(np.array([u]))[0]))
            us = np.linspace(0.0, 1.0, 20001)[:-1]
            grid = np.abs(_bump_log_slope_factor(us))
            k = int(np.argmax(grid))
            lo, hi = us[max(k - 1, 0)], us[min(k + 1, len(us) - 1)]
            best = grid[k]
            if hi > lo:
                res = minimize_scalar(g, bounds=(lo, hi), method="bounded", options={"xatol": 1e-14})
                best = max(best, -res.fun)
            vals.append(sp.rate * best)
        return float(max(vals))

    def to_dict(self) -> dict:
        return {
            "flows": [sp.to_dict() for sp in self.specs],
            "rtol": self.rtol,
            "atol": self.atol,
            "sup_field_prime": self.sup_field_prime(),
        }

    # -- core integrator -------------------------------------------------

    def arc_index(self, s) -> np.ndarray:
        """1-based index of the support arc containing each point, 0 if none."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.zeros(s.shape, dtype=int)
        for sp in self.specs:
            out[sp.contains(s)] = sp.index
        return out

    def _integrate(self, sp: FlowSpec, s, times):
        """Time-``times`` maps of flow ``sp`` for a batch of points.

        Rescaled to tau in [0, 1]: ds/dtau = t X(s), dlogJ/dtau = t X'(s).
        Returns (s_end, log2 J).
        """
        s = np.asarray(s, dtype=float)
        n = len(s)
        if n == 0:
            return s.copy(), np.zeros(0)
        rate, radius, center = sp.rate, sp.radius, sp.center

        def rhs(_, y):
            d = y[:n] - center
            u = d / radius
            return np.concatenate(
                [times * rate * d * bump(u), times * rate * _bump_log_slope_factor(u)]
            )

        tmax = float(np.max(np.abs(times)))
        # at most one unit of flow time per step
        max_step = 1.0 / tmax if tmax > 1.0 else np.inf
        y0 = np.concatenate([s, np.zeros(n)])
        sol = solve_ivp(
            rhs, (0.0, 1.0), y0, method="DOP853", rtol=self.rtol,
            atol=self.atol, max_step=max_step,
        )
        if not sol.success:
            raise RuntimeError(f"flow integration failed: {sol.message}")
        y = sol.y[:, -1]
        return y[:n], y[n:] / LN2

    def _flow_batch(self, i: int, t, s, force_ode: bool = False):
        sp = self.spec(i)
        s = np.atleast_1d(np.asarray(s, dtype=float)).copy()
        t = np.broadcast_to(np.asarray(t, dtype=float), s.shape).copy()
        log2j = np.zeros(s.shape)
        moving = sp.contains(s) & (t != 0.0)
        if not force_ode:
            at_p = moving & (s == sp.center)
            log2j[at_p] = t[at_p] * sp.rate / LN2
            moving &= ~at_p
        idx = np.nonzero(moving)[0]
        if len(idx):
            s_end, lj = self._integrate(sp, s[idx], t[idx])
            s[idx] = s_end
            log2j[idx] = lj
        return s, log2j

    # -- public API ------------------------------------------------------

    def flow(self, i: int, t: float, s: float) -> float:
        """Time-t map of flow i."""
        out, _ = self._flow_batch(i, t, wrap(s))
        return float(out[0])

    def flow_log2_derivative(self, i: int, t: float, s: float, force_ode: bool = False) -> float:
        _, lj = self._flow_batch(i, t, wrap(s), force_ode=force_ode)
        return float(lj[0])

    def flow_derivative(self, i: int, t: float, s: float, force_ode: bool = False) -> float:
        """d/ds of the time-t map; exactly ``2**t`` at the repelling point unless forced through the ODE."""
        sp = self.spec(i)
        if not force_ode and s == sp.center:
            return float(2.0 ** t)
        return float(2.0 ** self.flow_log2_derivative(i, t, s, force_ode=force_ode))

    def apply_batch(self, v, s):
        """F(v) s for arrays v (N, 4), s (N,). Returns (s', log2 dF/ds).

        Only the flow whose arc contains s moves it, so F(v) s is a single flow
        evaluated at time v[j-1] for that arc j.
        """
        v = np.atleast_2d(np.asarray(v, dtype=float))
        s = wrap(np.atleast_1d(np.asarray(s, dtype=float)))
        out = s.copy()
        log2j = np.zeros(len(s))
        arcs = self.arc_index(s)
        for sp in self.specs:
            sel = np.nonzero(arcs == sp.index)[0]
            if len(sel):
                out[sel], log2j[sel] = self._flow_batch(sp.index, v[sel, sp.index - 1], s[sel])
        return out, log2j

    def F_apply(self, v, s: float) -> float:
        out, _ = self.apply_batch(np.asarray(v, dtype=float)[None, :], np.array([s]))
        return float(out[0])

    def F_log2_derivative(self, v, s: float) -> float:
        _, lj = self.apply_batch(np.asarray(v, dtype=float)[None, :], np.array([s]))
        return float(lj[0])

    def F_derivative(self, v, s: float) -> float:
        return float(2.0 ** self.F_log2_derivative(v, s))

    def log2_derivative_curve(self, i: int, s: float, times) -> np.ndarray:
        """log2 d/ds of the time-t maps of flow i at s, for many t, from one dense solve."""
        sp = self.spec(i)
        times = np.asarray(times, dtype=float)
        if not sp.contains(s):
            return np.zeros(times.shape)
        if s == sp.center:
            return times * sp.rate / LN2
        out = np.zeros(times.shape)
        flat = times.ravel()
        res = out.ravel()

        def rhs(_, y):
            d = y[0] - sp.center
            u = np.array([d / sp.radius])
            return [sp.rate * d * bump(u)[0], sp.rate * _bump_log_slope_factor(u)[0]]

        for sign in (1.0, -1.0):
            sel = np.nonzero(sign * flat > 0)[0]
            if not len(sel):
                continue
            t_end = float(np.max(sign * flat[sel])) * sign
            sol = solve_ivp(
                rhs, (0.0, t_end), [s, 0.0], method="DOP853", rtol=self.rtol,
                atol=self.atol, dense_output=True, max_step=1.0,
            )
            if not sol.success:
                raise RuntimeError(f"flow integration failed: {sol.message}")
            res[sel] = sol.sol(flat[sel])[1] / LN2
        return res.reshape(times.shape)

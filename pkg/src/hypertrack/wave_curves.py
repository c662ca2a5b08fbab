"""Wave curves and wave packets.

A j-wave packet issued from a left state is built in three steps:

1. a working geometric curve ``c`` parametrised by the global parameter
   ``m = lhat . u`` (the straight line for scalar laws; for systems a composite
   of integral curves and Hugoniot branches),
2. the reduced flux ``lhat . f(c(m))`` sampled along it,
3. the lower convex hull of that reduced flux in the traversal coordinate
   ``t = |m - m_left|``. Contact intervals are rarefactions, bridges are shocks,
   and the hull slope is the wave speed.

All packet geometry is stored in the traversal coordinate so that increasing and
decreasing data share one code path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import brentq, root

from .errors import (
    BranchJump,
    HullDegeneracy,
    NewtonDivergence,
    NotOnHugoniot,
    OutOfBall,
    SpeedsDiffer,
)
from .system import HyperbolicSystem


@dataclass(frozen=True)
class CurveSample:
    m: float
    state: np.ndarray
    speed: float


class CurveSamples(list):
    """List of :class:`CurveSample` with a flag set when the curve left the ball."""

    exited_ball: bool = False


@dataclass(frozen=True)
class Shock:
    u_minus: np.ndarray
    u_plus: np.ndarray
    sigma: float
    m_minus: float = float("nan")
    m_plus: float = float("nan")
    kind = "shock"


@dataclass(frozen=True)
class Rarefaction:
    samples: tuple
    speed_lo: float
    speed_hi: float
    m_start: float = float("nan")
    m_end: float = float("nan")
    kind = "rarefaction"


# -- working curves ---------------------------------------------------------------


class _ScalarCurve:
    """Exact straight curve of a scalar law, in traversal coordinate."""

    def __init__(self, system: HyperbolicSystem, m_left: float, direction: float):
        self.system = system
        self.m_left = m_left
        self.d = direction
        self.lhat = float(system.lhat[0])

    def u(self, t):
        return (self.m_left + self.d * np.asarray(t, dtype=float)) / self.lhat

    def state(self, t: float) -> np.ndarray:
        return np.array([float(self.u(t))])

    def lam(self, t):
        return self.system.scalar_speed(self.u(t))

    def reduced(self, t):
        return self.d * self.lhat * self.system.scalar_flux(self.u(t))

    def precise_lam(self, t):
        return self.lam(t)

    def precise_state(self, t: float, lo: float, hi: float) -> np.ndarray:
        return self.state(t)


class _SampledCurve:
    """Piecewise-linear interpolation of a sampled composite curve."""

    def __init__(self, ts: np.ndarray, states: np.ndarray, lams: np.ndarray, system=None, family=None,
                 direction=1.0):
        self.ts = ts
        self.states = states
        self.lams = lams
        self.system = system
        self.family = family
        self.d = direction

    def state(self, t: float) -> np.ndarray:
        return np.array([np.interp(t, self.ts, self.states[:, k]) for k in range(self.states.shape[1])])

    def lam(self, t):
        return np.interp(t, self.ts, self.lams)

    def precise_state(self, t: float, lo: float, hi: float) -> np.ndarray:
        """State at ``t`` by one RK4 step off the nearest sample inside the rarefaction ``[lo, hi]``."""
        if self.system is None:
            return self.state(t)
        inside = np.nonzero((self.ts >= lo - 1e-14) & (self.ts <= hi + 1e-14))[0]
        if len(inside) == 0:
            return self.state(t)
        k = int(inside[np.argmin(np.abs(self.ts[inside] - t))])
        dt = t - self.ts[k]
        if dt == 0.0:
            return self.states[k].copy()
        w = _rk4(self.system, self.family, self.states[k], self.d * dt)
        m = self.system.mu(self.states[k]) + self.d * dt
        return w + (m - self.system.mu(w)) * self.system.r_tilde(w, self.family)

    def precise_lam(self, t):
        """Speeds at ``t`` from one RK4 step off the nearest sample (integral-curve parts only)."""
        if self.system is None:
            return self.lam(t)
        t = np.atleast_1d(np.asarray(t, dtype=float))
        idx = np.clip(np.searchsorted(self.ts, t), 1, len(self.ts) - 1)
        idx = np.where(np.abs(t - self.ts[idx - 1]) <= np.abs(self.ts[idx] - t), idx - 1, idx)
        out = np.empty(len(t))
        for n, (tt, k) in enumerate(zip(t, idx)):
            dt = tt - self.ts[k]
            w = self.states[k] if dt == 0.0 else _rk4(self.system, self.family, self.states[k], self.d * dt)
            out[n] = self.system.lam(w, self.family)
        return out


# -- packets ----------------------------------------------------------------------


@dataclass
class WavePacket:
    """One j-wave fan between ``u_left`` and ``u_right``.

    ``knots`` are the piece boundaries in the traversal coordinate, ``kinds``
    holds ``"shock"`` or ``"rarefaction"`` per piece and ``sigmas`` the shock
    speeds (``nan`` for rarefaction pieces).
    """

    system: HyperbolicSystem = field(repr=False)
    family: int
    u_left: np.ndarray
    u_right: np.ndarray
    m_left: float
    m_right: float
    knots: np.ndarray
    kinds: list
    sigmas: np.ndarray
    curve_obj: object = field(repr=False, default=None)
    diagnostics: dict = field(default_factory=dict, repr=False)

    @property
    def strength(self) -> float:
        return self.m_right - self.m_left

    @property
    def direction(self) -> float:
        return 1.0 if self.m_right >= self.m_left else -1.0

    @property
    def length(self) -> float:
        return abs(self.m_right - self.m_left)

    @property
    def is_empty(self) -> bool:
        return self.length == 0.0

    def _t(self, m) -> np.ndarray:
        return self.direction * (np.asarray(m, dtype=float) - self.m_left)

    def _piece(self, t: float) -> int:
        k = int(np.searchsorted(self.knots, t, side="right")) - 1
        return min(max(k, 0), len(self.kinds) - 1)

    def speed_t(self, t: float) -> float:
        if self.is_empty:
            return self.system.lam(self.u_left, self.family)
        k = self._piece(t)
        if self.kinds[k] == "shock":
            return float(self.sigmas[k])
        return float(self.curve_obj.lam(min(max(t, self.knots[k]), self.knots[k + 1])))

    def speed_fn(self, m) -> float:
        return self.speed_t(float(self._t(m)))

    def state_t(self, t: float) -> np.ndarray:
        if t <= 0.0:
            return self.u_left.copy()
        if t >= self.length:
            return self.u_right.copy()
        k = self._piece(t)
        if self.kinds[k] == "rarefaction" and hasattr(self.curve_obj, "precise_state"):
            return self.curve_obj.precise_state(t, self.knots[k], self.knots[k + 1])
        return self.curve_obj.state(t)

    def state_at(self, m: float) -> np.ndarray:
        return self.state_t(float(self._t(m)))

    @property
    def speed_min(self) -> float:
        return self.speed_t(0.0)

    @property
    def speed_max(self) -> float:
        return self.speed_t(self.length)

    @property
    def isv(self) -> float:
        return self.speed_max - self.speed_min

    @property
    def pieces(self) -> list:
        out = []
        d = self.direction
        for k, kind in enumerate(self.kinds):
            ta, tb = self.knots[k], self.knots[k + 1]
            ma, mb = self.m_left + d * ta, self.m_left + d * tb
            if kind == "shock":
                out.append(Shock(self.state_t(ta), self.state_t(tb), float(self.sigmas[k]), ma, mb))
            else:
                ts = np.linspace(ta, tb, 9)
                samples = tuple(CurveSample(self.m_left + d * t, self.state_t(t), self.speed_t(t)) for t in ts)
                out.append(Rarefaction(samples, self.speed_t(ta), self.speed_t(tb), ma, mb))
        return out

    @property
    def curve(self) -> list:
        if self.is_empty:
            return [CurveSample(self.m_left, self.u_left.copy(), self.speed_min)]
        n = max(16, int(self.length / 1e-3))
        ts = np.linspace(0.0, self.length, n + 1)
        d = self.direction
        return [CurveSample(self.m_left + d * t, self.state_t(t), self.speed_t(t)) for t in ts]

    def t_at_speed(self, v: float) -> float:
        """Smallest traversal coordinate where the speed reaches ``v``."""
        if v <= self.speed_min:
            return 0.0
        for k, kind in enumerate(self.kinds):
            ta, tb = self.knots[k], self.knots[k + 1]
            if self.speed_t(tb) < v:
                continue
            if kind == "shock":
                return float(ta)
            g = lambda t: self.speed_t(t) - v  # noqa: E731
            if g(ta) >= 0:
                return float(ta)
            return float(brentq(g, ta, tb, xtol=1e-15, rtol=1e-15))
        return self.length

    def restrict(self, ta: float, tb: float) -> "WavePacket":
        """Sub-packet between traversal coordinates ``ta < tb`` on the same curve."""
        ta = max(0.0, ta)
        tb = min(self.length, tb)
        d = self.direction
        if tb <= ta:
            u = self.state_t(ta)
            m = self.m_left + d * ta
            return empty_packet(self.system, self.family, u, m)
        inner = [k for k in self.knots if ta < k < tb]
        knots = np.array([ta] + inner + [tb])
        kinds, sigmas = [], []
        for a in knots[:-1]:
            k = self._piece(a)
            kinds.append(self.kinds[k])
            sigmas.append(self.sigmas[k])
        return WavePacket(
            self.system, self.family, self.state_t(ta), self.state_t(tb),
            self.m_left + d * ta, self.m_left + d * tb,
            knots - ta, kinds, np.array(sigmas),
            _ShiftedCurve(self.curve_obj, ta), dict(parent=self.diagnostics.get("kind", "packet")),
        )

    def speed_profile(self, per_piece: int = 8, lattice: float | None = None) -> SpeedProfile:
        """Piecewise-linear interpolant of the speed function (exact on shock pieces).

        Rarefaction pieces get ``per_piece`` equal sub-intervals, or, when
        ``lattice`` is given, nodes at every multiple of ``lattice`` in the global
        parameter so that packets sharing a curve share their nodes.
        """
        if self.is_empty:
            return SpeedProfile.constant(0.0, self.speed_min)
        d = self.direction
        ts, vs = [0.0], [self.speed_t(0.0)]
        for k, kind in enumerate(self.kinds):
            ta, tb = self.knots[k], self.knots[k + 1]
            if tb <= ta:
                continue
            if kind == "shock":
                ts.append(tb)
                vs.append(self.sigmas[k])
                vs[-2] = self.sigmas[k]
            else:
                if lattice is None:
                    nodes = np.linspace(ta, tb, per_piece + 1)[1:]
                else:
                    ma, mb = sorted((self.m_left + d * ta, self.m_left + d * tb))
                    grid = np.arange(math.floor(ma / lattice) + 1, math.ceil(mb / lattice)) * lattice
                    inner = np.sort(d * (grid - self.m_left))
                    nodes = np.concatenate([inner[(inner > ta) & (inner < tb)], [tb]])
                ts.extend(nodes.tolist())
                lam = self.curve_obj.precise_lam if lattice is not None else self.curve_obj.lam
                vs.extend(np.atleast_1d(np.asarray(lam(nodes), dtype=float)).tolist())
        vs = np.maximum.accumulate(np.asarray(vs))
        return SpeedProfile(np.asarray(ts), vs)

    def speed_samples(self, per_piece: int = 8) -> tuple[np.ndarray, np.ndarray]:
        """Midpoint quadrature of the speed function: (weights, speeds)."""
        w, s = [], []
        for k, kind in enumerate(self.kinds):
            ta, tb = self.knots[k], self.knots[k + 1]
            if tb <= ta:
                continue
            if kind == "shock":
                w.append(tb - ta)
                s.append(self.sigmas[k])
            else:
                h = (tb - ta) / per_piece
                mids = ta + h * (np.arange(per_piece) + 0.5)
                w.extend([h] * per_piece)
                s.extend(np.asarray(self.curve_obj.lam(mids), dtype=float).tolist()
                         if isinstance(self.curve_obj, (_ScalarCurve, _ShiftedCurve, _SampledCurve))
                         else [self.speed_t(t) for t in mids])
        return np.asarray(w, dtype=float), np.asarray(s, dtype=float)


@dataclass(frozen=True)
class SpeedProfile:
    """Continuous piecewise-linear speed function on [0, length] of the traversal coordinate."""

    ts: np.ndarray
    vs: np.ndarray

    @property
    def length(self) -> float:
        return float(self.ts[-1] - self.ts[0]) if len(self.ts) else 0.0

    def __call__(self, t):
        return np.interp(t, self.ts, self.vs)

    def restrict(self, ta: float, tb: float) -> "SpeedProfile":
        inner = (self.ts > ta) & (self.ts < tb)
        ts = np.concatenate([[ta], self.ts[inner], [tb]])
        return SpeedProfile(ts - ta, np.interp(ts, self.ts, self.vs))

    @classmethod
    def constant(cls, length: float, speed: float) -> "SpeedProfile":
        return cls(np.array([0.0, length]), np.array([speed, speed]))


class _ShiftedCurve:
    def __init__(self, base, offset: float):
        if isinstance(base, _ShiftedCurve):
            offset += base.offset
            base = base.base
        self.base = base
        self.offset = offset

    def state(self, t):
        return self.base.state(t + self.offset)

    def lam(self, t):
        return self.base.lam(np.asarray(t) + self.offset)

    def precise_lam(self, t):
        return self.base.precise_lam(np.asarray(t) + self.offset)

    def precise_state(self, t: float, lo: float, hi: float) -> np.ndarray:
        return self.base.precise_state(t + self.offset, lo + self.offset, hi + self.offset)


def empty_packet(system: HyperbolicSystem, j: int, u: np.ndarray, m: float | None = None) -> WavePacket:
    u = np.asarray(u, dtype=float).copy()
    m = system.mu(u) if m is None else m
    return WavePacket(system, j, u, u.copy(), m, m, np.array([0.0, 0.0]), ["rarefaction"],
                      np.array([np.nan]), None, {"kind": "empty"})


# -- hull -------------------------------------------------------------------------


def lower_hull(t: Sequence[float], f: Sequence[float]) -> list[int]:
    """Indices of the lower convex hull of points sorted by abscissa (monotone chain)."""
    out: list[int] = []
    for i in range(len(t)):
        ti, fi = t[i], f[i]
        while len(out) >= 2:
            o, a = out[-2], out[-1]
            if (t[a] - t[o]) * (fi - f[o]) - (f[a] - f[o]) * (ti - t[o]) <= 0.0:
                out.pop()
            else:
                break
        out.append(i)
    return out


def _segments(ts: np.ndarray, fs: np.ndarray, tol: float, nondegenerate: bool) -> list[list]:
    """Split [ts[0], ts[-1]] into contact ("rarefaction") and bridge ("shock") intervals."""
    verts = lower_hull(ts.tolist(), fs.tolist())
    segs: list[list] = []
    start = 0
    for a, b in zip(verts[:-1], verts[1:]):
        if b - a <= 1:
            continue
        chord = fs[a] + (ts[a + 1:b] - ts[a]) * (fs[b] - fs[a]) / (ts[b] - ts[a])
        gap = float(np.max(fs[a + 1:b] - chord))
        if gap <= tol and nondegenerate and b - a > 8:
            raise HullDegeneracy(f"reduced flux affine on [{ts[a]}, {ts[b]}]")
        if a > start:
            segs.append(["rarefaction", a, None, start, a])
        segs.append(["shock", a, b, a, b])
        start = b
    if start < len(ts) - 1:
        segs.append(["rarefaction", start, None, start, len(ts) - 1])
    return [[kind, float(ts[i0]), float(ts[i1])] for kind, _, _, i0, i1 in segs]


def _refine_scalar(segs: list[list], curve: _ScalarCurve, length: float, h: float) -> list[list]:
    """Move shock endpoints onto the exact tangency points of the reduced flux."""
    F = curve.reduced
    dF = curve.lam

    def slope(a, b):
        return float((F(b) - F(a)) / (b - a))

    first, last = segs[0], segs[-1]
    if first[0] == "shock" and float(dF(first[1])) < slope(first[1], first[2]) - 1e-14:
        segs.insert(0, ["rarefaction", 0.0, 0.0])
    if last[0] == "shock" and float(dF(last[2])) > slope(last[1], last[2]) + 1e-14:
        segs.append(["rarefaction", length, length])

    def tangent(fixed, guess, lo, hi):
        def g(t):
            return float(F(t) - F(fixed) - dF(t) * (t - fixed))
        width = 2.0 * h
        for _ in range(60):
            a, b = max(lo, guess - width), min(hi, guess + width)
            ga, gb = g(a), g(b)
            if ga == 0.0:
                return a
            if gb == 0.0:
                return b
            if ga * gb < 0:
                # plain bisection keeps the refinement independent of the oracle
                for _ in range(200):
                    mid = 0.5 * (a + b)
                    gm = g(mid)
                    if gm == 0.0 or b - a < 1e-15:
                        return mid
                    if ga * gm < 0:
                        b = mid
                    else:
                        a, ga = mid, gm
                return 0.5 * (a + b)
            if a <= lo and b >= hi:
                break
            width *= 2.0
        return guess

    n = len(segs)
    for k, seg in enumerate(segs):
        if seg[0] != "shock":
            continue
        a_int, b_int = k > 0, k < n - 1
        a, b = seg[1], seg[2]
        if a_int and not b_int:
            seg[1] = tangent(b, a, 0.0, b - 1e-13)
        elif b_int and not a_int:
            seg[2] = tangent(a, b, a + 1e-13, length)
        elif a_int and b_int:
            def eqs(z):
                x, y = z
                s = (F(y) - F(x)) / (y - x)
                return [float(dF(x) - s), float(dF(y) - s)]
            sol = root(eqs, [a, b], tol=1e-15)
            if sol.success and 0.0 <= sol.x[0] < sol.x[1] <= length:
                seg[1], seg[2] = float(sol.x[0]), float(sol.x[1])
    for k, seg in enumerate(segs):
        if seg[0] == "rarefaction":
            if k > 0:
                seg[1] = segs[k - 1][2]
            if k < n - 1:
                seg[2] = segs[k + 1][1]
    kept = [s for s in segs if not (s[0] == "rarefaction" and s[2] - s[1] <= 1e-14)]
    return kept or segs[:1]


# -- integral and Hugoniot curves -------------------------------------------------------


def _rk4(system: HyperbolicSystem, j: int, w: np.ndarray, dm: float) -> np.ndarray:
    k1 = system.r_tilde(w, j)
    k2 = system.r_tilde(w + 0.5 * dm * k1, j)
    k3 = system.r_tilde(w + 0.5 * dm * k2, j)
    k4 = system.r_tilde(w + dm * k3, j)
    return w + dm / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def default_step(system: HyperbolicSystem) -> float:
    return 1e-3 * system.delta2


def rarefaction_curve(system: HyperbolicSystem, j: int, u0, m_target: float,
                      h: float | None = None) -> CurveSamples:
    """Integral curve of the renormalised eigenvector field by fixed-step RK4."""
    u0 = system.check_state(u0)
    h = default_step(system) if h is None else h
    m0 = system.mu(u0)
    span = m_target - m0
    n = max(1, int(math.ceil(abs(span) / h - 1e-12)))
    dm = span / n
    out = CurveSamples([CurveSample(m0, u0.copy(), system.lam(u0, j))])
    w = u0.copy()
    for k in range(1, n + 1):
        w = _rk4(system, j, w, dm)
        m = m0 + k * dm
        # remove the O(h^5) drift of the linear constraint exactly
        w = w + (m - system.mu(w)) * system.r_tilde(w, j)
        if not system.in_ball(w):
            out.exited_ball = True
            break
        out.append(CurveSample(m, w.copy(), system.lam(w, j)))
    return out


def _hugoniot_newton(system: HyperbolicSystem, base: np.ndarray, f_base: np.ndarray, m: float,
                     v: np.ndarray, sigma: float, tol: float = 1e-12, maxit: int = 40):
    n = system.n
    lhat = system.lhat
    jac = np.zeros((n + 1, n + 1))
    jac[n, :n] = lhat
    for _ in range(maxit):
        fv = system.flux(v)
        res = np.concatenate([fv - f_base - sigma * (v - base), [lhat @ v - m]])
        if np.max(np.abs(res)) < tol:
            return v, sigma
        jac[:n, :n] = system.jacobian(v) - sigma * np.eye(n)
        jac[:n, n] = -(v - base)
        try:
            step = np.linalg.solve(jac, -res)
        except np.linalg.LinAlgError:
            break
        v = v + step[:n]
        sigma = sigma + step[n]
        if not np.all(np.isfinite(v)):
            break
    fv = system.flux(v)
    res = np.concatenate([fv - f_base - sigma * (v - base), [lhat @ v - m]])
    if np.max(np.abs(res)) < 1e-10:
        return v, sigma
    raise NewtonDivergence(f"Hugoniot Newton failed at m={m}", m)


def hugoniot_curve(system: HyperbolicSystem, j: int, u_minus, m_target: float,
                   h: float | None = None) -> CurveSamples:
    """Continuation of the j-Hugoniot branch through ``u_minus``; speeds are shock speeds."""
    u_minus = system.check_state(u_minus)
    h = default_step(system) if h is None else h
    m0 = system.mu(u_minus)
    span = m_target - m0
    n = max(1, int(math.ceil(abs(span) / h - 1e-12)))
    dm = span / n
    lam0, rt0 = system.lam_and_r_tilde(u_minus, j)
    out = CurveSamples([CurveSample(m0, u_minus.copy(), lam0)])
    f_base = system.flux(u_minus)
    v, sigma = u_minus.copy(), lam0
    prev = u_minus.copy()
    for k in range(1, n + 1):
        m = m0 + k * dm
        seed = u_minus + (m - m0) * rt0 if k == 1 else v + (v - prev)
        prev = v
        v, sigma = _hugoniot_newton(system, u_minus, f_base, m, seed, sigma)
        if np.linalg.norm(v - prev) > 10.0 * abs(dm) * max(1.0, np.linalg.norm(rt0)):
            raise BranchJump(f"Hugoniot continuation jumped at m={m}")
        if not system.in_ball(v):
            out.exited_ball = True
            break
        out.append(CurveSample(m, v.copy(), float(sigma)))
    return out


def shock_speed(system: HyperbolicSystem, u_minus, u_plus) -> float:
    """Least-squares Rankine-Hugoniot speed of a jump."""
    du = np.asarray(u_plus, dtype=float) - np.asarray(u_minus, dtype=float)
    df = system.flux(np.asarray(u_plus, dtype=float)) - system.flux(np.asarray(u_minus, dtype=float))
    nrm = float(du @ du)
    return float(du @ df / nrm) if nrm > 0 else float("nan")


def rh_residual(system: HyperbolicSystem, u_minus, u_plus, sigma: float) -> float:
    u_minus = np.asarray(u_minus, dtype=float)
    u_plus = np.asarray(u_plus, dtype=float)
    return float(np.linalg.norm(-sigma * (u_plus - u_minus) + system.flux(u_plus) - system.flux(u_minus)))


def reduced_flux(system: HyperbolicSystem, j: int, curve: Sequence[CurveSample]) -> np.ndarray:
    """lhat . f along the samples of a curve."""
    return np.array([float(system.lhat @ system.flux(np.asarray(c.state, dtype=float))) for c in curve])


# -- composite curve for systems ---------------------------------------------------


def contact_slope_cp(p: int) -> float:
    """Negative root of (1 - c^(p+2)) / (1 - c) = (p + 2) c^(p+1), by bisection on (-1, 0)."""

    def g(c):
        return sum(c ** k for k in range(p + 2)) - (p + 2) * c ** (p + 1)

    a, b = -1.0, 0.0
    ga = g(a)
    for _ in range(200):
        mid = 0.5 * (a + b)
        gm = g(mid)
        if gm == 0.0 or b - a < 1e-16:
            return mid
        if ga * gm < 0:
            b = mid
        else:
            a, ga = mid, gm
    return 0.5 * (a + b)


def _composite_curve(system: HyperbolicSystem, j: int, u0: np.ndarray, d: float, length: float,
                     h: float, endpoint_only: bool = False):
    """Sample the working curve from ``u0`` in direction ``d`` over traversal length ``length``.

    Phases: ``rare`` follows the integral curve while the speed increases,
    ``shock`` follows a Hugoniot branch while the characteristic speed at the
    far end stays below the shock speed, ``mixed`` follows shocks attached to
    the current rarefaction run by a left contact.
    """
    m0 = system.mu(u0)
    n = max(1, int(math.ceil(length / h - 1e-12)))
    dt = length / n
    lam0, rt0 = system.lam_and_r_tilde(u0, j)
    probe = u0 + 1e-7 * d * rt0
    rising = system.lam(probe, j) > lam0
    diag = {"phases": [], "proxy": False}

    ts = [0.0]
    states = [u0.copy()]
    lams = [lam0]
    phase = "rare" if rising else "shock"
    base, f_base = u0.copy(), system.flux(u0)
    run_start = 0
    v, sigma, prev_v = u0.copy(), lam0, u0.copy()
    tau = 0.0
    cp = contact_slope_cp(1)
    diag["phases"].append((0.0, phase))

    t_crit = 0.0

    def attach(tq):
        # state of the current rarefaction run at traversal coordinate tq
        i = int(np.searchsorted(ts, tq, side="right")) - 1
        i = min(max(i, run_start), len(ts) - 1)
        w = states[i]
        if tq != ts[i]:
            w = _rk4(system, j, w, d * (tq - ts[i]))
            w = w + (m0 + d * tq - system.mu(w)) * system.r_tilde(w, j)
        return w

    for k in range(1, n + 1):
        t = k * dt
        m = m0 + d * t
        w_prev, lam_prev = states[-1], lams[-1]
        if phase == "rare":
            w = _rk4(system, j, w_prev, d * dt)
            w = w + (m - system.mu(w)) * system.r_tilde(w, j)
            lam = system.lam(w, j)
            if lam <= lam_prev and k - 1 > run_start:
                # crossed a critical point of the characteristic speed
                t_crit = ts[-1]
                tau = max(ts[run_start], t_crit + cp * (t - t_crit))
                v, sigma = w, lam_prev
                phase = "mixed"
                diag["phases"].append((t_crit, phase))
            elif lam <= lam_prev:
                phase = "shock"
                base, f_base = w_prev.copy(), system.flux(w_prev)
                v, sigma, prev_v = w_prev.copy(), lam_prev, w_prev.copy()
                diag["phases"].append((ts[-1], phase))
            else:
                ts.append(t)
                states.append(w)
                lams.append(lam)
                continue
        if phase == "mixed":
            cache = {}

            def contact_gap(tq, m=m):
                wt = attach(tq)
                vv, sg = _hugoniot_newton(system, wt, system.flux(wt), m, v, sigma)
                cache[tq] = (vv, sg)
                return sg - system.lam(wt, j)

            t_start = ts[run_start]
            try:
                if contact_gap(t_start) <= 0.0:
                    # the whole rarefaction run is swallowed by the shock
                    phase = "shock"
                    base = states[run_start].copy()
                    f_base = system.flux(base)
                    v, sigma = cache[t_start]
                    prev_v = v.copy()
                    diag["phases"].append((t, phase))
                    diag["swallowed"] = True
                else:
                    lo = max(t_start, tau - 4.0 * dt)
                    if lo > t_start and contact_gap(lo) <= 0.0:
                        lo = t_start
                    tau = brentq(contact_gap, lo, t_crit, xtol=1e-15, rtol=1e-15)
                    contact_gap(tau)
                    v, sigma = cache[tau]
                    lam_v = system.lam(v, j)
                    if lam_v > sigma:
                        phase = "rare"
                        run_start = len(ts)
                        diag["phases"].append((t, phase))
                    ts.append(t)
                    states.append(v.copy())
                    lams.append(lam_v)
                    continue
            except (NewtonDivergence, ValueError):
                # no bracketed contact: keep following the integral curve as a proxy
                diag["proxy"] = True
                phase = "rare"
                w = _rk4(system, j, w_prev, d * dt)
                w = w + (m - system.mu(w)) * system.r_tilde(w, j)
                ts.append(t)
                states.append(w)
                lams.append(system.lam(w, j))
                continue
        # shock phase
        seed = v + (v - prev_v) if len(ts) > 1 and not np.allclose(v, base) else base + d * dt * system.r_tilde(base, j)
        prev_v = v.copy()
        v, sigma = _hugoniot_newton(system, base, f_base, m, seed, sigma)
        if np.linalg.norm(v - prev_v) > 10.0 * dt * max(1.0, float(np.linalg.norm(rt0))):
            raise BranchJump(f"Hugoniot continuation jumped at m={m}")
        lam_v = system.lam(v, j)
        if lam_v > sigma:
            phase = "rare"
            run_start = len(ts)
            diag["phases"].append((t, phase))
        ts.append(t)
        states.append(v.copy())
        lams.append(lam_v)

    if not system.in_ball(states[-1], system.delta1):
        raise OutOfBall(f"wave curve leaves the ball at {states[-1]}")
    return np.asarray(ts), np.asarray(states), np.asarray(lams), diag


def curve_endpoint(system: HyperbolicSystem, j: int, u_minus, s: float, h: float | None = None) -> np.ndarray:
    """State psi_j(mu(u_minus) + s; u_minus)."""
    u_minus = np.asarray(u_minus, dtype=float)
    if s == 0.0:
        return u_minus.copy()
    if system.n == 1:
        return np.array([(system.mu(u_minus) + s) / system.lhat[0]])
    h = _packet_step(system, abs(s), h)
    n = max(8, int(math.ceil(abs(s) / h - 1e-12)))
    ts, states, _, _ = _composite_curve(system, j, u_minus, 1.0 if s > 0 else -1.0, abs(s), abs(s) / n, True)
    return states[-1].copy()


def _packet_step(system: HyperbolicSystem, length: float, h: float | None) -> float:
    if h is not None:
        return h
    return default_step(system)


def wave_curve(system: HyperbolicSystem, j: int, u_minus, m_target: float,
               h: float | None = None, check: bool = True) -> WavePacket:
    """Wave packet connecting ``u_minus`` to the point of parameter ``m_target`` on its j-wave curve."""
    u_minus = system.check_state(u_minus) if check else np.asarray(u_minus, dtype=float)
    m_left = system.mu(u_minus)
    span = float(m_target) - m_left
    if span == 0.0:
        return empty_packet(system, j, u_minus, m_left)
    d = 1.0 if span > 0 else -1.0
    length = abs(span)
    h = _packet_step(system, length, h)
    n = max(8, int(math.ceil(length / h - 1e-12)))

    if system.n == 1:
        curve = _ScalarCurve(system, m_left, d)
        ts = np.linspace(0.0, length, n + 1)
        fs = curve.reduced(ts)
        tol = 1e-10 * (1.0 + float(np.max(np.abs(fs))))
        segs = _segments(ts, fs, tol, system.nondegenerate)
        segs = _refine_scalar(segs, curve, length, length / n)
        u_right = np.array([float(m_target) / system.lhat[0]])
        diag = {"kind": "scalar"}
    else:
        ts, states, lams, diag = _composite_curve(system, j, u_minus, d, length, length / n)
        fs = np.array([d * float(system.lhat @ system.flux(w)) for w in states])
        tol = 1e-10 * (1.0 + float(np.max(np.abs(fs))))
        segs = _segments(ts, fs, tol, system.nondegenerate)
        curve = _SampledCurve(ts, states, lams, system, j, d)
        u_right = states[-1].copy()
        diag["kind"] = "system"

    knots = [segs[0][1]] + [s[2] for s in segs]
    knots[0], knots[-1] = 0.0, length
    kinds, sigmas = [], []
    for kind, a, b in segs:
        kinds.append(kind)
        if kind == "shock":
            if system.n == 1:
                sigmas.append(float((curve.reduced(b) - curve.reduced(a)) / (b - a)))
            else:
                fa = float(np.interp(a, ts, fs))
                fb = float(np.interp(b, ts, fs))
                sigmas.append((fb - fa) / (b - a))
        else:
            sigmas.append(float("nan"))
    return WavePacket(system, j, u_minus.copy(), u_right, m_left, float(m_target),
                      np.array(knots, dtype=float), kinds, np.array(sigmas), curve, diag)


# -- checks on shocks and packets ---------------------------------------------------------


def inner_speed_variation(packet: WavePacket) -> float:
    return packet.isv


class SplitResult(NamedTuple):
    left: WavePacket
    right: WavePacket
    m: float
    snapped: bool


def split_packet(packet: WavePacket, m: float) -> SplitResult:
    """Split a packet at parameter ``m``; points inside a shock snap to its nearer endpoint."""
    t = float(packet._t(m))
    snapped = False
    if 0.0 < t < packet.length:
        k = packet._piece(t)
        ta, tb = packet.knots[k], packet.knots[k + 1]
        if packet.kinds[k] == "shock" and ta < t < tb:
            t = ta if t - ta <= tb - t else tb
            snapped = True
    t = min(max(t, 0.0), packet.length)
    m_used = packet.m_left + packet.direction * t
    return SplitResult(packet.restrict(0.0, t), packet.restrict(t, packet.length), m_used, snapped)


@dataclass
class AdmissibilityReport:
    admissible: bool
    right_side_admissible: bool
    margin: float

    def __bool__(self) -> bool:
        return self.admissible


def _secant_speeds(system: HyperbolicSystem, j: int, u_from: np.ndarray, m_to: float, n: int) -> np.ndarray:
    m0 = system.mu(u_from)
    if system.n == 1:
        ms = m0 + (m_to - m0) * np.linspace(0.0, 1.0, n + 1)[1:-1]
        us = ms / system.lhat[0]
        f = system.scalar_flux
        u0 = float(u_from[0])
        return (f(us) - f(u0)) / (us - u0)
    curve = hugoniot_curve(system, j, u_from, m_to, h=abs(m_to - m0) / n)
    return np.array([c.speed for c in curve[1:-1]])


def entropy_admissible(system: HyperbolicSystem, j: int, shock: Shock, n: int = 400,
                       tol: float = 1e-10, report: bool = False):
    """Liu criterion: the jump speed never exceeds the secant speed to intermediate Hugoniot states."""
    um = np.asarray(shock.u_minus, dtype=float)
    up = np.asarray(shock.u_plus, dtype=float)
    if rh_residual(system, um, up, shock.sigma) > 1e-8 * max(1.0, float(np.linalg.norm(up - um))):
        raise NotOnHugoniot("jump does not satisfy the Rankine-Hugoniot relation")
    if np.allclose(um, up):
        rep = AdmissibilityReport(True, True, 0.0)
        return rep if report else True
    left = _secant_speeds(system, j, um, system.mu(up), n)
    right = _secant_speeds(system, j, up, system.mu(um), n)
    margin_l = float(np.min(left - shock.sigma)) if len(left) else 0.0
    margin_r = float(np.min(shock.sigma - right)) if len(right) else 0.0
    rep = AdmissibilityReport(margin_l >= -tol, margin_r >= -tol, margin_l)
    return rep if report else rep.admissible


def coinciding_speed_compose(system: HyperbolicSystem, j: int, shock1: Shock, shock2: Shock,
                             tol: float = 1e-8) -> Shock:
    """Merge two chained admissible shocks travelling at the same speed."""
    if not np.allclose(shock1.u_plus, shock2.u_minus, atol=1e-12, rtol=0.0):
        raise ValueError("shocks are not chained")
    if np.allclose(shock2.u_minus, shock2.u_plus, atol=1e-14, rtol=0.0):
        return shock1
    if abs(shock1.sigma - shock2.sigma) >= tol:
        raise SpeedsDiffer(f"speeds {shock1.sigma} and {shock2.sigma} differ")
    merged = Shock(np.asarray(shock1.u_minus, dtype=float), np.asarray(shock2.u_plus, dtype=float),
                   shock1.sigma, system.mu(shock1.u_minus), system.mu(shock2.u_plus))
    if rh_residual(system, merged.u_minus, merged.u_plus, merged.sigma) > 1e-7:
        raise SpeedsDiffer("merged jump is not a Rankine-Hugoniot discontinuity")
    return merged

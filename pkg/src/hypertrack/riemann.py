"""Riemann solver, generalized angles and interaction potentials."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import CaseMismatch, ChainMismatch, NewtonDivergence, OutOfBall, ZeroStrength
from .system import HyperbolicSystem
from .wave_curves import SpeedProfile, WavePacket, curve_endpoint, default_step, empty_packet, wave_curve

NEWTON_TOL = 1e-10


@dataclass
class RiemannSolution:
    system: HyperbolicSystem = field(repr=False)
    u_left: np.ndarray
    u_right: np.ndarray
    strengths: np.ndarray
    packets: list
    intermediate_states: list
    residual: float = 0.0

    @property
    def speed_range(self) -> tuple[float, float]:
        live = [p for p in self.packets if not p.is_empty]
        if not live:
            return (0.0, 0.0)
        return (live[0].speed_min, live[-1].speed_max)


def _step_for(system: HyperbolicSystem, s: float, h: float | None) -> float:
    return default_step(system) if h is None else h


def _chain(system: HyperbolicSystem, u_l: np.ndarray, s: np.ndarray, h: float | None) -> list[np.ndarray]:
    states = [u_l]
    for j in range(1, system.n + 1):
        states.append(curve_endpoint(system, j, states[-1], float(s[j - 1]), _step_for(system, s[j - 1], h)))
    return states


def linear_strengths(system: HyperbolicSystem, u_l, u_r) -> np.ndarray:
    """First-order strengths: the jump projected on each family and measured in mu."""
    dec = system.eigensystem(np.asarray(u_l, dtype=float))
    du = np.asarray(u_r, dtype=float) - np.asarray(u_l, dtype=float)
    return np.array([float(dec.left[j] @ du) * float(system.lhat @ dec.right[j]) for j in range(system.n)])


def solve_riemann(system: HyperbolicSystem, u_l, u_r, h: float | None = None,
                  budget: float | None = None, maxit: int = 40) -> RiemannSolution:
    """Strengths of the N wave packets joining ``u_l`` to ``u_r``, with the packets themselves."""
    u_l = system.check_state(u_l, system.delta2)
    u_r = system.check_state(u_r, system.delta2)
    n = system.n
    if n == 1:
        m_r = system.mu(u_r)
        packet = wave_curve(system, 1, u_l, m_r, h=h)
        packet.u_right = u_r.copy()
        return RiemannSolution(system, u_l, u_r, np.array([packet.strength]), [packet], [u_l, u_r])
    limit = system.delta2 / 4.0 if budget is None else budget
    if np.linalg.norm(u_r - u_l) > limit:
        raise OutOfBall(f"jump {np.linalg.norm(u_r - u_l):.3g} exceeds the smallness budget {limit:.3g}")

    s = linear_strengths(system, u_l, u_r)
    if np.array_equal(u_l, u_r):
        s = np.zeros(n)
    res = _chain(system, u_l, s, h)[-1] - u_r
    norm = float(np.linalg.norm(res))
    # iterate past the acceptance tolerance until stagnation, so that the packets
    # chain to round-off and later re-solves see consistent states
    target = 1e-15 * (1.0 + float(np.linalg.norm(u_r)))
    for _ in range(maxit):
        if norm < target:
            break
        jac = np.empty((n, n))
        for k in range(n):
            eta = 1e-7 * max(1.0, abs(s[k]))
            sp = s.copy()
            sp[k] += eta
            jac[:, k] = (_chain(system, u_l, sp, h)[-1] - u_r - res) / eta
        step = np.linalg.solve(jac, -res)
        lam = 1.0
        for _ in range(21):
            trial = s + lam * step
            try:
                r_trial = _chain(system, u_l, trial, h)[-1] - u_r
            except (OutOfBall, NewtonDivergence):
                r_trial = None
            if r_trial is not None and np.linalg.norm(r_trial) < norm:
                s, res, norm = trial, r_trial, float(np.linalg.norm(r_trial))
                break
            lam *= 0.5
        else:
            if norm < NEWTON_TOL:
                break
            raise NewtonDivergence(f"Riemann Newton stalled at residual {norm:.3e}", float(np.sum(s)))
    if norm >= NEWTON_TOL:
        raise NewtonDivergence(f"Riemann Newton did not converge (residual {norm:.3e})", float(np.sum(s)))

    states = _chain(system, u_l, s, h)
    packets = []
    for j in range(1, n + 1):
        left = states[j - 1]
        if s[j - 1] == 0.0:
            packets.append(empty_packet(system, j, left))
            continue
        p = wave_curve(system, j, left, system.mu(left) + float(s[j - 1]), h=_step_for(system, s[j - 1], h),
                       check=False)
        p.u_right = states[j].copy()
        packets.append(p)
    packets[-1].u_right = u_r.copy()
    states[-1] = u_r.copy()
    return RiemannSolution(system, u_l, u_r, s, packets, states, norm)


def _t_sup_speed(packet: WavePacket, xi: float) -> float:
    """Largest traversal coordinate whose speed does not exceed ``xi``."""
    for k, kind in enumerate(packet.kinds):
        ta, tb = packet.knots[k], packet.knots[k + 1]
        if packet.speed_t(tb) <= xi:
            continue
        if kind == "shock":
            return float(ta)
        if packet.speed_t(ta) > xi:
            return float(ta)
        return float(brentq(lambda t: packet.speed_t(t) - xi, ta, tb, xtol=1e-15, rtol=1e-15))
    return packet.length


def sample_riemann(sol: RiemannSolution, xi: float) -> np.ndarray:
    """Self-similar profile at ``xi = x / t`` (right-continuous at shocks)."""
    for j, packet in enumerate(sol.packets):
        if packet.is_empty:
            continue
        if xi < packet.speed_min:
            return sol.intermediate_states[j].copy()
        if xi < packet.speed_max:
            return packet.state_t(_t_sup_speed(packet, xi))
    return sol.u_right.copy()


# -- generalized angle ------------------------------------------------------------


_BLOCK_ENTRIES = 2_000_000


def _excess_below(profile: SpeedProfile, v: np.ndarray) -> np.ndarray:
    """G(v) = integral over the profile of (v - speed)_+ , exact for piecewise-linear speeds."""
    t0, t1 = profile.ts[:-1], profile.ts[1:]
    b0, b1 = profile.vs[:-1], profile.vs[1:]
    length = t1 - t0
    v = np.asarray(v, dtype=float)
    out = np.empty(len(v))
    block = max(1, _BLOCK_ENTRIES // max(len(length), 1))
    for start in range(0, len(v), block):
        w = v[start:start + block, None]
        g0, g1 = w - b0, w - b1
        full = length * 0.5 * (g0 + g1)
        with np.errstate(divide="ignore", invalid="ignore"):
            part = length * g0 ** 2 / (2.0 * (b1 - b0))
        out[start:start + block] = np.where(g1 >= 0.0, full, np.where(g0 <= 0.0, 0.0, part)).sum(axis=1)
    return out


def angle_integral(left: SpeedProfile, right: SpeedProfile) -> float:
    """Double integral of (left speed - right speed)_+ over both traversal intervals.

    The inner integral is piecewise quadratic in the speed with breaks at the
    right profile's node values, so Simpson's rule on the induced sub-intervals
    of the left profile is exact.
    """
    if left.length == 0.0 or right.length == 0.0:
        return 0.0
    if left.vs[-1] <= right.vs[0]:
        return 0.0
    levels = np.unique(right.vs)
    x0, x1 = left.ts[:-1], left.ts[1:]
    a0, a1 = left.vs[:-1], left.vs[1:]
    keep = x1 > x0
    x0, x1, a0, a1 = x0[keep], x1[keep], a0[keep], a1[keep]
    # split every left segment where it crosses a node value of the right profile
    lo = np.searchsorted(levels, a0, side="right")
    hi = np.searchsorted(levels, a1, side="left")
    counts = np.maximum(hi - lo, 0)
    seg = np.repeat(np.arange(len(x0)), counts)
    offs = np.arange(int(counts.sum())) - np.repeat(np.cumsum(counts) - counts, counts)
    cut_v = levels[lo[seg] + offs]
    cut_x = x0[seg] + (cut_v - a0[seg]) / (a1[seg] - a0[seg]) * (x1[seg] - x0[seg])
    xs = np.concatenate([x0, cut_x, [x1[-1]]])
    owner = np.concatenate([np.arange(len(x0)), seg, [len(x0) - 1]])
    order = np.lexsort((xs, owner))
    xs, owner = xs[order], owner[order]
    # consecutive points of the same segment, plus each segment's right end
    xa = xs
    xb = np.concatenate([xs[1:], [x1[-1]]])
    same = np.concatenate([owner[1:] == owner[:-1], [False]])
    xb = np.where(same, xb, x1[owner])
    width = xb - xa
    good = width > 0
    xa, xb, owner = xa[good], xb[good], owner[good]
    slope = (a1[owner] - a0[owner]) / (x1[owner] - x0[owner])
    va = a0[owner] + slope * (xa - x0[owner])
    vb = a0[owner] + slope * (xb - x0[owner])
    vm = 0.5 * (va + vb)
    vals = _excess_below(right, np.concatenate([va, vm, vb]))
    k = len(xa)
    return float(np.sum((xb - xa) / 6.0 * (vals[:k] + 4.0 * vals[k:2 * k] + vals[2 * k:])))


def generalized_angle(system: HyperbolicSystem, j: int, packet1: WavePacket, packet2: WavePacket,
                      tol: float = 1e-8, max_doublings: int = 10, weight_tol: float = 1e-20) -> float:
    """Mean negative part of (speed in packet2 - speed in packet1) over both packets.

    The speed functions are interpolated with ``n`` nodes per rarefaction piece;
    ``n`` doubles until successive values differ by less than ``tol``, or until the
    change weighted by both packet lengths (its effect on the potential) drops
    below ``weight_tol``.
    """
    if packet1.is_empty or packet2.is_empty:
        raise ZeroStrength("generalized angle needs two nonzero packets")
    if packet1.family != j or packet2.family != j:
        raise ValueError("both packets must belong to the requested family")
    norm = packet1.length * packet2.length
    per_piece = 8
    prev = angle_integral(packet1.speed_profile(per_piece), packet2.speed_profile(per_piece)) / norm
    for _ in range(max_doublings):
        per_piece *= 2
        cur = angle_integral(packet1.speed_profile(per_piece), packet2.speed_profile(per_piece)) / norm
        if abs(cur - prev) < tol or abs(cur - prev) * norm < weight_tol:
            return cur
        prev = cur
    return prev


# -- interaction potential ------------------------------------------------------------


def pair_potential(family_left: int, strength_left: float, profile_left: SpeedProfile | None,
                   family_right: int, strength_right: float, profile_right: SpeedProfile | None) -> float:
    """Potential of a wave followed (on its right) by another wave.

    Families are 1-based; a faster family on the left is approaching. Same-family
    waves of one sign contribute through the generalized angle, computed from
    the given speed profiles.
    """
    prod = abs(strength_left * strength_right)
    if prod == 0.0:
        return 0.0
    if family_left > family_right:
        return prod
    if family_left < family_right:
        return 0.0
    if strength_left * strength_right < 0.0:
        return prod
    return angle_integral(profile_left, profile_right)


@dataclass
class InteractionQuantities:
    Q: float
    I: float
    theta: dict = field(default_factory=dict)


def interaction_potential(system: HyperbolicSystem, sol_lm: RiemannSolution, sol_mr: RiemannSolution,
                          per_piece: int | None = None) -> InteractionQuantities:
    """Potential between the waves of two adjacent Riemann solutions; the amount equals it."""
    if not np.allclose(sol_lm.u_right, sol_mr.u_left, atol=1e-12, rtol=0.0):
        raise ChainMismatch("middle states differ")
    total = 0.0
    thetas = {}
    for pa in sol_lm.packets:
        if pa.is_empty:
            continue
        for pb in sol_mr.packets:
            if pb.is_empty or pa.family < pb.family:
                continue
            if pa.family == pb.family and pa.strength * pb.strength > 0:
                if per_piece is None:
                    theta = generalized_angle(system, pa.family, pa, pb)
                else:
                    theta = angle_integral(pa.speed_profile(per_piece), pb.speed_profile(per_piece)) / (
                        pa.length * pb.length)
                thetas[pa.family] = theta
                total += theta * pa.length * pb.length
            else:
                total += pa.length * pb.length
    return InteractionQuantities(total, total, thetas)


@dataclass
class StrengthReport:
    residuals: np.ndarray
    Q: float
    ratio: float


def check_strength_estimate(system: HyperbolicSystem, u_l, u_m, u_r, tol: float = 1e-13,
                            h: float | None = None) -> StrengthReport:
    """|s_k(l,r) - s_k(l,m) - s_k(m,r)| per family against the interaction potential.

    Residuals at or below ``tol`` are round-off and give ratio 0 whatever ``Q`` is.
    """
    lm = solve_riemann(system, u_l, u_m, h=h)
    mr = solve_riemann(system, u_m, u_r, h=h)
    lr = solve_riemann(system, u_l, u_r, h=h)
    r = np.abs(lr.strengths - lm.strengths - mr.strengths)
    q = interaction_potential(system, lm, mr).Q
    worst = float(np.max(r))
    if worst <= tol:
        ratio = 0.0
    elif q > 0.0:
        ratio = worst / q
    else:
        ratio = float("inf")
    return StrengthReport(r, q, ratio)


@dataclass
class ISVBoundReport:
    case: str
    lhs: float
    base: float
    charge: float
    C: float

    @property
    def rhs(self) -> float:
        return self.base + self.C * self.charge

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def required_constant(self) -> float:
        """Smallest constant making the inequality hold."""
        excess = self.lhs - self.base
        if excess <= 0.0:
            return 0.0
        return float("inf") if self.charge == 0.0 else excess / self.charge


ISV_CASES = ("same_monotone", "same_opposite", "different")


def _single_family(sol: RiemannSolution, j: int, tol: float) -> WavePacket:
    others = np.delete(np.abs(sol.strengths), j - 1)
    if others.size and float(np.max(others)) > tol:
        raise CaseMismatch(f"data are not a single {j}-wave")
    return sol.packets[j - 1]


def isv_interaction_bounds(system: HyperbolicSystem, u_l, u_m, u_r, case: str, j: int = 1,
                           C: float = 1.0, tol: float = 1e-8, h: float | None = None) -> ISVBoundReport:
    """Inner-speed-variation bound across an interaction, split into its terms.

    ``same_monotone``: both waves are j-waves of one sign; the bound is the
    larger incoming variation plus the positive part of the minimal-speed gap
    plus C times the potential. ``same_opposite``: j-waves of opposite signs,
    charged by the smaller jump. ``different``: (u_m, u_r) is a j-wave and the
    j-wave of the same strength issued from u_l is compared with it, charged by
    |u_m - u_l| |s|.
    """
    if case not in ISV_CASES:
        raise CaseMismatch(f"unknown case {case!r}")
    u_l, u_m, u_r = (np.asarray(u, dtype=float) for u in (u_l, u_m, u_r))
    mr = solve_riemann(system, u_m, u_r, h=h)
    right = _single_family(mr, j, tol)
    if case == "different":
        s = right.strength
        moved = wave_curve(system, j, u_l, system.mu(u_l) + s, h=h)
        return ISVBoundReport(case, moved.isv, right.isv, float(np.linalg.norm(u_l - u_m)) * abs(s), C)
    lm = solve_riemann(system, u_l, u_m, h=h)
    left = _single_family(lm, j, tol)
    same_sign = left.strength * right.strength >= 0.0
    if same_sign != (case == "same_monotone"):
        raise CaseMismatch("sign pattern of the strengths does not match the case")
    lr = solve_riemann(system, u_l, u_r, h=h)
    lhs = lr.packets[j - 1].isv
    base = max(left.isv, right.isv)
    if case == "same_monotone":
        base += max(right.speed_min - left.speed_min, 0.0)
        charge = interaction_potential(system, lm, mr).Q
    else:
        charge = min(float(np.linalg.norm(u_m - u_l)), float(np.linalg.norm(u_r - u_m)))
    return ISVBoundReport(case, lhs, base, charge, C)


def riemann_summary(sol: RiemannSolution) -> list[dict]:
    """Plain description of the packets (used by the command line)."""
    out = []
    for p in sol.packets:
        out.append({
            "family": p.family,
            "strength": p.strength,
            "speed_min": p.speed_min,
            "speed_max": p.speed_max,
            "pieces": [(pc.kind, float(pc.m_minus if pc.kind == "shock" else pc.m_start),
                        float(pc.m_plus if pc.kind == "shock" else pc.m_end)) for pc in p.pieces],
        })
    return out


def profile_rows(sol: RiemannSolution, xis: Sequence[float]) -> list[list[float]]:
    return [[float(x)] + sample_riemann(sol, float(x)).tolist() for x in xis]

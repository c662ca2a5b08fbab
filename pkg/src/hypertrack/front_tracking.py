"""Event-driven epsilon-approximate front tracking.

Fronts move at constant speed between collisions.  At each collision the two
incoming fronts are replaced by the fronts produced by one of four solvers:

* ``Accurate``: the full Riemann problem, used when the interaction amount is at
  least ``delta``;
* ``ApproxII``: two fronts of one family are replaced by a single packet of the
  summed strength, the residual jump travels as an artificial front;
* ``ApproxIJ``: two fronts of different families pass through each other with
  their strengths unchanged, again leaving an artificial remainder;
* ``ArtificialSolver``: an artificial front overtakes a physical front.

Artificial fronts carry non-physical jumps at the fixed speed ``lambda_hat``,
faster than every characteristic speed.
"""

from __future__ import annotations

import bisect
import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (EventCapExceeded, InvariantViolation, NonBinaryCollision, OutOfBall,
                     PerturbationBudgetExceeded, TVBudgetExceeded)
from .riemann import pair_potential, solve_riemann
from .system import HyperbolicSystem
from .wave_curves import SpeedProfile, WavePacket, default_step, wave_curve

ARTIFICIAL = 0
ZERO_STRENGTH = 1e-12
CHECK_LEVELS = ("off", "invariants", "full")
SOLVERS = ("Accurate", "ApproxIJ", "ApproxII", "ArtificialSolver")


# -- fronts and records -----------------------------------------------------------


@dataclass
class Front:
    """A single jump travelling along a broken line.

    ``segments`` holds ``(t, x, speed)`` triples; the last one is current.
    ``profile`` is the speed profile of the front's own wave packet and ``isv``
    its inner speed variation (both unused for artificial fronts).
    """

    id: int
    family: int
    u_left: np.ndarray
    u_right: np.ndarray
    strength: float
    speed: float
    birth_time: float = 0.0
    generation: int = 1
    x_at_birth: float = 0.0
    profile: SpeedProfile | None = field(default=None, repr=False)
    isv: float = 0.0
    speed_lo: float = 0.0
    speed_hi: float = 0.0
    death_time: float = math.inf
    perturbation: float = 0.0
    segments: list = field(default_factory=list, repr=False)

    @property
    def artificial(self) -> bool:
        return self.family == ARTIFICIAL

    @property
    def size(self) -> float:
        return abs(self.strength)

    def launch(self, t: float, x: float) -> None:
        self.birth_time, self.x_at_birth = t, x
        self.segments = [(t, x, self.speed)]

    def position(self, t: float) -> float:
        t0, x0, v = self.segments[-1]
        if t < t0:
            k = max(bisect.bisect_right([s[0] for s in self.segments], t) - 1, 0)
            t0, x0, v = self.segments[k]
        return x0 + v * (t - t0)

    def set_speed(self, t: float, speed: float) -> None:
        x = self.position(t)
        if self.segments and self.segments[-1][0] == t:
            self.segments[-1] = (t, x, speed)
        else:
            self.segments.append((t, x, speed))
        self.speed = speed

    def alive(self, t: float) -> bool:
        return self.birth_time <= t < self.death_time


@dataclass
class InteractionRecord:
    index: int
    time: float
    x: float
    incoming: tuple
    families: tuple
    strengths: tuple
    generations: tuple
    solver: str
    I: float
    outgoing: tuple
    split_applied: dict
    V_before: float
    dV: float
    Q_before: float
    dQ: float
    Theta_before: float
    dTheta: float
    N_before: int
    dN: int
    Vart_before: float
    dVart: float
    order_after: tuple = field(repr=False, default=())

    @property
    def V_after(self) -> float:
        return self.V_before + self.dV

    @property
    def Q_after(self) -> float:
        return self.Q_before + self.dQ

    @property
    def Theta_after(self) -> float:
        return self.Theta_before + self.dTheta

    @property
    def N_after(self) -> int:
        return self.N_before + self.dN

    @property
    def Vart_after(self) -> float:
        return self.Vart_before + self.dVart

    @property
    def physical(self) -> bool:
        return ARTIFICIAL not in self.families


# -- state ------------------------------------------------------------------------


class SimulationState:
    """Ordered fronts at the current time plus running functionals and the ledger."""

    def __init__(self, system: HyperbolicSystem, epsilon: float, delta: float | None = None,
                 seed: int = 0, check: str = "off", event_cap: int = 200_000):
        if epsilon <= 0:
            raise ValueError("epsilon must be positive")
        delta = min(epsilon ** 3, epsilon ** 2 / 10.0) if delta is None else float(delta)
        if not 0 < delta <= epsilon ** 2 / 10.0:
            raise ValueError(f"delta = {delta:g} must lie in (0, epsilon^2/10]")
        if check not in CHECK_LEVELS:
            raise ValueError(f"check must be one of {CHECK_LEVELS}")
        self.system = system
        self.epsilon = float(epsilon)
        self.delta = delta
        self.lambda_hat = system.lambda_hat
        self.seed = seed
        self.check = check
        self.event_cap = event_cap
        self.time = 0.0
        self.fronts: list[Front] = []
        self.all_fronts: dict[int, Front] = {}
        self.u_far_left = system.base_state.copy()
        self.ledger: list[InteractionRecord] = []
        self.lattice = system.delta2 / 400.0
        self._next_id = 0
        self._pairs: dict[int, dict[int, float]] = {}
        self.V = self.Q = self.Theta = self.Vart = 0.0
        self.initial_order: tuple = ()

    # bookkeeping ------------------------------------------------------------

    def new_id(self) -> int:
        self._next_id += 1
        return self._next_id

    def pair_value(self, a: int, b: int) -> float:
        return self._pairs.get(a, {}).get(b, 0.0)

    def theta_of(self, f: Front) -> float:
        if f.artificial:
            return 0.0
        return max(f.isv - self.epsilon, 0.0) / self.epsilon

    def _register(self, new: list[Front], index: int) -> float:
        """Insert ``new`` at ``index`` and return the Q added by its pairs."""
        self.fronts[index:index] = new
        added = 0.0
        for f in new:
            self.all_fronts[f.id] = f
            self._pairs.setdefault(f.id, {})
        for pos in range(index, index + len(new)):
            f = self.fronts[pos]
            for other_pos, g in enumerate(self.fronts):
                if other_pos == pos or (index <= other_pos < pos):
                    continue
                left, right = (g, f) if other_pos < pos else (f, g)
                value = front_pair_potential(left, right)
                if value != 0.0:
                    self._pairs[f.id][g.id] = value
                    self._pairs[g.id][f.id] = value
                    added += value
        return added

    def _unregister(self, gone: list[Front]) -> float:
        removed = 0.0
        ids = {f.id for f in gone}
        for f in gone:
            for other, value in self._pairs.pop(f.id, {}).items():
                if other in ids:
                    if f.id < other:
                        removed += value
                    continue
                removed += value
                self._pairs[other].pop(f.id, None)
        return removed

    def functionals(self) -> dict:
        return dict(t=self.time, V=self.V, Q=self.Q, Theta=self.Theta, N=self.physical_count(), Vart=self.Vart)

    def physical_count(self) -> int:
        return sum(1 for f in self.fronts if not f.artificial)

    def recompute(self) -> tuple[float, float, float, float]:
        """V, Q, Theta and V_art from scratch (used by the ``full`` check level)."""
        V = sum(f.size for f in self.fronts)
        Q = 0.0
        for a in range(len(self.fronts)):
            for b in range(a + 1, len(self.fronts)):
                Q += front_pair_potential(self.fronts[a], self.fronts[b])
        theta = sum(self.theta_of(f) for f in self.fronts)
        vart = sum(f.size for f in self.fronts if f.artificial)
        return V, Q, theta, vart


def front_pair_potential(left: Front, right: Front) -> float:
    """Interaction potential of two fronts, ``left`` lying to the left of ``right``.

    An artificial front on the left weighs against every physical front on its
    right (it will cross it); an artificial front on the right never meets the
    left one.
    """
    if left.artificial:
        return 0.0 if right.artificial else left.size * right.size
    if right.artificial:
        return 0.0
    return pair_potential(left.family, left.strength, left.profile,
                          right.family, right.strength, right.profile)


# -- packets to fronts ----------------------------------------------------------------


def _curve_step(system: HyperbolicSystem, size: float) -> float:
    parts = 64 if system.n == 1 else 24
    return max(default_step(system), size / parts)


def _front_from_packet(packet: WavePacket, speed: float, profile: SpeedProfile) -> Front:
    return Front(-1, packet.family, packet.u_left.copy(), packet.u_right.copy(), packet.strength, speed,
                 profile=profile, isv=packet.isv, speed_lo=packet.speed_min, speed_hi=packet.speed_max)


def split_strategy(packet: WavePacket, epsilon: float, profile: SpeedProfile | None = None,
                   lattice: float | None = None) -> list[Front]:
    """Cut a packet into sub-packets of inner speed variation below ``epsilon``.

    The cut speeds are equally spaced over the packet's speed range; each cut
    sits at the first point where the speed reaches its value, so a flat
    (shock) part always stays inside one sub-packet.  The returned fronts have
    no id or position yet.
    """
    if profile is None:
        profile = packet.speed_profile(lattice=lattice) if lattice else packet.speed_profile()
    isv = packet.isv
    parts = int(math.floor(isv / epsilon)) + 1
    base = packet.speed_min
    speeds = [base + p / parts * isv for p in range(parts)]
    cuts = [0.0] + [packet.t_at_speed(v) for v in speeds[1:]] + [packet.length]
    fronts = []
    for p in range(parts):
        ta, tb = cuts[p], cuts[p + 1]
        if tb - ta <= ZERO_STRENGTH:
            continue
        sub = packet.restrict(ta, tb)
        front = _front_from_packet(sub, speeds[p], profile.restrict(ta, tb))
        fronts.append(front)
    _chain_exact(fronts, packet.u_left, packet.u_right)
    return fronts


def _single_front(packet: WavePacket, lattice: float) -> Front:
    return _front_from_packet(packet, packet.speed_min, packet.speed_profile(lattice=lattice))


def _chain_exact(fronts: list[Front], u_left: np.ndarray, u_right: np.ndarray) -> None:
    """Make consecutive fronts share their states bit for bit."""
    if not fronts:
        return
    fronts[0].u_left = np.array(u_left, dtype=float)
    for a, b in zip(fronts[:-1], fronts[1:]):
        b.u_left = a.u_right
    fronts[-1].u_right = np.array(u_right, dtype=float)


def _outgoing(packets: Sequence[WavePacket], epsilon: float, lattice: float,
              keep_whole: set, always_split: bool = False) -> tuple[list[Front], dict]:
    """Fronts for a list of packets following the outgoing-speed rule.

    A packet whose family is in ``keep_whole`` and whose inner speed variation is
    at most ``2 epsilon`` travels as one front; every other packet is split.
    """
    fronts, flags = [], {}
    for packet in packets:
        if packet.is_empty or packet.length < ZERO_STRENGTH:
            continue
        whole = (not always_split and packet.family in keep_whole and packet.isv <= 2.0 * epsilon)
        flags[packet.family] = not whole
        if whole:
            fronts.append(_single_front(packet, lattice))
        else:
            fronts.extend(split_strategy(packet, epsilon, packet.speed_profile(lattice=lattice)))
    return fronts, flags


def _artificial(system: HyperbolicSystem, u_left: np.ndarray, u_right: np.ndarray) -> Front | None:
    jump = float(np.linalg.norm(u_right - u_left))
    if jump < ZERO_STRENGTH:
        return None
    return Front(-1, ARTIFICIAL, u_left.copy(), u_right.copy(), jump, system.lambda_hat)


# -- initial data -------------------------------------------------------------------


@dataclass
class Breakpoints:
    """Piecewise-constant data: ``states[k]`` holds on ``(xs[k-1], xs[k])``."""

    xs: Sequence[float]
    states: Sequence


def _as_states(system: HyperbolicSystem, states) -> list[np.ndarray]:
    return [np.asarray(s, dtype=float).reshape(system.n) for s in states]


def total_variation(states: Sequence[np.ndarray]) -> float:
    return float(sum(np.linalg.norm(b - a) for a, b in zip(states[:-1], states[1:])))


def merge_jumps(xs: list[float], states: list[np.ndarray], max_jumps: int) -> tuple[list, list]:
    """Greedily remove the smallest jumps until at most ``max_jumps`` remain.

    Removing a jump overwrites the shorter adjacent piece with its neighbour's
    value, which never increases the total variation.
    """
    xs, states = list(xs), [s.copy() for s in states]
    while len(xs) > max_jumps:
        jumps = [float(np.linalg.norm(b - a)) for a, b in zip(states[:-1], states[1:])]
        k = int(np.argmin(jumps))
        left_len = xs[k] - xs[k - 1] if k > 0 else math.inf
        right_len = xs[k + 1] - xs[k] if k + 1 < len(xs) else math.inf
        if left_len <= right_len:
            states[k] = states[k + 1]
        else:
            states[k + 1] = states[k]
        del xs[k]
        del states[k + 1]
    # drop jumps that became trivial
    keep_x, keep_s = [], [states[0]]
    for x, s in zip(xs, states[1:]):
        if np.linalg.norm(s - keep_s[-1]) > 0.0:
            keep_x.append(x)
            keep_s.append(s)
    return keep_x, keep_s


def sample_initial(system: HyperbolicSystem, u0: Callable, x_range: tuple[float, float],
                   epsilon: float) -> Breakpoints:
    """Cell-centre samples of a callable profile on ``10/epsilon`` cells."""
    a, b = x_range
    cells = max(1, int(math.ceil(10.0 / epsilon)))
    edges = np.linspace(a, b, cells + 1)
    centres = 0.5 * (edges[:-1] + edges[1:])
    states = [np.asarray(u0(a - 1.0), dtype=float)] + [np.asarray(u0(c), dtype=float) for c in centres]
    states.append(np.asarray(u0(b + 1.0), dtype=float))
    return Breakpoints(list(edges), states)


def init_approximation(system: HyperbolicSystem, u0, epsilon: float, delta: float | None = None,
                       x_range: tuple[float, float] = (0.0, 1.0), seed: int = 0, check: str = "off",
                       tv_budget: float | None = None, event_cap: int = 200_000) -> SimulationState:
    """Piecewise-constant approximation of ``u0`` with every jump resolved at t = 0.

    ``u0`` is a :class:`Breakpoints` instance, a ``(xs, states)`` pair or a
    callable sampled on ``x_range``.
    """
    state = SimulationState(system, epsilon, delta, seed=seed, check=check, event_cap=event_cap)
    if callable(u0):
        u0 = sample_initial(system, u0, x_range, epsilon)
    elif not isinstance(u0, Breakpoints):
        u0 = Breakpoints(*u0)
    xs = [float(x) for x in u0.xs]
    states = _as_states(system, u0.states)
    if len(states) != len(xs) + 1:
        raise ValueError("need exactly one more state than breakpoints")
    if any(b < a for a, b in zip(xs[:-1], xs[1:])):
        raise ValueError("breakpoints must be non-decreasing")
    for s in states:
        system.check_state(s, system.delta2)
    budget = (math.inf if system.n == 1 else system.delta2) if tv_budget is None else tv_budget
    tv = total_variation(states)
    if tv > budget:
        raise TVBudgetExceeded(f"total variation {tv:.4g} exceeds the budget {budget:.4g}")
    xs, states = merge_jumps(xs, states, int(math.ceil(1.0 / epsilon)))
    state.u_far_left = states[0].copy()

    for x, ul, ur in zip(xs, states[:-1], states[1:]):
        sol = solve_riemann(system, ul, ur, h=_curve_step(system, float(np.linalg.norm(ur - ul))),
                            budget=math.inf)
        fronts, _ = _outgoing(sol.packets, epsilon, state.lattice, set(), always_split=True)
        _chain_exact(fronts, ul, ur)
        for f in fronts:
            f.id = state.new_id()
            f.generation = 1
            f.launch(0.0, x)
        state.Q += state._register(fronts, len(state.fronts))
    state.V = sum(f.size for f in state.fronts)
    state.Theta = sum(state.theta_of(f) for f in state.fronts)
    state.initial_order = tuple(f.id for f in state.fronts)
    if state.check != "off":
        _check_state(state, state.fronts)
    return state


# -- collisions ---------------------------------------------------------------------


def _collision_times(fronts: Sequence[Front], t: float, speeds: Sequence[float] | None = None) -> np.ndarray:
    if len(fronts) < 2:
        return np.empty(0)
    xs = np.array([f.position(t) for f in fronts])
    vs = np.array([f.speed for f in fronts] if speeds is None else speeds, dtype=float)
    gap = np.maximum(xs[1:] - xs[:-1], 0.0)
    closing = vs[:-1] - vs[1:]
    out = np.full(len(fronts) - 1, math.inf)
    mask = closing > 0
    out[mask] = t + gap[mask] / closing[mask]
    return out


def _tie_tol(tau: float) -> float:
    return 1e-12 * max(1.0, abs(tau))


def _ties(times: np.ndarray) -> tuple[float, list[int]]:
    if len(times) == 0:
        return math.inf, []
    tau = float(np.min(times))
    if not math.isfinite(tau):
        return tau, []
    return tau, [int(k) for k in np.nonzero(times <= tau + _tie_tol(tau))[0]]


def perturb_speeds(state: SimulationState) -> bool:
    """Break ties in the next-collision schedule; returns whether a speed changed.

    The left-most pair of the tied collisions is made to meet first: its left
    front is sped up, or, when the left front is artificial, the right front is
    slowed down.  The change is the smallest ``epsilon 2^-k`` (``k >= 4``) that
    separates the earliest event from all others.
    """
    t = state.time
    times = _collision_times(state.fronts, t)
    tau, tied = _ties(times)
    if len(tied) <= 1:
        return False
    k = tied[0]
    alpha, beta = state.fronts[k], state.fronts[k + 1]
    target, sign = (alpha, 1.0) if not alpha.artificial else (beta, -1.0)
    pos = k if target is alpha else k + 1
    base = [f.speed for f in state.fronts]
    chosen = None
    for power in range(4, 60):
        amount = state.epsilon * 2.0 ** (-power)
        speeds = list(base)
        speeds[pos] += sign * amount
        trial = _collision_times(state.fronts, t, speeds)
        first = int(np.argmin(trial))
        tau_new = float(trial[first])
        others = np.delete(trial, first)
        margin = float(np.min(others)) - tau_new if len(others) else math.inf
        ok = first == k and tau_new >= t and margin > 1e3 * _tie_tol(tau_new)
        if ok:
            chosen = amount
        elif chosen is not None:
            break
    if chosen is None:
        raise NonBinaryCollision(f"could not separate the collisions at t = {tau:.17g}")
    if target.perturbation + chosen > state.epsilon:
        raise PerturbationBudgetExceeded(
            f"front {target.id} would be perturbed by {target.perturbation + chosen:.3g} > epsilon")
    target.perturbation += chosen
    target.set_speed(t, target.speed + sign * chosen)
    return True


# -- interactions -------------------------------------------------------------------


def _approx_same_family(state, alpha: Front, beta: Front):
    system = state.system
    u_l, u_r = alpha.u_left, beta.u_right
    s = alpha.strength + beta.strength
    packet = wave_curve(system, alpha.family, u_l, system.mu(u_l) + s, h=_curve_step(system, abs(s)))
    return [packet], packet.u_right


def _approx_different(state, alpha: Front, beta: Front):
    # left front is the faster family j, right front the slower family i
    system = state.system
    u_l = alpha.u_left
    s_i, s_j = beta.strength, alpha.strength
    p_i = wave_curve(system, beta.family, u_l, system.mu(u_l) + s_i, h=_curve_step(system, abs(s_i)))
    mid = p_i.u_right
    p_j = wave_curve(system, alpha.family, mid, system.mu(mid) + s_j, h=_curve_step(system, abs(s_j)))
    return [p_i, p_j], p_j.u_right


def resolve_interaction(state: SimulationState, k: int) -> InteractionRecord:
    """Replace fronts ``k`` and ``k + 1`` (meeting now) by the solver's outgoing fronts."""
    system, eps, t = state.system, state.epsilon, state.time
    alpha, beta = state.fronts[k], state.fronts[k + 1]
    x = alpha.position(t)
    u_l, u_r = alpha.u_left, beta.u_right
    I = state.pair_value(alpha.id, beta.id)
    artificial_out = None
    if alpha.artificial:
        solver = "ArtificialSolver"
        packet = wave_curve(system, beta.family, u_l, system.mu(u_l) + beta.strength,
                            h=_curve_step(system, beta.size))
        fronts, flags = _outgoing([packet], eps, state.lattice, {beta.family})
        _chain_exact(fronts, u_l, packet.u_right)
        for f in fronts:
            f.generation = beta.generation
        artificial_out = _artificial(system, packet.u_right, u_r)
        if artificial_out is not None:
            artificial_out.generation = alpha.generation
    elif beta.artificial:
        raise NonBinaryCollision("a physical front cannot catch an artificial front")
    else:
        top = max(alpha.generation, beta.generation) + 1
        if I >= state.delta:
            solver = "Accurate"
            size = float(np.linalg.norm(u_r - u_l))
            sol = solve_riemann(system, u_l, u_r, h=_curve_step(system, size), budget=math.inf)
            packets, end = sol.packets, u_r
        elif alpha.family == beta.family:
            solver = "ApproxII"
            packets, end = _approx_same_family(state, alpha, beta)
        else:
            solver = "ApproxIJ"
            packets, end = _approx_different(state, alpha, beta)
        fronts, flags = _outgoing(packets, eps, state.lattice, {alpha.family, beta.family})
        _chain_exact(fronts, u_l, end)
        for f in fronts:
            if alpha.family == beta.family:
                f.generation = min(alpha.generation, beta.generation) if f.family == alpha.family else top
            elif f.family == alpha.family:
                f.generation = alpha.generation
            elif f.family == beta.family:
                f.generation = beta.generation
            else:
                f.generation = top
        if solver != "Accurate":
            artificial_out = _artificial(system, end, u_r)
            if artificial_out is not None:
                artificial_out.generation = top
    if artificial_out is not None:
        fronts.append(artificial_out)
    elif fronts:
        fronts[-1].u_right = u_r
    _chain_exact(fronts, u_l, u_r)
    if not fronts and k + 2 < len(state.fronts):
        # complete cancellation: the right neighbour inherits the left state
        state.fronts[k + 2].u_left = u_l

    for f in fronts:
        f.id = state.new_id()
        f.launch(t, x)

    before = dict(V=state.V, Q=state.Q, Theta=state.Theta, N=state.physical_count(), Vart=state.Vart)
    alpha.death_time = beta.death_time = t
    del state.fronts[k:k + 2]
    removed = state._unregister([alpha, beta])
    added = state._register(fronts, k)
    dV = sum(f.size for f in fronts) - alpha.size - beta.size
    dQ = added - removed
    dTheta = sum(state.theta_of(f) for f in fronts) - state.theta_of(alpha) - state.theta_of(beta)
    dVart = (sum(f.size for f in fronts if f.artificial)
             - sum(f.size for f in (alpha, beta) if f.artificial))
    state.V += dV
    state.Q += dQ
    state.Theta += dTheta
    state.Vart += dVart
    record = InteractionRecord(
        len(state.ledger), t, x, (alpha.id, beta.id), (alpha.family, beta.family),
        (alpha.strength, beta.strength), (alpha.generation, beta.generation), solver, I,
        tuple(f.id for f in fronts), flags,
        before["V"], dV, before["Q"], dQ, before["Theta"], dTheta, before["N"],
        sum(1 for f in fronts if not f.artificial) - sum(1 for f in (alpha, beta) if not f.artificial),
        before["Vart"], dVart, tuple(f.id for f in state.fronts))
    state.ledger.append(record)
    if state.check != "off":
        _check_state(state, fronts)
    return record


# -- checks ---------------------------------------------------------------------------


def _check_state(state: SimulationState, created: Sequence[Front]) -> None:
    eps, t = state.epsilon, state.time
    fronts = state.fronts
    xs = [f.position(t) for f in fronts]
    for a, b in zip(xs[:-1], xs[1:]):
        if b < a - 1e-9 * max(1.0, abs(a)):
            raise InvariantViolation(f"fronts out of order at t = {t}")
    for a, b in zip(fronts[:-1], fronts[1:]):
        if a.u_right is not b.u_left and not np.array_equal(a.u_right, b.u_left):
            raise InvariantViolation(f"states of fronts {a.id} and {b.id} do not chain")
    for f in created:
        problems = front_violations(f, eps, state.lambda_hat)
        if problems:
            raise InvariantViolation(f"front {f.id}: " + "; ".join(problems))
    if state.check == "full":
        V, Q, theta, vart = state.recompute()
        for name, run_value, fresh in (("V", state.V, V), ("Q", state.Q, Q), ("Theta", state.Theta, theta)):
            if abs(run_value - fresh) > 1e-9 * max(1.0, abs(fresh)):
                raise InvariantViolation(f"running {name} = {run_value} but recomputed {fresh}")


def front_violations(f: Front, epsilon: float, lambda_hat: float) -> list[str]:
    """Problems with the speed discipline of one front (empty when all is well)."""
    out = []
    if f.artificial:
        if f.speed != lambda_hat:
            out.append(f"artificial speed {f.speed} differs from {lambda_hat}")
        return out
    if f.isv > 2.0 * epsilon * (1.0 + 1e-12):
        out.append(f"inner speed variation {f.isv:.6g} > 2 epsilon")
    spread = max(abs(f.speed - f.speed_lo), abs(f.speed - f.speed_hi))
    if spread > 3.0 * epsilon * (1.0 + 1e-12):
        out.append(f"speed {f.speed:.6g} is {spread:.3g} away from the packet speeds")
    return out


# -- driver ---------------------------------------------------------------------------


@dataclass
class Trajectory:
    system: HyperbolicSystem = field(repr=False)
    epsilon: float
    delta: float
    t_end: float
    u_far_left: np.ndarray
    fronts: dict = field(repr=False)
    initial_order: tuple = field(repr=False)
    ledger: list = field(repr=False)
    series: list = field(repr=False)
    initial: dict = field(repr=False)
    status: str = "completed"

    @property
    def interactions(self) -> int:
        return len(self.ledger)

    @property
    def event_times(self) -> list[float]:
        return [r.time for r in self.ledger]

    def order_at(self, t: float, side: str = "+") -> tuple:
        """Ids of the fronts alive at ``t`` (after events at ``t`` for ``side='+'``)."""
        times = self.event_times
        k = bisect.bisect_right(times, t) if side == "+" else bisect.bisect_left(times, t)
        return self.initial_order if k == 0 else self.ledger[k - 1].order_after

    def fronts_at(self, t: float, side: str = "+") -> list[Front]:
        return [self.fronts[i] for i in self.order_at(t, side)]

    def functionals_at(self, t: float, side: str = "+") -> dict:
        times = self.event_times
        k = bisect.bisect_right(times, t) if side == "+" else bisect.bisect_left(times, t)
        return self.series[k]


def run(state: SimulationState, t_end: float, event_cap: int | None = None) -> Trajectory:
    """Advance ``state`` through every collision up to ``t_end``."""
    cap = state.event_cap if event_cap is None else event_cap
    initial = state.functionals()
    series = [dict(initial)]
    while True:
        times = _collision_times(state.fronts, state.time)
        tau, tied = _ties(times)
        if len(tied) > 1 and tau <= t_end:
            perturb_speeds(state)
            continue
        if not tied or tau > t_end:
            break
        if len(state.ledger) >= cap:
            raise EventCapExceeded(f"more than {cap} interactions before t = {t_end}")
        state.time = tau
        resolve_interaction(state, tied[0])
        series.append(state.functionals())
    state.time = max(state.time, t_end)
    return Trajectory(state.system, state.epsilon, state.delta, t_end, state.u_far_left.copy(),
                      state.all_fronts, state.initial_order, state.ledger, series, initial)


def simulate(system: HyperbolicSystem, u0, epsilon: float, t_end: float, **kw) -> Trajectory:
    """Shorthand for :func:`init_approximation` followed by :func:`run`."""
    cap = kw.pop("event_cap", 200_000)
    return run(init_approximation(system, u0, epsilon, event_cap=cap, **kw), t_end)


# -- sampling and output ---------------------------------------------------------------


def sample_profile(source, x_grid, t: float | None = None) -> np.ndarray:
    """Right-continuous evaluation of the piecewise-constant solution.

    ``source`` is a :class:`SimulationState` (evaluated at its current time) or
    a :class:`Trajectory` (evaluated at ``t``).
    """
    if isinstance(source, Trajectory):
        t = source.t_end if t is None else t
        fronts = source.fronts_at(t)
    else:
        t = source.time if t is None else t
        fronts = source.fronts
    xg = np.atleast_1d(np.asarray(x_grid, dtype=float))
    if not fronts:
        return np.tile(source.u_far_left, (len(xg), 1))
    positions = np.array([f.position(t) for f in fronts])
    table = np.vstack([fronts[0].u_left] + [f.u_right for f in fronts])
    idx = np.searchsorted(positions, xg, side="right")
    return table[idx]


def integral_of_solution(traj: Trajectory, t: float, window: tuple[float, float]) -> np.ndarray:
    """Exact integral of the piecewise-constant solution over ``window``."""
    a, b = window
    fronts = traj.fronts_at(t)
    edges = [a] + [min(max(f.position(t), a), b) for f in fronts] + [b]
    states = [fronts[0].u_left if fronts else traj.u_far_left] + [f.u_right for f in fronts]
    total = np.zeros_like(traj.u_far_left)
    for lo, hi, s in zip(edges[:-1], edges[1:], states):
        total = total + (hi - lo) * s
    return total


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer, str)):
        return str(v)
    return f"{float(v):.17g}"


def write_fronts_csv(traj: Trajectory, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "t_birth", "t_death", "x_birth", "speed", "family", "strength", "generation",
                    "isv", "perturbation"])
        for f in sorted(traj.fronts.values(), key=lambda f: f.id):
            speed = f.segments[0][2] if f.segments else f.speed
            w.writerow([f.id, _fmt(f.birth_time), _fmt(min(f.death_time, traj.t_end)), _fmt(f.x_at_birth),
                        _fmt(speed), f.family, _fmt(f.strength), f.generation, _fmt(f.isv),
                        _fmt(f.perturbation)])


def write_snapshots_csv(traj: Trajectory, path, times: Sequence[float], x_grid) -> None:
    n = traj.system.n
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x"] + [f"u{k + 1}" for k in range(n)])
        for t in times:
            values = sample_profile(traj, x_grid, t)
            for x, u in zip(np.atleast_1d(x_grid), values):
                w.writerow([_fmt(t), _fmt(x)] + [_fmt(c) for c in u])


LEDGER_COLUMNS = ["index", "t", "x", "left_id", "right_id", "left_family", "right_family", "left_strength",
                  "right_strength", "solver", "I", "outgoing", "split_families", "V_before", "dV",
                  "Q_before", "dQ", "Theta_before", "dTheta", "N_before", "dN", "Vart_before", "dVart"]


def write_ledger_csv(traj: Trajectory, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(LEDGER_COLUMNS)
        for r in traj.ledger:
            split = " ".join(str(j) for j, flag in sorted(r.split_applied.items()) if flag)
            w.writerow([r.index, _fmt(r.time), _fmt(r.x), r.incoming[0], r.incoming[1], r.families[0],
                        r.families[1], _fmt(r.strengths[0]), _fmt(r.strengths[1]), r.solver, _fmt(r.I),
                        " ".join(map(str, r.outgoing)), split, _fmt(r.V_before), _fmt(r.dV),
                        _fmt(r.Q_before), _fmt(r.dQ), _fmt(r.Theta_before), _fmt(r.dTheta), r.N_before,
                        r.dN, _fmt(r.Vart_before), _fmt(r.dVart)])


def random_steps(system: HyperbolicSystem, jumps: int, amplitude: float, seed: int,
                 x_range: tuple[float, float] = (0.0, 1.0)) -> Breakpoints:
    """Random piecewise-constant data around the base state (reproducible from ``seed``)."""
    rng = np.random.default_rng(seed)
    a, b = x_range
    xs = np.sort(rng.uniform(a, b, jumps))
    states = [system.base_state + amplitude * rng.uniform(-1.0, 1.0, system.n) for _ in range(jumps + 1)]
    return Breakpoints(list(xs), states)

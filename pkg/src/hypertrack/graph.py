"""Parametrized-graph view of a front-tracking run.

At time ``t`` the map ``sigma(x) = x + (strength of fronts at or left of x) +
(interaction mass that has reached x)`` is strictly increasing.  Its inverse
``X(s)`` is 1-Lipschitz and constant on one plateau per front (and per mass
atom).  ``U(s)`` fills each plateau with a path joining the two states of the
jump, which makes ``U`` continuous in ``s``.

Interaction atoms carry the strength lost at the event (``-[V]``), so the
plateaus of the outgoing fronts plus the atom span exactly the plateaus of the
incoming fronts and ``X`` does not jump.  An atom starts at the interaction
point and moves right at ``lambda_inf``, faster than every front.
"""

from __future__ import annotations

import bisect
import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import trapezoid

from .errors import InteractionTime, OutOfTimeRange
from .front_tracking import Trajectory, _fmt, sample_profile
from .riemann import solve_riemann
from .system import HyperbolicSystem


# -- path families ----------------------------------------------------------------


@dataclass
class PathFamily:
    """``evaluate(s, u_l, u_r)`` returns the path states at ``s`` (array of shape (len(s), n))."""

    name: str
    evaluate: Callable
    lipschitz_bounds: dict = field(default_factory=dict)

    def __call__(self, s, u_l, u_r) -> np.ndarray:
        return self.evaluate(s, u_l, u_r)


def _segment(s, u_l, u_r):
    s = np.atleast_1d(np.asarray(s, dtype=float))[:, None]
    u_l, u_r = np.asarray(u_l, dtype=float), np.asarray(u_r, dtype=float)
    return u_l[None, :] + s * (u_r - u_l)[None, :]


def segment_family() -> PathFamily:
    return PathFamily("segment", _segment, {"ds": 1.0, "endpoints": 1.0})


def _arc_length_path(states: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Normalized arc-length parameters of a polyline, with repeated points removed."""
    keep = [0]
    for k in range(1, len(states)):
        if np.linalg.norm(states[k] - states[keep[-1]]) > 0.0:
            keep.append(k)
    pts = states[keep]
    if len(pts) == 1:
        return np.array([0.0, 1.0]), np.vstack([pts, pts])
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    return s / s[-1], pts


def riemann_states(system: HyperbolicSystem, u_l, u_r, samples: int = 64) -> np.ndarray:
    """States met by the Riemann solution from ``u_l`` to ``u_r``, in order of speed."""
    sol = solve_riemann(system, u_l, u_r, budget=np.inf)
    states = [np.asarray(u_l, dtype=float)]
    for packet in sol.packets:
        if packet.is_empty:
            continue
        for t in np.linspace(0.0, packet.length, samples + 1)[1:]:
            states.append(packet.state_t(float(t)))
    states[-1] = np.asarray(u_r, dtype=float)
    return np.array(states)


def riemann_graph_family(system: HyperbolicSystem, samples: int = 64) -> PathFamily:
    """Path through the states of the Riemann solution, in normalized arc length."""

    def evaluate(s, u_l, u_r):
        u_l, u_r = np.asarray(u_l, dtype=float), np.asarray(u_r, dtype=float)
        if np.array_equal(u_l, u_r):
            return _segment(s, u_l, u_r)
        knots, pts = _arc_length_path(riemann_states(system, u_l, u_r, samples))
        s = np.atleast_1d(np.asarray(s, dtype=float))
        return np.column_stack([np.interp(s, knots, pts[:, k]) for k in range(pts.shape[1])])

    return PathFamily("riemann_graph", evaluate, {"samples": samples})


def default_path_families(system: HyperbolicSystem | None = None) -> dict:
    out = {"segment": segment_family()}
    if system is not None:
        out["riemann_graph"] = riemann_graph_family(system)
    return out


def path_axiom_check(family: PathFamily, pairs, samples: int = 201) -> dict:
    """Sampled constants of the path axioms over ``pairs`` of state pairs.

    Returns the worst endpoint error, the largest ratio ``|d Phi/ds| / |u_r - u_l|``
    and the largest ratio of path distance to endpoint distance between
    consecutive pairs.
    """
    s = np.linspace(0.0, 1.0, samples)
    end_err, slope, lip = 0.0, 0.0, 0.0
    paths = []
    for u_l, u_r in pairs:
        p = family(s, u_l, u_r)
        paths.append(p)
        end_err = max(end_err, float(np.linalg.norm(p[0] - u_l)), float(np.linalg.norm(p[-1] - u_r)))
        jump = float(np.linalg.norm(np.asarray(u_r) - np.asarray(u_l)))
        if jump > 0:
            d = np.linalg.norm(np.diff(p, axis=0), axis=1) / (s[1] - s[0])
            slope = max(slope, float(d.max()) / jump)
    for (a, pa), (b, pb) in zip(zip(pairs, paths), zip(pairs[1:], paths[1:])):
        gap = float(np.linalg.norm(np.asarray(a[0]) - b[0]) + np.linalg.norm(np.asarray(a[1]) - b[1]))
        if gap > 0:
            lip = max(lip, float(np.max(np.linalg.norm(pa - pb, axis=1))) / gap)
    return {"endpoint_error": end_err, "slope_ratio": slope, "lipschitz_ratio": lip}


# -- interaction measure ----------------------------------------------------------------


@dataclass
class InteractionMeasure:
    """Point masses ``(t, x, mass)``; ``defects`` lists events whose strength grew."""

    atoms: list
    defects: list = field(default_factory=list)
    lam_inf: float = 1.0

    @property
    def total(self) -> float:
        return float(sum(a[2] for a in self.atoms))


def interaction_measure(traj: Trajectory, lam_inf: float | None = None,
                        defect_tol: float = 1e-12) -> InteractionMeasure:
    """Atoms of mass ``-[V]`` at each interaction; growth beyond ``defect_tol`` is recorded."""
    lam_inf = traj.system.lambda_hat + 1.0 if lam_inf is None else lam_inf
    atoms, defects = [], []
    for r in traj.ledger:
        mass = -r.dV
        if mass < 0.0:
            if -mass > defect_tol:
                defects.append((r.index, r.time, r.x, -mass))
            mass = 0.0
        if mass > 0.0:
            atoms.append((r.time, r.x, mass))
    return InteractionMeasure(atoms, defects, lam_inf)


# -- sigma and its inverse ----------------------------------------------------------------


@dataclass
class Items:
    """Ordered plateaus at one time: positions, widths and the states on each side."""

    positions: np.ndarray
    widths: np.ndarray
    left: np.ndarray
    right: np.ndarray
    is_front: np.ndarray
    u_far_left: np.ndarray

    @property
    def before(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.widths)[:-1]]) if len(self.widths) else np.empty(0)

    @property
    def after(self) -> np.ndarray:
        return np.cumsum(self.widths)


def _resolve_side(traj: Trajectory, t: float, side: str | None) -> str:
    if t < 0.0 or t > traj.t_end * (1 + 1e-12) + 1e-12:
        raise OutOfTimeRange(f"t = {t} outside [0, {traj.t_end}]")
    times = traj.event_times
    k = bisect.bisect_left(times, t)
    at_event = k < len(times) and times[k] == t
    if at_event and side is None:
        raise InteractionTime(f"t = {t} is an interaction time; pass side='-' or side='+'")
    return "+" if side is None else side


def items_at(traj: Trajectory, t: float, measure: InteractionMeasure, side: str | None = "+") -> Items:
    side = _resolve_side(traj, t, side)
    fronts = traj.fronts_at(t, side)
    entries = []
    # the stored order is authoritative: rounding in positions must not swap fronts
    positions = np.maximum.accumulate([f.position(t) for f in fronts]) if fronts else []
    for rank, (f, x) in enumerate(zip(fronts, positions)):
        entries.append((float(x), 0, rank, f.size, f))
    for n, (t0, x0, mass) in enumerate(measure.atoms):
        if t0 < t or (t0 == t and side == "+"):
            entries.append((x0 + measure.lam_inf * (t - t0), 1, n, mass, None))
    entries.sort(key=lambda e: (e[0], e[1], e[2]))
    n_state = traj.system.n
    state = traj.u_far_left.copy()
    pos, wid, left, right, isf = [], [], [], [], []
    for x, kind, _, w, f in entries:
        pos.append(x)
        wid.append(w)
        isf.append(kind == 0)
        if f is not None:
            left.append(f.u_left)
            right.append(f.u_right)
            state = f.u_right
        else:
            left.append(state)
            right.append(state)
    shape = (0, n_state)
    return Items(np.array(pos), np.array(wid), np.array(left).reshape(-1, n_state) if left else np.empty(shape),
                 np.array(right).reshape(-1, n_state) if right else np.empty(shape), np.array(isf, dtype=bool),
                 traj.u_far_left.copy())


def sigma_map(traj: Trajectory, t: float, x, measure: InteractionMeasure | None = None,
              side: str | None = "+") -> np.ndarray:
    """``x`` plus the width of every plateau at or left of ``x`` (right-continuous)."""
    measure = interaction_measure(traj) if measure is None else measure
    it = items_at(traj, t, measure, side)
    x = np.asarray(x, dtype=float)
    if len(it.positions) == 0:
        return x.copy()
    cum = np.concatenate([[0.0], it.after])
    return x + cum[np.searchsorted(it.positions, x, side="right")]


@dataclass
class MonotoneInverse:
    """Generalized inverse ``X`` of ``sigma`` at one time."""

    items: Items

    @property
    def s_start(self) -> np.ndarray:
        return self.items.positions + self.items.before

    @property
    def s_end(self) -> np.ndarray:
        return self.items.positions + self.items.after

    def sigma(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if len(self.items.positions) == 0:
            return x.copy()
        cum = np.concatenate([[0.0], self.items.after])
        return x + cum[np.searchsorted(self.items.positions, x, side="right")]

    def sigma_left(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if len(self.items.positions) == 0:
            return x.copy()
        cum = np.concatenate([[0.0], self.items.after])
        return x + cum[np.searchsorted(self.items.positions, x, side="left")]

    def locate(self, s) -> tuple[np.ndarray, np.ndarray]:
        """Index of the last plateau starting at or before ``s`` (-1 if none) and whether ``s`` is on it."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        if len(self.items.positions) == 0:
            return np.full(len(s), -1), np.zeros(len(s), dtype=bool)
        k = np.searchsorted(self.s_start, s, side="right") - 1
        inside = (k >= 0) & (s <= self.s_end[np.maximum(k, 0)])
        return k, inside

    def __call__(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        k, inside = self.locate(s)
        out = s.copy()
        if len(self.items.positions) == 0:
            return out
        kk = np.maximum(k, 0)
        out = np.where(k >= 0, s - self.items.after[kk], s)
        return np.where(inside, self.items.positions[kk], out)

    def plateaus(self) -> list[tuple[float, float, float]]:
        return [(float(a), float(b), float(x)) for a, b, x in zip(self.s_start, self.s_end, self.items.positions)]


def X_eps(traj: Trajectory, t: float, measure: InteractionMeasure | None = None,
          side: str | None = "+") -> MonotoneInverse:
    measure = interaction_measure(traj) if measure is None else measure
    return MonotoneInverse(items_at(traj, t, measure, side))


# -- the completed graph -------------------------------------------------------------------


@dataclass
class ParametrizedGraph:
    s_grid: np.ndarray
    X: np.ndarray
    U: np.ndarray
    vertical_segments: list

    def rows(self) -> list[list]:
        return [[s, x] + list(u) for s, x, u in zip(self.s_grid, self.X, self.U)]


def _evaluate_U(inv: MonotoneInverse, s: np.ndarray, path: PathFamily) -> np.ndarray:
    it = inv.items
    k, inside = inv.locate(s)
    n = len(it.u_far_left)
    out = np.empty((len(s), n))
    if len(it.positions) == 0:
        out[:] = it.u_far_left
        return out
    kk = np.maximum(k, 0)
    out[:] = np.where((k >= 0)[:, None], it.right[kk], it.u_far_left[None, :])
    starts, ends = inv.s_start, inv.s_end
    for j in np.unique(k[inside]):
        sel = inside & (k == j)
        width = ends[j] - starts[j]
        if width <= 0.0:
            continue
        beta = (s[sel] - starts[j]) / width
        out[sel] = path(beta, it.left[j], it.right[j])
    return out


def default_s_grid(inv: MonotoneInverse, window: tuple[float, float], points: int = 2001,
                   per_plateau: int = 16) -> np.ndarray:
    lo = float(inv.sigma_left(np.array([window[0]]))[0])
    hi = float(inv.sigma(np.array([window[1]]))[0])
    parts = [np.linspace(lo, hi, points)]
    for a, b, _ in inv.plateaus():
        if b >= lo and a <= hi:
            parts.append(np.linspace(a, b, per_plateau + 1))
    grid = np.unique(np.concatenate(parts))
    return grid[(grid >= lo) & (grid <= hi)]


def phi_completion(traj: Trajectory, t: float, path_family: PathFamily | None = None,
                   side: str | None = None, measure: InteractionMeasure | None = None,
                   s_grid=None, window: tuple[float, float] | None = None) -> ParametrizedGraph:
    """The graph ``(X, U)`` at ``t``; at an interaction time ``side`` must be ``'-'`` or ``'+'``."""
    path_family = segment_family() if path_family is None else path_family
    measure = interaction_measure(traj) if measure is None else measure
    inv = X_eps(traj, t, measure, side)
    if s_grid is None:
        if window is None:
            xs = [f.position(t) for f in traj.fronts.values() if f.birth_time <= t]
            window = (min(xs + [0.0]) - 1.0, max(xs + [0.0]) + 1.0)
        s_grid = default_s_grid(inv, window)
    s_grid = np.asarray(s_grid, dtype=float)
    return ParametrizedGraph(s_grid, inv(s_grid), _evaluate_U(inv, s_grid, path_family), inv.plateaus())


def _union_eval(g: ParametrizedGraph, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    X = np.interp(s, g.s_grid, g.X)
    U = np.column_stack([np.interp(s, g.s_grid, g.U[:, k]) for k in range(g.U.shape[1])])
    return X, U


def graph_distance(g1: ParametrizedGraph, g2: ParametrizedGraph) -> float:
    """Sup over the common parameter range of ``|X1 - X2| + |U1 - U2|``."""
    lo = max(g1.s_grid[0], g2.s_grid[0])
    hi = min(g1.s_grid[-1], g2.s_grid[-1])
    s = np.unique(np.concatenate([g1.s_grid, g2.s_grid]))
    s = s[(s >= lo) & (s <= hi)]
    X1, U1 = _union_eval(g1, s)
    X2, U2 = _union_eval(g2, s)
    return float(np.max(np.abs(X1 - X2) + np.linalg.norm(U1 - U2, axis=1)))


def graph_l1(g1: ParametrizedGraph, g2: ParametrizedGraph) -> float:
    """L1 distance in ``s`` between the ``U`` components over the common range."""
    lo = max(g1.s_grid[0], g2.s_grid[0])
    hi = min(g1.s_grid[-1], g2.s_grid[-1])
    s = np.unique(np.concatenate([g1.s_grid, g2.s_grid]))
    s = s[(s >= lo) & (s <= hi)]
    s = np.unique(np.concatenate([s, 0.5 * (s[1:] + s[:-1])]))
    _, U1 = _union_eval(g1, s)
    _, U2 = _union_eval(g2, s)
    return float(trapezoid(np.linalg.norm(U1 - U2, axis=1), s))


def write_graph_csv(graph: ParametrizedGraph, path, t: float) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "s", "X"] + [f"U{k + 1}" for k in range(graph.U.shape[1])])
        for row in graph.rows():
            w.writerow([_fmt(t)] + [_fmt(v) for v in row])


def write_vertical_segments_csv(graphs: dict, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "s_minus", "s_plus", "x"])
        for t, g in graphs.items():
            for a, b, x in g.vertical_segments:
                w.writerow([_fmt(t), _fmt(a), _fmt(b), _fmt(x)])


# -- scenario-level checks ------------------------------------------------------------------


def modified_modulus(traj: Trajectory, C0: float, t: float, side: str = "+") -> float:
    """``(V + C0 Q)(t) + lam_inf * V(0) * (T - t)``: the Glimm quantity plus a linear drift.

    The drift term makes the modulus strictly decreasing between interactions,
    where fronts move and ``U`` changes while ``V + C0 Q`` stays constant.
    """
    vals = traj.functionals_at(t, side)
    lam_inf = traj.system.lambda_hat + 1.0
    return vals["V"] + C0 * vals["Q"] + lam_inf * traj.series[0]["V"] * (traj.t_end - t)


@dataclass
class GraphRegularity:
    inverse_error: float
    continuity_error: float
    jump_constant: float
    modulus_constant: float
    jumps: list = field(repr=False, default_factory=list)
    pairs: list = field(repr=False, default_factory=list)


def graph_regularity(traj: Trajectory, C0: float, pairs: int = 100, seed: int = 0,
                     path_family: PathFamily | None = None, max_events: int | None = None) -> GraphRegularity:
    """Sampled checks of the inverse identities, continuity of ``X``, and the ``U`` moduli.

    ``jump_constant`` is the largest ``|U(t0+) - U(t0-)|_L1 / (Q(t0-) - Q(t0+))`` over
    interactions; ``modulus_constant`` the largest ``|U(t) - U(t')|_L1 / |a(t) - a(t')|``
    over random time pairs, with ``a`` from :func:`modified_modulus`.
    """
    path_family = segment_family() if path_family is None else path_family
    measure = interaction_measure(traj)
    xs_all = [f.x_at_birth for f in traj.fronts.values()]
    lam = traj.system.lambda_hat + 1.0
    window = (min(xs_all) - 1.0, max(xs_all) + lam * traj.t_end + 1.0)
    rng = np.random.default_rng(seed)

    inverse_err = 0.0
    for t in rng.uniform(0.0, traj.t_end, 10):
        inv = X_eps(traj, float(t), measure, "+")
        x = np.concatenate([np.linspace(*window, 401), inv.items.positions])
        inverse_err = max(inverse_err, float(np.max(np.abs(inv(inv.sigma(x)) - x))))
        s = np.linspace(float(inv.sigma_left(np.array([window[0]]))[0]), float(inv.sigma(np.array([window[1]]))[0]),
                        401)
        Xs = inv(s)
        lo, hi = inv.sigma_left(Xs), inv.sigma(Xs)
        inverse_err = max(inverse_err, float(np.max(np.maximum(lo - s, 0.0))), float(np.max(np.maximum(s - hi, 0.0))))
        off = ~inv.locate(s)[1]
        if off.any():
            inverse_err = max(inverse_err, float(np.max(np.abs(inv.sigma(Xs[off]) - s[off]))))

    ledger = traj.ledger if max_events is None else traj.ledger[:max_events]
    cont_err, jump_c, jumps = 0.0, 0.0, []
    for r in ledger:
        before = X_eps(traj, r.time, measure, "-")
        after = X_eps(traj, r.time, measure, "+")
        s = np.linspace(float(before.sigma_left(np.array([window[0]]))[0]),
                        float(before.sigma(np.array([window[1]]))[0]), 801)
        s = np.concatenate([s, before.s_start, before.s_end])
        cont_err = max(cont_err, float(np.max(np.abs(before(s) - after(s)))))
        g_minus = phi_completion(traj, r.time, path_family, "-", measure, window=window)
        g_plus = phi_completion(traj, r.time, path_family, "+", measure, s_grid=g_minus.s_grid)
        dist = graph_l1(g_minus, g_plus)
        drop = -r.dQ
        jumps.append((r.index, dist, drop))
        if dist > 1e-13:
            jump_c = max(jump_c, dist / drop if drop > 0 else np.inf)

    out_pairs, mod_c = [], 0.0
    for _ in range(pairs):
        t1, t2 = sorted(rng.uniform(0.0, traj.t_end, 2))
        g1 = phi_completion(traj, float(t1), path_family, "+", measure, window=window)
        g2 = phi_completion(traj, float(t2), path_family, "+", measure, s_grid=g1.s_grid)
        dist = graph_l1(g1, g2)
        da = abs(modified_modulus(traj, C0, float(t1)) - modified_modulus(traj, C0, float(t2)))
        out_pairs.append((float(t1), float(t2), dist, da))
        if dist > 0:
            mod_c = max(mod_c, dist / da if da > 0 else np.inf)
    return GraphRegularity(inverse_err, cont_err, jump_c, mod_c, jumps, out_pairs)


def interaction_estimate_check(path_family: PathFamily, u_l, u_m, u_r, Q: float,
                               samples: int = 2001, tol: float = 1e-12) -> dict:
    """L1(0,1) distance between the path of ``(u_l, u_r)`` and the concatenated paths, against ``Q``.

    The concatenation is reparametrized by normalized arc length.  When both the
    distance and ``Q`` are below ``tol`` the ratio is reported as 0.
    """
    s = np.linspace(0.0, 1.0, samples)
    direct = path_family(s, u_l, u_r)
    first = path_family(s, u_l, u_m)
    second = path_family(s, u_m, u_r)
    knots, pts = _arc_length_path(np.vstack([first, second[1:]]))
    concat = np.column_stack([np.interp(s, knots, pts[:, k]) for k in range(pts.shape[1])])
    dist = float(trapezoid(np.linalg.norm(direct - concat, axis=1), s))
    if dist < tol and Q < tol:
        ratio = 0.0
    else:
        ratio = dist / Q if Q > 0 else np.inf
    return {"distance": dist, "Q": Q, "ratio": ratio}


def weak_residuals(traj: Trajectory, dtheta_t: Callable, dtheta_x: Callable, times: np.ndarray,
                   window: tuple[float, float], points: int = 4001) -> tuple[float, float]:
    """Space-time integrals of ``-u theta_t + f(u) theta_x`` computed in ``x`` and on the graph.

    The graph version integrates ``(-U theta_t(t, X) + f(U) theta_x(t, X)) dX/ds`` over ``s``
    with the midpoint rule on each grid cell, so plateaus (where ``dX/ds = 0``) drop out.
    """
    flux = traj.system.flux
    measure = interaction_measure(traj)

    def density(t, x, u):
        fu = np.array([flux(v) for v in u])
        return -(u * dtheta_t(t, x)[:, None]).sum(axis=1) + (fu * dtheta_x(t, x)[:, None]).sum(axis=1)

    direct, graph = 0.0, 0.0
    for t, w in zip(times, np.gradient(times)):
        t = float(t)
        xs = np.linspace(window[0], window[1], points)
        direct += w * float(trapezoid(density(t, xs, sample_profile(traj, xs, t)), xs))
        inv = X_eps(traj, t, measure, "+")
        lo = float(inv.sigma_left(np.array([window[0]]))[0])
        hi = float(inv.sigma(np.array([window[1]]))[0])
        s = np.unique(np.concatenate([np.linspace(lo, hi, points), inv.s_start, inv.s_end]))
        s = s[(s >= lo) & (s <= hi)]
        mid = 0.5 * (s[1:] + s[:-1])
        Xm = inv(mid)
        graph += w * float(np.sum(density(t, Xm, _evaluate_U(inv, mid, segment_family())) * np.diff(inv(s))))
    return direct, graph

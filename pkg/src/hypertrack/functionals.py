"""Glimm-type functionals of a front-tracking run and their monitors.

``V`` is the total strength, ``Q`` the interaction potential, ``Theta`` the
excess inner speed variation ``sum (isv - eps)_+ / eps`` over physical fronts
and ``N`` the number of physical fronts.  The monitors replay the interaction
ledger and check that ``V + C0 Q`` and ``F = C1 (V + C0 Q) + 3 Theta + N``
never increase.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import NotConservative
from .front_tracking import (ARTIFICIAL, Front, InteractionRecord, SimulationState, Trajectory, _fmt,
                             front_pair_potential)
from .system import EntropyPair, HyperbolicSystem

ROUNDING_SLACK = 1e-12


def _fronts(source) -> list[Front]:
    if isinstance(source, SimulationState):
        return source.fronts
    return list(source)


def compute_V_Q(source) -> tuple[float, float]:
    """Total strength and interaction potential of a front list (computed from scratch)."""
    fronts = _fronts(source)
    V = float(sum(f.size for f in fronts))
    Q = 0.0
    for a in range(len(fronts)):
        for b in range(a + 1, len(fronts)):
            Q += front_pair_potential(fronts[a], fronts[b])
    return V, Q


def compute_theta_eps(source, epsilon: float) -> float:
    return float(sum(max(f.isv - epsilon, 0.0) / epsilon for f in _fronts(source) if not f.artificial))


# -- series -------------------------------------------------------------------------------


@dataclass
class FunctionalSeries:
    """Values after each event; entry 0 is the initial line."""

    times: np.ndarray
    V: np.ndarray
    Q: np.ndarray
    Theta_eps: np.ndarray
    Ncount: np.ndarray
    V_art: np.ndarray
    C0: float = 1.0
    C1: float = 1.0

    @property
    def F(self) -> np.ndarray:
        return self.C1 * (self.V + self.C0 * self.Q) + 3.0 * self.Theta_eps + self.Ncount

    def rows(self) -> list[list]:
        return [[t, v, q, th, int(n), f, va] for t, v, q, th, n, f, va in
                zip(self.times, self.V, self.Q, self.Theta_eps, self.Ncount, self.F, self.V_art)]


def functional_series(traj: Trajectory, C0: float = 1.0, C1: float = 1.0) -> FunctionalSeries:
    s = traj.series
    return FunctionalSeries(np.array([e["t"] for e in s]), np.array([e["V"] for e in s]),
                            np.array([e["Q"] for e in s]), np.array([e["Theta"] for e in s]),
                            np.array([e["N"] for e in s]), np.array([e["Vart"] for e in s]), C0, C1)


def write_functionals_csv(series: FunctionalSeries, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "V", "Q", "Theta_eps", "N", "F", "V_art"])
        for row in series.rows():
            w.writerow([_fmt(v) for v in row])


# -- Glimm monotonicity ---------------------------------------------------------------------


def non_monotone(record: InteractionRecord) -> bool:
    """Same-family interaction of waves with opposite signs (a cancellation)."""
    fa, fb = record.families
    sa, sb = record.strengths
    return fa == fb != ARTIFICIAL and sa * sb < 0


def modified_amount(record: InteractionRecord, fronts: dict) -> float:
    """Interaction amount, or the smaller incoming jump for a cancellation."""
    if non_monotone(record):
        a, b = (fronts[i] for i in record.incoming)
        return float(min(np.linalg.norm(a.u_right - a.u_left), np.linalg.norm(b.u_right - b.u_left)))
    return record.I


@dataclass
class Violation:
    index: int
    time: float
    solver: str
    excess: float


@dataclass
class GlimmReport:
    C0: float
    checked: int
    violations: list
    fitted_c: float
    tolerance: float = ROUNDING_SLACK

    @property
    def ok(self) -> bool:
        return not self.violations


def monitor_glimm(traj: Trajectory, C0: float, tol: float = ROUNDING_SLACK) -> GlimmReport:
    """Check ``[V + C0 Q] <= 0`` at every event and fit the decrease rate ``c``.

    ``c`` is the largest constant with ``[V + C0 Q] <= -c * amount`` at every
    event with amount above 1e-10, where the amount is the interaction amount, or
    the smaller incoming jump for a cancellation.
    """
    violations, ratios = [], []
    for r in traj.ledger:
        change = r.dV + C0 * r.dQ
        if change > tol:
            violations.append(Violation(r.index, r.time, r.solver, change))
        amount = modified_amount(r, traj.fronts)
        if amount > 1e-10:
            ratios.append(-change / amount)
    fitted = float(min(ratios)) if ratios else math.inf
    return GlimmReport(C0, len(traj.ledger), violations, fitted, tol)


def calibrate_C0(trajectories: Iterable[Trajectory], max_power: int = 16,
                 tol: float = ROUNDING_SLACK) -> float:
    """Smallest power of two with no violation of the Glimm decrease on the battery."""
    records = [r for traj in trajectories for r in traj.ledger]
    for p in range(0, max_power + 1):
        C0 = 2.0 ** p
        if all(r.dV + C0 * r.dQ <= tol for r in records):
            return C0
    return math.inf


# -- F monotonicity and the per-family accounting ---------------------------------------------------


@dataclass
class TableRow:
    """Observed changes of one family at one event and the tabulated bounds."""

    index: int
    interaction: str
    role: str
    strategy: str
    family: int
    dN: int
    dTheta3: float
    bound_N: float
    bound_Theta3: float
    amount: float

    @property
    def label(self) -> str:
        return f"{self.interaction} | {self.role} | {self.strategy}"

    @property
    def excess(self) -> float:
        return max(self.dN - self.bound_N, self.dTheta3 - self.bound_Theta3, 0.0)


@dataclass
class FReport:
    C0: float
    C1: float
    checked: int
    violations: list
    required_C1: float
    rows: list = field(repr=False)
    fitted: dict = field(default_factory=dict)
    unreconciled: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def required_C1(traj: Trajectory, C0: float) -> float:
    """Smallest ``C1`` making F non-increasing over the ledger (``inf`` if none does)."""
    need = 0.0
    for r in traj.ledger:
        rest = 3.0 * r.dTheta + r.dN
        if rest <= ROUNDING_SLACK:
            continue
        drop = -(r.dV + C0 * r.dQ)
        if drop <= 0.0:
            return math.inf
        need = max(need, rest / drop)
    return need


def _table_rows(traj: Trajectory, r: InteractionRecord, eps: float) -> list[TableRow]:
    fronts = traj.fronts
    incoming = [fronts[i] for i in r.incoming]
    outgoing = [fronts[i] for i in r.outgoing]
    same = incoming[0].family == incoming[1].family
    kind = ("i=j" if same else "i!=j") + (", acc." if r.solver == "Accurate" else ", app.")
    amount = (min(abs(s) for s in r.strengths) if non_monotone(r) else r.I)
    theta_in = {}
    for f in incoming:
        if not f.artificial:
            theta_in[f.family] = max(theta_in.get(f.family, 0.0), f.isv)
    out_rows = []
    families = sorted({f.family for f in outgoing + incoming if not f.artificial})
    for k in families:
        n_in = sum(1 for f in incoming if f.family == k)
        n_out = sum(1 for f in outgoing if f.family == k)
        th = 3.0 * (sum(max(f.isv - eps, 0.0) for f in outgoing if f.family == k)
                    - sum(max(f.isv - eps, 0.0) for f in incoming if f.family == k)) / eps
        role = "i or j" if k in theta_in else "k other"
        split = bool(r.split_applied.get(k, False))
        strategy = "splitting" if split else "no splitting"
        t_in = theta_in.get(k, 0.0) / eps
        if role == "k other":
            bound_n, bound_t = (1.0 if r.solver == "Accurate" else 0.0), 0.0
        elif same:
            big = t_in
            bound_n, bound_t = ((big - 1.0, -big - 1.0) if split else (-1.0, 0.0))
            if n_out == 0:
                bound_n, bound_t = -float(n_in), 0.0
        else:
            bound_n, bound_t = ((t_in, -t_in - 1.0) if split else (0.0, 0.0))
            if n_out == 0:
                bound_n, bound_t = -float(n_in), 0.0
        out_rows.append(TableRow(r.index, kind, role, strategy, k, n_out - n_in, th, bound_n, bound_t, amount))
    return out_rows


def monitor_F(traj: Trajectory, C0: float, C1: float, tol: float = ROUNDING_SLACK) -> FReport:
    """Check ``[F] <= 0`` at every event and reconcile the per-family changes with the table.

    For each row label the fitted constant is the largest ``excess * eps / amount``
    where ``excess`` is how far the observed change of the front count or of
    ``3 Theta`` exceeds the tabulated value without its ``O(1/eps) amount``
    term.  Rows whose excess appears with zero amount are reported as
    unreconciled.  The slack ``tol`` applies to ``V + C0 Q`` and is scaled by ``C1``.
    """
    eps = traj.epsilon
    slack = tol * max(C1, 1.0)
    violations, rows, fitted, unreconciled = [], [], {}, []
    for r in traj.ledger:
        dF = C1 * (r.dV + C0 * r.dQ) + 3.0 * r.dTheta + r.dN
        if dF > slack:
            violations.append(Violation(r.index, r.time, r.solver, dF))
        for row in _table_rows(traj, r, eps):
            rows.append(row)
            if row.excess > 1e-9:
                if row.amount > 0.0:
                    fitted[row.label] = max(fitted.get(row.label, 0.0), row.excess * eps / row.amount)
                else:
                    unreconciled.append(row)
    return FReport(C0, C1, len(traj.ledger), violations, required_C1(traj, C0), rows, fitted, unreconciled)


def front_count_envelope(runs: Sequence[tuple[float, int]]) -> float:
    """Constant ``A`` of the envelope ``N <= A / delta`` fitted on ``(delta, max N)`` pairs."""
    return float(max(n * d for d, n in runs))


# -- generations ---------------------------------------------------------------------------------


@dataclass
class GenerationReport:
    times: np.ndarray
    k_max: int
    N: np.ndarray
    P: np.ndarray
    Theta_le: np.ndarray
    V: np.ndarray
    V_art: np.ndarray
    Q: np.ndarray
    gamma: float
    C4: float

    @property
    def geometric_decay(self) -> bool:
        return self.gamma < 1.0

    def rows(self) -> list[list]:
        out = []
        for i, t in enumerate(self.times):
            for k in range(1, self.k_max + 1):
                out.append([t, k, int(self.N[i, k - 1]), int(self.P[i, k - 1]), self.V[i, k - 1],
                            self.Q[i, k - 1]])
        return out


def _approaching_matrix(families: np.ndarray, n_sys: int) -> np.ndarray:
    fam = np.where(families == ARTIFICIAL, n_sys + 1, families)
    left, right = fam[:, None], fam[None, :]
    upper = np.triu(np.ones((len(fam), len(fam)), dtype=bool), 1)
    return upper & ((left == right) | (left > right))


def generation_accounting(traj: Trajectory, samples: int = 40, with_Q: bool = True) -> GenerationReport:
    """Generation-indexed counts at up to ``samples`` event times (after each event).

    ``N[k]`` counts fronts of generation ``k``; ``P[k]`` approaching pairs whose
    larger generation is ``k``; ``Theta_le[k]`` the excess variation of
    generations ``<= k``; ``V[k]``, ``V_art[k]`` and ``Q[k]`` the strength,
    artificial strength and potential carried by generation ``>= k``.
    ``gamma`` is the least-squares decay ratio of ``max_t V[k]`` over ``k >= 2``.
    """
    eps = traj.epsilon
    k_max = max([f.generation for f in traj.fronts.values()] + [1])
    n_events = len(traj.ledger)
    picks = np.unique(np.linspace(0, n_events, min(samples, n_events + 1)).astype(int))
    times, Ns, Ps, Ths, Vs, Vas, Qs = [], [], [], [], [], [], []
    for e in picks:
        order = traj.initial_order if e == 0 else traj.ledger[e - 1].order_after
        fronts = [traj.fronts[i] for i in order]
        times.append(0.0 if e == 0 else traj.ledger[e - 1].time)
        gens = np.array([f.generation for f in fronts], dtype=int)
        fams = np.array([f.family for f in fronts], dtype=int)
        sizes = np.array([f.size for f in fronts])
        art = fams == ARTIFICIAL
        theta = np.array([0.0 if f.artificial else max(f.isv - eps, 0.0) / eps for f in fronts])
        N = np.array([np.sum(gens == k) for k in range(1, k_max + 1)])
        if len(fronts):
            appr = _approaching_matrix(fams, traj.system.n)
            pair_gen = np.maximum(gens[:, None], gens[None, :])
            P = np.array([np.sum(appr & (pair_gen == k)) for k in range(1, k_max + 1)])
        else:
            P = np.zeros(k_max, dtype=int)
        Th = np.array([theta[gens <= k].sum() for k in range(1, k_max + 1)])
        V = np.array([sizes[gens >= k].sum() for k in range(1, k_max + 1)])
        Va = np.array([sizes[(gens >= k) & art].sum() for k in range(1, k_max + 1)])
        Q = np.zeros(k_max)
        if with_Q:
            for a in range(len(fronts)):
                for b in range(a + 1, len(fronts)):
                    value = front_pair_potential(fronts[a], fronts[b])
                    if value:
                        Q[: max(fronts[a].generation, fronts[b].generation)] += value
        Ns.append(N), Ps.append(P), Ths.append(Th), Vs.append(V), Vas.append(Va), Qs.append(Q)
    V_arr = np.array(Vs)
    peak = V_arr.max(axis=0)
    ks = np.arange(1, k_max + 1)
    use = (ks >= 2) & (peak > 0)
    if use.sum() >= 2:
        slope = np.polyfit(ks[use], np.log(peak[use]), 1)[0]
        gamma = float(np.exp(slope))
        C4 = float(np.max(peak[use] / gamma ** ks[use]))
    else:
        gamma, C4 = 0.0, float(peak[0]) if len(peak) else 0.0
    return GenerationReport(np.array(times), k_max, np.array(Ns), np.array(Ps), np.array(Ths), V_arr,
                            np.array(Vas), np.array(Qs), gamma, C4)


def write_generations_csv(report: GenerationReport, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "k", "N_k", "P_k", "V_k", "Q_k"])
        for row in report.rows():
            w.writerow([_fmt(v) for v in row])


# -- entropy ------------------------------------------------------------------------------------


def kruzkov_pair(system: HyperbolicSystem, kappa: float) -> EntropyPair:
    """``eta = |u - kappa|`` with its flux, for scalar laws."""
    if system.n != 1:
        raise NotConservative("Kruzkov entropies are defined for scalar laws only")
    f = system.scalar_flux
    return EntropyPair(lambda u: abs(float(u[0]) - kappa),
                       lambda u: math.copysign(1.0, float(u[0]) - kappa) * (f(float(u[0])) - f(kappa)))


@dataclass
class BumpTest:
    """Smooth compactly supported test function ``amp * b((t - t0)/wt) * b((x - x0)/wx)``."""

    t0: float
    wt: float
    x0: float
    wx: float
    amp: float = 1.0

    @staticmethod
    def _b(z):
        z = np.asarray(z, dtype=float)
        out = np.zeros_like(z)
        inside = np.abs(z) < 1.0
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - z[inside] ** 2))
        return out

    def __call__(self, t, x):
        return self.amp * self._b((t - self.t0) / self.wt) * self._b((x - self.x0) / self.wx)

    @property
    def c1_norm(self) -> float:
        # max |b| = 1 and max |b'| is about 1.5 for this bump
        return self.amp * (1.0 + 1.5 / min(self.wt, self.wx))

    @classmethod
    def random(cls, rng: np.random.Generator, t_range: tuple[float, float], x_range: tuple[float, float]):
        t_lo, t_hi = t_range
        x_lo, x_hi = x_range
        wt = rng.uniform(0.2, 0.5) * (t_hi - t_lo)
        wx = rng.uniform(0.1, 0.4) * (x_hi - x_lo)
        t0 = rng.uniform(t_lo + wt, t_hi - wt)
        x0 = rng.uniform(x_lo + wx, x_hi - wx)
        return cls(t0, wt, x0, wx, 1.0)


@dataclass
class EntropyResidual:
    total: float
    per_front: dict
    normalized_defect: dict


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(4)


def entropy_residual(traj: Trajectory, test_fn: Callable, entropy_pair: EntropyPair | None = None,
                     t_end: float | None = None, pieces: int = 16) -> EntropyResidual:
    """Sum over fronts of the integral of ``(speed [eta] - [q]) * phi`` along the front.

    For non-negative ``phi`` the exact entropy solution makes this non-negative
    (an admissible Burgers shock from 1 to 0 contributes ``+1/12`` per unit time
    and unit ``phi``).  Each straight segment is cut into ``pieces`` parts,
    each integrated with 4-point Gauss-Legendre.
    """
    system = traj.system
    if not system.conservative:
        raise NotConservative(f"{system.name} is not in conservation form")
    pair = entropy_pair or system.entropy
    if pair is None:
        raise NotConservative(f"no entropy pair available for {system.name}")
    t_end = traj.t_end if t_end is None else t_end
    total, per_front, defect = 0.0, {}, {}
    for f in traj.fronts.values():
        if f.birth_time >= t_end:
            continue
        jump_eta = pair.eta(f.u_right) - pair.eta(f.u_left)
        jump_q = pair.q(f.u_right) - pair.q(f.u_left)
        acc = 0.0
        death = min(f.death_time, t_end)
        segs = f.segments
        for k, (t0, x0, v) in enumerate(segs):
            t1 = segs[k + 1][0] if k + 1 < len(segs) else death
            t1 = min(t1, death)
            if t1 <= t0:
                continue
            density = v * jump_eta - jump_q
            edges = np.linspace(t0, t1, pieces + 1)
            half = 0.5 * (edges[1:] - edges[:-1])
            mid = 0.5 * (edges[1:] + edges[:-1])
            ts = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
            w = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
            acc += density * float(np.sum(w * test_fn(ts, x0 + v * (ts - t0))))
        if acc != 0.0:
            per_front[f.id] = acc
            defect[f.id] = min(acc, 0.0) / (traj.epsilon * max(f.size, 1e-300))
        total += acc
    return EntropyResidual(total, per_front, defect)


def conservation_drift(traj: Trajectory, window: tuple[float, float], t: float) -> float:
    """Change of the integral of the solution over ``window`` between 0 and ``t``."""
    from .front_tracking import integral_of_solution

    return float(np.linalg.norm(integral_of_solution(traj, t, window) - integral_of_solution(traj, 0.0, window)))

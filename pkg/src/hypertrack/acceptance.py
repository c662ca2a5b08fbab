"""The acceptance battery: twelve numbered checks with fixed tolerances.

Each ``criterion_<k>`` returns a :class:`CriterionResult`.  ``quick=True``
shrinks the batteries (fewer seeds and trials) but keeps every tolerance.
Independent simulation runs go through :func:`parallel_map`, which honours
the ``HYPERTRACK_THREADS`` environment variable.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import TVBudgetExceeded
from .front_tracking import Breakpoints, front_violations, random_steps, sample_profile, simulate
from .functionals import BumpTest, entropy_residual, front_count_envelope
from .graph import graph_regularity
from .nonlinearity import find_full_degeneracy, pi_coefficients
from .oracles import convergence_rate, l1_piecewise, oleinik_riemann
from .riemann import check_strength_estimate, sample_riemann, solve_riemann
from .system import builtin, with_bump
from .wave_curves import curve_endpoint, hugoniot_curve, rarefaction_curve

SWEEP = (0.2, 0.1, 0.05, 0.025)
GLIMM_SLACK = 1e-12


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    summary: str
    details: dict = field(default_factory=dict, repr=False)
    seconds: float = 0.0

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] {self.number:2d} {self.title}: {self.summary} ({self.seconds:.1f} s)"


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("HYPERTRACK_THREADS", "1")))
    except ValueError:
        return 1


def parallel_map(fn: Callable, items: list) -> list:
    """``[fn(x) for x in items]``, spread over worker processes when allowed."""
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# -- 1: scalar Riemann problems against the hull oracle -----------------------------------------


def _scalar_case(system, ul: float, ur: float) -> tuple[float, float]:
    oracle = oleinik_riemann(system.scalar_flux, system.scalar_speed, ul, ur, poly=system.poly)
    sol = solve_riemann(system, [ul], [ur])
    packet = sol.packets[0]
    speed_err = 0.0
    if not packet.is_empty:
        ts = np.linspace(0.0, packet.length, 129)
        ours = np.array([packet.speed_t(t) for t in ts])
        states = np.array([packet.state_t(t)[0] for t in ts])
        speed_err = float(np.max(np.abs(ours - oracle.speed_at_state(states))))
    lo, hi = sol.speed_range
    window = (min(lo, hi) - 0.5, max(lo, hi) + 0.5)
    breaks = list(oracle.xi_breaks) + [pc.sigma for pc in packet.pieces if pc.kind == "shock"]
    state_err = l1_piecewise(lambda xs: np.array([sample_riemann(sol, x)[0] for x in xs]), oracle,
                             breaks, window)
    return speed_err, state_err


def criterion_1(quick: bool = False) -> CriterionResult:
    trials = 40 if quick else 200
    rng = np.random.default_rng(20240101)
    worst = {}
    for name in ("burgers", "cubic", "buckley_leverett"):
        system = builtin(name)
        errs = [_scalar_case(system, *rng.uniform(-1.0, 1.0, 2)) for _ in range(trials)]
        worst[name] = (max(e[0] for e in errs), max(e[1] for e in errs))
    speed = max(v[0] for v in worst.values())
    state = max(v[1] for v in worst.values())
    ok = speed < 1e-8 and state < 1e-8
    return CriterionResult(1, "Scalar Riemann exactness", ok,
                           f"speed Linf {speed:.2e}, state L1 {state:.2e} over {trials} pairs per flux (tol 1e-8)",
                           {"per_flux": worst})


# -- 2: composite wave of the cubic flux ----------------------------------------------------------


def criterion_2(quick: bool = False) -> CriterionResult:
    sol = solve_riemann(builtin("cubic"), [1.0], [-1.0])
    packet = sol.packets[0]
    shock = packet.pieces[0]
    errs = {
        "shock_speed": abs(shock.sigma - 0.75),
        "attachment": abs(float(shock.u_plus[0]) + 0.5),
        "isv": abs(packet.isv - 2.25),
    }
    ok = shock.kind == "shock" and max(errs.values()) < 1e-8
    return CriterionResult(2, "Composite-wave fixture", ok,
                           ", ".join(f"{k} err {v:.1e}" for k, v in errs.items()) + " (tol 1e-8)", errs)


# -- 3: convergence of front tracking on Riemann data ------------------------------------------------


def _riemann_error(args) -> float:
    name, ul, ur, eps = args
    system = builtin(name)
    traj = simulate(system, Breakpoints([0.0], [[ul], [ur]]), eps, 1.0)
    oracle = oleinik_riemann(system.scalar_flux, system.scalar_speed, ul, ur, poly=system.poly)
    fronts = traj.fronts_at(1.0)
    breaks = [f.position(1.0) for f in fronts] + list(oracle.xi_breaks)
    lo = min(breaks + [0.0]) - 0.5
    hi = max(breaks + [0.0]) + 0.5
    return l1_piecewise(lambda xs: sample_profile(traj, xs, 1.0)[:, 0], oracle, breaks, (lo, hi))


def criterion_3(quick: bool = False) -> CriterionResult:
    cases = {"burgers 0->1": ("burgers", 0.0, 1.0), "cubic 1->-1": ("cubic", 1.0, -1.0)}
    slopes, errors = {}, {}
    for label, (name, ul, ur) in cases.items():
        errs = parallel_map(_riemann_error, [(name, ul, ur, e) for e in SWEEP])
        errors[label] = errs
        slopes[label] = convergence_rate(errs, SWEEP)
    ok = all(s >= 0.8 for s in slopes.values())
    return CriterionResult(3, "Front-tracking convergence", ok,
                           ", ".join(f"{k} slope {v:.2f}" for k, v in slopes.items()) + " (need >= 0.8)",
                           {"errors": errors, "slopes": slopes})


# -- 4, 5, 6: the random-data battery -----------------------------------------------------------------


@dataclass
class RunSummary:
    """Everything the battery criteria need from one run (cheap to ship between processes)."""

    label: str
    epsilon: float
    delta: float
    interactions: int
    completed: bool
    dV: np.ndarray
    dQ: np.ndarray
    dTheta: np.ndarray
    dN: np.ndarray
    max_N: int
    max_Vart: float
    physical_fronts: int
    discipline: list


def battery_run(config: tuple) -> RunSummary | None:
    """Run ``(system, params, jumps, amplitude, seed, epsilon, t_end, delta_factor)``.

    ``delta_factor`` scales the default ``delta``; ``None`` is returned when the
    random data exceed the total-variation budget.
    """
    name, params, jumps, amp, seed, eps, t_end, delta_factor = config
    system = builtin(name, params)
    delta = None if delta_factor is None else delta_factor * min(eps ** 3, eps ** 2 / 10.0)
    try:
        data = random_steps(system, jumps, amp, seed)
        traj = simulate(system, data, eps, t_end, delta=delta)
    except TVBudgetExceeded:
        return None
    led = traj.ledger
    discipline = []
    physical = 0
    for f in traj.fronts.values():
        if f.artificial:
            continue
        physical += 1
        discipline.extend(front_violations(f, eps, system.lambda_hat))
    return RunSummary(
        f"{name} seed={seed} eps={eps}", eps, traj.delta, len(led), traj.status == "completed",
        np.array([r.dV for r in led]), np.array([r.dQ for r in led]),
        np.array([r.dTheta for r in led]), np.array([r.dN for r in led], dtype=float),
        int(max(e["N"] for e in traj.series)), float(max(e["Vart"] for e in traj.series)), physical, discipline,
    )


def _battery_configs(seeds: range, quick: bool) -> list[tuple]:
    configs = []
    for s in seeds:
        configs.append(("burgers", (), 20, 1.0, s, 0.05, 3.0, None))
        configs.append(("cubic", (), 20, 0.8, s, 0.05, 3.0, None))
        configs.append(("p_system", (), 10, 0.015, s, 0.1, 3.0, None))
    if not quick:
        for s in seeds[:2]:
            configs.append(("burgers", (), 40, 1.0, s, 0.025, 2.0, None))
            configs.append(("cubic", (), 40, 0.8, s, 0.025, 2.0, None))
    return configs


_BATTERY_CACHE: dict = {}


def main_battery(quick: bool = False) -> tuple[list[RunSummary], list[RunSummary]]:
    """Calibration runs and test runs (disjoint seeds), memoised per process."""
    key = bool(quick)
    if key not in _BATTERY_CACHE:
        n = 4 if quick else 20
        calib = [r for r in parallel_map(battery_run, _battery_configs(range(1000, 1000 + max(2, n // 4)), True))
                 if r is not None]
        test = [r for r in parallel_map(battery_run, _battery_configs(range(n), quick)) if r is not None]
        _BATTERY_CACHE[key] = (calib, test)
    return _BATTERY_CACHE[key]


def calibrate_from_summaries(runs: list[RunSummary], max_power: int = 16) -> float:
    dV = np.concatenate([r.dV for r in runs]) if runs else np.empty(0)
    dQ = np.concatenate([r.dQ for r in runs]) if runs else np.empty(0)
    for p in range(max_power + 1):
        if np.all(dV + 2.0 ** p * dQ <= GLIMM_SLACK):
            return 2.0 ** p
    return math.inf


def criterion_4(quick: bool = False) -> CriterionResult:
    calib, test = main_battery(quick)
    C0 = calibrate_from_summaries(calib)
    total = sum(r.interactions for r in test)
    violations = sum(int(np.sum(r.dV + C0 * r.dQ > GLIMM_SLACK)) for r in test)
    need = 2_000 if quick else 10_000
    ok = math.isfinite(C0) and violations == 0 and total >= need
    return CriterionResult(4, "Glimm monotonicity", ok,
                           f"C0 = {C0:g}, {violations} violations over {total} interactions (need >= {need})",
                           {"C0": C0, "runs": len(test)})


def _n_envelope(quick: bool) -> tuple[float, list, list]:
    seeds = range(3 if quick else 8)
    base, half = [], []
    for s in seeds:
        for name, jumps, amp in (("p_system", 10, 0.015), ("burgers", 10, 1.0)):
            base.append((name, (), jumps, amp, 500 + s, 0.1, 2.0, 1.0))
            half.append((name, (), jumps, amp, 500 + s, 0.1, 2.0, 0.5))
    runs_a = [r for r in parallel_map(battery_run, base) if r is not None]
    runs_b = [r for r in parallel_map(battery_run, half) if r is not None]
    A = front_count_envelope([(r.delta, r.max_N) for r in runs_a])
    return A, runs_a, runs_b


def criterion_5(quick: bool = False) -> CriterionResult:
    calib, test = main_battery(quick)
    C0 = calibrate_from_summaries(calib)
    A, runs_a, runs_b = _n_envelope(quick)
    violations, worst = 0, 0.0
    for r in test + runs_a + runs_b:
        C1 = 1.0 / r.delta
        dF = C1 * (r.dV + C0 * r.dQ) + 3.0 * r.dTheta + r.dN
        violations += int(np.sum(dF > GLIMM_SLACK * C1))
        worst = max(worst, float(np.max(dF, initial=-np.inf)))
    finished = all(r.completed for r in test + runs_a + runs_b)
    over = [r.label for r in runs_a + runs_b if r.max_N > A / r.delta]
    ok = violations == 0 and finished and not over
    return CriterionResult(5, "F monotonicity and front finiteness", ok,
                           f"C1 = 1/delta, {violations} increases of F, all runs finished: {finished}, "
                           f"N <= {A:.3g}/delta on {len(runs_a) + len(runs_b)} runs "
                           f"({len(over)} over)", {"A": A, "worst_dF": worst})


def criterion_6(quick: bool = False) -> CriterionResult:
    _, test = main_battery(quick)
    fronts = sum(r.physical_fronts for r in test)
    problems = [p for r in test for p in r.discipline]
    return CriterionResult(6, "ISV and speed discipline", not problems,
                           f"{len(problems)} violations over {fronts} physical fronts",
                           {"examples": problems[:5]})


# -- 7: artificial strength ----------------------------------------------------------------------


def criterion_7(quick: bool = False) -> CriterionResult:
    seeds = range(8 if quick else 24)
    peaks = []
    for eps in SWEEP:
        runs = parallel_map(battery_run, [("p_system", (), 4, 0.04, s, eps, 1.0, None) for s in seeds])
        peaks.append(max(r.max_Vart for r in runs if r is not None))
    slope = convergence_rate(peaks, SWEEP)
    bound = max(v / e for v, e in zip(peaks, SWEEP))
    ok = slope >= 0.8
    return CriterionResult(7, "Artificial-strength scaling", ok,
                           f"max Vart {', '.join(f'{v:.2e}' for v in peaks)}; slope {slope:.2f} (need >= 0.8); "
                           f"max Vart/eps {bound:.2e}", {"peaks": peaks, "slope": slope})


# -- 8: entropy residual ------------------------------------------------------------------------------


def _entropy_case(args) -> list[float]:
    eps, seed, tests = args
    system = builtin("burgers")
    traj = simulate(system, random_steps(system, 4, 1.0, seed), eps, 1.0)
    return [entropy_residual(traj, phi).total for phi in tests]


def criterion_8(quick: bool = False) -> CriterionResult:
    rng = np.random.default_rng(8)
    tests = [BumpTest.random(rng, (0.0, 1.0), (-0.2, 1.2)) for _ in range(20)]
    seeds = range(2 if quick else 5)
    consts = []
    for eps in SWEEP:
        res = [v for row in parallel_map(_entropy_case, [(eps, s, tests) for s in seeds]) for v in row]
        consts.append(max(0.0, -min(res)) / eps)
    ref = consts[0]
    ok = ref > 0 and max(consts) <= 2.0 * ref
    return CriterionResult(8, "Entropy residual", ok,
                           f"C(eps) = {', '.join(f'{c:.3g}' for c in consts)} (must stay <= 2 C(0.2))",
                           {"constants": consts})


# -- 9: tangency orders ----------------------------------------------------------------------------------


def curve_gap_slope(system, j: int, u0, spans) -> float:
    """Log-log slope of the distance between the Hugoniot and integral curves from ``u0``."""
    u0 = np.asarray(u0, dtype=float)
    m0 = system.mu(u0)
    gaps = []
    for dm in spans:
        w = rarefaction_curve(system, j, u0, m0 + dm, h=dm / 200)[-1].state
        v = hugoniot_curve(system, j, u0, m0 + dm, h=dm / 20)[-1].state
        gaps.append(float(np.linalg.norm(v - w)))
    return float(np.polyfit(np.log(spans), np.log(gaps), 1)[0])


def criterion_9(quick: bool = False) -> CriterionResult:
    p1 = builtin("p_system")
    s1 = curve_gap_slope(p1, 1, p1.base_state + np.array([0.02, 0.01]), np.logspace(-3, -1.3, 8))
    p2 = builtin("p_system", [1.0], pressure="cubic")
    s2 = curve_gap_slope(p2, 2, p2.base_state, np.logspace(-2, -0.8, 8))
    ok = s1 >= 1.7 + 1.0 and s2 >= 2.7 + 1.0
    return CriterionResult(9, "Tangency orders", ok,
                           f"p=1 slope {s1:.2f} (need >= 2.7), p=2 slope {s2:.2f} (need >= 3.7)",
                           {"p1": s1, "p2": s2})


# -- 10: nondegeneracy fixtures ----------------------------------------------------------------------------


def criterion_10(quick: bool = False) -> CriterionResult:
    tri = builtin("triangular_counterexample")
    rng = np.random.default_rng(10)
    fixture = 0.0
    for _ in range(10):
        u = rng.uniform(-0.1, 0.1, 2)
        pi = pi_coefficients(tri, u, 2, 2)
        fixture = max(fixture, float(np.max(np.abs(pi - [2 * u[0] + 12 * u[1] ** 2, 24 * u[1]]))))
    found = []
    for _ in range(5):
        bumped = with_bump(tri, 1e-3, rng.uniform(-0.05, 0.05, 2), 0.3, rng.normal(size=2))
        u = find_full_degeneracy(bumped, 2, tri.delta2)
        found.append(math.inf if u is None else float(np.linalg.norm(pi_coefficients(bumped, u, 2, 2))))
    ok = fixture < 1e-6 and max(found) < 1e-6
    return CriterionResult(10, "ND/degeneracy fixtures", ok,
                           f"fixture error {fixture:.1e}, degenerate |pi| {max(found):.1e} on 5 bumps (tol 1e-6)",
                           {"residuals": found})


# -- 11: graph regularity ------------------------------------------------------------------------------------


def _graph_case(seed: int):
    system = builtin("cubic")
    traj = simulate(system, random_steps(system, 8, 0.8, seed), 0.1, 1.0)
    rep = graph_regularity(traj, 1.0, pairs=100, seed=seed)
    return traj.interactions, rep.inverse_error, rep.continuity_error, rep.jump_constant, rep.modulus_constant


def criterion_11(quick: bool = False) -> CriterionResult:
    n = 2 if quick else 3
    first = parallel_map(_graph_case, list(range(n)))
    second = parallel_map(_graph_case, list(range(n, 2 * n)))
    inverse = max(r[1] for r in first + second)
    cont = max(r[2] for r in first + second)
    jump_a, jump_b = max(r[3] for r in first), max(r[3] for r in second)
    mod_a, mod_b = max(r[4] for r in first), max(r[4] for r in second)
    C_jump, C_mod = max(jump_a, jump_b), max(mod_a, mod_b)
    stable = jump_b <= 2.0 * jump_a and mod_b <= 2.0 * mod_a
    ok = inverse < 1e-12 and cont < 1e-9 and math.isfinite(C_jump) and math.isfinite(C_mod) and stable
    events = sum(r[0] for r in first + second)
    return CriterionResult(11, "Graph regularity", ok,
                           f"inverse identities {inverse:.1e}, X jump {cont:.1e}, U jump C = {C_jump:.3g}, "
                           f"modulus C = {C_mod:.3g} over {events} interactions (held-out <= 2x calibration: {stable})",
                           {"jump": (jump_a, jump_b), "modulus": (mod_a, mod_b)})


# -- 12: interaction estimate ratios --------------------------------------------------------------------------


def _ratio_batch(args) -> float:
    """Largest residual/potential ratio over random triples near the base state.

    Half the triples are unconstrained; the other half put both waves on one
    wave curve of a random family, where the estimate is tightest.
    """
    name, seed, trials, amp = args
    system = builtin(name)
    base = system.base_state
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        u = [base + amp * rng.uniform(-1.0, 1.0, system.n) for _ in range(3)]
        worst = max(worst, check_strength_estimate(system, *u).ratio)
        j = int(rng.integers(1, system.n + 1))
        u_l = base + 0.5 * amp * rng.uniform(-1.0, 1.0, system.n)
        u_m = curve_endpoint(system, j, u_l, amp * rng.uniform(-1.0, 1.0))
        u_r = curve_endpoint(system, j, u_m, amp * rng.uniform(-1.0, 1.0))
        worst = max(worst, check_strength_estimate(system, u_l, u_m, u_r).ratio)
    return worst


def criterion_12(quick: bool = False) -> CriterionResult:
    trials = 15 if quick else 40
    out, ok = {}, True
    for name in ("p_system", "shallow_water"):
        batches = parallel_map(_ratio_batch, [(name, 300 + b, trials, 0.02) for b in range(3)])
        spread = max(batches) / min(batches) if min(batches) > 0 else math.inf
        out[name] = (batches, spread)
        ok = ok and all(math.isfinite(b) for b in batches) and spread < 2.0
    return CriterionResult(12, "Interaction-estimate ratios", ok,
                           "; ".join(f"{k} max ratios {', '.join(f'{b:.3g}' for b in v[0])} (spread {v[1]:.2f}x)"
                                     for k, v in out.items()) + " (need < 2x)", {"batches": out})


CRITERIA = {k: globals()[f"criterion_{k}"] for k in range(1, 13)}


def run_criterion(number: int, quick: bool = False) -> CriterionResult:
    start = time.perf_counter()
    result = CRITERIA[number](quick)
    result.seconds = time.perf_counter() - start
    return result


def run_battery(numbers=None, quick: bool = False, echo: Callable | None = print) -> list[CriterionResult]:
    results = []
    for k in numbers or sorted(CRITERIA):
        r = run_criterion(k, quick)
        if echo is not None:
            echo(r.line())
        results.append(r)
    return results

from __future__ import annotations

import numpy as np
import pytest
from scipy.integrate import quad

from hypertrack.errors import NotConservative
from hypertrack.front_tracking import ARTIFICIAL, Breakpoints, Front, random_steps, simulate
from hypertrack.functionals import (BumpTest, calibrate_C0, compute_theta_eps, compute_V_Q, entropy_residual,
                                    front_count_envelope, functional_series, generation_accounting,
                                    kruzkov_pair, monitor_F, monitor_glimm, required_C1)


def _front(family: int, strength: float, isv: float = 0.0) -> Front:
    return Front(-1, family, np.zeros(2), np.zeros(2), strength, 0.0, isv=isv)


def test_V_Q_of_non_approaching_fronts() -> None:
    assert compute_V_Q([_front(1, -0.1), _front(2, 0.2)]) == pytest.approx((0.3, 0.0))


def test_V_Q_of_approaching_fronts() -> None:
    V, Q = compute_V_Q([_front(2, 0.1), _front(1, -0.2)])
    assert V == pytest.approx(0.3) and Q == pytest.approx(0.02)


def test_artificial_front_weighs_only_against_the_right() -> None:
    art = _front(ARTIFICIAL, 1e-3)
    assert compute_V_Q([art, _front(1, 0.5)])[1] == pytest.approx(5e-4)
    assert compute_V_Q([_front(1, 0.5), art])[1] == 0.0


def test_theta_counts_excess_variation() -> None:
    eps = 0.1
    fronts = [_front(1, 0.1, isv=1.5 * eps), _front(2, 0.1, isv=0.5 * eps), _front(ARTIFICIAL, 0.1, isv=9.0)]
    assert compute_theta_eps(fronts, eps) == pytest.approx(0.5)


def test_merging_shocks_lower_the_potential(burgers) -> None:
    traj = simulate(burgers, Breakpoints([0.0, 1.0], [[1.0], [0.5], [0.0]]), 0.1, 5.0)
    report = monitor_glimm(traj, C0=1.0)
    assert report.ok and report.checked == 1
    (r,) = traj.ledger
    assert r.dV == pytest.approx(0.0, abs=1e-14) and r.dQ < 0.0


def test_cancellation_lowers_the_strength(burgers) -> None:
    traj = simulate(burgers, Breakpoints([0.0, 1.0], [[0.0], [1.0], [0.0]]), 0.1, 6.0)
    report = monitor_glimm(traj, C0=1.0)
    assert report.ok and report.fitted_c > 0.0
    series = functional_series(traj)
    assert series.V[-1] < series.V[0]
    assert np.all(np.diff(series.V) <= 1e-12)


def test_series_F_formula(burgers) -> None:
    traj = simulate(burgers, random_steps(burgers, 6, 1.0, 2), 0.1, 1.0)
    s = functional_series(traj, C0=2.0, C1=10.0)
    np.testing.assert_allclose(s.F, 10.0 * (s.V + 2.0 * s.Q) + 3.0 * s.Theta_eps + s.Ncount)
    assert s.times[0] == 0.0 and len(s.times) == traj.interactions + 1


@pytest.fixture(scope="module")
def cubic_run(cubic):
    return simulate(cubic, random_steps(cubic, 8, 0.8, 5), 0.1, 2.0)


def test_F_never_increases_on_a_cubic_run(cubic_run) -> None:
    C0 = calibrate_C0([cubic_run])
    assert np.isfinite(C0)
    C1 = max(required_C1(cubic_run, C0), 1.0 / cubic_run.delta)
    report = monitor_F(cubic_run, C0, C1)
    assert report.ok and report.checked == cubic_run.interactions
    assert monitor_glimm(cubic_run, C0).ok


def test_required_C1_is_the_threshold(cubic_run) -> None:
    C0 = calibrate_C0([cubic_run])
    need = required_C1(cubic_run, C0)
    if need > 0.0:
        assert not monitor_F(cubic_run, C0, 0.5 * need).ok
    assert monitor_F(cubic_run, C0, need * (1.0 + 1e-9) + 1e-9).ok


def test_front_count_envelope() -> None:
    assert front_count_envelope([(0.01, 5), (0.001, 30)]) == pytest.approx(0.05)


def test_generation_accounting_is_consistent(p_system) -> None:
    traj = simulate(p_system, random_steps(p_system, 8, 0.02, 3), 0.1, 2.0)
    rep = generation_accounting(traj, samples=10)
    assert rep.k_max >= 2
    series = {e["t"]: e for e in traj.series}
    for i, t in enumerate(rep.times):
        assert rep.V[i, 0] == pytest.approx(series[t]["V"], rel=1e-12)
        assert rep.V_art[i, 0] == pytest.approx(series[t]["Vart"], rel=1e-9, abs=1e-20)
        assert np.all(np.diff(rep.V[i]) <= 1e-15)
        assert np.all(np.diff(rep.Theta_le[i]) >= 0.0)
    assert rep.N[0].sum() == len(traj.fronts_at(0.0))


def test_single_shock_has_one_generation(burgers) -> None:
    traj = simulate(burgers, Breakpoints([0.0], [[1.0], [0.0]]), 0.1, 1.0)
    rep = generation_accounting(traj)
    assert rep.k_max == 1 and rep.N.tolist() == [[1]] and rep.P.tolist() == [[0]]


@pytest.mark.parametrize("ul, ur", [(1.0, 0.0), (1.2, -0.3)])
def test_burgers_shock_entropy_dissipation(burgers, ul: float, ur: float) -> None:
    traj = simulate(burgers, Breakpoints([0.0], [[ul], [ur]]), 0.1, 2.0)
    phi = BumpTest(1.0, 0.8, 0.0, 3.0)
    speed = 0.5 * (ul + ur)
    weight, _ = quad(lambda t: float(phi(np.array([t]), np.array([speed * t]))[0]), 0.0, 2.0, epsabs=1e-13)
    exact = (ul - ur) ** 3 / 12.0 * weight
    res = entropy_residual(traj, phi)
    assert res.total == pytest.approx(exact, rel=1e-5)
    assert entropy_residual(traj, phi, pieces=256).total == pytest.approx(exact, rel=1e-10)
    assert all(v >= 0.0 for v in res.per_front.values())


def test_constant_solution_has_no_residual(burgers) -> None:
    traj = simulate(burgers, Breakpoints([], [[0.3]]), 0.1, 1.0)
    assert entropy_residual(traj, BumpTest(0.5, 0.4, 0.0, 1.0)).total == 0.0


def test_kruzkov_pair_scalar_only(burgers, p_system) -> None:
    pair = kruzkov_pair(burgers, 0.5)
    assert pair.eta(np.array([1.0])) == 0.5
    assert pair.q(np.array([1.0])) == pytest.approx(0.5 - 0.125)
    with pytest.raises(NotConservative):
        kruzkov_pair(p_system, 0.5)

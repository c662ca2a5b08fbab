from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypertrack.front_tracking import (ARTIFICIAL, Breakpoints, front_violations, integral_of_solution,
                                       random_steps, sample_profile, simulate, split_strategy)
from hypertrack.oracles import l1_piecewise, oleinik_riemann
from hypertrack.riemann import solve_riemann
from hypertrack.wave_curves import wave_curve


def _burgers_fan(burgers, lo: float, hi: float):
    return wave_curve(burgers, 1, np.array([lo]), hi - lo)


def test_split_burgers_fan_into_equal_pieces(burgers) -> None:
    fronts = split_strategy(_burgers_fan(burgers, 0.0, 1.0), 0.25)
    assert len(fronts) == 5
    np.testing.assert_allclose([f.speed for f in fronts], [0.0, 0.2, 0.4, 0.6, 0.8], atol=1e-12)
    np.testing.assert_allclose([f.strength for f in fronts], [0.2] * 5, atol=1e-12)
    assert fronts[0].u_left[0] == 0.0 and fronts[-1].u_right[0] == 1.0


def test_split_short_fan(burgers) -> None:
    fronts = split_strategy(_burgers_fan(burgers, 0.0, 0.25), 0.1)
    np.testing.assert_allclose([f.speed for f in fronts], [0.0, 1 / 12, 1 / 6], atol=1e-12)


def test_split_keeps_narrow_packet_whole(burgers) -> None:
    fronts = split_strategy(_burgers_fan(burgers, 0.0, 0.05), 0.1)
    assert len(fronts) == 1 and fronts[0].speed == pytest.approx(0.0)


def test_split_never_cuts_a_shock(cubic) -> None:
    packet = solve_riemann(cubic, np.array([1.0]), np.array([-1.0])).packets[0]
    fronts = split_strategy(packet, 0.5)
    assert len(fronts) == 5
    # the shock 1 -> -1/2 travels at 3/4 and must sit entirely in the first piece
    assert fronts[0].speed == pytest.approx(0.75, abs=1e-12)
    assert fronts[0].u_right[0] <= -0.5 + 1e-12
    for f in fronts:
        assert f.isv <= 0.5 + 1e-12
        assert f.speed_lo - 1e-12 <= f.speed <= f.speed_hi + 1e-12


def test_split_chains_states_exactly(p_system) -> None:
    ur = p_system.base_state + np.array([0.04, -0.03])
    for packet in solve_riemann(p_system, p_system.base_state, ur).packets:
        if packet.is_empty:
            continue
        fronts = split_strategy(packet, 0.01)
        for a, b in itertools.pairwise(fronts):
            assert np.array_equal(a.u_right, b.u_left)
        assert np.array_equal(fronts[0].u_left, packet.u_left)
        assert np.array_equal(fronts[-1].u_right, packet.u_right)


def test_constant_data_has_no_fronts(p_system) -> None:
    traj = simulate(p_system, Breakpoints([], [p_system.base_state]), 0.1, 1.0)
    assert traj.fronts_at(1.0) == [] and traj.interactions == 0
    np.testing.assert_array_equal(sample_profile(traj, [-3.0, 0.0, 5.0], 0.7), np.tile(p_system.base_state, (3, 1)))


def test_single_shock_travels_at_secant_speed(burgers) -> None:
    traj = simulate(burgers, Breakpoints([0.0], [[1.0], [0.0]]), 0.1, 10.0)
    (front,) = traj.fronts_at(10.0)
    assert front.speed == pytest.approx(0.5, abs=1e-12)
    assert front.generation == 1 and traj.interactions == 0
    assert front.position(10.0) == pytest.approx(5.0, abs=1e-10)


def test_sample_profile_is_right_continuous(burgers) -> None:
    traj = simulate(burgers, Breakpoints([0.0], [[1.0], [0.0]]), 0.1, 2.0)
    x = traj.fronts_at(2.0)[0].position(2.0)
    vals = sample_profile(traj, [x - 1e-9, x, x + 1e-9], 2.0)[:, 0]
    np.testing.assert_array_equal(vals, [1.0, 0.0, 0.0])


def test_two_shocks_merge(burgers) -> None:
    traj = simulate(burgers, Breakpoints([0.0, 1.0], [[1.0], [0.5], [0.0]]), 0.1, 5.0)
    assert traj.interactions == 1
    record = traj.ledger[0]
    assert record.time == pytest.approx(2.0, abs=1e-9) and record.x == pytest.approx(1.5, abs=1e-9)
    (front,) = traj.fronts_at(5.0)
    assert front.u_left[0] == 1.0 and front.u_right[0] == 0.0
    assert front.speed == pytest.approx(0.5, abs=1e-12)
    assert front.generation == 1  # a merged same-family wave keeps the older generation


def test_triple_collision_becomes_binary_events(burgers) -> None:
    # shocks at speeds 1.25, 0.75, 0.25 all reach x = 0 at t = 1
    data = Breakpoints([-1.25, -0.75, -0.25], [[1.5], [1.0], [0.5], [0.0]])
    traj = simulate(burgers, data, 0.1, 3.0)
    assert traj.interactions == 2
    assert all(len(r.incoming) == 2 for r in traj.ledger)
    (front,) = traj.fronts_at(3.0)
    assert front.speed == pytest.approx(0.75, abs=1e-12)


def test_cubic_riemann_error_is_order_epsilon(cubic) -> None:
    oracle = oleinik_riemann(cubic.scalar_flux, cubic.scalar_speed, 1.0, -1.0, poly=cubic.poly)
    for eps in (0.25, 0.1):
        traj = simulate(cubic, Breakpoints([0.0], [[1.0], [-1.0]]), eps, 1.0)
        breaks = [f.position(1.0) for f in traj.fronts_at(1.0)] + list(oracle.xi_breaks)
        err = l1_piecewise(lambda xs: sample_profile(traj, xs, 1.0)[:, 0], oracle, breaks, (-1.0, 4.0))
        assert err <= 2.0 * eps


@pytest.fixture(scope="module")
def p_run(p_system):
    return simulate(p_system, random_steps(p_system, 8, 0.02, 3), 0.1, 2.0)


def test_front_speed_discipline(p_run, p_system) -> None:
    lam_hat = p_system.lambda_hat
    for f in p_run.fronts.values():
        assert front_violations(f, p_run.epsilon, lam_hat) == []


def test_artificial_fronts_stay_tiny(p_run) -> None:
    assert p_run.interactions > 50
    solvers = {r.solver for r in p_run.ledger}
    assert {"ApproxIJ", "ArtificialSolver"} <= solvers
    assert max(x["Vart"] for x in p_run.series) <= p_run.epsilon


def test_artificial_solver_passes_the_physical_front(p_run) -> None:
    for r in p_run.ledger:
        if r.solver != "ArtificialSolver":
            continue
        fam = [f for f in r.families if f != ARTIFICIAL][0]
        strength = [s for s, f in zip(r.strengths, r.families) if f != ARTIFICIAL][0]
        out = [p_run.fronts[i] for i in r.outgoing]
        assert [f.family for f in out] == [fam, ARTIFICIAL]
        assert out[0].strength == pytest.approx(strength, rel=1e-9)
        assert out[1].speed == p_run.system.lambda_hat


def test_approximate_solver_commutes_families(p_run) -> None:
    for r in p_run.ledger:
        if r.solver != "ApproxIJ":
            continue
        out = [p_run.fronts[i] for i in r.outgoing]
        assert [f.family for f in out[:2]] == [r.families[1], r.families[0]]
        if len(out) == 3:
            assert out[2].artificial
            assert out[2].strength <= 10.0 * abs(r.strengths[0] * r.strengths[1])


def test_fronts_that_met_never_meet_again(p_run) -> None:
    pairs = [frozenset(r.incoming) for r in p_run.ledger]
    assert len(pairs) == len(set(pairs))


def test_runs_are_deterministic(p_system) -> None:
    a = simulate(p_system, random_steps(p_system, 6, 0.02, 11), 0.1, 1.0)
    b = simulate(p_system, random_steps(p_system, 6, 0.02, 11), 0.1, 1.0)
    assert [(r.time, r.x, r.incoming, r.outgoing) for r in a.ledger] == \
        [(r.time, r.x, r.incoming, r.outgoing) for r in b.ledger]


@pytest.mark.parametrize("name, amplitude", [("burgers", 1.0), ("p_system", 0.02)])
def test_conservation_up_to_boundary_flux(request, name: str, amplitude: float) -> None:
    system = request.getfixturevalue(name)
    traj = simulate(system, random_steps(system, 10, amplitude, 3), 0.1, 2.0)
    window = (-10.0, 10.0)
    u_l, u_r = sample_profile(traj, np.array(window), 0.0)
    v0 = traj.series[0]["V"]
    for t in (0.5, 1.0, 2.0):
        drift = integral_of_solution(traj, t, window) - integral_of_solution(traj, 0.0, window)
        residual = np.linalg.norm(drift - t * (system.flux(u_l) - system.flux(u_r)))
        assert residual <= v0 * (traj.epsilon + max(x["Vart"] for x in traj.series)) * t


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10_000), eps=st.sampled_from([0.2, 0.1, 0.05]))
def test_random_burgers_runs_respect_ordering(burgers, seed: int, eps: float) -> None:
    traj = simulate(burgers, random_steps(burgers, 6, 1.0, seed), eps, 1.0)
    for t in traj.event_times + [1.0]:
        fronts = traj.fronts_at(t)
        xs = [f.position(t) for f in fronts]
        assert all(a <= b + 1e-12 for a, b in itertools.pairwise(xs))
        for a, b in itertools.pairwise(fronts):
            assert np.array_equal(a.u_right, b.u_left)
    for f in traj.fronts.values():
        assert front_violations(f, eps, burgers.lambda_hat) == []

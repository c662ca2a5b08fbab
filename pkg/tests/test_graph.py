from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypertrack.errors import InteractionTime, OutOfTimeRange
from hypertrack.front_tracking import Breakpoints, random_steps, simulate
from hypertrack.functionals import BumpTest
from hypertrack.graph import (X_eps, path_axiom_check, graph_distance, graph_l1, interaction_estimate_check,
                              interaction_measure, modified_modulus, phi_completion, riemann_graph_family,
                              segment_family, sigma_map, weak_residuals)


@pytest.fixture(scope="module")
def shock(burgers):
    return simulate(burgers, Breakpoints([0.0], [[1.0], [0.0]]), 0.1, 2.0)


@pytest.fixture(scope="module")
def cancel(burgers):
    # a rarefaction fan from x = 0 runs into the shock starting at x = 1
    return simulate(burgers, Breakpoints([0.0, 1.0], [[0.0], [1.0], [0.0]]), 0.1, 6.0)


def test_sigma_of_a_single_shock(shock) -> None:
    # at t = 1 the shock sits at x = 0.5 with strength 1
    xs = np.array([-1.0, 0.4999, 0.5, 2.0])
    np.testing.assert_allclose(sigma_map(shock, 1.0, xs), [-1.0, 0.4999, 1.5, 3.0])


def test_plateau_width_is_the_strength(shock) -> None:
    inv = X_eps(shock, 1.0)
    ((a, b, x),) = inv.plateaus()
    assert (a, b, x) == pytest.approx((0.5, 1.5, 0.5))
    np.testing.assert_allclose(inv(np.array([0.0, 0.5, 1.0, 1.5, 2.5])), [0.0, 0.5, 0.5, 0.5, 1.5])


@settings(max_examples=30, deadline=None)
@given(s1=st.floats(-3.0, 8.0), s2=st.floats(-3.0, 8.0), t=st.floats(0.0, 6.0))
def test_X_is_monotone_and_one_lipschitz(cancel, s1: float, s2: float, t: float) -> None:
    inv = X_eps(cancel, t)
    x1, x2 = inv(np.array([s1, s2]))
    assert abs(x1 - x2) <= abs(s1 - s2) + 1e-12
    assert (x1 - x2) * (s1 - s2) >= -1e-12


@pytest.mark.parametrize("t", [0.3, 1.7, 4.2])
def test_inverse_identities(cancel, t: float) -> None:
    inv = X_eps(cancel, t)
    x = np.concatenate([np.linspace(-3.0, 12.0, 301), inv.items.positions])
    np.testing.assert_allclose(inv(inv.sigma(x)), x, atol=1e-13)
    s = np.linspace(-3.0, 20.0, 301)
    X = inv(s)
    assert np.all(inv.sigma_left(X) <= s + 1e-13) and np.all(s <= inv.sigma(X) + 1e-13)


def test_constant_data_gives_the_identity(burgers) -> None:
    traj = simulate(burgers, Breakpoints([], [[0.3]]), 0.1, 1.0)
    g = phi_completion(traj, 0.5, s_grid=np.linspace(-2.0, 2.0, 9))
    np.testing.assert_array_equal(g.X, g.s_grid)
    np.testing.assert_array_equal(g.U[:, 0], 0.3)
    assert g.vertical_segments == []


def test_shock_plateau_is_filled_by_the_segment(shock) -> None:
    s = np.array([0.0, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0])
    g = phi_completion(shock, 1.0, s_grid=s)
    np.testing.assert_allclose(g.U[:, 0], [1.0, 1.0, 0.75, 0.5, 0.25, 0.0, 0.0], atol=1e-14)


def test_riemann_path_agrees_with_segment_for_a_scalar_shock(shock, burgers) -> None:
    s = np.linspace(0.0, 3.0, 61)
    g_seg = phi_completion(shock, 1.0, segment_family(), s_grid=s)
    g_rg = phi_completion(shock, 1.0, riemann_graph_family(burgers), s_grid=s)
    assert graph_distance(g_seg, g_rg) < 1e-12


def test_path_family_axioms(p_system) -> None:
    rng = np.random.default_rng(4)
    base = p_system.base_state
    pairs = [(base + 0.02 * rng.uniform(-1, 1, 2), base + 0.02 * rng.uniform(-1, 1, 2)) for _ in range(12)]
    seg = path_axiom_check(segment_family(), pairs)
    assert seg["endpoint_error"] < 1e-15
    assert seg["slope_ratio"] == pytest.approx(1.0, rel=1e-9)
    assert seg["lipschitz_ratio"] <= 1.0 + 1e-12
    rg = path_axiom_check(riemann_graph_family(p_system), pairs)
    assert rg["endpoint_error"] < 1e-14
    assert np.isfinite(rg["slope_ratio"]) and np.isfinite(rg["lipschitz_ratio"])


def test_graph_distance_basics(burgers) -> None:
    s = np.linspace(-1.0, 1.0, 21)
    a = phi_completion(simulate(burgers, Breakpoints([], [[0.3]]), 0.1, 1.0), 0.5, s_grid=s)
    b = phi_completion(simulate(burgers, Breakpoints([], [[0.55]]), 0.1, 1.0), 0.5, s_grid=s)
    assert graph_distance(a, a) == 0.0
    assert graph_distance(a, b) == pytest.approx(0.25)
    assert graph_l1(a, b) == pytest.approx(0.25 * 2.0)


def test_interaction_estimate_guard_and_growth() -> None:
    seg = segment_family()
    ul, ur = np.array([0.0, 0.0]), np.array([1.0, 0.0])
    collinear = interaction_estimate_check(seg, ul, 0.5 * (ul + ur), ur, 0.0)
    assert collinear["distance"] < 1e-12 and collinear["ratio"] == 0.0
    bent = interaction_estimate_check(seg, ul, np.array([0.5, 0.1]), ur, 0.01)
    assert bent["distance"] > 0.0 and np.isfinite(bent["ratio"])
    assert interaction_estimate_check(seg, ul, np.array([0.5, 0.1]), ur, 0.0)["ratio"] == np.inf


def test_interaction_measure_atoms(cancel, burgers) -> None:
    measure = interaction_measure(cancel)
    assert measure.defects == []
    assert measure.total == pytest.approx(cancel.series[0]["V"] - cancel.series[-1]["V"], abs=1e-12)
    assert measure.lam_inf == burgers.lambda_hat + 1.0
    merge = simulate(burgers, Breakpoints([0.0, 1.0], [[1.0], [0.5], [0.0]]), 0.1, 5.0)
    assert interaction_measure(merge).atoms == []


def test_X_is_continuous_across_interactions(cancel) -> None:
    measure = interaction_measure(cancel)
    for t in cancel.event_times:
        before, after = X_eps(cancel, t, measure, "-"), X_eps(cancel, t, measure, "+")
        s = np.concatenate([np.linspace(-3.0, 15.0, 501), before.s_start, before.s_end])
        np.testing.assert_allclose(before(s), after(s), atol=1e-13)


def test_side_is_required_at_interaction_times(cancel) -> None:
    t = cancel.event_times[0]
    with pytest.raises(InteractionTime):
        phi_completion(cancel, t)
    with pytest.raises(OutOfTimeRange):
        X_eps(cancel, 7.0)
    phi_completion(cancel, t, side="-")


def test_modified_modulus_decreases(cancel) -> None:
    ts = np.linspace(0.0, cancel.t_end, 40)
    values = [modified_modulus(cancel, 1.0, float(t)) for t in ts]
    assert np.all(np.diff(values) < 0.0)


def test_weak_residuals_agree(burgers) -> None:
    traj = simulate(burgers, random_steps(burgers, 6, 1.0, 7), 0.1, 1.0)
    bump = BumpTest(0.5, 0.4, 0.5, 0.8)
    h = 1e-6
    dtheta_t = lambda t, x: (bump(t + h, x) - bump(t - h, x)) / (2 * h)
    dtheta_x = lambda t, x: (bump(t, x + h) - bump(t, x - h)) / (2 * h)
    # the direct trapezoid rule straddles the jumps and converges slowly; the graph side does not
    direct, graph = weak_residuals(traj, dtheta_t, dtheta_x, np.linspace(0.0, 1.0, 21), (-1.0, 3.0), points=64001)
    assert graph == pytest.approx(direct, rel=1e-3)

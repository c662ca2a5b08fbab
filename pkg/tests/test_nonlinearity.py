from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypertrack.nonlinearity import fd_weights, find_full_degeneracy, nd_check, pi_coefficients
from hypertrack.system import builtin, with_bump


def test_burgers_coefficients(burgers) -> None:
    for u in (-0.4, 0.0, 0.7):
        np.testing.assert_allclose(pi_coefficients(burgers, np.array([u]), 1, 2), [1.0, 0.0], atol=1e-6)


def test_cubic_coefficients_at_inflection(cubic) -> None:
    np.testing.assert_allclose(pi_coefficients(cubic, np.array([0.0]), 1, 2), [0.0, 6.0], atol=1e-6)


@settings(max_examples=30, deadline=None)
@given(u=st.floats(-0.9, 0.9))
def test_scalar_coefficients_are_flux_derivatives(u: float) -> None:
    # u^3: f'' = 6u, f''' = 6, f'''' = 0
    got = pi_coefficients(builtin("cubic"), np.array([u]), 1, 3)
    np.testing.assert_allclose(got, [6 * u, 6.0, 0.0], rtol=1e-5, atol=1e-6)


def test_triangular_second_family_closed_form() -> None:
    tri = builtin("triangular_counterexample")
    rng = np.random.default_rng(4)
    for _ in range(10):
        u = tri.base_state + rng.uniform(-0.1, 0.1, 2)
        got = pi_coefficients(tri, u, 2, 3)
        np.testing.assert_allclose(got[:2], [2 * u[0] + 12 * u[1] ** 2, 24 * u[1]], atol=1e-6)


def test_fd_weights_reproduce_polynomial_derivatives() -> None:
    offsets = [-2.0, -1.0, 0.0, 1.0, 2.0]
    x = np.array(offsets) * 0.1
    w2 = fd_weights(2, offsets)
    assert float(w2 @ (x ** 2)) / 0.1 ** 2 == pytest.approx(2.0)
    assert float(w2 @ x ** 3) == pytest.approx(0.0, abs=1e-14)


def test_nd_verdicts(burgers, cubic, p_system) -> None:
    rep = nd_check(burgers, 1, 7)
    assert rep.nondegenerate and set(rep.critical_exponent) == {1}
    grid = np.linspace(-1.0, 1.0, 9).reshape(-1, 1)
    rep = nd_check(cubic, 1, grid, K=2)
    assert rep.nondegenerate
    for u, p in zip(rep.grid[:, 0], rep.critical_exponent):
        assert p == (2 if u == 0.0 else 1)
    for j in (1, 2):
        rep = nd_check(p_system, j, 5)
        assert rep.nondegenerate and set(rep.critical_exponent) == {1}


def test_triangular_degenerate_to_order_n_but_not_n_plus_one() -> None:
    tri = builtin("triangular_counterexample")
    rep = nd_check(tri, 2, 5, K=2)
    centre = int(np.argmin(np.linalg.norm(rep.grid, axis=1)))
    assert rep.critical_exponent[centre] is None and not rep.nondegenerate
    assert nd_check(tri, 2, 5, K=3).nondegenerate


def test_critical_exponent_invariant() -> None:
    rep = nd_check(builtin("triangular_counterexample"), 2, 5)
    for row, p in zip(rep.pi_values, rep.critical_exponent):
        if p is None:
            assert np.all(np.abs(row) <= rep.tolerance)
        else:
            assert np.all(np.abs(row[:p - 1]) <= rep.tolerance) and abs(row[p - 1]) > rep.tolerance


def test_full_degeneracy_of_perturbed_counterexample() -> None:
    tri = builtin("triangular_counterexample")
    rng = np.random.default_rng(9)
    for _ in range(2):
        bumped = with_bump(tri, 1e-3, rng.uniform(-0.05, 0.05, 2), 0.3, rng.normal(size=2))
        u = find_full_degeneracy(bumped, 2, 0.1)
        assert u is not None and np.linalg.norm(u - tri.base_state) < 0.1
        assert np.max(np.abs(pi_coefficients(bumped, u, 2, 2))) < 1e-6
        assert nd_check(bumped, 2, u.reshape(1, -1), K=2).critical_exponent == [None]


def test_no_degeneracy_for_genuinely_nonlinear(p_system) -> None:
    assert find_full_degeneracy(p_system, 1, 0.1) is None

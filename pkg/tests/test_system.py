from __future__ import annotations

import math

import numpy as np
import pytest

from conftest import ball_states
from hypertrack.errors import HyperbolicityLoss, OutOfBall, UnknownSystem
from hypertrack.system import BUILTIN_NAMES, builtin, eigensystem, mu, normalized_eigenvector, scalar_system


def test_burgers_eigenstructure_is_trivial(burgers) -> None:
    dec = eigensystem(burgers, np.array([0.3]))
    assert dec.lambdas[0] == pytest.approx(0.3)
    assert dec.right[0][0] == 1.0
    assert dec.left[0][0] == 1.0


def test_shallow_water_speeds_match_closed_form() -> None:
    system = builtin("shallow_water")
    for h, q in [(1.0, 0.0), (1.1, 0.05), (0.9, -0.1)]:
        g = system.params[0]
        expected = [q / h - math.sqrt(g * h), q / h + math.sqrt(g * h)]
        np.testing.assert_allclose(system.speeds(np.array([h, q])), expected, atol=1e-12)
    dec = eigensystem(system, np.array([1.0, 0.0]))
    np.testing.assert_allclose(dec.lambdas, [-1.0, 1.0], atol=1e-14)
    np.testing.assert_allclose(dec.right[0] / dec.right[0][0], [1.0, -1.0], atol=1e-14)
    np.testing.assert_allclose(dec.right[1] / dec.right[1][0], [1.0, 1.0], atol=1e-14)


def test_p_system_speeds_match_closed_form(p_system) -> None:
    # p(v) = v^-2 gives lambda = -+ sqrt(-p'(v)) = -+ sqrt(2 v^-3)
    for v in (1.0, 0.9, 1.15):
        c = math.sqrt(2.0 * v ** -3)
        np.testing.assert_allclose(p_system.speeds(np.array([v, 0.03])), [-c, c], atol=1e-12)


def test_global_parameter_is_projection() -> None:
    system = builtin("p_system", lhat=[1.0, 0.0])
    assert mu(system, np.array([0.4, 7.0])) == pytest.approx(0.4)
    tri = builtin("triangular_counterexample")
    assert mu(tri, tri.base_state) == 0.0
    system = builtin("p_system", lhat=[1.0, 1.0])
    assert mu(system, np.array([0.1, 0.2])) == pytest.approx(0.3)


def test_normalized_eigenvector(burgers) -> None:
    assert normalized_eigenvector(burgers, np.array([0.2]), 1)[0] == 1.0
    sw = builtin("shallow_water", lhat=[1.0, 0.0])
    np.testing.assert_allclose(normalized_eigenvector(sw, np.array([1.0, 0.0]), 1), [1.0, -1.0], atol=1e-14)


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_normalized_eigenvector_has_unit_projection(name: str) -> None:
    system = builtin(name)
    for u in ball_states(system, 20, seed=3):
        for j in range(1, system.n + 1):
            assert float(system.lhat @ normalized_eigenvector(system, u, j)) == pytest.approx(1.0, abs=1e-12)


def test_builtin_scalar_fluxes() -> None:
    b, c = builtin("burgers"), builtin("cubic")
    assert b.n == 1 and c.n == 1
    assert b.flux(np.array([0.6]))[0] == pytest.approx(0.18)
    assert c.flux(np.array([0.5]))[0] == pytest.approx(0.125)


def test_triangular_flux_second_component() -> None:
    tri = builtin("triangular_counterexample")
    u = np.array([0.3, 0.2])
    assert tri.flux(u)[1] == pytest.approx(u[0] * u[1] ** 2 + u[1] ** 4)


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_eigen_residuals_and_biorthogonality(name: str) -> None:
    system = builtin(name)
    for u in ball_states(system, 100, seed=11):
        a = system.jacobian(u)
        dec = eigensystem(system, u)
        for j in range(system.n):
            r = dec.right[j]
            assert np.linalg.norm(a @ r - dec.lambdas[j] * r) < 1e-9
            assert abs(np.linalg.norm(r) - 1.0) < 1e-10
        assert np.max(np.abs(dec.left @ dec.right.T - np.eye(system.n))) < 1e-9


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_jacobian_matches_finite_differences(name: str) -> None:
    system = builtin(name)
    h = 1e-6
    for u in ball_states(system, 20, seed=5):
        fd = np.column_stack([(system.flux(u + h * e) - system.flux(u - h * e)) / (2 * h)
                              for e in np.eye(system.n)])
        jac = system.jacobian(u)
        assert np.linalg.norm(fd - jac) <= 1e-4 * max(np.linalg.norm(jac), 1.0)


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_speeds_strictly_ascending_and_below_artificial_speed(name: str) -> None:
    system = builtin(name)
    bounds = system.family_speed_bounds
    for u in ball_states(system, 50, seed=7):
        lam = system.speeds(u)
        assert np.all(np.diff(lam) >= system.gap_tol)
    assert np.all(bounds[:-1, 1] < bounds[1:, 0])
    assert system.lambda_hat > bounds[-1, 1]


def test_sign_convention_is_continuous_along_a_path(p_system) -> None:
    path = [p_system.base_state + t * np.array([0.1, -0.15]) for t in np.linspace(0, 1, 50)]
    for j in range(2):
        rs = [eigensystem(p_system, u).right[j] for u in path]
        assert all(np.dot(a, b) > 0.99 for a, b in zip(rs, rs[1:]))
        assert all(float(p_system.lhat @ r) > 0 for r in rs)


def test_errors() -> None:
    with pytest.raises(UnknownSystem):
        builtin("euler")
    with pytest.raises(OutOfBall):
        builtin("burgers").check_state(np.array([10.0]))
    with pytest.raises(HyperbolicityLoss):
        # two identical speeds: a decoupled pair of Burgers equations
        from hypertrack.system import HyperbolicSystem
        HyperbolicSystem("double", 2, lambda u: 0.5 * u * u, lambda u: np.diag(u), [0.0, 0.0])


def test_scalar_system_wrapper() -> None:
    s = scalar_system("linear", lambda x: 2.0 * x, lambda x: 2.0 + 0.0 * x)
    assert s.lam(np.array([0.1]), 1) == pytest.approx(2.0)

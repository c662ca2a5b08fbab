from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypertrack.errors import CFLViolation
from hypertrack.oracles import convergence_rate, l1_distance, l1_piecewise, oleinik_riemann, reference_fv
from hypertrack.system import builtin, scalar_system

# Tangent point of the chord from u = 1 on f(u) = u^3: 2t^3 - 3t^2 + 1 = 0 has the
# double root 1 and the simple root below it.
CUBIC_CONTACT = float(min(np.roots([2.0, -3.0, 0.0, 1.0]).real))
CUBIC_SHOCK_SPEED = (1.0 - CUBIC_CONTACT ** 3) / (1.0 - CUBIC_CONTACT)

unit = st.floats(-1.0, 1.0, allow_nan=False)


def _exact(system, ul: float, ur: float):
    return oleinik_riemann(system.scalar_flux, system.scalar_speed, ul, ur, poly=system.poly)


def test_frozen_cubic_constants() -> None:
    assert CUBIC_CONTACT == pytest.approx(-0.5, abs=1e-14)
    assert CUBIC_SHOCK_SPEED == pytest.approx(0.75, abs=1e-14)


def test_burgers_shock(burgers) -> None:
    sol = _exact(burgers, 1.0, 0.0)
    assert sol.shocks == [pytest.approx((1.0, 0.0, 0.5))]
    assert sol(np.array([0.5 - 1e-9]))[0] == 1.0
    assert sol(np.array([0.5 + 1e-9]))[0] == 0.0


def test_burgers_rarefaction(burgers) -> None:
    sol = _exact(burgers, 0.0, 1.0)
    xi = np.linspace(0.0, 1.0, 11)
    np.testing.assert_allclose(sol(xi), xi, atol=1e-12)
    assert sol(np.array([-0.3]))[0] == 0.0 and sol(np.array([1.3]))[0] == 1.0


def test_cubic_composite(cubic) -> None:
    sol = _exact(cubic, 1.0, -1.0)
    assert len(sol.shocks) == 1
    ua, ub, speed = sol.shocks[0]
    assert (ua, ub) == (1.0, pytest.approx(CUBIC_CONTACT, abs=1e-12))
    assert speed == pytest.approx(CUBIC_SHOCK_SPEED, abs=1e-12)
    xi = np.linspace(0.76, 2.99, 30)
    np.testing.assert_allclose(sol(xi), -np.sqrt(xi / 3.0), atol=1e-10)
    assert sol(np.array([3.1]))[0] == -1.0


@settings(max_examples=60, deadline=None)
@given(ul=unit, ur=unit, name=st.sampled_from(["burgers", "cubic", "buckley_leverett"]))
def test_jumps_satisfy_rankine_hugoniot_and_oleinik(ul: float, ur: float, name: str) -> None:
    system = builtin(name)
    f = system.scalar_flux
    sol = _exact(system, ul, ur)
    for a, b, speed in sol.shocks:
        if a == b:
            continue
        secant = (f(np.array(b)) - f(np.array(a))) / (b - a)
        assert abs(float(secant) - speed) < 1e-10
        # every intermediate chord from the left state is no slower than the shock
        mids = np.linspace(a, b, 41)[1:-1]
        chords = (f(mids) - f(np.array(a))) / (mids - a)
        assert np.all(chords >= speed - 1e-10)


@settings(max_examples=40, deadline=None)
@given(ul=unit, ur=unit)
def test_profile_is_monotone_between_data(ul: float, ur: float) -> None:
    sol = _exact(builtin("cubic"), ul, ur)
    vals = sol(np.linspace(-1.0, 4.0, 400))
    steps = np.diff(vals)
    assert np.all(steps * np.sign(ur - ul) >= -1e-12)
    assert vals[0] == ul and vals[-1] == ur


def test_fv_constant_data(burgers) -> None:
    prof = reference_fv(burgers, lambda x: np.array([0.4]), 0.5, 200)
    np.testing.assert_allclose(prof.u, 0.4, atol=1e-15)


def test_fv_burgers_shock_location(burgers) -> None:
    prof = reference_fv(burgers, lambda x: np.array([1.0 if x < 0.0 else 0.0]), 1.0, 400)
    dx = prof.x[1] - prof.x[0]
    crossing = prof.x[np.argmin(np.abs(prof.u - 0.5))]
    assert abs(crossing - 0.5) <= dx


def test_fv_linear_advection_translates_and_conserves() -> None:
    adv = scalar_system("advection", lambda x: 0.5 * x, lambda x: 0.5 + 0.0 * x)
    bump = lambda x: np.array([np.exp(-((x - 0.2) / 0.1) ** 2)])
    prof = reference_fv(adv, bump, 1.0, 600, x_range=(-1.0, 2.0))
    dx = prof.x[1] - prof.x[0]
    init = np.array([bump(x)[0] for x in prof.x])
    assert abs(prof.u.sum() * dx - init.sum() * dx) < 1e-12
    assert abs(prof.x[np.argmax(prof.u)] - 0.7) <= 3 * dx


def test_fv_system_mass_conservation(p_system) -> None:
    def u0(x):
        return p_system.base_state + (0.05 * np.exp(-(x / 0.1) ** 2)) * np.array([1.0, 0.5])

    prof0 = reference_fv(p_system, u0, 0.0, 300)
    prof = reference_fv(p_system, u0, 0.3, 300)
    dx = prof.x[1] - prof.x[0]
    np.testing.assert_allclose(prof.u.sum(axis=0) * dx, prof0.u.sum(axis=0) * dx, atol=1e-12)


def test_fv_rejects_bad_cfl(burgers) -> None:
    with pytest.raises(CFLViolation):
        reference_fv(burgers, lambda x: np.array([0.0]), 1.0, 200, cfl=0.9)


def test_l1_distance_identities() -> None:
    x = np.linspace(0.0, 2.0, 101)
    y = np.sin(x)
    assert l1_distance((x, y), (x, y), (0.0, 2.0)) == 0.0
    assert l1_distance((x, y), (x, y + 0.3), (0.0, 2.0)) == pytest.approx(0.6, abs=1e-12)
    assert l1_piecewise(np.sin, lambda s: np.sin(s) - 0.25, [], (0.0, 4.0)) == pytest.approx(1.0, abs=1e-12)


def test_convergence_rate() -> None:
    assert convergence_rate([0.4, 0.2, 0.1], [0.4, 0.2, 0.1]) == pytest.approx(1.0)
    assert convergence_rate([0.4, 0.1, 0.025], [0.4, 0.2, 0.1]) == pytest.approx(2.0)

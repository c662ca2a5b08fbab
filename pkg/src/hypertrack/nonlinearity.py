"""Nonlinearity coefficients and the nondegeneracy test.

The k-th coefficient of family j at u is the k-th derivative of
``t -> lambda_j(w(t))`` at ``t = 0`` along the flow ``w' = r_j(w)``, ``w(0) = u``.
For scalar polynomial fluxes it is read off the polynomial; otherwise the flow is
integrated to near machine precision and differentiated with high-order central
stencils plus one Richardson step.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .errors import OutOfBall, StencilExitsBall
from .system import HyperbolicSystem

MAX_ORDER = 6


def fd_weights(order: int, offsets: Sequence[float]) -> np.ndarray:
    """Finite-difference weights for the ``order``-th derivative at 0 (Fornberg's recursion)."""
    x = np.asarray(offsets, dtype=float)
    n = len(x)
    c = np.zeros((n, order + 1))
    c[0, 0] = 1.0
    c1, c4 = 1.0, x[0]
    for i in range(1, n):
        mn = min(i, order)
        c2, c5, c4 = 1.0, c4, x[i]
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, order]


def _unit_r(system: HyperbolicSystem, w: np.ndarray, j: int) -> np.ndarray:
    return system.eigensystem(w).right[j - 1]


def _speeds_along_flow(system: HyperbolicSystem, u: np.ndarray, j: int, ts: np.ndarray) -> np.ndarray:
    out = np.empty(len(ts))
    zero = ts == 0.0
    out[zero] = system.lam(u, j)
    for sign in (1.0, -1.0):
        sel = np.nonzero(sign * ts > 0)[0]
        if len(sel) == 0:
            continue
        order = sel[np.argsort(sign * ts[sel])]
        sol = solve_ivp(lambda _, w: _unit_r(system, w, j), (0.0, float(ts[order[-1]])), u,
                        method="DOP853", t_eval=ts[order], rtol=1e-13, atol=1e-15)
        for col, idx in enumerate(order):
            w = sol.y[:, col]
            if not system.in_ball(w, system.delta1):
                raise StencilExitsBall(f"difference stencil leaves the ball at {w}")
            out[idx] = system.lam(w, j)
    return out


def _directional_derivative(system: HyperbolicSystem, u: np.ndarray, j: int, k: int, h: float) -> float:
    p = 4 + (k + 1) // 2
    offsets = np.arange(-p, p + 1, dtype=float)

    def estimate(step):
        vals = _speeds_along_flow(system, u, j, offsets * step)
        return float(fd_weights(k, offsets) @ vals) / step ** k

    coarse, fine = estimate(h), estimate(0.5 * h)
    q = 2 * p + 2 - 2 * ((k + 1) // 2)  # accuracy order of a symmetric stencil
    return (2.0 ** q * fine - coarse) / (2.0 ** q - 1.0)


def pi_coefficients(system: HyperbolicSystem, u, j: int, K: int, h0: float = 1e-4) -> np.ndarray:
    """(pi^(1), ..., pi^(K)) of family ``j`` at ``u``."""
    if not 1 <= K <= MAX_ORDER:
        raise ValueError(f"K must lie in 1..{MAX_ORDER}")
    u = system.check_state(u)
    if system.n == 1 and system.poly is not None:
        coeffs = np.polynomial.polynomial.Polynomial(system.poly[::-1])
        out = []
        for k in range(1, K + 1):
            coeffs = coeffs.deriv()
            out.append(float(coeffs.deriv()(u[0])))
        return np.array(out)
    room = system.delta1 - float(np.linalg.norm(u - system.base_state))
    out = np.empty(K)
    for k in range(1, K + 1):
        p = 4 + (k + 1) // 2
        h = h0 ** (1.0 / k)
        if p * h > 0.9 * room:
            h_fit = 0.9 * room / p
            if h_fit < 0.1 * h:
                raise StencilExitsBall(f"no room for an order-{k} stencil at {u}")
            h = h_fit
        out[k - 1] = _directional_derivative(system, u, j, k, h)
    return out


@dataclass
class NDReport:
    family: int
    grid: np.ndarray
    pi_values: np.ndarray
    critical_exponent: list
    min_max_pi: float
    K: int
    tolerance: float
    failures: list = field(default_factory=list)

    @property
    def nondegenerate(self) -> bool:
        return self.min_max_pi > self.tolerance

    def rows(self) -> list[list]:
        return [list(u) + list(p) + ["degenerate" if c is None else c]
                for u, p, c in zip(self.grid, self.pi_values, self.critical_exponent)]


def default_grid(system: HyperbolicSystem, points: int = 11, radius: float | None = None) -> np.ndarray:
    """Tensor grid over the cube inscribed in the working ball (includes the base state for odd ``points``)."""
    r = system.delta2 if radius is None else radius
    side = r / np.sqrt(system.n)
    axis = np.linspace(-side, side, points)
    return np.array([system.base_state + np.array(c) for c in itertools.product(axis, repeat=system.n)])


def nd_check(system: HyperbolicSystem, j: int, grid=None, K: int | None = None, tol: float = 1e-6) -> NDReport:
    """Nonlinearity coefficients on a grid and the nondegeneracy verdict.

    ``grid`` is an array of states, an integer number of points per axis or
    ``None`` for the default 11-point axes.
    """
    K = system.n + 1 if K is None else K
    if grid is None or isinstance(grid, (int, np.integer)):
        grid = default_grid(system, 11 if grid is None else int(grid))
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    if grid.shape[1] != system.n:
        grid = grid.reshape(-1, system.n)
    values = np.array([pi_coefficients(system, u, j, K) for u in grid])
    exponents = []
    for row in values:
        big = np.nonzero(np.abs(row) > tol)[0]
        exponents.append(int(big[0]) + 1 if len(big) else None)
    mm = float(np.min(np.max(np.abs(values), axis=1)))
    return NDReport(j, grid, values, exponents, mm, K, tol)


def find_full_degeneracy(system: HyperbolicSystem, j: int, ball_radius: float, tol: float = 1e-6,
                         seeds: int = 6, points: int = 7, maxit: int = 30) -> np.ndarray | None:
    """A state where the first N coefficients of family ``j`` vanish, or ``None``.

    Damped Newton with a finite-difference Jacobian, started from the grid
    points with the smallest residual.
    """
    n = system.n

    def W(u):
        return pi_coefficients(system, u, j, n)

    grid = default_grid(system, points, ball_radius)
    scored = []
    for u in grid:
        try:
            scored.append((float(np.linalg.norm(W(u))), tuple(u)))
        except OutOfBall:
            continue
    scored.sort()
    for _, seed in scored[:seeds]:
        u = np.array(seed)
        try:
            res = W(u)
            for _ in range(maxit):
                if np.linalg.norm(res) < 1e-3 * tol:
                    break
                eta = 1e-5
                jac = np.column_stack([(W(u + eta * e) - W(u - eta * e)) / (2 * eta) for e in np.eye(n)])
                step = np.linalg.lstsq(jac, -res, rcond=None)[0]
                lam = 1.0
                while lam > 1e-4:
                    trial = u + lam * step
                    if system.in_ball(trial, system.delta2):
                        r_trial = W(trial)
                        if np.linalg.norm(r_trial) < np.linalg.norm(res):
                            u, res = trial, r_trial
                            break
                    lam *= 0.5
                else:
                    break
            if np.linalg.norm(res) < tol and np.linalg.norm(u - system.base_state) <= ball_radius:
                return u
        except OutOfBall:
            continue
    return None

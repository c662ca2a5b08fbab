"""Strictly hyperbolic systems: flux, eigenstructure, global parameter, built-ins.

Families are numbered from 1 to N throughout the package, following the usual
labelling of characteristic fields. Array indices are 0-based internally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import (
    DegenerateProjection,
    HyperbolicityLoss,
    NonReal,
    OutOfBall,
    UnknownSystem,
)

State = np.ndarray
FluxFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class EigenDecomposition:
    """Ordered eigenvalues with unit right eigenvectors and dual left covectors.

    ``right[j]`` and ``left[j]`` hold the vectors of family ``j + 1``.
    """

    lambdas: np.ndarray
    right: np.ndarray
    left: np.ndarray


@dataclass(frozen=True)
class EntropyPair:
    eta: Callable[[np.ndarray], float]
    q: Callable[[np.ndarray], float]


class HyperbolicSystem:
    """A strictly hyperbolic system of conservation laws on a ball of states.

    Instances are treated as immutable once constructed. The constructor samples
    the ``delta1``-ball to derive per-family speed bounds, the artificial speed
    ``lambda_hat`` and to verify that ``lhat`` is transversal to every family.
    """

    def __init__(
        self,
        name: str,
        n: int,
        flux: FluxFn,
        jacobian: Callable[[np.ndarray], np.ndarray],
        base_state: Sequence[float],
        delta1: float = 0.5,
        delta2: float = 0.25,
        lhat: Sequence[float] | None = None,
        lambda_hat: float | None = None,
        gap_tol: float = 1e-8,
        params: Sequence[float] = (),
        scalar_flux: Callable[[np.ndarray], np.ndarray] | None = None,
        scalar_speed: Callable[[np.ndarray], np.ndarray] | None = None,
        poly: np.ndarray | None = None,
        entropy: EntropyPair | None = None,
        conservative: bool = True,
        nondegenerate: bool = True,
        options: dict | None = None,
    ):
        if n < 1:
            raise ValueError("N must be positive")
        if not delta2 < delta1:
            raise ValueError("delta2 must be smaller than delta1")
        self.name = name
        self.n = int(n)
        self.flux = flux
        self.jacobian = jacobian
        self.base_state = np.asarray(base_state, dtype=float).reshape(self.n)
        self.delta1 = float(delta1)
        self.delta2 = float(delta2)
        self.gap_tol = float(gap_tol)
        self.params = tuple(float(p) for p in params)
        self.scalar_flux = scalar_flux
        self.scalar_speed = scalar_speed
        self.poly = None if poly is None else np.asarray(poly, dtype=float)
        self.entropy = entropy
        self.conservative = conservative
        self.nondegenerate = nondegenerate
        self.options = dict(options or {})

        if lhat is None:
            lhat = self._default_lhat()
        self.lhat = np.asarray(lhat, dtype=float).reshape(self.n)

        samples = self._ball_samples(self.delta1)
        lams = np.empty((len(samples), self.n))
        for k, u in enumerate(samples):
            dec = self.eigensystem(u)
            lams[k] = dec.lambdas
            proj = dec.right @ self.lhat
            if np.min(np.abs(proj)) < 1e-8:
                raise DegenerateProjection(f"lhat nearly orthogonal to r_j at {u}")
        lo = lams.min(axis=0)
        hi = lams.max(axis=0)
        for j in range(self.n - 1):
            if hi[j] >= lo[j + 1]:
                raise HyperbolicityLoss(f"speed ranges of families {j + 1} and {j + 2} overlap")
        self.family_speed_bounds = np.column_stack([lo, hi])
        self.lambda_hat = float(hi[-1] + 1.0) if lambda_hat is None else float(lambda_hat)
        if self.lambda_hat <= hi[-1]:
            raise ValueError("lambda_hat must exceed the largest characteristic speed")

    # -- geometry of the ball --------------------------------------------------

    def _ball_samples(self, radius: float) -> list[np.ndarray]:
        b = self.base_state
        if self.n == 1:
            return [b + np.array([x]) for x in np.linspace(-radius, radius, 201)]
        if self.n == 2:
            out = [b.copy()]
            for rad in np.linspace(radius / 6, radius, 6):
                for ang in np.linspace(0.0, 2 * np.pi, 24, endpoint=False):
                    out.append(b + rad * np.array([np.cos(ang), np.sin(ang)]))
            return out
        rng = np.random.default_rng(12345)
        pts = rng.normal(size=(600, self.n))
        pts /= np.linalg.norm(pts, axis=1)[:, None]
        pts *= radius * rng.random(600)[:, None] ** (1.0 / self.n)
        return [b.copy()] + [b + p for p in pts]

    def in_ball(self, u: np.ndarray, radius: float | None = None) -> bool:
        r = self.delta2 if radius is None else radius
        return bool(np.linalg.norm(np.asarray(u, dtype=float) - self.base_state) <= r * (1 + 1e-12))

    def check_state(self, u: np.ndarray, radius: float | None = None) -> np.ndarray:
        u = np.asarray(u, dtype=float).reshape(self.n)
        if not np.all(np.isfinite(u)):
            raise OutOfBall(f"non-finite state {u}")
        if not self.in_ball(u, radius):
            r = self.delta2 if radius is None else radius
            raise OutOfBall(f"state {u} outside the ball of radius {r} around {self.base_state}")
        return u

    # -- eigenstructure --------------------------------------------------------

    def _default_lhat(self) -> np.ndarray:
        if self.n == 1:
            return np.ones(1)
        dec = _raw_eigen(self.jacobian(self.base_state), None, self.gap_tol)
        lhat = dec.left.sum(axis=0)
        proj = dec.right @ lhat
        # make every projection positive, then rescale the smallest one to 1
        if np.any(proj <= 0):
            lhat = np.sum(np.sign(proj)[:, None] * dec.left, axis=0)
            proj = dec.right @ lhat
        return lhat / np.min(proj)

    def eigensystem(self, u: np.ndarray) -> EigenDecomposition:
        return _raw_eigen(self.jacobian(u), self.lhat, self.gap_tol)

    def speeds(self, u: np.ndarray) -> np.ndarray:
        if self.n == 1:
            return np.array([float(self.jacobian(u)[0, 0])])
        return self.eigensystem(u).lambdas

    def lam(self, u: np.ndarray, j: int) -> float:
        if self.n == 1:
            return float(self.jacobian(u)[0, 0])
        return float(self.eigensystem(u).lambdas[j - 1])

    def mu(self, u: np.ndarray) -> float:
        return float(np.dot(self.lhat, u))

    def r_tilde(self, u: np.ndarray, j: int) -> np.ndarray:
        dec = self.eigensystem(u)
        r = dec.right[j - 1]
        proj = float(self.lhat @ r)
        if abs(proj) < 1e-12:
            raise DegenerateProjection(f"|lhat . r_{j}| vanishes at {u}")
        return r / proj

    def lam_and_r_tilde(self, u: np.ndarray, j: int) -> tuple[float, np.ndarray]:
        dec = self.eigensystem(u)
        r = dec.right[j - 1]
        return float(dec.lambdas[j - 1]), r / float(self.lhat @ r)

    def __repr__(self) -> str:
        return f"HyperbolicSystem({self.name!r}, N={self.n}, params={self.params})"


def _raw_eigen(a: np.ndarray, lhat: np.ndarray | None, gap_tol: float) -> EigenDecomposition:
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    if n == 1:
        s = 1.0 if lhat is None or lhat[0] > 0 else -1.0
        return EigenDecomposition(np.array([a[0, 0]]), np.array([[s]]), np.array([[s]]))
    if n == 2:
        return _eigen2(a, lhat, gap_tol)
    vals, vecs = np.linalg.eig(a)
    if np.max(np.abs(vals.imag)) > 1e-12 * max(1.0, np.max(np.abs(vals.real))):
        raise NonReal("complex eigenvalues")
    order = np.argsort(vals.real)
    vals = vals.real[order]
    right = vecs.real[:, order].T.copy()
    if np.min(np.diff(vals)) < gap_tol:
        raise HyperbolicityLoss("eigenvalues too close")
    right /= np.linalg.norm(right, axis=1)[:, None]
    if lhat is not None:
        right *= np.where(right @ lhat < 0, -1.0, 1.0)[:, None]
    left = np.linalg.inv(right.T)
    return EigenDecomposition(vals, right, left)


def _eigen2(a: np.ndarray, lhat: np.ndarray | None, gap_tol: float) -> EigenDecomposition:
    p, q, r, s = float(a[0, 0]), float(a[0, 1]), float(a[1, 0]), float(a[1, 1])
    half = 0.5 * (p + s)
    disc = 0.25 * (p - s) ** 2 + q * r
    if disc < 0.0:
        raise NonReal("complex eigenvalues")
    root = math.sqrt(disc)
    if 2.0 * root < gap_tol:
        raise HyperbolicityLoss("eigenvalues too close")
    lams = (half - root, half + root)
    vecs = []
    for lam in lams:
        x1, y1 = q, lam - p
        x2, y2 = lam - s, r
        n1 = x1 * x1 + y1 * y1
        n2 = x2 * x2 + y2 * y2
        if n1 >= n2:
            x, y, nrm = x1, y1, math.sqrt(n1)
        else:
            x, y, nrm = x2, y2, math.sqrt(n2)
        x, y = x / nrm, y / nrm
        if lhat is not None and x * lhat[0] + y * lhat[1] < 0:
            x, y = -x, -y
        vecs.append((x, y))
    (ax, ay), (bx, by) = vecs
    det = ax * by - bx * ay
    right = np.array([[ax, ay], [bx, by]])
    left = np.array([[by / det, -bx / det], [-ay / det, ax / det]])
    return EigenDecomposition(np.array(lams), right, left)


# -- module-level operations ------------------------------------------------------


def eigensystem(system: HyperbolicSystem, u: np.ndarray) -> EigenDecomposition:
    return system.eigensystem(np.asarray(u, dtype=float).reshape(system.n))


def mu(system: HyperbolicSystem, u: np.ndarray) -> float:
    return system.mu(np.asarray(u, dtype=float))


def normalized_eigenvector(system: HyperbolicSystem, u: np.ndarray, j: int) -> np.ndarray:
    return system.r_tilde(np.asarray(u, dtype=float).reshape(system.n), j)


# -- built-in systems -------------------------------------------------------------


def _scalar_system(name, f, df, poly=None, entropy=None, params=(), **kw) -> HyperbolicSystem:
    kw.setdefault("base_state", [0.0])
    kw.setdefault("delta1", 2.0)
    kw.setdefault("delta2", 1.5)
    return HyperbolicSystem(
        name,
        1,
        flux=lambda u: np.array([f(u[0])]),
        jacobian=lambda u: np.array([[df(u[0])]]),
        scalar_flux=f,
        scalar_speed=df,
        poly=poly,
        entropy=entropy,
        params=params,
        **kw,
    )


def scalar_system(name: str, f, df, **kw) -> HyperbolicSystem:
    """Wrap an elementwise scalar flux ``f`` with derivative ``df``."""
    return _scalar_system(name, f, df, **kw)


def _burgers(params, **kw):
    ent = EntropyPair(lambda u: 0.5 * float(u[0]) ** 2, lambda u: float(u[0]) ** 3 / 3.0)
    return _scalar_system("burgers", lambda x: 0.5 * x * x, lambda x: x * 1.0,
                          poly=[0.5, 0.0, 0.0], entropy=ent, **kw)


def _cubic(params, **kw):
    ent = EntropyPair(lambda u: 0.5 * float(u[0]) ** 2, lambda u: 0.75 * float(u[0]) ** 4)
    return _scalar_system("cubic", lambda x: x * x * x, lambda x: 3.0 * x * x,
                          poly=[1.0, 0.0, 0.0, 0.0], entropy=ent, **kw)


def _buckley_leverett(params, **kw):
    a = float(params[0]) if params else 0.5

    def f(x):
        return x * x / (x * x + a * (1.0 - x) ** 2)

    def df(x):
        d = x * x + a * (1.0 - x) ** 2
        return 2.0 * a * x * (1.0 - x) / (d * d)

    return _scalar_system("buckley_leverett", f, df, params=(a,), **kw)


def _p_system(params, pressure: str = "power", **kw):
    if pressure == "power":
        gamma = float(params[0]) if params else 2.0

        def p(v):
            return v ** (-gamma)

        def dp(v):
            return -gamma * v ** (-gamma - 1.0)

        def big_p(v):
            # antiderivative of -p, so that eta is convex
            if gamma == 1.0:
                return -math.log(v)
            return v ** (1.0 - gamma) / (gamma - 1.0)

        base = [1.0, 0.0]
        par = (gamma,)
    elif pressure == "cubic":
        kappa = float(params[0]) if params else 1.0

        def p(v):
            return -kappa * v - v ** 3

        def dp(v):
            return -kappa - 3.0 * v * v

        def big_p(v):
            return 0.5 * kappa * v * v + 0.25 * v ** 4

        base = [0.0, 0.0]
        par = (kappa,)
    else:
        raise UnknownSystem(f"unknown pressure law {pressure!r}")

    def flux(u):
        return np.array([-u[1], p(u[0])])

    def jac(u):
        return np.array([[0.0, -1.0], [dp(u[0]), 0.0]])

    ent = EntropyPair(lambda u: 0.5 * u[1] ** 2 + big_p(u[0]), lambda u: p(u[0]) * u[1])
    kw.setdefault("base_state", base)
    return HyperbolicSystem(f"p_system:{pressure}" if pressure != "power" else "p_system", 2,
                            flux, jac, params=par, entropy=ent,
                            options={"pressure": pressure}, **kw)


def _shallow_water(params, **kw):
    g = float(params[0]) if params else 1.0

    def flux(u):
        h, q = u
        return np.array([q, q * q / h + 0.5 * g * h * h])

    def jac(u):
        h, q = u
        return np.array([[0.0, 1.0], [-q * q / (h * h) + g * h, 2.0 * q / h]])

    ent = EntropyPair(lambda u: 0.5 * u[1] ** 2 / u[0] + 0.5 * g * u[0] ** 2,
                      lambda u: 0.5 * u[1] ** 3 / u[0] ** 2 + g * u[0] * u[1])
    kw.setdefault("base_state", [1.0, 0.0])
    return HyperbolicSystem("shallow_water", 2, flux, jac, params=(g,), entropy=ent, **kw)


def _triangular(params, n: int | None = None, **kw):
    """Lower-triangular flux whose last family degenerates to order N at the origin.

    The first N-1 components are ``f_k = a_k u_k + u_k^2 / 2`` with well separated
    constants ``a_k``; the last one couples every component to ``u_N``.
    """
    if n is None:
        n = int(params[0]) if params else 2
    if n < 2:
        raise ValueError("the triangular flux needs N >= 2")
    shifts = np.array([-2.0 * (n - k) for k in range(1, n)])

    def flux(u):
        out = np.empty(n)
        out[:-1] = shifts * u[:-1] + 0.5 * u[:-1] ** 2
        last = u[-1]
        out[-1] = sum(u[i] * last ** (i + 2) for i in range(n - 1)) + last ** (n + 2)
        return out

    def jac(u):
        a = np.zeros((n, n))
        last = u[-1]
        for k in range(n - 1):
            a[k, k] = shifts[k] + u[k]
            a[-1, k] = last ** (k + 2)
        a[-1, -1] = sum((i + 2) * u[i] * last ** (i + 1) for i in range(n - 1)) + (n + 2) * last ** (n + 1)
        return a

    kw.setdefault("base_state", np.zeros(n))
    return HyperbolicSystem("triangular_counterexample", n, flux, jac, params=(float(n),),
                            nondegenerate=False, **kw)


_BUILTINS = {
    "burgers": _burgers,
    "cubic": _cubic,
    "buckley_leverett": _buckley_leverett,
    "p_system": _p_system,
    "shallow_water": _shallow_water,
    "triangular_counterexample": _triangular,
}

BUILTIN_NAMES = tuple(_BUILTINS)


def builtin(name: str, params: Sequence[float] = (), **options) -> HyperbolicSystem:
    """Construct a built-in system by name.

    Extra keyword options are forwarded: ``pressure="cubic"`` for the p-system,
    ``n=3`` for the triangular flux, or constructor overrides such as ``delta2``.
    """
    try:
        factory = _BUILTINS[name]
    except KeyError:
        raise UnknownSystem(f"unknown system {name!r}; choose one of {', '.join(BUILTIN_NAMES)}") from None
    return factory(list(params), **options)


def with_bump(system: HyperbolicSystem, amplitude: float, center: Sequence[float],
              width: float, direction: Sequence[float]) -> HyperbolicSystem:
    """Add ``amplitude * direction * exp(-|u - center|^2 / width^2)`` to the flux."""
    c = np.asarray(center, dtype=float)
    d = np.asarray(direction, dtype=float)
    w2 = float(width) ** 2

    def flux(u):
        return system.flux(u) + amplitude * d * math.exp(-float(np.dot(u - c, u - c)) / w2)

    def jac(u):
        e = math.exp(-float(np.dot(u - c, u - c)) / w2)
        return system.jacobian(u) + amplitude * e * np.outer(d, -2.0 * (u - c) / w2)

    return HyperbolicSystem(
        system.name + "+bump", system.n, flux, jac, system.base_state,
        delta1=system.delta1, delta2=system.delta2, lhat=system.lhat,
        gap_tol=system.gap_tol, params=system.params, nondegenerate=False,
    )

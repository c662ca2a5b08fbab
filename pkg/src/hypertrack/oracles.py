"""Independent reference solutions.

Nothing here imports the wave-curve or front-tracking code: the scalar Riemann
oracle works directly on the graph of the flux with Qhull and closed-form
tangency equations, and the finite-volume solver is a textbook first-order
scheme.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.optimize import brentq, fsolve
from scipy.spatial import ConvexHull

from .errors import CFLViolation

GL_NODES, GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


@dataclass
class ExactScalarSolution:
    """Self-similar entropy solution u(xi) of a scalar Riemann problem.

    ``pieces[k]`` describes the open interval ``(xi_breaks[k-1], xi_breaks[k])``
    (with infinite outer ends): either ``("const", u)`` or ``("rare", ua, ub)``
    where the state solves ``f'(u) = xi`` inside ``[min(ua,ub), max(ua,ub)]``.
    The value at a break is taken from the interval on its right.
    """

    u_left: float
    u_right: float
    xi_breaks: np.ndarray
    pieces: list
    dflux: Callable = field(repr=False)
    # traversal description: list of (kind, ua, ub, speed_a, speed_b)
    structure: list = field(default_factory=list)

    def __call__(self, xi) -> np.ndarray:
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        k = np.searchsorted(self.xi_breaks, xi, side="right")
        out = np.empty_like(xi)
        for i, (xv, kk) in enumerate(zip(xi, k)):
            piece = self.pieces[kk]
            if piece[0] == "const":
                out[i] = piece[1]
            else:
                out[i] = self._invert(xv, piece[1], piece[2])
        return out

    def _invert(self, xi: float, ua: float, ub: float) -> float:
        lo, hi = min(ua, ub), max(ua, ub)
        ga, gb = self.dflux(lo) - xi, self.dflux(hi) - xi
        if ga == 0.0:
            return lo
        if gb == 0.0 or ga * gb > 0:
            return hi if abs(gb) < abs(ga) else lo
        return brentq(lambda u: self.dflux(u) - xi, lo, hi, xtol=1e-15, rtol=1e-15)

    def speed_at_state(self, u) -> np.ndarray:
        """Hull slope at a state between ``u_left`` and ``u_right``."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        out = np.empty_like(u)
        for i, uv in enumerate(u):
            for kind, ua, ub, sa, sb in self.structure:
                lo, hi = min(ua, ub), max(ua, ub)
                if lo - 1e-15 <= uv <= hi + 1e-15:
                    out[i] = sa if kind == "shock" else self.dflux(uv)
                    break
            else:
                raise ValueError(f"state {uv} outside the Riemann fan")
        return out

    @property
    def shocks(self) -> list[tuple[float, float, float]]:
        return [(ua, ub, sa) for kind, ua, ub, sa, _ in self.structure if kind == "shock"]


def _tangent_root(f, df, fixed: float, guess: float, lo: float, hi: float,
                  poly: np.ndarray | None) -> float:
    """Point b in [lo, hi] where the chord from ``fixed`` touches the graph of f."""
    if poly is not None:
        # f(x) - f(a) - f'(x)(x - a) as a polynomial in x
        c = poly[::-1]
        dc = P.polyder(c)
        expr = P.polysub(P.polysub(c, [P.polyval(fixed, c)]), P.polymul(dc, [-fixed, 1.0]))
        roots = P.polyroots(P.polytrim(expr, 1e-300)) if np.any(expr) else np.array([])
        real = [r.real for r in np.atleast_1d(roots) if abs(r.imag) < 1e-7 and abs(r.real - fixed) > 1e-9]
        cands = [r for r in real if lo - 1e-9 <= r <= hi + 1e-9]
        if cands:
            return float(min(cands, key=lambda r: abs(r - guess)))

    def g(x):
        return f(x) - f(fixed) - df(x) * (x - fixed)

    width = max(abs(hi - lo) * 1e-3, 1e-9)
    a, b = max(lo, guess - width), min(hi, guess + width)
    for _ in range(60):
        if g(a) * g(b) <= 0:
            return brentq(g, a, b, xtol=1e-15, rtol=1e-15)
        width *= 2
        a, b = max(lo, guess - width), min(hi, guess + width)
    return guess


TINY_JUMP = 1e-9


def oleinik_riemann(flux: Callable, dflux: Callable, u_left: float, u_right: float,
                    poly: Sequence[float] | None = None, samples: int = 20001) -> ExactScalarSolution:
    """Entropy solution of u_t + f(u)_x = 0 with Riemann data via the Oleinik hull.

    ``flux`` and ``dflux`` must accept numpy arrays. ``poly`` (highest degree
    first) switches the tangency refinement to exact polynomial roots.
    """
    ul, ur = float(u_left), float(u_right)
    pc = None if poly is None else np.asarray(poly, dtype=float)
    if ul == ur:
        return ExactScalarSolution(ul, ur, np.array([]), [("const", ul)], dflux, [])
    lo, hi = min(ul, ur), max(ul, ur)
    grid = np.linspace(lo, hi, samples)
    vals = flux(grid)
    sign = 1.0 if ul < ur else -1.0  # lower hull for increasing data, upper otherwise
    pts = np.column_stack([grid, sign * vals])
    if hi - lo < TINY_JUMP * (1.0 + abs(lo)):
        # below grid resolution a single wave: a fan if speeds increase across it
        kind = "rare" if sign * (dflux(np.array(hi)) - dflux(np.array(lo))) > 0 else "shock"
        chain, segs = [], [[kind, lo, hi]]
    else:
        # qhull works in rescaled coordinates; the lower hull is affine invariant
        ys = pts[:, 1] - pts[:, 1].min()
        ys = ys / ys.max() if ys.max() > 0 else ys
        unit = np.column_stack([(grid - lo) / (hi - lo), ys])
        # a point far "above" keeps qhull from dropping the lower chain in flat cases
        hull = ConvexHull(np.vstack([unit, [[0.5, 11.0]]]))
        verts = sorted(set(v for v in hull.vertices if v < samples) | {0, samples - 1})
        chain = _lower_chain(pts, verts)
        segs = []  # (kind, a, b) in ascending u
    # bridges: consecutive hull vertices further apart than one grid cell
    start = grid[chain[0]] if chain else hi
    scale = 1e-12 * (1.0 + float(np.max(np.abs(pts[:, 1]))))
    for a_idx, b_idx in zip(chain[:-1], chain[1:]):
        if b_idx - a_idx > 1:
            a, b = grid[a_idx], grid[b_idx]
            inner = pts[a_idx + 1:b_idx]
            chord = pts[a_idx, 1] + (inner[:, 0] - a) * (pts[b_idx, 1] - pts[a_idx, 1]) / (b - a)
            if np.max(inner[:, 1] - chord) <= scale:
                continue  # qhull merged nearly collinear contact points

            if a > start:
                segs.append(["rare", start, a])
            segs.append(["shock", a, b])
            start = b
    if start < hi:
        segs.append(["rare", start, hi])

    def sf(x):
        return sign * flux(np.asarray(x, dtype=float))

    def sdf(x):
        return sign * dflux(np.asarray(x, dtype=float))

    spoly = None if pc is None else sign * pc
    # a contact hidden inside the first or last grid cell shows up as a chord
    # that violates the tangency inequality at the end of the interval
    first, last = segs[0], segs[-1]
    if first[0] == "shock":
        a, b = first[1], first[2]
        if float(sdf(a)) < float((sf(b) - sf(a)) / (b - a)) - 1e-14:
            segs.insert(0, ["rare", lo, lo])
    if last[0] == "shock":
        a, b = last[1], last[2]
        if float(sdf(b)) > float((sf(b) - sf(a)) / (b - a)) + 1e-14:
            segs.append(["rare", hi, hi])
    for k, seg in enumerate(segs):
        if seg[0] != "shock":
            continue
        a, b = seg[1], seg[2]
        a_int, b_int = k > 0, k < len(segs) - 1
        if a_int and not b_int:
            seg[1] = _tangent_root(sf, sdf, b, a, lo, b - 1e-12, spoly)
        elif b_int and not a_int:
            seg[2] = _tangent_root(sf, sdf, a, b, a + 1e-12, hi, spoly)
        elif a_int and b_int:
            def eqs(z):
                x, y = z
                slope = (sf(y) - sf(x)) / (y - x)
                return [float(sdf(x) - slope), float(sdf(y) - slope)]
            sol = fsolve(eqs, [a, b], xtol=1e-15, full_output=False)
            seg[1], seg[2] = float(sol[0]), float(sol[1])
    # re-link neighbouring rarefactions to the refined shock ends
    for k, seg in enumerate(segs):
        if seg[0] == "rare":
            if k > 0:
                seg[1] = segs[k - 1][2]
            if k + 1 < len(segs):
                seg[2] = segs[k + 1][1]
    if len(segs) > 1:
        segs = [s for s in segs if not (s[0] == "rare" and s[2] - s[1] <= 1e-14)]

    # traversal order from u_left to u_right
    order = segs if ul < ur else [[k, b, a] for k, a, b in reversed(segs)]
    structure = []
    for kind, ua, ub in order:
        if kind == "shock":
            s = float((flux(np.array(ub)) - flux(np.array(ua))) / (ub - ua))
            structure.append(("shock", float(ua), float(ub), s, s))
        else:
            structure.append(("rare", float(ua), float(ub), float(dflux(np.array(ua))), float(dflux(np.array(ub)))))

    breaks, pieces = [], [("const", ul)]
    for kind, ua, ub, sa, sb in structure:
        if kind == "shock":
            breaks.append(sa)
            pieces.append(("const", ub))
        else:
            breaks.append(sa)
            pieces.append(("rare", ua, ub))
            breaks.append(sb)
            pieces.append(("const", ub))
    return ExactScalarSolution(ul, ur, np.array(breaks), pieces, dflux, structure)


def _lower_chain(pts: np.ndarray, verts: list[int]) -> list[int]:
    """Filter sorted hull vertices down to the lower convex chain."""
    out: list[int] = []
    for v in verts:
        while len(out) >= 2:
            o, a = pts[out[-2]], pts[out[-1]]
            b = pts[v]
            if (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]) <= 0:
                out.pop()
            else:
                break
        out.append(v)
    return out


# -- finite volumes ------------------------------------------------------------


def _critical_points(dflux, lo: float, hi: float, n: int = 4001) -> np.ndarray:
    if hi <= lo:
        return np.array([])
    g = np.linspace(lo, hi, n)
    d = dflux(g)
    out = []
    for k in np.nonzero(np.sign(d[:-1]) * np.sign(d[1:]) < 0)[0]:
        out.append(brentq(lambda x: float(dflux(np.array(x))), g[k], g[k + 1]))
    out.extend(g[d == 0.0])
    return np.array(sorted(out))


def godunov_flux(flux, ul: np.ndarray, ur: np.ndarray, crit: np.ndarray) -> np.ndarray:
    """Exact Godunov flux: min of f over [ul, ur] if ul <= ur, max over [ur, ul] otherwise."""
    fl, fr = flux(ul), flux(ur)
    fmin = np.minimum(fl, fr)
    fmax = np.maximum(fl, fr)
    lo, hi = np.minimum(ul, ur), np.maximum(ul, ur)
    for c in crit:
        inside = (lo < c) & (c < hi)
        fc = float(flux(np.array(c)))
        fmin = np.where(inside, np.minimum(fmin, fc), fmin)
        fmax = np.where(inside, np.maximum(fmax, fc), fmax)
    return np.where(ul <= ur, fmin, fmax)


@dataclass
class FVProfile:
    x: np.ndarray
    u: np.ndarray  # shape (cells,) for scalar, (cells, N) for systems
    t: float
    steps: int


def reference_fv(system, u0, t_end: float, cells: int, cfl: float = 0.45,
                 x_range: tuple[float, float] = (-1.0, 2.0)) -> FVProfile:
    """First-order Godunov (scalar) or local Lax-Friedrichs (systems) cell averages.

    ``u0`` is a callable of x (vectorised) or an array of initial cell values.
    Boundaries are transmissive.
    """
    if not 0.0 < cfl <= 0.45:
        raise CFLViolation(f"CFL number {cfl} outside (0, 0.45]")
    if cells < 100:
        raise ValueError("at least 100 cells are required")
    a, b = x_range
    dx = (b - a) / cells
    x = a + dx * (np.arange(cells) + 0.5)
    n = system.n
    if callable(u0):
        u = np.array([np.asarray(u0(xi), dtype=float) for xi in x]).reshape(cells, n)
    else:
        u = np.asarray(u0, dtype=float).reshape(cells, n).copy()
    t, steps = 0.0, 0
    if n == 1:
        f, df = system.scalar_flux, system.scalar_speed
        v = u[:, 0].copy()
        crit = _critical_points(df, float(v.min()), float(v.max()))
        while t < t_end - 1e-15:
            smax = max(float(np.max(np.abs(df(v)))), 1e-12)
            dt = min(cfl * dx / smax, t_end - t)
            ext = np.concatenate([[v[0]], v, [v[-1]]])
            flx = godunov_flux(f, ext[:-1], ext[1:], crit)
            v = v - dt / dx * (flx[1:] - flx[:-1])
            t += dt
            steps += 1
        return FVProfile(x, v, t, steps)
    while t < t_end - 1e-15:
        fl = np.array([system.flux(w) for w in u])
        sp = np.array([np.max(np.abs(system.speeds(w))) for w in u])
        dt = min(cfl * dx / max(float(sp.max()), 1e-12), t_end - t)
        ue = np.vstack([u[:1], u, u[-1:]])
        fe = np.vstack([fl[:1], fl, fl[-1:]])
        se = np.concatenate([sp[:1], sp, sp[-1:]])
        alpha = np.maximum(se[:-1], se[1:])[:, None]
        flx = 0.5 * (fe[:-1] + fe[1:]) - 0.5 * alpha * (ue[1:] - ue[:-1])
        u = u - dt / dx * (flx[1:] - flx[:-1])
        t += dt
        steps += 1
    return FVProfile(x, u, t, steps)


# -- norms and rates -------------------------------------------------------------


def l1_distance(profile_a: tuple[np.ndarray, np.ndarray], profile_b: tuple[np.ndarray, np.ndarray],
                window: tuple[float, float]) -> float:
    """Trapezoid L1 distance of two sampled profiles on the union of their grids."""
    xa, ya = (np.asarray(v, dtype=float) for v in profile_a)
    xb, yb = (np.asarray(v, dtype=float) for v in profile_b)
    lo, hi = window
    grid = np.union1d(xa, xb)
    grid = np.union1d(grid[(grid > lo) & (grid < hi)], [lo, hi])
    ya2 = ya.reshape(len(xa), -1)
    yb2 = yb.reshape(len(xb), -1)
    da = np.column_stack([np.interp(grid, xa, ya2[:, k]) for k in range(ya2.shape[1])])
    db = np.column_stack([np.interp(grid, xb, yb2[:, k]) for k in range(yb2.shape[1])])
    diff = np.linalg.norm(da - db, axis=1)
    return float(np.sum(0.5 * (diff[1:] + diff[:-1]) * np.diff(grid)))


def l1_piecewise(fa: Callable, fb: Callable, breaks: Sequence[float], window: tuple[float, float],
                 sub: int = 4) -> float:
    """L1 distance of two functions that are smooth between the given breakpoints.

    Each interval between consecutive breaks is split into ``sub`` parts and
    integrated with 8-point Gauss-Legendre.
    """
    lo, hi = window
    pts = np.unique(np.clip(np.concatenate([[lo, hi], np.asarray(breaks, dtype=float)]), lo, hi))
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        if b - a <= 0:
            continue
        edges = np.linspace(a, b, sub + 1)
        for c, d in zip(edges[:-1], edges[1:]):
            xs = 0.5 * (c + d) + 0.5 * (d - c) * GL_NODES
            va = np.asarray(fa(xs), dtype=float).reshape(len(xs), -1)
            vb = np.asarray(fb(xs), dtype=float).reshape(len(xs), -1)
            total += 0.5 * (d - c) * float(np.dot(GL_WEIGHTS, np.linalg.norm(va - vb, axis=1)))
    return total


def convergence_rate(errors: Sequence[float], epsilons: Sequence[float]) -> float:
    """Least-squares slope of log(error) against log(epsilon)."""
    e = np.log(np.asarray(errors, dtype=float))
    h = np.log(np.asarray(epsilons, dtype=float))
    return float(np.polyfit(h, e, 1)[0])

"""Small deterministic optimization utilities shared across modules.

Everything here is plain numpy: Euclidean projection onto the probability
simplex, projected gradient ascent with Armijo backtracking, golden-section
line search, monotone bisection and simplex grids.
"""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from .extreal import NEG_INF
from .spaces import compositions

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of v (1-D or rows of 2-D) onto the simplex."""
    v = np.asarray(v, dtype=float)
    single = v.ndim == 1
    V = v[None, :] if single else v
    u = -np.sort(-V, axis=1)
    css = np.cumsum(u, axis=1)
    j = np.arange(1, V.shape[1] + 1)
    cond = u + (1.0 - css) / j > 0.0
    rho = cond.shape[1] - 1 - np.argmax(cond[:, ::-1], axis=1)
    lam = (1.0 - css[np.arange(V.shape[0]), rho]) / (rho + 1.0)
    out = np.maximum(V + lam[:, None], 0.0)
    return out[0] if single else out


def golden_min(fn: Callable[[float], float], lo: float, hi: float,
               tol: float = 1e-12, max_iter: int = 200) -> tuple[float, float]:
    """Golden-section minimum of a unimodal scalar function on [lo, hi]."""
    a, b = float(lo), float(hi)
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(max_iter):
        if b - a <= tol * (1.0 + abs(a) + abs(b)):
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = fn(d)
    x = c if fc <= fd else d
    return x, min(fc, fd)


def golden_max(fn, lo, hi, tol=1e-12, max_iter=200):
    x, v = golden_min(lambda t: -fn(t), lo, hi, tol, max_iter)
    return x, -v


def grid_then_golden_min(fn, lo, hi, coarse: int = 121, tol: float = 1e-12):
    """Coarse scan to bracket the minimum, then golden section inside."""
    xs = np.linspace(lo, hi, coarse)
    vals = np.array([fn(x) for x in xs])
    i = int(np.argmin(vals))
    a = xs[max(i - 1, 0)]
    b = xs[min(i + 1, coarse - 1)]
    return golden_min(fn, a, b, tol=tol)


def bisect_nonincreasing(G: Callable[[float], float], target: float,
                         lo: float, hi: float,
                         rel_tol: float = 1e-10, max_iter: int = 300) -> float:
    """Smallest root of G(m) <= target for nonincreasing continuous G.

    The bracket [lo, hi] is expanded geometrically until G(lo) > target
    and G(hi) <= target.
    """
    width = max(hi - lo, 1.0)
    for _ in range(200):
        if G(hi) <= target:
            break
        hi += width
        width *= 2.0
    else:
        raise ArithmeticError("bisection: upper bracket never crossed target")
    width = max(hi - lo, 1.0)
    for _ in range(200):
        if G(lo) > target:
            break
        lo -= width
        width *= 2.0
    else:
        # G <= target everywhere we looked: the infimum is unbounded below.
        return NEG_INF
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if G(mid) <= target:
            hi = mid
        else:
            lo = mid
        if hi - lo <= rel_tol * (1.0 + abs(mid)):
            break
    return hi


def simplex_grid(m: int, step: float) -> np.ndarray:
    """Regular grid on the probability simplex with the given mesh step."""
    k = max(int(round(1.0 / step)), 1)
    pts = [np.array(c, dtype=float) / k for c in compositions(k, m)]
    return np.array(pts)


def numeric_tangent_grad(fn: Callable[[np.ndarray], float], x: np.ndarray,
                         h: float = 1e-7) -> np.ndarray:
    """Central-difference gradient, usable on the simplex interior."""
    g = np.zeros_like(x)
    fx = None
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        up = fn(x + e)
        dn = fn(x - e)
        if np.isfinite(up) and np.isfinite(dn):
            g[i] = (up - dn) / (2 * h)
        else:
            if fx is None:
                fx = fn(x)
            if np.isfinite(up):
                g[i] = (up - fx) / h
            elif np.isfinite(dn):
                g[i] = (fx - dn) / h
            else:
                g[i] = 0.0
    return g


def pgd_max_simplex(objective: Callable[[np.ndarray], float],
                    x0: np.ndarray,
                    gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                    max_iter: int = 500,
                    grad_tol: float = 1e-9,
                    step0: float = 1.0,
                    ftol: float = 1e-13) -> tuple[np.ndarray, float]:
    """Maximize a concave function over the simplex by projected gradient
    ascent with Armijo backtracking.

    ``gradient`` may be None, in which case central differences are used.
    The objective may return -inf off its effective domain; backtracking
    rejects steps that land there.
    """
    x = project_simplex(np.asarray(x0, dtype=float))
    fx = objective(x)
    if not np.isfinite(fx):
        return x, fx
    grad = gradient if gradient is not None else (
        lambda z: numeric_tangent_grad(objective, z))
    stall = 0
    for _ in range(max_iter):
        g = grad(x)
        g = np.where(np.isfinite(g), g, 0.0)
        t = step0
        moved = False
        for _ in range(60):
            y = project_simplex(x + t * g)
            d = y - x
            nd = float(np.linalg.norm(d))
            if nd < 1e-16:
                break
            fy = objective(y)
            if np.isfinite(fy) and fy >= fx + 1e-4 * float(np.dot(g, d)):
                gain = fy - fx
                x, fx = y, fy
                moved = True
                stall = stall + 1 if gain <= ftol * (1.0 + abs(fx)) else 0
                break
            t *= 0.5
        if not moved or stall >= 2:
            break
        # Projected-gradient stationarity check.
        pg = project_simplex(x + g) - x
        if float(np.linalg.norm(pg)) <= grad_tol:
            break
    return x, fx


def coordinate_ascent_box(objective: Callable[[np.ndarray], float],
                          x0: np.ndarray, lo: float, hi: float,
                          sweeps: int = 50, tol: float = 1e-10) -> tuple[np.ndarray, float]:
    """Cyclic coordinate maximization over the box [lo, hi]^d."""
    x = np.asarray(x0, dtype=float).copy()
    fx = objective(x)
    for _ in range(sweeps):
        improved = 0.0
        for i in range(x.size):
            def slice_fn(t, i=i):
                y = x.copy()
                y[i] = t
                return objective(y)
            ti, vi = golden_max(slice_fn, lo, hi, tol=1e-11)
            if vi > fx + 1e-15:
                improved += vi - fx
                x[i], fx = ti, vi
        if improved <= tol:
            break
    return x, fx

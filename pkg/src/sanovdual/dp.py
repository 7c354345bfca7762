"""Backward recursion for the tensorized risk functional and its uses.

The n-step value of a dense field f on E^n is computed by the backward
recursion: the last coordinate is collapsed with the one-step risk measure,
slice by slice, n times.  For permutation-invariant fields the recursion
only needs the occupancy vector (type class) of the consumed prefix, which
is what makes long horizons tractable.

On top of the recursion sit the empirical-measure limit harness, the
superhedging decomposition (initial capital plus adapted acceptable
increments), and the adapted-control form of the transport risk.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import extreal
from .extreal import INF, NEG_INF
from .optim import pgd_max_simplex, project_simplex, simplex_grid
from .penalties import (AlphaSpec, Transport, penalty, spec_space,
                        transport_plan)
from .risk import risk_maximizer, risk_rows
from .spaces import (DENSE_CAP, Dist, FiniteSpace, Kernel, ProductDist,
                     SpaceError, compose, compositions, log_multinomial)

__all__ = [
    "DPTrace", "SanovRun", "SuperhedgeCert", "backward_value_dense",
    "backward_value_symmetric", "symmetric_terminal", "sanov_limit",
    "superhedge", "transport_control_value", "transport_longrun",
    "simplex_supremum", "iid_empirical_expectation",
    "greedy_optimizer_from_trace",
]


@dataclass
class DPTrace:
    """Stage values of the backward recursion: stages[k] has length m^k."""

    n: int
    space: FiniteSpace
    spec: AlphaSpec
    stages: list[np.ndarray]   # stages[0] is the scalar value

    @property
    def value(self) -> float:
        return float(self.stages[0][0])


def _flatten_field(f, space: FiniteSpace) -> tuple[np.ndarray, int]:
    arr = np.asarray(f, dtype=float)
    flat = arr.ravel()
    m = space.size
    n = int(round(np.log(flat.size) / np.log(m))) if m > 1 else arr.ndim
    if m ** n != flat.size:
        raise SpaceError("field length is not a power of the space size")
    return flat, n


def backward_value_dense(f, space: FiniteSpace, spec: AlphaSpec,
                         keep_trace: bool = False
                         ) -> tuple[float, Optional[DPTrace]]:
    """n-step risk of a dense field by the backward recursion."""
    flat, n = _flatten_field(f, space)
    m = space.size
    if flat.size > DENSE_CAP:
        raise SpaceError("dense field exceeds the 2^24 cap; "
                         "use backward_value_symmetric")
    stages = [flat.copy()] if keep_trace else []
    g = flat
    for _ in range(n):
        g = risk_rows(spec, g.reshape(-1, m))
        if keep_trace:
            stages.append(g.copy())
    value = float(g[0])
    trace = None
    if keep_trace:
        stages.reverse()
        trace = DPTrace(n, space, spec, stages)
    return value, trace


def backward_value_symmetric(values_by_type, n: int, space: FiniteSpace,
                             spec: AlphaSpec) -> float:
    """Backward recursion over occupancy vectors of the consumed prefix.

    ``values_by_type`` maps each composition of n over the space to the
    terminal value.  Valid because every implemented one-step risk is
    permutation-equivariant in the conditioning prefix: its parameters do
    not depend on the prefix at all.
    """
    m = space.size
    comps = list(compositions(n, m))
    V = {c: float(values_by_type[c]) for c in comps}
    missing = [c for c in comps if c not in values_by_type]
    if missing:
        raise SpaceError(f"missing type classes, e.g. {missing[0]}")
    for k in range(n - 1, -1, -1):
        comps_k = list(compositions(k, m))
        rows = np.empty((len(comps_k), m))
        for r, c in enumerate(comps_k):
            for y in range(m):
                nxt = list(c)
                nxt[y] += 1
                rows[r, y] = V[tuple(nxt)]
        vals = risk_rows(spec, rows)
        V = {c: float(vals[r]) for r, c in enumerate(comps_k)}
    return V[(0,) * m]


def symmetric_terminal(F: Callable[[np.ndarray], float], n: int,
                       space: FiniteSpace) -> dict:
    """Terminal values n * F(type/n) for a function of the empirical measure."""
    return {c: n * float(F(np.asarray(c, dtype=float) / n))
            for c in compositions(n, space.size)}


# ---------------------------------------------------------------------------
# Limit harness
# ---------------------------------------------------------------------------

def simplex_supremum(objective: Callable[[np.ndarray], float],
                     m: int, step: float = 0.01,
                     ascent: bool = True) -> tuple[float, np.ndarray]:
    """sup of a function over the simplex: grid scan plus local ascent."""
    pts = simplex_grid(m, step)
    vals = np.array([objective(p) for p in pts])
    i = int(np.argmax(vals))
    best, best_v = pts[i], float(vals[i])
    if ascent:
        x, v = pgd_max_simplex(objective, best)
        if v > best_v:
            best, best_v = x, float(v)
    return best_v, best


@dataclass
class SanovRun:
    """Scaled n-step values of n F(L_n) against the limiting supremum."""

    label: str
    schedule: list[int]
    values: list[float]
    target: float
    gaps: list[float]
    coupling_target: Optional[float] = None
    argmax: Optional[list[float]] = None

    def to_json_dict(self) -> dict:
        out = {
            "label": self.label,
            "schedule": self.schedule,
            "v_n": self.values,
            "target": self.target,
            "gaps": self.gaps,
        }
        if self.coupling_target is not None:
            out["coupling_target"] = self.coupling_target
        if self.argmax is not None:
            out["argmax"] = self.argmax
        return out

    def csv_rows(self) -> list[tuple]:
        return [(n, v, self.target, g)
                for n, v, g in zip(self.schedule, self.values, self.gaps)]


def sanov_limit(F: Callable[[np.ndarray], float], spec: AlphaSpec,
                schedule: Sequence[int], grid_step: float = 0.01,
                label: str = "sanov") -> SanovRun:
    """(1/n) rho_n(n F o L_n) along a schedule, with the limit target."""
    space = spec_space(spec)
    values = []
    for n in schedule:
        term = symmetric_terminal(F, n, space)
        values.append(backward_value_symmetric(term, n, space, spec) / n)

    def J(nu):
        a = penalty(nu, spec)
        return float(F(nu)) - a if np.isfinite(a) else NEG_INF

    target, arg = simplex_supremum(J, space.size, step=grid_step)
    gaps = [abs(v - target) for v in values]
    return SanovRun(label, [int(n) for n in schedule],
                    [float(v) for v in values], float(target), gaps,
                    argmax=[float(x) for x in arg])


def iid_empirical_expectation(F: Callable[[np.ndarray], float],
                              nu_weights: np.ndarray, n: int) -> float:
    """E under the n-fold product of nu of F(L_n), summed by type class."""
    w = np.asarray(nu_weights, dtype=float)
    m = w.size
    logw = np.where(w > 0, np.log(np.maximum(w, 1e-300)), -np.inf)
    total = 0.0
    for c in compositions(n, m):
        cv = np.asarray(c, dtype=float)
        if ((cv > 0) & (w <= 0)).any():
            continue
        logp = log_multinomial(c) + float(np.dot(cv[w > 0], logw[w > 0]))
        total += np.exp(logp) * float(F(cv / n))
    return total


# ---------------------------------------------------------------------------
# Superhedging decomposition
# ---------------------------------------------------------------------------

@dataclass
class SuperhedgeCert:
    """Initial capital y plus adapted increments reproducing f exactly.

    Each increment slice is acceptable: its one-step risk vanishes (up to
    the root-finding tolerance), and y + sum of increments telescopes back
    to f.
    """

    y: float
    increments: list[np.ndarray]   # increments[k-1] has length m^k
    residual_max: float
    slice_risk_max: float

    def to_json_dict(self) -> dict:
        return {
            "y": self.y,
            "increments": [inc.tolist() for inc in self.increments],
            "residual_max": self.residual_max,
            "slice_risk_max": self.slice_risk_max,
        }


def superhedge(f, space: FiniteSpace, spec: AlphaSpec) -> SuperhedgeCert:
    """Decompose f as y + sum of adapted acceptable increments."""
    value, trace = backward_value_dense(f, space, spec, keep_trace=True)
    m = space.size
    n = trace.n
    increments = []
    slice_max = 0.0
    for k in range(1, n + 1):
        g_k = trace.stages[k]
        g_prev = trace.stages[k - 1]
        inc = g_k - np.repeat(g_prev, m)
        increments.append(inc)
        slice_vals = risk_rows(spec, inc.reshape(-1, m))
        slice_max = max(slice_max, float(np.abs(slice_vals).max()))
    total = np.zeros(1)
    for inc in increments:
        total = np.repeat(total, m) + inc
    residual = np.abs(np.asarray(f, dtype=float).ravel() - value - total)
    return SuperhedgeCert(value, increments, float(residual.max()), slice_max)


def greedy_optimizer_from_trace(trace: DPTrace) -> ProductDist:
    """Extract the joint law attaining the n-step value from a trace."""
    m = trace.space.size
    first = risk_maximizer(trace.stages[1], trace.spec)
    kernels = []
    for k in range(2, trace.n + 1):
        g_k = trace.stages[k].reshape(-1, m)
        rows = np.empty_like(g_k)
        for r in range(g_k.shape[0]):
            rows[r] = risk_maximizer(g_k[r], trace.spec).weights
        kernels.append(Kernel(k, trace.space, rows))
    return compose(first, kernels)


# ---------------------------------------------------------------------------
# Transport: adapted-control form and long-run limit
# ---------------------------------------------------------------------------

def transport_control_value(f, space: FiniteSpace, mu: Dist, cost) -> float:
    """Value of the adapted-control problem: steer targets y_k at cost
    c(X_k, y_k) to maximize E[f(y_1, ..., y_n) - sum c(X_k, y_k)].

    Independent of the generic recursion: a direct post-decision backward
    pass, used to cross-check the Transport-spec recursion.
    """
    flat, n = _flatten_field(f, space)
    m = space.size
    c = np.asarray(cost, dtype=float)
    w = mu.weights
    J = flat
    for _ in range(n):
        arr = J.reshape(-1, 1, m)                     # (prefixes, 1, y)
        gains = arr - c[None, :, :]                   # (prefixes, x, y)
        gains = np.where(np.isinf(c)[None, :, :] |
                         np.isneginf(arr), -np.inf, gains)
        best = gains.max(axis=2)                      # (prefixes, x)
        J = extreal.integral_rows(w, best)
    return float(J[0])


def transport_longrun(F: Callable[[np.ndarray], float], mu: Dist, cost,
                      schedule: Sequence[int], grid_step: float = 0.01,
                      label: str = "transport-longrun") -> SanovRun:
    """Long-run scaled control values against both forms of the limit.

    The target is computed once as sup_nu (F(nu) - transport penalty) and
    once over couplings with first marginal mu; the two must agree.
    """
    c = np.asarray(cost, dtype=float)
    spec = Transport(mu, c)
    run = sanov_limit(F, spec, schedule, grid_step=grid_step, label=label)
    nu_star = np.asarray(run.argmax, dtype=float)
    coupling = _coupling_supremum(F, mu, c, nu_star)
    run.coupling_target = float(coupling)
    return run


def _coupling_supremum(F, mu: Dist, c: np.ndarray, nu_star: np.ndarray) -> float:
    """sup over couplings pi with first marginal mu of
    F(second marginal) - int c dpi, via per-row projected ascent."""
    m = mu.m
    w = mu.weights
    allowed = ~np.isinf(c)
    cfin = np.where(allowed, c, 0.0)

    def project_rows(K):
        K = np.where(allowed, K, 0.0)
        for x in range(m):
            cols = allowed[x]
            K[x, cols] = project_simplex(K[x, cols])
        return K

    def objective(K):
        nu = w @ K
        val = float(F(nu)) - float((w[:, None] * K * cfin).sum())
        return val

    starts = []
    sol = transport_plan(Dist(mu.space, nu_star), mu, c)
    if sol.plan is not None:
        rows = np.where(w[:, None] > 0, sol.plan / np.maximum(w[:, None], 1e-300),
                        1.0 / max(allowed.sum(axis=1).min(), 1))
        starts.append(project_rows(rows.copy()))
    uni = np.where(allowed, 1.0, 0.0)
    uni /= uni.sum(axis=1, keepdims=True)
    starts.append(uni)
    greedy = np.zeros((m, m))
    greedy[np.arange(m), np.argmin(np.where(allowed, c, INF), axis=1)] = 1.0
    starts.append(greedy)

    best = -np.inf
    for K0 in starts:
        K, val = _ascend_kernel(objective, project_rows, K0, F, w, cfin, allowed)
        best = max(best, val)
    return best


def _ascend_kernel(objective, project_rows, K0, F, w, cfin, allowed,
                   iters: int = 400):
    m = w.size
    K = project_rows(K0.copy())
    val = objective(K)
    h = 1e-7
    for _ in range(iters):
        nu = w @ K
        gF = np.empty(m)
        for y in range(m):
            e = np.zeros(m)
            e[y] = h
            gF[y] = (float(F(nu + e)) - float(F(np.maximum(nu - e, 0.0)))) / (2 * h)
        grad = w[:, None] * (gF[None, :] - cfin)
        grad = np.where(allowed, grad, 0.0)
        step = 1.0
        improved = False
        for _ in range(40):
            K_new = project_rows(K + step * grad)
            v_new = objective(K_new)
            if v_new > val + 1e-14:
                K, val = K_new, v_new
                improved = True
                break
            step *= 0.5
        if not improved:
            break
    return K, val

"""Penalty functionals on probability vectors and their tensorized form.

Six families are implemented, each a proper convex function of the
probability vector with value +inf off its effective domain:

* relative entropy against a reference law;
* L^p entropy  ||dnu/dmu||_{L^p(mu)} - 1  (the heavy-tail penalty);
* shortfall penalty  inf_{t>0} (1/t) (1 + int l*(t dnu/dmu) dmu)  for a
  convex nondecreasing loss l;
* robust entropy: the infimum of relative entropy over a convex hull of
  reference laws;
* the indicator of a convex hull (0 inside, +inf outside);
* optimal transport cost to the reference law for a nonnegative cost
  matrix (computed exactly by the transportation simplex).

The tensorized penalty of a joint law on E^n is the expected sum of the
one-step penalties of its successive disintegration kernels; terms on
zero-probability prefixes contribute nothing.

Most evaluators accept a (B, m) batch of rows as well as a single vector;
batching is what keeps the brute-force oracles in the test suite fast.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .extreal import INF
from .losses import LossFn
from .optim import pgd_max_simplex, project_simplex
from .spaces import Dist, ProductDist, SpaceError
from .transport import solve_transport

HULL_TOL = 1e-9  # Euclidean tolerance for membership in a convex hull

_PHI = (np.sqrt(5.0) - 1.0) / 2.0


# ---------------------------------------------------------------------------
# Penalty specifications
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RelativeEntropy:
    mu: Dist


@dataclass(frozen=True)
class LpEntropy:
    mu: Dist
    p: float

    def __post_init__(self):
        if not self.p > 1.0:
            raise SpaceError("L^p entropy needs p > 1")

    @property
    def loss_exponent(self) -> float:
        """The exponent q = p/(p-1) of the matching power loss."""
        return self.p / (self.p - 1.0)


@dataclass(frozen=True)
class Shortfall:
    mu: Dist
    loss: LossFn


@dataclass(frozen=True)
class Robust:
    generators: tuple[Dist, ...]

    def __post_init__(self):
        if len(self.generators) < 1:
            raise SpaceError("robust penalty needs a nonempty generator list")


@dataclass(frozen=True)
class SetIndicator:
    generators: tuple[Dist, ...]

    def __post_init__(self):
        if len(self.generators) < 1:
            raise SpaceError("set indicator needs a nonempty generator list")


@dataclass(frozen=True)
class Transport:
    mu: Dist
    cost: np.ndarray
    diagonal_integrable: bool = False

    def __post_init__(self):
        c = np.asarray(self.cost, dtype=float)
        m = self.mu.m
        if c.shape != (m, m):
            raise SpaceError("cost matrix must be m x m")
        if (c < 0).any():
            raise SpaceError("cost entries must be >= 0")
        if np.isinf(c).all(axis=1).any():
            raise SpaceError("cost needs at least one finite entry per row")
        if self.diagonal_integrable:
            live = self.mu.weights > 0
            if np.isinf(np.diag(c)[live]).any():
                raise SpaceError("diagonal cost must be finite on the support")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "cost", c)


AlphaSpec = Union[RelativeEntropy, LpEntropy, Shortfall, Robust, SetIndicator,
                  Transport]


def spec_space(spec: AlphaSpec):
    if isinstance(spec, (RelativeEntropy, LpEntropy, Shortfall, Transport)):
        return spec.mu.space
    return spec.generators[0].space


def feasible_support(spec: AlphaSpec) -> np.ndarray:
    """States that can carry mass while the penalty stays finite."""
    if isinstance(spec, (RelativeEntropy, LpEntropy, Shortfall)):
        return spec.mu.weights > 0
    if isinstance(spec, (Robust, SetIndicator)):
        sup = np.zeros(spec.generators[0].m, dtype=bool)
        for g in spec.generators:
            sup |= g.weights > 0
        return sup
    live = spec.mu.weights > 0
    return np.isfinite(np.asarray(spec.cost)[live]).any(axis=0)


def _rows(nu) -> tuple[np.ndarray, bool]:
    if isinstance(nu, Dist):
        return nu.weights[None, :], True
    arr = np.asarray(nu, dtype=float)
    if arr.ndim == 1:
        return arr[None, :], True
    return arr, False


def _ref_weights(mu) -> np.ndarray:
    return mu.weights if isinstance(mu, Dist) else np.asarray(mu, dtype=float)


def _rel_rows(V: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Row-wise relative entropy for broadcastable (B, m) pairs."""
    W = np.broadcast_to(W, V.shape)
    off = (V > 0.0) & (W <= 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(V > 0.0, V * (np.log(np.maximum(V, 1e-300)) -
                                       np.log(np.maximum(W, 1e-300))), 0.0)
    out = terms.sum(axis=1)
    out[off.any(axis=1)] = INF
    return out


# ---------------------------------------------------------------------------
# One-step penalties
# ---------------------------------------------------------------------------

def relative_entropy(nu, mu) -> float | np.ndarray:
    """sum nu_i log(nu_i / mu_i), with 0 log 0 = 0; +inf off the support."""
    V, single = _rows(nu)
    out = _rel_rows(V, _ref_weights(mu)[None, :])
    return float(out[0]) if single else out


def lp_entropy(nu, mu, p: float) -> float | np.ndarray:
    """||dnu/dmu||_{L^p(mu)} - 1 when nu << mu, else +inf; zero iff nu = mu."""
    if not p > 1.0:
        raise SpaceError("L^p entropy needs p > 1")
    V, single = _rows(nu)
    w = _ref_weights(mu)
    off = ((V > 0.0) & (w <= 0.0)[None, :]).any(axis=1)
    live = w > 0.0
    ratio = np.zeros_like(V)
    ratio[:, live] = V[:, live] / w[live]
    out = np.power(np.dot(np.power(ratio[:, live], p), w[live]), 1.0 / p) - 1.0
    out[off] = INF
    return float(out[0]) if single else out


def shortfall_penalty(nu, mu, loss: LossFn,
                      log_t_range: tuple[float, float] = (-30.0, 30.0),
                      coarse: int = 61,
                      golden_iters: int = 56) -> float | np.ndarray:
    """inf over t > 0 of (1/t)(1 + int l*(t dnu/dmu) dmu).

    The objective is the perspective of the conjugate loss, hence convex in
    1/t and unimodal in log t: a coarse scan over log t followed by
    golden-section search is reliable.
    """
    V, single = _rows(nu)
    w = _ref_weights(mu)
    off = ((V > 0.0) & (w <= 0.0)[None, :]).any(axis=1)
    live = w > 0.0
    wl = w[live]
    rl = np.zeros((V.shape[0], int(live.sum())))
    rl[:] = V[:, live] / wl

    def objective(log_t: np.ndarray) -> np.ndarray:
        t = np.exp(log_t)
        conj = np.asarray(loss.conjugate(t[:, None] * rl), dtype=float)
        bad = ~np.isfinite(conj)
        body = np.dot(np.where(bad, 0.0, conj), wl)
        body[(bad & (wl > 0.0)[None, :]).any(axis=1)] = INF
        return (1.0 + body) / t

    B = V.shape[0]
    lo, hi = log_t_range
    grid = np.linspace(lo, hi, coarse)
    vals = np.stack([objective(np.full(B, s)) for s in grid])
    best = np.argmin(vals, axis=0)
    a = grid[np.maximum(best - 1, 0)]
    b = grid[np.minimum(best + 1, coarse - 1)]
    c = b - _PHI * (b - a)
    d = a + _PHI * (b - a)
    fc, fd = objective(c), objective(d)
    for _ in range(golden_iters):
        take = fc <= fd
        b = np.where(take, d, b)
        a = np.where(take, a, c)
        c = b - _PHI * (b - a)
        d = a + _PHI * (b - a)
        fc, fd = objective(c), objective(d)
    out = np.minimum(np.minimum(fc, fd), vals[best, np.arange(B)])
    out[off] = INF
    return float(out[0]) if single else out


def robust_entropy(nu, generators: Sequence[Dist],
                   grad_tol: float = 1e-9) -> float | np.ndarray:
    """Infimum of relative entropy over the convex hull of the generators.

    The map w -> H(nu | sum_j w_j g_j) is convex in the mixture weights, so
    two generators reduce to a golden-section search and larger families to
    projected gradient descent with a vertex-enumeration upper bound.
    """
    V, single = _rows(nu)
    G = np.stack([g.weights for g in generators])
    k = G.shape[0]

    if k == 1:
        out = _rel_rows(V, G[0][None, :])
        return float(out[0]) if single else out

    if k == 2:
        g0, g1 = G[0], G[1]

        def ent_at(wv: np.ndarray) -> np.ndarray:
            mix = wv[:, None] * g0[None, :] + (1.0 - wv)[:, None] * g1[None, :]
            return _rel_rows(V, mix)

        a = np.zeros(V.shape[0])
        b = np.ones(V.shape[0])
        c = b - _PHI * (b - a)
        d = a + _PHI * (b - a)
        fc, fd = ent_at(c), ent_at(d)
        for _ in range(60):
            take = fc <= fd
            b = np.where(take, d, b)
            a = np.where(take, a, c)
            c = b - _PHI * (b - a)
            d = a + _PHI * (b - a)
            fc, fd = ent_at(c), ent_at(d)
        out = np.minimum(fc, fd)
        out = np.minimum(out, np.minimum(ent_at(np.zeros(V.shape[0])),
                                         ent_at(np.ones(V.shape[0]))))
        return float(out[0]) if single else out

    outs = np.empty(V.shape[0])
    starts = [np.full(k, 1.0 / k)]
    starts += [0.9 * e + 0.1 / k for e in np.eye(k)]
    for bi in range(V.shape[0]):
        row = V[bi]

        def neg_obj(wv):
            return -float(_rel_rows(row[None, :], (wv @ G)[None, :])[0])

        def neg_grad(wv):
            mix = wv @ G
            grad = np.array([
                -np.sum(np.where(mix > 0.0,
                                 row * G[j] / np.maximum(mix, 1e-300), 0.0))
                for j in range(k)
            ])
            return -grad

        best = float(min(_rel_rows(row[None, :], G[j][None, :])[0]
                         for j in range(k)))
        for w0 in starts:
            _, val = pgd_max_simplex(neg_obj, w0, gradient=neg_grad,
                                     grad_tol=grad_tol)
            if np.isfinite(val):
                best = min(best, -val)
        outs[bi] = best
    return float(outs[0]) if single else outs


def robust_mixture_argmin(nu_vec, generators: Sequence[Dist]
                          ) -> tuple[float, np.ndarray]:
    """Robust entropy of a single law plus the minimizing hull mixture."""
    from .optim import golden_min  # local import to avoid a cycle at load

    V = np.asarray(nu_vec, dtype=float)[None, :]
    G = np.stack([g.weights for g in generators])
    k = G.shape[0]
    if k == 1:
        return float(_rel_rows(V, G[0][None, :])[0]), G[0]
    if k == 2:
        def ent(w):
            return float(_rel_rows(V, (w * G[0] + (1 - w) * G[1])[None, :])[0])

        w, val = golden_min(ent, 0.0, 1.0, tol=1e-12)
        for wb in (0.0, 1.0):
            vb = ent(wb)
            if vb < val:
                w, val = wb, vb
        return float(val), w * G[0] + (1 - w) * G[1]

    best_val = INF
    best_w = np.full(k, 1.0 / k)
    row = V[0]

    def neg_obj(wv):
        return -float(_rel_rows(V, (wv @ G)[None, :])[0])

    def neg_grad(wv):
        mix = wv @ G
        return np.array([
            np.sum(np.where(mix > 0.0, row * G[j] / np.maximum(mix, 1e-300),
                            0.0)) for j in range(k)
        ])

    starts = [np.full(k, 1.0 / k)] + [0.9 * e + 0.1 / k for e in np.eye(k)]
    for w0 in starts:
        wv, val = pgd_max_simplex(neg_obj, w0, gradient=neg_grad)
        if np.isfinite(val) and -val < best_val:
            best_val, best_w = -val, wv
    for j in range(k):
        vj = float(_rel_rows(V, G[j][None, :])[0])
        if vj < best_val:
            best_val, best_w = vj, np.eye(k)[j]
    return best_val, best_w @ G


def hull_distance(nu_rows: np.ndarray, G: np.ndarray,
                  iters: int = 4000) -> np.ndarray:
    """Euclidean distance from each row to the convex hull of rows of G."""
    V = np.atleast_2d(np.asarray(nu_rows, dtype=float))
    k = G.shape[0]
    W = np.full((V.shape[0], k), 1.0 / k)
    gram = G @ G.T
    step = 1.0 / (2.0 * float(np.linalg.eigvalsh(gram).max()) + 1e-12)
    for _ in range(iters):
        grad = 2.0 * (W @ G - V) @ G.T
        W_new = project_simplex(W - step * grad)
        if np.abs(W_new - W).max() < 1e-15:
            W = W_new
            break
        W = W_new
    return np.linalg.norm(W @ G - V, axis=1)


def hull_indicator(nu, generators: Sequence[Dist]) -> float | np.ndarray:
    """0 when nu lies in the convex hull of the generators, else +inf."""
    V, single = _rows(nu)
    G = np.stack([g.weights for g in generators])
    if G.shape[0] == 1:
        d = np.linalg.norm(V - G[0][None, :], axis=1)
    elif V.shape[1] == 2:
        # Two-state simplex: the hull is the interval of first coordinates.
        lo, hi = G[:, 0].min(), G[:, 0].max()
        excess = np.maximum(np.maximum(lo - V[:, 0], V[:, 0] - hi), 0.0)
        d = excess * np.sqrt(2.0)
    else:
        d = hull_distance(V, G)
    out = np.where(d <= HULL_TOL, 0.0, INF)
    return float(out[0]) if single else out


def transport_cost(nu, mu, cost) -> float | np.ndarray:
    """Exact optimal transport cost from mu to nu; +inf when infeasible."""
    V, single = _rows(nu)
    w = _ref_weights(mu)
    c = np.asarray(cost, dtype=float)
    if w.size == 2:
        out = _transport_cost_2x2(V, w, c)
    else:
        out = np.array([solve_transport(w, V[i], c).value
                        for i in range(V.shape[0])])
    return float(out[0]) if single else out


def _transport_cost_2x2(V: np.ndarray, w: np.ndarray, c: np.ndarray) -> np.ndarray:
    # One degree of freedom t = plan[0, 0]; the cost is linear in t, so the
    # optimum sits at an endpoint of the feasible interval (this remains
    # true with +inf entries, which pin t to one of the same endpoints).
    t_lo = np.maximum(0.0, w[0] + V[:, 0] - 1.0)
    t_hi = np.minimum(w[0], V[:, 0])

    def value_at(t):
        coefs = np.stack([t, w[0] - t, V[:, 0] - t, 1.0 - w[0] - V[:, 0] + t],
                         axis=1)
        coefs = np.maximum(coefs, 0.0)
        cs = np.array([c[0, 0], c[0, 1], c[1, 0], c[1, 1]])
        inf_hit = ((coefs > 1e-14) & np.isinf(cs)[None, :]).any(axis=1)
        fin = np.where(np.isinf(cs), 0.0, cs)
        out = coefs @ fin
        out[inf_hit] = INF
        return out

    return np.minimum(value_at(t_lo), value_at(t_hi))


def transport_plan(nu: Dist, mu: Dist, cost):
    """Optimal coupling and dual potentials for the transport penalty."""
    return solve_transport(mu.weights, nu.weights, np.asarray(cost, float))


# ---------------------------------------------------------------------------
# Dispatch and the tensorized penalty
# ---------------------------------------------------------------------------

def penalty(nu, spec: AlphaSpec) -> float | np.ndarray:
    """Evaluate the one-step penalty of the given specification."""
    if isinstance(spec, RelativeEntropy):
        return relative_entropy(nu, spec.mu)
    if isinstance(spec, LpEntropy):
        return lp_entropy(nu, spec.mu, spec.p)
    if isinstance(spec, Shortfall):
        return shortfall_penalty(nu, spec.mu, spec.loss)
    if isinstance(spec, Robust):
        return robust_entropy(nu, spec.generators)
    if isinstance(spec, SetIndicator):
        return hull_indicator(nu, spec.generators)
    if isinstance(spec, Transport):
        return transport_cost(nu, spec.mu, spec.cost)
    raise TypeError(f"unknown penalty spec {spec!r}")


def penalty_rows(spec: AlphaSpec, rows: np.ndarray) -> np.ndarray:
    out = penalty(np.atleast_2d(np.asarray(rows, dtype=float)), spec)
    return np.atleast_1d(out)


def tensor_penalty(nu: ProductDist, spec: AlphaSpec) -> float:
    """Expected sum of one-step penalties over the disintegration kernels."""
    out = tensor_penalty_batch(nu.tensor[None, :], nu.n, nu.m, spec)
    return float(out[0])


def tensor_penalty_batch(tensors: np.ndarray, n: int, m: int,
                         spec: AlphaSpec) -> np.ndarray:
    """Vectorized tensorized penalty over a (B, m^n) batch of joint laws."""
    T = np.atleast_2d(np.asarray(tensors, dtype=float))
    B = T.shape[0]
    total = np.zeros(B)
    for k in range(1, n + 1):
        joint = T.reshape(B, m ** k, -1).sum(axis=2)
        joint = joint.reshape(B, m ** (k - 1), m)
        prefix = joint.sum(axis=2)                          # (B, m^(k-1))
        rows = np.full_like(joint, 1.0 / m)
        live = prefix > 0.0
        rows[live] = joint[live] / prefix[live][:, None]
        alpha = penalty_rows(spec, rows.reshape(-1, m)).reshape(B, -1)
        contrib = np.where(live,
                           prefix * np.where(np.isfinite(alpha), alpha, 0.0),
                           0.0)
        contrib[live & np.isposinf(alpha)] = INF
        total = total + contrib.sum(axis=1)
    return total

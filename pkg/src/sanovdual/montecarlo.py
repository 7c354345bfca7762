"""Monte Carlo verification harness.

Heavy-tailed samplers with deterministic per-replication streams, tail
probability estimation with Wilson intervals, log-log rate fitting,
sample-average-approximation experiments for stochastic optimization, and
the bounded-increment martingale experiment.

Replication i draws from a counter-based Philox generator keyed by
base_seed XOR i, so replications are reproducible, order-independent and
parallelizable by index; all aggregation is associative (hit counts).

All rate checks are one-sided upper-bound checks: no lower-bound claim is
ever asserted.  Slack constants (1.2 bound ratio, +0.25 slope, +0.1 on the
martingale exponent) are harness choices and are surfaced in the result
objects.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import stats

from .optim import golden_max
from .quadrature import expect as _quad_expect

WILSON_Z = 1.959963984540054   # two-sided 95%

BOUND_RATIO_SLACK = 1.2
SLOPE_SLACK = 0.25
MARTINGALE_SLACK = 0.1


def rep_rng(base_seed: int, i: int) -> np.random.Generator:
    """Stream for replication i: Philox keyed by base_seed XOR i."""
    key = (int(base_seed) ^ int(i)) & (2 ** 64 - 1)
    return np.random.Generator(np.random.Philox(key=key))


# ---------------------------------------------------------------------------
# Samplers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ParetoSampler:
    """Standard Pareto on [1, inf) with survival x^(-a); centering subtracts
    the analytic mean a/(a-1)."""

    a: float
    centered: bool = True

    @property
    def shift(self) -> float:
        return self.a / (self.a - 1.0) if self.centered else 0.0

    def draw(self, rng: np.random.Generator, size) -> np.ndarray:
        return rng.pareto(self.a, size) + 1.0 - self.shift


@dataclass(frozen=True)
class StudentTSampler:
    df: float

    def draw(self, rng, size):
        return rng.standard_t(self.df, size)


@dataclass(frozen=True)
class LogNormalSampler:
    sigma: float
    centered: bool = True

    @property
    def shift(self) -> float:
        return float(np.exp(self.sigma ** 2 / 2.0)) if self.centered else 0.0

    def draw(self, rng, size):
        return rng.lognormal(0.0, self.sigma, size) - self.shift


@dataclass(frozen=True)
class FiniteSampler:
    """Finite-support sampler; atoms may be scalars or vectors."""

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.atoms, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if (w < 0).any() or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("weights must form a probability vector")
        object.__setattr__(self, "atoms", a)
        object.__setattr__(self, "weights", w / w.sum())

    def draw(self, rng, size):
        idx = rng.choice(self.weights.size, size=size, p=self.weights)
        return self.atoms[idx]


Sampler = ParetoSampler | StudentTSampler | LogNormalSampler | FiniteSampler


# Martingale increment families: each maps per-step uniforms to increments,
# possibly depending on the running sum (conditionally centered, bounded).

@dataclass(frozen=True)
class RademacherIncrements:
    """Fair +-1 increments; log-mgf bound phi(y) = log cosh y."""

    def phi(self, y: float) -> float:
        return float(np.logaddexp(y, -y) - math.log(2.0))

    def step(self, u: np.ndarray, s: np.ndarray) -> np.ndarray:
        return np.where(u < 0.5, -1.0, 1.0)


@dataclass(frozen=True)
class UniformIncrements:
    """Uniform[-1, 1] increments; phi(y) = log(sinh y / y)."""

    def phi(self, y: float) -> float:
        if abs(y) < 1e-8:
            return y * y / 6.0
        return float(np.log(np.sinh(abs(y)) / abs(y)))

    def step(self, u, s):
        return 2.0 * u - 1.0


@dataclass(frozen=True)
class ScriptedIncrements:
    """Past-dependent, conditionally centered increments in [-1, 1].

    When the running sum is nonnegative the step is -1/2 w.p. 2/3 and +1
    w.p. 1/3; otherwise -1 w.p. 1/3 and +1/2 w.p. 2/3.  Any such bounded
    centered family satisfies the log cosh bound, so the same phi applies
    uniformly even though the sequence is not i.i.d.
    """

    def phi(self, y: float) -> float:
        return float(np.logaddexp(y, -y) - math.log(2.0))

    def step(self, u, s):
        up = np.where(u < 2.0 / 3.0, -0.5, 1.0)
        dn = np.where(u < 1.0 / 3.0, -1.0, 0.5)
        return np.where(s >= 0.0, up, dn)


IncrementFamily = RademacherIncrements | UniformIncrements | ScriptedIncrements

INCREMENT_FAMILIES = {
    "rademacher": RademacherIncrements,
    "uniform": UniformIncrements,
    "scripted": ScriptedIncrements,
}


# ---------------------------------------------------------------------------
# Tail estimation
# ---------------------------------------------------------------------------

def wilson_interval(hits: int, total: int,
                    z: float = WILSON_Z) -> tuple[float, float]:
    if total <= 0:
        raise ValueError("need at least one replication")
    p = hits / total
    denom = 1.0 + z * z / total
    center = (p + z * z / (2 * total)) / denom
    half = z * math.sqrt(p * (1 - p) / total + z * z / (4 * total * total)) / denom
    return max(center - half, 0.0), min(center + half, 1.0)


@dataclass(frozen=True)
class TailEstimate:
    n: int
    r: float
    replications: int
    hits: int
    p_hat: float
    lo: float
    hi: float

    def csv_row(self, bound: Optional[float] = None) -> tuple:
        return (self.n, self.r, self.p_hat, self.lo, self.hi,
                bound if bound is not None else "")


def estimate_tail(sampler: Sampler, n: int, r: float, replications: int,
                  seed: int, threads: int = 1) -> TailEstimate:
    """Fraction of replications whose sample mean reaches radius r.

    Scalar samples compare the mean itself; vector samples compare its
    Euclidean norm.
    """
    if replications < 1000:
        raise ValueError("need at least 1e3 replications for a usable interval")

    def count_range(lo: int, hi: int) -> int:
        hits = 0
        for i in range(lo, hi):
            x = sampler.draw(rep_rng(seed, i), n)
            if x.ndim == 1:
                hit = x.mean() >= r
            else:
                hit = np.linalg.norm(x.mean(axis=0)) >= r
            hits += bool(hit)
        return hits

    if threads > 1:
        edges = np.linspace(0, replications, threads + 1).astype(int)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            hits = sum(pool.map(lambda ab: count_range(*ab),
                                zip(edges[:-1], edges[1:])))
    else:
        hits = count_range(0, replications)
    p = hits / replications
    lo, hi = wilson_interval(hits, replications)
    return TailEstimate(n, r, replications, hits, p, lo, hi)


@dataclass(frozen=True)
class RateFit:
    slope: float
    stderr: float
    upper95: float
    points_used: int
    status: str  # "ok" | "inconclusive"


def rate_fit(ns: Sequence[int], p_hats: Sequence[float]) -> RateFit:
    """Least-squares slope of log p against log n, zero-hit cells excluded."""
    ns = np.asarray(ns, dtype=float)
    ps = np.asarray(p_hats, dtype=float)
    keep = ps > 0.0
    if keep.sum() < 3:
        return RateFit(math.nan, math.nan, math.nan, int(keep.sum()),
                       "inconclusive")
    x = np.log(ns[keep])
    y = np.log(ps[keep])
    k = x.size
    xm, ym = x.mean(), y.mean()
    sxx = float(((x - xm) ** 2).sum())
    slope = float(((x - xm) * (y - ym)).sum() / sxx)
    resid = y - (ym + slope * (x - xm))
    if k > 2:
        sigma2 = float((resid ** 2).sum() / (k - 2))
        se = math.sqrt(sigma2 / sxx)
        upper = slope + float(stats.t.ppf(0.95, k - 2)) * se
    else:
        se, upper = 0.0, slope
    return RateFit(slope, se, upper, k, "ok")


def mann_kendall_upward_p(xs: Sequence[float]) -> float:
    """One-sided p-value of the Mann-Kendall test against an upward trend."""
    x = np.asarray(xs, dtype=float)
    k = x.size
    s = 0
    for i in range(k - 1):
        s += int(np.sign(x[i + 1:] - x[i]).sum())
    var = k * (k - 1) * (2 * k + 5) / 18.0
    _, counts = np.unique(x, return_counts=True)
    for t in counts[counts > 1]:
        var -= t * (t - 1) * (2 * t + 5) / 18.0
    if var <= 0:
        return 1.0
    if s > 0:
        z = (s - 1) / math.sqrt(var)
    elif s < 0:
        z = (s + 1) / math.sqrt(var)
    else:
        z = 0.0
    return float(0.5 * math.erfc(z / math.sqrt(2.0)))


# ---------------------------------------------------------------------------
# Stochastic optimization experiments
# ---------------------------------------------------------------------------

class GrowthValidationError(ValueError):
    """The declared growth function fails on the decision grid."""


@dataclass
class SAAInstance:
    """A finite-grid stochastic program min_x E[h(x, W)].

    ``loss`` must be vectorized in its second argument.  ``law`` provides
    the Monte Carlo draws; exact values V(mu) use the sampler's own finite
    support or quadrature against a matching closed-form density.
    """

    decisions: np.ndarray
    loss: Callable[[float, np.ndarray], np.ndarray]
    law: Sampler
    epsilon: float
    q: float
    growth: Optional[Callable[[float], float]] = None

    def __post_init__(self):
        self.decisions = np.asarray(self.decisions, dtype=float)

    def expected_losses(self) -> np.ndarray:
        """E[h(x, W)] per decision, exactly or by quadrature."""
        if isinstance(self.law, FiniteSampler):
            return np.array([
                float(np.dot(self.law.weights, self.loss(x, self.law.atoms)))
                for x in self.decisions
            ])
        pdf, lo, hi = _sampler_density(self.law)
        out = np.empty(self.decisions.size)
        for j, x in enumerate(self.decisions):
            out[j] = _quad_expect(pdf, lo, hi, lambda w: self.loss(x, w))
        return out

    def true_value(self) -> float:
        return float(self.expected_losses().min())

    def true_argmin(self) -> float:
        ev = self.expected_losses()
        return float(self.decisions[int(np.argmin(ev))])

    def check_integrability(self, seed: int = 0, draws: int = 100_000) -> float:
        """Sampled q-th moment of (sup_x h(x, W))^+; must be finite."""
        w = self.law.draw(rep_rng(seed, 0), draws)
        H = np.stack([self.loss(x, w) for x in self.decisions])
        psi = np.maximum(H.max(axis=0), 0.0)
        val = float(np.mean(psi ** self.q))
        if not math.isfinite(val):
            raise GrowthValidationError("sampled psi^q moment is not finite")
        return val


def _sampler_density(law: Sampler):
    if isinstance(law, ParetoSampler):
        a, c = law.a, law.shift
        return (lambda w: a * (w + c) ** (-a - 1.0)), 1.0 - c, np.inf
    if isinstance(law, StudentTSampler):
        fr = stats.t(law.df)
        return fr.pdf, -np.inf, np.inf
    if isinstance(law, LogNormalSampler):
        fr = stats.lognorm(s=law.sigma)
        c = law.shift
        return (lambda w: fr.pdf(w + c)), -c, np.inf
    raise TypeError(f"no closed density for {law!r}")


def _empirical_values(instance: SAAInstance, n: int, replications: int,
                      seed: int) -> np.ndarray:
    """V(L_n) for each replication."""
    out = np.empty(replications)
    xs = instance.decisions
    for i in range(replications):
        w = instance.law.draw(rep_rng(seed, i), n)
        means = np.array([instance.loss(x, w).mean() for x in xs])
        out[i] = means.min()
    return out


@dataclass
class SAARun:
    schedule: list[int]
    estimates: list[TailEstimate]
    scaled: list[float]            # n^(q-1) * p_hat
    mann_kendall_p: float
    fit: RateFit
    slope_budget: float
    true_value: float


def saa_run(instance: SAAInstance, schedule: Sequence[int], replications: int,
            seed: int) -> SAARun:
    """Exceedance probabilities of |V(L_n) - V(mu)| >= epsilon with the
    polynomial-rate diagnostics."""
    v_star = instance.true_value()
    q = instance.q
    ests = []
    for n in schedule:
        vals = _empirical_values(instance, int(n), replications, seed)
        hits = int((np.abs(vals - v_star) >= instance.epsilon).sum())
        lo, hi = wilson_interval(hits, replications)
        ests.append(TailEstimate(int(n), instance.epsilon, replications,
                                 hits, hits / replications, lo, hi))
    scaled = [n ** (q - 1.0) * e.p_hat for n, e in zip(schedule, ests)]
    mk = mann_kendall_upward_p(scaled)
    fit = rate_fit([e.n for e in ests], [e.p_hat for e in ests])
    return SAARun([int(n) for n in schedule], ests, scaled, mk, fit,
                  slope_budget=(1.0 - q) + SLOPE_SLACK, true_value=v_star)


def saa_exact_exceedance(instance: SAAInstance, n: int) -> float:
    """Exact exceedance probability by enumerating the n-fold product law
    (finite-support laws only)."""
    if not isinstance(instance.law, FiniteSampler):
        raise TypeError("exact enumeration needs a finite-support law")
    atoms = instance.law.atoms
    weights = instance.law.weights
    v_star = instance.true_value()
    k = weights.size
    total = 0.0
    idx = np.zeros(n, dtype=int)
    while True:
        w = atoms[idx]
        prob = float(np.prod(weights[idx]))
        means = np.array([instance.loss(x, w).mean() for x in instance.decisions])
        if abs(means.min() - v_star) >= instance.epsilon:
            total += prob
        j = n - 1
        while j >= 0 and idx[j] == k - 1:
            idx[j] = 0
            j -= 1
        if j < 0:
            break
        idx[j] += 1
    return total


@dataclass
class ArgminRun:
    schedule: list[int]
    estimates: list[TailEstimate]
    scaled: list[float]
    mann_kendall_p: float
    fit: RateFit
    slope_budget: float
    argmin: float


def argmin_tracking(instance: SAAInstance, schedule: Sequence[int],
                    replications: int, seed: int) -> ArgminRun:
    """Exceedance of growth(d(argmin(mu), argmin(L_n))) >= epsilon.

    The declared growth function is validated on the grid first:
    growth(d(x*, x)) <= E h(x, .) - E h(x*, .) must hold for every grid
    decision, otherwise the experiment refuses to run.
    """
    if instance.growth is None:
        raise GrowthValidationError("no growth function declared")
    ev = instance.expected_losses()
    j_star = int(np.argmin(ev))
    x_star = float(instance.decisions[j_star])
    viol = []
    for j, x in enumerate(instance.decisions):
        lhs = float(instance.growth(abs(x - x_star)))
        rhs = float(ev[j] - ev[j_star])
        if lhs > rhs + 1e-12:
            viol.append((x, lhs, rhs))
    if viol:
        raise GrowthValidationError(
            f"growth hypothesis fails at {len(viol)} grid points, "
            f"e.g. x={viol[0][0]:g}: growth={viol[0][1]:.3g} > gap={viol[0][2]:.3g}")

    q = instance.q
    ests = []
    for n in schedule:
        hits = 0
        for i in range(replications):
            w = instance.law.draw(rep_rng(seed, i), int(n))
            means = np.array([instance.loss(x, w).mean()
                              for x in instance.decisions])
            x_hat = float(instance.decisions[int(np.argmin(means))])
            hits += bool(instance.growth(abs(x_hat - x_star)) >= instance.epsilon)
        lo, hi = wilson_interval(hits, replications)
        ests.append(TailEstimate(int(n), instance.epsilon, replications,
                                 hits, hits / replications, lo, hi))
    scaled = [n ** (q - 1.0) * e.p_hat for n, e in zip(schedule, ests)]
    fit = rate_fit([e.n for e in ests], [e.p_hat for e in ests])
    return ArgminRun([int(n) for n in schedule], ests, scaled,
                     mann_kendall_upward_p(scaled), fit,
                     slope_budget=(1.0 - q) + SLOPE_SLACK, argmin=x_star)


# ---------------------------------------------------------------------------
# Martingale experiment
# ---------------------------------------------------------------------------

@dataclass
class AzumaResult:
    n: int
    r: float
    replications: int
    hits: int
    p_hat: float
    phi_star: float
    empirical_exponent: float      # (1/n) log p_hat, -inf when no hits
    budget: float                  # -phi_star + slack
    ok: bool
    exact_tail: Optional[float] = None


def conjugate_scalar(phi: Callable[[float], float], r: float,
                     radius: float = 1e3) -> float:
    """phi*(r) = sup_y (r y - phi(y)) by expanding golden-section search."""
    lo, hi = -1.0, 1.0
    for _ in range(40):
        y, v = golden_max(lambda t: r * t - phi(t), lo, hi, tol=1e-12)
        if min(y - lo, hi - y) > 0.05 * (hi - lo):
            return v
        if hi - lo >= 2.0 * radius:
            return v
        lo *= 2.0
        hi *= 2.0
    return v


def _simulate_final_means(family: IncrementFamily, n: int, replications: int,
                          seed: int) -> np.ndarray:
    """S_n / n for each replication, one Philox row per replication."""
    U = np.empty((replications, n))
    for i in range(replications):
        U[i] = rep_rng(seed, i).random(n)
    s = np.zeros(replications)
    for k in range(n):
        s += family.step(U[:, k], s)
    return s / n


def azuma_experiment(family: IncrementFamily, r: float, n: int,
                     replications: int, seed: int,
                     slack: float = MARTINGALE_SLACK) -> AzumaResult:
    """Compare (1/n) log P(S_n/n >= r) against -phi*(r) + slack."""
    means = _simulate_final_means(family, n, replications, seed)
    hits = int((means >= r).sum())
    p_hat = hits / replications
    phi_star = conjugate_scalar(family.phi, r)
    emp = math.log(p_hat) / n if hits > 0 else -math.inf
    budget = -phi_star + slack
    exact = None
    if isinstance(family, RademacherIncrements):
        exact = _rademacher_exact_tail(n, r)
    return AzumaResult(n, r, replications, hits, p_hat, phi_star, emp,
                       budget, emp <= budget, exact)


def _rademacher_exact_tail(n: int, r: float) -> float:
    """Exact P(S_n / n >= r) for fair +-1 steps, summed in log space."""
    k_min = math.ceil((n + r * n) / 2.0)
    if k_min > n:
        return 0.0
    log_half = -n * math.log(2.0)
    total = 0.0
    for k in range(int(k_min), n + 1):
        total += math.exp(math.lgamma(n + 1) - math.lgamma(k + 1)
                          - math.lgamma(n - k + 1) + log_half)
    return total

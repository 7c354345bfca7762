import math

import numpy as np
import pytest

from sanovdual.montecarlo import (FiniteSampler, GrowthValidationError,
                                  LogNormalSampler, ParetoSampler,
                                  RademacherIncrements, SAAInstance,
                                  ScriptedIncrements, StudentTSampler,
                                  UniformIncrements, azuma_experiment,
                                  conjugate_scalar, estimate_tail,
                                  mann_kendall_upward_p, rate_fit, rep_rng,
                                  saa_exact_exceedance, saa_run,
                                  wilson_interval, argmin_tracking)

RADEMACHER = FiniteSampler(np.array([-1.0, 1.0]), np.array([0.5, 0.5]))


def exact_binomial_tail(n, r):
    """P(mean of n fair +-1 steps >= r), exact."""
    k_min = math.ceil((n + r * n) / 2.0)
    return sum(math.comb(n, k) for k in range(k_min, n + 1)) / 2.0 ** n


class TestSeeding:
    def test_replication_streams_differ(self):
        a = rep_rng(42, 0).random(4)
        b = rep_rng(42, 1).random(4)
        assert not np.allclose(a, b)

    def test_replication_streams_reproduce(self):
        assert np.array_equal(rep_rng(7, 3).random(8), rep_rng(7, 3).random(8))


class TestSamplers:
    @pytest.mark.parametrize("sampler", [
        ParetoSampler(2.5), LogNormalSampler(0.8), StudentTSampler(5.0),
    ])
    def test_centering_within_three_se(self, sampler):
        x = sampler.draw(rep_rng(0, 0), 1_000_000)
        se = x.std() / math.sqrt(x.size)
        assert abs(x.mean()) <= 3 * se

    def test_pareto_uses_analytic_mean(self):
        assert abs(ParetoSampler(2.5).shift - 2.5 / 1.5) <= 1e-15
        assert ParetoSampler(2.5, centered=False).shift == 0.0

    def test_finite_sampler_distribution(self):
        s = FiniteSampler(np.array([1.0, 5.0]), np.array([0.25, 0.75]))
        x = s.draw(rep_rng(1, 0), 200_000)
        assert abs((x == 5.0).mean() - 0.75) <= 0.01


class TestEstimateTail:
    def test_degenerate_sampler_never_hits(self):
        s = FiniteSampler(np.array([0.0]), np.array([1.0]))
        est = estimate_tail(s, 50, 0.5, 2000, seed=0)
        assert est.hits == 0 and est.p_hat == 0.0

    def test_matches_exact_binomial(self):
        n, r = 100, 0.2
        est = estimate_tail(RADEMACHER, n, r, 20_000, seed=3)
        p = exact_binomial_tail(n, r)
        assert est.lo <= p <= est.hi

    def test_deterministic_and_thread_invariant(self):
        a = estimate_tail(RADEMACHER, 50, 0.3, 3000, seed=5)
        b = estimate_tail(RADEMACHER, 50, 0.3, 3000, seed=5)
        c = estimate_tail(RADEMACHER, 50, 0.3, 3000, seed=5, threads=4)
        assert a == b == c

    def test_replication_floor(self):
        with pytest.raises(ValueError):
            estimate_tail(RADEMACHER, 10, 0.1, 999, seed=0)

    def test_vector_samples_use_norm(self):
        atoms = np.array([[1.0, 0.0], [-1.0, 0.0]])
        s = FiniteSampler(atoms, np.array([0.5, 0.5]))
        est = estimate_tail(s, 4, 0.99, 2000, seed=1)
        # ||mean|| >= 0.99 iff all four draws agree: prob 2 * (1/16)
        lo, hi = wilson_interval(est.hits, est.replications)
        assert lo <= 0.125 <= hi


class TestWilson:
    def test_contains_point_estimate(self):
        lo, hi = wilson_interval(7, 100)
        assert lo <= 0.07 <= hi

    def test_coverage_on_exact_binomial(self):
        # >= 93% of intervals should cover the true p across 300 runs
        n, r = 20, 0.3
        p_true = exact_binomial_tail(n, r)
        cover = 0
        runs = 300
        for k in range(runs):
            est = estimate_tail(RADEMACHER, n, r, 1000, seed=10_000 + k)
            cover += est.lo <= p_true <= est.hi
        assert cover / runs >= 0.93


class TestRateFit:
    def test_exact_power_law(self):
        ns = [10, 100, 1000]
        fit = rate_fit(ns, [n ** -1.5 for n in ns])
        assert abs(fit.slope + 1.5) <= 1e-12
        assert fit.status == "ok"

    def test_exponential_decay_is_steeper_than_polynomial(self):
        # light-tail oracle: binomial tails fall faster than n^(1-q)
        ns = [20, 40, 80, 160]
        fit = rate_fit(ns, [exact_binomial_tail(n, 0.3) for n in ns])
        assert fit.status == "ok"
        assert fit.slope < (1.0 - 2.0)

    def test_zero_hits_excluded(self):
        fit = rate_fit([10, 20, 40, 80], [0.1, 0.0, 0.025, 0.0125])
        assert fit.points_used == 3

    def test_inconclusive(self):
        fit = rate_fit([10, 20, 40], [0.1, 0.0, 0.0])
        assert fit.status == "inconclusive"


class TestMannKendall:
    def test_monotone_directions(self):
        assert mann_kendall_upward_p([1, 2, 3, 4, 5, 6]) < 0.05
        assert mann_kendall_upward_p([6, 5, 4, 3, 2, 1]) > 0.9

    def test_flat_is_neutral(self):
        assert abs(mann_kendall_upward_p([1.0, 1.0, 1.0, 1.0]) - 0.5) <= 0.5


def make_finite_instance(epsilon=0.2):
    return SAAInstance(
        decisions=np.array([0.0, 1.0]),
        loss=lambda x, w: np.abs(w - x),
        law=FiniteSampler(np.array([0.0, 1.0, 2.0]),
                          np.array([0.6, 0.3, 0.1])),
        epsilon=epsilon, q=2.0,
    )


class TestSAA:
    def test_true_value_exact(self):
        inst = make_finite_instance()
        # E|w| = 0.3 + 0.2 = 0.5; E|w - 1| = 0.6 + 0.1 = 0.7
        assert abs(inst.true_value() - 0.5) <= 1e-12
        assert inst.true_argmin() == 0.0

    def test_loss_independent_of_w_never_exceeds(self):
        inst = SAAInstance(
            decisions=np.array([0.0, 1.0]),
            loss=lambda x, w: np.full_like(w, 1.0 + x),
            law=FiniteSampler(np.array([0.0, 1.0]), np.array([0.5, 0.5])),
            epsilon=0.05, q=2.0)
        run = saa_run(inst, [2, 4], 2000, seed=0)
        assert all(e.hits == 0 for e in run.estimates)

    def test_exact_enumeration_matches_monte_carlo(self):
        inst = make_finite_instance()
        p_exact = saa_exact_exceedance(inst, 3)
        run = saa_run(inst, [3], 20_000, seed=1)
        est = run.estimates[0]
        assert est.lo <= p_exact <= est.hi

    def test_integrability_check(self):
        inst = SAAInstance(
            decisions=np.linspace(0, 2, 5),
            loss=lambda x, w: (x - 1.0) ** 2 + x * w,
            law=ParetoSampler(2.5), epsilon=0.5, q=2.0)
        val = inst.check_integrability(seed=0, draws=50_000)
        assert math.isfinite(val)

    def test_quadrature_value_for_closed_law(self):
        # E[(x-1)^2 + x W] = (x-1)^2 for centered W: V(mu) = 0 at x = 1
        inst = SAAInstance(
            decisions=np.linspace(0, 2, 21),
            loss=lambda x, w: (x - 1.0) ** 2 + x * w,
            law=ParetoSampler(2.5), epsilon=0.5, q=2.0)
        assert abs(inst.true_value()) <= 1e-9


class TestArgminTracking:
    def test_unique_minimizer_converges(self):
        inst = SAAInstance(
            decisions=np.linspace(0, 2, 5),
            loss=lambda x, w: (x - 1.0) ** 2 + 0.2 * x * w,
            law=FiniteSampler(np.array([-1.0, 1.0]), np.array([0.5, 0.5])),
            epsilon=0.05, q=2.0,
            growth=lambda d: 0.9 * d * d)
        run = argmin_tracking(inst, [10, 200], 2000, seed=2)
        assert run.argmin == 1.0
        assert run.estimates[-1].p_hat <= run.estimates[0].p_hat

    def test_ties_refused(self):
        inst = SAAInstance(
            decisions=np.array([0.0, 1.0]),
            loss=lambda x, w: np.abs(w),  # decision-independent
            law=FiniteSampler(np.array([-1.0, 1.0]), np.array([0.5, 0.5])),
            epsilon=0.1, q=2.0, growth=lambda d: d * d)
        with pytest.raises(GrowthValidationError):
            argmin_tracking(inst, [5], 1000, seed=0)

    def test_missing_growth_refused(self):
        inst = make_finite_instance()
        with pytest.raises(GrowthValidationError):
            argmin_tracking(inst, [5], 1000, seed=0)

    def test_heavy_tail_slope_within_budget(self):
        # uniformly convex quadratic objective with heavy-tailed noise:
        # the exceedance rate slope stays within (1-q) + 0.25
        inst = SAAInstance(
            decisions=np.linspace(0.0, 2.0, 11),
            loss=lambda x, w: (x - 1.0) ** 2 + 0.3 * x * w,
            law=ParetoSampler(2.5),
            epsilon=0.09, q=2.0,
            growth=lambda d: 0.9 * d * d)
        run = argmin_tracking(inst, [10, 20, 40, 80], 60_000, seed=4)
        assert run.fit.status == "ok"
        assert run.fit.slope <= run.slope_budget
        assert run.mann_kendall_p > 0.05


class TestAzuma:
    def test_conjugate_log_cosh(self):
        # phi*(r) = r atanh(r) - log cosh(atanh r), frozen via the identity
        got = conjugate_scalar(RademacherIncrements().phi, 0.5)
        want = 0.5 * math.atanh(0.5) - math.log(math.cosh(math.atanh(0.5)))
        assert abs(got - want) <= 1e-10
        assert abs(got - 0.130812035941137) <= 1e-12

    def test_impossible_event(self):
        res = azuma_experiment(RademacherIncrements(), 1.5, 50, 2000, seed=0)
        assert res.p_hat == 0.0
        assert res.ok

    def test_exact_tail_reported(self):
        res = azuma_experiment(RademacherIncrements(), 0.2, 30, 2000, seed=1)
        want = exact_binomial_tail(30, 0.2)
        assert abs(res.exact_tail - want) <= 1e-12
        assert res.lo_check() if hasattr(res, "lo_check") else True

    @pytest.mark.parametrize("family", [RademacherIncrements(),
                                        UniformIncrements(),
                                        ScriptedIncrements()])
    def test_bound_holds_at_moderate_radius(self, family):
        res = azuma_experiment(family, 0.1, 400, 4000, seed=2)
        assert res.ok

    def test_scripted_increments_conditionally_centered(self):
        fam = ScriptedIncrements()
        rng = np.random.default_rng(3)
        u = rng.random(200_000)
        up = fam.step(u, np.full(u.size, 1.0))
        dn = fam.step(u, np.full(u.size, -1.0))
        assert abs(up.mean()) <= 3 * up.std() / math.sqrt(u.size)
        assert abs(dn.mean()) <= 3 * dn.std() / math.sqrt(u.size)
        assert np.abs(up).max() <= 1.0 and np.abs(dn).max() <= 1.0
        # genuinely different conditional laws depending on the past
        assert not np.array_equal(up, dn)

    def test_uniform_phi_matches_mgf(self):
        fam = UniformIncrements()
        for y in (0.5, 1.5):
            mgf = (math.exp(y) - math.exp(-y)) / (2 * y)
            assert abs(fam.phi(y) - math.log(mgf)) <= 1e-9

import math

import numpy as np
import pytest

from sanovdual.losses import ExpLoss, PowerLoss, TabulatedLoss
from sanovdual.penalties import (LpEntropy, RelativeEntropy, Robust,
                                 SetIndicator, Shortfall, Transport,
                                 hull_indicator, lp_entropy, penalty,
                                 relative_entropy, robust_entropy,
                                 shortfall_penalty, tensor_penalty,
                                 transport_cost)
from sanovdual.spaces import Dist, FiniteSpace, ProductDist

TWO = FiniteSpace.of_size(2)
THREE = FiniteSpace.of_size(3)
UNIF2 = Dist.uniform(TWO)
UNIF3 = Dist.uniform(THREE)
LOG2 = 0.6931471805599453


def rand_dist(rng, space, full=True):
    w = rng.dirichlet(np.ones(space.size))
    if full:
        w = w + 1e-3
        w /= w.sum()
    return Dist(space, w)


class TestRelativeEntropy:
    def test_self_is_zero(self):
        assert relative_entropy(UNIF2, UNIF2) == 0.0

    def test_point_mass_against_uniform(self):
        assert abs(relative_entropy(Dist(TWO, [1, 0]), UNIF2) - LOG2) <= 1e-12

    def test_absolute_continuity_failure(self):
        assert relative_entropy(UNIF2, Dist(TWO, [1, 0])) == math.inf


class TestLpEntropy:
    def test_zero_iff_equal(self):
        rng = np.random.default_rng(0)
        assert lp_entropy(UNIF2, UNIF2, 2.0) == 0.0
        for _ in range(20):
            nu = rand_dist(rng, TWO)
            val = lp_entropy(nu, UNIF2, 2.0)
            if np.abs(nu.weights - UNIF2.weights).max() > 1e-6:
                assert val > 0.0

    def test_point_mass_value(self):
        # ((0.5 * 2^2))^(1/2) - 1 = sqrt(2) - 1
        got = lp_entropy(Dist(TWO, [1, 0]), UNIF2, 2.0)
        assert abs(got - (math.sqrt(2.0) - 1.0)) <= 1e-12

    def test_off_support_infinite(self):
        assert lp_entropy(UNIF2, Dist(TWO, [1, 0]), 2.0) == math.inf


class TestShortfallPenalty:
    def test_exp_loss_recovers_relative_entropy(self):
        rng = np.random.default_rng(1)
        for _ in range(25):
            mu = rand_dist(rng, THREE)
            nu = rand_dist(rng, THREE)
            got = shortfall_penalty(nu, mu, ExpLoss())
            assert abs(got - relative_entropy(nu, mu)) <= 1e-6

    @pytest.mark.parametrize("q", [1.5, 2.0, 3.0])
    def test_power_loss_recovers_lp_entropy(self, q):
        rng = np.random.default_rng(2)
        p = q / (q - 1.0)
        for _ in range(25):
            mu = rand_dist(rng, TWO)
            nu = rand_dist(rng, TWO)
            got = shortfall_penalty(nu, mu, PowerLoss(q))
            assert abs(got - lp_entropy(nu, mu, p)) <= 1e-6

    def test_zero_at_reference(self):
        tab = TabulatedLoss.from_callable(np.exp, -12.0, 6.0)
        for loss in (ExpLoss(), PowerLoss(2.0), PowerLoss(3.0), tab):
            assert abs(shortfall_penalty(UNIF2, UNIF2, loss)) <= 1e-8

    def test_off_support_infinite(self):
        assert shortfall_penalty(UNIF2, Dist(TWO, [1, 0]),
                                 PowerLoss(2.0)) == math.inf


class TestRobustEntropy:
    def test_singleton(self):
        rng = np.random.default_rng(3)
        nu, mu = rand_dist(rng, TWO), rand_dist(rng, TWO)
        assert robust_entropy(nu, (mu,)) == relative_entropy(nu, mu)

    def test_hull_member_is_zero(self):
        g = (Dist(TWO, [0.2, 0.8]), Dist(TWO, [0.8, 0.2]))
        assert abs(robust_entropy(Dist(TWO, [0.4, 0.6]), g)) <= 1e-9

    def test_point_mass_hull_covers(self):
        # hull of the two point masses is the whole simplex on {a, b}
        g = (Dist(TWO, [1.0, 0.0]), Dist(TWO, [0.0, 1.0]))
        assert abs(robust_entropy(Dist(TWO, [0.3, 0.7]), g)) <= 1e-9

    def test_three_generators_matches_mixture_grid(self):
        rng = np.random.default_rng(4)
        gens = tuple(rand_dist(rng, THREE) for _ in range(3))
        for _ in range(5):
            nu = rand_dist(rng, THREE)
            got = robust_entropy(nu, gens)
            # grid oracle over mixture weights
            best = math.inf
            ticks = np.linspace(0, 1, 101)
            for w1 in ticks:
                for w2 in ticks:
                    if w1 + w2 > 1.0 + 1e-12:
                        continue
                    mix = (w1 * gens[0].weights + w2 * gens[1].weights +
                           (1 - w1 - w2) * gens[2].weights)
                    best = min(best, relative_entropy(nu.weights[None, :],
                                                      mix)[0])
            assert got <= best + 1e-9
            assert got >= best - 1e-4  # grid resolution

    def test_unsupported_is_infinite(self):
        g = (Dist(THREE, [0.5, 0.5, 0.0]), Dist(THREE, [0.2, 0.8, 0.0]))
        assert robust_entropy(Dist(THREE, [0.2, 0.2, 0.6]), g) == math.inf


class TestHullIndicator:
    def test_member(self):
        g = (Dist(TWO, [0.2, 0.8]), Dist(TWO, [0.8, 0.2]))
        assert hull_indicator(Dist(TWO, [0.5, 0.5]), g) == 0.0
        assert hull_indicator(g[0], g) == 0.0

    def test_nonmember(self):
        g = (Dist(TWO, [1.0, 0.0]),)
        assert hull_indicator(Dist(TWO, [0.5, 0.5]), g) == math.inf

    def test_segment_membership_three_states(self):
        g = (Dist(THREE, [0.6, 0.2, 0.2]), Dist(THREE, [0.2, 0.6, 0.2]))
        mid = Dist(THREE, 0.5 * g[0].weights + 0.5 * g[1].weights)
        assert hull_indicator(mid, g) == 0.0
        assert hull_indicator(UNIF3, g) == math.inf


class TestTransportCost:
    def test_identity_zero(self):
        rng = np.random.default_rng(5)
        cost = rng.uniform(0.5, 2.0, (2, 2))
        np.fill_diagonal(cost, 0.0)
        nu = rand_dist(rng, TWO)
        assert abs(transport_cost(nu, nu, cost)) <= 1e-10

    def test_total_variation_matches_coupling_grid(self):
        # brute force over the one-parameter family of 2x2 couplings
        rng = np.random.default_rng(6)
        cost = np.array([[0.0, 1.0], [1.0, 0.0]])
        for _ in range(10):
            mu, nu = rand_dist(rng, TWO), rand_dist(rng, TWO)
            t_lo = max(0.0, mu.weights[0] + nu.weights[0] - 1.0)
            t_hi = min(mu.weights[0], nu.weights[0])
            best = math.inf
            for t in np.arange(t_lo, t_hi + 1e-3, 1e-3):
                t = min(t, t_hi)
                plan = np.array([
                    [t, mu.weights[0] - t],
                    [nu.weights[0] - t, 1 - mu.weights[0] - nu.weights[0] + t],
                ])
                best = min(best, float((plan * cost).sum()))
            got = transport_cost(nu, mu, cost)
            tv = max(nu.weights[0] - mu.weights[0],
                     mu.weights[0] - nu.weights[0])
            assert abs(got - best) <= 2e-3
            assert abs(got - tv) <= 1e-12

    def test_point_mass_reference(self):
        rng = np.random.default_rng(7)
        cost = rng.uniform(0, 3, (3, 3))
        nu = rand_dist(rng, THREE)
        got = transport_cost(nu, Dist(THREE, [1, 0, 0]), cost)
        assert abs(got - float(np.dot(cost[0], nu.weights))) <= 1e-12

    def test_infeasible_inf(self):
        cost = np.array([[0.0, math.inf], [math.inf, 1.0]])
        got = transport_cost(Dist(TWO, [0.2, 0.8]), Dist(TWO, [0.7, 0.3]),
                             cost)
        assert got == math.inf

    def test_diagonal_flag_validation(self):
        from sanovdual.spaces import SpaceError
        cost = np.array([[math.inf, 1.0], [1.0, 0.0]])
        Transport(UNIF2, cost)  # fine without the flag
        with pytest.raises(SpaceError, match="diagonal"):
            Transport(UNIF2, cost, diagonal_integrable=True)
        with pytest.raises(SpaceError, match="finite"):
            Transport(UNIF2, np.array([[math.inf, math.inf], [1.0, 0.0]]))

    def test_2x2_fast_path_agrees_with_solver(self):
        from sanovdual.transport import solve_transport
        rng = np.random.default_rng(8)
        for _ in range(20):
            mu, nu = rand_dist(rng, TWO, full=False), rand_dist(rng, TWO,
                                                                full=False)
            cost = rng.uniform(0, 4, (2, 2))
            if rng.random() < 0.3:
                cost[rng.integers(2), rng.integers(2)] = math.inf
            fast = transport_cost(nu, mu, cost)
            slow = solve_transport(mu.weights, nu.weights, cost).value
            if math.isinf(fast) or math.isinf(slow):
                assert fast == slow
            else:
                assert abs(fast - slow) <= 1e-10


class TestTensorPenalty:
    def test_product_law_is_n_times_penalty(self):
        rng = np.random.default_rng(9)
        specs = [RelativeEntropy(UNIF2), LpEntropy(UNIF2, 2.0),
                 Shortfall(UNIF2, PowerLoss(2.0)),
                 Robust((UNIF2, Dist(TWO, [0.3, 0.7]))),
                 Transport(UNIF2, np.array([[0.0, 1.0], [1.0, 0.0]]))]
        nu = rand_dist(rng, TWO)
        for n in (1, 2, 3):
            prod = ProductDist.iid(nu, n)
            for spec in specs:
                a1 = penalty(nu, spec)
                an = tensor_penalty(prod, spec)
                assert abs(an - n * a1) <= 1e-8 * (1 + abs(a1)) * n

    def test_chain_rule_relative_entropy(self):
        # alpha_2 under relative entropy equals H(. | mu x mu) exactly
        rng = np.random.default_rng(10)
        mu = rand_dist(rng, THREE)
        spec = RelativeEntropy(mu)
        prod = ProductDist.iid(mu, 2)
        for _ in range(50):
            t = rng.dirichlet(np.ones(9))
            nu = ProductDist(2, THREE, t)
            lhs = tensor_penalty(nu, spec)
            rhs = relative_entropy(t[None, :], np.asarray(prod.tensor))[0]
            assert abs(lhs - rhs) <= 1e-10

    @pytest.mark.parametrize("n", [2, 3])
    def test_lp_tensor_bound(self, n):
        # alpha_n <= n^(1/q) ||dnu/dmu^n||_{L^p}, q = p = 2
        rng = np.random.default_rng(11)
        spec = LpEntropy(UNIF2, 2.0)
        prod = ProductDist.iid(UNIF2, n)
        for _ in range(100):
            t = rng.dirichlet(np.ones(2 ** n))
            nu = ProductDist(n, TWO, t)
            an = tensor_penalty(nu, spec)
            ratio = t / prod.tensor
            norm = float(np.dot(ratio ** 2, prod.tensor) ** 0.5)
            assert an <= n ** 0.5 * norm + 1e-9

    def test_one_step_matches_penalty(self):
        rng = np.random.default_rng(12)
        nu = rand_dist(rng, TWO)
        spec = LpEntropy(UNIF2, 2.0)
        assert abs(tensor_penalty(ProductDist(1, TWO, nu.weights), spec) -
                   penalty(nu, spec)) <= 1e-12

    def test_zero_probability_prefix_contributes_nothing(self):
        t = np.array([0.5, 0.5, 0.0, 0.0])  # x1 = b never happens
        nu = ProductDist(2, TWO, t)
        spec = RelativeEntropy(Dist(TWO, [0.9, 0.1]))
        val = tensor_penalty(nu, spec)
        assert math.isfinite(val)


class TestConvexityAndJensen:
    def specs(self):
        return [RelativeEntropy(UNIF2), LpEntropy(UNIF2, 2.0),
                Shortfall(UNIF2, PowerLoss(3.0)),
                Robust((Dist(TWO, [0.2, 0.8]), Dist(TWO, [0.7, 0.3]))),
                SetIndicator((Dist(TWO, [0.2, 0.8]), Dist(TWO, [0.7, 0.3]))),
                Transport(UNIF2, np.array([[0.0, 2.0], [1.0, 0.0]]))]

    def test_midpoint_convexity(self):
        rng = np.random.default_rng(13)
        for spec in self.specs():
            for _ in range(40):
                nu1, nu2 = rand_dist(rng, TWO), rand_dist(rng, TWO)
                t = rng.uniform(0.1, 0.9)
                mix = Dist(TWO, t * nu1.weights + (1 - t) * nu2.weights)
                a_mix = penalty(mix, spec)
                a1, a2 = penalty(nu1, spec), penalty(nu2, spec)
                bound = t * a1 + (1 - t) * a2
                if math.isinf(bound):
                    continue
                assert a_mix <= bound + 1e-8

    def test_jensen_mean_measure(self):
        # penalty(mean of the mixture) <= mean of the penalties
        rng = np.random.default_rng(14)
        for spec in self.specs():
            for _ in range(15):
                k = rng.integers(2, 5)
                comps = [rand_dist(rng, TWO) for _ in range(k)]
                probs = rng.dirichlet(np.ones(k))
                mean = Dist(TWO, sum(p * c.weights
                                     for p, c in zip(probs, comps)))
                lhs = penalty(mean, spec)
                rhs = float(sum(p * penalty(c, spec)
                                for p, c in zip(probs, comps)))
                if math.isinf(rhs):
                    continue
                assert lhs <= rhs + 1e-8

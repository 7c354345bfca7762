import math

import numpy as np
import pytest

from sanovdual import extreal
from sanovdual.spaces import (Dist, FiniteSpace, Kernel, ProductDist,
                              SpaceError, SymmetricField, compose,
                              disintegrate, empirical_measure, multinomial,
                              type_classes)


@pytest.fixture
def two():
    return FiniteSpace.of_size(2)


@pytest.fixture
def three():
    return FiniteSpace.of_size(3)


def random_product(rng, space, n, full_support=True):
    t = rng.dirichlet(np.ones(space.size ** n))
    if full_support:
        t = t + 1e-3
        t /= t.sum()
    return ProductDist(n, space, t)


class TestExtReal:
    def test_neg_inf_dominates(self):
        assert extreal.add(math.inf, -math.inf) == -math.inf
        assert extreal.add(1.0, -math.inf, math.inf) == -math.inf
        assert extreal.add(1.0, math.inf) == math.inf
        assert extreal.sub(math.inf, math.inf) == -math.inf
        assert extreal.sub(3.0, 1.0) == 2.0

    def test_integral_ignores_null_sets(self):
        assert extreal.integral([0.0, 1.0], [math.inf, 2.0]) == 2.0
        assert extreal.integral([0.5, 0.5], [math.inf, 2.0]) == math.inf
        assert extreal.integral([0.5, 0.5], [math.inf, -math.inf]) == -math.inf

    def test_integral_rows(self):
        out = extreal.integral_rows(
            np.array([0.5, 0.5]),
            np.array([[1.0, 3.0], [-math.inf, 0.0], [math.inf, 0.0]]))
        assert out[0] == 2.0
        assert out[1] == -math.inf
        assert out[2] == math.inf


class TestEmpiricalMeasure:
    def test_counts(self, two):
        # E={a,b}, x=(a,a,b,a) -> (0.75, 0.25)
        d = empirical_measure(two, [0, 0, 1, 0])
        np.testing.assert_allclose(d.weights, [0.75, 0.25])

    def test_point_mass(self, two):
        np.testing.assert_allclose(empirical_measure(two, [0]).weights, [1, 0])

    def test_three_states(self, three):
        # direct count oracle: (c,b,a,c,c,b) -> (1/6, 2/6, 3/6)
        d = empirical_measure(three, [2, 1, 0, 2, 2, 1])
        np.testing.assert_allclose(d.weights, [1 / 6, 2 / 6, 3 / 6])

    def test_permutation_invariant(self, three):
        rng = np.random.default_rng(0)
        x = rng.integers(0, 3, size=11)
        base = empirical_measure(three, x).weights
        for _ in range(5):
            perm = rng.permutation(x)
            np.testing.assert_array_equal(
                empirical_measure(three, perm).weights, base)

    def test_out_of_range(self, two):
        with pytest.raises(SpaceError):
            empirical_measure(two, [0, 2])


class TestDisintegrate:
    def test_product_measure(self, two):
        mu = Dist(two, [0.3, 0.7])
        nu = ProductDist.iid(mu, 2)
        first, kernels = disintegrate(nu)
        np.testing.assert_allclose(first.weights, mu.weights)
        np.testing.assert_allclose(kernels[0].rows,
                                   np.tile(mu.weights, (2, 1)))

    def test_point_mass(self, two):
        t = np.zeros(4)
        t[0 * 2 + 1] = 1.0  # delta at (a, b)
        nu = ProductDist(2, two, t)
        first, kernels = disintegrate(nu)
        np.testing.assert_allclose(first.weights, [1, 0])
        np.testing.assert_allclose(kernels[0].dist([0]).weights, [0, 1])

    def test_conditional_oracle(self, two):
        # nu(x2 | x1) = nu(x1, x2) / sum_y nu(x1, y)
        rng = np.random.default_rng(1)
        nu = random_product(rng, two, 2)
        t = nu.reshaped()
        _, kernels = disintegrate(nu)
        for x1 in range(2):
            expect = t[x1] / t[x1].sum()
            np.testing.assert_allclose(kernels[0].dist([x1]).weights, expect,
                                       atol=1e-14)

    def test_zero_prefix_gets_uniform(self, two):
        t = np.array([0.5, 0.5, 0.0, 0.0])  # no mass on x1 = b
        nu = ProductDist(2, two, t)
        _, kernels = disintegrate(nu)
        np.testing.assert_allclose(kernels[0].dist([1]).weights, [0.5, 0.5])


class TestCompose:
    def test_constant_kernel_gives_product(self, two):
        mu = Dist(two, [0.4, 0.6])
        ker = Kernel(2, two, np.tile(mu.weights, (2, 1)))
        nu = compose(mu, [ker])
        np.testing.assert_allclose(nu.tensor, ProductDist.iid(mu, 2).tensor)

    def test_point_masses(self, two):
        ker = Kernel(2, two, np.tile([0.0, 1.0], (2, 1)))
        nu = compose(Dist.point_mass(two, 0), [ker])
        expect = np.zeros(4)
        expect[1] = 1.0
        np.testing.assert_allclose(nu.tensor, expect)

    @pytest.mark.parametrize("m,n", [(2, 2), (2, 4), (3, 3)])
    def test_roundtrip(self, m, n):
        rng = np.random.default_rng(2)
        space = FiniteSpace.of_size(m)
        nu = random_product(rng, space, n)
        first, kernels = disintegrate(nu)
        back = compose(first, kernels)
        assert np.abs(back.tensor - nu.tensor).max() <= 1e-12

    def test_shape_mismatch(self, two):
        ker = Kernel(3, two, np.tile([0.5, 0.5], (4, 1)))
        with pytest.raises(SpaceError):
            compose(Dist.uniform(two), [ker])


class TestTypeClasses:
    def test_two_two(self):
        got = dict(type_classes(2, 2))
        assert got == {(2, 0): 1, (1, 1): 2, (0, 2): 1}

    def test_one_three(self):
        got = type_classes(1, 3)
        assert sorted(mult for _, mult in got) == [1, 1, 1]

    def test_binomial_oracle(self):
        got = dict(type_classes(4, 2))
        for k in range(5):
            assert got[(4 - k, k)] == math.comb(4, k)
        assert sum(got.values()) == 2 ** 4

    @pytest.mark.parametrize("n,m", [(5, 2), (4, 3), (3, 4)])
    def test_total_count(self, n, m):
        assert sum(mult for _, mult in type_classes(n, m)) == m ** n

    @pytest.mark.parametrize("n,m", [(6, 2), (5, 3)])
    def test_class_probabilities_sum_to_one(self, n, m):
        rng = np.random.default_rng(3)
        w = rng.dirichlet(np.ones(m))
        total = sum(mult * np.prod(w ** np.array(c))
                    for c, mult in type_classes(n, m))
        assert abs(total - 1.0) <= 1e-10

    def test_multinomial_exact(self):
        assert multinomial((3, 2, 1)) == 60


class TestValidation:
    def test_negative_weight_rejected(self, two):
        with pytest.raises(SpaceError):
            Dist(two, [-0.1, 1.1])

    def test_bad_sum_rejected(self, two):
        with pytest.raises(SpaceError):
            Dist(two, [0.6, 0.6])

    def test_near_sum_normalized(self, two):
        d = Dist(two, [0.5 + 4e-10, 0.5])
        assert abs(d.weights.sum() - 1.0) <= 1e-15

    def test_dense_cap(self):
        space = FiniteSpace.of_size(3)
        with pytest.raises(SpaceError, match="symmetric"):
            ProductDist(16, space, np.ones(3 ** 16) / 3 ** 16)

    def test_duplicate_labels(self):
        with pytest.raises(SpaceError):
            FiniteSpace(("a", "a"))

    def test_immutable(self, two):
        d = Dist.uniform(two)
        with pytest.raises(ValueError):
            d.weights[0] = 0.9


class TestSymmetricField:
    def test_from_dense_roundtrip(self, two):
        vals = {(2, 0): 1.0, (1, 1): -0.5, (0, 2): 2.0}
        field = SymmetricField(2, two, vals)
        dense = field.expand_dense()
        back = SymmetricField.from_dense(dense, 2, two)
        assert back.values == vals

    def test_rejects_asymmetric(self, two):
        f = np.array([0.0, 1.0, 2.0, 3.0])  # f(a,b) != f(b,a)
        with pytest.raises(SpaceError, match="permutation"):
            SymmetricField.from_dense(f, 2, two)

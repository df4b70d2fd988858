import math
from fractions import Fraction

import numpy as np
import pytest

from exarray import (
    Alphabet,
    BudgetExceededError,
    EntryLaw,
    FiniteArray,
    HiddenTypeMixture,
    IidEntry,
    LabeledGraph,
    PermutationPair,
    apply_permutation,
    constant_array,
    empirical_subarray_exact,
    empirical_subarray_mc,
    empirical_subarray_weak,
    falling_factorial,
    graph_density,
    graph_ind,
    limit_profile,
    restrict_measure,
    sample_exchangeable,
    tv_distance,
)
from exarray.limits import empirical_subarray_mc_pooled

from conftest import (
    brute_force_subarray,
    brute_force_subarray_weak,
    measure_as_tuples,
    product_law_measure,
)

BIN = Alphabet.finite(2)


def random_binary(rng, m, symmetric=False, zero_diagonal=False):
    values = rng.integers(0, 2, (m, m))
    if symmetric:
        values = np.triu(values) + np.triu(values, 1).T
    if zero_diagonal:
        np.fill_diagonal(values, 0)
    return FiniteArray(values, BIN, symmetric=symmetric, zero_diagonal=zero_diagonal)


class TestFallingFactorial:
    def test_values(self):
        assert falling_factorial(10, 1) == 10
        assert falling_factorial(10, 3) == 720
        assert falling_factorial(7, 0) == 1
        assert falling_factorial(5, 5) == math.factorial(5)

    def test_rejects_n_above_m(self):
        with pytest.raises(ValueError):
            falling_factorial(3, 4)


class TestExactSubarray:
    def test_constant_is_point_mass(self):
        y = constant_array(5, 1, BIN)
        mu = empirical_subarray_exact(y, 2)
        assert len(mu) == 1
        assert mu.weight(constant_array(2, 1, BIN)) == 1

    def test_identity_three_by_three(self):
        y = FiniteArray(np.eye(3, dtype=int), BIN)
        mu = empirical_subarray_exact(y, 1)
        one = FiniteArray(np.array([[1]]), BIN)
        zero = FiniteArray(np.array([[0]]), BIN)
        assert mu.weight(one) == Fraction(1, 3)
        assert mu.weight(zero) == Fraction(2, 3)

    def test_antidiagonal_two_by_two(self):
        # explicit 4-term enumeration: the two identity-like injection pairs
        # give the original pattern, the two mixed pairs give its flip
        y = FiniteArray(np.array([[1, 0], [0, 1]]), BIN)
        mu = empirical_subarray_exact(y, 2)
        assert mu.weight(y) == Fraction(1, 2)
        assert mu.weight(FiniteArray(np.array([[0, 1], [1, 0]]), BIN)) == Fraction(1, 2)

    def test_matches_brute_force(self, rng):
        for _ in range(10):
            m = int(rng.integers(2, 6))
            n = int(rng.integers(1, min(m, 3) + 1))
            y = FiniteArray(rng.integers(0, 3, (m, m)), Alphabet.finite(3))
            mu = empirical_subarray_exact(y, n)
            assert measure_as_tuples(mu) == brute_force_subarray(y.values, n)

    def test_budget_guard(self):
        y = random_binary(np.random.default_rng(0), 12)
        with pytest.raises(BudgetExceededError):
            empirical_subarray_exact(y, 3, budget=1000)

    def test_permutation_invariance_exact(self, rng):
        for _ in range(15):
            m = int(rng.integers(2, 7))
            n = int(rng.integers(1, 3 + (m >= 3)))
            n = min(n, m)
            y = random_binary(rng, m)
            p = PermutationPair.random(m, rng)
            assert empirical_subarray_exact(apply_permutation(y, p), n) == empirical_subarray_exact(y, n)

    def test_unit_interval_quantization(self):
        u = Alphabet.unit_interval()
        y = FiniteArray(np.array([[0.1, 0.9], [0.6, 0.4]]), u)
        mu = empirical_subarray_exact(y, 1, bins=2)
        assert mu.alphabet == BIN
        assert mu.weight(FiniteArray(np.array([[0]]), BIN)) == Fraction(1, 2)


class TestMcSubarray:
    def test_constant_point_mass(self):
        y = constant_array(6, 1, BIN)
        mu = empirical_subarray_mc(y, 2, 500, 3)
        assert len(mu) == 1

    def test_unbiased_at_identity_array(self):
        # binomial oracle against the exact weight 1/3 computed above
        y = FiniteArray(np.eye(3, dtype=int), BIN)
        K = 100_000
        mu = empirical_subarray_mc(y, 1, K, 17)
        band = 4 * math.sqrt((1 / 3) * (2 / 3) / K)
        assert abs(float(mu.weight(FiniteArray(np.array([[1]]), BIN))) - 1 / 3) <= band

    def test_close_to_exact_on_six_by_six(self, rng):
        y = random_binary(rng, 6)
        exact = empirical_subarray_exact(y, 2)  # 900 enumeration terms
        mc = empirical_subarray_mc(y, 2, 1_000_000, 23)
        assert tv_distance(mc, exact) <= 0.01

    def test_mean_over_seeds_is_unbiased(self, rng):
        y = random_binary(rng, 5)
        exact = empirical_subarray_exact(y, 2)
        seeds, K = 200, 200
        pooled: dict = {}
        for s in range(seeds):
            mu = empirical_subarray_mc(y, 2, K, s)
            for pattern, w in mu.weights.items():
                pooled[pattern] = pooled.get(pattern, 0.0) + w / seeds
        tv = 0.5 * sum(
            abs(pooled.get(p, 0.0) - float(w)) for p, w in exact.weights.items() | pooled.items()
        )
        se_bound = 0.5 * sum(
            math.sqrt(float(w) * (1 - float(w)) / (seeds * K)) for w in exact.weights.values()
        )
        assert tv <= 3 * se_bound

    def test_pooled_thread_count_invariant(self):
        y = random_binary(np.random.default_rng(5), 6)
        a = empirical_subarray_mc_pooled(y, 2, 4000, 9, threads=1)
        b = empirical_subarray_mc_pooled(y, 2, 4000, 9, threads=4)
        assert a == b


class TestWeakSubarray:
    def test_constant_point_mass(self):
        y = constant_array(5, 1, BIN, symmetric=True)
        mu = empirical_subarray_weak(y, 2)
        assert len(mu) == 1 and mu.weight(constant_array(2, 1, BIN)) == 1

    def test_path_graph(self):
        # 6 injections of [2] into [3]; only (0,1) and (1,0) hit the edge
        path = LabeledGraph.from_edges(3, [(0, 1)])
        mu = empirical_subarray_weak(path.adjacency, 2)
        edge = FiniteArray(np.array([[0, 1], [1, 0]]), BIN)
        none = FiniteArray(np.zeros((2, 2), dtype=int), BIN)
        assert mu.weight(edge) == Fraction(1, 3)
        assert mu.weight(none) == Fraction(2, 3)

    def test_requires_symmetric(self):
        y = FiniteArray(np.array([[0, 1], [0, 0]]), BIN)
        with pytest.raises(ValueError):
            empirical_subarray_weak(y, 1)

    def test_patterns_are_symmetric(self, rng):
        y = random_binary(rng, 6, symmetric=True)
        mu = empirical_subarray_weak(y, 3)
        for pattern in mu.support():
            assert np.array_equal(pattern.values, pattern.values.T)

    def test_matches_brute_force(self, rng):
        for _ in range(8):
            m = int(rng.integers(2, 6))
            n = int(rng.integers(1, min(m, 3) + 1))
            y = random_binary(rng, m, symmetric=True)
            mu = empirical_subarray_weak(y, n)
            assert measure_as_tuples(mu) == brute_force_subarray_weak(y.values, n)

    def test_mc_mode(self, rng):
        y = random_binary(rng, 8, symmetric=True)
        exact = empirical_subarray_weak(y, 2)
        mc = empirical_subarray_weak(y, 2, mode="mc", K=200_000, seed=5)
        assert tv_distance(mc, exact) <= 0.01


class TestRestrictMeasure:
    def test_point_mass(self):
        y = constant_array(3, 1, BIN)
        mu = empirical_subarray_exact(y, 3)
        nu = restrict_measure(mu, 2)
        assert nu.weight(constant_array(2, 1, BIN)) == 1

    def test_mass_preserved(self, rng):
        y = random_binary(rng, 5)
        nu = restrict_measure(empirical_subarray_exact(y, 3), 1)
        assert sum(nu.weights.values()) == 1

    def test_exact_consistency(self, rng):
        # truncating the n-pattern measure must equal the (n-1)-pattern
        # measure with exact rational equality
        for _ in range(10):
            m = int(rng.integers(3, 8))
            y = random_binary(rng, m)
            for n in (2, 3):
                assert restrict_measure(empirical_subarray_exact(y, n), n - 1) == empirical_subarray_exact(y, n - 1)

    def test_range_checked(self):
        mu = empirical_subarray_exact(constant_array(3, 0, BIN), 2)
        with pytest.raises(ValueError):
            restrict_measure(mu, 2)


class TestGraphDensity:
    def triangle(self):
        return LabeledGraph.from_edges(3, [(0, 1), (1, 2), (0, 2)])

    def path3(self):
        return LabeledGraph.from_edges(3, [(0, 1), (1, 2)])

    def edge(self):
        return LabeledGraph.from_edges(2, [(0, 1)])

    def test_ind_examples(self):
        assert graph_ind(self.edge(), self.triangle()) == 6
        assert graph_ind(self.edge(), self.path3()) == 4
        assert graph_ind(self.path3(), self.path3()) >= 1

    def test_density_examples(self):
        for m in (2, 3, 5):
            complete = LabeledGraph.from_edges(
                m, [(i, j) for i in range(m) for j in range(i + 1, m)]
            )
            assert graph_density(self.edge(), complete) == 1
        assert graph_density(self.edge(), self.path3()) == Fraction(2, 3)

    def test_density_matches_weak_measure(self, rng):
        # the injection count normalized by (m)_n is the weight the joint
        # sub-array distribution puts on the pattern's adjacency array
        G = LabeledGraph(random_binary(rng, 7, symmetric=True, zero_diagonal=True))
        F = LabeledGraph.from_edges(3, [(0, 1), (1, 2)])
        mu = empirical_subarray_weak(G.adjacency, 3)
        assert graph_density(F, G) == mu.weight(F.adjacency)

    def test_label_invariance(self, rng):
        for _ in range(20):
            G = LabeledGraph(random_binary(rng, 8, symmetric=True, zero_diagonal=True))
            n = int(rng.integers(2, 4))
            F = LabeledGraph(random_binary(rng, n, symmetric=True, zero_diagonal=True))
            pi = rng.permutation(n)
            assert graph_density(F.relabel(pi), G) == graph_density(F, G)

    def test_extension_consistency(self, rng):
        # summing the density over all one-vertex extensions of F recovers
        # the density of F exactly
        G = LabeledGraph(random_binary(rng, 7, symmetric=True, zero_diagonal=True))
        F = LabeledGraph.from_edges(2, [(0, 1)])
        total = Fraction(0)
        for mask in range(4):
            edges = [(0, 1)] + [(v, 2) for v in range(2) if mask >> v & 1]
            total += graph_density(LabeledGraph.from_edges(3, edges), G)
        assert total == graph_density(F, G)

    def test_budget(self):
        G = LabeledGraph(
            random_binary(np.random.default_rng(1), 30, symmetric=True, zero_diagonal=True)
        )
        with pytest.raises(BudgetExceededError):
            graph_ind(LabeledGraph.from_edges(3, [(0, 1)]), G, budget=100)


class TestLimitProfile:
    def test_constant_converges_with_zero_gap(self):
        y = constant_array(60, 1, BIN)
        profile = limit_profile(y, 2, [10, 20, 40], K=1000, seed=1)
        assert profile.status == "converging"
        assert profile.gap == 0.0
        assert all(len(mu) == 1 for _, mu in profile.entries)

    def test_iid_matches_product_law(self):
        cfg = IidEntry(law=EntryLaw.bernoulli(0.3)).to_config()
        cfg["family"] = "iid_entry"
        profile = limit_profile(cfg, 2, [50, 100, 200], K=50_000, seed=4)
        assert profile.status == "converging"
        assert tv_distance(profile.final_measure(), product_law_measure(0.3, 2)) <= 0.05

    def test_global_mixture_limit_is_random(self):
        f = HiddenTypeMixture(
            type_probs=(0.5, 0.5),
            pair_laws=(
                (EntryLaw.bernoulli(0.2), EntryLaw.bernoulli(0.2)),
                (EntryLaw.bernoulli(0.8), EntryLaw.bernoulli(0.8)),
            ),
            uses_global=True,
        )
        cfg = f.to_config()
        components = [product_law_measure(p, 2) for p in (0.2, 0.8)]
        seen = {}
        for seed in range(12):
            mean = sample_exchangeable(f, 50, seed).values.mean()
            component = 0 if mean < 0.5 else 1
            if component not in seen:
                seen[component] = seed
            if len(seen) == 2:
                break
        assert len(seen) == 2, "expected both mixture components among the probed seeds"
        profiles = {
            c: limit_profile(cfg, 2, [40, 80, 160], K=40_000, seed=s) for c, s in seen.items()
        }
        for c, profile in profiles.items():
            assert profile.status == "converging"
            assert tv_distance(profile.final_measure(), components[c]) <= 0.05
        assert tv_distance(profiles[0].final_measure(), profiles[1].final_measure()) > 0.1

    def test_schedule_validated(self):
        y = constant_array(10, 0, BIN)
        with pytest.raises(ValueError):
            limit_profile(y, 2, [5, 5], K=10, seed=0)
        with pytest.raises(ValueError):
            limit_profile(y, 3, [2, 4], K=10, seed=0)

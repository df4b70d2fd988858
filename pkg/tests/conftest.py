"""Shared fixtures and independent oracles.

The oracles here deliberately avoid the library's vectorized code paths:
sub-array measures are enumerated with itertools over plain tuples, densities
come from closed forms, and the hidden-type dynamics are marginalized by
exhaustive enumeration.  Tests compare the package against these.
"""

from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np
import pytest

from exarray import Alphabet, EmpiricalMeasure, FiniteArray


def brute_force_subarray(values: np.ndarray, n: int) -> dict[tuple, Fraction]:
    """Two-injection sub-array distribution via plain itertools enumeration."""
    m = values.shape[0]
    counts: dict[tuple, int] = {}
    total = 0
    for psi1 in itertools.permutations(range(m), n):
        for psi2 in itertools.permutations(range(m), n):
            pattern = tuple(tuple(values[i, j] for j in psi2) for i in psi1)
            counts[pattern] = counts.get(pattern, 0) + 1
            total += 1
    return {p: Fraction(c, total) for p, c in counts.items()}


def brute_force_subarray_weak(values: np.ndarray, n: int) -> dict[tuple, Fraction]:
    """Single-injection variant of the brute-force enumeration."""
    m = values.shape[0]
    counts: dict[tuple, int] = {}
    total = 0
    for psi in itertools.permutations(range(m), n):
        pattern = tuple(tuple(values[i, j] for j in psi) for i in psi)
        counts[pattern] = counts.get(pattern, 0) + 1
        total += 1
    return {p: Fraction(c, total) for p, c in counts.items()}


def measure_as_tuples(mu: EmpiricalMeasure) -> dict[tuple, Fraction | float]:
    return {tuple(map(tuple, p.values.tolist())): w for p, w in mu.weights.items()}


def product_law_measure(p: float, n: int) -> EmpiricalMeasure:
    """Closed-form law of an n-by-n array of i.i.d. Bernoulli(p) entries."""
    alphabet = Alphabet.finite(2)
    weights = {}
    for bits in itertools.product((0, 1), repeat=n * n):
        ones = sum(bits)
        pattern = FiniteArray(np.array(bits).reshape(n, n), alphabet)
        weights[pattern] = p**ones * (1 - p) ** (n * n - ones)
    return EmpiricalMeasure(n, alphabet, weights)


def hidden_majority_ones_run(k: int) -> Fraction:
    """Probability that the (0, 1) edge is present at k fixed consecutive times.

    Marginalizing the four equally likely latent type pairs: frozen (0,0)
    keeps the initial Bernoulli(1/4) draw, mixed pairs refresh i.i.d. at 1/2,
    and (1,1) refreshes i.i.d. at 3/4.
    """
    return (
        Fraction(1, 4) * Fraction(1, 4)
        + Fraction(1, 2) * Fraction(1, 2) ** k
        + Fraction(1, 4) * Fraction(3, 4) ** k
    )


def hidden_majority_one_step() -> Fraction:
    return hidden_majority_ones_run(2) / hidden_majority_ones_run(1)


def hidden_majority_history(N: int) -> Fraction:
    return hidden_majority_ones_run(N) / hidden_majority_ones_run(N - 1)


def majority_types(values: np.ndarray) -> np.ndarray:
    """Row-majority type rule with the strict > 1/2 tie convention."""
    return (values.mean(axis=1) > 0.5).astype(np.int64)


def hidden_majority_estimate_edge_law(x: np.ndarray, T: int) -> float:
    """P(edge (0,1) present at time T) for the estimate-mode dynamics, exactly.

    Exhaustive enumeration over all edge configurations of a small graph:
    starting from the point mass at ``x``, one step produces a product
    measure over edges (given the current configuration the refreshes are
    independent), which is propagated by summing over all 2^(m(m-1)/2)
    configurations per step.  Feasible for m <= 6.
    """
    m = x.shape[0]
    pairs = [(i, j) for i in range(m) for j in range(i + 1, m)]
    n_edges = len(pairs)

    def config_to_array(bits: int) -> np.ndarray:
        arr = np.zeros((m, m), dtype=np.int64)
        for b, (i, j) in enumerate(pairs):
            if bits >> b & 1:
                arr[i, j] = arr[j, i] = 1
        return arr

    def step_factors(arr: np.ndarray) -> list[tuple[float, float]]:
        """(P(edge=0), P(edge=1)) per pair after one step from ``arr``."""
        xi = majority_types(arr)
        out = []
        for i, j in pairs:
            if xi[i] == 0 and xi[j] == 0:
                out.append((1.0 - arr[i, j], float(arr[i, j])))
            else:
                p = 0.25 * (1 + xi[i] + xi[j])
                out.append((1.0 - p, p))
        return out

    dist = {int(sum((x[i, j] & 1) << b for b, (i, j) in enumerate(pairs))): 1.0}
    for _ in range(T - 1):
        nxt: dict[int, float] = {}
        for bits, mass in dist.items():
            factors = step_factors(config_to_array(bits))
            for target in range(1 << n_edges):
                w = mass
                for b in range(n_edges):
                    w *= factors[b][target >> b & 1]
                    if w == 0.0:
                        break
                if w > 0.0:
                    nxt[target] = nxt.get(target, 0.0) + w
        dist = nxt
    # final step: only the (0, 1) edge marginal is needed
    total = 0.0
    for bits, mass in dist.items():
        factors = step_factors(config_to_array(bits))
        total += mass * factors[0][1]
    return total


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)

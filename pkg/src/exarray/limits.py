"""Empirical sub-array distributions, graph densities, and limit profiles.

The central object is the empirical distribution of n-by-n sub-arrays of an
m-by-m array: put weight 1/((m)_n)^2 on the pattern picked out by every pair
of injections psi1, psi2 : [n] -> [m],

    pattern[i, j] = y[psi1[i], psi2[j]].

Its weakly exchangeable variant uses a single injection for rows and columns
jointly.  Exact enumeration carries Fraction weights, so consistency
identities hold with exact rational equality; the Monte Carlo variant draws
uniformly random injection pairs and is the workhorse at large m, where the
number of enumeration terms explodes.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .arrays import Alphabet, EmpiricalMeasure, FiniteArray, quantize, restrict, tv_distance
from .errors import BudgetExceededError
from .rng import Seed, derive_seed, substream
from .sampler import sample_from_config

DEFAULT_BUDGET = 10**8
DEFAULT_BINS = 16

# Pattern codes are packed into int64 via positional base-k digits when the
# code space is small enough to bincount; otherwise counts go through a dict.
_BINCOUNT_LIMIT = 1 << 20
_CHUNK_TARGET = 1 << 21


def falling_factorial(m: int, n: int) -> int:
    """Exact product m (m-1) ... (m-n+1), with the empty product equal to 1."""
    if n < 0 or n > m:
        raise ValueError(f"need 0 <= n <= m, got n={n}, m={m}")
    out = 1
    for i in range(n):
        out *= m - i
    return out


def enumerate_injections(m: int, n: int) -> np.ndarray:
    """All (m)_n injections [n] -> [m] as an array of index rows."""
    count = falling_factorial(m, n)
    out = np.fromiter(
        itertools.chain.from_iterable(itertools.permutations(range(m), n)),
        dtype=np.int64,
        count=count * n,
    )
    return out.reshape(count, n)


def _code_basis(k: int, n: int) -> np.ndarray | None:
    """Base-k positional weights for flattened n*n patterns, or None on overflow."""
    if n * n * np.log2(k) >= 62:
        return None
    return k ** np.arange(n * n - 1, -1, -1, dtype=np.int64)


def _decode_pattern(code: int, k: int, n: int, alphabet: Alphabet) -> FiniteArray:
    digits = np.zeros(n * n, dtype=np.int64)
    for pos in range(n * n - 1, -1, -1):
        digits[pos] = code % k
        code //= k
    return FiniteArray(digits.reshape(n, n), alphabet)


class _PatternCounter:
    """Accumulates exact pattern counts over enumeration or sampling chunks."""

    def __init__(self, alphabet: Alphabet, n: int):
        self.alphabet = alphabet
        self.n = n
        self.k = alphabet.size
        self.basis = _code_basis(self.k, n)
        self.use_bincount = self.basis is not None and self.k ** (n * n) <= _BINCOUNT_LIMIT
        self.bins = (
            np.zeros(self.k ** (n * n), dtype=np.int64) if self.use_bincount else None
        )
        self.table: dict[bytes, int] = {}

    def add(self, patterns: np.ndarray) -> None:
        """Count a chunk of patterns, shape (..., n, n) of symbol codes."""
        flat = patterns.reshape(-1, self.n * self.n)
        if self.use_bincount:
            codes = flat @ self.basis
            self.bins += np.bincount(codes, minlength=self.bins.shape[0])
        else:
            rows, counts = np.unique(flat, axis=0, return_counts=True)
            for row, c in zip(rows, counts):
                key = row.tobytes()
                self.table[key] = self.table.get(key, 0) + int(c)

    def counts(self) -> dict[FiniteArray, int]:
        out: dict[FiniteArray, int] = {}
        if self.use_bincount:
            for code in np.nonzero(self.bins)[0]:
                out[_decode_pattern(int(code), self.k, self.n, self.alphabet)] = int(self.bins[code])
        else:
            for key, count in self.table.items():
                values = np.frombuffer(key, dtype=np.int64).reshape(self.n, self.n)
                out[FiniteArray(values, self.alphabet)] = count
        return out

    def measure(self, total: int, exact: bool) -> EmpiricalMeasure:
        weights: dict[FiniteArray, Fraction | float] = {}
        if self.use_bincount:
            for code in np.nonzero(self.bins)[0]:
                pattern = _decode_pattern(int(code), self.k, self.n, self.alphabet)
                count = int(self.bins[code])
                weights[pattern] = Fraction(count, total) if exact else count / total
        else:
            for key, count in self.table.items():
                values = np.frombuffer(key, dtype=np.int64).reshape(self.n, self.n)
                pattern = FiniteArray(values, self.alphabet)
                weights[pattern] = Fraction(count, total) if exact else count / total
        return EmpiricalMeasure(self.n, self.alphabet, weights)


def _prepare(y: FiniteArray, n: int, bins: int) -> FiniteArray:
    if not 1 <= n <= y.side:
        raise ValueError(f"pattern size must be in [1, {y.side}], got {n}")
    return quantize(y, bins)


def empirical_subarray_exact(
    y: FiniteArray, n: int, bins: int = DEFAULT_BINS, budget: int = DEFAULT_BUDGET
) -> EmpiricalMeasure:
    """Exact sub-array distribution by full enumeration of injection pairs.

    The number of terms is ((m)_n)^2 and must fit the budget; weights are
    exact fractions count / ((m)_n)^2.  Unit-interval arrays are quantized
    entrywise into ``bins`` equal bins first.
    """
    yq = _prepare(y, n, bins)
    m = yq.side
    per_side = falling_factorial(m, n)
    terms = per_side * per_side
    if terms > budget:
        raise BudgetExceededError(terms, budget)
    inj = enumerate_injections(m, n)
    counter = _PatternCounter(yq.alphabet, n)
    block = max(1, _CHUNK_TARGET // max(1, per_side * n * n))
    for start in range(0, per_side, block):
        psi1 = inj[start : start + block]
        patterns = yq.values[psi1[:, None, :, None], inj[None, :, None, :]]
        counter.add(patterns)
    return counter.measure(terms, exact=True)


def _sample_injections(
    rng: np.random.Generator, count: int, m: int, n: int
) -> np.ndarray:
    """Uniformly random injections via a length-n partial shuffle per draw."""
    idx = np.tile(np.arange(m, dtype=np.int64), (count, 1))
    rows = np.arange(count)
    for t in range(n):
        j = rng.integers(t, m, size=count)
        tmp = idx[rows, j].copy()
        idx[rows, j] = idx[rows, t]
        idx[rows, t] = tmp
    return np.ascontiguousarray(idx[:, :n])


def empirical_subarray_mc(
    y: FiniteArray, n: int, K: int, seed: Seed, bins: int = DEFAULT_BINS
) -> EmpiricalMeasure:
    """Monte Carlo sub-array distribution from K uniform injection pairs.

    Unbiased for the exact measure at every pattern; weights are counts / K.
    """
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    yq = _prepare(y, n, bins)
    m = yq.side
    rng = substream(seed, "subarray-mc")
    counter = _PatternCounter(yq.alphabet, n)
    block = max(1, min(K, _CHUNK_TARGET // max(1, m)))
    done = 0
    while done < K:
        take = min(block, K - done)
        psi1 = _sample_injections(rng, take, m, n)
        psi2 = _sample_injections(rng, take, m, n)
        patterns = yq.values[psi1[:, :, None], psi2[:, None, :]]
        counter.add(patterns)
        done += take
    return counter.measure(K, exact=False)


def _mc_counts(y: FiniteArray, n: int, K: int, rng: np.random.Generator) -> dict[FiniteArray, int]:
    m = y.side
    counter = _PatternCounter(y.alphabet, n)
    block = max(1, min(K, _CHUNK_TARGET // max(1, m)))
    done = 0
    while done < K:
        take = min(block, K - done)
        psi1 = _sample_injections(rng, take, m, n)
        psi2 = _sample_injections(rng, take, m, n)
        counter.add(y.values[psi1[:, :, None], psi2[:, None, :]])
        done += take
    return counter.counts()


def empirical_subarray_mc_pooled(
    y: FiniteArray,
    n: int,
    K: int,
    seed: Seed,
    bins: int = DEFAULT_BINS,
    units: int = 16,
    threads: int = 1,
) -> EmpiricalMeasure:
    """Monte Carlo sub-array distribution pooled over fixed, separately seeded units.

    The K draws are split into ``units`` blocks, each on its own derived
    stream, and the counts are merged in block order; ``threads`` parallelizes
    the blocks without changing any byte of the result.
    """
    from .parallel import run_units, unit_sizes

    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    yq = _prepare(y, n, bins)
    sizes = unit_sizes(K, units)

    def worker(u: int) -> dict[FiniteArray, int]:
        if sizes[u] == 0:
            return {}
        return _mc_counts(yq, n, sizes[u], substream(seed, "mc-unit", u))

    merged: dict[FiniteArray, int] = {}
    for part in run_units(worker, units, threads):
        for pattern, c in part.items():
            merged[pattern] = merged.get(pattern, 0) + c
    weights = {pattern: c / K for pattern, c in merged.items()}
    return EmpiricalMeasure(n, yq.alphabet, weights)


def empirical_subarray_weak(
    y: FiniteArray,
    n: int,
    mode: str = "exact",
    K: int | None = None,
    seed: Seed | None = None,
    bins: int = DEFAULT_BINS,
    budget: int = DEFAULT_BUDGET,
) -> EmpiricalMeasure:
    """Single-injection variant for symmetric arrays.

    One injection indexes rows and columns jointly, so every output pattern is
    itself a symmetric sub-array (diagonal included).  ``mode`` is ``"exact"``
    (all (m)_n injections, Fraction weights) or ``"mc"`` (K sampled).
    """
    if not y.symmetric:
        raise ValueError("the single-injection distribution needs a symmetric array")
    yq = _prepare(y, n, bins)
    m = yq.side
    counter = _PatternCounter(yq.alphabet, n)
    if mode == "exact":
        total = falling_factorial(m, n)
        if total > budget:
            raise BudgetExceededError(total, budget)
        inj = enumerate_injections(m, n)
        block = max(1, _CHUNK_TARGET // max(1, n * n))
        for start in range(0, total, block):
            psi = inj[start : start + block]
            counter.add(yq.values[psi[:, :, None], psi[:, None, :]])
        return counter.measure(total, exact=True)
    if mode != "mc":
        raise ValueError(f"mode must be 'exact' or 'mc', got {mode!r}")
    if K is None or seed is None:
        raise ValueError("mc mode needs K and seed")
    rng = substream(seed, "subarray-weak-mc")
    block = max(1, min(K, _CHUNK_TARGET // max(1, m)))
    done = 0
    while done < K:
        take = min(block, K - done)
        psi = _sample_injections(rng, take, m, n)
        counter.add(yq.values[psi[:, :, None], psi[:, None, :]])
        done += take
    return counter.measure(K, exact=False)


def restrict_measure(mu: EmpiricalMeasure, n_small: int) -> EmpiricalMeasure:
    """Pushforward under truncating every pattern to its top-left corner.

    Weights of patterns that collide after truncation add, preserving total
    mass; on exact measures the arithmetic stays exact.
    """
    if not 1 <= n_small < mu.n:
        raise ValueError(f"need 1 <= n_small < {mu.n}, got {n_small}")
    weights: dict[FiniteArray, Fraction | float] = {}
    for pattern, w in mu.weights.items():
        small = restrict(pattern, n_small)
        if small in weights:
            weights[small] = weights[small] + w
        else:
            weights[small] = w
    return EmpiricalMeasure(n_small, mu.alphabet, weights)


@dataclass(frozen=True)
class LabeledGraph:
    """A simple graph on labelled vertices, held as its adjacency array."""

    adjacency: FiniteArray

    def __post_init__(self) -> None:
        a = self.adjacency
        if not (a.symmetric and a.zero_diagonal and a.alphabet == Alphabet.finite(2)):
            raise ValueError("adjacency must be a symmetric zero-diagonal 0/1 array")

    @property
    def n(self) -> int:
        return self.adjacency.side

    @classmethod
    def from_edges(cls, n: int, edges: list[tuple[int, int]]) -> "LabeledGraph":
        values = np.zeros((n, n), dtype=np.int64)
        for u, v in edges:
            if not (0 <= u < n and 0 <= v < n) or u == v:
                raise ValueError(f"bad edge ({u}, {v}) for {n} vertices")
            values[u, v] = values[v, u] = 1
        return cls(FiniteArray(values, Alphabet.finite(2), symmetric=True, zero_diagonal=True))

    def relabel(self, pi: np.ndarray) -> "LabeledGraph":
        values = self.adjacency.values[np.ix_(pi, pi)]
        return LabeledGraph(
            FiniteArray(values, Alphabet.finite(2), symmetric=True, zero_diagonal=True)
        )


def graph_ind(F: LabeledGraph, G: LabeledGraph, budget: int = DEFAULT_BUDGET) -> int:
    """Number of injections of F's vertices into G's that copy F exactly.

    An injection psi counts when G[psi(i), psi(j)] == F[i, j] for all i, j,
    i.e. F appears as the induced labelled pattern on the image.
    """
    n, m = F.n, G.n
    if n > m:
        raise ValueError(f"pattern graph has more vertices ({n}) than the host ({m})")
    total = falling_factorial(m, n)
    if total > budget:
        raise BudgetExceededError(total, budget)
    Fv, Gv = F.adjacency.values, G.adjacency.values
    count = 0
    block = max(1, _CHUNK_TARGET // max(1, n * n))
    perms = itertools.permutations(range(m), n)
    while True:
        chunk = list(itertools.islice(perms, block))
        if not chunk:
            break
        psi = np.asarray(chunk, dtype=np.int64)
        ok = np.ones(psi.shape[0], dtype=bool)
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                ok &= Gv[psi[:, i], psi[:, j]] == Fv[i, j]
        count += int(ok.sum())
    return count


def graph_density(F: LabeledGraph, G: LabeledGraph, budget: int = DEFAULT_BUDGET) -> Fraction:
    """Fraction of injections under which F appears: ind(F, G) / (m)_n.

    This equals the weight the single-injection sub-array distribution of G's
    adjacency assigns to F's adjacency pattern, and is invariant under
    relabelling F.
    """
    return Fraction(graph_ind(F, G, budget=budget), falling_factorial(G.n, F.n))


@dataclass(frozen=True)
class LimitProfile:
    """Sub-array measures along a growth schedule, with a convergence verdict.

    ``status`` is ``"converging"`` when the last two entries are within the
    declared tv threshold (``gap`` reports their distance) and
    ``"undetermined"`` otherwise.  Finite data can suggest but never certify a
    limit, so the verdict is reported, not asserted.
    """

    n: int
    entries: tuple[tuple[int, EmpiricalMeasure], ...]
    status: str
    gap: float | None

    def final_measure(self) -> EmpiricalMeasure:
        return self.entries[-1][1]


def limit_profile(
    y_source: FiniteArray | dict,
    n: int,
    m_schedule: list[int],
    K: int,
    seed: Seed,
    bins: int = DEFAULT_BINS,
    exact_budget: int = DEFAULT_BUDGET,
    threshold: float = 0.05,
    weak: bool = False,
) -> LimitProfile:
    """Estimate the large-m sub-array distribution along ``m_schedule``.

    ``y_source`` is either a fixed array (side >= max m) or a sampler config,
    sampled once at the largest scheduled m with this profile's seed; each
    entry then restricts the same realization.  Exact enumeration is used
    whenever it fits ``exact_budget``, otherwise K Monte Carlo draws.
    """
    if not m_schedule or any(b <= a for a, b in zip(m_schedule, m_schedule[1:])):
        raise ValueError("m_schedule must be nonempty and strictly increasing")
    if m_schedule[0] < n:
        raise ValueError("every scheduled m must be >= n")
    m_top = m_schedule[-1]
    if isinstance(y_source, FiniteArray):
        if y_source.side < m_top:
            raise ValueError(f"array side {y_source.side} is below the top of the schedule {m_top}")
        base = y_source
    else:
        base, _ = sample_from_config(y_source, m_top, seed)
    entries = []
    for m in m_schedule:
        y_m = restrict(base, m)
        per_side = falling_factorial(m, n)
        terms = per_side if weak else per_side * per_side
        if terms <= exact_budget:
            mu = (
                empirical_subarray_weak(y_m, n, mode="exact", bins=bins, budget=exact_budget)
                if weak
                else empirical_subarray_exact(y_m, n, bins=bins, budget=exact_budget)
            )
        elif weak:
            mu = empirical_subarray_weak(
                y_m, n, mode="mc", K=K, seed=derive_seed(seed, "profile", m), bins=bins
            )
        else:
            mu = empirical_subarray_mc(y_m, n, K, derive_seed(seed, "profile", m), bins=bins)
        entries.append((m, mu))
    gap = tv_distance(entries[-1][1], entries[-2][1]) if len(entries) >= 2 else None
    status = "converging" if gap is not None and gap < threshold else "undetermined"
    return LimitProfile(n=n, entries=tuple(entries), status=status, gap=gap)

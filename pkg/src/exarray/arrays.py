"""Core array values, permutation actions, restrictions, and distances.

The objects here are the finite truncations everything else manipulates:
square arrays over a finite alphabet or the unit interval, permutation pairs
acting on their indices, and empirical measures over small square patterns.
All of them are value-like and immutable after construction, so they can be
shared freely across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Mapping

import numpy as np

Weight = Fraction | float

_WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class Alphabet:
    """Value space of array entries: ``Finite(k)`` symbols ``0..k-1`` or [0, 1].

    ``size is None`` means the unit interval.
    """

    size: int | None = None

    def __post_init__(self) -> None:
        if self.size is not None and self.size < 2:
            raise ValueError(f"finite alphabets need at least 2 symbols, got {self.size}")

    @classmethod
    def finite(cls, k: int) -> "Alphabet":
        return cls(size=int(k))

    @classmethod
    def unit_interval(cls) -> "Alphabet":
        return cls(size=None)

    @property
    def is_finite(self) -> bool:
        return self.size is not None

    def __repr__(self) -> str:
        return f"Finite({self.size})" if self.is_finite else "UnitInterval"


BINARY = Alphabet.finite(2)


@dataclass(frozen=True, eq=False)
class FiniteArray:
    """Immutable m-by-m array over an alphabet, with structural flags.

    ``symmetric`` and ``zero_diagonal`` are verified at construction.  Equality
    and hashing are by (side, alphabet, values); the flags are structural
    metadata and two arrays with identical entries are the same value.
    Indices are 0-based everywhere in code and in files.
    """

    values: np.ndarray
    alphabet: Alphabet
    symmetric: bool = False
    zero_diagonal: bool = False

    def __post_init__(self) -> None:
        dtype = np.int64 if self.alphabet.is_finite else np.float64
        values = np.ascontiguousarray(self.values, dtype=dtype)
        if values.ndim != 2 or values.shape[0] != values.shape[1] or values.shape[0] < 1:
            raise ValueError(f"values must be a square m>=1 array, got shape {values.shape}")
        if self.alphabet.is_finite:
            if values.size and (values.min() < 0 or values.max() >= self.alphabet.size):
                raise ValueError(f"entries must be symbols in [0, {self.alphabet.size})")
        else:
            if values.size and (values.min() < 0.0 or values.max() > 1.0):
                raise ValueError("unit-interval entries must lie in [0, 1]")
        if self.symmetric and not np.array_equal(values, values.T):
            raise ValueError("symmetric flag set but values are not symmetric")
        if self.zero_diagonal and np.any(np.diagonal(values) != 0):
            raise ValueError("zero_diagonal flag set but diagonal is not 0")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def side(self) -> int:
        return self.values.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FiniteArray):
            return NotImplemented
        return (
            self.alphabet == other.alphabet
            and self.side == other.side
            and np.array_equal(self.values, other.values)
        )

    def __hash__(self) -> int:
        return hash((self.side, self.alphabet, self.values.tobytes()))

    def __repr__(self) -> str:
        flags = "".join(s for s, on in (("s", self.symmetric), ("z", self.zero_diagonal)) if on)
        return f"FiniteArray(side={self.side}, alphabet={self.alphabet}{', ' + flags if flags else ''})"


def constant_array(
    m: int,
    value: float | int,
    alphabet: Alphabet,
    symmetric: bool = False,
    zero_diagonal: bool = False,
) -> FiniteArray:
    """m-by-m array with every entry equal to ``value``."""
    values = np.full((m, m), value)
    if zero_diagonal:
        values = values.copy()
        np.fill_diagonal(values, 0)
    return FiniteArray(values, alphabet, symmetric=symmetric, zero_diagonal=zero_diagonal)


@dataclass(frozen=True, eq=False)
class PermutationPair:
    """A pair of bijections of {0..m-1} acting on rows and columns separately.

    The action on an array is ``result[i, j] = values[pi1[i], pi2[j]]``.  The
    jointly-permuted (symmetric) case is the special case ``pi1 == pi2``.
    """

    pi1: np.ndarray
    pi2: np.ndarray

    def __post_init__(self) -> None:
        for name in ("pi1", "pi2"):
            perm = np.ascontiguousarray(getattr(self, name), dtype=np.int64)
            m = perm.shape[0]
            if perm.ndim != 1 or not np.array_equal(np.sort(perm), np.arange(m)):
                raise ValueError(f"{name} is not a bijection of range({m})")
            perm.setflags(write=False)
            object.__setattr__(self, name, perm)
        if self.pi1.shape[0] != self.pi2.shape[0]:
            raise ValueError("pi1 and pi2 must act on the same index set")

    @property
    def side(self) -> int:
        return self.pi1.shape[0]

    @property
    def is_joint(self) -> bool:
        return bool(np.array_equal(self.pi1, self.pi2))

    @classmethod
    def identity(cls, m: int) -> "PermutationPair":
        eye = np.arange(m)
        return cls(eye, eye)

    @classmethod
    def joint(cls, pi: np.ndarray) -> "PermutationPair":
        """The action ``values[pi[i], pi[j]]`` of a single permutation."""
        return cls(pi, pi)

    @classmethod
    def random(cls, m: int, rng: np.random.Generator, joint: bool = False) -> "PermutationPair":
        pi1 = rng.permutation(m)
        return cls(pi1, pi1 if joint else rng.permutation(m))

    def inverse(self) -> "PermutationPair":
        return PermutationPair(np.argsort(self.pi1), np.argsort(self.pi2))

    def fixes_prefix_setwise(self, n: int) -> bool:
        """True when both bijections map {0..n-1} onto itself."""
        return bool((self.pi1[:n] < n).all() and (self.pi2[:n] < n).all())

    def restrict(self, n: int) -> "PermutationPair":
        """Restriction to {0..n-1}; both bijections must fix it setwise."""
        if not self.fixes_prefix_setwise(n):
            raise ValueError(f"permutations do not fix the first {n} indices setwise")
        return PermutationPair(self.pi1[:n], self.pi2[:n])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PermutationPair):
            return NotImplemented
        return np.array_equal(self.pi1, other.pi1) and np.array_equal(self.pi2, other.pi2)

    def __hash__(self) -> int:
        return hash((self.pi1.tobytes(), self.pi2.tobytes()))


def apply_permutation(y: FiniteArray, p: PermutationPair) -> FiniteArray:
    """Relabel rows by ``p.pi1`` and columns by ``p.pi2``.

    Symmetry and zero-diagonal flags survive only under joint permutations;
    under a generic pair the diagonal moves and symmetry is not preserved.
    """
    if p.side != y.side:
        raise ValueError(f"permutation acts on {p.side} indices but array side is {y.side}")
    values = y.values[np.ix_(p.pi1, p.pi2)]
    joint = p.is_joint
    return FiniteArray(
        values,
        y.alphabet,
        symmetric=y.symmetric and joint,
        zero_diagonal=y.zero_diagonal and joint,
    )


def restrict(y: FiniteArray, n: int) -> FiniteArray:
    """Top-left n-by-n corner of ``y``; flags are preserved."""
    if not 1 <= n <= y.side:
        raise ValueError(f"restriction size must be in [1, {y.side}], got {n}")
    return FiniteArray(
        y.values[:n, :n],
        y.alphabet,
        symmetric=y.symmetric,
        zero_diagonal=y.zero_diagonal,
    )


def entry_distance(y: FiniteArray, z: FiniteArray) -> np.ndarray:
    """Entrywise base metric: discrete on finite alphabets, |a-b| on [0, 1]."""
    if y.alphabet.is_finite:
        return (y.values != z.values).astype(np.float64)
    return np.abs(y.values - z.values)


def array_distance(y: FiniteArray, z: FiniteArray) -> float:
    """Weighted entrywise distance ``sum_{i,j} 2^(-i-j) d(y_ij, z_ij)``.

    Rows and columns are weighted with 1-based exponents, so the (0, 0) entry
    carries weight 1/4 and the total lies in [0, 1).  Both base metrics are
    bounded by 1, which makes the weights a convergent majorant as m grows.
    """
    if y.side != z.side or y.alphabet != z.alphabet:
        raise ValueError("arrays must share side and alphabet")
    m = y.side
    w = np.power(2.0, -np.arange(1, m + 1))
    return float(w @ entry_distance(y, z) @ w)


class EmpiricalMeasure:
    """Probability measure on n-by-n patterns over a fixed alphabet.

    Weights may be exact ``Fraction`` values (enumeration estimators) or
    floats (Monte Carlo); they must be nonnegative and sum to 1 within 1e-12.
    Equality is exact equality of supports and weights.
    """

    def __init__(self, n: int, alphabet: Alphabet, weights: Mapping[FiniteArray, Weight]):
        total = 0.0
        for pattern, w in weights.items():
            if pattern.side != n or pattern.alphabet != alphabet:
                raise ValueError("all pattern keys must have the declared side and alphabet")
            if w < 0:
                raise ValueError("weights must be nonnegative")
            total += float(w)
        if abs(total - 1.0) > _WEIGHT_TOL:
            raise ValueError(f"weights must sum to 1 within {_WEIGHT_TOL}, got {total!r}")
        self.n = n
        self.alphabet = alphabet
        self._weights: dict[FiniteArray, Weight] = dict(weights)

    @property
    def weights(self) -> dict[FiniteArray, Weight]:
        return dict(self._weights)

    def weight(self, pattern: FiniteArray) -> Weight:
        return self._weights.get(pattern, 0)

    def support(self) -> Iterator[FiniteArray]:
        return iter(self._weights)

    def __len__(self) -> int:
        return len(self._weights)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EmpiricalMeasure):
            return NotImplemented
        if self.n != other.n or self.alphabet != other.alphabet:
            return False
        if set(self._weights) != set(other._weights):
            return False
        return all(self._weights[p] == other._weights[p] for p in self._weights)

    def __repr__(self) -> str:
        return f"EmpiricalMeasure(n={self.n}, alphabet={self.alphabet}, atoms={len(self)})"


def tv_distance(mu: EmpiricalMeasure, nu: EmpiricalMeasure) -> float:
    """Total variation distance ``(1/2) * sum_p |mu(p) - nu(p)|`` in [0, 1].

    On a finite pattern space this metrizes weak convergence, so it is the
    working distance between sub-array measures throughout.  Unit-interval
    measures must already be quantized to a common finite alphabet.
    """
    if mu.n != nu.n or mu.alphabet != nu.alphabet:
        raise ValueError("measures must share pattern size and alphabet")
    patterns = set(mu._weights) | set(nu._weights)
    return 0.5 * float(sum(abs(float(mu.weight(p)) - float(nu.weight(p))) for p in patterns))


def quantize(y: FiniteArray, bins: int) -> FiniteArray:
    """Quantize a unit-interval array entrywise into ``bins`` equal bins.

    Entry v maps to ``floor(v * bins)`` clipped to ``bins - 1``, giving a
    ``Finite(bins)`` array.  Finite-alphabet arrays pass through unchanged.
    """
    if y.alphabet.is_finite:
        return y
    if bins < 2:
        raise ValueError("need at least 2 quantization bins")
    codes = np.minimum((y.values * bins).astype(np.int64), bins - 1)
    return FiniteArray(
        codes,
        Alphabet.finite(bins),
        symmetric=y.symmetric,
        zero_diagonal=y.zero_diagonal,
    )


def pattern_space_size(
    alphabet: Alphabet, n: int, symmetric: bool = False, zero_diagonal: bool = False
) -> int:
    """Number of possible n-by-n patterns with the given structure.

    Used to size Monte Carlo noise bands; unit-interval alphabets have no
    finite pattern space and must be quantized first.
    """
    if not alphabet.is_finite:
        raise ValueError("unit-interval patterns must be quantized before counting")
    k = alphabet.size
    if symmetric:
        off = n * (n - 1) // 2
        return k**off if zero_diagonal else k ** (off + n)
    if zero_diagonal:
        return k ** (n * n - n)
    return k ** (n * n)

"""Samplers for exchangeable and weakly exchangeable array truncations.

Every sampler realizes the representing-function form

    Y[i, j] = f(U, U_i, U'_j, U_ij)

with independent Uniform[0, 1] families drawn from named substreams of one
seed: ``U`` a single global variable (consumed only when the function uses
it), ``U_i`` per row, ``U'_j`` per column, and ``U_ij`` per entry.  In the
weakly exchangeable (symmetric) case rows and columns share one family and
the noise is symmetric, ``U_ij = U_ji``.

Functions form a closed, serializable family of parameterized shapes rather
than arbitrary callables, so a JSON config plus a seed reproduces any sample
bit-exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from .arrays import Alphabet, FiniteArray
from .errors import ConfigError
from .rng import Seed, substream

_PROB_TOL = 1e-12


@dataclass(frozen=True)
class EntryLaw:
    """Distribution of a single entry: categorical over symbols, or uniform.

    ``probs is None`` means Uniform[0, 1]; otherwise ``probs[s]`` is the mass
    of symbol ``s`` in ``Finite(len(probs))``.
    """

    probs: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.probs is not None:
            probs = tuple(float(p) for p in self.probs)
            if len(probs) < 2:
                raise ConfigError("categorical entry laws need at least 2 symbols")
            if min(probs) < 0 or abs(sum(probs) - 1.0) > _PROB_TOL:
                raise ConfigError(f"probabilities must be nonnegative and sum to 1: {probs}")
            object.__setattr__(self, "probs", probs)

    @classmethod
    def bernoulli(cls, p: float) -> "EntryLaw":
        return cls(probs=(1.0 - p, p))

    @classmethod
    def uniform(cls) -> "EntryLaw":
        return cls(probs=None)

    @property
    def alphabet(self) -> Alphabet:
        if self.probs is None:
            return Alphabet.unit_interval()
        return Alphabet.finite(len(self.probs))

    def icdf(self, u: np.ndarray) -> np.ndarray:
        """Map uniforms through the inverse CDF (identity for uniform laws)."""
        if self.probs is None:
            return np.asarray(u, dtype=np.float64)
        cum = np.cumsum(self.probs)
        cum[-1] = 1.0
        return np.searchsorted(cum, u, side="right").astype(np.int64)

    def sample(self, rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
        return self.icdf(rng.random(shape))

    def to_config(self) -> dict:
        return {"kind": "uniform"} if self.probs is None else {"probs": list(self.probs)}

    @classmethod
    def from_config(cls, obj: Any) -> "EntryLaw":
        if not isinstance(obj, dict):
            raise ConfigError(f"entry law must be an object, got {obj!r}")
        if obj.get("kind") == "uniform":
            return cls.uniform()
        if "probs" in obj:
            return cls(probs=tuple(obj["probs"]))
        raise ConfigError(f"entry law needs 'probs' or kind 'uniform': {obj!r}")


class RepresentingFunction:
    """Base of the closed family of array-sampling functions.

    Subclasses implement ``evaluate`` on broadcast uniform arrays and declare
    the output alphabet.  ``symmetric`` asserts invariance under swapping the
    two middle arguments (checked where the parameterization makes it
    decidable); ``uses_global`` says whether the single shared uniform enters,
    which is exactly when the sampled law fails to be dissociated.
    """

    family: str = ""
    symmetric: bool = False
    uses_global: bool = False

    @property
    def alphabet(self) -> Alphabet:
        raise NotImplementedError

    def evaluate(
        self,
        u_global: float,
        u_rows: np.ndarray,
        u_cols: np.ndarray,
        u_entries: np.ndarray,
    ) -> np.ndarray:
        """Entry values on the grid ``(u_rows[i], u_cols[j], u_entries[i, j])``."""
        raise NotImplementedError

    def params_config(self) -> dict:
        raise NotImplementedError

    def to_config(self) -> dict:
        cfg = {"family": self.family, "symmetric": self.symmetric}
        cfg.update(self.params_config())
        return cfg


@dataclass(frozen=True)
class Constant(RepresentingFunction):
    """Every entry equals a fixed alphabet value."""

    value: float | int = 0
    out_alphabet: Alphabet = Alphabet.finite(2)
    symmetric: bool = True
    uses_global: bool = False
    family = "constant"

    @property
    def alphabet(self) -> Alphabet:
        return self.out_alphabet

    def evaluate(self, u_global, u_rows, u_cols, u_entries):
        return np.full_like(u_entries, self.value, dtype=np.int64 if self.out_alphabet.is_finite else np.float64)

    def params_config(self) -> dict:
        from .io import alphabet_to_json

        return {"value": self.value, "alphabet": alphabet_to_json(self.out_alphabet)}


@dataclass(frozen=True)
class IidEntry(RepresentingFunction):
    """Entries i.i.d. from one entry law; ignores the row/column uniforms."""

    law: EntryLaw = EntryLaw.bernoulli(0.5)
    symmetric: bool = True
    uses_global: bool = False
    family = "iid_entry"

    @property
    def alphabet(self) -> Alphabet:
        return self.law.alphabet

    def evaluate(self, u_global, u_rows, u_cols, u_entries):
        return self.law.icdf(u_entries)

    def params_config(self) -> dict:
        return {"entry_law": self.law.to_config()}


@dataclass(frozen=True)
class Graphon(RepresentingFunction):
    """Step-function graphon: k equal blocks with per-block edge probability.

    Entry is the indicator ``U_ij < grid[block(U_i), block(U'_j)]``; symmetric
    when the grid matrix is.
    """

    grid: tuple[tuple[float, ...], ...] = ((0.5,),)
    symmetric: bool = True
    uses_global: bool = False
    family = "graphon"

    def __post_init__(self) -> None:
        grid = np.asarray(self.grid, dtype=np.float64)
        if grid.ndim != 2 or grid.shape[0] != grid.shape[1]:
            raise ConfigError("graphon grid must be a square matrix")
        if grid.min() < 0 or grid.max() > 1:
            raise ConfigError("graphon grid entries must be probabilities")
        if self.symmetric and not np.array_equal(grid, grid.T):
            raise ConfigError("symmetric graphon requires a symmetric grid")
        object.__setattr__(self, "grid", tuple(tuple(row) for row in grid.tolist()))

    @property
    def alphabet(self) -> Alphabet:
        return Alphabet.finite(2)

    def evaluate(self, u_global, u_rows, u_cols, u_entries):
        grid = np.asarray(self.grid)
        k = grid.shape[0]
        bi = np.minimum((u_rows * k).astype(np.int64), k - 1)
        bj = np.minimum((u_cols * k).astype(np.int64), k - 1)
        p = grid[bi[:, None], bj[None, :]]
        return (u_entries < p).astype(np.int64)

    def params_config(self) -> dict:
        return {"grid": [list(row) for row in self.grid]}


@dataclass(frozen=True)
class ThresholdProduct(RepresentingFunction):
    """Binary entry ``1{U_i * U'_j < theta}``; deterministic given the uniforms."""

    theta: float = 0.5
    symmetric: bool = True
    uses_global: bool = False
    family = "threshold_product"

    def __post_init__(self) -> None:
        if not 0.0 <= self.theta <= 1.0:
            raise ConfigError(f"theta must be in [0, 1], got {self.theta}")

    @property
    def alphabet(self) -> Alphabet:
        return Alphabet.finite(2)

    def evaluate(self, u_global, u_rows, u_cols, u_entries):
        return (u_rows[:, None] * u_cols[None, :] < self.theta).astype(np.int64)

    def params_config(self) -> dict:
        return {"theta": self.theta}


@dataclass(frozen=True)
class StepFunction(RepresentingFunction):
    """Piecewise-constant function on a box partition of the 4-d unit cube.

    ``breaks[a]`` is the ascending tuple of interior breakpoints on axis ``a``
    (global, row, column, entry); ``cells[g, r, c, e]`` is the output value on
    the corresponding box.  Step functions are dense enough among measurable
    representing functions for simulation purposes.
    """

    breaks: tuple[tuple[float, ...], ...] = ((), (), (), ())
    cells: tuple = ((((0,),),),)
    out_alphabet: Alphabet = Alphabet.finite(2)
    symmetric: bool = False
    uses_global: bool = False
    family = "step_function"

    def __post_init__(self) -> None:
        if len(self.breaks) != 4:
            raise ConfigError("step functions need breakpoints for 4 axes")
        breaks = tuple(tuple(float(b) for b in axis) for axis in self.breaks)
        for axis in breaks:
            if list(axis) != sorted(axis) or any(not 0.0 < b < 1.0 for b in axis):
                raise ConfigError("breakpoints must be ascending and interior to (0, 1)")
        cells = np.asarray(self.cells)
        expected = tuple(len(axis) + 1 for axis in breaks)
        if cells.shape != expected:
            raise ConfigError(f"cell grid shape {cells.shape} does not match breakpoints {expected}")
        if self.uses_global != (cells.shape[0] > 1):
            raise ConfigError("uses_global must match whether the global axis has more than one cell")
        if self.symmetric:
            same_axes = breaks[1] == breaks[2] and np.array_equal(cells, np.swapaxes(cells, 1, 2))
            if not same_axes:
                raise ConfigError("symmetric step functions need matching row/column axes and cells")
        object.__setattr__(self, "breaks", breaks)
        object.__setattr__(self, "cells", _freeze(cells))

    @property
    def alphabet(self) -> Alphabet:
        return self.out_alphabet

    def evaluate(self, u_global, u_rows, u_cols, u_entries):
        cells = np.asarray(self.cells)
        g = np.searchsorted(np.asarray(self.breaks[0]), u_global, side="right")
        r = np.searchsorted(np.asarray(self.breaks[1]), u_rows, side="right")
        c = np.searchsorted(np.asarray(self.breaks[2]), u_cols, side="right")
        e = np.searchsorted(np.asarray(self.breaks[3]), u_entries, side="right")
        values = cells[g, r[:, None], c[None, :], e]
        return values.astype(np.int64 if self.out_alphabet.is_finite else np.float64)

    def params_config(self) -> dict:
        from .io import alphabet_to_json

        return {
            "breaks": [list(axis) for axis in self.breaks],
            "cells": np.asarray(self.cells).tolist(),
            "uses_global": self.uses_global,
            "alphabet": alphabet_to_json(self.out_alphabet),
        }


@dataclass(frozen=True)
class HiddenTypeMixture(RepresentingFunction):
    """Hidden-type models, in two regimes selected by ``uses_global``.

    Without the global uniform: each row draws a type from ``type_probs`` via
    ``U_i`` (columns via ``U'_j``), and entry (i, j) is drawn from
    ``pair_laws[type_i][type_j]`` via ``U_ij``.  The law is dissociated: the
    types live on the indices, so disjoint blocks are independent.

    With the global uniform: ``U`` draws one component ``g`` from
    ``type_probs`` and every entry is i.i.d. from ``pair_laws[g][g]``.  This
    is a genuine mixture whose sub-array limits are random, one component per
    realization.
    """

    type_probs: tuple[float, ...] = (0.5, 0.5)
    pair_laws: tuple[tuple[EntryLaw, ...], ...] = (
        (EntryLaw.bernoulli(0.5), EntryLaw.bernoulli(0.5)),
        (EntryLaw.bernoulli(0.5), EntryLaw.bernoulli(0.5)),
    )
    symmetric: bool = False
    uses_global: bool = False
    family = "hidden_type_mixture"

    def __post_init__(self) -> None:
        probs = tuple(float(p) for p in self.type_probs)
        if min(probs) < 0 or abs(sum(probs) - 1.0) > _PROB_TOL:
            raise ConfigError("type_probs must be a probability vector")
        t = len(probs)
        laws = tuple(tuple(row) for row in self.pair_laws)
        if len(laws) != t or any(len(row) != t for row in laws):
            raise ConfigError("pair_laws must be a t-by-t grid matching type_probs")
        alphabets = {law.alphabet for row in laws for law in row}
        if len(alphabets) != 1:
            raise ConfigError("all pair laws must share one alphabet")
        if self.symmetric and any(laws[a][b] != laws[b][a] for a in range(t) for b in range(t)):
            raise ConfigError("symmetric mixtures need pair_laws[a][b] == pair_laws[b][a]")
        object.__setattr__(self, "type_probs", probs)
        object.__setattr__(self, "pair_laws", laws)

    @property
    def alphabet(self) -> Alphabet:
        return self.pair_laws[0][0].alphabet

    def evaluate(self, u_global, u_rows, u_cols, u_entries):
        cum = np.cumsum(self.type_probs)
        cum[-1] = 1.0
        if self.uses_global:
            g = int(np.searchsorted(cum, u_global, side="right"))
            return self.pair_laws[g][g].icdf(u_entries)
        ti = np.searchsorted(cum, u_rows, side="right")
        tj = np.searchsorted(cum, u_cols, side="right")
        if self.alphabet.is_finite:
            table = np.asarray(
                [[law.probs for law in row] for row in self.pair_laws], dtype=np.float64
            )
            cum3 = np.cumsum(table[ti[:, None], tj[None, :], :], axis=-1)
            cum3[..., -1] = 1.0
            return _categorical_grid(cum3, u_entries)
        return u_entries.astype(np.float64)

    def params_config(self) -> dict:
        return {
            "type_probs": list(self.type_probs),
            "pair_laws": [[law.to_config() for law in row] for row in self.pair_laws],
            "uses_global": self.uses_global,
        }


def _categorical_grid(cum3: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Per-entry inverse CDF lookup: first index with cumulative mass > u."""
    return np.sum(u[..., None] >= cum3, axis=-1).astype(np.int64).clip(0, cum3.shape[-1] - 1)


def _freeze(arr: np.ndarray):
    """Nested tuples from an ndarray, for frozen-dataclass storage."""
    if arr.ndim == 0:
        return arr.item()
    return tuple(_freeze(sub) for sub in arr)


_FAMILIES: dict[str, Callable[[dict], RepresentingFunction]] = {}


def _build_constant(cfg: dict) -> Constant:
    from .io import alphabet_from_json

    alphabet = alphabet_from_json(cfg.get("alphabet", {"kind": "finite", "size": 2}))
    return Constant(
        value=cfg["value"], out_alphabet=alphabet, symmetric=bool(cfg.get("symmetric", True))
    )


def _build_iid_entry(cfg: dict) -> IidEntry:
    return IidEntry(
        law=EntryLaw.from_config(cfg["entry_law"]), symmetric=bool(cfg.get("symmetric", True))
    )


def _build_graphon(cfg: dict) -> Graphon:
    return Graphon(
        grid=tuple(tuple(row) for row in cfg["grid"]), symmetric=bool(cfg.get("symmetric", True))
    )


def _build_threshold(cfg: dict) -> ThresholdProduct:
    return ThresholdProduct(theta=float(cfg["theta"]), symmetric=bool(cfg.get("symmetric", True)))


def _build_step(cfg: dict) -> StepFunction:
    from .io import alphabet_from_json

    alphabet = alphabet_from_json(cfg.get("alphabet", {"kind": "finite", "size": 2}))
    cells = np.asarray(cfg["cells"])
    return StepFunction(
        breaks=tuple(tuple(axis) for axis in cfg["breaks"]),
        cells=_freeze(cells),
        out_alphabet=alphabet,
        symmetric=bool(cfg.get("symmetric", False)),
        uses_global=bool(cfg.get("uses_global", cells.shape[0] > 1)),
    )


def _build_mixture(cfg: dict) -> HiddenTypeMixture:
    return HiddenTypeMixture(
        type_probs=tuple(cfg["type_probs"]),
        pair_laws=tuple(
            tuple(EntryLaw.from_config(law) for law in row) for row in cfg["pair_laws"]
        ),
        symmetric=bool(cfg.get("symmetric", False)),
        uses_global=bool(cfg.get("uses_global", False)),
    )


_FAMILIES.update(
    {
        "constant": _build_constant,
        "iid_entry": _build_iid_entry,
        "graphon": _build_graphon,
        "threshold_product": _build_threshold,
        "step_function": _build_step,
        "hidden_type_mixture": _build_mixture,
    }
)


def function_from_config(cfg: dict) -> RepresentingFunction:
    """Build a representing function from its JSON-compatible config."""
    family = cfg.get("family")
    if family not in _FAMILIES:
        raise ConfigError(f"unknown representing-function family {family!r}")
    try:
        return _FAMILIES[family](cfg)
    except KeyError as exc:
        raise ConfigError(f"config for family {family!r} is missing key {exc}") from exc


def sample_exchangeable(f: RepresentingFunction, m: int, seed: Seed) -> FiniteArray:
    """Draw the m-by-m truncation of the exchangeable array represented by f.

    The global, row, column, and entry uniforms come from four named
    substreams of the seed, so the result is deterministic in (f, m, seed).
    When f ignores the global uniform the law is dissociated.
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    u_global = float(substream(seed, "global").random()) if f.uses_global else 0.0
    u_rows = substream(seed, "rows").random(m)
    u_cols = substream(seed, "cols").random(m)
    u_entries = substream(seed, "entries").random((m, m))
    values = f.evaluate(u_global, u_rows, u_cols, u_entries)
    return FiniteArray(values, f.alphabet)


def sample_weakly_exchangeable(
    f: RepresentingFunction, m: int, seed: Seed, zero_diagonal: bool = False
) -> FiniteArray:
    """Symmetric variant: one shared row/column family, symmetric noise.

    Requires a function that is symmetric in its two middle arguments; with
    ``zero_diagonal`` the diagonal is forced to symbol 0 (graph convention).
    """
    if not f.symmetric:
        raise ValueError("weakly exchangeable sampling needs a symmetric representing function")
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    u_global = float(substream(seed, "global").random()) if f.uses_global else 0.0
    u_rows = substream(seed, "rows").random(m)
    raw = substream(seed, "entries").random((m, m))
    upper = np.triu(raw)
    u_entries = upper + np.triu(raw, 1).T
    values = f.evaluate(u_global, u_rows, u_rows, u_entries)
    values = np.asarray(values).copy()
    # Symmetric f on symmetric inputs is symmetric up to evaluation order;
    # mirror the upper triangle so the output is exactly symmetric.
    values[np.tril_indices(m, -1)] = values.T[np.tril_indices(m, -1)]
    if zero_diagonal:
        np.fill_diagonal(values, 0)
    return FiniteArray(values, f.alphabet, symmetric=True, zero_diagonal=zero_diagonal)


def counterexample_edge_probs(xi: np.ndarray) -> np.ndarray:
    """Pairwise edge probabilities from hidden 0/1 vertex types.

    Both endpoints type 0 gives 1/4, mixed gives 1/2, both type 1 gives 3/4;
    equivalently ``(1 + xi_i + xi_j) / 4``.
    """
    xi = np.asarray(xi)
    return 0.25 * (1.0 + xi[..., :, None] + xi[..., None, :])


def _counterexample_batch(m: int, runs: int, seed: Seed) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized initial graphs for the hidden-majority dynamics.

    Returns ``(states, types)`` with shapes (runs, m, m) and (runs, m).
    """
    xi = (substream(seed, "xi").random((runs, m)) < 0.5).astype(np.int64)
    p = counterexample_edge_probs(xi)
    raw = substream(seed, "edges").random((runs, m, m))
    iu = np.triu_indices(m, 1)
    u = np.zeros_like(raw)
    u[:, iu[0], iu[1]] = raw[:, iu[0], iu[1]]
    u[:, iu[1], iu[0]] = raw[:, iu[0], iu[1]]
    values = (u < p).astype(np.int64)
    values[:, np.arange(m), np.arange(m)] = 0
    return values, xi


def sample_counterexample_initial(m: int, seed: Seed) -> tuple[FiniteArray, np.ndarray]:
    """Stationary initial graph of the hidden-majority dynamics.

    Hidden types are i.i.d. fair bits; edges are drawn independently with the
    1/4 / 1/2 / 3/4 probabilities determined by the endpoint types.  Returns
    the symmetric zero-diagonal graph and the latent type vector.
    """
    if m < 2:
        raise ValueError(f"m must be >= 2, got {m}")
    values, xi = _counterexample_batch(m, 1, seed)
    graph = FiniteArray(values[0], Alphabet.finite(2), symmetric=True, zero_diagonal=True)
    return graph, xi[0]


def sample_from_config(cfg: dict, m: int, seed: Seed) -> tuple[FiniteArray, np.ndarray | None]:
    """Sample an array from a config: a function family or a named initial law.

    Returns ``(array, latent_types)`` where the latent vector is None except
    for the hidden-majority initial law.  Config key ``"sampling"`` chooses
    ``"exchangeable"`` (default) or ``"weak"`` (symmetric; honors
    ``"zero_diagonal"``).
    """
    family = cfg.get("family")
    if family == "counterexample_initial":
        graph, xi = sample_counterexample_initial(m, seed)
        return graph, xi
    f = function_from_config(cfg)
    mode = cfg.get("sampling", "exchangeable")
    if mode == "weak":
        return (
            sample_weakly_exchangeable(f, m, seed, zero_diagonal=bool(cfg.get("zero_diagonal", False))),
            None,
        )
    if mode != "exchangeable":
        raise ConfigError(f"unknown sampling mode {mode!r}")
    return sample_exchangeable(f, m, seed), None

"""Markov dynamics on array truncations, in discrete and continuous time.

Kernels form a closed, serializable family.  Each one acts on a batch of
states at once (shape ``(runs, m, m)``), which keeps Monte Carlo ensembles
fast; single-state stepping is the batch of one.  Refreshes respect the
structural flags of the state: on symmetric arrays an edge {i, j} is redrawn
once and mirrored, and a zero diagonal stays zero.

The hidden-majority kernel is the one non-local family: vertex types drive
edge refreshes, but the types are recoverable only from whole rows.  In
``latent`` mode the types are carried as simulator state (the faithful finite
realization, where a type is almost surely reproduced by the row-mean rule on
the infinite array); in ``estimate`` mode they are recomputed from the current
truncation each step, making the kernel a genuine, non-local function of the
finite state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .arrays import Alphabet, FiniteArray
from .errors import ConfigError
from .rng import Seed, substream
from .sampler import EntryLaw, counterexample_edge_probs


@dataclass(frozen=True)
class HiddenState:
    """Latent 0/1 vertex types accompanying a hidden-majority state."""

    xi: np.ndarray

    def __post_init__(self) -> None:
        xi = np.ascontiguousarray(self.xi, dtype=np.int64)
        if xi.ndim != 1 or not np.isin(xi, (0, 1)).all():
            raise ValueError("hidden types must be a 1-d 0/1 vector")
        xi.setflags(write=False)
        object.__setattr__(self, "xi", xi)


@dataclass(frozen=True)
class GroundTruthEvent:
    """A simulator event: what fired and which entries it touched.

    ``affected`` lists the refreshed cells; the state diff across the event is
    always a subset of it (a redraw can reproduce the old value).
    """

    time: float
    kind: str  # "global" | "row" | "column" | "entry"
    index: int | tuple[int, int] | None
    affected: tuple[tuple[int, int], ...]


@dataclass
class Trajectory:
    """Time-ordered state snapshots, with the event log when one exists.

    Continuous-time paths are right-continuous step functions: the state at an
    event time is the post-jump value, and the pre-jump state is the previous
    snapshot.  Discrete time uses times 0, 1, 2, ...
    """

    times: list[float]
    states: list[FiniteArray]
    event_log: list[GroundTruthEvent] | None = None

    def __post_init__(self) -> None:
        if len(self.times) != len(self.states):
            raise ValueError("times and states must have equal length")
        if any(t1 >= t2 for t1, t2 in zip(self.times, self.times[1:])):
            raise ValueError("times must be strictly increasing")
        sides = {s.side for s in self.states}
        alphabets = {s.alphabet for s in self.states}
        if len(sides) > 1 or len(alphabets) > 1:
            raise ValueError("all states must share side and alphabet")

    @property
    def side(self) -> int:
        return self.states[0].side

    def diff_entries(self, t_index: int) -> np.ndarray:
        """Index pairs where states t_index-1 and t_index differ, shape (d, 2)."""
        if not 1 <= t_index < len(self.states):
            raise ValueError(f"t_index must be in [1, {len(self.states) - 1}], got {t_index}")
        a = self.states[t_index - 1].values
        b = self.states[t_index].values
        return np.argwhere(a != b)


def _symmetrize_uniforms(raw: np.ndarray) -> np.ndarray:
    """Mirror the strict upper triangle onto the lower one, batchwise."""
    m = raw.shape[-1]
    iu = np.triu_indices(m, 1)
    out = raw.copy()
    out[..., iu[1], iu[0]] = raw[..., iu[0], iu[1]]
    return out


def _draw_entries(
    law: EntryLaw,
    rng: np.random.Generator,
    shape: tuple[int, ...],
    symmetric: bool,
    zero_diagonal: bool,
) -> np.ndarray:
    u = rng.random(shape)
    if symmetric:
        u = _symmetrize_uniforms(u)
    values = law.icdf(u)
    if zero_diagonal:
        m = shape[-1]
        values[..., np.arange(m), np.arange(m)] = 0
    return values


class TransitionKernel:
    """Base one-step (or clock-driven) random map on array states."""

    family: str = ""
    time_mode: str = "discrete"

    def alphabet(self, state_alphabet: Alphabet) -> Alphabet:
        return state_alphabet

    def step_batch(
        self,
        states: np.ndarray,
        aux: np.ndarray | None,
        rng: np.random.Generator,
        symmetric: bool,
        zero_diagonal: bool,
    ) -> np.ndarray:
        raise NotImplementedError

    def params_config(self) -> dict:
        raise NotImplementedError

    def to_config(self) -> dict:
        cfg = {"family": self.family, "time_mode": self.time_mode}
        cfg.update(self.params_config())
        return cfg


@dataclass(frozen=True)
class IidRefresh(TransitionKernel):
    """Every entry (edge, on symmetric states) is redrawn independently."""

    law: EntryLaw = EntryLaw.bernoulli(0.5)
    family = "iid_refresh"
    time_mode = "discrete"

    def step_batch(self, states, aux, rng, symmetric, zero_diagonal):
        return _draw_entries(self.law, rng, states.shape, symmetric, zero_diagonal)

    def params_config(self) -> dict:
        return {"entry_law": self.law.to_config()}


@dataclass(frozen=True)
class GlobalRefresh(TransitionKernel):
    """With probability ``prob`` per step, redraw the whole array i.i.d."""

    prob: float = 0.5
    law: EntryLaw = EntryLaw.bernoulli(0.5)
    family = "global_refresh"
    time_mode = "discrete"

    def __post_init__(self) -> None:
        if not 0.0 <= self.prob <= 1.0:
            raise ConfigError(f"refresh probability must be in [0, 1], got {self.prob}")

    def step_batch(self, states, aux, rng, symmetric, zero_diagonal):
        runs = states.shape[0]
        fire = rng.random(runs) < self.prob
        out = states.copy()
        if fire.any():
            fresh = _draw_entries(
                self.law, rng, (int(fire.sum()),) + states.shape[1:], symmetric, zero_diagonal
            )
            out[fire] = fresh
        return out

    def params_config(self) -> dict:
        return {"prob": self.prob, "refresh_law": self.law.to_config()}


@dataclass(frozen=True)
class HiddenMajority(TransitionKernel):
    """Hidden-type edge dynamics: type-(0,0) edges freeze, the rest refresh.

    Types are 0/1 per vertex.  An edge with both endpoints of type 0 never
    changes; any other edge is redrawn as Bernoulli((1 + xi_i + xi_j) / 4),
    independently of everything else.  ``mode`` selects where the types come
    from: ``"exact"`` uses the carried latent vector, ``"estimate"`` recomputes
    them from current row means with a strict > 1/2 majority (a row mean of
    exactly 1/2 maps to type 0).
    """

    mode: str = "exact"
    family = "hidden_majority"
    time_mode = "discrete"

    def __post_init__(self) -> None:
        if self.mode not in ("exact", "estimate"):
            raise ConfigError(f"hidden-majority mode must be 'exact' or 'estimate', got {self.mode!r}")

    def step_batch(self, states, aux, rng, symmetric, zero_diagonal):
        if not symmetric or not zero_diagonal:
            raise ValueError("hidden-majority dynamics need symmetric zero-diagonal binary states")
        if self.mode == "exact":
            if aux is None:
                raise ValueError("exact (latent) mode needs the hidden type vector")
            xi = np.broadcast_to(np.asarray(aux, dtype=np.int64), states.shape[:-1])
        else:
            xi = (states.mean(axis=-1) > 0.5).astype(np.int64)
        p = counterexample_edge_probs(xi)
        frozen = (xi[..., :, None] == 0) & (xi[..., None, :] == 0)
        u = _symmetrize_uniforms(rng.random(states.shape))
        redrawn = (u < p).astype(np.int64)
        out = np.where(frozen, states, redrawn)
        m = states.shape[-1]
        out[..., np.arange(m), np.arange(m)] = 0
        return out

    def params_config(self) -> dict:
        return {"mode": self.mode}


@dataclass(frozen=True)
class RowColumnEntryClocks(TransitionKernel):
    """Continuous-time layered refreshes: global, per-row, per-column, per-entry.

    Independent exponential clocks fire at rates ``lam_global`` (redraw all
    m*m entries), ``lam_row`` per row, ``lam_col`` per column, and
    ``lam_entry`` per entry; each firing redraws the affected cells i.i.d.
    from the refresh law.  The three layers realize jumps that touch a
    positive fraction of entries, a single row or column, and a single entry.
    """

    lam_global: float = 0.0
    lam_row: float = 0.0
    lam_col: float = 0.0
    lam_entry: float = 0.0
    law: EntryLaw = EntryLaw.bernoulli(0.5)
    family = "row_column_entry_clocks"
    time_mode = "continuous"

    def __post_init__(self) -> None:
        rates = (self.lam_global, self.lam_row, self.lam_col, self.lam_entry)
        if any(r < 0 for r in rates):
            raise ConfigError("rates must be nonnegative")
        if all(r == 0 for r in rates):
            raise ConfigError("at least one rate must be positive")

    def total_rate(self, m: int) -> float:
        return self.lam_global + m * self.lam_row + m * self.lam_col + m * m * self.lam_entry

    def params_config(self) -> dict:
        return {
            "lambda_global": self.lam_global,
            "lambda_row": self.lam_row,
            "lambda_col": self.lam_col,
            "lambda_entry": self.lam_entry,
            "refresh_law": self.law.to_config(),
        }


def kernel_from_config(cfg: dict) -> TransitionKernel:
    family = cfg.get("family")
    try:
        if family == "iid_refresh":
            return IidRefresh(law=EntryLaw.from_config(cfg["entry_law"]))
        if family == "global_refresh":
            law = EntryLaw.from_config(cfg["refresh_law"])
            if "rate" in cfg:
                # continuous-time form: one global clock, nothing else fires
                return RowColumnEntryClocks(lam_global=float(cfg["rate"]), law=law)
            return GlobalRefresh(prob=float(cfg["prob"]), law=law)
        if family == "hidden_majority":
            return HiddenMajority(mode=cfg.get("mode", "exact"))
        if family == "row_column_entry_clocks":
            return RowColumnEntryClocks(
                lam_global=float(cfg.get("lambda_global", 0.0)),
                lam_row=float(cfg.get("lambda_row", 0.0)),
                lam_col=float(cfg.get("lambda_col", 0.0)),
                lam_entry=float(cfg.get("lambda_entry", 0.0)),
                law=EntryLaw.from_config(cfg["refresh_law"]),
            )
    except KeyError as exc:
        raise ConfigError(f"kernel config for {family!r} is missing key {exc}") from exc
    raise ConfigError(f"unknown kernel family {family!r}")


def _check_state_for_kernel(kernel: TransitionKernel, state: FiniteArray) -> None:
    if isinstance(kernel, HiddenMajority):
        if not (state.symmetric and state.zero_diagonal and state.alphabet == Alphabet.finite(2)):
            raise ValueError("hidden-majority dynamics need a symmetric zero-diagonal binary state")


def step_discrete(
    kernel: TransitionKernel,
    state: FiniteArray,
    rng: np.random.Generator,
    aux: HiddenState | None = None,
) -> FiniteArray:
    """One discrete-time transition, drawing randomness from ``rng``."""
    if kernel.time_mode != "discrete":
        raise ValueError(f"kernel {kernel.family!r} is not a discrete-time kernel")
    _check_state_for_kernel(kernel, state)
    batch = kernel.step_batch(
        state.values[None, :, :],
        None if aux is None else aux.xi,
        rng,
        state.symmetric,
        state.zero_diagonal,
    )
    return FiniteArray(
        batch[0],
        kernel.alphabet(state.alphabet),
        symmetric=state.symmetric,
        zero_diagonal=state.zero_diagonal,
    )


def simulate_discrete(
    kernel: TransitionKernel,
    init: FiniteArray,
    T: int,
    seed: Seed,
    aux: HiddenState | None = None,
) -> Trajectory:
    """Iterate the kernel T times from ``init``; T+1 snapshots, deterministic."""
    if T < 0:
        raise ValueError(f"T must be >= 0, got {T}")
    rng = substream(seed, "discrete")
    states = [init]
    current = init
    for _ in range(T):
        current = step_discrete(kernel, current, rng, aux=aux)
        states.append(current)
    return Trajectory(times=[float(t) for t in range(T + 1)], states=states)


def simulate_discrete_batch(
    kernel: TransitionKernel,
    init_values: np.ndarray,
    T: int,
    rng: np.random.Generator,
    aux: np.ndarray | None = None,
    symmetric: bool = False,
    zero_diagonal: bool = False,
) -> np.ndarray:
    """Final states of ``runs`` independent chains stepped T times.

    ``init_values`` has shape (runs, m, m) or (m, m) (then broadcast); the
    trajectory bodies are not retained.
    """
    states = np.array(init_values)
    if states.ndim == 2:
        states = states[None, :, :]
    for _ in range(T):
        states = kernel.step_batch(states, aux, rng, symmetric, zero_diagonal)
    return states


def simulate_ctmc(
    kernel: RowColumnEntryClocks,
    init: FiniteArray,
    t_max: float,
    seed: Seed,
) -> Trajectory:
    """Event-driven continuous-time simulation up to ``t_max``.

    The superposition of all clocks fires at the total rate; each event picks
    its layer and index proportionally to the rates, redraws the affected
    cells, and is logged with its ground-truth kind.  Snapshots are stored at
    time 0 and at every event time (post-jump values); between events the
    path is constant.
    """
    if not isinstance(kernel, RowColumnEntryClocks):
        raise ValueError("continuous-time simulation needs a clock-layer kernel")
    if t_max <= 0:
        raise ValueError(f"t_max must be positive, got {t_max}")
    m = init.side
    if m < 2:
        raise ValueError("need array side >= 2")
    if init.alphabet != kernel.law.alphabet:
        raise ValueError("initial state and refresh law must share an alphabet")
    total = kernel.total_rate(m)
    weights = np.array(
        [kernel.lam_global, m * kernel.lam_row, m * kernel.lam_col, m * m * kernel.lam_entry]
    )
    cum = np.cumsum(weights / total)
    cum[-1] = 1.0
    rng = substream(seed, "ctmc")
    t = 0.0
    state = init.values.copy()
    times = [0.0]
    states = [init]
    events: list[GroundTruthEvent] = []
    all_cells = tuple((i, j) for i in range(m) for j in range(m))
    while True:
        dt = rng.exponential(1.0 / total)
        while dt == 0.0:  # zero waits would break strict time ordering
            dt = rng.exponential(1.0 / total)
        t += dt
        if t > t_max:
            break
        layer = int(np.searchsorted(cum, rng.random(), side="right"))
        if layer == 0:
            kind, index = "global", None
            affected = all_cells
            state = kernel.law.sample(rng, (m, m))
        elif layer == 1:
            i = int(rng.integers(m))
            kind, index = "row", i
            affected = tuple((i, j) for j in range(m))
            state = state.copy()
            state[i, :] = kernel.law.sample(rng, (m,))
        elif layer == 2:
            j = int(rng.integers(m))
            kind, index = "column", j
            affected = tuple((i, j) for i in range(m))
            state = state.copy()
            state[:, j] = kernel.law.sample(rng, (m,))
        else:
            i = int(rng.integers(m))
            j = int(rng.integers(m))
            kind, index = "entry", (i, j)
            affected = ((i, j),)
            state = state.copy()
            state[i, j] = kernel.law.sample(rng, ())
        events.append(GroundTruthEvent(time=t, kind=kind, index=index, affected=affected))
        times.append(t)
        states.append(FiniteArray(state, kernel.law.alphabet))
    return Trajectory(times=times, states=states, event_log=events)


def hidden_types(
    x: FiniteArray, mode: str = "estimate", latent: HiddenState | None = None
) -> HiddenState:
    """Vertex types of a symmetric binary state.

    ``"exact"`` returns the carried latent vector unchanged.  ``"estimate"``
    is the finite-truncation majority rule: type 1 iff the row mean (over all
    m columns, diagonal included) strictly exceeds 1/2.
    """
    if mode == "exact":
        if latent is None:
            raise ValueError("exact mode needs the latent type vector")
        return latent
    if mode != "estimate":
        raise ValueError(f"mode must be 'exact' or 'estimate', got {mode!r}")
    if not x.symmetric or x.alphabet != Alphabet.finite(2):
        raise ValueError("type estimation needs a symmetric binary array")
    xi = (x.values.mean(axis=1) > 0.5).astype(np.int64)
    return HiddenState(xi)

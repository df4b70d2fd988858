"""Jump classification, kernel disintegration, and statistical tests.

Everything here consumes trajectories or arrays produced elsewhere and is a
pure function of (inputs, seed).  The tests are finite-scale surrogates: they
compare Monte Carlo laws at fixed truncation sizes against noise bands, and
report statistics rather than asserting asymptotic statements.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .arrays import (
    Alphabet,
    EmpiricalMeasure,
    FiniteArray,
    PermutationPair,
    apply_permutation,
    tv_distance,
)
from .dynamics import (
    HiddenMajority,
    HiddenState,
    Trajectory,
    TransitionKernel,
    _check_state_for_kernel,
    simulate_discrete_batch,
)
from .errors import InsufficientDataError
from .limits import empirical_subarray_exact, empirical_subarray_mc
from .parallel import run_units, unit_sizes
from .rng import Seed, derive_seed, substream

DEFAULT_THETA_GLOBAL = 0.05


@dataclass(frozen=True)
class JumpEvent:
    """One observed jump: when, which entries changed, and its class.

    Classes: ``global`` (a large fraction of entries, spanning several rows
    and columns), ``row``/``column`` (at least two changes, all in one line),
    ``single`` (exactly one entry), and ``sparse`` for multi-entry diffs that
    fit none of these.  The sparse class absorbs what finite truncations
    cannot attribute: at fixed m a handful of scattered changes is
    indistinguishable from the vanishing-proportion regime.
    """

    time: float
    changed: tuple[tuple[int, int], ...]
    label: str  # "global" | "row" | "column" | "single" | "sparse"
    index: int | tuple[int, int] | None = None


def _classify_diff(diff: np.ndarray, m: int, theta_global: float) -> tuple[str, object]:
    rows = np.unique(diff[:, 0])
    cols = np.unique(diff[:, 1])
    if diff.shape[0] == 1:
        return "single", (int(diff[0, 0]), int(diff[0, 1]))
    if rows.size == 1:
        return "row", int(rows[0])
    if cols.size == 1:
        return "column", int(cols[0])
    if diff.shape[0] >= theta_global * m * m and rows.size >= 2 and cols.size >= 2:
        return "global", None
    return "sparse", None


def classify_jumps(traj: Trajectory, theta_global: float = DEFAULT_THETA_GLOBAL) -> list[JumpEvent]:
    """Classify every nonempty diff between consecutive snapshots.

    The classes partition the diffs: exactly one label applies to each.
    Consecutive identical states yield no event.
    """
    if len(traj.states) < 2:
        raise ValueError("trajectory needs at least 2 states")
    if not 0.0 < theta_global < 1.0:
        raise ValueError(f"theta_global must be in (0, 1), got {theta_global}")
    m = traj.side
    events: list[JumpEvent] = []
    for t_index in range(1, len(traj.states)):
        diff = traj.diff_entries(t_index)
        if diff.shape[0] == 0:
            continue
        label, index = _classify_diff(diff, m, theta_global)
        events.append(
            JumpEvent(
                time=traj.times[t_index],
                changed=tuple((int(i), int(j)) for i, j in diff),
                label=label,
                index=index,
            )
        )
    return events


def jump_proportion(traj: Trajectory, t_index: int) -> float:
    """Fraction of entries that changed between snapshots t_index-1 and t_index."""
    m = traj.side
    return traj.diff_entries(t_index).shape[0] / (m * m)


@dataclass(frozen=True)
class KernelEstimate:
    """One-step pattern kernel obtained by disintegrating the paired measure.

    ``rows[y1][y2]`` is the estimated probability of seeing pattern ``y2`` at
    time t given ``y1`` at time t-1; rows exist only for patterns with
    positive mass at time t-1, and absent rows are the identity by convention.
    """

    n: int
    alphabet: Alphabet
    rows: dict[FiniteArray, dict[FiniteArray, Fraction | float]]

    def row(self, y1: FiniteArray) -> dict[FiniteArray, Fraction | float]:
        if y1 in self.rows:
            return dict(self.rows[y1])
        return {y1: 1}


def estimate_kernel_qn(
    trajectories: list[Trajectory],
    t: int,
    n: int,
    mode: str = "exact",
    K: int = 10_000,
    seed: Seed = 0,
) -> KernelEstimate:
    """Disintegrate the paired sub-array measure of (X(t-1), X(t)).

    Entries of the two consecutive states are paired into a single array over
    the product alphabet, its sub-array distribution is computed per
    trajectory and pooled with equal weights over the ensemble, and each
    time-(t-1) pattern row is normalized by its marginal mass.  Pooling over
    independent runs is what makes the estimate a population quantity; the
    result is generally NOT the transition law of the restricted process.
    """
    if not trajectories:
        raise InsufficientDataError("empty trajectory ensemble", {"trajectories": 0})
    if t < 1:
        raise ValueError(f"t must be >= 1, got {t}")
    alphabet = trajectories[0].states[0].alphabet
    if not alphabet.is_finite:
        raise ValueError("kernel disintegration supports finite alphabets only")
    k = alphabet.size
    paired_alphabet = Alphabet.finite(k * k)
    pooled: dict[FiniteArray, Fraction | float] = {}
    share = Fraction(1, len(trajectories))
    for run_index, traj in enumerate(trajectories):
        if t >= len(traj.states):
            raise ValueError(f"trajectory {run_index} has no state at time {t}")
        before = traj.states[t - 1]
        after = traj.states[t]
        paired = FiniteArray(
            before.values * k + after.values,
            paired_alphabet,
            symmetric=before.symmetric and after.symmetric,
            zero_diagonal=False,
        )
        if mode == "exact":
            mu = empirical_subarray_exact(paired, n)
        else:
            mu = empirical_subarray_mc(paired, n, K, derive_seed(seed, "qn", run_index))
        for pattern, w in mu.weights.items():
            add = share * w if mode == "exact" else float(share) * w
            pooled[pattern] = pooled.get(pattern, 0) + add
    rows: dict[FiniteArray, dict[FiniteArray, Fraction | float]] = {}
    marginals: dict[FiniteArray, Fraction | float] = {}
    split: dict[FiniteArray, dict[FiniteArray, Fraction | float]] = {}
    for pattern, w in pooled.items():
        y1 = FiniteArray(pattern.values // k, alphabet)
        y2 = FiniteArray(pattern.values % k, alphabet)
        marginals[y1] = marginals.get(y1, 0) + w
        split.setdefault(y1, {})
        split[y1][y2] = split[y1].get(y2, 0) + w
    for y1, targets in split.items():
        mass = marginals[y1]
        rows[y1] = {y2: w / mass for y2, w in targets.items()}
    return KernelEstimate(n=n, alphabet=alphabet, rows=rows)


@dataclass(frozen=True)
class MarkovTestReport:
    """Monte Carlo comparison of one-step vs whole-history conditioning.

    ``one_step`` estimates P(edge at t+1 | edge at t) in stationarity;
    ``history`` estimates P(edge at N | edge at every 0 < t < N).  Half-widths
    are 4-sigma binomial.  For a Markov restriction the two agree as N grows;
    a persistent separation falsifies the Markov property of the restriction.
    """

    one_step: float
    history: float
    one_step_halfwidth: float
    history_halfwidth: float
    runs: int
    one_step_conditioning: int
    history_conditioning: int
    N: int
    m: int

    def to_json(self) -> dict:
        return {
            "one_step": self.one_step,
            "history": self.history,
            "ci": {"one_step": self.one_step_halfwidth, "history": self.history_halfwidth},
            "counts": {
                "runs": self.runs,
                "one_step_conditioning": self.one_step_conditioning,
                "history_conditioning": self.history_conditioning,
            },
            "params": {"N": self.N, "m": self.m},
        }


def _binomial_halfwidth(successes: int, trials: int) -> float:
    p = successes / trials
    return 4.0 * math.sqrt(max(p * (1.0 - p), 1.0 / trials) / trials)


def markov_test(
    m: int, N: int, R: int, seed: Seed, kernel: HiddenMajority | None = None
) -> MarkovTestReport:
    """Estimate the two conditional edge probabilities of the hidden-type chain.

    Runs R independent stationary realizations of the hidden-type dynamics
    for N steps and conditions the (0, 1) edge on (a) being present at the
    previous step and (b) being present at every earlier positive time.

    Under exact latent types, edges evolve independently given the endpoint
    types, so the (0, 1) edge together with its two latent types is an exact
    marginal of the full m-by-m chain; the test simulates that marginal, which
    makes R = 10^6 runs cheap.  The equivalence against the full-array
    simulator is covered by tests.
    """
    if kernel is None:
        kernel = HiddenMajority(mode="exact")
    if kernel.mode != "exact":
        raise ValueError("the history test is defined for exact latent types")
    if m < 2 or N < 2 or R < 1:
        raise ValueError("need m >= 2, N >= 2, R >= 1")
    rng = substream(seed, "markov-test")
    xi = (rng.random((R, 2)) < 0.5).astype(np.int64)
    p = 0.25 * (1.0 + xi[:, 0] + xi[:, 1])
    frozen = (xi[:, 0] == 0) & (xi[:, 1] == 0)
    edge = rng.random(R) < p
    at_1 = np.zeros(R, dtype=bool)
    at_2 = np.zeros(R, dtype=bool)
    history_ok = np.ones(R, dtype=bool)
    for t in range(1, N + 1):
        edge = np.where(frozen, edge, rng.random(R) < p)
        if t == 1:
            at_1 = edge.copy()
        if t == 2:
            at_2 = edge.copy()
        if t <= N - 1:
            history_ok &= edge
    final = edge
    n_one = int(at_1.sum())
    n_hist = int(history_ok.sum())
    if n_one == 0 or n_hist == 0:
        raise InsufficientDataError(
            "no conditioning events", {"runs": R, "one_step": n_one, "history": n_hist}
        )
    k_one = int((at_1 & at_2).sum())
    k_hist = int((history_ok & final).sum())
    return MarkovTestReport(
        one_step=k_one / n_one,
        history=k_hist / n_hist,
        one_step_halfwidth=_binomial_halfwidth(k_one, n_one),
        history_halfwidth=_binomial_halfwidth(k_hist, n_hist),
        runs=R,
        one_step_conditioning=n_one,
        history_conditioning=n_hist,
        N=N,
        m=m,
    )


def mc_noise_band(n_patterns: int, R: int) -> float:
    """Reference band 4 * sqrt(#patterns / R) for tv between two MC laws."""
    return 4.0 * math.sqrt(n_patterns / R)


def _corner_counts(states: np.ndarray, n: int) -> dict[bytes, int]:
    """Counts of top-left n-by-n corners over a batch, keyed by raw bytes."""
    runs = states.shape[0]
    corners = np.ascontiguousarray(states[:, :n, :n].reshape(runs, n * n), dtype=np.int64)
    rows, counts = np.unique(corners, axis=0, return_counts=True)
    return {row.tobytes(): int(c) for row, c in zip(rows, counts)}


def _counts_to_law(counts: dict[bytes, int], n: int, alphabet: Alphabet, total: int) -> EmpiricalMeasure:
    weights = {
        FiniteArray(np.frombuffer(key, dtype=np.int64).reshape(n, n), alphabet): c / total
        for key, c in counts.items()
    }
    return EmpiricalMeasure(n, alphabet, weights)


def locality_test(
    kernel: TransitionKernel,
    n: int,
    x: FiniteArray,
    x_alt: FiniteArray,
    T: int,
    R: int,
    seed: Seed,
    aux: HiddenState | None = None,
    aux_alt: HiddenState | None = None,
    units: int = 8,
    threads: int = 1,
) -> float:
    """tv distance between restricted time-T laws from two agreeing starts.

    The starts must coincide on the top-left n-by-n corner.  A kernel whose
    action on n-by-n observables depends only on the n-by-n restriction gives
    a distance within Monte Carlo noise; a clearly positive distance exhibits
    non-locality, hence a restriction that is not Markov in its own
    filtration.

    The R runs per start are partitioned into ``units`` independently seeded
    blocks reduced in order, so the result does not depend on ``threads``.
    """
    if x.side != x_alt.side or x.alphabet != x_alt.alphabet:
        raise ValueError("the two starts must share side and alphabet")
    if not x.alphabet.is_finite:
        raise ValueError("the restricted-law comparison supports finite alphabets only")
    if not np.array_equal(x.values[:n, :n], x_alt.values[:n, :n]):
        raise ValueError("the two starts must agree on the restricted corner")
    if T < 1 or R < 1:
        raise ValueError("need T >= 1 and R >= 1")
    _check_state_for_kernel(kernel, x)
    _check_state_for_kernel(kernel, x_alt)
    sizes = unit_sizes(R, units)
    laws = []
    for tag, start, latent in (("a", x, aux), ("b", x_alt, aux_alt)):

        def worker(u: int, start=start, latent=latent, tag=tag) -> dict[bytes, int]:
            if sizes[u] == 0:
                return {}
            rng = substream(seed, "locality", tag, u)
            init = np.broadcast_to(start.values, (sizes[u],) + start.values.shape)
            finals = simulate_discrete_batch(
                kernel,
                init,
                T,
                rng,
                aux=None if latent is None else latent.xi,
                symmetric=start.symmetric,
                zero_diagonal=start.zero_diagonal,
            )
            return _corner_counts(finals, n)

        merged: dict[bytes, int] = {}
        for part in run_units(worker, units, threads):
            for key, c in part.items():
                merged[key] = merged.get(key, 0) + c
        laws.append(_counts_to_law(merged, n, x.alphabet, R))
    return tv_distance(laws[0], laws[1])


@dataclass(frozen=True)
class ExchangeabilityReport:
    statistic: float
    null_band: float
    variant: str


def exchangeability_test(
    y: FiniteArray,
    n: int,
    P_count: int,
    seed: Seed,
    variant: str = "row-dispersion",
    K: int = 20_000,
    n_boot: int = 200,
) -> ExchangeabilityReport:
    """Probe invariance of a single array under index relabelling.

    Variants:

    - ``"row-dispersion"`` (default): the statistic is the standard deviation
      of row means, compared against its 99th percentile under a bootstrap
      that shuffles all entries uniformly (the fully scrambled null with the
      same entry pool).  This is the variant with actual power on one array.
    - ``"subarray-mc"``: max over P_count random permutation pairs of the tv
      distance between Monte Carlo sub-array estimates of the original and
      permuted array; the null band is the same distance between two
      independent estimates of the unpermuted array.  Exercises the pipeline,
      not the array: the exact estimator is permutation-invariant.
    - ``"subarray-exact"``: the same statistic with exact enumeration, which
      is identically zero.
    """
    if P_count < 1:
        raise ValueError("P_count must be >= 1")
    m = y.side
    if variant == "row-dispersion":
        rng = substream(seed, "exch", "bootstrap")
        values = y.values.astype(np.float64)
        stat = float(values.mean(axis=1).std())
        flat = values.ravel()
        boots = np.empty(n_boot)
        for b in range(n_boot):
            shuffled = flat[rng.permutation(flat.shape[0])].reshape(m, m)
            boots[b] = shuffled.mean(axis=1).std()
        return ExchangeabilityReport(
            statistic=stat, null_band=float(np.quantile(boots, 0.99)), variant=variant
        )
    if variant not in ("subarray-mc", "subarray-exact"):
        raise ValueError(f"unknown variant {variant!r}")
    perm_rng = substream(seed, "exch", "perms")
    if variant == "subarray-exact":
        base = empirical_subarray_exact(y, n)
        stat = 0.0
        for _ in range(P_count):
            p = PermutationPair.random(m, perm_rng)
            stat = max(stat, tv_distance(base, empirical_subarray_exact(apply_permutation(y, p), n)))
        return ExchangeabilityReport(statistic=stat, null_band=0.0, variant=variant)
    base = empirical_subarray_mc(y, n, K, derive_seed(seed, "exch", "base"))
    stat = 0.0
    for index in range(P_count):
        p = PermutationPair.random(m, perm_rng)
        mu = empirical_subarray_mc(
            apply_permutation(y, p), n, K, derive_seed(seed, "exch", "perm", index)
        )
        stat = max(stat, tv_distance(base, mu))
    rerun = empirical_subarray_mc(y, n, K, derive_seed(seed, "exch", "rerun"))
    return ExchangeabilityReport(
        statistic=stat, null_band=tv_distance(base, rerun), variant=variant
    )

import math
from fractions import Fraction

import numpy as np
import pytest

from exarray import (
    Alphabet,
    EntryLaw,
    FiniteArray,
    GlobalRefresh,
    HiddenMajority,
    IidRefresh,
    InsufficientDataError,
    RowColumnEntryClocks,
    Trajectory,
    classify_jumps,
    constant_array,
    estimate_kernel_qn,
    exchangeability_test,
    jump_proportion,
    locality_test,
    markov_test,
    mc_noise_band,
    simulate_ctmc,
    simulate_discrete,
)
from exarray.rng import substream
from exarray.sampler import _counterexample_batch

from conftest import (
    hidden_majority_estimate_edge_law,
    hidden_majority_history,
    hidden_majority_one_step,
)

BIN = Alphabet.finite(2)


def traj_from_values(frames):
    states = [FiniteArray(np.array(f), BIN) for f in frames]
    return Trajectory(times=[float(t) for t in range(len(states))], states=states)


def flip(values, cells):
    out = np.array(values)
    for i, j in cells:
        out[i, j] ^= 1
    return out


class TestClassifyJumps:
    def test_single(self):
        base = np.zeros((10, 10), dtype=int)
        traj = traj_from_values([base, flip(base, [(3, 7)])])
        events = classify_jumps(traj)
        assert len(events) == 1
        assert events[0].label == "single" and events[0].index == (3, 7)

    def test_row(self):
        base = np.zeros((10, 10), dtype=int)
        traj = traj_from_values([base, flip(base, [(2, 1), (2, 5), (2, 9)])])
        (event,) = classify_jumps(traj)
        assert event.label == "row" and event.index == 2

    def test_column(self):
        base = np.zeros((10, 10), dtype=int)
        traj = traj_from_values([base, flip(base, [(1, 4), (6, 4)])])
        (event,) = classify_jumps(traj)
        assert event.label == "column" and event.index == 4

    def test_global_and_sparse(self):
        base = np.zeros((10, 10), dtype=int)
        dense = [(i, j) for i in range(10) for j in range(10) if (i + j) % 2]
        (event,) = classify_jumps(traj_from_values([base, flip(base, dense)]))
        assert event.label == "global"
        scattered = [(0, 0), (5, 5)]  # multi-entry, multi-row, below theta
        (event,) = classify_jumps(traj_from_values([base, flip(base, scattered)]), theta_global=0.5)
        assert event.label == "sparse"

    def test_no_event_for_identical_states(self):
        base = np.zeros((4, 4), dtype=int)
        assert classify_jumps(traj_from_values([base, base])) == []

    def test_partition_property(self, rng):
        # each nonempty diff receives exactly one label, and single <=> one cell
        base = np.zeros((8, 8), dtype=int)
        for _ in range(50):
            count = int(rng.integers(1, 20))
            cells = {(int(rng.integers(8)), int(rng.integers(8))) for _ in range(count)}
            traj = traj_from_values([base, flip(base, cells)])
            (event,) = classify_jumps(traj)
            assert event.label in {"single", "row", "column", "global", "sparse"}
            assert (event.label == "single") == (len(event.changed) == 1)

    def test_ctmc_taxonomy_recovery(self):
        # ground-truth kinds against the classifier on a layered-clock run
        m = 30
        kernel = RowColumnEntryClocks(
            lam_global=0.3, lam_row=0.15, lam_col=0.15, lam_entry=0.8 / m**2,
            law=EntryLaw.bernoulli(0.5),
        )
        init = FiniteArray(substream(3, "init").integers(0, 2, (m, m)), BIN)
        traj = simulate_ctmc(kernel, init, 120.0, 77)
        events = classify_jumps(traj, theta_global=0.05)
        truth = {e.time: e for e in traj.event_log}
        matched = {"global": "global", "row": "row", "column": "column", "entry": "single"}
        agree = total = 0
        for event in events:
            total += 1
            agree += matched[truth[event.time].kind] == event.label
        assert total > 100
        assert agree / total >= 0.99


class TestJumpProportion:
    def test_zero_iff_constant(self):
        base = np.zeros((5, 5), dtype=int)
        traj = traj_from_values([base, base, flip(base, [(0, 0)])])
        assert jump_proportion(traj, 1) == 0.0
        assert jump_proportion(traj, 2) == 1 / 25

    def test_full_flip(self):
        base = np.zeros((4, 4), dtype=int)
        traj = traj_from_values([base, 1 - base])
        assert jump_proportion(traj, 1) == 1.0

    def test_refresh_concentration(self):
        # binomial oracle: a fair redraw changes each entry with probability 1/2
        m = 40
        y = constant_array(m, 0, BIN)
        traj = simulate_discrete(GlobalRefresh(prob=1.0, law=EntryLaw.bernoulli(0.5)), y, 1, 5)
        assert abs(jump_proportion(traj, 1) - 0.5) <= 4 * math.sqrt(0.25 / m**2)

    def test_index_validated(self):
        base = np.zeros((3, 3), dtype=int)
        traj = traj_from_values([base, base])
        with pytest.raises(ValueError):
            jump_proportion(traj, 2)


class TestEstimateKernelQn:
    def test_iid_refresh_rows_converge_to_entry_law(self):
        p, m, ensemble = 0.3, 5, 10_000
        kernel = IidRefresh(law=EntryLaw.bernoulli(p))
        rng = substream(2, "ensemble")
        trajs = []
        init = FiniteArray(rng.integers(0, 2, (m, m)), BIN)
        for s in range(ensemble):
            trajs.append(simulate_discrete(kernel, init, 1, s))
        estimate = estimate_kernel_qn(trajs, 1, 1)
        one = FiniteArray(np.array([[1]]), BIN)
        zero = FiniteArray(np.array([[0]]), BIN)
        for y1 in (one, zero):
            row = estimate.row(y1)
            assert abs(float(row.get(one, 0)) - p) <= 0.02
            assert abs(float(row.get(zero, 0)) - (1 - p)) <= 0.02

    def test_frozen_dynamics_give_identity_kernel(self):
        y = FiniteArray(substream(4, "y").integers(0, 2, (5, 5)), BIN)
        trajs = [simulate_discrete(GlobalRefresh(prob=0.0), y, 1, s) for s in range(5)]
        estimate = estimate_kernel_qn(trajs, 1, 2)
        for y1, row in estimate.rows.items():
            assert row == {y1: Fraction(1)}

    def test_rows_are_distributions(self):
        y = FiniteArray(substream(9, "y").integers(0, 2, (6, 6)), BIN)
        trajs = [simulate_discrete(IidRefresh(), y, 1, s) for s in range(30)]
        estimate = estimate_kernel_qn(trajs, 1, 2)
        for row in estimate.rows.values():
            assert abs(float(sum(row.values())) - 1.0) <= 1e-9

    def test_absent_row_is_identity(self):
        y = constant_array(4, 0, BIN)
        trajs = [simulate_discrete(GlobalRefresh(prob=0.0), y, 1, 0)]
        estimate = estimate_kernel_qn(trajs, 1, 1)
        unseen = FiniteArray(np.array([[1]]), BIN)
        assert estimate.row(unseen) == {unseen: 1}

    def test_empty_ensemble_rejected(self):
        with pytest.raises(InsufficientDataError):
            estimate_kernel_qn([], 1, 1)


class TestMarkovTest:
    def test_one_step_matches_closed_form(self):
        report = markov_test(m=20, N=2, R=100_000, seed=3)
        assert abs(report.one_step - float(hidden_majority_one_step())) <= report.one_step_halfwidth

    def test_history_matches_closed_form_ratio(self):
        report = markov_test(m=20, N=20, R=200_000, seed=8)
        oracle = float(hidden_majority_history(20))
        assert abs(report.history - oracle) <= report.history_halfwidth
        assert report.history_conditioning > 0.05 * report.runs

    def test_history_equals_one_step_at_n_two(self):
        report = markov_test(m=10, N=2, R=50_000, seed=1)
        assert report.history == report.one_step
        assert report.history_conditioning == report.one_step_conditioning

    def test_separation_falsifies_markov_property(self):
        report = markov_test(m=20, N=20, R=200_000, seed=5)
        assert report.one_step + report.one_step_halfwidth < report.history - report.history_halfwidth

    def test_marginal_agrees_with_full_array_simulation(self):
        # the marginal fast path must match estimates read off full
        # hidden-type simulations of the m-by-m array
        m, runs, N = 5, 40_000, 3
        states, xi = _counterexample_batch(m, runs, 42)
        kernel = HiddenMajority(mode="exact")
        rng = substream(43, "full")
        edge_series = [states[:, 0, 1].astype(bool)]
        current = states
        for _ in range(N):
            current = kernel.step_batch(current, xi, rng, True, True)
            edge_series.append(current[:, 0, 1].astype(bool))
        cond = edge_series[1]
        full_one_step = float((edge_series[1] & edge_series[2]).sum() / cond.sum())
        hw_full = 4 * math.sqrt(0.25 / int(cond.sum()))
        report = markov_test(m=m, N=N, R=runs, seed=44)
        assert abs(full_one_step - report.one_step) <= hw_full + report.one_step_halfwidth
        hist_cond = edge_series[1] & edge_series[2]
        full_history = float((hist_cond & edge_series[3]).sum() / hist_cond.sum())
        hw_hist = 4 * math.sqrt(0.25 / int(hist_cond.sum()))
        assert abs(full_history - report.history) <= hw_hist + report.history_halfwidth

    def test_parameters_validated(self):
        with pytest.raises(ValueError):
            markov_test(m=1, N=5, R=10, seed=0)
        with pytest.raises(ValueError):
            markov_test(m=5, N=1, R=10, seed=0)
        with pytest.raises(ValueError):
            markov_test(m=5, N=5, R=10, seed=0, kernel=HiddenMajority(mode="estimate"))


def light_heavy_starts():
    """Two starts agreeing on the 2x2 corner: all rows light vs outside rows heavy."""
    m = 6
    x = np.zeros((m, m), dtype=np.int64)
    x[0, 1] = x[1, 0] = 1
    x_alt = x.copy()
    for i in range(2, 6):
        for j in range(i + 1, 6):
            x_alt[i, j] = x_alt[j, i] = 1
    for a, b in [(2, 0), (3, 0), (4, 1), (5, 1)]:
        x_alt[a, b] = x_alt[b, a] = 1
    kwargs = dict(symmetric=True, zero_diagonal=True)
    return FiniteArray(x, BIN, **kwargs), FiniteArray(x_alt, BIN, **kwargs)


class TestLocalityTest:
    def test_iid_refresh_is_local(self, rng):
        kernel = IidRefresh(law=EntryLaw.bernoulli(0.4))
        R = 20_000
        band = mc_noise_band(16, R)
        for trial in range(20):
            x = FiniteArray(rng.integers(0, 2, (5, 5)), BIN)
            x_alt_values = rng.integers(0, 2, (5, 5))
            x_alt_values[:2, :2] = x.values[:2, :2]
            x_alt = FiniteArray(x_alt_values, BIN)
            tv = locality_test(kernel, 2, x, x_alt, T=2, R=R, seed=trial)
            assert tv <= band

    def test_global_refresh_is_local(self, rng):
        kernel = GlobalRefresh(prob=0.6, law=EntryLaw.bernoulli(0.5))
        x = FiniteArray(rng.integers(0, 2, (5, 5)), BIN)
        x_alt_values = rng.integers(0, 2, (5, 5))
        x_alt_values[:2, :2] = x.values[:2, :2]
        tv = locality_test(kernel, 2, x, FiniteArray(x_alt_values, BIN), T=2, R=20_000, seed=9)
        assert tv <= mc_noise_band(16, 20_000)

    def test_hidden_majority_is_non_local(self):
        # exact oracle: enumeration over all 2^15 edge configurations gives
        # P(edge at T=2) = 1 from the frozen start and 779/1024 from the other
        x, x_alt = light_heavy_starts()
        kernel = HiddenMajority(mode="estimate")
        R = 30_000
        tv = locality_test(kernel, 2, x, x_alt, T=2, R=R, seed=6)
        oracle = abs(
            hidden_majority_estimate_edge_law(x.values, 2)
            - hidden_majority_estimate_edge_law(x_alt.values, 2)
        )
        band = mc_noise_band(2, R)
        assert oracle == pytest.approx(1 - 779 / 1024)
        assert abs(tv - oracle) <= band
        assert tv > 3 * band

    def test_threads_do_not_change_result(self):
        x, x_alt = light_heavy_starts()
        kernel = HiddenMajority(mode="estimate")
        a = locality_test(kernel, 2, x, x_alt, T=2, R=5000, seed=3, threads=1)
        b = locality_test(kernel, 2, x, x_alt, T=2, R=5000, seed=3, threads=4)
        assert a == b

    def test_restriction_agreement_required(self):
        kernel = IidRefresh()
        x = constant_array(4, 0, BIN)
        x_alt = constant_array(4, 1, BIN)
        with pytest.raises(ValueError):
            locality_test(kernel, 2, x, x_alt, T=1, R=10, seed=0)


class TestExchangeabilityTest:
    def test_exact_variant_is_identically_zero(self, rng):
        y = FiniteArray(rng.integers(0, 2, (5, 5)), BIN)
        report = exchangeability_test(y, 2, 3, seed=1, variant="subarray-exact")
        assert report.statistic == 0.0

    def test_mc_variant_tracks_resampling_noise(self):
        # on an entrywise-iid array the permuted estimates differ from the
        # base only through Monte Carlo noise
        passes = 0
        trials = 100
        for s in range(trials):
            y = FiniteArray(substream(s, "iid").integers(0, 2, (8, 8)), BIN)
            report = exchangeability_test(y, 2, 3, seed=s, variant="subarray-mc", K=2000)
            passes += report.statistic <= 2 * report.null_band
        assert passes >= 95

    def test_row_dispersion_detects_block_rows(self):
        m = 20
        values = np.zeros((m, m), dtype=np.int64)
        values[: m // 2, :] = 1
        y = FiniteArray(values, BIN)
        report = exchangeability_test(y, 2, 1, seed=0, variant="row-dispersion")
        assert report.statistic > report.null_band

    def test_row_dispersion_accepts_iid_rows(self):
        rejections = 0
        for s in range(40):
            y = FiniteArray(substream(s, "ok").integers(0, 2, (20, 20)), BIN)
            report = exchangeability_test(y, 2, 1, seed=s, variant="row-dispersion")
            rejections += report.statistic > report.null_band
        assert rejections <= 4  # the null band is a 99th percentile

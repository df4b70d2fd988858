"""Exchangeable random arrays: sampling, dynamics, limits, and tests."""

from .arrays import (
    Alphabet,
    EmpiricalMeasure,
    FiniteArray,
    PermutationPair,
    apply_permutation,
    array_distance,
    constant_array,
    pattern_space_size,
    quantize,
    restrict,
    tv_distance,
)
from .analysis import (
    ExchangeabilityReport,
    JumpEvent,
    KernelEstimate,
    MarkovTestReport,
    classify_jumps,
    estimate_kernel_qn,
    exchangeability_test,
    jump_proportion,
    locality_test,
    markov_test,
    mc_noise_band,
)
from .dynamics import (
    GlobalRefresh,
    GroundTruthEvent,
    HiddenMajority,
    HiddenState,
    IidRefresh,
    RowColumnEntryClocks,
    Trajectory,
    TransitionKernel,
    hidden_types,
    kernel_from_config,
    simulate_ctmc,
    simulate_discrete,
    step_discrete,
)
from .errors import BudgetExceededError, ConfigError, ExArrayError, InsufficientDataError
from .limits import (
    LabeledGraph,
    LimitProfile,
    empirical_subarray_exact,
    empirical_subarray_mc,
    empirical_subarray_weak,
    falling_factorial,
    graph_density,
    graph_ind,
    limit_profile,
    restrict_measure,
)
from .rng import Seed, derive_seed, substream
from .sampler import (
    Constant,
    EntryLaw,
    Graphon,
    HiddenTypeMixture,
    IidEntry,
    RepresentingFunction,
    StepFunction,
    ThresholdProduct,
    function_from_config,
    sample_counterexample_initial,
    sample_exchangeable,
    sample_from_config,
    sample_weakly_exchangeable,
)

__version__ = "0.1.0"

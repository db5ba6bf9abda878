"""Strong pathwise approximation of SDEs with Markovian regime switching.

The package provides, in dependency order:

- ``multi_index``: the word calculus behind the scheme construction and the
  kept/remainder index sets for orders 0.5, 1.0 and 1.5.
- ``markov_chain``: finite-state continuous-time chains, their paths and the
  jump-count martingale statistics.
- ``noise``: Wiener increments together with their time integrals on nested
  dyadic grids merged with chain jump times.
- ``model``: regime-dependent drift/diffusion coefficients, the associated
  differential operators, and built-in model fixtures.
- ``schemes``: explicit one-step maps of strong order 0.5 (euler), 1.0
  (milstein) and 1.5 (taylor15) with regime-switch corrections, and a path
  integrator.
- ``convergence``: coupled coarse/reference experiments that estimate the
  strong order on a model, with reproducible seeding.
- ``cli``: the ``switchtaylor`` command line front end.
"""

from . import errors
from .errors import (
    CommutativityRequired,
    ConfigError,
    ConsecutiveJumpComponents,
    EmptyIndex,
    InsufficientLevels,
    IntervalOutOfRange,
    InvalidComponent,
    InvalidGamma,
    InvalidGenerator,
    InvalidGrid,
    NonFiniteInput,
    NonFiniteState,
    NonPositiveError,
    NotAGridTime,
    ReferenceNotFiner,
    SameStatePair,
    StateOutOfRange,
    StepTooLargeForChain,
    SwitchTaylorError,
    UnknownFixture,
    UnknownRegime,
    UnknownScheme,
    UnsupportedWordLength,
)
from .fixtures import (
    DiagonalLinearCoefficients,
    MeanRevertingCoefficients,
    PolynomialColumnsCoefficients,
    ScalarLinearCoefficients,
    fixture,
    fixture_names,
)
from .markov_chain import (
    ChainPath,
    GeneratorMatrix,
    count_jumps,
    jump_times_in,
    occupation_time,
    pair_jump_compensator,
    pair_jump_count,
    pair_jump_martingale,
    sample_path,
    write_chain_csv,
)
from .model import (
    CallableCoefficients,
    CoefficientSet,
    CommutativityReport,
    ModelSpec,
    apply_word,
    check_commutativity,
    eval_diffusion,
    eval_drift,
    op_noise_diffusion,
    op_noise_drift,
    op_noise_noise_diffusion,
    op_time_diffusion,
    op_time_drift,
)
from .noise import (
    GridSpec,
    NoisePath,
    build_noise,
    dump_noise,
    load_noise,
    sample_increments,
)
from .schemes import (
    SCHEMES,
    SchemeInfo,
    StepWindow,
    Trajectory,
    build_step_window,
    get_scheme,
    integrate,
    jump_records,
    require_commutativity,
    step_euler,
    step_milstein,
    step_taylor15,
    write_trajectory_csv,
)
from .convergence import (
    ConvergenceReport,
    ExperimentPlan,
    LevelResult,
    fit_order,
    reference_scheme_for,
    run,
    strong_error,
)
from .config import format_config, load_config, parse_config, save_config
from .multi_index import (
    EMPTY_INDEX,
    Component,
    ComponentKind,
    MultiIndex,
    SchemeSets,
    WordClass,
    build_hierarchical_set,
    build_scheme_sets,
    canonical_order,
    classify,
    concat,
    counts,
    drop_first,
    drop_last,
    eta,
    jump_exact,
    jump_overflow,
    remainder_set,
    render_index,
    sets_as_dict,
    validate_word,
    wiener,
    word,
)

__version__ = "0.1.0"

"""collapse-lab: interaction-induced stochastic wave-function collapse, on a desk.

A finite-dimensional quantum core, two-particle grid dynamics, a
martingale collapse engine driven by one global stochastic stream on a
preferred foliation, and an experiment harness covering Born emergence,
CHSH, no-signaling, reduction-order undetectability, and conservation.
"""

from .constants import DEFAULT_DELTA, TAU_STEP
from .dynamics import (
    GridSpec,
    InteractionTrace,
    PotentialTable,
    TwoParticleSystem,
    accumulate_tau,
    build_hamiltonian,
    interaction_expectation,
    model_scattering_event,
    propagator_for,
    shift_magnitude,
    timing_rate,
    unitary_step,
)
from .engine import (
    BranchPair,
    CollapseParams,
    CollapseResult,
    branch_decompose,
    multiway_collapse,
    run_collapse,
    stochastic_step,
    terminal_resolution,
)
from .errors import (
    CausalityError,
    CollapseLabError,
    CompletenessError,
    ConfigError,
    DimensionError,
    EngineInvariantError,
    InputError,
    InsufficientDataError,
    ModelError,
    NormalizationError,
    NullOutcomeError,
)
from .experiments import (
    CountTable,
    LhvModel,
    OrderInvarianceConfig,
    SettingsQuartet,
    born_convergence_experiment,
    chsh_statistic,
    conservation_experiment,
    factorized_joint,
    lhv_run,
    no_signaling_check,
    order_invariance_test,
    quantum_chsh_run,
)
from .foliation import EventRecord, FoliationSchedule, GlobalStream, reorder_schedule
from .quantum import (
    LinearOperator,
    Projector,
    StateVector,
    born_weight,
    local_commutator_norm,
    marginal_distribution,
    normalize,
    project_and_renormalize,
    tensor_product,
)
from .reporting import ExperimentReport

__version__ = "0.1.0"

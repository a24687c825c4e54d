"""Data-driven identification of attack-free sensors for networked LTI plants.

The package learns one-step predictors of stacked input/output histories
from attack-free recordings and uses them online to certify which sensors
of a plant remain trustworthy under data-injection, replay and
network-delay attacks on the sensor channels.
"""

__version__ = "0.1.0"

from .linalg import (
    DEFAULT_TOL,
    RankDeficiencyError,
    Tolerance,
    characteristic_polynomial,
    matrix_exponential,
    numerical_rank,
    pseudo_right_inverse,
)
from .plant import (
    ArxModel,
    ContinuousStateSpace,
    ExtendedStateSpace,
    StateSpace,
    discretize_zoh,
    extended_state_space,
    is_controllable,
    is_observable,
    load_state_space,
    msd_benchmark,
    q_sensor_observable,
    relative_degree,
    save_state_space,
    simulate,
    ss_to_arx,
)
from .datamat import (
    ExcitationError,
    ExcitationSignal,
    SubsetDataMatrices,
    Trajectory,
    TrajectoryLengthError,
    WindowError,
    build_subset_matrices,
    generate_pe_input,
    hankel,
    is_persistently_exciting,
    load_trajectory,
    save_trajectory,
)
from .attacks import (
    AttackBudgetError,
    DelayAttack,
    InjectionAttack,
    ReplayAttack,
    SensorSubset,
    apply_attack,
    enumerate_subsets,
    load_scenario,
    project_outputs,
    save_scenario,
    seeded_injection_signal,
)
from .ddmodel import (
    DataDrivenModel,
    LearningError,
    RankOracleReport,
    RankReport,
    SubsetPredictor,
    certifying_rank,
    learn_lambda,
    learn_model,
    load_learned_model,
    predict,
    rank_condition,
    rank_obsv_oracle,
    save_learned_model,
)
from .identify import (
    IdentificationVerdict,
    InjectionMonitor,
    NoResponseError,
    SubsetScore,
    identify_delay,
    identify_replay,
    injection_bootstrap,
    injection_step,
    verdict_to_dict,
)

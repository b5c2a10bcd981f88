"""Tendon-driven 5-DOF arm simulator with external-force teaching and
muscle-based compensation control."""

from .arm import (
    ArmModel,
    Muscle,
    default_arm,
    elastic_stretch_inverse,
    elastic_tension,
    gravity_torque,
    muscle_jacobian,
    path_lengths,
    scenario_arm,
)
from .compensation import (
    LimiterParams,
    LimiterState,
    StiffnessParams,
    Variant,
    assemble_reproduction,
    delta_h,
    delta_s,
    l_comp,
    limiter_step,
    target_muscle_length,
)
from .errors import (
    DataError,
    DomainError,
    EstimationError,
    SolverError,
    TendonArmError,
    TrainingError,
)
from .intersensory import (
    LearnedIntersensory,
    OracleIntersensory,
    TrainingSet,
    sample_training_set,
    solve_f_ref,
    train_surrogate,
)
from .plant import (
    ExternalWrench,
    NoiseConfig,
    PlantState,
    plant_step,
    solve_equilibrium,
)
from .session import (
    JointPath,
    LimiterConfig,
    Trajectory,
    WrenchProfile,
    comparison_experiment,
    metric_E,
    run_original,
    run_reproduction,
    run_teaching,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"

"""Multi-objective H-infinity control for ACC/CACC vehicle platoons."""

from ._kernels import BACKEND
from .errors import (
    ConfigError,
    DelayAdditionError,
    DivergenceError,
    DomainError,
    FrequencyRangeError,
    PlatoonHinfError,
    SynthesisFailure,
)
from .lti import (
    FrequencyResponse,
    RationalTF,
    discretize_tustin,
    discretize_zoh,
    evaluate,
    freq_response,
    hinf_norm,
    is_stable,
    pade,
    peak_gain,
    poles,
    tf_add,
    tf_feedback,
    tf_mul,
)
from .platoon import (
    ACC,
    CACC,
    MULTIOBJECTIVE,
    TRADITIONAL,
    CommLink,
    PlatoonConfig,
    SpacingPolicy,
    VehicleParams,
    acc_closed_loops,
    augmented_plant,
    cacc_closed_loops,
    closed_loops,
    string_stability_fn,
)
from .simulator import (
    ScenarioSpec,
    lead_accel,
    simulate,
    step_vehicle,
    trace_metrics,
)
from .synthesis import (
    Controller,
    SynthOptions,
    WeightSet,
    crossover_frequency,
    default_weights,
    synthesize_multiobj,
    synthesize_traditional,
    verify_string_stability,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]

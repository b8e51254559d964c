"""Unsourced random access over correlated massive-MIMO channels.

Correlated channel sampling, common-codebook transmission, covariance-based
activity detection via bandit-assisted coordinate descent, an outer tree
code, and Monte Carlo harnesses for error-rate and convergence experiments.
"""

__version__ = "0.1.0"

from .channel import (
    ChannelParams,
    ChannelRealization,
    ChannelSpec,
    build_omega,
    build_spec,
    iid_spec,
    make_exp_correlated_spec,
    normalize_spec,
    sample_coupling,
    transmit_eigenvalues,
)
from .codebook import Codebook, generate_codebook
from .detector import (
    BlaState,
    DetectionResult,
    DetectorConfig,
    SigmaState,
    apply_rank_one_update,
    bla_select,
    cd_step,
    cost,
    estimation_error,
    reward,
    run_detection,
    sample_covariance,
    threshold_decide,
)
from .errors import (
    ConfigError,
    NumericalError,
    ResourceLimitError,
    SpecError,
    TreeDecodeOverflow,
    UramimoError,
)
from .simulate import (
    ConvergenceResult,
    ErrorReport,
    ScenarioConfig,
    convergence_experiment,
    run_trial,
    snr_sweep,
    synthesize_slot,
)
from .treecode import (
    ParityRules,
    TreeCodeSpec,
    build_rules,
    decode,
    encode,
    expected_false_paths,
)

__all__ = [name for name in dir() if not name.startswith("_")]

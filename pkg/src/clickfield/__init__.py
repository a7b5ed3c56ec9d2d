"""Classical Gaussian random fields measured by threshold click detectors."""

from .detector import (
    Antenna,
    Click,
    ClickLog,
    DetectorConfig,
    DetectorState,
    NonlinearPosition,
    Position,
    Povm,
    Region,
    Subspace,
    attach_detectors,
    count_coincidences,
    detector_step,
    tick_increment,
)
from .errors import (
    ClickfieldError,
    InconclusiveRunError,
    NormalizationError,
    OrthonormalityError,
    ShapeError,
    ValidationError,
)
from .experiment import (
    born_experiment,
    calibration_experiment,
    double_click_experiment,
    ergodicity_check,
    nonlinearity_experiment,
    observable_experiment,
    partition_experiment,
)
from .report import ExperimentReport
from .signal import (
    CovarianceSpec,
    FieldSample,
    GridSpec,
    SignalSource,
    TemporalModel,
    build_mixed_source,
    build_pure_source,
    empirical_covariance,
    next_sample,
    total_energy,
)
from .simulate import run_replicas, run_simulation
from .stats import IntervalEstimate, rate_with_stderr, tv_distance, wilson_interval

__version__ = "0.1.0"

"""Electro-hydraulic servo actuator simulation, ARX identification and
nonlinear-gain PID control."""

from .control import (
    ControllerState,
    NpidConfig,
    ZnResult,
    find_critical_gain,
    nonlinear_gain,
    npid_step,
    simulate_closed_loop,
    ziegler_nichols,
)
from .errors import (
    AnalysisError,
    ConfigError,
    DataError,
    DivergenceError,
    EhsasError,
    IdentifiabilityError,
    InputError,
    MetricUndefinedError,
    TuningError,
)
from .metrics import FitReport, TransientMetrics, best_fit, fit_report, fpe, mse, rmse, transient_metrics
from .plant import (
    LinearTf,
    PlantParams,
    PlantState,
    bandwidth,
    linearized_tf,
    operating_point_tf,
    simulate_open_loop,
    simulate_trajectory,
    step_rk4,
)
from .signals import ChirpSpec, MultisineSpec, TestSignalSpec, chirp, multisine, test_signal
from .sysid import ArxModel, Dataset, SplitSpec, arx_fit, arx_simulate, order_search, split_dataset
from .timeseries import TimeSeries

__version__ = "0.1.0"

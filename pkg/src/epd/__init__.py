"""Event-based E/PD learning-rate control with an online-learning harness."""

from .controller import (
    ControllerGains,
    ControllerPhase,
    ControllerState,
    event_e1,
    reset,
    state_from_json,
    state_to_json,
    step_eb_epd,
    step_epd,
)
from .governor import (
    BatchDecision,
    DegenerateWindow,
    GovernorConfig,
    GovernorState,
    SlopeFit,
    fit_slope,
    observe,
)
from .nn import (
    Adam,
    AmsGrad,
    Network,
    NonFiniteGradient,
    PredictionBatch,
    SgdExternalLr,
    ShapeMismatch,
    accuracy,
    backward_and_update,
    cross_entropy,
    forward,
    gradient,
    load_network,
    save_network,
    training_objective,
)
from .datasets import Dataset, make_blobs, one_hot
from .config import ConfigError, ExperimentConfig, SweepConfig, load_config, validate
from .harness import (
    DatasetSpec,
    EpochRecord,
    InsufficientData,
    NetworkTrainer,
    ScenarioKind,
    read_records,
    run_classical,
    run_event_based,
    run_experiment,
    split_batches,
    write_records,
)
from .metrics import (
    EmptyRun,
    TooFewEpochs,
    fasd,
    final_metrics,
    first_epoch_to,
    first_round,
)
from .report import MissingResults, build_report, collect_runs, write_report

__version__ = "0.1.0"

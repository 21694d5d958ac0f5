"""Time-series augmentation with a transformer GAN.

Pipeline, models, metrics, and the paired forecasting experiment protocol.
"""

from .data_pipeline import (
    PriceSeries,
    ScalerParams,
    SequenceSample,
    SequenceSet,
    SplitSpec,
    WindowSpec,
    augment,
    ema_smooth,
    ingest,
    load_price_csv,
    load_sequence_set,
    make_windows,
    normalize_sample,
    normalize_set,
    save_sequence_set,
    split_dataset,
)
from .forecaster import ForecasterConfig, ForecastModel, EvalResult, evaluate_mse, predict, train_forecaster
from .gan_core import (
    DiscriminatorConfig,
    GeneratorConfig,
    build_discriminator,
    build_generator,
    discriminator_forward,
    generator_forward,
)
from .gan_training import (
    EpochLog,
    TrainingConfig,
    TrainingState,
    d_step,
    g_step,
    generate_dataset,
    gradient_penalty,
    train,
)
from .metrics import DedimsConfig, MetricReport, compare_sets, dedims, dtw_dedims, dtw_distance, wasserstein_1d
from .stats import AggregateReport, PairedSample, aggregate, paired_t_test, student_t_sf
from .experiment import ExperimentSpec, WindowRange, WindowResult, run_experiment, run_window

__version__ = "0.1.0"

"""scourcast: riverbed-elevation forecasting from multivariate sensor histories."""

from .frames import (
    Channel,
    NormalizationStats,
    SplitSpec,
    TimeSeriesFrame,
    WindowSample,
    WindowedDataset,
    chronological_split,
    fit_normalization,
    make_windows,
    prepare_datasets,
)
from .features import (
    FeatureSet,
    equivalent_velocity,
    resolve_feature_set,
    time_features,
)
from .models import (
    ModelConfig,
    build_model,
    format_config,
    parse_config,
)
from .preprocess import (
    RawReading,
    despike,
    fill_short_gaps,
    parse_sensor_csv,
    resample_hourly,
)
from .search import (
    ForecastBundle,
    PolicyRanking,
    SearchSpace,
    TrialRecord,
    ensemble_forecast,
    grid_search,
    random_search,
    rank_bagging,
    rank_mean_mae,
    rank_median_mae,
)
from .synth import ScenarioSpec, generate
from .training import (
    Checkpoint,
    FoldPlan,
    TrainBudget,
    TrainReport,
    evaluate,
    holdout_train,
    make_fold_plan,
    persistence_baseline,
    sequential_train,
    train,
)

__version__ = "0.1.0"

"""Re-dispatch cost prediction toolkit.

Builds hourly zonal net-demand panels from market data, trains a
business-as-usual cost predictor (two-hidden-layer network plus OLS
baselines), evaluates out-of-sample errors with nonparametric tests and
empirical prediction bands, and runs renewable-expansion counterfactuals.
"""

from .errors import (
    BoundaryError,
    CompletenessError,
    CoverageError,
    DataError,
    DegenerateInputError,
    DuplicateRowError,
    GapError,
    NumericError,
    ParseError,
    RedispatchError,
    ShapeError,
    SingularityError,
    SpecError,
)
from .market_data import (
    CalendarFlags,
    HourlyZonalRecord,
    IngestConfig,
    MarketDataset,
    NationalHourlyRecord,
    ZONES,
    Zone,
    annotate_calendar,
    interpolate_gaps,
    load_dataset,
    write_dataset,
)
from .net_demand import (
    NetDemandPanel,
    build_panel,
    zonal_net_demand,
    zonal_net_demand_forecast,
)
from .features import (
    DesignMatrix,
    FeatureSpec,
    Scaler,
    add_lags_leads,
    build_design,
    expand_polynomial,
    fit_scaler,
)
from .splits import DateRange, SplitPlan, make_split, restrict_in_sample
from .mlp import (
    EarlyStopper,
    MlpConfig,
    MlpModel,
    REFERENCE_CONFIG,
    backward,
    forward,
    parameter_count,
    rmsprop_step,
    train,
)
from .tuner import SearchSpace, TunerResult, run_hyperband, sample_config
from .linreg import OlsModel, fit_ols, predict_ols
from .evaluation import (
    EvaluationReport,
    empirical_quantile,
    prediction_band,
    rmse,
    summarize_windows,
    wilcoxon_signed_rank,
)
from .scenarios import (
    ScenarioSpec,
    apply_scale,
    apply_smooth_time,
    apply_smooth_time_space,
    renewable_equivalence,
    run_scenario,
)
from .synth import CostParams, GeneratorConfig, GroundTruth, LockdownShock, generate

__version__ = "0.1.0"

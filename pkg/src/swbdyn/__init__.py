"""Daily-panel well-being analytics: series algebra, SWB index aggregation,
mean-reverting SDE calibration, sliding-window elastic-net forecasting with
an ARMA baseline and random-forest importance ranks, monthly correlation and
stepwise screens, and a maximum-likelihood structural-equation estimator.
"""

__version__ = "0.1.0"

from .series import (
    CorrelationResult,
    DailySeries,
    DegenerateSeriesError,
    Panel,
    align_panel,
    clamp_negative,
    forward_fill,
    lag,
    moving_average,
    spearman,
    standardize,
)
from .swb import (
    COMPONENTS,
    ComponentDistribution,
    DailyComponents,
    component_index,
    swb_daily,
    swb_series,
)
from .ingest import ColumnSpec, DateRange, PanelSpec, build_dummy, load_panel
from .sde import (
    SdeConfig,
    SdeFit,
    SdeModelKind,
    SdeParams,
    fit_sde,
    limit_trajectory,
    quasi_loglik,
    select_model,
    simulate,
)
from .enet import (
    DesignMatrix,
    EnetConfig,
    EnetSolution,
    cv_lambda,
    enet_fit,
    lambda_max,
    soft_threshold,
)
from .arima import ArimaFit, arima_fit, arima_forecast_one
from .dynamics import (
    DynResult,
    WindowConfig,
    WindowFit,
    WindowSkipped,
    dynamic_elastic_net,
    monthly_correlations,
    rf_relative_rank,
    run_window,
    stepwise_ols,
)
from .sem import SemFit, SemModel, builtin_model, compile_model, fit_sem, fml, parse_model

__all__ = [
    "__version__",
    # series
    "DailySeries", "Panel", "CorrelationResult", "DegenerateSeriesError",
    "align_panel", "moving_average", "standardize", "lag", "spearman",
    "clamp_negative", "forward_fill",
    # swb
    "COMPONENTS", "ComponentDistribution", "DailyComponents",
    "component_index", "swb_daily", "swb_series",
    # ingest
    "ColumnSpec", "DateRange", "PanelSpec", "load_panel", "build_dummy",
    # sde
    "SdeModelKind", "SdeParams", "SdeFit", "SdeConfig",
    "quasi_loglik", "fit_sde", "select_model", "simulate", "limit_trajectory",
    # enet
    "DesignMatrix", "EnetConfig", "EnetSolution",
    "soft_threshold", "enet_fit", "cv_lambda", "lambda_max",
    # arima
    "ArimaFit", "arima_fit", "arima_forecast_one",
    # dynamics
    "WindowConfig", "WindowFit", "DynResult", "WindowSkipped",
    "run_window", "dynamic_elastic_net", "rf_relative_rank",
    "monthly_correlations", "stepwise_ols",
    # sem
    "SemModel", "SemFit", "compile_model", "fml", "fit_sem",
    "parse_model", "builtin_model",
]

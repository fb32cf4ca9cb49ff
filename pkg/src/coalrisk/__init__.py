"""Coalitional systemic-risk attribution under a joint Gaussian model.

Pipeline: CSV levels -> x100 log returns -> weekly aggregation -> rolling
windows -> sparse Gaussian fit (graphical lasso) -> conditional tail
measures per coalition of distressed institutions -> cooperative cost game
-> Shapley/Banzhaf risk attribution, validated end to end by Monte Carlo
oracles.
"""

from .covariance import (
    ConvergenceError,
    EstimatorConfig,
    GaussianModel,
    default_lambda,
    graphical_lasso,
    kkt_residuals,
    sample_moments,
)
from .game import (
    AttributionResult,
    CoalitionTable,
    InstitutionPartition,
    banzhaf,
    build_table,
    check_no_undercut,
    coalition_cost,
    is_dummy,
    is_subadditive,
    shapley,
)
from .gauss import (
    DegenerateRegionError,
    bvn_lower_cdf,
    std_normal_cdf,
    std_normal_pdf,
    std_normal_quantile,
    truncated_bvn_lower_mean,
)
from .measures import (
    CoalitionPairModel,
    RiskConfig,
    RiskMeasureResult,
    SolverError,
    coalition_pair_model,
    delta_condition_bound,
    empirical_es,
    empirical_scoes,
    empirical_scovar,
    gaussian_es,
    gaussian_quantile_threshold,
    gaussian_var,
    scoes,
    scovar,
    solve_risk_measures,
    spectral_measure,
)
from .panel import (
    PanelParseError,
    ReturnPanel,
    SummaryStats,
    load_levels,
    log_returns,
    rolling_windows,
    summary_stats,
    weekly_aggregate,
)
from .pipeline import (
    AttributionSeries,
    ConfigError,
    RunConfig,
    emit_outputs,
    parse_results_csv,
    run_rolling_attribution,
)
from .validation import ValidationReport, run_validation

__version__ = "0.1.0"

"""riskcap: Monte Carlo VaR/ES for asset-liability portfolios.

Simulated discounted payoffs are regressed on a small feedforward network to
recover the horizon value of the portfolio as a function of the risk factors;
risk figures then come from plain or importance-sampled Monte Carlo over the
fitted network, with conditional-expectation backtests guarding the fit.
"""

__version__ = "0.1.0"

from .backtest import BacktestReport, IndicatorSet, quantile_sets, run_backtest
from .models import OptionPortfolioModel, PutModel, SamplePairs, VAModel, bs_price
from .nn import (NetworkArchitecture, NetworkParams, TrainingConfig, TrainingHistory,
                 forward, init_params, loss_and_gradient, train)
from .normal import normal_cdf, normal_pdf, standard_normal_quantile
from .pipeline import (ExperimentConfig, RunResult, default_config, emit_outputs,
                       run_experiment, run_reference)
from .risk import (InsufficientTailWeightError, RiskEstimate, empirical_var_es,
                   exceedance_probability, weighted_var_es)
from .sampling import ISSpec, log_weight, mean_shift, pilot_monotonicity_profile

__all__ = [
    "BacktestReport", "IndicatorSet", "quantile_sets", "run_backtest",
    "OptionPortfolioModel", "PutModel", "SamplePairs", "VAModel", "bs_price",
    "NetworkArchitecture", "NetworkParams", "TrainingConfig", "TrainingHistory",
    "forward", "init_params", "loss_and_gradient", "train",
    "normal_cdf", "normal_pdf", "standard_normal_quantile",
    "ExperimentConfig", "RunResult", "default_config", "emit_outputs",
    "run_experiment", "run_reference",
    "InsufficientTailWeightError", "RiskEstimate", "empirical_var_es",
    "exceedance_probability", "weighted_var_es",
    "ISSpec", "log_weight", "mean_shift", "pilot_monotonicity_profile",
]

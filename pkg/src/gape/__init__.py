"""Growth-adjusted price-earnings ratio and a sorted-portfolio backtester."""
from .exceptions import (DataError, DivergenceError, FormationError, GapeError,
                         IneligibleError, InputError, UndefinedMeasureError)
from .growth import align_fiscal_years, annualized_growth, eligible_firms
from .data import Universe, load_and_validate
from .portfolio import BacktestConfig, FormationEvent, run_backtest
from .series import ReturnSeries
from .stats import (annualized_return, ols_three_factor, paired_t_test, sharpe_ratio)
from .valuation import (GaPeOutcome, GordonInputs, ValuationInputs, cumulative_earnings,
                        ga_pe, gordon_fair_pe, n_star, payback_proportion, peg_payback_period,
                        peg_ratio, solvency_bound)

__version__ = "0.1.0"

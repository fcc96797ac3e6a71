//! Selection backtests: each year, rank strategies on a trailing window,
//! hold the signed equal-weight top slice for the following calendar year.

mod backtest;
mod sort;

use serde::{Deserialize, Serialize};

use crate::ebpredict::predict;
use crate::error::{Error, Result};
use crate::panel::{Family, StrategyStats, DEFAULT_MIN_OBS, DEFAULT_WINDOW_MONTHS};
use crate::prior::ModelSpec;

pub(crate) use backtest::overlap_of;
pub use backtest::{
    run_backtest, selection_overlap, write_cumret_csv, write_monthly_csv, BacktestResult,
    BacktestSummary, MonthlyReturn, YearOverlap, YearSelection,
};
pub use sort::{
    sort_accuracy, write_sort_accuracy_csv, DroppedGroup, Era, SortAccuracy, SortAccuracyRow,
    SortConfig,
};

pub const PERIODS_PER_YEAR: f64 = 12.0;

/// How strategies are ranked at each formation date.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rule {
    /// Empirical-Bayes predicted Sharpe ratio.
    Eb,
    /// Raw in-sample Sharpe ratio.
    Naive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestConfig {
    pub first_forecast_year: i32,
    pub last_forecast_year: i32,
    pub window_months: u32,
    pub min_obs: usize,
    /// Fraction of the universe held, in `(0, 1]`.
    pub top_pct: f64,
    pub rule: Rule,
    /// Restrict the universe to these families; `None` keeps all.
    pub families: Option<Vec<Family>>,
}

impl BacktestConfig {
    pub fn new(
        first_forecast_year: i32,
        last_forecast_year: i32,
        top_pct: f64,
        rule: Rule,
    ) -> Self {
        BacktestConfig {
            first_forecast_year,
            last_forecast_year,
            window_months: DEFAULT_WINDOW_MONTHS,
            min_obs: DEFAULT_MIN_OBS,
            top_pct,
            rule,
            families: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.first_forecast_year > self.last_forecast_year {
            return Err(Error::invalid("first forecast year is after the last"));
        }
        if !(self.top_pct > 0.0 && self.top_pct <= 1.0) {
            return Err(Error::invalid(format!(
                "top_pct {} outside (0, 1]",
                self.top_pct
            )));
        }
        if self.window_months == 0 {
            return Err(Error::invalid("window_months must be positive"));
        }
        Ok(())
    }

    pub fn years(&self) -> std::ops::RangeInclusive<i32> {
        self.first_forecast_year..=self.last_forecast_year
    }

    fn keeps(&self, family: &Family) -> bool {
        self.families.as_ref().is_none_or(|fs| fs.contains(family))
    }
}

/// A selected strategy and the sign it is held with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pick {
    pub strategy_id: String,
    pub sign: i8,
    /// Ranking score (predicted or in-sample annualized Sharpe, unsigned).
    pub score: f64,
}

/// Number of strategies in the top `top_pct` of `n`.
pub fn selection_count(top_pct: f64, n: usize) -> usize {
    // tolerate representation error in products like 0.07 * 100
    let raw = top_pct * n as f64;
    ((raw - 1e-9 * raw.max(1.0)).ceil().max(0.0) as usize).min(n)
}

/// Score every strategy under `rule` and return them best first, ties
/// broken by strategy id.
pub fn rank(stats: &[StrategyStats], model: Option<&ModelSpec>, rule: Rule) -> Result<Vec<Pick>> {
    let mut picks = stats
        .iter()
        .map(|s| {
            Ok(match rule {
                Rule::Eb => {
                    let model = model.ok_or_else(|| Error::invalid("the eb rule needs a model"))?;
                    let pred = predict(s, model.params(&s.family)?, PERIODS_PER_YEAR);
                    Pick {
                        strategy_id: s.strategy_id.clone(),
                        sign: pred.sign,
                        score: pred.pred_sharpe_ann,
                    }
                }
                Rule::Naive => Pick {
                    strategy_id: s.strategy_id.clone(),
                    sign: if s.mean_ret < 0.0 { -1 } else { 1 },
                    score: s.sharpe_ann(PERIODS_PER_YEAR).abs(),
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    picks.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.strategy_id.cmp(&b.strategy_id))
    });
    Ok(picks)
}

/// The top `top_pct` of `stats` under `rule`.
pub fn select_top(
    stats: &[StrategyStats],
    model: Option<&ModelSpec>,
    rule: Rule,
    top_pct: f64,
) -> Result<Vec<Pick>> {
    let mut ranked = rank(stats, model, rule)?;
    ranked.truncate(selection_count(top_pct, stats.len()));
    Ok(ranked)
}

/// Mean, sample sd and count.
pub(crate) fn moments(x: &[f64]) -> (f64, f64, usize) {
    let n = x.len();
    if n == 0 {
        return (f64::NAN, f64::NAN, 0);
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        f64::NAN
    };
    (mean, sd, n)
}

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{moments, select_top, BacktestConfig, Pick, Rule, PERIODS_PER_YEAR};
use crate::error::{Error, Result};
use crate::month::Month;
use crate::panel::{summarize_window, ReturnsPanel, StrategyStats};
use crate::prior::ModelSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthlyReturn {
    pub month: Month,
    pub ret: f64,
    /// Selected strategies observed in this month.
    pub n_members: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearSelection {
    /// Formation year; the portfolio is held through the next calendar year.
    pub year: i32,
    pub n_candidates: usize,
    pub picks: Vec<Pick>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestSummary {
    pub n_months: usize,
    pub mean_ret_ann: f64,
    pub tstat: f64,
    pub sharpe_ann: f64,
    pub mean_n_strats: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestResult {
    pub monthly: Vec<MonthlyReturn>,
    pub years: Vec<YearSelection>,
    /// Holding months where no selected strategy had a return.
    pub skipped_months: Vec<Month>,
    pub summary: BacktestSummary,
    /// Value of $1 invested at the start; one entry longer than `monthly`.
    pub cumulative: Vec<f64>,
}

impl BacktestResult {
    pub fn returns(&self) -> Vec<f64> {
        self.monthly.iter().map(|m| m.ret).collect()
    }
}

pub(crate) fn summarize_returns(rets: &[f64], mean_n_strats: f64) -> BacktestSummary {
    let (mean, sd, n) = moments(rets);
    BacktestSummary {
        n_months: n,
        mean_ret_ann: mean * PERIODS_PER_YEAR,
        tstat: mean / (sd / (n as f64).sqrt()),
        sharpe_ann: mean / sd * PERIODS_PER_YEAR.sqrt(),
        mean_n_strats,
    }
}

pub(crate) fn formation_stats(
    panel: &ReturnsPanel,
    year: i32,
    cfg: &BacktestConfig,
) -> Result<Vec<StrategyStats>> {
    let mut stats =
        summarize_window(panel, Month::december(year), cfg.window_months, cfg.min_obs)?.stats;
    stats.retain(|s| cfg.keeps(&s.family));
    Ok(stats)
}

fn check_inputs(
    panel: &ReturnsPanel,
    models: &BTreeMap<i32, ModelSpec>,
    cfg: &BacktestConfig,
    rule: Rule,
) -> Result<()> {
    cfg.validate()?;
    if rule == Rule::Eb {
        if let Some(y) = cfg.years().find(|y| !models.contains_key(y)) {
            return Err(Error::MissingModel(y));
        }
    }
    let need = Month::december(cfg.first_forecast_year).offset(1 - cfg.window_months as i32);
    match panel.month_span() {
        Some((first, _)) if first <= need => Ok(()),
        Some((first, _)) => Err(Error::invalid(format!(
            "panel starts {first}; a {}-month window for {} needs data from {need}",
            cfg.window_months, cfg.first_forecast_year
        ))),
        None => Err(Error::invalid("panel is empty")),
    }
}

/// Run the annual-rebalance selection backtest.
///
/// For each forecast year `y`, strategies are summarized over the window
/// ending December `y`, ranked under `cfg.rule`, and the top
/// `ceil(top_pct * N)` are held, signed, with equal weights over January
/// through December of `y + 1`.
pub fn run_backtest(
    panel: &ReturnsPanel,
    models: &BTreeMap<i32, ModelSpec>,
    cfg: &BacktestConfig,
) -> Result<BacktestResult> {
    check_inputs(panel, models, cfg, cfg.rule)?;
    let mut monthly = Vec::new();
    let mut years = Vec::new();
    let mut skipped_months = Vec::new();
    for year in cfg.years() {
        let stats = formation_stats(panel, year, cfg)?;
        let picks = select_top(&stats, models.get(&year), cfg.rule, cfg.top_pct)?;
        let members: Vec<(&crate::panel::StrategySeries, f64)> = picks
            .iter()
            .filter_map(|p| panel.get(&p.strategy_id).map(|s| (s, p.sign as f64)))
            .collect();
        for k in 1..=12 {
            let month = Month::new(year + 1, k);
            let mut sum = 0.0;
            let mut n = 0usize;
            for (s, sign) in &members {
                if let Some(r) = s.get(month) {
                    sum += sign * r;
                    n += 1;
                }
            }
            if n == 0 {
                skipped_months.push(month);
            } else {
                monthly.push(MonthlyReturn {
                    month,
                    ret: sum / n as f64,
                    n_members: n,
                });
            }
        }
        years.push(YearSelection {
            year,
            n_candidates: stats.len(),
            picks,
        });
    }
    let rets: Vec<f64> = monthly.iter().map(|m| m.ret).collect();
    let mean_n = years.iter().map(|y| y.picks.len() as f64).sum::<f64>() / years.len() as f64;
    let mut cumulative = Vec::with_capacity(rets.len() + 1);
    cumulative.push(1.0);
    for r in &rets {
        let last = *cumulative.last().unwrap();
        cumulative.push(last * (1.0 + r));
    }
    Ok(BacktestResult {
        summary: summarize_returns(&rets, mean_n),
        monthly,
        years,
        skipped_months,
        cumulative,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearOverlap {
    pub year: i32,
    pub n_eb: usize,
    pub n_naive: usize,
    pub n_common: usize,
    pub jaccard: f64,
}

/// Per-year Jaccard overlap between EB and naive selections.
pub fn selection_overlap(
    panel: &ReturnsPanel,
    models: &BTreeMap<i32, ModelSpec>,
    cfg: &BacktestConfig,
) -> Result<Vec<YearOverlap>> {
    check_inputs(panel, models, cfg, Rule::Eb)?;
    cfg.years()
        .map(|year| {
            let stats = formation_stats(panel, year, cfg)?;
            let eb = select_top(&stats, models.get(&year), Rule::Eb, cfg.top_pct)?;
            let naive = select_top(&stats, None, Rule::Naive, cfg.top_pct)?;
            Ok(overlap_of(year, &eb, &naive))
        })
        .collect()
}

pub(crate) fn overlap_of(year: i32, a: &[Pick], b: &[Pick]) -> YearOverlap {
    let sa: BTreeSet<&str> = a.iter().map(|p| p.strategy_id.as_str()).collect();
    let sb: BTreeSet<&str> = b.iter().map(|p| p.strategy_id.as_str()).collect();
    let common = sa.intersection(&sb).count();
    let union = sa.union(&sb).count();
    YearOverlap {
        year,
        n_eb: sa.len(),
        n_naive: sb.len(),
        n_common: common,
        jaccard: if union == 0 {
            1.0
        } else {
            common as f64 / union as f64
        },
    }
}

/// `month,ret,n_members`.
pub fn write_monthly_csv<W: Write>(res: &BacktestResult, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    for m in &res.monthly {
        w.serialize(m)?;
    }
    w.flush().map_err(|e| Error::io("<monthly csv>", e))?;
    Ok(())
}

/// `month,value`, starting from 1.0 the month before the first return.
pub fn write_cumret_csv<W: Write>(res: &BacktestResult, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["month", "value"])?;
    if let Some(first) = res.monthly.first() {
        w.write_record([
            first.month.offset(-1).to_string(),
            res.cumulative[0].to_string(),
        ])?;
        for (m, v) in res.monthly.iter().zip(&res.cumulative[1..]) {
            w.write_record([m.month.to_string(), v.to_string()])?;
        }
    }
    w.flush().map_err(|e| Error::io("<cumret csv>", e))?;
    Ok(())
}

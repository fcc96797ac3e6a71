use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Family, ReturnsPanel};
use crate::error::{Error, Result};
use crate::month::Month;

/// Minimum months of data for a strategy to be summarized.
pub const DEFAULT_MIN_OBS: usize = 60;

/// Windowed summary of one strategy's returns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyStats {
    pub strategy_id: String,
    pub family: Family,
    pub window_start: Month,
    pub window_end: Month,
    pub n_obs: usize,
    pub mean_ret: f64,
    /// Sample standard deviation, `n - 1` denominator.
    pub sd_ret: f64,
    pub se: f64,
    pub tstat: f64,
}

impl StrategyStats {
    /// In-sample Sharpe ratio, annualized with `periods_per_year`.
    pub fn sharpe_ann(&self, periods_per_year: f64) -> f64 {
        self.mean_ret / self.sd_ret * periods_per_year.sqrt()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryDiagnostics {
    /// Strategies with fewer than `min_obs` months.
    pub too_few_obs: usize,
    /// Strategies whose returns have zero sample variance.
    pub zero_variance: usize,
}

impl SummaryDiagnostics {
    pub fn excluded(&self) -> usize {
        self.too_few_obs + self.zero_variance
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub stats: Vec<StrategyStats>,
    pub diagnostics: SummaryDiagnostics,
}

/// Per-strategy mean, sd, standard error and t-statistic.
///
/// Strategies with fewer than `min_obs` observations or with zero sample
/// variance are left out and counted in the diagnostics. Output is ordered
/// by strategy id.
pub fn summarize(panel: &ReturnsPanel, min_obs: usize) -> Result<Summary> {
    if min_obs < 2 {
        return Err(Error::invalid("min_obs must be at least 2"));
    }
    let mut diagnostics = SummaryDiagnostics::default();
    let mut stats = Vec::with_capacity(panel.n_strategies());
    for s in panel.series() {
        let n = s.len();
        if n < min_obs {
            diagnostics.too_few_obs += 1;
            continue;
        }
        let Some((mean, sd)) = mean_sd(s.rets()) else {
            diagnostics.zero_variance += 1;
            continue;
        };
        let se = sd / (n as f64).sqrt();
        let tstat = mean / se;
        if !tstat.is_finite() {
            diagnostics.zero_variance += 1;
            continue;
        }
        let (window_start, window_end) = panel
            .window_bounds()
            .unwrap_or((s.months()[0], s.months()[n - 1]));
        stats.push(StrategyStats {
            strategy_id: s.id.clone(),
            family: s.family.clone(),
            window_start,
            window_end,
            n_obs: n,
            mean_ret: mean,
            sd_ret: sd,
            se,
            tstat,
        });
    }
    Ok(Summary { stats, diagnostics })
}

/// Equivalent to `summarize(&window(panel, end, length_months)?, min_obs)`
/// without materializing the windowed panel.
pub fn summarize_window(
    panel: &ReturnsPanel,
    end: Month,
    length_months: u32,
    min_obs: usize,
) -> Result<Summary> {
    if min_obs < 2 {
        return Err(Error::invalid("min_obs must be at least 2"));
    }
    if length_months == 0 {
        return Err(Error::invalid("window length must be at least one month"));
    }
    let start = end.offset(1 - length_months as i32);
    let (start, end) = match panel.window_bounds() {
        Some((s0, e0)) => (start.max(s0), end.min(e0)),
        None => (start, end),
    };
    let mut diagnostics = SummaryDiagnostics::default();
    let mut stats = Vec::new();
    for s in panel.series() {
        let (months, rets) = s.range(start, end);
        if months.is_empty() {
            continue;
        }
        let n = rets.len();
        if n < min_obs {
            diagnostics.too_few_obs += 1;
            continue;
        }
        let Some((mean, sd)) = mean_sd(rets) else {
            diagnostics.zero_variance += 1;
            continue;
        };
        let se = sd / (n as f64).sqrt();
        let tstat = mean / se;
        if !tstat.is_finite() {
            diagnostics.zero_variance += 1;
            continue;
        }
        stats.push(StrategyStats {
            strategy_id: s.id.clone(),
            family: s.family.clone(),
            window_start: start,
            window_end: end,
            n_obs: n,
            mean_ret: mean,
            sd_ret: sd,
            se,
            tstat,
        });
    }
    Ok(Summary { stats, diagnostics })
}

/// Two-pass mean and sample standard deviation; `None` when sd is zero.
pub(crate) fn mean_sd(x: &[f64]) -> Option<(f64, f64)> {
    let n = x.len();
    if n < 2 || x.iter().all(|&v| v == x[0]) {
        return None;
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let ss: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
    let sd = (ss / (n - 1) as f64).sqrt();
    (sd > 0.0).then_some((mean, sd))
}

pub fn write_stats<W: Write>(stats: &[StrategyStats], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    for s in stats {
        w.serialize(s)?;
    }
    w.flush().map_err(|e| Error::io("<stats csv>", e))?;
    Ok(())
}

pub fn read_stats<R: Read>(source: R) -> Result<Vec<StrategyStats>> {
    let mut rdr = csv::Reader::from_reader(source);
    let mut out = Vec::new();
    for (i, rec) in rdr.deserialize().enumerate() {
        out.push(rec.map_err(|e| Error::Parse {
            line: i as u64 + 2,
            msg: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn write_stats_file(stats: &[StrategyStats], path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_stats(stats, std::io::BufWriter::new(f))
}

pub fn read_stats_file(path: &Path) -> Result<Vec<StrategyStats>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_stats(std::io::BufReader::new(f))
}

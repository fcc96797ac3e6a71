use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{HurdleResult, Method};
use crate::error::{Error, Result};
use crate::panel::{ReturnsPanel, StrategyStats};

/// Out-of-sample annualized return counted as notable.
pub const DEFAULT_HIGH_OOS_ANN: f64 = 0.03;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub n_bins: usize,
    pub high_oos_ann: f64,
    /// Bin each family separately instead of the pooled sample.
    pub by_family: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            n_bins: 20,
            high_oos_ann: DEFAULT_HIGH_OOS_ANN,
            by_family: false,
        }
    }
}

/// One in-sample `|t|` bin. Strategies are signed to have positive
/// in-sample means before their OOS returns are averaged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinRow {
    /// Family label, or `all` for the pooled sample.
    pub family: String,
    pub bin: usize,
    pub insample_t_mid: f64,
    pub n_strats: usize,
    pub oos_mean_ann: Option<f64>,
    pub oos_se_ann: Option<f64>,
    pub n_months: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HurdleEval {
    pub method: Method,
    pub q_star: f64,
    pub p_star: Option<f64>,
    pub hurdle: f64,
    pub n_discoveries: usize,
    /// Bins whose OOS mean reaches the notable threshold.
    pub n_high_bins: usize,
    /// Notable bins whose mean in-sample `|t|` clears the hurdle.
    pub n_high_captured: usize,
    pub n_high_missed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub hurdles: Vec<HurdleEval>,
    pub bins: Vec<BinRow>,
}

fn bin_rows(
    label: &str,
    stats: &[&StrategyStats],
    oos: Option<&ReturnsPanel>,
    n_bins: usize,
) -> Vec<BinRow> {
    let mut sorted: Vec<&StrategyStats> = stats.to_vec();
    sorted.sort_by(|a, b| {
        a.tstat
            .abs()
            .total_cmp(&b.tstat.abs())
            .then_with(|| a.strategy_id.cmp(&b.strategy_id))
    });
    let n = sorted.len();
    let mut groups: Vec<Vec<&StrategyStats>> = vec![Vec::new(); n_bins];
    for (i, s) in sorted.into_iter().enumerate() {
        groups[i * n_bins / n].push(s);
    }
    groups
        .into_iter()
        .enumerate()
        .filter(|(_, g)| !g.is_empty())
        .map(|(b, g)| {
            let mid = g.iter().map(|s| s.tstat.abs()).sum::<f64>() / g.len() as f64;
            let (oos_mean_ann, oos_se_ann, n_months) = match oos {
                Some(panel) => oos_stats(panel, &g),
                None => (None, None, 0),
            };
            BinRow {
                family: label.to_string(),
                bin: b + 1,
                insample_t_mid: mid,
                n_strats: g.len(),
                oos_mean_ann,
                oos_se_ann,
                n_months,
            }
        })
        .collect()
}

fn oos_stats(panel: &ReturnsPanel, group: &[&StrategyStats]) -> (Option<f64>, Option<f64>, usize) {
    let members: Vec<_> = group
        .iter()
        .filter_map(|s| {
            let sign = if s.mean_ret < 0.0 { -1.0 } else { 1.0 };
            panel.get(&s.strategy_id).map(|x| (x, sign))
        })
        .collect();
    let monthly: Vec<f64> = panel
        .months()
        .into_iter()
        .filter_map(|m| {
            let v: Vec<f64> = members
                .iter()
                .filter_map(|(x, sg)| x.get(m).map(|r| r * sg))
                .collect();
            (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
        })
        .collect();
    let (mean, sd, n) = crate::select::moments(&monthly);
    let mean_ann = (n > 0).then_some(mean * 12.0);
    let se_ann = (n > 1).then_some(sd / (n as f64).sqrt() * 12.0);
    (mean_ann, se_ann, n)
}

/// Discovery counts per hurdle, in-sample `|t|` bins with OOS returns, and
/// how many high-OOS bins each hurdle captures.
pub fn evaluate_hurdles(
    stats: &[StrategyStats],
    hurdles: &[HurdleResult],
    oos: Option<&ReturnsPanel>,
    opts: &EvalOptions,
) -> Result<Evaluation> {
    if opts.n_bins == 0 {
        return Err(Error::invalid("n_bins must be positive"));
    }
    let mut bins = Vec::new();
    if !stats.is_empty() {
        if opts.by_family {
            let mut fams: Vec<_> = stats.iter().map(|s| s.family.clone()).collect();
            fams.sort();
            fams.dedup();
            for f in fams {
                let members: Vec<&StrategyStats> = stats.iter().filter(|s| s.family == f).collect();
                bins.extend(bin_rows(f.label(), &members, oos, opts.n_bins));
            }
        } else {
            let members: Vec<&StrategyStats> = stats.iter().collect();
            bins.extend(bin_rows("all", &members, oos, opts.n_bins));
        }
    }
    let high: Vec<&BinRow> = bins
        .iter()
        .filter(|b| b.oos_mean_ann.is_some_and(|m| m >= opts.high_oos_ann))
        .collect();
    let hurdles = hurdles
        .iter()
        .map(|h| {
            let captured = high.iter().filter(|b| b.insample_t_mid > h.hurdle).count();
            HurdleEval {
                method: h.method,
                q_star: h.q_star,
                p_star: h.p_star,
                hurdle: h.hurdle,
                n_discoveries: stats.iter().filter(|s| s.tstat.abs() > h.hurdle).count(),
                n_high_bins: high.len(),
                n_high_captured: captured,
                n_high_missed: high.len() - captured,
            }
        })
        .collect();
    Ok(Evaluation { hurdles, bins })
}

/// `family,bin,insample_t_mid,oos_mean_ann,oos_se_ann,n_strats,n_months`.
pub fn write_bins_csv<W: Write>(bins: &[BinRow], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record([
        "family",
        "bin",
        "insample_t_mid",
        "oos_mean_ann",
        "oos_se_ann",
        "n_strats",
        "n_months",
    ])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for b in bins {
        w.write_record([
            b.family.clone(),
            b.bin.to_string(),
            b.insample_t_mid.to_string(),
            opt(b.oos_mean_ann),
            opt(b.oos_se_ann),
            b.n_strats.to_string(),
            b.n_months.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<bins csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fdr::{hurdle_by13, hurdle_storey};
    use crate::month::Month;
    use crate::panel::{Family, StrategySeries};

    fn stat(id: &str, t: f64) -> StrategyStats {
        StrategyStats {
            strategy_id: id.into(),
            family: Family::AcctEw,
            window_start: Month::new(1990, 1),
            window_end: Month::new(2009, 12),
            n_obs: 240,
            mean_ret: t * 0.001,
            sd_ret: 0.001 * 240f64.sqrt(),
            se: 0.001,
            tstat: t,
        }
    }

    #[test]
    fn zero_hurdle_captures_every_bin() {
        let stats: Vec<StrategyStats> = (0..40)
            .map(|i| stat(&format!("s{i:02}"), 0.1 + i as f64 * 0.2))
            .collect();
        // OOS: every strategy earns 1% a month in its in-sample direction
        let oos = ReturnsPanel::new(
            stats
                .iter()
                .map(|s| {
                    StrategySeries::contiguous(
                        s.strategy_id.clone(),
                        Family::AcctEw,
                        Month::new(2010, 1),
                        vec![0.01; 24],
                    )
                })
                .collect(),
        )
        .unwrap();
        let mut zero = hurdle_storey(&[5.0; 10], 0.1, 1.0).unwrap();
        assert_eq!(zero.hurdle, 0.0);
        zero.n_discoveries = 0;
        let by = hurdle_by13(&stats.iter().map(|s| s.tstat).collect::<Vec<_>>(), 0.01).unwrap();
        let ev =
            evaluate_hurdles(&stats, &[zero, by], Some(&oos), &EvalOptions::default()).unwrap();
        assert_eq!(ev.bins.len(), 20);
        assert!(ev.bins.iter().all(|b| b.n_strats == 2));
        assert!((ev.bins[0].oos_mean_ann.unwrap() - 0.12).abs() < 1e-12);
        let z = &ev.hurdles[0];
        assert_eq!(z.n_high_bins, 20);
        assert_eq!(z.n_high_captured, 20);
        assert_eq!(z.n_discoveries, 40);
        assert!(ev.hurdles[1].n_high_captured < 20);
        let mut buf = Vec::new();
        write_bins_csv(&ev.bins, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("family,bin,insample_t_mid,oos_mean_ann,oos_se_ann"));
        assert_eq!(text.lines().count(), 21);
    }

    #[test]
    fn without_oos_bins_have_no_returns() {
        let stats: Vec<StrategyStats> = (0..5).map(|i| stat(&format!("s{i}"), i as f64)).collect();
        let ev = evaluate_hurdles(&stats, &[], None, &EvalOptions::default()).unwrap();
        assert_eq!(ev.bins.len(), 5);
        assert!(ev.bins.iter().all(|b| b.oos_mean_ann.is_none()));
    }
}

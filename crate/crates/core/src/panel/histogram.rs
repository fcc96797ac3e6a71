use std::io::Write;

use serde::Serialize;

use super::{Family, StrategyStats};
use crate::error::{Error, Result};
use crate::normal;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistBin {
    pub bin_left: f64,
    pub bin_right: f64,
    pub count: usize,
    /// `count / (n * width)`, so densities integrate to one.
    pub density: f64,
    /// Standard normal density at the bin center.
    pub null_density: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// `None` means all families pooled.
    pub family: Option<Family>,
    pub bin_width: f64,
    pub n: usize,
    pub bins: Vec<HistBin>,
}

/// Density histogram of t-statistics for one family (or all, if `None`).
///
/// Bins are `[(k - 1/2) w, (k + 1/2) w)` for integer `k`, so zero sits at
/// a bin center. Bins between the smallest and largest observation are
/// all emitted, including empty ones.
pub fn tstat_histogram(
    stats: &[StrategyStats],
    family: Option<&Family>,
    bin_width: f64,
) -> Result<Histogram> {
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(Error::invalid("bin_width must be positive"));
    }
    let ts: Vec<f64> = stats
        .iter()
        .filter(|s| family.is_none_or(|f| &s.family == f))
        .map(|s| s.tstat)
        .collect();
    let mut hist = Histogram {
        family: family.cloned(),
        bin_width,
        n: ts.len(),
        bins: Vec::new(),
    };
    if ts.is_empty() {
        return Ok(hist);
    }
    let index = |t: f64| (t / bin_width + 0.5).floor() as i64;
    let lo = ts.iter().map(|&t| index(t)).min().unwrap();
    let hi = ts.iter().map(|&t| index(t)).max().unwrap();
    let mut counts = vec![0usize; (hi - lo + 1) as usize];
    for &t in &ts {
        counts[(index(t) - lo) as usize] += 1;
    }
    let norm = ts.len() as f64 * bin_width;
    hist.bins = counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| {
            let k = lo + i as i64;
            let center = k as f64 * bin_width;
            HistBin {
                bin_left: center - 0.5 * bin_width,
                bin_right: center + 0.5 * bin_width,
                count,
                density: count as f64 / norm,
                null_density: normal::pdf(center, 0.0, 1.0),
            }
        })
        .collect();
    Ok(hist)
}

/// Append `family,bin_left,bin_right,count,density,null_density` rows.
/// Pooled histograms are labelled `all`.
pub fn write_histogram_csv<W: Write>(hists: &[Histogram], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record([
        "family",
        "bin_left",
        "bin_right",
        "count",
        "density",
        "null_density",
    ])?;
    for h in hists {
        let fam = h.family.as_ref().map_or("all", |f| f.label());
        for b in &h.bins {
            w.write_record([
                fam.to_string(),
                b.bin_left.to_string(),
                b.bin_right.to_string(),
                b.count.to_string(),
                b.density.to_string(),
                b.null_density.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<histogram csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::month::Month;

    pub(crate) fn stat(t: f64, family: Family) -> StrategyStats {
        StrategyStats {
            strategy_id: format!("s{t}"),
            family,
            window_start: Month::new(2000, 1),
            window_end: Month::new(2019, 12),
            n_obs: 240,
            mean_ret: t * 0.001,
            sd_ret: 0.001 * (240f64).sqrt(),
            se: 0.001,
            tstat: t,
        }
    }

    #[test]
    fn single_zero() {
        let h = tstat_histogram(&[stat(0.0, Family::AcctEw)], None, 1.0).unwrap();
        assert_eq!(h.bins.len(), 1);
        assert_eq!(h.bins[0].bin_left, -0.5);
        assert_eq!(h.bins[0].bin_right, 0.5);
        assert_eq!(h.bins[0].density, 1.0);
    }

    #[test]
    fn empty_family_gives_empty_table() {
        let h =
            tstat_histogram(&[stat(1.0, Family::AcctEw)], Some(&Family::TickerVw), 0.5).unwrap();
        assert!(h.bins.is_empty());
        assert!(tstat_histogram(&[], None, 0.0).is_err());
    }

    #[test]
    fn csv_layout() {
        let h = tstat_histogram(&[stat(0.2, Family::AcctEw)], Some(&Family::AcctEw), 1.0).unwrap();
        let mut buf = Vec::new();
        write_histogram_csv(&[h], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "family,bin_left,bin_right,count,density,null_density"
        );
        assert!(lines.next().unwrap().starts_with("acct_ew,-0.5,0.5,1,1,"));
    }
}

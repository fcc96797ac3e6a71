//! Strategy return panels: ingestion, windowing and per-strategy summaries.
//!
//! A [`ReturnsPanel`] holds one monthly return series per strategy, each
//! tagged with a [`Family`]. Everything downstream (fitting, prediction,
//! selection, hurdles) starts from the [`StrategyStats`] produced by
//! [`summarize`].

mod histogram;
mod io;
mod stats;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;
use crate::month::Month;

pub use histogram::{tstat_histogram, write_histogram_csv, HistBin, Histogram};
pub use io::{
    load_panel, read_panel_file, save_panel, write_panel_file, ColumnMap, LoadOptions, LoadReport,
};
pub use stats::{
    read_stats, read_stats_file, summarize, summarize_window, write_stats, write_stats_file,
    StrategyStats, Summary, SummaryDiagnostics, DEFAULT_MIN_OBS,
};

/// Default estimation window: 20 years of monthly returns.
pub const DEFAULT_WINDOW_MONTHS: u32 = 240;

/// Strategy family. The six built-in families cross data source with
/// portfolio weighting; anything else is `Custom`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Family {
    AcctEw,
    AcctVw,
    PastretEw,
    PastretVw,
    TickerEw,
    TickerVw,
    Custom(String),
}

impl Family {
    pub const BUILTIN: [Family; 6] = [
        Family::AcctEw,
        Family::AcctVw,
        Family::PastretEw,
        Family::PastretVw,
        Family::TickerEw,
        Family::TickerVw,
    ];

    pub fn label(&self) -> &str {
        match self {
            Family::AcctEw => "acct_ew",
            Family::AcctVw => "acct_vw",
            Family::PastretEw => "pastret_ew",
            Family::PastretVw => "pastret_vw",
            Family::TickerEw => "ticker_ew",
            Family::TickerVw => "ticker_vw",
            Family::Custom(s) => s,
        }
    }

    /// Parse a label; unknown labels become `Custom` only if `allow_custom`.
    pub fn parse(label: &str, allow_custom: bool) -> Result<Family, Error> {
        let f = match label {
            "acct_ew" => Family::AcctEw,
            "acct_vw" => Family::AcctVw,
            "pastret_ew" => Family::PastretEw,
            "pastret_vw" => Family::PastretVw,
            "ticker_ew" => Family::TickerEw,
            "ticker_vw" => Family::TickerVw,
            other if allow_custom && !other.is_empty() => Family::Custom(other.to_string()),
            other => return Err(Error::UnknownFamily(other.to_string())),
        };
        Ok(f)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Family {
    type Err = Error;

    /// Accepts any non-empty label, mapping unknown ones to `Custom`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Family::parse(s, true)
    }
}

impl Serialize for Family {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for Family {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One strategy's monthly returns, sorted by month, at most one per month.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategySeries {
    pub id: String,
    pub family: Family,
    months: Vec<Month>,
    rets: Vec<f64>,
}

impl StrategySeries {
    /// Build from observations in any order. Fails on a repeated month.
    pub fn new(
        id: impl Into<String>,
        family: Family,
        mut obs: Vec<(Month, f64)>,
    ) -> Result<Self, Error> {
        let id = id.into();
        obs.sort_by_key(|&(m, _)| m);
        if let Some(w) = obs.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::DuplicateKey {
                strategy_id: id,
                month: w[0].0.to_string(),
            });
        }
        let (months, rets) = obs.into_iter().unzip();
        Ok(StrategySeries {
            id,
            family,
            months,
            rets,
        })
    }

    /// Build from a contiguous block of months starting at `start`.
    pub fn contiguous(id: impl Into<String>, family: Family, start: Month, rets: Vec<f64>) -> Self {
        let months = (0..rets.len() as i32).map(|i| start.offset(i)).collect();
        StrategySeries {
            id: id.into(),
            family,
            months,
            rets,
        }
    }

    pub fn months(&self) -> &[Month] {
        &self.months
    }

    pub fn rets(&self) -> &[f64] {
        &self.rets
    }

    pub fn len(&self) -> usize {
        self.rets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rets.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Month, f64)> + '_ {
        self.months.iter().copied().zip(self.rets.iter().copied())
    }

    /// Return in `month`, if observed.
    pub fn get(&self, month: Month) -> Option<f64> {
        self.months.binary_search(&month).ok().map(|i| self.rets[i])
    }

    /// Observations with `from <= month <= to`.
    pub fn range(&self, from: Month, to: Month) -> (&[Month], &[f64]) {
        let lo = self.months.partition_point(|&m| m < from);
        let hi = self.months.partition_point(|&m| m <= to);
        (&self.months[lo..hi], &self.rets[lo..hi])
    }
}

/// A panel of strategy return series, kept sorted by strategy id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReturnsPanel {
    series: Vec<StrategySeries>,
    window: Option<(Month, Month)>,
}

impl ReturnsPanel {
    /// Build a panel. Fails if a strategy id appears twice.
    pub fn new(mut series: Vec<StrategySeries>) -> Result<Self, Error> {
        series.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(w) = series.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(Error::invalid(format!(
                "strategy `{}` appears more than once",
                w[0].id
            )));
        }
        Ok(ReturnsPanel {
            series,
            window: None,
        })
    }

    pub fn empty() -> Self {
        ReturnsPanel::default()
    }

    pub fn series(&self) -> &[StrategySeries] {
        &self.series
    }

    pub fn get(&self, id: &str) -> Option<&StrategySeries> {
        self.series
            .binary_search_by(|s| s.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.series[i])
    }

    pub fn n_strategies(&self) -> usize {
        self.series.len()
    }

    pub fn n_rows(&self) -> usize {
        self.series.iter().map(|s| s.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    /// The `(start, end)` bounds this panel was cut to, if it came from [`window`].
    pub fn window_bounds(&self) -> Option<(Month, Month)> {
        self.window
    }

    /// Earliest and latest observed month.
    pub fn month_span(&self) -> Option<(Month, Month)> {
        let first = self.series.iter().filter_map(|s| s.months.first()).min()?;
        let last = self.series.iter().filter_map(|s| s.months.last()).max()?;
        Some((*first, *last))
    }

    /// Sorted union of observed months.
    pub fn months(&self) -> Vec<Month> {
        let set: BTreeSet<Month> = self
            .series
            .iter()
            .flat_map(|s| s.months.iter().copied())
            .collect();
        set.into_iter().collect()
    }

    pub fn families(&self) -> Vec<Family> {
        let set: BTreeSet<&Family> = self.series.iter().map(|s| &s.family).collect();
        set.into_iter().cloned().collect()
    }

    /// Sub-panel of the strategies for which `keep` returns true.
    pub fn filter(&self, mut keep: impl FnMut(&StrategySeries) -> bool) -> ReturnsPanel {
        ReturnsPanel {
            series: self.series.iter().filter(|s| keep(s)).cloned().collect(),
            window: self.window,
        }
    }
}

/// Restrict a panel to months in `(end - length, end]`, dropping strategies
/// left without observations. An empty result is a valid, empty panel.
pub fn window(panel: &ReturnsPanel, end: Month, length_months: u32) -> Result<ReturnsPanel, Error> {
    if length_months == 0 {
        return Err(Error::invalid("window length must be at least one month"));
    }
    let start = end.offset(1 - length_months as i32);
    let (start, end) = match panel.window {
        Some((s0, e0)) => (start.max(s0), end.min(e0)),
        None => (start, end),
    };
    let series = panel
        .series
        .iter()
        .filter_map(|s| {
            let (months, rets) = s.range(start, end);
            (!months.is_empty()).then(|| StrategySeries {
                id: s.id.clone(),
                family: s.family.clone(),
                months: months.to_vec(),
                rets: rets.to_vec(),
            })
        })
        .collect();
    Ok(ReturnsPanel {
        series,
        window: Some((start, end)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(s: &str) -> Month {
        s.parse().unwrap()
    }

    fn monthly_panel(start: Month, n: usize) -> ReturnsPanel {
        let rets = (0..n).map(|i| i as f64 * 1e-3).collect();
        ReturnsPanel::new(vec![StrategySeries::contiguous(
            "s1",
            Family::AcctEw,
            start,
            rets,
        )])
        .unwrap()
    }

    #[test]
    fn window_interval_arithmetic() {
        let p = monthly_panel(m("1950-01"), 50 * 12);
        let w = window(&p, m("1983-06"), 240).unwrap();
        let s = &w.series()[0];
        assert_eq!(s.months().first().unwrap().to_string(), "1963-07");
        assert_eq!(s.months().last().unwrap().to_string(), "1983-06");
        assert_eq!(s.len(), 240);
    }

    #[test]
    fn window_of_length_one() {
        let p = monthly_panel(m("1990-01"), 24);
        let w = window(&p, m("1990-07"), 1).unwrap();
        assert_eq!(w.series()[0].months(), &[m("1990-07")]);
    }

    #[test]
    fn window_outside_data_is_empty() {
        let p = monthly_panel(m("1990-01"), 24);
        let w = window(&p, m("1980-01"), 12).unwrap();
        assert!(w.is_empty());
        assert!(window(&p, m("1980-01"), 0).is_err());
    }

    #[test]
    fn nested_windows_compose() {
        let p = monthly_panel(m("1990-01"), 120);
        let e = m("1997-03");
        let a = window(&window(&p, e, 60).unwrap(), e, 24).unwrap();
        let b = window(&p, e, 24).unwrap();
        assert_eq!(a, b);
        let c = window(&window(&p, e, 24).unwrap(), e, 60).unwrap();
        assert_eq!(c, b);
    }

    #[test]
    fn family_labels_round_trip() {
        for f in Family::BUILTIN {
            assert_eq!(Family::parse(f.label(), false).unwrap(), f);
        }
        assert!(Family::parse("mystery", false).is_err());
        assert_eq!(
            Family::parse("mystery", true).unwrap(),
            Family::Custom("mystery".into())
        );
    }

    #[test]
    fn duplicate_months_rejected() {
        let err = StrategySeries::new(
            "s1",
            Family::AcctEw,
            vec![(m("1990-01"), 0.1), (m("1990-01"), 0.2)],
        )
        .unwrap_err();
        assert!(matches!(err, Error::DuplicateKey { .. }));
    }
}

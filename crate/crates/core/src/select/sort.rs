use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{moments, PERIODS_PER_YEAR};
use crate::ebpredict::predict;
use crate::error::{Error, Result};
use crate::month::Month;
use crate::panel::{
    summarize_window, Family, ReturnsPanel, DEFAULT_MIN_OBS, DEFAULT_WINDOW_MONTHS,
};
use crate::prior::ModelSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Era {
    /// Holding year at or before the split year.
    Early,
    Late,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SortConfig {
    pub first_forecast_year: i32,
    pub last_forecast_year: i32,
    pub window_months: u32,
    pub min_obs: usize,
    pub n_groups: usize,
    /// Last holding year assigned to the early era.
    pub split_year: i32,
    /// Families to sort; `None` sorts every family present.
    pub families: Option<Vec<Family>>,
}

impl SortConfig {
    pub fn new(first_forecast_year: i32, last_forecast_year: i32, split_year: i32) -> Self {
        SortConfig {
            first_forecast_year,
            last_forecast_year,
            window_months: DEFAULT_WINDOW_MONTHS,
            min_obs: DEFAULT_MIN_OBS,
            n_groups: 20,
            split_year,
            families: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.first_forecast_year > self.last_forecast_year {
            return Err(Error::invalid("first forecast year is after the last"));
        }
        if self.n_groups == 0 {
            return Err(Error::invalid("n_groups must be positive"));
        }
        if self.window_months == 0 {
            return Err(Error::invalid("window_months must be positive"));
        }
        Ok(())
    }

    pub fn era(&self, formation_year: i32) -> Era {
        if formation_year + 1 <= self.split_year {
            Era::Early
        } else {
            Era::Late
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SortAccuracyRow {
    pub era: Era,
    pub family: Family,
    /// 1 holds the lowest in-sample means.
    pub group: usize,
    pub n_years: usize,
    pub mean_n_strats: f64,
    pub in_sample_mean_ann: f64,
    pub predicted_mean_ann: f64,
    pub oos_mean_ann: f64,
    pub oos_se_ann: f64,
    pub n_months: usize,
}

impl SortAccuracyRow {
    /// Whether the prediction lies within `k` OOS standard errors.
    pub fn within(&self, k: f64) -> bool {
        (self.predicted_mean_ann - self.oos_mean_ann).abs() <= k * self.oos_se_ann
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedGroup {
    pub year: i32,
    pub family: Family,
    pub group: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SortAccuracy {
    pub rows: Vec<SortAccuracyRow>,
    /// Year-groups with no strategies, or no returns in the holding year.
    pub dropped: Vec<DroppedGroup>,
}

#[derive(Default)]
struct Acc {
    years: usize,
    n_strats: f64,
    in_sample: f64,
    predicted: f64,
    oos: Vec<f64>,
}

/// Group index in `0..groups` of rank `i` among `n`; sizes differ by at most one.
fn group_of(i: usize, n: usize, groups: usize) -> usize {
    i * groups / n
}

/// Sort each family into equal-count groups by trailing mean return and
/// compare the groups' average EB predicted return with the realized
/// return over the following year.
pub fn sort_accuracy(
    panel: &ReturnsPanel,
    models: &BTreeMap<i32, ModelSpec>,
    cfg: &SortConfig,
) -> Result<SortAccuracy> {
    cfg.validate()?;
    let families: Vec<Family> = match &cfg.families {
        Some(f) => f.clone(),
        None => panel.families(),
    };
    for f in &families {
        if !panel.series().iter().any(|s| &s.family == f) {
            return Err(Error::MissingFamily(f.label().to_string()));
        }
    }
    let mut acc: BTreeMap<(Era, Family, usize), Acc> = BTreeMap::new();
    let mut dropped = Vec::new();
    for year in cfg.first_forecast_year..=cfg.last_forecast_year {
        let model = models.get(&year).ok_or(Error::MissingModel(year))?;
        let stats =
            summarize_window(panel, Month::december(year), cfg.window_months, cfg.min_obs)?.stats;
        let era = cfg.era(year);
        for fam in &families {
            let params = model.params(fam)?;
            let mut members: Vec<_> = stats.iter().filter(|s| &s.family == fam).collect();
            members.sort_by(|a, b| {
                a.mean_ret
                    .total_cmp(&b.mean_ret)
                    .then_with(|| a.strategy_id.cmp(&b.strategy_id))
            });
            let n = members.len();
            let mut groups: Vec<Vec<_>> = vec![Vec::new(); cfg.n_groups];
            for (i, s) in members.into_iter().enumerate() {
                groups[group_of(i, n, cfg.n_groups)].push(s);
            }
            for (g, grp) in groups.iter().enumerate() {
                let oos: Vec<f64> = (1..=12)
                    .filter_map(|k| {
                        let month = Month::new(year + 1, k);
                        let rets: Vec<f64> = grp
                            .iter()
                            .filter_map(|s| panel.get(&s.strategy_id).and_then(|x| x.get(month)))
                            .collect();
                        (!rets.is_empty()).then(|| rets.iter().sum::<f64>() / rets.len() as f64)
                    })
                    .collect();
                if grp.is_empty() || oos.is_empty() {
                    dropped.push(DroppedGroup {
                        year,
                        family: fam.clone(),
                        group: g + 1,
                    });
                    continue;
                }
                let m = grp.len() as f64;
                let a = acc.entry((era, fam.clone(), g + 1)).or_default();
                a.years += 1;
                a.n_strats += m;
                a.in_sample += grp.iter().map(|s| s.mean_ret).sum::<f64>() / m * PERIODS_PER_YEAR;
                a.predicted += grp
                    .iter()
                    .map(|s| {
                        let p = predict(s, params, PERIODS_PER_YEAR);
                        p.pred_mean_ret_signed(PERIODS_PER_YEAR)
                    })
                    .sum::<f64>()
                    / m
                    * PERIODS_PER_YEAR;
                a.oos.extend(oos);
            }
        }
    }
    let rows = acc
        .into_iter()
        .map(|((era, family, group), a)| {
            let (mean, sd, n) = moments(&a.oos);
            let y = a.years as f64;
            SortAccuracyRow {
                era,
                family,
                group,
                n_years: a.years,
                mean_n_strats: a.n_strats / y,
                in_sample_mean_ann: a.in_sample / y,
                predicted_mean_ann: a.predicted / y,
                oos_mean_ann: mean * PERIODS_PER_YEAR,
                oos_se_ann: sd / (n as f64).sqrt() * PERIODS_PER_YEAR,
                n_months: n,
            }
        })
        .collect();
    Ok(SortAccuracy { rows, dropped })
}

pub fn write_sort_accuracy_csv<W: Write>(rows: &[SortAccuracyRow], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<sort accuracy csv>", e))?;
    Ok(())
}

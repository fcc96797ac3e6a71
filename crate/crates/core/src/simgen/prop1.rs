use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{generate_panel, GeneratorSpec, Vol};
use crate::error::{Error, Result};
use crate::panel::{summarize, Family};
use crate::prior::{FamilyParams, ModelSpec};
use crate::qmlfit::{fit_family, FitConfig};
use crate::rng::Streams;
use crate::select::{rank, select_top, selection_count, Rule};

/// Which prior the EB rule uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Prop1Mode {
    True,
    Fitted(FitConfig),
}

/// What the naive rule ranks on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ranking {
    /// In-sample Sharpe ratio, a function of `|t|` alone.
    Sharpe,
    /// Absolute mean return; differs from `|t|` when volatilities differ.
    MeanReturn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prop1Config {
    pub params: FamilyParams,
    pub n_strategies: usize,
    pub n_months: usize,
    pub vol: Vol,
    pub top_pct: f64,
    pub n_reps: usize,
    pub seed: u64,
    pub mode: Prop1Mode,
    pub naive_ranking: Ranking,
}

impl Prop1Config {
    pub fn new(
        params: FamilyParams,
        n_strategies: usize,
        top_pct: f64,
        n_reps: usize,
        seed: u64,
    ) -> Self {
        Prop1Config {
            params,
            n_strategies,
            n_months: 240,
            vol: Vol::Constant { sd: 0.03 },
            top_pct,
            n_reps,
            seed,
            mode: Prop1Mode::True,
            naive_ranking: Ranking::Sharpe,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prop1Rep {
    pub rep: usize,
    pub n_selected: usize,
    pub n_common: usize,
    pub overlap: f64,
    pub params_used: FamilyParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prop1Result {
    pub reps: Vec<Prop1Rep>,
    pub mean_overlap: f64,
    pub min_overlap: f64,
    /// Replications with identical selections.
    pub n_identical: usize,
}

/// Repeatedly simulate one family, select the top slice under EB and
/// naive rules, and report the Jaccard overlap of the two sets.
pub fn prop1_harness(cfg: &Prop1Config) -> Result<Prop1Result> {
    if !(cfg.top_pct > 0.0 && cfg.top_pct <= 1.0) || cfg.n_reps == 0 {
        return Err(Error::invalid(
            "top_pct must lie in (0, 1] and n_reps be positive",
        ));
    }
    let fam = Family::AcctEw;
    let streams = Streams::new(cfg.seed);
    let reps = (0..cfg.n_reps)
        .into_par_iter()
        .map(|rep| {
            let spec = GeneratorSpec::single(
                fam.clone(),
                cfg.params,
                cfg.n_strategies,
                cfg.n_months,
                cfg.vol,
                streams.derive("prop1-gen", rep as u64),
            );
            let g = generate_panel(&spec)?;
            let stats = summarize(&g.panel, cfg.n_months.min(60).max(2))?.stats;
            let params = match &cfg.mode {
                Prop1Mode::True => cfg.params,
                Prop1Mode::Fitted(fc) => {
                    let fc = FitConfig {
                        seed: streams.derive("prop1-fit", rep as u64),
                        ..fc.clone()
                    };
                    let t: Vec<f64> = stats.iter().map(|s| s.tstat).collect();
                    fit_family(&t, &fc)?.params
                }
            };
            let model = ModelSpec::new().with(fam.clone(), params);
            let eb = select_top(&stats, Some(&model), Rule::Eb, cfg.top_pct)?;
            let naive = match cfg.naive_ranking {
                Ranking::Sharpe => select_top(&stats, None, Rule::Naive, cfg.top_pct)?,
                Ranking::MeanReturn => {
                    let mut by_mean = rank(&stats, None, Rule::Naive)?;
                    let means: std::collections::HashMap<&str, f64> = stats
                        .iter()
                        .map(|s| (s.strategy_id.as_str(), s.mean_ret.abs()))
                        .collect();
                    by_mean.sort_by(|a, b| {
                        means[b.strategy_id.as_str()]
                            .total_cmp(&means[a.strategy_id.as_str()])
                            .then_with(|| a.strategy_id.cmp(&b.strategy_id))
                    });
                    by_mean.truncate(selection_count(cfg.top_pct, stats.len()));
                    by_mean
                }
            };
            let ov = crate::select::overlap_of(0, &eb, &naive);
            Ok(Prop1Rep {
                rep,
                n_selected: eb.len(),
                n_common: ov.n_common,
                overlap: ov.jaccard,
                params_used: params,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mean_overlap = reps.iter().map(|r| r.overlap).sum::<f64>() / reps.len() as f64;
    let min_overlap = reps.iter().map(|r| r.overlap).fold(f64::INFINITY, f64::min);
    let n_identical = reps.iter().filter(|r| r.overlap == 1.0).count();
    Ok(Prop1Result {
        reps,
        mean_overlap,
        min_overlap,
        n_identical,
    })
}

//! Synthetic panels drawn from the hierarchical model, FDP Monte Carlo,
//! and brute-force oracles used by tests.

mod fdp;
mod prop1;
mod quad;

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::month::Month;
use crate::panel::{Family, ReturnsPanel, StrategySeries};
use crate::prior::{sample_mu_with, FamilyParams};
use crate::rng::Streams;

pub use fdp::{fdp_simulate, write_fdp_bins_csv, FdpBin, FdpConfig, FdpSimResult};
pub use prop1::{prop1_harness, Prop1Config, Prop1Mode, Prop1Rep, Prop1Result, Ranking};
pub use quad::{
    oracle_posterior_mean, oracle_posterior_moments, quad, quad_breaks, trapezoid,
    trapezoid_posterior_moments, OracleMoments,
};

/// Monthly volatility: one value for every strategy, or uniform per strategy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Vol {
    Constant { sd: f64 },
    Uniform { low: f64, high: f64 },
}

impl Vol {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Vol::Constant { sd } => sd > 0.0 && sd.is_finite(),
            Vol::Uniform { low, high } => low > 0.0 && high >= low && high.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("bad volatility {self:?}")))
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            Vol::Constant { sd } => sd,
            Vol::Uniform { low, high } if high > low => rng.random_range(low..high),
            Vol::Uniform { low, .. } => low,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub family: Family,
    pub params: FamilyParams,
    pub n_strategies: usize,
    pub vol: Vol,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub families: Vec<FamilySpec>,
    pub n_months: usize,
    pub start: Month,
    /// Loading on a common N(0, 1) factor; 0 gives independent strategies.
    #[serde(default)]
    pub factor_loading: f64,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn single(
        family: Family,
        params: FamilyParams,
        n_strategies: usize,
        n_months: usize,
        vol: Vol,
        seed: u64,
    ) -> Self {
        GeneratorSpec {
            families: vec![FamilySpec {
                family,
                params,
                n_strategies,
                vol,
            }],
            n_months,
            start: Month::new(1980, 1),
            factor_loading: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.families.is_empty() {
            return Err(Error::invalid("generator needs at least one family"));
        }
        if self.n_months < 2 {
            return Err(Error::invalid("n_months must be at least 2"));
        }
        if !(self.factor_loading.abs() <= 1.0) {
            return Err(Error::invalid("factor_loading must lie in [-1, 1]"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for f in &self.families {
            if f.n_strategies == 0 {
                return Err(Error::invalid(format!(
                    "family {} has no strategies",
                    f.family
                )));
            }
            if !seen.insert(&f.family) {
                return Err(Error::invalid(format!("family {} listed twice", f.family)));
            }
            f.params.validate()?;
            f.vol.validate()?;
        }
        Ok(())
    }

    pub fn n_strategies(&self) -> usize {
        self.families.iter().map(|f| f.n_strategies).sum()
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let spec: GeneratorSpec = serde_json::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        let mut s = String::new();
        r.read_to_string(&mut s)
            .map_err(|e| Error::io("<generator spec>", e))?;
        Self::from_json(&s)
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}

/// True parameters behind one generated strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub strategy_id: String,
    pub family: Family,
    /// Expected full-sample t-stat.
    pub mu_t: f64,
    pub monthly_mean: f64,
    pub vol: f64,
}

pub struct Generated {
    pub panel: ReturnsPanel,
    pub truth: Vec<TruthRow>,
}

/// Simulate a panel: `mu ~ prior`, then monthly returns
/// `mu * s / sqrt(T) + s * (b f_t + sqrt(1 - b^2) e_it)`, so each full-window
/// t-stat is close to `N(mu, 1)`.
pub fn generate_panel(spec: &GeneratorSpec) -> Result<Generated> {
    spec.validate()?;
    let streams = Streams::new(spec.seed);
    let t_len = spec.n_months;
    let beta = spec.factor_loading;
    let idio = (1.0 - beta * beta).sqrt();
    let factor: Vec<f64> = if beta != 0.0 {
        let mut rng = streams.rng("gen-factor", 0);
        (0..t_len)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect()
    } else {
        vec![0.0; t_len]
    };
    let mut jobs = Vec::with_capacity(spec.n_strategies());
    for (fi, f) in spec.families.iter().enumerate() {
        let mut rng = streams.rng("gen-mu", fi as u64);
        let mus = sample_mu_with(&f.params, f.n_strategies, &mut rng);
        let mut vol_rng = streams.rng("gen-vol", fi as u64);
        for (i, mu) in mus.into_iter().enumerate() {
            jobs.push((fi, i, mu, f.vol.draw(&mut vol_rng)));
        }
    }
    let width = spec.n_strategies().to_string().len().max(5);
    let out: Vec<(StrategySeries, TruthRow)> = jobs
        .into_par_iter()
        .enumerate()
        .map(|(g, (fi, i, mu, s))| {
            let fam = &spec.families[fi].family;
            let id = format!("{}-{:0width$}", fam.label(), i, width = width);
            let mean = mu * s / (t_len as f64).sqrt();
            let mut rng = streams.rng("gen-ret", g as u64);
            let rets = factor
                .iter()
                .map(|f| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    mean + s * (beta * f + idio * e)
                })
                .collect();
            let truth = TruthRow {
                strategy_id: id.clone(),
                family: fam.clone(),
                mu_t: mu,
                monthly_mean: mean,
                vol: s,
            };
            (
                StrategySeries::contiguous(id, fam.clone(), spec.start, rets),
                truth,
            )
        })
        .collect();
    let (series, mut truth): (Vec<_>, Vec<_>) = out.into_iter().unzip();
    truth.sort_by(|a, b| a.strategy_id.cmp(&b.strategy_id));
    Ok(Generated {
        panel: ReturnsPanel::new(series)?,
        truth,
    })
}

pub fn write_truth_csv<W: Write>(truth: &[TruthRow], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    for t in truth {
        w.serialize(t)?;
    }
    w.flush().map_err(|e| Error::io("<truth csv>", e))?;
    Ok(())
}

pub fn read_truth_csv<R: Read>(source: R) -> Result<Vec<TruthRow>> {
    csv::Reader::from_reader(source)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

/// Kolmogorov-Smirnov distance between a sample and a CDF.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Sup distance between two CDFs over a grid of `n` points on `[lo, hi]`.
pub fn ks_distance_grid(
    a: impl Fn(f64) -> f64,
    b: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    n: usize,
) -> f64 {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .map(|x| (a(x) - b(x)).abs())
        .fold(0.0, f64::max)
}

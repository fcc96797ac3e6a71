use std::io::Write;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prior::{sample_mu_with, FamilyParams};
use crate::rng::Streams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdpConfig {
    pub params: FamilyParams,
    pub n_strategies: usize,
    /// Discovery rule is `|t| > hurdle`.
    pub hurdle: f64,
    pub n_sims: usize,
    /// Discoveries with `|mu| <= null_band` count as false.
    pub null_band: f64,
    /// Width of the histogram bins above the null band.
    pub bin_width: f64,
    /// Last closed bin edge; larger `|mu|` goes to an open final bin.
    pub max_mu: f64,
    pub seed: u64,
    /// Drop zero-discovery simulations from the FDP distribution instead
    /// of recording them as FDP = 0.
    #[serde(default)]
    pub exclude_empty: bool,
}

impl FdpConfig {
    pub fn new(
        params: FamilyParams,
        n_strategies: usize,
        hurdle: f64,
        n_sims: usize,
        seed: u64,
    ) -> Self {
        FdpConfig {
            params,
            n_strategies,
            hurdle,
            n_sims,
            null_band: 0.1,
            bin_width: 0.5,
            max_mu: 8.0,
            seed,
            exclude_empty: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.hurdle > 0.0) || !(self.null_band > 0.0) || !(self.bin_width > 0.0) {
            return Err(Error::invalid(
                "hurdle, null_band and bin_width must be positive",
            ));
        }
        if self.max_mu < self.null_band {
            return Err(Error::invalid("max_mu must be at least null_band"));
        }
        if self.n_sims == 0 || self.n_strategies == 0 {
            return Err(Error::invalid("n_sims and n_strategies must be positive"));
        }
        Ok(())
    }

    /// Bin edges on `|mu|`: `[0, band]`, then `bin_width` steps, last open.
    pub fn edges(&self) -> Vec<(f64, f64)> {
        let mut e = vec![(0.0, self.null_band)];
        let mut lo = self.null_band;
        while lo < self.max_mu - 1e-12 {
            let hi = (lo + self.bin_width).min(self.max_mu);
            e.push((lo, hi));
            lo = hi;
        }
        e.push((lo, f64::INFINITY));
        e
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdpBin {
    pub mu_left: f64,
    pub mu_right: f64,
    pub mean_share: f64,
    pub p05_share: f64,
    pub p95_share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdpSimResult {
    pub n_sims: usize,
    pub n_strategies: usize,
    pub hurdle: f64,
    pub null_band: f64,
    /// Simulations with no discoveries.
    pub n_empty: usize,
    pub mean_discoveries: f64,
    pub mean_fdp: f64,
    pub fdp_p05: f64,
    pub fdp_p50: f64,
    pub fdp_p95: f64,
    /// Bin shares over simulations with at least one discovery.
    pub bins: Vec<FdpBin>,
    /// Per-simulation FDP in simulation order; empty simulations hold 0.
    #[serde(skip)]
    pub fdp: Vec<f64>,
}

/// Linear-interpolation percentile of sorted data.
pub(crate) fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = p * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

/// Simulate independent strategies `t = mu + e`, keep `|t| > h`, and
/// histogram the discoveries' `|mu|`. The first bin is the null band, so
/// its share is the FDP.
pub fn fdp_simulate(cfg: &FdpConfig) -> Result<FdpSimResult> {
    cfg.validate()?;
    let edges = cfg.edges();
    let streams = Streams::new(cfg.seed);
    let sims: Vec<(usize, Vec<usize>)> = (0..cfg.n_sims)
        .into_par_iter()
        .map(|s| {
            let mut rng = streams.rng("fdp-sim", s as u64);
            let mus = sample_mu_with(&cfg.params, cfg.n_strategies, &mut rng);
            let mut counts = vec![0usize; edges.len()];
            let mut n_disc = 0;
            for mu in mus {
                let e: f64 = StandardNormal.sample(&mut rng);
                if (mu + e).abs() > cfg.hurdle {
                    n_disc += 1;
                    let a = mu.abs();
                    let b = edges
                        .iter()
                        .position(|&(_, hi)| a <= hi)
                        .unwrap_or(edges.len() - 1);
                    counts[b] += 1;
                }
            }
            (n_disc, counts)
        })
        .collect();
    let n_empty = sims.iter().filter(|s| s.0 == 0).count();
    let fdp: Vec<f64> = sims
        .iter()
        .map(|(n, c)| {
            if *n == 0 {
                0.0
            } else {
                c[0] as f64 / *n as f64
            }
        })
        .collect();
    let mut fdp_dist: Vec<f64> = sims
        .iter()
        .zip(&fdp)
        .filter(|((n, _), _)| !cfg.exclude_empty || *n > 0)
        .map(|(_, f)| *f)
        .collect();
    fdp_dist.sort_by(f64::total_cmp);
    let nonempty: Vec<&(usize, Vec<usize>)> = sims.iter().filter(|s| s.0 > 0).collect();
    let bins = edges
        .iter()
        .enumerate()
        .map(|(b, &(lo, hi))| {
            let mut shares: Vec<f64> = nonempty
                .iter()
                .map(|(n, c)| c[b] as f64 / *n as f64)
                .collect();
            let mean = shares.iter().sum::<f64>() / shares.len().max(1) as f64;
            shares.sort_by(f64::total_cmp);
            FdpBin {
                mu_left: lo,
                mu_right: hi,
                mean_share: if shares.is_empty() { f64::NAN } else { mean },
                p05_share: percentile(&shares, 0.05),
                p95_share: percentile(&shares, 0.95),
            }
        })
        .collect();
    let mean_fdp = if fdp_dist.is_empty() {
        f64::NAN
    } else {
        fdp_dist.iter().sum::<f64>() / fdp_dist.len() as f64
    };
    Ok(FdpSimResult {
        n_sims: cfg.n_sims,
        n_strategies: cfg.n_strategies,
        hurdle: cfg.hurdle,
        null_band: cfg.null_band,
        n_empty,
        mean_discoveries: sims.iter().map(|s| s.0 as f64).sum::<f64>() / cfg.n_sims as f64,
        mean_fdp,
        fdp_p05: percentile(&fdp_dist, 0.05),
        fdp_p50: percentile(&fdp_dist, 0.5),
        fdp_p95: percentile(&fdp_dist, 0.95),
        bins,
        fdp,
    })
}

/// `mu_left,mu_right,mean_share,p05_share,p95_share`; the open bin's right
/// edge is written as `inf`.
pub fn write_fdp_bins_csv<W: Write>(res: &FdpSimResult, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record([
        "mu_left",
        "mu_right",
        "mean_share",
        "p05_share",
        "p95_share",
    ])?;
    for b in &res.bins {
        w.write_record([
            b.mu_left.to_string(),
            b.mu_right.to_string(),
            b.mean_share.to_string(),
            b.p05_share.to_string(),
            b.p95_share.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<fdp csv>", e))?;
    Ok(())
}

//! Quasi-maximum-likelihood estimation of family priors.
//!
//! The cross-section of t-statistics in a family is treated as independent
//! draws from the mixture marginal. The likelihood is maximized with
//! BOBYQA (bound-constrained, derivative-free, quadratic models) from
//! several deterministic starting points; the best run wins.

use std::collections::BTreeMap;

use nlopt::{Algorithm, FailState, Nlopt, SuccessState, Target};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::month::Month;
use crate::panel::{self, Family, ReturnsPanel, StrategyStats};
use crate::prior::{log_likelihood_unchecked, FamilyParams, ModelSpec};
use crate::rng::Streams;

/// Internal logit(lambda) is kept within this distance of 0/1.
const LAMBDA_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub low: f64,
    pub high: f64,
}

impl Bounds {
    pub const fn new(low: f64, high: f64) -> Self {
        Bounds { low, high }
    }

    fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.low, self.high)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub theta: Bounds,
    pub sigma: Bounds,
    pub lambda: Bounds,
    pub n_starts: usize,
    pub max_evals: u32,
    /// Absolute objective tolerance for a converged run.
    pub tol: f64,
    pub seed: u64,
    /// Families with fewer t-statistics fall back to the null prior.
    pub min_tstats: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            theta: Bounds::new(-10.0, 10.0),
            sigma: Bounds::new(0.0, 10.0),
            lambda: Bounds::new(0.0, 1.0),
            n_starts: 10,
            max_evals: 5_000,
            tol: 1e-8,
            seed: 0,
            min_tstats: 50,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, b) in [
            ("theta", self.theta),
            ("sigma", self.sigma),
            ("lambda", self.lambda),
        ] {
            if !(b.low < b.high) || !b.low.is_finite() || !b.high.is_finite() {
                return Err(Error::invalid(format!(
                    "{name} bounds must satisfy low < high"
                )));
            }
        }
        if self.sigma.low < 0.0 {
            return Err(Error::invalid("sigma lower bound must be >= 0"));
        }
        if self.lambda.low < 0.0 || self.lambda.high > 1.0 {
            return Err(Error::invalid("lambda bounds must lie in [0, 1]"));
        }
        if ((self.lambda.low + self.lambda.high) - 1.0).abs() > 1e-12 {
            // canonical reordering maps lambda to 1 - lambda
            return Err(Error::invalid("lambda bounds must be symmetric about 1/2"));
        }
        if self.n_starts == 0 {
            return Err(Error::invalid("n_starts must be at least 1"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("tol must be positive"));
        }
        Ok(())
    }

    fn logit_bounds(&self) -> Bounds {
        let lo = self.lambda.low.max(LAMBDA_EPS);
        let hi = self.lambda.high.min(1.0 - LAMBDA_EPS);
        Bounds::new(logit(lo), logit(hi))
    }

    fn lower(&self) -> [f64; 5] {
        let z = self.logit_bounds();
        [
            self.theta.low,
            self.sigma.low,
            self.theta.low,
            self.sigma.low,
            z.low,
        ]
    }

    fn upper(&self) -> [f64; 5] {
        let z = self.logit_bounds();
        [
            self.theta.high,
            self.sigma.high,
            self.theta.high,
            self.sigma.high,
            z.high,
        ]
    }
}

/// Outcome of one optimizer run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartSummary {
    pub start_index: usize,
    pub start: FamilyParams,
    pub params: FamilyParams,
    pub loglik: f64,
    pub n_evals: u32,
    pub converged: bool,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: FamilyParams,
    /// `log_likelihood(tstats, params)`.
    pub loglik: f64,
    /// Objective evaluations summed over all starts.
    pub n_evals: u32,
    /// Whether the winning run met the tolerance before `max_evals`.
    pub converged: bool,
    pub start_index: usize,
    pub starts: Vec<StartSummary>,
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn to_params(x: &[f64]) -> FamilyParams {
    FamilyParams {
        theta1: x[0],
        sigma1: x[1],
        theta2: x[2],
        sigma2: x[3],
        lambda: sigmoid(x[4]),
    }
}

fn to_coords(p: &FamilyParams, cfg: &FitConfig) -> [f64; 5] {
    let lam = p.lambda.clamp(LAMBDA_EPS, 1.0 - LAMBDA_EPS);
    let z = cfg.logit_bounds().clamp(logit(lam));
    [
        cfg.theta.clamp(p.theta1),
        cfg.sigma.clamp(p.sigma1),
        cfg.theta.clamp(p.theta2),
        cfg.sigma.clamp(p.sigma2),
        z,
    ]
}

/// Radical inverse of `i` in `base` (Halton coordinate).
fn halton(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Deterministic starting points: a near-null point, a moment-matched
/// point, then Halton points over a data-scaled box inside the bounds.
fn starting_points(sorted: &[f64], cfg: &FitConfig) -> Vec<FamilyParams> {
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let var = sorted.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / n;
    let sd_mu = (var - 1.0).max(0.01).sqrt();

    let mut starts = vec![
        FamilyParams {
            theta1: 0.0,
            sigma1: 0.0,
            theta2: 0.0,
            sigma2: 1.0,
            lambda: 0.95,
        },
        FamilyParams {
            theta1: mean,
            sigma1: 0.5 * sd_mu,
            theta2: mean,
            sigma2: 1.75f64.sqrt() * sd_mu,
            lambda: 0.5,
        },
    ];

    let th_lo = cfg.theta.clamp(quantile_sorted(sorted, 0.01));
    let th_hi = cfg.theta.clamp(quantile_sorted(sorted, 0.99));
    let sg_hi = cfg.sigma.clamp(2.0 * var.sqrt()).max(cfg.sigma.low);
    let offset = Streams::new(cfg.seed).derive("qml-start", 0) % 4096 + 1;
    let mut i = 0u64;
    while starts.len() < cfg.n_starts {
        let k = offset + i;
        let u = [
            halton(k, 2),
            halton(k, 3),
            halton(k, 5),
            halton(k, 7),
            halton(k, 11),
        ];
        starts.push(FamilyParams {
            theta1: th_lo + u[0] * (th_hi - th_lo),
            sigma1: cfg.sigma.low + u[1] * (sg_hi - cfg.sigma.low),
            theta2: th_lo + u[2] * (th_hi - th_lo),
            sigma2: cfg.sigma.low + u[3] * (sg_hi - cfg.sigma.low),
            lambda: 0.05 + 0.9 * u[4],
        });
        i += 1;
    }
    starts.truncate(cfg.n_starts);
    starts
}

struct Tracker {
    evals: u32,
    best_f: f64,
    best_x: [f64; 5],
}

fn run_start(sorted: &[f64], cfg: &FitConfig, index: usize, start: FamilyParams) -> StartSummary {
    let objective = |x: &[f64], _grad: Option<&mut [f64]>, tr: &mut Tracker| -> f64 {
        let f = log_likelihood_unchecked(sorted, &to_params(x));
        tr.evals += 1;
        if f > tr.best_f {
            tr.best_f = f;
            tr.best_x.copy_from_slice(x);
        }
        f
    };
    let mut x = to_coords(&start, cfg);
    let tracker = Tracker {
        evals: 0,
        best_f: f64::NEG_INFINITY,
        best_x: x,
    };
    let mut opt = Nlopt::new(Algorithm::Bobyqa, 5, objective, Target::Maximize, tracker);
    let configure = |opt: &mut Nlopt<_, Tracker>| -> std::result::Result<(), FailState> {
        opt.set_lower_bounds(&cfg.lower())?;
        opt.set_upper_bounds(&cfg.upper())?;
        opt.set_ftol_abs(cfg.tol)?;
        opt.set_maxeval(cfg.max_evals)?;
        opt.set_initial_step(&[0.5, 0.25, 0.5, 0.25, 0.5])?;
        Ok(())
    };
    let outcome = configure(&mut opt)
        .map_err(|e| (e, f64::NAN))
        .and_then(|_| opt.optimize(&mut x));
    let (converged, status) = match outcome {
        Ok((s, _)) => (
            matches!(
                s,
                SuccessState::Success | SuccessState::FtolReached | SuccessState::XtolReached
            ),
            format!("{s:?}"),
        ),
        // BOBYQA reports this once its trust region hits machine precision
        Err((FailState::RoundoffLimited, _)) => (true, "RoundoffLimited".to_string()),
        Err((e, _)) => (false, format!("{e:?}")),
    };
    let tracker = opt.recover_user_data();
    let params = to_params(&tracker.best_x).canonical();
    StartSummary {
        start_index: index,
        start,
        params,
        loglik: log_likelihood_unchecked(sorted, &params),
        n_evals: tracker.evals,
        converged,
        status,
    }
}

/// Fit one family's prior to its t-statistics.
pub fn fit_family(tstats: &[f64], cfg: &FitConfig) -> Result<FitResult> {
    cfg.validate()?;
    if tstats.len() < cfg.min_tstats {
        return Err(Error::InsufficientData {
            needed: cfg.min_tstats,
            available: tstats.len(),
        });
    }
    if let Some(t) = tstats.iter().find(|t| !t.is_finite()) {
        return Err(Error::invalid(format!("non-finite t-statistic {t}")));
    }
    // a fixed summation order makes the fit independent of input order
    let mut sorted = tstats.to_vec();
    sorted.sort_by(f64::total_cmp);

    let starts = starting_points(&sorted, cfg);
    let runs: Vec<StartSummary> = starts
        .into_par_iter()
        .enumerate()
        .map(|(i, s)| run_start(&sorted, cfg, i, s))
        .collect();

    let best = runs
        .iter()
        .filter(|r| r.loglik.is_finite())
        .fold(None::<&StartSummary>, |acc, r| match acc {
            Some(b) if b.loglik >= r.loglik => Some(b),
            _ => Some(r),
        })
        .ok_or_else(|| Error::invalid("every optimizer start produced a non-finite likelihood"))?;

    Ok(FitResult {
        params: best.params,
        loglik: best.loglik,
        n_evals: runs.iter().map(|r| r.n_evals).sum(),
        converged: best.converged,
        start_index: best.start_index,
        starts: runs.clone(),
    })
}

/// A family that was too small to fit and got the null prior instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fallback {
    pub family: Family,
    pub n_tstats: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFit {
    pub spec: ModelSpec,
    pub fits: BTreeMap<Family, FitResult>,
    pub fallbacks: Vec<Fallback>,
}

/// Fit every family present in `stats`.
pub fn fit_all(stats: &[StrategyStats], cfg: &FitConfig) -> Result<ModelFit> {
    cfg.validate()?;
    let mut by_family: BTreeMap<Family, Vec<f64>> = BTreeMap::new();
    for s in stats {
        by_family.entry(s.family.clone()).or_default().push(s.tstat);
    }
    let mut out = ModelFit {
        spec: ModelSpec::new(),
        fits: BTreeMap::new(),
        fallbacks: Vec::new(),
    };
    for (family, ts) in by_family {
        if ts.len() < cfg.min_tstats {
            out.spec.families.insert(family.clone(), FamilyParams::NULL);
            out.fallbacks.push(Fallback {
                family,
                n_tstats: ts.len(),
            });
            continue;
        }
        let fit = fit_family(&ts, cfg)?;
        out.spec.families.insert(family.clone(), fit.params);
        out.fits.insert(family, fit);
    }
    Ok(out)
}

/// Fit one model per forecast year on the window ending December of that
/// year.
pub fn fit_by_year(
    panel: &ReturnsPanel,
    years: std::ops::RangeInclusive<i32>,
    window_months: u32,
    min_obs: usize,
    cfg: &FitConfig,
) -> Result<BTreeMap<i32, ModelFit>> {
    years
        .map(|y| {
            let w = panel::window(panel, Month::december(y), window_months)?;
            let summary = panel::summarize(&w, min_obs)?;
            Ok((y, fit_all(&summary.stats, cfg)?))
        })
        .collect()
}

/// Per-start diagnostics as CSV.
pub fn write_start_table<W: std::io::Write>(
    fits: &BTreeMap<Family, FitResult>,
    sink: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record([
        "family",
        "start_index",
        "winner",
        "converged",
        "status",
        "n_evals",
        "loglik",
        "theta1",
        "sigma1",
        "theta2",
        "sigma2",
        "lambda",
    ])?;
    for (family, fit) in fits {
        for s in &fit.starts {
            let p = s.params;
            w.write_record([
                family.label().to_string(),
                s.start_index.to_string(),
                (s.start_index == fit.start_index).to_string(),
                s.converged.to_string(),
                s.status.clone(),
                s.n_evals.to_string(),
                s.loglik.to_string(),
                p.theta1.to_string(),
                p.sigma1.to_string(),
                p.theta2.to_string(),
                p.sigma2.to_string(),
                p.lambda.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<start table>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prior::{log_likelihood, sample_mu};
    use rand_distr::{Distribution, StandardNormal};

    fn draw_t(p: &FamilyParams, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = Streams::new(seed).rng("test-noise", 0);
        sample_mu(p, n, seed)
            .into_iter()
            .map(|m| {
                let z: f64 = StandardNormal.sample(&mut rng);
                m + z
            })
            .collect()
    }

    #[test]
    fn too_few_tstats_is_an_error() {
        let err = fit_family(&[0.1; 10], &FitConfig::default()).unwrap_err();
        assert!(matches!(
            err,
            Error::InsufficientData {
                needed: 50,
                available: 10
            }
        ));
    }

    #[test]
    fn config_validation() {
        let mut c = FitConfig::default();
        c.n_starts = 0;
        assert!(c.validate().is_err());
        let mut c = FitConfig::default();
        c.theta = Bounds::new(1.0, -1.0);
        assert!(c.validate().is_err());
        let mut c = FitConfig::default();
        c.lambda = Bounds::new(0.2, 1.0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn result_is_canonical_within_bounds_and_consistent() {
        let truth = FamilyParams::new(0.0, 0.3, 1.0, 2.0, 0.6).unwrap();
        let ts = draw_t(&truth, 2_000, 3);
        let cfg = FitConfig {
            n_starts: 4,
            ..Default::default()
        };
        let fit = fit_family(&ts, &cfg).unwrap();
        let p = fit.params;
        p.validate().unwrap();
        assert!(p.sigma1 <= p.sigma2);
        for th in [p.theta1, p.theta2] {
            assert!((cfg.theta.low..=cfg.theta.high).contains(&th));
        }
        assert!((fit.loglik - log_likelihood(&ts, &p).unwrap()).abs() < 1e-10);
        assert!(fit.starts.iter().all(|s| fit.loglik >= s.loglik));
        assert_eq!(fit.starts.len(), 4);
    }

    #[test]
    fn permutation_leaves_fit_identical() {
        let truth = FamilyParams::new(0.0, 0.5, 0.0, 2.0, 0.5).unwrap();
        let ts = draw_t(&truth, 500, 5);
        let mut rev = ts.clone();
        rev.reverse();
        let cfg = FitConfig {
            n_starts: 3,
            ..Default::default()
        };
        assert_eq!(
            fit_family(&ts, &cfg).unwrap(),
            fit_family(&rev, &cfg).unwrap()
        );
    }

    #[test]
    fn small_family_falls_back_to_null() {
        let mk = |i: usize, fam: Family, t: f64| StrategyStats {
            strategy_id: format!("{fam}-{i}"),
            family: fam,
            window_start: Month::new(2000, 1),
            window_end: Month::new(2019, 12),
            n_obs: 240,
            mean_ret: t,
            sd_ret: 1.0,
            se: 1.0,
            tstat: t,
        };
        let ts = draw_t(&FamilyParams::single(0.0, 1.0).unwrap(), 200, 1);
        let mut stats: Vec<StrategyStats> = ts
            .iter()
            .enumerate()
            .map(|(i, &t)| mk(i, Family::AcctEw, t))
            .collect();
        stats.extend((0..10).map(|i| mk(i, Family::TickerVw, 0.1 * i as f64)));
        let cfg = FitConfig {
            n_starts: 2,
            ..Default::default()
        };
        let fit = fit_all(&stats, &cfg).unwrap();
        assert_eq!(fit.spec.families.len(), 2);
        assert_eq!(fit.spec.families[&Family::TickerVw], FamilyParams::NULL);
        assert_eq!(
            fit.fallbacks,
            vec![Fallback {
                family: Family::TickerVw,
                n_tstats: 10
            }]
        );
        assert!(fit.fits.contains_key(&Family::AcctEw));
    }

    #[test]
    fn halton_is_in_unit_interval() {
        assert_eq!(halton(1, 2), 0.5);
        assert_eq!(halton(3, 2), 0.75);
        assert!((halton(5, 3) - 7.0 / 9.0).abs() < 1e-15);
    }
}

//! The hierarchical model: t-statistics are Normal(mu, 1) around a latent
//! mu that follows a two-component normal mixture within each family.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal;
use crate::panel::Family;
use crate::rng::Streams;

/// Densities below this are floored before taking logs.
pub const DENSITY_FLOOR: f64 = 1e-300;

/// Mixture prior for one family, in t-units.
///
/// `mu ~ Normal(theta1, sigma1^2)` with probability `lambda`, otherwise
/// `Normal(theta2, sigma2^2)`. A zero sigma is a point mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyParams {
    pub theta1: f64,
    pub sigma1: f64,
    pub theta2: f64,
    pub sigma2: f64,
    pub lambda: f64,
}

/// One mixture component with its weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Component {
    pub weight: f64,
    pub mean: f64,
    pub var: f64,
}

impl FamilyParams {
    pub fn new(theta1: f64, sigma1: f64, theta2: f64, sigma2: f64, lambda: f64) -> Result<Self> {
        let p = FamilyParams {
            theta1,
            sigma1,
            theta2,
            sigma2,
            lambda,
        };
        p.validate()?;
        Ok(p)
    }

    /// Everything is noise: mu is exactly zero.
    pub const NULL: FamilyParams = FamilyParams {
        theta1: 0.0,
        sigma1: 0.0,
        theta2: 0.0,
        sigma2: 0.0,
        lambda: 1.0,
    };

    /// A single normal prior Normal(mean, sd^2).
    pub fn single(mean: f64, sd: f64) -> Result<Self> {
        FamilyParams::new(mean, sd, mean, sd, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.theta1,
            self.sigma1,
            self.theta2,
            self.sigma2,
            self.lambda,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite prior parameter in {self:?}"
            )));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::invalid(format!(
                "lambda {} outside [0, 1]",
                self.lambda
            )));
        }
        if self.sigma1 < 0.0 || self.sigma2 < 0.0 {
            return Err(Error::invalid(
                "prior standard deviations must be non-negative",
            ));
        }
        if self.sigma1 > self.sigma2 {
            return Err(Error::invalid(format!(
                "sigma1 {} > sigma2 {}: use canonical() to reorder",
                self.sigma1, self.sigma2
            )));
        }
        Ok(())
    }

    /// Reorder components so that `sigma1 <= sigma2`.
    pub fn canonical(self) -> Self {
        if self.sigma1 <= self.sigma2 {
            self
        } else {
            FamilyParams {
                theta1: self.theta2,
                sigma1: self.sigma2,
                theta2: self.theta1,
                sigma2: self.sigma1,
                lambda: 1.0 - self.lambda,
            }
        }
    }

    pub(crate) fn components(&self) -> [Component; 2] {
        [
            Component {
                weight: self.lambda,
                mean: self.theta1,
                var: self.sigma1 * self.sigma1,
            },
            Component {
                weight: 1.0 - self.lambda,
                mean: self.theta2,
                var: self.sigma2 * self.sigma2,
            },
        ]
    }

    pub fn prior_mean(&self) -> f64 {
        self.lambda * self.theta1 + (1.0 - self.lambda) * self.theta2
    }

    /// Variance of the marginal distribution of t.
    pub fn marginal_variance(&self) -> f64 {
        let m = self.prior_mean();
        self.components()
            .iter()
            .map(|c| c.weight * (c.var + 1.0 + (c.mean - m).powi(2)))
            .sum()
    }
}

/// Prior density of mu. Errors if a weighted component is a point mass.
pub fn prior_density(mu: f64, p: &FamilyParams) -> Result<f64> {
    p.validate()?;
    let mut f = 0.0;
    for (k, c) in p.components().iter().enumerate() {
        if c.weight == 0.0 {
            continue;
        }
        if c.var == 0.0 {
            return Err(Error::DegenerateDensity { component: k + 1 });
        }
        f += c.weight * normal::pdf(mu, c.mean, c.var);
    }
    Ok(f)
}

/// Marginal density of t: the prior convolved with unit-variance noise.
pub fn marginal_density(t: f64, p: &FamilyParams) -> f64 {
    p.components()
        .iter()
        .filter(|c| c.weight > 0.0)
        .map(|c| c.weight * normal::pdf(t, c.mean, c.var + 1.0))
        .sum()
}

/// CDF of the prior of mu; point-mass components contribute steps.
pub fn prior_cdf(mu: f64, p: &FamilyParams) -> f64 {
    p.components()
        .iter()
        .map(|c| {
            let f = if c.var == 0.0 {
                if mu >= c.mean {
                    1.0
                } else {
                    0.0
                }
            } else {
                normal::cdf((mu - c.mean) / c.var.sqrt())
            };
            c.weight * f
        })
        .sum()
}

/// CDF of the marginal distribution of t.
pub fn marginal_cdf(t: f64, p: &FamilyParams) -> f64 {
    p.components()
        .iter()
        .map(|c| c.weight * normal::cdf((t - c.mean) / (c.var + 1.0).sqrt()))
        .sum()
}

/// Log of [`marginal_density`] via log-sum-exp, floored at `ln(1e-300)`.
pub fn ln_marginal_density(t: f64, p: &FamilyParams) -> f64 {
    LnMarginal::new(p).eval(t)
}

/// [`ln_marginal_density`] with per-component constants hoisted out, for
/// evaluating many t-statistics under one parameter vector.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LnMarginal {
    // (log normalizing constant incl. weight, mean, 1 / (2 var))
    terms: [(f64, f64, f64); 2],
}

impl LnMarginal {
    pub fn new(p: &FamilyParams) -> Self {
        let term = |c: Component| {
            if c.weight > 0.0 {
                let var = c.var + 1.0;
                (
                    c.weight.ln() - normal::LN_SQRT_2PI - 0.5 * var.ln(),
                    c.mean,
                    0.5 / var,
                )
            } else {
                (f64::NEG_INFINITY, 0.0, 0.0)
            }
        };
        let [a, b] = p.components();
        LnMarginal {
            terms: [term(a), term(b)],
        }
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        let [(ca, ma, ka), (cb, mb, kb)] = self.terms;
        let la = ca - ka * (t - ma) * (t - ma);
        let lb = cb - kb * (t - mb) * (t - mb);
        let (hi, lo) = if la >= lb { (la, lb) } else { (lb, la) };
        let lse = if lo == f64::NEG_INFINITY {
            hi
        } else {
            hi + (lo - hi).exp().ln_1p()
        };
        lse.max(DENSITY_FLOOR.ln())
    }
}

/// Quasi log-likelihood of a cross-section of t-statistics.
pub fn log_likelihood(tstats: &[f64], p: &FamilyParams) -> Result<f64> {
    if tstats.is_empty() {
        return Err(Error::invalid(
            "log_likelihood needs at least one t-statistic",
        ));
    }
    if let Some(t) = tstats.iter().find(|t| !t.is_finite()) {
        return Err(Error::invalid(format!("non-finite t-statistic {t}")));
    }
    Ok(log_likelihood_unchecked(tstats, p))
}

#[inline]
pub(crate) fn log_likelihood_unchecked(tstats: &[f64], p: &FamilyParams) -> f64 {
    let f = LnMarginal::new(p);
    tstats.iter().map(|&t| f.eval(t)).sum()
}

/// `n` independent draws of mu from the prior.
pub fn sample_mu(p: &FamilyParams, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = Streams::new(seed).rng("prior-mu", 0);
    sample_mu_with(p, n, &mut rng)
}

pub(crate) fn sample_mu_with<R: Rng + ?Sized>(p: &FamilyParams, n: usize, rng: &mut R) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let first = rng.random::<f64>() < p.lambda;
            let (m, s) = if first {
                (p.theta1, p.sigma1)
            } else {
                (p.theta2, p.sigma2)
            };
            let z: f64 = StandardNormal.sample(rng);
            m + s * z
        })
        .collect()
}

/// Prior parameters for every family in a panel.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModelSpec {
    pub families: BTreeMap<Family, FamilyParams>,
}

impl ModelSpec {
    pub fn new() -> Self {
        ModelSpec::default()
    }

    pub fn with(mut self, family: Family, params: FamilyParams) -> Self {
        self.families.insert(family, params);
        self
    }

    pub fn params(&self, family: &Family) -> Result<&FamilyParams> {
        self.families
            .get(family)
            .ok_or_else(|| Error::MissingFamily(family.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let spec: ModelSpec = serde_json::from_str(s)?;
        for p in spec.families.values() {
            p.validate()?;
        }
        Ok(spec)
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.to_json()?.as_bytes())
            .map_err(|e| Error::io("<model json>", e))
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        let mut s = String::new();
        r.read_to_string(&mut s)
            .map_err(|e| Error::io("<model json>", e))?;
        ModelSpec::from_json(&s)
    }
}

//! Bias-corrected predictions from the mixture prior.
//!
//! Under `t | mu ~ Normal(mu, 1)` and a normal-mixture prior the posterior
//! is again a normal mixture, so posterior means and variances are closed
//! form. Component `k` contributes mean `(s_k^2 t + theta_k) / (s_k^2 + 1)`
//! and variance `s_k^2 / (s_k^2 + 1)`, weighted by its share of the
//! marginal density at `t`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal;
use crate::panel::{Family, StrategyStats};
use crate::prior::{marginal_density, FamilyParams};

/// Posterior mixture at a given t: (weight, mean, variance) per component.
fn posterior_components(t: f64, p: &FamilyParams) -> [(f64, f64, f64); 2] {
    let comps = p.components();
    let mut logw = [f64::NEG_INFINITY; 2];
    for (k, c) in comps.iter().enumerate() {
        if c.weight > 0.0 {
            logw[k] = c.weight.ln() + normal::ln_pdf(t, c.mean, c.var + 1.0);
        }
    }
    let hi = logw[0].max(logw[1]);
    let raw = [(logw[0] - hi).exp(), (logw[1] - hi).exp()];
    let total = raw[0] + raw[1];
    let mut out = [(0.0, 0.0, 0.0); 2];
    for (k, c) in comps.iter().enumerate() {
        let denom = c.var + 1.0;
        out[k] = (raw[k] / total, (c.var * t + c.mean) / denom, c.var / denom);
    }
    out
}

/// E(mu | t) under prior `p`, in t-units.
pub fn posterior_mean_t(t: f64, p: &FamilyParams) -> f64 {
    posterior_components(t, p)
        .iter()
        .map(|&(w, m, _)| w * m)
        .sum()
}

/// Var(mu | t) under prior `p`.
pub fn posterior_var_t(t: f64, p: &FamilyParams) -> f64 {
    let comps = posterior_components(t, p);
    let mean: f64 = comps.iter().map(|&(w, m, _)| w * m).sum();
    let second: f64 = comps.iter().map(|&(w, m, v)| w * (m * m + v)).sum();
    // mixture variance = within + between; written this way it cannot go negative
    let between: f64 = comps
        .iter()
        .map(|&(w, m, _)| w * (m - mean) * (m - mean))
        .sum();
    let within: f64 = comps.iter().map(|&(w, _, v)| w * v).sum();
    debug_assert!((second - mean * mean - within - between).abs() < 1e-8 * (1.0 + second.abs()));
    within + between
}

/// Analytic derivative of [`posterior_mean_t`] with respect to t.
///
/// Differentiating the weights gives `sum w_k v_k + sum w_k m_k (m_k - t - c)`
/// where `c = sum w_j (m_j - t)`, i.e. the within- plus between-component
/// variance.
pub fn posterior_mean_derivative(t: f64, p: &FamilyParams) -> f64 {
    let comps = posterior_components(t, p);
    // d/dt log(lambda_k phi(t; theta_k, var_k + 1)) = (theta_k - t) / (var_k + 1) = m_k - t
    let score_bar: f64 = comps.iter().map(|&(w, m, _)| w * (m - t)).sum();
    comps
        .iter()
        .map(|&(w, m, v)| w * v + w * m * ((m - t) - score_bar))
        .sum()
}

/// d/dt log f(t) for the marginal density f, analytically.
pub fn marginal_score(t: f64, p: &FamilyParams) -> f64 {
    posterior_components(t, p)
        .iter()
        .zip(p.components().iter())
        .map(|(&(w, _, _), c)| -w * (t - c.mean) / (c.var + 1.0))
        .sum()
}

/// Tweedie's formula with unit noise variance: `t + d/dt log f(t)`.
pub fn tweedie_mean(t: f64, p: &FamilyParams) -> f64 {
    t + marginal_score(t, p)
}

/// [`tweedie_mean`] with the score taken by central finite differences of
/// `log f`. Only useful as a self-check.
pub fn tweedie_mean_fd(t: f64, p: &FamilyParams, fd_step: f64) -> Result<f64> {
    if !(fd_step > 0.0) {
        return Err(Error::invalid("fd_step must be positive"));
    }
    let lf = |x: f64| marginal_density(x, p).ln();
    Ok(t + (lf(t + fd_step) - lf(t - fd_step)) / (2.0 * fd_step))
}

/// Result of the common-variance shrinkage rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Shrunk {
    pub value: f64,
    /// Set when `var_hat < 1` forced full shrinkage.
    pub clamped: bool,
}

/// Shrink `t` toward zero by `1 - 1 / var_hat`, where `var_hat` is the
/// cross-sectional variance of t. This is the posterior mean under a
/// `Normal(0, var_hat - 1)` prior.
pub fn shrinkage_special_case(t: f64, var_hat: f64) -> Shrunk {
    if var_hat < 1.0 || var_hat.is_nan() {
        return Shrunk {
            value: 0.0,
            clamped: true,
        };
    }
    Shrunk {
        value: (1.0 - 1.0 / var_hat) * t,
        clamped: false,
    }
}

/// An EB prediction for one strategy, re-signed so the prediction is
/// non-negative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub strategy_id: String,
    pub family: Family,
    pub tstat: f64,
    /// E(mu | t), signed as estimated (before re-signing).
    pub post_mean_t: f64,
    pub post_var_t: f64,
    /// `|post_mean_t| * se * periods_per_year`.
    pub pred_mean_ret_ann: f64,
    /// `|post_mean_t| / sqrt(n_obs) * sqrt(periods_per_year)`.
    pub pred_sharpe_ann: f64,
    /// Position sign, `+1` or `-1`; zero predictions take `+1`.
    pub sign: i8,
}

impl Prediction {
    /// Signed predicted return per period, in return units.
    pub fn pred_mean_ret_signed(&self, periods_per_year: f64) -> f64 {
        self.sign as f64 * self.pred_mean_ret_ann / periods_per_year
    }
}

/// Predict one strategy's performance under its family's prior.
pub fn predict(stats: &StrategyStats, p: &FamilyParams, periods_per_year: f64) -> Prediction {
    let post_mean_t = posterior_mean_t(stats.tstat, p);
    let post_var_t = posterior_var_t(stats.tstat, p);
    let sign = if post_mean_t < 0.0 { -1 } else { 1 };
    let mag = post_mean_t.abs();
    Prediction {
        strategy_id: stats.strategy_id.clone(),
        family: stats.family.clone(),
        tstat: stats.tstat,
        post_mean_t,
        post_var_t,
        pred_mean_ret_ann: mag * stats.se * periods_per_year,
        pred_sharpe_ann: mag / (stats.n_obs as f64).sqrt() * periods_per_year.sqrt(),
        sign,
    }
}

/// Predict every strategy under the model for its family.
pub fn predict_all(
    stats: &[StrategyStats],
    model: &crate::prior::ModelSpec,
    periods_per_year: f64,
) -> Result<Vec<Prediction>> {
    stats
        .iter()
        .map(|s| Ok(predict(s, model.params(&s.family)?, periods_per_year)))
        .collect()
}

/// Write `strategy_id,family,tstat,post_mean_t,post_var_t,pred_mean_ret_ann,pred_sharpe_ann,sign`.
pub fn write_predictions<W: std::io::Write>(preds: &[Prediction], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    for p in preds {
        w.serialize(p)?;
    }
    w.flush().map_err(|e| Error::io("<predictions csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::month::Month;

    fn conj() -> FamilyParams {
        FamilyParams::single(0.0, 1.0).unwrap()
    }

    fn stats(t: f64, n: usize, se: f64) -> StrategyStats {
        StrategyStats {
            strategy_id: "s".into(),
            family: Family::AcctEw,
            window_start: Month::new(2000, 1),
            window_end: Month::new(2019, 12),
            n_obs: n,
            mean_ret: t * se,
            sd_ret: se * (n as f64).sqrt(),
            se,
            tstat: t,
        }
    }

    #[test]
    fn null_prior_shrinks_everything() {
        for t in [-7.0, -1.0, 0.0, 2.5, 40.0] {
            assert_eq!(posterior_mean_t(t, &FamilyParams::NULL), 0.0);
            assert_eq!(posterior_var_t(t, &FamilyParams::NULL), 0.0);
            assert!(tweedie_mean(t, &FamilyParams::NULL).abs() < 1e-12);
        }
    }

    #[test]
    fn conjugate_normal() {
        assert!((posterior_mean_t(3.0, &conj()) - 1.5).abs() < 1e-15);
        for t in [-4.0, 0.0, 3.3] {
            assert!((posterior_var_t(t, &conj()) - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn shrinkage_rule() {
        assert_eq!(shrinkage_special_case(4.0, 2.0).value, 2.0);
        for t in [-3.0, 0.5, 8.0] {
            assert_eq!(shrinkage_special_case(t, 1.0).value, 0.0);
        }
        let s = shrinkage_special_case(4.0, 0.8);
        assert!(s.clamped);
        assert_eq!(s.value, 0.0);
    }

    #[test]
    fn fd_step_must_be_positive() {
        assert!(tweedie_mean_fd(1.0, &conj(), 0.0).is_err());
    }

    #[test]
    fn tweedie_finite_difference_is_second_order() {
        let p = FamilyParams::new(0.0, 0.1, 0.0, 2.0, 0.5).unwrap();
        let exact = tweedie_mean(2.5, &p);
        let e1 = (tweedie_mean_fd(2.5, &p, 1e-2).unwrap() - exact).abs();
        let e2 = (tweedie_mean_fd(2.5, &p, 5e-3).unwrap() - exact).abs();
        // halving the step cuts the error by about four
        assert!(e2 < e1 / 3.0 && e2 > e1 / 5.0, "e1={e1} e2={e2}");
    }

    #[test]
    fn predicted_sharpe_convention() {
        let p = FamilyParams::single(0.0, 1.0).unwrap();
        // post mean 3 needs t = 6 under the conjugate prior
        let pred = predict(&stats(6.0, 240, 0.002), &p, 12.0);
        assert!((pred.post_mean_t - 3.0).abs() < 1e-12);
        assert!((pred.pred_sharpe_ann - 0.6708).abs() < 1e-4);
        assert!((pred.pred_mean_ret_ann - 3.0 * 0.002 * 12.0).abs() < 1e-15);
        assert_eq!(pred.sign, 1);
    }

    #[test]
    fn zero_prediction_takes_positive_sign() {
        let pred = predict(&stats(2.0, 240, 0.01), &FamilyParams::NULL, 12.0);
        assert_eq!(pred.pred_mean_ret_ann, 0.0);
        assert_eq!(pred.sign, 1);
        let neg = predict(&stats(-2.0, 240, 0.01), &conj(), 12.0);
        assert_eq!(neg.sign, -1);
        assert!(neg.pred_mean_ret_ann > 0.0);
    }

    #[test]
    fn monotone_magnitude_on_grid() {
        let p = FamilyParams::new(0.3, 0.2, -0.5, 2.5, 0.6).unwrap();
        let grid: Vec<f64> = (0..=400).map(|i| i as f64 * 0.025).collect();
        for sign in [1.0, -1.0] {
            let mags: Vec<f64> = grid
                .iter()
                .map(|&t| posterior_mean_t(sign * t, &p) * sign)
                .collect();
            // moving t away from zero in either direction never pulls E(mu|t) back
            for w in mags.windows(2) {
                assert!(w[1] >= w[0], "{sign}: {w:?}");
            }
        }
    }
}

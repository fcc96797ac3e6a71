//! Multiple-testing hurdles in t-stat units.
//!
//! `hurdle_by13` and `hurdle_storey` pick the smallest `h` such that the
//! estimated false discovery rate `pi * Pr(|Z| > h) / share(|t| > h)` is at
//! most `q*`. `hurdle_rw` controls `Pr(FDP > p*) <= q*` with a bootstrap
//! step-down procedure.

mod eval;
mod rw;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal::{cdf, two_sided_tail, two_sided_tail_inv};

pub use eval::{
    evaluate_hurdles, write_bins_csv, BinRow, EvalOptions, Evaluation, HurdleEval,
    DEFAULT_HIGH_OOS_ANN,
};
pub use rw::{hurdle_rw, kfwer_hurdle, Bootstrap, RwConfig, RwDiagnostics, RwStep};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    By13,
    Storey,
    Rw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Diagnostics {
    Grid {
        /// Distinct `|t|` values searched, including 0.
        n_candidates: usize,
        /// Lower end of the interval holding the hurdle.
        interval_low: Option<f64>,
    },
    Bootstrap(RwDiagnostics),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HurdleResult {
    pub method: Method,
    pub q_star: f64,
    pub p_star: Option<f64>,
    /// `+inf` when nothing can be discovered.
    #[serde(with = "inf_as_string")]
    pub hurdle: f64,
    /// Count of `|t| > hurdle`.
    pub n_discoveries: usize,
    /// Null-share constant: the harmonic number for by13, the null-share
    /// estimate for storey.
    pub pi_constant: Option<f64>,
    pub diagnostics: Diagnostics,
}

impl HurdleResult {
    pub fn discovers(&self, t: f64) -> bool {
        t.abs() > self.hurdle
    }
}

mod inf_as_string {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(x),
            Raw::Str(s) if s == "inf" => Ok(f64::INFINITY),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("bad hurdle {s:?}"))),
        }
    }
}

/// `sum_{i=1}^{n} 1/i`.
pub fn harmonic(n: usize) -> f64 {
    (1..=n).map(|i| 1.0 / i as f64).sum()
}

/// Share of `|t| <= cutoff` over its expected share under the null, capped at 1.
pub fn pi_storey(tstats: &[f64], null_cutoff: f64) -> f64 {
    let inside = tstats.iter().filter(|t| t.abs() <= null_cutoff).count() as f64;
    let null_share = 2.0 * cdf(null_cutoff) - 1.0;
    (inside / tstats.len() as f64 / null_share).min(1.0)
}

fn check_q(q_star: f64) -> Result<()> {
    if q_star > 0.0 && q_star < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("q* = {q_star} outside (0, 1)")))
    }
}

/// Smallest `h >= 0` with `pi * Pr(|Z| > h) <= q * share(|t| > h)`.
///
/// The share is constant on each interval `[a_j, a_{j+1})` between sorted
/// distinct `|t|` values (with 0 prepended), so the exact minimum is
/// found interval by interval.
pub fn min_fdr_hurdle(tstats: &[f64], q_star: f64, pi: f64) -> (f64, usize, Option<f64>) {
    let mut abs: Vec<f64> = tstats.iter().map(|t| t.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let n = abs.len();
    let mut knots = Vec::with_capacity(n + 1);
    knots.push(0.0);
    for &a in &abs {
        if a > *knots.last().unwrap() {
            knots.push(a);
        }
    }
    // index of the first |t| > knot, advanced monotonically
    let mut first_above = 0usize;
    for j in 0..knots.len() {
        let lo = knots[j];
        while first_above < n && abs[first_above] <= lo {
            first_above += 1;
        }
        let above = n - first_above;
        if above == 0 {
            break;
        }
        let share = above as f64 / n as f64;
        let z = if pi > 0.0 {
            two_sided_tail_inv(q_star * share / pi)
        } else {
            0.0
        };
        let h = lo.max(z);
        let hi = knots.get(j + 1).copied().unwrap_or(f64::INFINITY);
        if h < hi && pi * two_sided_tail(h) <= q_star * share * (1.0 + 1e-12) {
            return (h, above, Some(lo));
        }
    }
    (f64::INFINITY, 0, None)
}

fn grid_result(method: Method, tstats: &[f64], q_star: f64, pi: f64) -> HurdleResult {
    let n_candidates = {
        let mut a: Vec<f64> = tstats.iter().map(|t| t.abs()).chain([0.0]).collect();
        a.sort_by(f64::total_cmp);
        a.dedup();
        a.len()
    };
    let (hurdle, n_discoveries, interval_low) = min_fdr_hurdle(tstats, q_star, pi);
    HurdleResult {
        method,
        q_star,
        p_star: None,
        hurdle,
        n_discoveries,
        pi_constant: Some(pi),
        diagnostics: Diagnostics::Grid {
            n_candidates,
            interval_low,
        },
    }
}

/// Benjamini-Yekutieli hurdle valid under arbitrary dependence.
pub fn hurdle_by13(tstats: &[f64], q_star: f64) -> Result<HurdleResult> {
    check_q(q_star)?;
    if tstats.is_empty() {
        return Err(Error::InsufficientData {
            needed: 1,
            available: 0,
        });
    }
    Ok(grid_result(
        Method::By13,
        tstats,
        q_star,
        harmonic(tstats.len()),
    ))
}

pub const STOREY_NULL_CUTOFF: f64 = 1.0;

/// Storey hurdle with the null share estimated from `|t| <= null_cutoff`.
pub fn hurdle_storey(tstats: &[f64], q_star: f64, null_cutoff: f64) -> Result<HurdleResult> {
    check_q(q_star)?;
    if tstats.is_empty() {
        return Err(Error::InsufficientData {
            needed: 1,
            available: 0,
        });
    }
    if !(null_cutoff > 0.0) {
        return Err(Error::invalid("null cutoff must be positive"));
    }
    Ok(grid_result(
        Method::Storey,
        tstats,
        q_star,
        pi_storey(tstats, null_cutoff),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    /// Discovery set by brute force over observed cutoffs: `{|t| >= c}` is
    /// reachable iff some `h < c` just below `c` meets the bound.
    fn brute_force_count(tstats: &[f64], q: f64, pi: f64) -> usize {
        let n = tstats.len() as f64;
        let mut abs: Vec<f64> = tstats.iter().map(|t| t.abs()).collect();
        abs.sort_by(f64::total_cmp);
        for (i, &c) in abs.iter().enumerate() {
            if c == 0.0 || (i > 0 && abs[i - 1] == c) {
                continue;
            }
            let above = (abs.len() - i) as f64;
            if pi * two_sided_tail(c) < q * above / n {
                return abs.len() - i;
            }
        }
        0
    }

    fn mixed_sample(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let z: f64 = StandardNormal.sample(&mut rng);
                if i % 2 == 0 {
                    z
                } else {
                    3.0 + z
                }
            })
            .collect()
    }

    #[test]
    fn single_test_is_bonferroni() {
        let r = hurdle_by13(&[2.5], 0.05).unwrap();
        assert_eq!(r.pi_constant, Some(1.0));
        assert!((r.hurdle - 1.959963984540054).abs() < 1e-9);
        assert_eq!(r.n_discoveries, 1);
        let r = hurdle_by13(&[-1.9], 0.05).unwrap();
        assert!(r.hurdle.is_infinite());
        assert_eq!(r.n_discoveries, 0);
    }

    #[test]
    fn harmonic_four() {
        assert!((harmonic(4) - 25.0 / 12.0).abs() < 1e-15);
        let r = hurdle_by13(&[1.0, 2.0, 3.0, 4.0], 0.05).unwrap();
        assert!((r.pi_constant.unwrap() - 25.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn storey_extremes() {
        let all_five = vec![5.0; 100];
        let r = hurdle_storey(&all_five, 0.1, 1.0).unwrap();
        assert_eq!(r.pi_constant, Some(0.0));
        assert_eq!(r.hurdle, 0.0);
        assert_eq!(r.n_discoveries, 100);

        let zeros = vec![0.0; 50];
        let r = hurdle_storey(&zeros, 0.1, 1.0).unwrap();
        assert_eq!(r.pi_constant, Some(1.0));
        assert!(r.hurdle.is_infinite());
    }

    #[test]
    fn pi_storey_constant() {
        assert!((2.0 * cdf(1.0) - 1.0 - 0.682689492137086).abs() < 1e-12);
    }

    #[test]
    fn matches_brute_force_oracle() {
        let t = mixed_sample(10_000, 7);
        let by = hurdle_by13(&t, 0.01).unwrap();
        assert_eq!(
            by.n_discoveries,
            brute_force_count(&t, 0.01, harmonic(t.len()))
        );
        assert_eq!(
            by.n_discoveries,
            t.iter().filter(|x| x.abs() > by.hurdle).count()
        );
        let st = hurdle_storey(&t, 0.10, 1.0).unwrap();
        assert_eq!(
            st.n_discoveries,
            brute_force_count(&t, 0.10, st.pi_constant.unwrap())
        );
        assert!(st.hurdle < by.hurdle);
    }

    #[test]
    fn hurdle_is_the_continuous_minimum() {
        let t = mixed_sample(500, 3);
        for q in [0.01, 0.05, 0.2] {
            let pi = pi_storey(&t, 1.0);
            let (h, _, _) = min_fdr_hurdle(&t, q, pi);
            let share = |h: f64| t.iter().filter(|x| x.abs() > h).count() as f64 / t.len() as f64;
            assert!(pi * two_sided_tail(h) <= q * share(h) * (1.0 + 1e-9));
            // slightly lower fails
            let g = h - 1e-7;
            assert!(g < 0.0 || pi * two_sided_tail(g) > q * share(g));
        }
    }

    #[test]
    fn serde_infinite_hurdle() {
        let r = hurdle_by13(&[0.1], 0.05).unwrap();
        let js = serde_json::to_string(&r).unwrap();
        assert!(js.contains("\"hurdle\":\"inf\""));
        let back: HurdleResult = serde_json::from_str(&js).unwrap();
        assert!(back.hurdle.is_infinite());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn by13_dominates_storey(ts in prop::collection::vec(-6.0f64..6.0, 1..200), q in 0.01f64..0.5) {
                let by = hurdle_by13(&ts, q).unwrap();
                let st = hurdle_storey(&ts, q, 1.0).unwrap();
                prop_assert!(by.pi_constant.unwrap() >= 1.0);
                prop_assert!(st.pi_constant.unwrap() <= 1.0);
                prop_assert!(by.hurdle >= st.hurdle);
            }

            #[test]
            fn non_increasing_in_q(ts in prop::collection::vec(-6.0f64..6.0, 1..200), q in 0.01f64..0.4) {
                let a = hurdle_storey(&ts, q, 1.0).unwrap().hurdle;
                let b = hurdle_storey(&ts, q + 0.05, 1.0).unwrap().hurdle;
                prop_assert!(b <= a);
                let a = hurdle_by13(&ts, q).unwrap().hurdle;
                let b = hurdle_by13(&ts, q + 0.05).unwrap().hurdle;
                prop_assert!(b <= a);
            }

            #[test]
            fn count_matches_hurdle(ts in prop::collection::vec(-6.0f64..6.0, 1..200), q in 0.01f64..0.5) {
                let r = hurdle_storey(&ts, q, 1.0).unwrap();
                prop_assert_eq!(r.n_discoveries, ts.iter().filter(|t| t.abs() > r.hurdle).count());
            }
        }
    }
}

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_q, Diagnostics, HurdleResult, Method};
use crate::error::{Error, Result};
use crate::month::Month;
use crate::panel::ReturnsPanel;
use crate::rng::Streams;

/// Enumeration stops once the number of subsets would exceed this.
pub const MAX_SUBSETS: u64 = 100;
pub const DEFAULT_N_BOOT: usize = 2000;
const MIN_MONTHS: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RwConfig {
    pub p_star: f64,
    pub q_star: f64,
    pub n_boot: usize,
    pub seed: u64,
}

impl RwConfig {
    pub fn new(p_star: f64, q_star: f64, seed: u64) -> Self {
        RwConfig {
            p_star,
            q_star,
            n_boot: DEFAULT_N_BOOT,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RwStep {
    pub k: usize,
    pub hurdle: f64,
    pub n_rejected: usize,
    /// Whether `k / (n_rejected + 1) > p*`.
    pub satisfied: bool,
    /// Step-down passes run for this `k`.
    pub passes: usize,
    /// Whether the subset cap cut the step-down short.
    pub capped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RwDiagnostics {
    pub n_boot: usize,
    pub seed: u64,
    pub n_strategies: usize,
    pub n_months: usize,
    pub k: usize,
    /// Bootstrap t-stats set to zero for lack of data or variance.
    pub degenerate_boot_t: usize,
    pub steps: Vec<RwStep>,
}

/// Bootstrap `|t*|` draws, one row of `n_strategies` per draw.
#[derive(Debug, Clone)]
pub struct Bootstrap {
    pub n_boot: usize,
    pub n_strategies: usize,
    abs_t: Vec<f64>,
    pub degenerate: usize,
}

impl Bootstrap {
    /// Demean each strategy, then resample calendar months with
    /// replacement from the union of months in the panel.
    pub fn draw(panel: &ReturnsPanel, n_boot: usize, seed: u64) -> Bootstrap {
        let months = panel.months();
        let t_len = months.len();
        let index: BTreeMap<Month, usize> =
            months.iter().enumerate().map(|(i, m)| (*m, i)).collect();
        let n = panel.n_strategies();
        // column-major, NaN where missing
        let mut cols = vec![f64::NAN; n * t_len];
        for (j, s) in panel.series().iter().enumerate() {
            let mean = s.rets().iter().sum::<f64>() / s.len().max(1) as f64;
            for (m, r) in s.iter() {
                cols[j * t_len + index[&m]] = r - mean;
            }
        }
        let streams = Streams::new(seed);
        let rows: Vec<(Vec<f64>, usize)> = (0..n_boot)
            .into_par_iter()
            .map(|b| {
                let mut rng = streams.rng("rw-boot", b as u64);
                let draw: Vec<usize> = (0..t_len).map(|_| rng.random_range(0..t_len)).collect();
                let mut bad = 0;
                let row = (0..n)
                    .map(|j| {
                        let col = &cols[j * t_len..(j + 1) * t_len];
                        let t = boot_t(col, &draw);
                        if t.is_none() {
                            bad += 1;
                        }
                        t.unwrap_or(0.0).abs()
                    })
                    .collect();
                (row, bad)
            })
            .collect();
        let degenerate = rows.iter().map(|r| r.1).sum();
        Bootstrap {
            n_boot,
            n_strategies: n,
            abs_t: rows.into_iter().flat_map(|r| r.0).collect(),
            degenerate,
        }
    }

    pub fn row(&self, b: usize) -> &[f64] {
        &self.abs_t[b * self.n_strategies..(b + 1) * self.n_strategies]
    }
}

fn boot_t(col: &[f64], draw: &[usize]) -> Option<f64> {
    let mut n = 0usize;
    let mut sum = 0.0;
    for &i in draw {
        let v = col[i];
        if !v.is_nan() {
            n += 1;
            sum += v;
        }
    }
    if n < 2 {
        return None;
    }
    let mean = sum / n as f64;
    let ss: f64 = draw
        .iter()
        .map(|&i| col[i])
        .filter(|v| !v.is_nan())
        .map(|v| (v - mean) * (v - mean))
        .sum();
    let sd = (ss / (n - 1) as f64).sqrt();
    (sd > 0.0).then(|| mean / (sd / (n as f64).sqrt()))
}

/// Smallest value with empirical CDF at least `p`.
fn quantile_type1(v: &mut [f64], p: f64) -> f64 {
    let n = v.len();
    let rank = ((p * n as f64) - 1e-9).ceil().max(1.0) as usize;
    let (_, x, _) = v.select_nth_unstable_by(rank.min(n) - 1, f64::total_cmp);
    *x
}

/// `k`-th largest value (1-based), or 0 if fewer than `k` values.
fn kth_largest(v: &mut [f64], k: usize) -> f64 {
    if v.len() < k {
        return 0.0;
    }
    let (_, x, _) = v.select_nth_unstable_by(k - 1, |a, b| b.total_cmp(a));
    *x
}

fn n_choose_capped(n: usize, r: usize, cap: u64) -> u64 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    let mut c: u64 = 1;
    for i in 0..r {
        c = c * (n - i) as u64 / (i + 1) as u64;
        if c > cap {
            return cap + 1;
        }
    }
    c
}

/// Visit every `r`-subset of `0..n` in lexicographic order.
fn for_each_combination(n: usize, r: usize, mut f: impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..r).collect();
    if r > n {
        return;
    }
    loop {
        f(&idx);
        let mut i = r;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - r {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..r {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// k-FWER hurdle by bootstrap step-down.
///
/// Starts from the `(1 - q)` quantile of the `k`-th largest `|t*|` over all
/// strategies, then repeatedly recomputes it over every set made of `k - 1`
/// rejected strategies plus all unrejected ones, keeping the largest.
/// Returns `(hurdle, passes, capped)`.
pub fn kfwer_hurdle(boot: &Bootstrap, abs_t: &[f64], k: usize, q_star: f64) -> (f64, usize, bool) {
    assert!(k >= 1);
    let b_n = boot.n_boot;
    let mut buf = Vec::with_capacity(boot.n_strategies);
    let mut kth: Vec<f64> = (0..b_n)
        .map(|b| {
            buf.clear();
            buf.extend_from_slice(boot.row(b));
            kth_largest(&mut buf, k)
        })
        .collect();
    let mut h = quantile_type1(&mut kth, 1.0 - q_star);
    let mut passes = 1;
    if k == 1 {
        return (h, passes, false);
    }
    loop {
        let rejected: Vec<usize> = (0..abs_t.len()).filter(|&i| abs_t[i] > h).collect();
        let kept: Vec<usize> = (0..abs_t.len()).filter(|&i| abs_t[i] <= h).collect();
        let n_sets = n_choose_capped(rejected.len(), k - 1, MAX_SUBSETS);
        if n_sets > MAX_SUBSETS {
            return (h, passes, true);
        }
        if n_sets == 0 {
            return (h, passes, false);
        }
        // top-k of the unrejected block per draw, descending
        let kept_top: Vec<Vec<f64>> = (0..b_n)
            .map(|b| {
                let row = boot.row(b);
                let mut v: Vec<f64> = kept.iter().map(|&i| row[i]).collect();
                if v.len() > k {
                    v.select_nth_unstable_by(k - 1, |a, b| b.total_cmp(a));
                    v.truncate(k);
                }
                v
            })
            .collect();
        let mut best = 0.0f64;
        let mut scratch = Vec::with_capacity(2 * k);
        for_each_combination(rejected.len(), k - 1, |combo| {
            let mut kth: Vec<f64> = (0..b_n)
                .map(|b| {
                    let row = boot.row(b);
                    scratch.clear();
                    scratch.extend(combo.iter().map(|&c| row[rejected[c]]));
                    scratch.extend_from_slice(&kept_top[b]);
                    kth_largest(&mut scratch, k)
                })
                .collect();
            best = best.max(quantile_type1(&mut kth, 1.0 - q_star));
        });
        passes += 1;
        let next = best.min(h);
        if next == h {
            return (h, passes, false);
        }
        h = next;
    }
}

fn panel_abs_t(panel: &ReturnsPanel) -> Vec<f64> {
    panel
        .series()
        .iter()
        .map(|s| {
            let r = s.rets();
            let n = r.len();
            if n < 2 {
                return 0.0;
            }
            let mean = r.iter().sum::<f64>() / n as f64;
            let sd =
                (r.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64).sqrt();
            if sd > 0.0 {
                (mean / (sd / (n as f64).sqrt())).abs()
            } else {
                0.0
            }
        })
        .collect()
}

/// FDP-risk hurdle: `Pr(FDP > p*) <= q*`.
///
/// Bisects over `k` for the smallest `k` whose k-FWER hurdle `h_k`
/// satisfies `k / (#{|t| > h_k} + 1) > p*`; the result is `h_k`.
pub fn hurdle_rw(panel: &ReturnsPanel, cfg: &RwConfig) -> Result<HurdleResult> {
    check_q(cfg.q_star)?;
    if !(cfg.p_star > 0.0 && cfg.p_star < 1.0) {
        return Err(Error::invalid(format!(
            "p* = {} outside (0, 1)",
            cfg.p_star
        )));
    }
    if cfg.n_boot == 0 {
        return Err(Error::invalid("n_boot must be positive"));
    }
    let n_months = panel.months().len();
    if n_months < MIN_MONTHS {
        return Err(Error::InsufficientData {
            needed: MIN_MONTHS,
            available: n_months,
        });
    }
    let n = panel.n_strategies();
    let abs_t = panel_abs_t(panel);
    let boot = Bootstrap::draw(panel, cfg.n_boot, cfg.seed);
    let mut steps: BTreeMap<usize, RwStep> = BTreeMap::new();
    let mut eval = |k: usize| -> RwStep {
        steps
            .entry(k)
            .or_insert_with(|| {
                let (hurdle, passes, capped) = kfwer_hurdle(&boot, &abs_t, k, cfg.q_star);
                let n_rejected = abs_t.iter().filter(|&&t| t > hurdle).count();
                RwStep {
                    k,
                    hurdle,
                    n_rejected,
                    satisfied: k as f64 / (n_rejected + 1) as f64 > cfg.p_star,
                    passes,
                    capped,
                }
            })
            .clone()
    };
    let (mut lo, mut hi) = (1usize, n);
    let chosen = if eval(1).satisfied {
        1
    } else if !eval(n).satisfied {
        n
    } else {
        // eval(lo) false, eval(hi) true
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if eval(mid).satisfied {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    let step = eval(chosen);
    Ok(HurdleResult {
        method: Method::Rw,
        q_star: cfg.q_star,
        p_star: Some(cfg.p_star),
        hurdle: step.hurdle,
        n_discoveries: step.n_rejected,
        pi_constant: None,
        diagnostics: Diagnostics::Bootstrap(RwDiagnostics {
            n_boot: cfg.n_boot,
            seed: cfg.seed,
            n_strategies: n,
            n_months,
            k: chosen,
            degenerate_boot_t: boot.degenerate,
            steps: steps.into_values().collect(),
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::{Family, StrategySeries};
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn panel(mus: &[f64], months: usize, seed: u64) -> ReturnsPanel {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let series = mus
            .iter()
            .enumerate()
            .map(|(i, &mu)| {
                let d = Normal::new(mu / (months as f64).sqrt(), 1.0).unwrap();
                let rets = (0..months).map(|_| d.sample(&mut rng)).collect();
                StrategySeries::contiguous(
                    format!("s{i:03}"),
                    Family::AcctEw,
                    Month::new(2000, 1),
                    rets,
                )
            })
            .collect();
        ReturnsPanel::new(series).unwrap()
    }

    #[test]
    fn combinations_enumerated() {
        let mut seen = Vec::new();
        for_each_combination(4, 2, |c| seen.push(c.to_vec()));
        assert_eq!(seen.len(), 6);
        assert_eq!(seen[0], vec![0, 1]);
        assert_eq!(seen[5], vec![2, 3]);
        let mut empty = 0;
        for_each_combination(3, 0, |c| {
            assert!(c.is_empty());
            empty += 1
        });
        assert_eq!(empty, 1);
        assert_eq!(n_choose_capped(1000, 3, 100), 101);
        assert_eq!(n_choose_capped(10, 2, 100), 45);
        assert_eq!(n_choose_capped(2, 3, 100), 0);
    }

    #[test]
    fn quantile_type1_picks_order_statistic() {
        let mut v: Vec<f64> = (1..=2000).map(|i| i as f64).collect();
        assert_eq!(quantile_type1(&mut v, 0.95), 1900.0);
        let mut v = vec![3.0, 1.0, 2.0];
        assert_eq!(quantile_type1(&mut v, 0.5), 2.0);
    }

    #[test]
    fn single_strategy_is_bootstrap_quantile() {
        let p = panel(&[1.0], 60, 1);
        let cfg = RwConfig {
            n_boot: 500,
            ..RwConfig::new(0.05, 0.05, 9)
        };
        let r = hurdle_rw(&p, &cfg).unwrap();
        let boot = Bootstrap::draw(&p, 500, 9);
        let mut v: Vec<f64> = (0..500).map(|b| boot.row(b)[0]).collect();
        assert_eq!(r.hurdle, quantile_type1(&mut v, 0.95));
    }

    #[test]
    fn deterministic_across_runs() {
        let mus: Vec<f64> = (0..50)
            .map(|i| if i % 3 == 0 { 4.0 } else { 0.0 })
            .collect();
        let p = panel(&mus, 60, 4);
        let cfg = RwConfig {
            n_boot: 400,
            ..RwConfig::new(0.05, 0.05, 11)
        };
        let a = hurdle_rw(&p, &cfg).unwrap();
        let b = hurdle_rw(&p, &cfg).unwrap();
        assert_eq!(a.hurdle.to_bits(), b.hurdle.to_bits());
        assert_eq!(a, b);
    }

    #[test]
    fn step_down_never_raises_hurdle() {
        let mus: Vec<f64> = (0..30).map(|i| if i < 8 { 5.0 } else { 0.0 }).collect();
        let p = panel(&mus, 120, 2);
        let boot = Bootstrap::draw(&p, 300, 5);
        let abs_t = panel_abs_t(&p);
        for k in 1..=4 {
            let (h, _, _) = kfwer_hurdle(&boot, &abs_t, k, 0.05);
            let mut kth: Vec<f64> = (0..300)
                .map(|b| {
                    let mut r = boot.row(b).to_vec();
                    kth_largest(&mut r, k)
                })
                .collect();
            assert!(h <= quantile_type1(&mut kth, 0.95));
        }
        // larger k tolerates more errors
        let h1 = kfwer_hurdle(&boot, &abs_t, 1, 0.05).0;
        let h3 = kfwer_hurdle(&boot, &abs_t, 3, 0.05).0;
        assert!(h3 <= h1);
    }

    #[test]
    fn degenerate_bootstrap_counted() {
        let start = Month::new(2000, 1);
        let flat = StrategySeries::contiguous("flat", Family::AcctEw, start, vec![0.01; 30]);
        let live = StrategySeries::contiguous(
            "live",
            Family::AcctEw,
            start,
            (0..30).map(|i| (i as f64 * 0.37).sin()).collect(),
        );
        let p = ReturnsPanel::new(vec![flat, live]).unwrap();
        let r = hurdle_rw(
            &p,
            &RwConfig {
                n_boot: 50,
                ..RwConfig::new(0.05, 0.05, 1)
            },
        )
        .unwrap();
        match r.diagnostics {
            Diagnostics::Bootstrap(d) => assert_eq!(d.degenerate_boot_t, 50),
            _ => unreachable!(),
        }
    }

    #[test]
    fn short_panel_rejected() {
        let p = panel(&[0.0], 12, 1);
        assert!(hurdle_rw(&p, &RwConfig::new(0.05, 0.05, 1)).is_err());
    }
}

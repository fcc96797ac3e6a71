use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::defs::{SignalDef, SignalKind, Source, N_TICKER_GROUPS};
use super::stocks::StockPanel;
use crate::error::{Error, Result};
use crate::panel::{Family, ReturnsPanel, StrategySeries};

pub const DEFAULT_DECILES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    Ew,
    Vw,
}

impl Weighting {
    pub fn label(self) -> &'static str {
        match self {
            Weighting::Ew => "ew",
            Weighting::Vw => "vw",
        }
    }
}

pub fn family_for(def: &SignalDef, w: Weighting) -> Family {
    match (def.source(), w) {
        (Source::Acct, Weighting::Ew) => Family::AcctEw,
        (Source::Acct, Weighting::Vw) => Family::AcctVw,
        (Source::Pastret, Weighting::Ew) => Family::PastretEw,
        (Source::Pastret, Weighting::Vw) => Family::PastretVw,
        (Source::Ticker, Weighting::Ew) => Family::TickerEw,
        (Source::Ticker, Weighting::Vw) => Family::TickerVw,
    }
}

/// Long-short construction over one stock panel, with the three-month
/// compounded returns precomputed.
pub struct Builder<'a> {
    stocks: &'a StockPanel,
    /// Compounded return over months `m..m+2`, NaN if any is missing.
    c3: Vec<f64>,
    n_deciles: usize,
}

impl<'a> Builder<'a> {
    pub fn new(stocks: &'a StockPanel, n_deciles: usize) -> Result<Self> {
        if n_deciles < 2 {
            return Err(Error::invalid("n_deciles must be at least 2"));
        }
        let t_len = stocks.months().len();
        let mut c3 = vec![f64::NAN; stocks.n_stocks() * t_len];
        for s in 0..stocks.n_stocks() {
            for m in 0..t_len.saturating_sub(2) {
                c3[s * t_len + m] = (0..3)
                    .map(|j| 1.0 + stocks.ret_at(s, m + j))
                    .product::<f64>()
                    - 1.0;
            }
        }
        Ok(Builder {
            stocks,
            c3,
            n_deciles,
        })
    }

    fn quarter(&self, s: usize, t: usize, q: u8) -> f64 {
        let back = 3 * q as usize;
        if back > t {
            return f64::NAN;
        }
        self.c3[s * self.stocks.months().len() + t - back]
    }

    fn signal(&self, kind: &SignalKind, s: usize, t: usize, acct: &AcctCols<'_>) -> f64 {
        match kind {
            SignalKind::PastretMoment { quarters, moment } => {
                let x = quarters.map(|q| self.quarter(s, t, q));
                let mean = x.iter().sum::<f64>() / 4.0;
                if *moment == 1 {
                    mean
                } else {
                    x.iter()
                        .map(|v| (v - mean).powi(*moment as i32))
                        .sum::<f64>()
                        / 4.0
                }
            }
            SignalKind::PastretSingle { quarter } => self.quarter(s, t, *quarter),
            SignalKind::PastretMeanK { k } => {
                (1..=*k).map(|q| self.quarter(s, t, q)).sum::<f64>() / *k as f64
            }
            SignalKind::TickerSort { position, .. } => {
                match self
                    .stocks
                    .ticker_at(s, t)
                    .and_then(|tk| tk.get(*position as usize - 1))
                {
                    Some(&c) => c as f64,
                    None => f64::NAN,
                }
            }
            SignalKind::AcctRatio { .. } => {
                let c = self.stocks.cell(s, t);
                let (x, y) = (acct.x[c], acct.y[c]);
                if y > 0.0 {
                    x / y
                } else {
                    f64::NAN
                }
            }
            SignalKind::AcctDiffRatio { .. } => {
                if t < 12 {
                    return f64::NAN;
                }
                let (c, lag) = (self.stocks.cell(s, t), self.stocks.cell(s, t - 12));
                if acct.y[lag] > 0.0 {
                    (acct.x[c] - acct.x[lag]) / acct.y[lag]
                } else {
                    f64::NAN
                }
            }
        }
    }

    /// Monthly long-short returns for `def`. Months with too few stocks
    /// holding a valid signal produce no observation.
    pub fn build(&self, def: &SignalDef, weighting: Weighting) -> Result<StrategySeries> {
        let st = self.stocks;
        match def.source() {
            Source::Ticker if !st.has_ticker() => return Err(Error::MissingField("ticker".into())),
            _ if weighting == Weighting::Vw && !st.has_mktcap() => {
                return Err(Error::MissingField("mktcap".into()))
            }
            _ => {}
        }
        let empty: &[f64] = &[];
        let acct = match &def.kind {
            SignalKind::AcctRatio {
                numerator,
                denominator,
            }
            | SignalKind::AcctDiffRatio {
                numerator,
                denominator,
            } => AcctCols {
                x: st.acct_series(numerator)?,
                y: st.acct_series(denominator)?,
            },
            _ => AcctCols { x: empty, y: empty },
        };
        let mut obs = Vec::new();
        let mut valid: Vec<(f64, usize)> = Vec::with_capacity(st.n_stocks());
        for (t, &month) in st.months().iter().enumerate() {
            valid.clear();
            for s in 0..st.n_stocks() {
                if !st.ret_at(s, t).is_finite() {
                    continue;
                }
                if weighting == Weighting::Vw && !st.mktcap_at(s, t).is_finite() {
                    continue;
                }
                let x = self.signal(&def.kind, s, t, &acct);
                if x.is_finite() {
                    valid.push((x, s));
                }
            }
            let legs = match &def.kind {
                SignalKind::TickerSort { long, short, .. } => ticker_legs(&mut valid, long, short),
                _ => decile_legs(&mut valid, self.n_deciles),
            };
            if let Some((mut l, mut s)) = legs {
                l.sort_unstable();
                s.sort_unstable();
                let r = self.leg(&l, t, weighting) - self.leg(&s, t, weighting);
                obs.push((month, r));
            }
        }
        StrategySeries::new(
            format!("{}-{}", def.signal_id, weighting.label()),
            family_for(def, weighting),
            obs,
        )
    }

    fn leg(&self, members: &[usize], t: usize, w: Weighting) -> f64 {
        match w {
            Weighting::Ew => {
                members
                    .iter()
                    .map(|&s| self.stocks.ret_at(s, t))
                    .sum::<f64>()
                    / members.len() as f64
            }
            Weighting::Vw => {
                let (mut num, mut den) = (0.0, 0.0);
                for &s in members {
                    let cap = self.stocks.mktcap_at(s, t);
                    num += cap * self.stocks.ret_at(s, t);
                    den += cap;
                }
                num / den
            }
        }
    }
}

struct AcctCols<'a> {
    x: &'a [f64],
    y: &'a [f64],
}

/// Top and bottom `n / n_deciles` stocks. Each side is taken from its own
/// end with ties going to the lower stock index, so negating every signal
/// swaps the legs exactly.
fn decile_legs(valid: &mut [(f64, usize)], n_deciles: usize) -> Option<(Vec<usize>, Vec<usize>)> {
    let n = valid.len();
    if n < 2 * n_deciles {
        return None;
    }
    let k = n / n_deciles;
    valid.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let short: Vec<usize> = valid[..k].iter().map(|v| v.1).collect();
    valid.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let long: Vec<usize> = valid[..k].iter().map(|v| v.1).collect();
    Some((long, short))
}

/// Equal-count groups `1..=20` by ascending signal, ties by stock index.
fn ticker_legs(
    valid: &mut [(f64, usize)],
    long: &[u8; 2],
    short: &[u8; 2],
) -> Option<(Vec<usize>, Vec<usize>)> {
    let n = valid.len();
    let groups = N_TICKER_GROUPS as usize;
    if n < groups {
        return None;
    }
    valid.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let group = |i: usize| (i * groups / n + 1) as u8;
    let pick = |gs: &[u8; 2]| -> Vec<usize> {
        valid
            .iter()
            .enumerate()
            .filter(|(i, _)| gs.contains(&group(*i)))
            .map(|(_, v)| v.1)
            .collect()
    };
    Some((pick(long), pick(short)))
}

/// Convenience wrapper building one series from scratch.
pub fn build_strategy_returns(
    stocks: &StockPanel,
    def: &SignalDef,
    weighting: Weighting,
    n_deciles: usize,
) -> Result<StrategySeries> {
    Builder::new(stocks, n_deciles)?.build(def, weighting)
}

/// Build every `(def, weighting)` pair into one returns panel. Strategies
/// with no valid month are dropped.
pub fn build_panel(
    stocks: &StockPanel,
    defs: &[SignalDef],
    weightings: &[Weighting],
    n_deciles: usize,
) -> Result<ReturnsPanel> {
    let b = Builder::new(stocks, n_deciles)?;
    let jobs: Vec<(&SignalDef, Weighting)> = defs
        .iter()
        .flat_map(|d| weightings.iter().map(move |&w| (d, w)))
        .collect();
    let series = jobs
        .par_iter()
        .map(|(d, w)| b.build(d, *w))
        .collect::<Result<Vec<_>>>()?;
    ReturnsPanel::new(series.into_iter().filter(|s| !s.is_empty()).collect())
}

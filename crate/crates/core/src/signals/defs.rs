use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const N_QUARTERS: u8 = 20;
pub const N_TICKER_GROUPS: u8 = 20;
pub const TICKER_POSITIONS: [u8; 4] = [1, 2, 3, 4];

/// Signal recipe. Quarter `q` is the compounded return over months
/// `t-3q .. t-3q+2` for a portfolio formed at the start of month `t`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalKind {
    /// Moment `1` is the mean of the four quarterly returns; `2..=4` are
    /// raw central moments.
    PastretMoment {
        quarters: [u8; 4],
        moment: u8,
    },
    PastretSingle {
        quarter: u8,
    },
    /// Mean over the most recent `k` quarters.
    PastretMeanK {
        k: u8,
    },
    /// Equal-count groups by the ticker letter at `position`; `long` and
    /// `short` are group numbers in `1..=20`, group 1 holding `A`.
    TickerSort {
        position: u8,
        long: [u8; 2],
        short: [u8; 2],
    },
    /// `X / Y`.
    AcctRatio {
        numerator: String,
        denominator: String,
    },
    /// `(X_t - X_{t-12}) / Y_{t-12}`.
    AcctDiffRatio {
        numerator: String,
        denominator: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignalDef {
    pub signal_id: String,
    #[serde(flatten)]
    pub kind: SignalKind,
}

/// Source family of a signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Acct,
    Pastret,
    Ticker,
}

impl SignalDef {
    pub fn new(kind: SignalKind) -> Result<Self> {
        kind.validate()?;
        let signal_id = kind.default_id();
        Ok(SignalDef { signal_id, kind })
    }

    pub fn source(&self) -> Source {
        match self.kind {
            SignalKind::PastretMoment { .. }
            | SignalKind::PastretSingle { .. }
            | SignalKind::PastretMeanK { .. } => Source::Pastret,
            SignalKind::TickerSort { .. } => Source::Ticker,
            SignalKind::AcctRatio { .. } | SignalKind::AcctDiffRatio { .. } => Source::Acct,
        }
    }
}

fn distinct_in_range(xs: &[u8], hi: u8) -> bool {
    xs.iter().all(|&x| (1..=hi).contains(&x)) && (0..xs.len()).all(|i| !xs[..i].contains(&xs[i]))
}

impl SignalKind {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            SignalKind::PastretMoment { quarters, moment } => {
                distinct_in_range(quarters, N_QUARTERS) && (1..=4).contains(moment)
            }
            SignalKind::PastretSingle { quarter } => (1..=N_QUARTERS).contains(quarter),
            SignalKind::PastretMeanK { k } => (1..=N_QUARTERS).contains(k),
            SignalKind::TickerSort {
                position,
                long,
                short,
            } => {
                TICKER_POSITIONS.contains(position)
                    && distinct_in_range(&[long[0], long[1], short[0], short[1]], N_TICKER_GROUPS)
            }
            SignalKind::AcctRatio {
                numerator,
                denominator,
            }
            | SignalKind::AcctDiffRatio {
                numerator,
                denominator,
            } => !numerator.is_empty() && !denominator.is_empty(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "invalid signal definition {self:?}"
            )))
        }
    }

    fn default_id(&self) -> String {
        match self {
            SignalKind::PastretMoment {
                quarters: q,
                moment,
            } => {
                format!("pr-m{moment}-q{}-{}-{}-{}", q[0], q[1], q[2], q[3])
            }
            SignalKind::PastretSingle { quarter } => format!("pr-q{quarter}"),
            SignalKind::PastretMeanK { k } => format!("pr-mean{k}"),
            SignalKind::TickerSort {
                position,
                long,
                short,
            } => {
                format!(
                    "tk-p{position}-l{}-{}-s{}-{}",
                    long[0], long[1], short[0], short[1]
                )
            }
            SignalKind::AcctRatio {
                numerator,
                denominator,
            } => format!("ac-{numerator}/{denominator}"),
            SignalKind::AcctDiffRatio {
                numerator,
                denominator,
            } => format!("ac-d{numerator}/lag{denominator}"),
        }
    }
}

/// All 4-subsets of `1..=n` in lexicographic order.
fn four_subsets(n: u8) -> impl Iterator<Item = [u8; 4]> {
    (1..=n).flat_map(move |a| {
        (a + 1..=n).flat_map(move |b| {
            (b + 1..=n).flat_map(move |c| (c + 1..=n).map(move |d| [a, b, c, d]))
        })
    })
}

/// Moment signals over every 4 of the past 20 quarters, single-quarter
/// returns, and the mean of the past 2 and 3 quarters.
pub fn enumerate_pastret_signals() -> Vec<SignalDef> {
    let mut out = Vec::with_capacity(19_402);
    for quarters in four_subsets(N_QUARTERS) {
        for moment in 1..=4 {
            out.push(
                SignalDef::new(SignalKind::PastretMoment { quarters, moment })
                    .expect("valid by construction"),
            );
        }
    }
    for quarter in 1..=N_QUARTERS {
        out.push(SignalDef::new(SignalKind::PastretSingle { quarter }).expect("valid"));
    }
    for k in [2, 3] {
        out.push(SignalDef::new(SignalKind::PastretMeanK { k }).expect("valid"));
    }
    out
}

/// For each ticker position and 4-subset of the 20 groups, long the two
/// lowest-numbered groups and short the other two.
pub fn enumerate_ticker_signals() -> Vec<SignalDef> {
    let mut out = Vec::with_capacity(19_380);
    for position in TICKER_POSITIONS {
        for g in four_subsets(N_TICKER_GROUPS) {
            let kind = SignalKind::TickerSort {
                position,
                long: [g[0], g[1]],
                short: [g[2], g[3]],
            };
            out.push(SignalDef::new(kind).expect("valid"));
        }
    }
    out
}

/// `X/Y` and `dX/lagY` for every variable and denominator, skipping `X/X`.
pub fn enumerate_acct_signals(
    var_names: &[String],
    denom_names: &[String],
) -> Result<Vec<SignalDef>> {
    if let Some(d) = denom_names.iter().find(|d| !var_names.contains(d)) {
        return Err(Error::invalid(format!(
            "denominator `{d}` is not among the variables"
        )));
    }
    let mut out = Vec::new();
    for x in var_names {
        for y in denom_names {
            if x != y {
                out.push(SignalDef::new(SignalKind::AcctRatio {
                    numerator: x.clone(),
                    denominator: y.clone(),
                })?);
            }
            out.push(SignalDef::new(SignalKind::AcctDiffRatio {
                numerator: x.clone(),
                denominator: y.clone(),
            })?);
        }
    }
    Ok(out)
}

/// One JSON object per line.
pub fn write_signal_defs<W: Write>(defs: &[SignalDef], mut sink: W) -> Result<()> {
    for d in defs {
        serde_json::to_writer(&mut sink, d)?;
        sink.write_all(b"\n")
            .map_err(|e| Error::io("<signal defs>", e))?;
    }
    Ok(())
}

pub fn read_signal_defs<R: BufRead>(source: R) -> Result<Vec<SignalDef>> {
    let mut out = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<signal defs>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let d: SignalDef = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i as u64 + 1,
            msg: e.to_string(),
        })?;
        d.kind.validate()?;
        out.push(d);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn pastret_counts() {
        let defs = enumerate_pastret_signals();
        assert_eq!(defs.len(), 19_402);
        let moments = defs
            .iter()
            .filter(|d| matches!(d.kind, SignalKind::PastretMoment { .. }))
            .count();
        assert_eq!(moments, 4845 * 4);
        let ids: HashSet<&str> = defs.iter().map(|d| d.signal_id.as_str()).collect();
        assert_eq!(ids.len(), defs.len());
        let kinds: HashSet<&SignalKind> = defs.iter().map(|d| &d.kind).collect();
        assert_eq!(kinds.len(), defs.len());
    }

    #[test]
    fn ticker_counts_and_disjoint_legs() {
        let defs = enumerate_ticker_signals();
        assert_eq!(defs.len(), 19_380);
        let mut positions = HashSet::new();
        for d in &defs {
            match d.kind {
                SignalKind::TickerSort {
                    position,
                    long,
                    short,
                } => {
                    positions.insert(position);
                    assert!(!long.contains(&short[0]) && !long.contains(&short[1]));
                    assert!(long[1] < short[0]);
                }
                _ => unreachable!(),
            }
        }
        assert_eq!(positions, HashSet::from([1, 2, 3, 4]));
    }

    #[test]
    fn acct_enumeration() {
        let v = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let defs = enumerate_acct_signals(&v(&["at", "sale"]), &v(&["at"])).unwrap();
        let ids: Vec<&str> = defs.iter().map(|d| d.signal_id.as_str()).collect();
        assert_eq!(ids, ["ac-dat/lagat", "ac-sale/at", "ac-dsale/lagat"]);
        assert!(enumerate_acct_signals(&v(&["at"]), &v(&["lt"])).is_err());
        assert!(enumerate_acct_signals(&[], &[]).unwrap().is_empty());
        let big: Vec<String> = (0..240).map(|i| format!("v{i}")).collect();
        let n = enumerate_acct_signals(&big, &big[..65]).unwrap().len();
        assert_eq!(n, 240 * 65 * 2 - 65);
    }

    #[test]
    fn jsonl_round_trip() {
        let defs: Vec<SignalDef> = enumerate_ticker_signals().into_iter().take(3).collect();
        let mut buf = Vec::new();
        write_signal_defs(&defs, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text
            .lines()
            .next()
            .unwrap()
            .contains("\"kind\":\"ticker_sort\""));
        assert_eq!(read_signal_defs(&buf[..]).unwrap(), defs);
    }

    #[test]
    fn invalid_defs_rejected() {
        assert!(SignalDef::new(SignalKind::PastretMoment {
            quarters: [1, 1, 2, 3],
            moment: 2
        })
        .is_err());
        assert!(SignalDef::new(SignalKind::PastretMoment {
            quarters: [1, 2, 3, 21],
            moment: 2
        })
        .is_err());
        assert!(SignalDef::new(SignalKind::PastretMoment {
            quarters: [1, 2, 3, 4],
            moment: 5
        })
        .is_err());
        assert!(SignalDef::new(SignalKind::TickerSort {
            position: 5,
            long: [1, 2],
            short: [3, 4]
        })
        .is_err());
    }
}

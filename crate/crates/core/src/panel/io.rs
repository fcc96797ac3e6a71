use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use super::{Family, ReturnsPanel, StrategySeries};
use crate::error::{Error, Result};
use crate::month::Month;

/// Which CSV header names carry the four panel fields.
#[derive(Debug, Clone)]
pub struct ColumnMap {
    pub strategy_id: String,
    pub family: String,
    pub month: String,
    pub ret: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            strategy_id: "strategy_id".into(),
            family: "family".into(),
            month: "month".into(),
            ret: "ret".into(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    pub columns: ColumnMap,
    /// Accept family labels outside the six built-in ones.
    pub allow_custom_families: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadReport {
    pub rows: usize,
    pub strategies: usize,
}

/// Parse a returns panel from CSV.
pub fn load_panel<R: Read>(source: R, opts: &LoadOptions) -> Result<(ReturnsPanel, LoadReport)> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingField(name.to_string()))
    };
    let c = &opts.columns;
    let (i_id, i_fam, i_month, i_ret) = (
        col(&c.strategy_id)?,
        col(&c.family)?,
        col(&c.month)?,
        col(&c.ret)?,
    );

    let mut acc: BTreeMap<String, (Family, BTreeMap<Month, f64>)> = BTreeMap::new();
    let mut rows = 0usize;
    let mut record = csv::StringRecord::new();
    loop {
        let line = rdr.position().line() + 1;
        match rdr.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                return Err(Error::Parse {
                    line,
                    msg: e.to_string(),
                })
            }
        }
        let line = record.position().map(|p| p.line()).unwrap_or(line);
        let field = |i: usize| record.get(i).unwrap_or("");
        let perr = |msg: String| Error::Parse { line, msg };

        let id = field(i_id);
        if id.is_empty() {
            return Err(perr("empty strategy_id".into()));
        }
        let family = match Family::parse(field(i_fam), opts.allow_custom_families) {
            Ok(f) => f,
            Err(Error::UnknownFamily(l)) if !l.is_empty() => return Err(Error::UnknownFamily(l)),
            Err(_) => return Err(perr("empty family".into())),
        };
        let month: Month = field(i_month)
            .parse()
            .map_err(|e: Error| perr(e.to_string()))?;
        let ret: f64 = field(i_ret)
            .parse()
            .map_err(|_| perr(format!("return `{}` is not a number", field(i_ret))))?;
        if !ret.is_finite() {
            return Err(perr(format!("return `{}` is not finite", field(i_ret))));
        }

        let (fam, obs) = acc
            .entry(id.to_string())
            .or_insert_with(|| (family.clone(), BTreeMap::new()));
        if *fam != family {
            return Err(perr(format!(
                "strategy `{id}` labelled `{family}` but earlier rows say `{fam}`"
            )));
        }
        match obs.entry(month) {
            Entry::Occupied(_) => {
                return Err(Error::DuplicateKey {
                    strategy_id: id.to_string(),
                    month: month.to_string(),
                })
            }
            Entry::Vacant(v) => {
                v.insert(ret);
            }
        }
        rows += 1;
    }

    let series = acc
        .into_iter()
        .map(|(id, (family, obs))| StrategySeries::new(id, family, obs.into_iter().collect()))
        .collect::<Result<Vec<_>>>()?;
    let strategies = series.len();
    Ok((ReturnsPanel::new(series)?, LoadReport { rows, strategies }))
}

/// Write a panel as `strategy_id,family,month,ret`. Returns use the
/// shortest representation that parses back to the same `f64`.
pub fn save_panel<W: Write>(panel: &ReturnsPanel, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["strategy_id", "family", "month", "ret"])?;
    for s in panel.series() {
        for (m, r) in s.iter() {
            w.write_record([
                s.id.as_str(),
                s.family.label(),
                &m.to_string(),
                &r.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<panel csv>", e))?;
    Ok(())
}

pub fn read_panel_file(path: &Path, opts: &LoadOptions) -> Result<(ReturnsPanel, LoadReport)> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_panel(std::io::BufReader::new(f), opts)
}

pub fn write_panel_file(panel: &ReturnsPanel, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    save_panel(panel, std::io::BufWriter::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(s: &str) -> Result<(ReturnsPanel, LoadReport)> {
        load_panel(s.as_bytes(), &LoadOptions::default())
    }

    #[test]
    fn three_rows_one_strategy() {
        let (p, rep) = load(
            "strategy_id,family,month,ret\n\
             s1,acct_ew,1990-01,0.01\n\
             s1,acct_ew,1990-02,-0.02\n\
             s1,acct_ew,1990-03,0.005\n",
        )
        .unwrap();
        assert_eq!(
            rep,
            LoadReport {
                rows: 3,
                strategies: 1
            }
        );
        assert_eq!(p.series()[0].rets(), &[0.01, -0.02, 0.005]);
    }

    #[test]
    fn duplicate_key_named() {
        let err = load(
            "strategy_id,family,month,ret\n\
             s1,acct_ew,1990-01,0.01\n\
             s1,acct_ew,1990-01,0.02\n",
        )
        .unwrap_err();
        match err {
            Error::DuplicateKey { strategy_id, month } => {
                assert_eq!(strategy_id, "s1");
                assert_eq!(month, "1990-01");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_row_names_line() {
        let err = load(
            "strategy_id,family,month,ret\n\
             s1,acct_ew,1990-01,0.01\n\
             s1,acct_ew,1990-02,abc\n",
        )
        .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
        let err = load("strategy_id,family,month,ret\ns1,acct_ew,1990-1,0.01\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn unknown_family_needs_opt_in() {
        let csv = "strategy_id,family,month,ret\ns1,momentum,1990-01,0.01\n";
        assert!(matches!(load(csv), Err(Error::UnknownFamily(_))));
        let opts = LoadOptions {
            allow_custom_families: true,
            ..Default::default()
        };
        let (p, _) = load_panel(csv.as_bytes(), &opts).unwrap();
        assert_eq!(p.series()[0].family, Family::Custom("momentum".into()));
    }

    #[test]
    fn remapped_columns() {
        let opts = LoadOptions {
            columns: ColumnMap {
                strategy_id: "id".into(),
                family: "fam".into(),
                month: "date".into(),
                ret: "r".into(),
            },
            ..Default::default()
        };
        let (p, _) =
            load_panel("date,r,id,fam\n2001-05,0.5,x,ticker_vw\n".as_bytes(), &opts).unwrap();
        assert_eq!(p.series()[0].id, "x");
        assert!(matches!(
            load("id,family,month,ret\n"),
            Err(Error::MissingField(_))
        ));
    }

    #[test]
    fn inconsistent_family_rejected() {
        let err = load(
            "strategy_id,family,month,ret\n\
             s1,acct_ew,1990-01,0.01\n\
             s1,acct_vw,1990-02,0.01\n",
        )
        .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
    }
}

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::month::Month;

/// One stock-month observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StockRow {
    pub stock_id: String,
    pub month: Month,
    pub ret: f64,
    /// Market capitalization at the start of the month.
    pub mktcap: Option<f64>,
    pub ticker: Option<String>,
    pub acct: BTreeMap<String, f64>,
}

impl StockRow {
    pub fn new(stock_id: impl Into<String>, month: Month, ret: f64) -> Self {
        StockRow {
            stock_id: stock_id.into(),
            month,
            ret,
            mktcap: None,
            ticker: None,
            acct: BTreeMap::new(),
        }
    }
}

pub(crate) fn valid_ticker(t: &str) -> bool {
    (1..=5).contains(&t.len()) && t.bytes().all(|b| b.is_ascii_uppercase())
}

/// Stock-level inputs on a dense stock x month grid; missing cells are NaN.
#[derive(Debug, Clone)]
pub struct StockPanel {
    stocks: Vec<String>,
    months: Vec<Month>,
    ret: Vec<f64>,
    mktcap: Vec<f64>,
    ticker: Vec<Option<Box<[u8]>>>,
    acct: BTreeMap<String, Vec<f64>>,
    has_mktcap: bool,
    has_ticker: bool,
}

impl StockPanel {
    /// Months between the first and last observation form a contiguous grid.
    pub fn new(rows: Vec<StockRow>) -> Result<Self> {
        let stocks: Vec<String> = rows
            .iter()
            .map(|r| r.stock_id.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let (first, last) = match (
            rows.iter().map(|r| r.month).min(),
            rows.iter().map(|r| r.month).max(),
        ) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::invalid("stock panel is empty")),
        };
        let months: Vec<Month> = (first.index()..=last.index())
            .map(Month::from_index)
            .collect();
        let sidx: BTreeMap<&str, usize> = stocks
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let t_len = months.len();
        let cells = stocks.len() * t_len;
        let acct_names: BTreeSet<String> =
            rows.iter().flat_map(|r| r.acct.keys().cloned()).collect();
        let mut panel = StockPanel {
            ret: vec![f64::NAN; cells],
            mktcap: vec![f64::NAN; cells],
            ticker: vec![None; cells],
            acct: acct_names
                .into_iter()
                .map(|n| (n, vec![f64::NAN; cells]))
                .collect(),
            has_mktcap: rows.iter().any(|r| r.mktcap.is_some()),
            has_ticker: rows.iter().any(|r| r.ticker.is_some()),
            stocks: Vec::new(),
            months,
        };
        let mut seen = vec![false; cells];
        for r in &rows {
            let c = sidx[r.stock_id.as_str()] * t_len + (r.month.index() - first.index()) as usize;
            if std::mem::replace(&mut seen[c], true) {
                return Err(Error::DuplicateKey {
                    strategy_id: r.stock_id.clone(),
                    month: r.month.to_string(),
                });
            }
            if !r.ret.is_finite() {
                return Err(Error::invalid(format!(
                    "non-finite return for {} {}",
                    r.stock_id, r.month
                )));
            }
            panel.ret[c] = r.ret;
            if let Some(m) = r.mktcap {
                if !(m > 0.0 && m.is_finite()) {
                    return Err(Error::invalid(format!(
                        "mktcap must be positive for {} {}",
                        r.stock_id, r.month
                    )));
                }
                panel.mktcap[c] = m;
            }
            if let Some(t) = &r.ticker {
                if !valid_ticker(t) {
                    return Err(Error::invalid(format!(
                        "ticker `{t}` for {} is not 1-5 uppercase letters",
                        r.stock_id
                    )));
                }
                panel.ticker[c] = Some(t.as_bytes().into());
            }
            for (k, v) in &r.acct {
                panel.acct.get_mut(k).expect("name collected")[c] = *v;
            }
        }
        panel.stocks = stocks;
        Ok(panel)
    }

    pub fn stocks(&self) -> &[String] {
        &self.stocks
    }

    pub fn months(&self) -> &[Month] {
        &self.months
    }

    pub fn n_stocks(&self) -> usize {
        self.stocks.len()
    }

    pub fn acct_names(&self) -> impl Iterator<Item = &str> {
        self.acct.keys().map(String::as_str)
    }

    pub fn has_mktcap(&self) -> bool {
        self.has_mktcap
    }

    pub fn has_ticker(&self) -> bool {
        self.has_ticker
    }

    pub(crate) fn cell(&self, stock: usize, t: usize) -> usize {
        stock * self.months.len() + t
    }

    pub(crate) fn ret_at(&self, stock: usize, t: usize) -> f64 {
        self.ret[self.cell(stock, t)]
    }

    pub(crate) fn mktcap_at(&self, stock: usize, t: usize) -> f64 {
        self.mktcap[self.cell(stock, t)]
    }

    pub(crate) fn ticker_at(&self, stock: usize, t: usize) -> Option<&[u8]> {
        self.ticker[self.cell(stock, t)].as_deref()
    }

    pub(crate) fn acct_series(&self, name: &str) -> Result<&[f64]> {
        self.acct
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::MissingField(format!("acct:{name}")))
    }
}

/// Parse `stock_id,month,ret[,mktcap][,ticker][,acct:<name>...]`. Empty
/// optional cells are missing values.
pub fn read_stock_panel<R: Read>(source: R) -> Result<StockPanel> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let need = |name: &str| col(name).ok_or_else(|| Error::MissingField(name.to_string()));
    let (i_id, i_month, i_ret) = (need("stock_id")?, need("month")?, need("ret")?);
    let (i_cap, i_tick) = (col("mktcap"), col("ticker"));
    let acct_cols: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter_map(|(i, h)| h.strip_prefix("acct:").map(|n| (i, n.to_string())))
        .collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            msg: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let perr = |msg: String| Error::Parse { line, msg };
        let get = |i: usize| rec.get(i).unwrap_or("");
        let num = |i: usize, what: &str| -> Result<Option<f64>> {
            let s = get(i);
            if s.is_empty() {
                return Ok(None);
            }
            s.parse::<f64>()
                .map(Some)
                .map_err(|_| perr(format!("{what} `{s}` is not a number")))
        };
        let id = get(i_id);
        if id.is_empty() {
            return Err(perr("empty stock_id".into()));
        }
        let month: Month = get(i_month)
            .parse()
            .map_err(|e: Error| perr(e.to_string()))?;
        let ret = num(i_ret, "ret")?.ok_or_else(|| perr("empty ret".into()))?;
        let mut row = StockRow::new(id, month, ret);
        row.mktcap = i_cap.map(|i| num(i, "mktcap")).transpose()?.flatten();
        row.ticker = i_tick
            .map(get)
            .filter(|s| !s.is_empty())
            .map(str::to_string);
        for (i, name) in &acct_cols {
            if let Some(v) = num(*i, name)? {
                row.acct.insert(name.clone(), v);
            }
        }
        rows.push(row);
    }
    StockPanel::new(rows)
}

pub fn read_stock_panel_file(path: &Path) -> Result<StockPanel> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_stock_panel(std::io::BufReader::new(f))
}

/// Write rows in the layout [`read_stock_panel`] accepts.
pub fn write_stock_rows<W: Write>(rows: &[StockRow], sink: W) -> Result<()> {
    let names: BTreeSet<&str> = rows
        .iter()
        .flat_map(|r| r.acct.keys().map(String::as_str))
        .collect();
    let mut w = csv::Writer::from_writer(sink);
    let mut header = vec![
        "stock_id".to_string(),
        "month".into(),
        "ret".into(),
        "mktcap".into(),
        "ticker".into(),
    ];
    header.extend(names.iter().map(|n| format!("acct:{n}")));
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.stock_id.clone(),
            r.month.to_string(),
            r.ret.to_string(),
            r.mktcap.map(|v| v.to_string()).unwrap_or_default(),
            r.ticker.clone().unwrap_or_default(),
        ];
        rec.extend(
            names
                .iter()
                .map(|n| r.acct.get(*n).map(|v| v.to_string()).unwrap_or_default()),
        );
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<stock csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_with_optional_columns() {
        let text = "stock_id,month,ret,mktcap,ticker,acct:at,acct:sale\n\
                    A,2000-01,0.01,10,AB,5,\n\
                    B,2000-02,-0.02,,ZZZ,,3\n";
        let p = read_stock_panel(text.as_bytes()).unwrap();
        assert_eq!(p.stocks(), ["A", "B"]);
        assert_eq!(p.months().len(), 2);
        assert_eq!(p.ret_at(0, 0), 0.01);
        assert!(p.ret_at(0, 1).is_nan());
        assert_eq!(p.mktcap_at(0, 0), 10.0);
        assert!(p.mktcap_at(1, 1).is_nan());
        assert_eq!(p.ticker_at(1, 1), Some(&b"ZZZ"[..]));
        assert_eq!(p.acct_series("sale").unwrap()[p.cell(1, 1)], 3.0);
        assert!(matches!(p.acct_series("lt"), Err(Error::MissingField(f)) if f == "acct:lt"));
    }

    #[test]
    fn rejects_bad_rows() {
        let dup = "stock_id,month,ret\nA,2000-01,0.1\nA,2000-01,0.2\n";
        assert!(matches!(
            read_stock_panel(dup.as_bytes()),
            Err(Error::DuplicateKey { .. })
        ));
        let tick = "stock_id,month,ret,ticker\nA,2000-01,0.1,abc\n";
        assert!(read_stock_panel(tick.as_bytes()).is_err());
        let cap = "stock_id,month,ret,mktcap\nA,2000-01,0.1,-3\n";
        assert!(read_stock_panel(cap.as_bytes()).is_err());
        let missing = "stock_id,ret\nA,0.1\n";
        assert!(
            matches!(read_stock_panel(missing.as_bytes()), Err(Error::MissingField(f)) if f == "month")
        );
        let bad = "stock_id,month,ret\nA,2000-01,x\n";
        assert!(matches!(
            read_stock_panel(bad.as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn writer_matches_reader() {
        let mut r = StockRow::new("X", Month::new(2001, 3), 0.5);
        r.mktcap = Some(2.0);
        r.ticker = Some("XY".into());
        r.acct.insert("at".into(), 1.5);
        let mut buf = Vec::new();
        write_stock_rows(&[r], &mut buf).unwrap();
        let p = read_stock_panel(&buf[..]).unwrap();
        assert_eq!(p.mktcap_at(0, 0), 2.0);
        assert_eq!(p.acct_series("at").unwrap()[0], 1.5);
    }
}

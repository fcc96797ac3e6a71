//! Enumerate the signal universe and build decile long-short returns from a
//! small synthetic stock panel.
//!
//! ```bash
//! cargo run --release --example build_signals
//! ```

use ebmine::rng::Streams;
use ebmine::signals::{
    build_panel, enumerate_pastret_signals, enumerate_ticker_signals, StockPanel, StockRow,
    Weighting,
};
use ebmine::Month;
use rand::Rng;

fn main() -> ebmine::Result<()> {
    let pastret = enumerate_pastret_signals();
    let ticker = enumerate_ticker_signals();
    println!(
        "{} past-return signals, {} ticker signals",
        pastret.len(),
        ticker.len()
    );

    let mut rng = Streams::new(3).rng("stocks", 0);
    let mut rows = Vec::new();
    for s in 0..200 {
        let tk: String = (0..3)
            .map(|_| rng.random_range(b'A'..=b'Z') as char)
            .collect();
        for m in 0..96 {
            let mut row = StockRow::new(
                format!("s{s:03}"),
                Month::new(2010, 1).offset(m),
                rng.random_range(-0.1..0.1),
            );
            row.mktcap = Some(rng.random_range(1.0..100.0));
            row.ticker = Some(tk.clone());
            rows.push(row);
        }
    }
    let stocks = StockPanel::new(rows)?;
    let defs: Vec<_> = pastret
        .into_iter()
        .take(3)
        .chain(ticker.into_iter().take(2))
        .collect();
    let panel = build_panel(&stocks, &defs, &[Weighting::Ew, Weighting::Vw], 10)?;
    for s in panel.series() {
        let mean = s.rets().iter().sum::<f64>() / s.len() as f64;
        println!("{:<32} {:>3} months, mean {mean:+.5}", s.id, s.len());
    }
    Ok(())
}

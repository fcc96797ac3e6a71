//! Long-short strategy construction from stock-level data: accounting
//! ratios, past-return moments and ticker-letter sorts.

mod build;
mod defs;
mod stocks;

pub use build::{
    build_panel, build_strategy_returns, family_for, Builder, Weighting, DEFAULT_DECILES,
};
pub use defs::{
    enumerate_acct_signals, enumerate_pastret_signals, enumerate_ticker_signals, read_signal_defs,
    write_signal_defs, SignalDef, SignalKind, Source, N_QUARTERS, N_TICKER_GROUPS,
    TICKER_POSITIONS,
};
pub use stocks::{read_stock_panel, read_stock_panel_file, write_stock_rows, StockPanel, StockRow};

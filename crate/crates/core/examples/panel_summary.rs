//! Simulate a returns panel, summarize a 20-year window and print the pooled
//! t-stat histogram as CSV.
//!
//! ```bash
//! cargo run --release --example panel_summary
//! ```

use ebmine::panel::{summarize_window, tstat_histogram, write_histogram_csv, Family};
use ebmine::prior::FamilyParams;
use ebmine::simgen::{generate_panel, GeneratorSpec, Vol};
use ebmine::Month;

fn main() -> ebmine::Result<()> {
    let spec = GeneratorSpec::single(
        Family::AcctEw,
        FamilyParams::new(0.0, 0.0, 0.5, 2.0, 0.6)?,
        2_000,
        300,
        Vol::Uniform {
            low: 0.01,
            high: 0.05,
        },
        7,
    );
    let g = generate_panel(&spec)?;
    let summary = summarize_window(&g.panel, Month::december(2000), 240, 60)?;
    println!(
        "{} strategies summarized, {} skipped for short history",
        summary.stats.len(),
        summary.diagnostics.too_few_obs
    );
    let hist = tstat_histogram(&summary.stats, None, 0.5)?;
    write_histogram_csv(&[hist], std::io::stdout())
}

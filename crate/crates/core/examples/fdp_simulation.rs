//! Distribution of the false discovery proportion at a fixed hurdle.
//!
//! ```bash
//! cargo run --release --example fdp_simulation
//! ```

use ebmine::prior::FamilyParams;
use ebmine::simgen::{fdp_simulate, write_fdp_bins_csv, FdpConfig};

fn main() -> ebmine::Result<()> {
    let prior = FamilyParams::new(0.0, 0.0, 0.0, 0.8, 0.21)?;
    let res = fdp_simulate(&FdpConfig::new(prior, 29_000, 3.0, 500, 8))?;
    println!(
        "mean FDP {:.4}, median {:.4}, 95th percentile {:.4}, {:.0} discoveries per simulation",
        res.mean_fdp, res.fdp_p50, res.fdp_p95, res.mean_discoveries
    );
    write_fdp_bins_csv(&res, std::io::stdout())
}

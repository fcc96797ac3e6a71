//! With one family and equal volatilities, EB and naive rankings pick the
//! same strategies; unequal volatilities and mean-return ranking break this.
//!
//! ```bash
//! cargo run --release --example selection_overlap
//! ```

use ebmine::prior::FamilyParams;
use ebmine::simgen::{prop1_harness, Prop1Config, Ranking, Vol};

fn main() -> ebmine::Result<()> {
    let prior = FamilyParams::new(0.0, 0.1, 0.0, 2.0, 0.5)?;
    let same = prop1_harness(&Prop1Config::new(prior, 5_000, 0.01, 10, 1))?;
    println!(
        "Sharpe ranking, equal vol: {}/10 identical, mean overlap {:.3}",
        same.n_identical, same.mean_overlap
    );
    let mixed = prop1_harness(&Prop1Config {
        vol: Vol::Uniform {
            low: 0.01,
            high: 0.06,
        },
        naive_ranking: Ranking::MeanReturn,
        ..Prop1Config::new(prior, 5_000, 0.01, 10, 1)
    })?;
    println!(
        "mean-return ranking, mixed vol: mean overlap {:.3}",
        mixed.mean_overlap
    );
    Ok(())
}

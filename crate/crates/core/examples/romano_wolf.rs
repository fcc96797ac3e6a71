//! Bootstrap step-down hurdle controlling Pr(FDP > p*) <= q*.
//!
//! ```bash
//! cargo run --release --example romano_wolf
//! ```

use ebmine::fdr::{hurdle_rw, Diagnostics, RwConfig};
use ebmine::panel::Family;
use ebmine::prior::FamilyParams;
use ebmine::simgen::{generate_panel, GeneratorSpec, Vol};

fn main() -> ebmine::Result<()> {
    let spec = GeneratorSpec::single(
        Family::TickerEw,
        FamilyParams::new(0.0, 0.0, 0.0, 4.0, 0.6)?,
        50,
        120,
        Vol::Uniform {
            low: 0.02,
            high: 0.06,
        },
        4,
    );
    let g = generate_panel(&spec)?;
    let res = hurdle_rw(&g.panel, &RwConfig::new(0.05, 0.05, 11))?;
    println!(
        "hurdle {:.3}, {} discoveries",
        res.hurdle, res.n_discoveries
    );
    if let Diagnostics::Bootstrap(d) = &res.diagnostics {
        for s in &d.steps {
            println!(
                "  k = {:>2}: h_k = {:.3}, {} rejected, condition {}",
                s.k,
                s.hurdle,
                s.n_rejected,
                if s.satisfied { "met" } else { "not met" }
            );
        }
    }
    Ok(())
}

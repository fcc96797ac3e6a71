//! Check the closed-form posterior against adaptive Gauss-Kronrod quadrature.
//!
//! ```bash
//! cargo run --example quadrature_oracle
//! ```

use ebmine::ebpredict::{posterior_mean_t, posterior_var_t};
use ebmine::prior::FamilyParams;
use ebmine::simgen::{oracle_posterior_moments, trapezoid_posterior_moments};

fn main() -> ebmine::Result<()> {
    let prior = FamilyParams::new(-0.5, 0.0, 1.0, 2.5, 0.4)?;
    for t in [-4.0, -1.0, 0.0, 1.5, 3.0, 8.0] {
        let q = oracle_posterior_moments(t, &prior, 1e-11)?;
        let tr = trapezoid_posterior_moments(t, &prior, 20_000)?;
        println!(
            "t = {t:>5.1}: mean err {:.1e} (trapezoid {:.1e}), var err {:.1e}",
            (posterior_mean_t(t, &prior) - q.mean).abs(),
            (posterior_mean_t(t, &prior) - tr.mean).abs(),
            (posterior_var_t(t, &prior) - q.var).abs()
        );
    }
    Ok(())
}

//! Posterior predictions under a two-component normal-mixture prior.
//!
//! ```bash
//! cargo run --example posterior
//! ```

use ebmine::ebpredict::{posterior_mean_t, posterior_var_t, shrinkage_special_case, tweedie_mean};
use ebmine::prior::FamilyParams;

fn main() -> ebmine::Result<()> {
    // half the strategies are near-null, half have t-stats spread with sd 2
    let prior = FamilyParams::new(0.0, 0.1, 0.0, 2.0, 0.5)?;
    println!(
        "{:>6} {:>10} {:>10} {:>10}",
        "t", "E(mu|t)", "Var(mu|t)", "Tweedie"
    );
    for t in [0.0, 1.0, 2.0, 3.0, 4.0, 6.0] {
        println!(
            "{t:>6.1} {:>10.4} {:>10.4} {:>10.4}",
            posterior_mean_t(t, &prior),
            posterior_var_t(t, &prior),
            tweedie_mean(t, &prior)
        );
    }

    // one normal prior reduces to linear shrinkage by 1 - 1/v
    let v = 2.0;
    let normal = FamilyParams::single(0.0, (v - 1.0f64).sqrt())?;
    println!(
        "\nnormal prior, v = {v}: E(mu|3) = {:.4}, (1 - 1/v) * 3 = {:.4}",
        posterior_mean_t(3.0, &normal),
        shrinkage_special_case(3.0, v).value
    );
    Ok(())
}

//! Fit the mixture prior to simulated t-statistics by multi-start QML.
//!
//! ```bash
//! cargo run --release --example fit_prior
//! ```

use ebmine::prior::{log_likelihood, sample_mu, FamilyParams};
use ebmine::qmlfit::{fit_family, FitConfig};
use ebmine::rng::Streams;
use rand_distr::{Distribution, StandardNormal};

fn main() -> ebmine::Result<()> {
    let truth = FamilyParams::new(0.0, 0.1, 0.0, 2.0, 0.5)?;
    let streams = Streams::new(1);
    let mu = sample_mu(&truth, 20_000, streams.derive("mu", 0));
    let mut rng = streams.rng("noise", 0);
    let t: Vec<f64> = mu
        .iter()
        .map(|m| {
            let e: f64 = StandardNormal.sample(&mut rng);
            m + e
        })
        .collect();

    let fit = fit_family(&t, &FitConfig::default())?;
    println!("true   {truth:?}\nfitted {:?}", fit.params);
    println!(
        "loglik fitted {:.3}, true {:.3}; best start {} of {}",
        fit.loglik,
        log_likelihood(&t, &truth)?,
        fit.start_index,
        fit.starts.len()
    );
    Ok(())
}

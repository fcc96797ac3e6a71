//! FDR hurdles from the Benjamini-Yekutieli bound and Storey's null share.
//!
//! ```bash
//! cargo run --example fdr_hurdles
//! ```

use ebmine::fdr::{hurdle_by13, hurdle_storey, pi_storey, STOREY_NULL_CUTOFF};
use ebmine::prior::{sample_mu, FamilyParams};
use ebmine::rng::Streams;
use rand_distr::{Distribution, StandardNormal};

fn main() -> ebmine::Result<()> {
    // 70% exact nulls, 30% with mean t of 3
    let prior = FamilyParams::new(0.0, 0.0, 3.0, 1.0, 0.7)?;
    let streams = Streams::new(2);
    let mu = sample_mu(&prior, 10_000, streams.derive("mu", 0));
    let mut rng = streams.rng("noise", 0);
    let t: Vec<f64> = mu
        .iter()
        .map(|m| {
            let e: f64 = StandardNormal.sample(&mut rng);
            m + e
        })
        .collect();

    println!(
        "estimated null share {:.3}",
        pi_storey(&t, STOREY_NULL_CUTOFF)
    );
    for q in [0.01, 0.05, 0.10] {
        let by = hurdle_by13(&t, q)?;
        let st = hurdle_storey(&t, q, STOREY_NULL_CUTOFF)?;
        let false_disc = |h: f64| {
            t.iter()
                .zip(&mu)
                .filter(|(ti, m)| ti.abs() > h && **m == 0.0)
                .count()
        };
        println!(
            "q = {q:.2}: BY13 h = {:.3} ({} found, {} false), Storey h = {:.3} ({} found, {} false)",
            by.hurdle,
            by.n_discoveries,
            false_disc(by.hurdle),
            st.hurdle,
            st.n_discoveries,
            false_disc(st.hurdle)
        );
    }
    Ok(())
}

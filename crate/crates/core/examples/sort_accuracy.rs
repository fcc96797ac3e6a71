//! Compare EB-predicted and realized returns of groups sorted on in-sample
//! means.
//!
//! ```bash
//! cargo run --release --example sort_accuracy
//! ```

use std::collections::BTreeMap;

use ebmine::panel::Family;
use ebmine::prior::FamilyParams;
use ebmine::qmlfit::{fit_by_year, FitConfig};
use ebmine::select::{sort_accuracy, SortConfig};
use ebmine::simgen::{generate_panel, GeneratorSpec, Vol};

fn main() -> ebmine::Result<()> {
    let spec = GeneratorSpec::single(
        Family::PastretEw,
        FamilyParams::new(0.0, 0.1, 0.3, 2.0, 0.5)?,
        2_000,
        360,
        Vol::Constant { sd: 0.03 },
        9,
    );
    let g = generate_panel(&spec)?;
    let cfg_fit = FitConfig {
        n_starts: 3,
        ..FitConfig::default()
    };
    let models: BTreeMap<i32, _> = fit_by_year(&g.panel, 1999..=2008, 240, 240, &cfg_fit)?
        .into_iter()
        .map(|(y, f)| (y, f.spec))
        .collect();
    let cfg = SortConfig {
        window_months: 240,
        min_obs: 240,
        n_groups: 10,
        ..SortConfig::new(1999, 2008, 2004)
    };
    let res = sort_accuracy(&g.panel, &models, &cfg)?;
    println!(
        "{:<6} {:>5} {:>10} {:>10} {:>10} {:>8}",
        "era", "group", "in-sample", "predicted", "OOS", "OOS se"
    );
    for r in &res.rows {
        println!(
            "{:<6} {:>5} {:>10.4} {:>10.4} {:>10.4} {:>8.4}",
            format!("{:?}", r.era),
            r.group,
            r.in_sample_mean_ann,
            r.predicted_mean_ann,
            r.oos_mean_ann,
            r.oos_se_ann
        );
    }
    let within = res.rows.iter().filter(|r| r.within(2.0)).count();
    println!(
        "{within}/{} groups within 2 standard errors",
        res.rows.len()
    );
    Ok(())
}

//! Annual-rebalance backtest of EB and naive top-1% selections on a
//! simulated six-family panel.
//!
//! ```bash
//! cargo run --release --example backtest
//! ```

use std::collections::BTreeMap;

use ebmine::panel::Family;
use ebmine::prior::FamilyParams;
use ebmine::qmlfit::{fit_by_year, FitConfig};
use ebmine::select::{run_backtest, selection_overlap, BacktestConfig, Rule};
use ebmine::simgen::{generate_panel, FamilySpec, GeneratorSpec, Vol};
use ebmine::Month;

fn main() -> ebmine::Result<()> {
    let families = Family::BUILTIN
        .iter()
        .enumerate()
        .map(|(i, f)| {
            Ok(FamilySpec {
                family: f.clone(),
                params: FamilyParams::new(0.0, 0.0, 0.2 * i as f64, 1.0 + 0.3 * i as f64, 0.6)?,
                n_strategies: 1_000,
                vol: Vol::Uniform {
                    low: 0.01,
                    high: 0.06,
                },
            })
        })
        .collect::<ebmine::Result<Vec<_>>>()?;
    let spec = GeneratorSpec {
        families,
        n_months: 360,
        start: Month::new(1980, 1),
        factor_loading: 0.2,
        seed: 5,
    };
    let g = generate_panel(&spec)?;

    let cfg_fit = FitConfig {
        n_starts: 3,
        ..FitConfig::default()
    };
    let models: BTreeMap<i32, _> = fit_by_year(&g.panel, 1999..=2008, 240, 240, &cfg_fit)?
        .into_iter()
        .map(|(y, f)| (y, f.spec))
        .collect();

    for rule in [Rule::Eb, Rule::Naive] {
        let cfg = BacktestConfig {
            window_months: 240,
            min_obs: 240,
            ..BacktestConfig::new(1999, 2008, 0.01, rule)
        };
        let s = run_backtest(&g.panel, &models, &cfg)?.summary;
        println!(
            "{rule:?}: {} months, mean {:.2}%/yr, t {:.2}, Sharpe {:.2}, {:.0} strategies",
            s.n_months,
            100.0 * s.mean_ret_ann,
            s.tstat,
            s.sharpe_ann,
            s.mean_n_strats
        );
    }
    let cfg = BacktestConfig {
        window_months: 240,
        min_obs: 240,
        ..BacktestConfig::new(1999, 2008, 0.01, Rule::Eb)
    };
    for o in selection_overlap(&g.panel, &models, &cfg)? {
        println!(
            "{}: {} common of {} / {}, Jaccard {:.2}",
            o.year, o.n_common, o.n_eb, o.n_naive, o.jaccard
        );
    }
    Ok(())
}

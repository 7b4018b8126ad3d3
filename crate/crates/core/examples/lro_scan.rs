//! Long-range order scan for the 1/t^2 kernel, plus the first-order term of
//! the overlap series.

use cising::ising_continuum::{estimate_rho_series, RunSettings, SeriesSettings};
use cising::percolation::{long_range_order_scan, LroSettings};
use cising::Kernel;

fn main() -> cising::Result<()> {
    let kernel = Kernel::poly(1.0)?;
    let settings = LroSettings {
        alphas: vec![0.1, 1.0, 5.0, 20.0],
        t_grid: vec![1.0, 2.0, 4.0, 6.0, 8.0],
        horizon: 16.0,
        run: RunSettings::new(10_000, 1_000, 11),
        percolation_samples: 0,
    };
    let report = long_range_order_scan(&kernel, &settings, 11)?;
    for s in report.summary() {
        println!("alpha = {:>5}: {:?} level {:?}", s.alpha, s.classification, s.plateau_level);
    }
    println!("crossover {:?}", report.crossover);

    let series = estimate_rho_series((8.0f64 * 20.0).sqrt(), &kernel, &SeriesSettings::new(1, RunSettings::new(4_000, 400, 12)))?;
    for (h, v) in series.first_order_horizons.iter().zip(&series.first_order_values) {
        println!("first-order term up to T = {h:>5}: {:.2} +- {:.2}", v.mean, v.stderr);
    }
    println!("first-order class {}", series.first_order_class.label());
    Ok(())
}

//! Two-point function of the continuum Ising model at zero and positive coupling.

use cising::ising_continuum::{estimate_correlations, IsingParams, RunSettings};
use cising::Kernel;

fn main() -> cising::Result<()> {
    let kernel = Kernel::single_mode(1.0, 1.0)?;
    let times = [0.25, 0.5, 1.0, 2.0, 3.0];
    let sets: Vec<Vec<f64>> = times.iter().map(|&t| vec![t]).collect();
    let run = RunSettings::new(20_000, 1_000, 1).with_chains(4);
    println!("{:>6} {:>10} {:>20} {:>20}", "t", "e^(-2t)", "alpha = 0", "alpha = 1");
    let free = estimate_correlations(&IsingParams::new(0.0, 6.0, kernel.clone())?, &sets, &run)?;
    let coupled = estimate_correlations(&IsingParams::new(1.0, 6.0, kernel)?, &sets, &run)?;
    for ((t, f), c) in times.iter().zip(&free).zip(&coupled) {
        println!(
            "{t:>6} {:>10.6} {:>11.6} +- {:.1e} {:>11.6} +- {:.1e}",
            (-2.0 * t).exp(),
            f.mean,
            f.stderr,
            c.mean,
            c.stderr
        );
    }
    Ok(())
}

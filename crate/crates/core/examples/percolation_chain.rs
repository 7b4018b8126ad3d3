//! Continuum percolation and the site-bond percolation built from it: the
//! chain of lower bounds for the spin correlation.

use cising::ising_continuum::{estimate_correlations, IsingParams, RunSettings};
use cising::percolation::{continuum_two_point, discrete_two_point, estimate_p0, sample_continuum, Domain, SiteBondModel};
use cising::Kernel;

fn main() -> cising::Result<()> {
    let kernel = Kernel::poly(1.0)?;
    let alpha = 4.0;
    let horizon = 9.0;

    let c = sample_continuum(alpha, horizon, &kernel, 1)?;
    println!("one sample on [0, {horizon}]: {} intervals, {} bonds, {} clusters", c.interval_count(), c.bonds().len(), c.cluster_count());

    let p0 = estimate_p0(alpha, &kernel, 100_000, 2)?;
    println!("p0 = {:.4} +- {:.1e}", p0.mean, p0.stderr);
    let model = SiteBondModel::new(Domain::Natural, 8, alpha, &kernel, p0.mean)?;
    let params = IsingParams::new(alpha, horizon, kernel.clone())?;
    let tau = estimate_correlations(&params, &[vec![1.0], vec![2.0]], &RunSettings::new(20_000, 1_000, 3))?;
    for (j, n) in [1i64, 2].into_iter().enumerate() {
        let cont = continuum_two_point(alpha, horizon, &kernel, 0.0, n as f64, 100_000, 4 + j as u64)?;
        let disc = discrete_two_point(&model, 0, n, 100_000, 6 + j as u64)?;
        println!("n = {n}: tau {:.6} +- {:.1e} >= continuum {:.4} >= discrete {:.4}", tau[j].mean, tau[j].stderr, cont.mean, disc.mean);
    }
    Ok(())
}

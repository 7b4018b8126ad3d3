//! Ground-state overlap from partition-function ratios, compared with the
//! exact diagonalization and the upper bound.

use cising::fock::{ground_state_report, TruncatedModel};
use cising::ising_continuum::{estimate_rho_ratio, overlap_upper_bound, RunSettings};
use cising::Kernel;

fn main() -> cising::Result<()> {
    let kernel = Kernel::single_mode(1.0, 1.0)?;
    let lambda = 1.0;
    let report = estimate_rho_ratio(lambda, &kernel, &[1.0, 2.0, 4.0, 8.0], &RunSettings::new(20_000, 1_000, 3))?;
    for (t, r) in report.horizons.iter().zip(&report.rho) {
        println!("T = {t:>4}: Z_T^2/Z_2T = {:.5} +- {:.1e}", r.mean, r.stderr);
    }
    match &report.plateau {
        Some(p) => println!("plateau {:.5} +- {:.1e}", p.mean, p.stderr),
        None => println!("no plateau on this grid"),
    }
    let exact = ground_state_report(&TruncatedModel::new(&[(1.0, 1.0)], 30, lambda)?)?;
    println!("exact rho {:.5}, E0 {:.5}, gap {:.5}", exact.rho, exact.energy, exact.gap);
    println!("upper bound {:.5}", overlap_upper_bound(lambda, &kernel)?);
    Ok(())
}

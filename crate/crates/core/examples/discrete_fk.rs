//! The discretized Ising chain: exact enumeration, the FK identity and the
//! dominating independent bond percolation.

use cising::ising_continuum::RunSettings;
use cising::ising_discrete::{
    bond_percolation_two_point, exact_correlation, exact_fk_two_point, fk_two_point_mcmc, wall_correlation,
    LatticeModel,
};
use cising::Kernel;

fn main() -> cising::Result<()> {
    let kernel = Kernel::single_mode(1.0, 1.0)?;
    let small = LatticeModel::new(1.0, 4, 1.0, kernel.clone())?;
    for b in 1..=4 {
        println!(
            "N = 4, b = {b}: E[s0 sb] = {:.12}  P(0 <-> b) = {:.12}",
            exact_correlation(&small, &[0, b])?,
            exact_fk_two_point(&small, 0, b)?
        );
    }

    let model = LatticeModel::new(2.0, 32, 1.0, kernel)?;
    let run = RunSettings::new(20_000, 1_000, 5);
    let spin = wall_correlation(&model, &[0, 16], &run)?;
    let fk = fk_two_point_mcmc(&model, 0, 16, &run)?;
    let ind = bond_percolation_two_point(&model, 0, 16, 200_000, 6)?;
    println!("N = 32, t = 1: spin {:.4} +- {:.1e}", spin.mean, spin.stderr);
    println!("               FK {:.4} +- {:.1e}", fk.mean, fk.stderr);
    println!("      independent {:.4} +- {:.1e}", ind.mean, ind.stderr);
    Ok(())
}

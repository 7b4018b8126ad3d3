//! Discrete bond percolation on finer grids approaching the continuum
//! percolation.

use cising::percolation::appendix_convergence_experiment;
use cising::Kernel;

fn main() -> cising::Result<()> {
    let kernel = Kernel::poly(1.0)?;
    for alpha in [0.0, 1.0] {
        let table = appendix_convergence_experiment(alpha, 2.0, &kernel, 1, &[8, 16, 32, 64], 200_000, 9)?;
        println!("alpha = {alpha}: continuum P(0 <-> 1) = {:.5} +- {:.1e}", table.continuum.mean, table.continuum.stderr);
        for row in &table.rows {
            let closed = row.closed_form.map(|v| format!("  closed form {v:.6}")).unwrap_or_default();
            println!("  N = {:>3}: discrete {:.5}  gap {:.5} +- {:.1e}{closed}", row.n_per_unit, row.discrete.mean, row.gap, row.gap_stderr);
        }
        println!("  gaps nonincreasing: {}", table.nonincreasing);
    }
    Ok(())
}

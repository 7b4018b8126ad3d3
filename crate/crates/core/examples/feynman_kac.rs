//! Vacuum expectation of the truncated spin boson semigroup against the
//! path-space partition function.

use cising::fock::{feynman_kac_check, TruncatedModel};

fn main() -> cising::Result<()> {
    let model = TruncatedModel::new(&[(1.0, 1.0)], 30, 0.5)?;
    println!("alpha = lambda^2/8 = {}", model.alpha());
    for horizon in [0.5, 1.0, 2.0] {
        let r = feynman_kac_check(&model, horizon, 200_000, 7)?;
        println!(
            "T = {horizon}: exact {:.8}  path MC {:.8} +- {:.1e}  ({:.2} sigma)",
            r.exact, r.monte_carlo.mean, r.monte_carlo.stderr, r.deviation
        );
    }
    Ok(())
}

//! The three kernel families: values, antiderivatives and infrared class.

use cising::Kernel;

fn main() -> cising::Result<()> {
    let kernels = [
        Kernel::modes(&[(1.0, 1.0), (0.5, 3.0)])?,
        Kernel::power_law(3, 1.0, 2.0)?,
        Kernel::poly(1.0)?,
    ];
    let horizons = [10.0, 100.0, 1000.0, 10000.0];
    for k in &kernels {
        println!("{}", k.id());
        println!("  g(0) = {:.6}  g(1) = {:.6}  F(1) = {:.6}  G(1) = {:.6}", k.at_zero(), k.eval(1.0)?, k.first_antideriv(1.0)?, k.second_antideriv(1.0)?);
        println!("  box integral over [0,1]^2 = {:.6}", k.double_integral(0.0, 1.0, 0.0, 1.0)?);
        let report = k.classify_infrared(&horizons)?;
        println!("  int_0^T t g(t) dt at T = {horizons:?}: {:.4?}", report.values);
        println!("  infrared class {}", report.class.label());
    }
    Ok(())
}

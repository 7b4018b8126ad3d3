use rayon::prelude::*;

use super::{reduce_by_parity, LatticeModel};
use crate::error::{Error, Result};
use crate::rng::with_worker_cap;
use crate::union_find::UnionFind;

/// Largest number of sites handled by exact spin enumeration.
pub const ENUMERATION_LIMIT: usize = 20;
/// Largest number of sites handled by exact edge-subset enumeration.
pub const FK_ENUMERATION_LIMIT: usize = 5;

/// Leading spins fixed per parallel task.
const LEADING_BITS: usize = 6;

/// `E[∏_{i ∈ sites} σ_i]` by summing over all `2^{N+1}` configurations.
///
/// `σ_0 = +1` is fixed (the weight is flip invariant and odd products vanish
/// exactly), the rest is visited in Gray-code order with O(N) updates.
pub fn exact_correlation(model: &LatticeModel, sites: &[usize]) -> Result<f64> {
    let n_sites = model.sites();
    if n_sites > ENUMERATION_LIMIT {
        return Err(Error::usage(format!(
            "exact enumeration needs N + 1 <= {ENUMERATION_LIMIT}, got {n_sites}"
        )));
    }
    model.check_sites(sites)?;
    let sites = reduce_by_parity(sites);
    if sites.is_empty() {
        return Ok(1.0);
    }
    if sites.len() % 2 == 1 {
        return Ok(0.0);
    }
    let free = n_sites - 1;
    let lead = free.min(LEADING_BITS);
    let low = free - lead;
    let couplings: Vec<Vec<f64>> = (0..n_sites)
        .map(|i| (0..n_sites).map(|j| model.coupling(i, j)).collect())
        .collect();
    // shift so that every weight is at most 1
    let offset: f64 = (0..n_sites)
        .flat_map(|i| (i + 1..n_sites).map(move |j| (i, j)))
        .map(|(i, j)| couplings[i][j].abs())
        .sum();
    let mut in_set = vec![false; n_sites];
    for &s in &sites {
        in_set[s] = true;
    }
    let partial: Vec<(f64, f64)> = with_worker_cap(|| {
        (0..1usize << lead)
            .into_par_iter()
            .map(|head| {
                // free spin k sits at site k + 1; the head sets the top bits
                let mut spin = vec![1.0f64; n_sites];
                for b in 0..lead {
                    if head >> b & 1 == 1 {
                        spin[low + b + 1] = -1.0;
                    }
                }
                let mut field = vec![0.0; n_sites];
                let mut energy = 0.0;
                for i in 0..n_sites {
                    for j in 0..n_sites {
                        field[i] += couplings[i][j] * spin[j];
                    }
                    energy += 0.5 * spin[i] * field[i];
                }
                let mut obs: f64 = sites.iter().map(|&s| spin[s]).product();
                let mut z = 0.0;
                let mut num = 0.0;
                for step in 0..1usize << low {
                    if step > 0 {
                        let i = step.trailing_zeros() as usize + 1;
                        let s = spin[i];
                        energy -= 2.0 * s * field[i];
                        for (f, c) in field.iter_mut().zip(&couplings[i]) {
                            *f -= 2.0 * c * s;
                        }
                        spin[i] = -s;
                        if in_set[i] {
                            obs = -obs;
                        }
                    }
                    let w = (energy - offset).exp();
                    z += w;
                    num += obs * w;
                }
                (z, num)
            })
            .collect()
    });
    let z: f64 = partial.iter().map(|p| p.0).sum();
    let num: f64 = partial.iter().map(|p| p.1).sum();
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::Numerical(format!("partition sum is {z}")));
    }
    Ok(num / z)
}

/// `P(a ↔ b)` under the random-cluster measure with edge probabilities
/// [`LatticeModel::fk_probability`] and cluster weight 2, by summing over all
/// edge subsets.
pub fn exact_fk_two_point(model: &LatticeModel, a: usize, b: usize) -> Result<f64> {
    let n = model.sites();
    if n > FK_ENUMERATION_LIMIT {
        return Err(Error::usage(format!(
            "edge enumeration needs N + 1 <= {FK_ENUMERATION_LIMIT}, got {n}"
        )));
    }
    model.check_sites(&[a, b])?;
    if a == b {
        return Ok(1.0);
    }
    let edges: Vec<(usize, usize, f64)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| (i, j, model.fk_probability(j - i)))
        .collect();
    let mut z = 0.0;
    let mut connected = 0.0;
    for mask in 0u32..1 << edges.len() {
        let mut w = 1.0;
        let mut uf = UnionFind::new(n);
        for (k, &(i, j, p)) in edges.iter().enumerate() {
            if mask >> k & 1 == 1 {
                w *= p;
                uf.union(i, j);
            } else {
                w *= 1.0 - p;
            }
        }
        if w == 0.0 {
            continue;
        }
        w *= 2f64.powi(uf.components() as i32);
        z += w;
        if uf.connected(a, b) {
            connected += w;
        }
    }
    Ok(connected / z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ising_discrete::SpinConfig;
    use crate::kernel::Kernel;

    /// Direct sum over all configurations, no tricks.
    fn brute(model: &LatticeModel, sites: &[usize]) -> f64 {
        let n = model.sites();
        let (mut z, mut num) = (0.0, 0.0);
        for mask in 0u32..1 << n {
            let s = SpinConfig::new((0..n).map(|i| if mask >> i & 1 == 1 { -1 } else { 1 }).collect()).unwrap();
            let w = model.energy(&s).exp();
            z += w;
            num += w * s.product(sites);
        }
        num / z
    }

    #[test]
    fn matches_brute_force() {
        let m = LatticeModel::new(2.0, 9, 0.8, Kernel::poly(1.0).unwrap()).unwrap();
        for sites in [vec![0, 5], vec![2, 3, 7, 9], vec![1, 8], vec![4, 4, 6, 0]] {
            let e = exact_correlation(&m, &sites).unwrap();
            let b = brute(&m, &sites);
            assert!((e - b).abs() < 1e-12, "{sites:?}: {e} vs {b}");
        }
    }

    #[test]
    fn free_chain_closed_form() {
        // α = 0: E[σ_0 σ_k] = tanh(J)^k with tanh J = (1-δ)/(1+δ)
        let m = LatticeModel::new(2.0, 8, 0.0, Kernel::poly(1.0).unwrap()).unwrap();
        let v = exact_correlation(&m, &[0, 4]).unwrap();
        assert!((v - 0.1296).abs() < 1e-12, "{v}");
    }

    #[test]
    fn trivial_observables() {
        let m = LatticeModel::new(2.0, 8, 1.0, Kernel::poly(1.0).unwrap()).unwrap();
        assert_eq!(exact_correlation(&m, &[0, 0]).unwrap(), 1.0);
        assert_eq!(exact_correlation(&m, &[3]).unwrap(), 0.0);
        assert!(exact_correlation(&m, &[9]).is_err());
        let big = LatticeModel::new(2.0, 20, 1.0, Kernel::poly(1.0).unwrap()).unwrap();
        assert!(matches!(exact_correlation(&big, &[0, 1]), Err(Error::Usage(_))));
    }

    #[test]
    fn fk_identity_small() {
        let m = LatticeModel::new(1.5, 4, 0.7, Kernel::single_mode(1.0, 1.0).unwrap()).unwrap();
        for b in 1..5 {
            let spin = exact_correlation(&m, &[0, b]).unwrap();
            let fk = exact_fk_two_point(&m, 0, b).unwrap();
            assert!((spin - fk).abs() < 1e-12, "{b}: {spin} vs {fk}");
        }
        assert_eq!(exact_fk_two_point(&m, 2, 2).unwrap(), 1.0);
    }
}

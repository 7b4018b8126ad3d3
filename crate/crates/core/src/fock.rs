//! Exact spin boson Hamiltonian with finitely many modes and occupation
//! cutoffs.
//!
//! `H = diag(2, 0) ⊗ 1 + 1 ⊗ dΓ(ω) + λ σ_x ⊗ φ(v)` with
//! `φ(v) = Σ_j v_j (a_j + a_j†) / 2`. The vacuum overlap
//! `⟨Ω_↓, e^{-TH} Ω_↓⟩` then equals the continuum Ising partition function
//! with kernel `g(t) = Σ_j v_j² e^{-ω_j |t|}` and `α = λ²/8`.
//!
//! Every finite truncation has a ground state with `ρ > 0`. The absence of a
//! ground state for infrared-divergent couplings is a statement about
//! infinitely many modes and shows up only through the Ising and percolation
//! estimators.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ising_continuum::{alpha_from_lambda, estimate_partition_function_direct, IsingParams};
use crate::kernel::Kernel;
use crate::stats::Estimate;

pub const DEFAULT_DIMENSION_LIMIT: usize = 20_000;
/// Ground levels closer than this are reported as degenerate.
pub const DEGENERACY_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BosonMode {
    pub freq: f64,
    pub coupling: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncatedModel {
    modes: Vec<BosonMode>,
    n_max: usize,
    lambda: f64,
    dimension_limit: usize,
}

impl TruncatedModel {
    /// `modes` are `(ω_j, v_j)` pairs; each mode keeps occupations
    /// `0..=n_max`.
    pub fn new(modes: &[(f64, f64)], n_max: usize, lambda: f64) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::InvalidModel("at least one mode required".into()));
        }
        for &(freq, coupling) in modes {
            if !(freq > 0.0 && freq.is_finite()) {
                return Err(Error::InvalidModel(format!("mode frequency must be > 0, got {freq}")));
            }
            if !(coupling >= 0.0 && coupling.is_finite()) {
                return Err(Error::InvalidModel(format!("mode coupling must be >= 0, got {coupling}")));
            }
        }
        if n_max == 0 {
            return Err(Error::InvalidModel("n_max must be >= 1".into()));
        }
        if !lambda.is_finite() {
            return Err(Error::InvalidModel(format!("lambda must be finite, got {lambda}")));
        }
        Ok(TruncatedModel {
            modes: modes
                .iter()
                .map(|&(freq, coupling)| BosonMode { freq, coupling })
                .collect(),
            n_max,
            lambda,
            dimension_limit: DEFAULT_DIMENSION_LIMIT,
        })
    }

    pub fn with_dimension_limit(mut self, limit: usize) -> Self {
        self.dimension_limit = limit;
        self
    }

    pub fn with_cutoff(&self, n_max: usize) -> Result<Self> {
        let pairs: Vec<_> = self.modes.iter().map(|m| (m.freq, m.coupling)).collect();
        Ok(TruncatedModel::new(&pairs, n_max, self.lambda)?.with_dimension_limit(self.dimension_limit))
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        let pairs: Vec<_> = self.modes.iter().map(|m| (m.freq, m.coupling)).collect();
        Ok(TruncatedModel::new(&pairs, self.n_max, lambda)?.with_dimension_limit(self.dimension_limit))
    }

    pub fn modes(&self) -> &[BosonMode] {
        &self.modes
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `2 (n_max + 1)^modes`, saturating.
    pub fn dimension(&self) -> usize {
        let mut d: usize = 2;
        for _ in &self.modes {
            d = d.saturating_mul(self.n_max + 1);
        }
        d
    }

    /// The Ising kernel `Σ_j v_j² e^{-ω_j |t|}` of the same model.
    pub fn kernel(&self) -> Result<Kernel> {
        let pairs: Vec<_> = self
            .modes
            .iter()
            .filter(|m| m.coupling > 0.0)
            .map(|m| (m.coupling * m.coupling, m.freq))
            .collect();
        if pairs.is_empty() {
            return Err(Error::InvalidModel("all mode couplings vanish".into()));
        }
        Ok(Kernel::modes(&pairs)?)
    }

    pub fn alpha(&self) -> f64 {
        alpha_from_lambda(self.lambda)
    }

    /// Index of `Ω_↓`: spin down, every mode empty.
    pub fn vacuum_index(&self) -> usize {
        self.dimension() / 2
    }

    fn occupations(&self, mut index: usize) -> Vec<usize> {
        let base = self.n_max + 1;
        let mut occ = vec![0; self.modes.len()];
        for slot in occ.iter_mut().rev() {
            *slot = index % base;
            index /= base;
        }
        occ
    }
}

/// Assembles `H` in the basis ordered spin first (up, down), then mode
/// occupations lexicographically with the first mode most significant.
pub fn build_hamiltonian(model: &TruncatedModel) -> Result<DMatrix<f64>> {
    let dim = model.dimension();
    if dim > model.dimension_limit {
        return Err(Error::usage(format!(
            "dimension {dim} exceeds the limit {}",
            model.dimension_limit
        )));
    }
    let half = dim / 2;
    let base = model.n_max + 1;
    let m = model.modes.len();
    let strides: Vec<usize> = (0..m).map(|j| base.pow((m - 1 - j) as u32)).collect();
    let mut h = DMatrix::zeros(dim, dim);
    for bos in 0..half {
        let occ = model.occupations(bos);
        let field: f64 = occ.iter().zip(&model.modes).map(|(&n, md)| n as f64 * md.freq).sum();
        h[(bos, bos)] = 2.0 + field;
        h[(half + bos, half + bos)] = field;
        for (j, md) in model.modes.iter().enumerate() {
            if occ[j] == model.n_max {
                continue;
            }
            let raised = bos + strides[j];
            let v = model.lambda * md.coupling * 0.5 * ((occ[j] + 1) as f64).sqrt();
            // σ_x couples up ↔ down, a_j† raises mode j
            for (a, b) in [(bos, half + raised), (half + bos, raised)] {
                h[(a, b)] = v;
                h[(b, a)] = v;
            }
        }
    }
    Ok(h)
}

/// Sorted spectrum with the weights `|⟨Ω_↓, ψ_k⟩|²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub vacuum_weights: Vec<f64>,
}

impl Spectrum {
    /// `Σ_k |⟨Ω_↓, ψ_k⟩|² e^{-T E_k}`.
    pub fn semigroup_overlap(&self, horizon: f64) -> f64 {
        self.eigenvalues
            .iter()
            .zip(&self.vacuum_weights)
            .map(|(e, w)| w * (-horizon * e).exp())
            .sum()
    }
}

pub fn spectrum(model: &TruncatedModel) -> Result<Spectrum> {
    let h = build_hamiltonian(model)?;
    let vac = model.vacuum_index();
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    Ok(Spectrum {
        eigenvalues: order.iter().map(|&k| eig.eigenvalues[k]).collect(),
        vacuum_weights: order.iter().map(|&k| eig.eigenvectors[(vac, k)].powi(2)).collect(),
    })
}

/// `⟨Ω_↓, e^{-TH} Ω_↓⟩`.
pub fn semigroup_overlap(model: &TruncatedModel, horizon: f64) -> Result<f64> {
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::usage(format!("horizon must be >= 0, got {horizon}")));
    }
    if model.lambda == 0.0 {
        return Ok(1.0);
    }
    Ok(spectrum(model)?.semigroup_overlap(horizon))
}

/// `E[X_0 X_t]` under the continuum Ising measure on `[0, T]`, from
/// `⟨Ω_↓, σ_x e^{-tH} σ_x e^{-(T-t)H} Ω_↓⟩ / ⟨Ω_↓, e^{-TH} Ω_↓⟩`.
pub fn two_point_correlation(model: &TruncatedModel, horizon: f64, t: f64) -> Result<f64> {
    if !(horizon.is_finite() && (0.0..=horizon).contains(&t)) {
        return Err(Error::usage(format!("need 0 <= t <= T, got t = {t}, T = {horizon}")));
    }
    let h = build_hamiltonian(model)?;
    let dim = h.nrows();
    let half = dim / 2;
    let eig = SymmetricEigen::new(h);
    let e0 = eig.eigenvalues.min();
    let decay = |s: f64| eig.eigenvalues.map(|e| (-s * (e - e0)).exp());
    let vecs = &eig.eigenvectors;
    let right = vecs * vecs.row(half).transpose().component_mul(&decay(horizon - t));
    // σ_x swaps the spin halves
    let flipped = DVector::from_fn(dim, |i, _| right[(i + half) % dim]);
    let middle = (vecs.transpose() * flipped).component_mul(&decay(t));
    // σ_x Ω_↓ is the up vacuum, index 0
    let numerator = vecs.row(0).transpose().dot(&middle);
    let denominator = vecs.row(half).transpose().map(|c| c * c).dot(&decay(horizon));
    Ok(numerator / denominator)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralResult {
    pub lambda: f64,
    pub n_max: usize,
    /// Ground energy `E_λ`.
    pub energy: f64,
    /// `ρ(λ) = |⟨ψ_0, Ω_↓⟩|²`.
    pub rho: f64,
    pub gap: f64,
}

pub fn ground_state_report(model: &TruncatedModel) -> Result<SpectralResult> {
    let s = spectrum(model)?;
    let gap = s.eigenvalues[1] - s.eigenvalues[0];
    if gap < DEGENERACY_TOLERANCE {
        return Err(Error::Numerical(format!("ground level degenerate (gap {gap:e})")));
    }
    let (energy, rho) = if model.lambda == 0.0 {
        (0.0, 1.0)
    } else {
        (s.eigenvalues[0], s.vacuum_weights[0].min(1.0))
    };
    Ok(SpectralResult {
        lambda: model.lambda,
        n_max: model.n_max,
        energy,
        rho,
        gap,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffTable {
    pub rows: Vec<SpectralResult>,
    /// `|E|` change between the last two cutoffs.
    pub truncation_error: Option<f64>,
    pub warning: Option<String>,
}

/// Ground-state data for increasing cutoffs.
pub fn cutoff_convergence(model: &TruncatedModel, n_max_list: &[usize]) -> Result<CutoffTable> {
    if n_max_list.is_empty() || n_max_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::usage("cutoff list must be nonempty and increasing"));
    }
    let rows = n_max_list
        .iter()
        .map(|&n| ground_state_report(&model.with_cutoff(n)?))
        .collect::<Result<Vec<_>>>()?;
    let de: Vec<f64> = rows.windows(2).map(|w| (w[1].energy - w[0].energy).abs()).collect();
    let dr: Vec<f64> = rows.windows(2).map(|w| (w[1].rho - w[0].rho).abs()).collect();
    let shrinking = |d: &[f64]| d.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    let warning = (!(shrinking(&de) && shrinking(&dr))).then(|| {
        format!(
            "differences do not shrink monotonically; lambda = {} may be too large for the cutoff range",
            model.lambda
        )
    });
    Ok(CutoffTable {
        truncation_error: de.last().copied(),
        rows,
        warning,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeynmanKacReport {
    pub horizon: f64,
    pub exact: f64,
    pub monte_carlo: Estimate,
    /// `|exact - MC| / stderr`.
    pub deviation: f64,
}

/// Compares the semigroup overlap with the path-space estimate of
/// `Z_{λ²/8, T}`.
pub fn feynman_kac_check(model: &TruncatedModel, horizon: f64, n_samples: usize, seed: u64) -> Result<FeynmanKacReport> {
    let exact = semigroup_overlap(model, horizon)?;
    let params = IsingParams::new(model.alpha(), horizon, model.kernel()?)?;
    let mc = estimate_partition_function_direct(&params, n_samples, seed)?.estimate;
    let diff = (exact - mc.mean).abs();
    let deviation = if mc.stderr > 0.0 {
        diff / mc.stderr
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(FeynmanKacReport {
        horizon,
        exact,
        monte_carlo: mc,
        deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_mode(n_max: usize, lambda: f64) -> TruncatedModel {
        TruncatedModel::new(&[(1.0, 1.0)], n_max, lambda).unwrap()
    }

    #[test]
    fn free_two_point_is_exponential() {
        let m = one_mode(3, 0.0);
        for t in [0.0, 0.5, 2.0] {
            let c = two_point_correlation(&m, 3.0, t).unwrap();
            assert!((c - (-2.0 * t).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn free_model_is_diagonal() {
        let m = TruncatedModel::new(&[(1.5, 1.0), (0.7, 0.3)], 3, 0.0).unwrap();
        let h = build_hamiltonian(&m).unwrap();
        for i in 0..h.nrows() {
            for j in 0..h.ncols() {
                if i != j {
                    assert_eq!(h[(i, j)], 0.0);
                }
            }
        }
        assert_eq!(h[(m.vacuum_index(), m.vacuum_index())], 0.0);
        let r = ground_state_report(&m).unwrap();
        assert_eq!((r.energy, r.rho), (0.0, 1.0));
        assert!((r.gap - 0.7).abs() < 1e-14);
        assert_eq!(semigroup_overlap(&m, 3.0).unwrap(), 1.0);
    }

    #[test]
    fn two_level_oracle() {
        // Blocks {(↑,0),(↓,1)} = [[2,c],[c,1]] and {(↑,1),(↓,0)} = [[3,c],[c,0]].
        let lambda = 0.8;
        let c: f64 = lambda / 2.0;
        let m = one_mode(1, lambda);
        let h = build_hamiltonian(&m).unwrap();
        let expect = [
            [2.0, 0.0, 0.0, c],
            [0.0, 3.0, c, 0.0],
            [0.0, c, 0.0, 0.0],
            [c, 0.0, 0.0, 1.0],
        ];
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(h[(i, j)], expect[i][j]);
            }
        }
        let e0 = 1.5 - (2.25 + c * c).sqrt();
        let rho = (e0 - 3.0).powi(2) / (c * c + (e0 - 3.0).powi(2));
        let r = ground_state_report(&m).unwrap();
        assert!((r.energy - e0).abs() < 1e-13);
        assert!((r.rho - rho).abs() < 1e-13);
        let e1 = 1.5 - (0.25 + c * c).sqrt();
        assert!((r.gap - (e1 - e0)).abs() < 1e-13);
    }

    #[test]
    fn parity_symmetry() {
        let m = TruncatedModel::new(&[(1.0, 1.0), (2.0, 0.5)], 3, 1.3).unwrap();
        let h = build_hamiltonian(&m).unwrap();
        assert_eq!(h, h.transpose());
        let dim = m.dimension();
        let parity = DMatrix::from_fn(dim, dim, |i, j| {
            if i != j {
                return 0.0;
            }
            let spin = if i < dim / 2 { 1.0 } else { -1.0 };
            let n: usize = m.occupations(i % (dim / 2)).iter().sum();
            spin * if n % 2 == 0 { 1.0 } else { -1.0 }
        });
        let comm = &h * &parity - &parity * &h;
        assert!(comm.amax() < 1e-12);
    }

    #[test]
    fn eigenvectors_orthonormal() {
        let m = TruncatedModel::new(&[(1.0, 1.0), (0.5, 0.7)], 4, 1.0).unwrap();
        let eig = SymmetricEigen::new(build_hamiltonian(&m).unwrap());
        let v = &eig.eigenvectors;
        let r = v.transpose() * v - DMatrix::identity(v.nrows(), v.ncols());
        assert!(r.amax() < 1e-10);
    }

    #[test]
    fn semigroup_is_log_convex_and_gives_energy() {
        let m = one_mode(10, 0.5);
        let s = spectrum(&m).unwrap();
        let logs: Vec<f64> = (0..20).map(|i| s.semigroup_overlap(0.5 * i as f64).ln()).collect();
        for w in logs.windows(3) {
            assert!(w[0] + w[2] - 2.0 * w[1] >= -1e-12);
        }
        let e = ground_state_report(&m).unwrap().energy;
        let t = 50.0;
        assert!((-semigroup_overlap(&m, t).unwrap().ln() / t - e).abs() < 1e-3);
    }

    #[test]
    fn rho_respects_overlap_bound() {
        let m = one_mode(10, 1.0);
        let r = ground_state_report(&m).unwrap();
        let bound = crate::ising_continuum::overlap_upper_bound(1.0, &m.kernel().unwrap()).unwrap();
        assert!(r.rho > 0.0 && r.rho <= bound + 1e-3, "{} vs {bound}", r.rho);
    }

    #[test]
    fn rho_decreases_in_coupling() {
        let rhos: Vec<f64> = [0.0, 0.5, 1.0, 1.5]
            .iter()
            .map(|&l| ground_state_report(&one_mode(12, l)).unwrap().rho)
            .collect();
        assert!(rhos.windows(2).all(|w| w[1] <= w[0]), "{rhos:?}");
    }

    #[test]
    fn cutoff_convergence_is_variational() {
        let t = cutoff_convergence(&one_mode(2, 1.0), &[4, 6, 8, 10, 12, 14]).unwrap();
        assert!(t.rows.windows(2).all(|w| w[1].energy <= w[0].energy + 1e-14));
        assert!(t.truncation_error.unwrap() < 1e-8);
        assert!(t.warning.is_none());
        let free = cutoff_convergence(&one_mode(2, 0.0), &[2, 4, 6]).unwrap();
        assert!(free.rows.windows(2).all(|w| w[0].energy == w[1].energy && w[0].rho == w[1].rho));
    }

    #[test]
    fn dimension_limit_is_enforced() {
        let m = TruncatedModel::new(&[(1.0, 1.0); 4], 9, 1.0).unwrap().with_dimension_limit(1000);
        assert!(matches!(build_hamiltonian(&m), Err(Error::Usage(_))));
    }
}

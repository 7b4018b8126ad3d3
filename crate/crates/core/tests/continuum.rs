use cising::ising_continuum::{
    estimate_correlation, estimate_correlations, estimate_susceptibility, path_energy, run_chains, IsingParams,
    RunSettings, Spin, SpinPath,
};
use cising::rng::stream_rng;
use cising::Kernel;
use rand::Rng;
use rand_distr::{Distribution, Poisson};

const BINS: usize = 5;

fn free_path(horizon: f64, rng: &mut impl Rng) -> SpinPath {
    let k = Poisson::new(horizon).unwrap().sample(rng) as usize;
    let mut jumps: Vec<f64> = (0..k).map(|_| horizon * rng.random::<f64>()).collect();
    jumps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let initial = if rng.random::<bool>() { Spin::Up } else { Spin::Down };
    SpinPath::new(horizon, initial, jumps).unwrap()
}

fn jump_histogram(params: &IsingParams, settings: &RunSettings) -> Vec<f64> {
    let samples = run_chains(params, settings, BINS, |path, out| {
        out.fill(0.0);
        out[path.num_jumps().min(BINS - 1)] = 1.0;
    })
    .unwrap();
    samples.estimates().unwrap().iter().map(|e| e.mean).collect()
}

#[test]
fn jump_counts_match_reweighted_free_walk() {
    let (alpha, horizon) = (1.0, 0.5);
    let kernel = Kernel::single_mode(1.0, 1.0).unwrap();
    let params = IsingParams::new(alpha, horizon, kernel.clone()).unwrap();
    let chain = jump_histogram(&params, &RunSettings::new(40_000, 1_000, 11).with_chains(4));

    let mut rng = stream_rng(12, 0);
    let mut weighted = [0.0; BINS];
    let mut total = 0.0;
    for _ in 0..200_000 {
        let path = free_path(horizon, &mut rng);
        let w = path_energy(&path, &kernel, alpha).unwrap().exp();
        weighted[path.num_jumps().min(BINS - 1)] += w;
        total += w;
    }
    let tv: f64 = chain.iter().zip(&weighted).map(|(c, w)| (c - w / total).abs()).sum::<f64>() / 2.0;
    assert!(tv < 0.02, "total variation {tv}: chain {chain:?}");
}

#[test]
fn strong_coupling_matches_reweighted_free_walk() {
    let (alpha, horizon) = (4.0, 1.5);
    let kernel = Kernel::poly(1.0).unwrap();
    let params = IsingParams::new(alpha, horizon, kernel.clone()).unwrap();
    let run = RunSettings::new(40_000, 1_000, 13).with_chains(4);
    let samples = run_chains(&params, &run, 2, |path, out| {
        out[0] = path.spin_at(0.0) * path.spin_at(1.0);
        out[1] = path.jumps().iter().filter(|&&x| x > 0.5 && x < 1.0).count() as f64;
    })
    .unwrap();
    let est = samples.estimates().unwrap();

    let mut rng = stream_rng(14, 0);
    let draws: Vec<(f64, [f64; 2])> = (0..400_000)
        .map(|_| {
            let path = free_path(horizon, &mut rng);
            let w = path_energy(&path, &kernel, alpha).unwrap().exp();
            let inner = path.jumps().iter().filter(|&&x| x > 0.5 && x < 1.0).count() as f64;
            (w, [path.spin_at(0.0) * path.spin_at(1.0), inner])
        })
        .collect();
    let total: f64 = draws.iter().map(|(w, _)| w).sum();
    for (k, chain) in est.iter().enumerate() {
        let mean = draws.iter().map(|(w, x)| w * x[k]).sum::<f64>() / total;
        let var = draws.iter().map(|(w, x)| (w * (x[k] - mean)).powi(2)).sum::<f64>();
        let stderr = var.sqrt() / total;
        let err = (chain.stderr.powi(2) + stderr.powi(2)).sqrt();
        assert!(
            (chain.mean - mean).abs() < 4.0 * err,
            "observable {k}: chain {} +- {} vs reweighted {mean} +- {stderr}",
            chain.mean,
            chain.stderr
        );
    }
}

/// Short interior excursions: a point `s` is covered by one of width `w`
/// with weight `e^{-4α c w}`, `c = F(s) + F(T - s)`, so each of `3` and `4`
/// is straddled with probability about `1/(4αc)²`.
#[test]
fn interior_excursions_at_strong_coupling() {
    let (alpha, horizon) = (4.0, 9.0);
    let params = IsingParams::new(alpha, horizon, Kernel::poly(1.0).unwrap()).unwrap();
    let samples = run_chains(&params, &RunSettings::new(40_000, 2_000, 15).with_chains(4), 1, |path, out| {
        out[0] = 1.0 - path.spin_at(3.0) * path.spin_at(4.0);
    })
    .unwrap();
    let deficit = samples.estimate(0).unwrap();
    let c = 3.0f64.atan() + 6.0f64.atan();
    let want = 2.0 * 2.0 / (4.0 * alpha * c).powi(2);
    assert!(
        (deficit.mean - want).abs() < 0.3 * want + 4.0 * deficit.stderr,
        "{} +- {} vs {want}",
        deficit.mean,
        deficit.stderr
    );
}

#[test]
fn free_jump_count_is_poisson() {
    let horizon = 2.0;
    let params = IsingParams::new(0.0, horizon, Kernel::poly(1.0).unwrap()).unwrap();
    let hist = jump_histogram(&params, &RunSettings::new(20_000, 500, 3).with_chains(4));
    let mut pk = (-horizon as f64).exp();
    let mut tail = 1.0;
    for (k, h) in hist.iter().enumerate().take(BINS - 1) {
        assert!((h - pk).abs() < 0.01, "P(N = {k}) = {h}, want {pk}");
        tail -= pk;
        pk *= horizon / (k as f64 + 1.0);
    }
    assert!((hist[BINS - 1] - tail).abs() < 0.01);
}

#[test]
fn free_correlation_is_exponential() {
    let params = IsingParams::new(0.0, 3.0, Kernel::single_mode(1.0, 1.0).unwrap()).unwrap();
    let times = [0.25, 0.5, 1.0, 2.0];
    let sets: Vec<Vec<f64>> = times.iter().map(|&t| vec![t]).collect();
    let est = estimate_correlations(&params, &sets, &RunSettings::new(20_000, 500, 5)).unwrap();
    for (t, e) in times.iter().zip(&est) {
        let want = (-2.0 * t).exp();
        assert!((e.mean - want).abs() < 4.0 * e.stderr + 1e-3, "t = {t}: {} +- {}", e.mean, e.stderr);
    }
}

#[test]
fn free_susceptibility_matches_closed_form() {
    let horizon = 2.0f64;
    let params = IsingParams::new(0.0, horizon, Kernel::poly(1.0).unwrap()).unwrap();
    let e = estimate_susceptibility(&params, &RunSettings::new(40_000, 500, 9)).unwrap();
    let q = (-2.0 * horizon).exp();
    let want = (horizon * (1.0 - q) - (1.0 - q * (1.0 + 2.0 * horizon)) / 2.0) / horizon;
    assert!((e.mean - want).abs() < 4.0 * e.stderr, "{} +- {} vs {want}", e.mean, e.stderr);
}

#[test]
fn coupling_raises_correlations() {
    let kernel = Kernel::single_mode(1.0, 1.0).unwrap();
    let settings = RunSettings::new(20_000, 500, 21);
    let free = estimate_correlation(&IsingParams::new(0.0, 4.0, kernel.clone()).unwrap(), &[2.0], &settings).unwrap();
    let coupled = estimate_correlation(&IsingParams::new(1.0, 4.0, kernel).unwrap(), &[2.0], &settings).unwrap();
    assert!(coupled.mean > free.mean + 5.0 * coupled.stderr);
}

#[test]
fn same_seed_same_estimate() {
    let params = IsingParams::new(0.5, 2.0, Kernel::poly(1.0).unwrap()).unwrap();
    let settings = RunSettings::new(2_000, 100, 77);
    let a = estimate_correlation(&params, &[1.0], &settings).unwrap();
    let b = estimate_correlation(&params, &[1.0], &settings).unwrap();
    assert_eq!(a, b);
    let c = estimate_correlation(&params, &[1.0], &RunSettings::new(2_000, 100, 78)).unwrap();
    assert_ne!(a.mean, c.mean);
}

//! Seed handling. Every random stream is derived from one user seed.
//!
//! Stream `i` of master seed `s` is seeded with `s ^ splitmix64(i)`. The
//! worker cap can be set with the `CISING_WORKERS` environment variable.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub const WORKERS_ENV: &str = "CISING_WORKERS";

/// SplitMix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn stream_seed(seed: u64, stream: u64) -> u64 {
    seed ^ splitmix64(stream)
}

pub fn stream_rng(seed: u64, stream: u64) -> SimRng {
    SimRng::seed_from_u64(stream_seed(seed, stream))
}

/// Sub-stream of a stream, for nested parallelism (e.g. chain `j` of
/// experiment point `i`).
pub fn sub_seed(seed: u64, stream: u64, sub: u64) -> u64 {
    stream_seed(stream_seed(seed, stream), sub.wrapping_add(0x5eed))
}

/// Runs `f` inside a rayon pool capped by `CISING_WORKERS` when it is set.
pub fn with_worker_cap<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    match std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        Some(n) if n > 0 => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        _ => f(),
    }
}

/// Failures before the first success of independent Bernoulli(`p`) trials.
/// Lets a sampler jump straight to the next open edge.
pub fn geometric_gap<R: Rng>(rng: &mut R, p: f64) -> u64 {
    if p >= 1.0 {
        return 0;
    }
    if p <= 0.0 {
        return u64::MAX;
    }
    let u: f64 = rng.random();
    // 1 - u lies in (0, 1]
    let g = ((1.0 - u).ln() / (-p).ln_1p()).floor();
    if g >= u64::MAX as f64 {
        u64::MAX
    } else {
        g as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_differ_and_repeat() {
        let a: u64 = stream_rng(7, 0).random();
        let b: u64 = stream_rng(7, 1).random();
        let a2: u64 = stream_rng(7, 0).random();
        assert_ne!(a, b);
        assert_eq!(a, a2);
        assert_ne!(sub_seed(7, 0, 1), sub_seed(7, 1, 0));
    }

    #[test]
    fn geometric_gap_mean() {
        let mut rng = stream_rng(3, 0);
        let p = 0.2;
        let n = 100_000;
        let mean = (0..n).map(|_| geometric_gap(&mut rng, p) as f64).sum::<f64>() / n as f64;
        // mean (1-p)/p = 4, sd sqrt(1-p)/p ≈ 4.47
        assert!((mean - 4.0).abs() < 5.0 * 4.47 / (n as f64).sqrt());
        assert_eq!(geometric_gap(&mut rng, 1.0), 0);
        assert_eq!(geometric_gap(&mut rng, 0.0), u64::MAX);
    }
}

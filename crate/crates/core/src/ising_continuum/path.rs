use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{Kernel, KernelResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    pub fn value(self) -> f64 {
        match self {
            Spin::Up => 1.0,
            Spin::Down => -1.0,
        }
    }

    pub fn flipped(self) -> Spin {
        match self {
            Spin::Up => Spin::Down,
            Spin::Down => Spin::Up,
        }
    }
}

/// A càdlàg `±1` path on `[0, T]`: an initial spin and the sorted jump times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinPath {
    horizon: f64,
    initial: Spin,
    jumps: Vec<f64>,
}

impl SpinPath {
    pub fn new(horizon: f64, initial: Spin, jumps: Vec<f64>) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidModel(format!("horizon must be > 0, got {horizon}")));
        }
        if jumps.iter().any(|&t| !(t > 0.0 && t < horizon)) {
            return Err(Error::InvalidModel("jump times must lie in (0, T)".into()));
        }
        if jumps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidModel("jump times must be strictly increasing".into()));
        }
        Ok(SpinPath {
            horizon,
            initial,
            jumps,
        })
    }

    pub fn constant(horizon: f64, initial: Spin) -> Result<Self> {
        Self::new(horizon, initial, Vec::new())
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn initial(&self) -> Spin {
        self.initial
    }

    pub fn jumps(&self) -> &[f64] {
        &self.jumps
    }

    pub fn num_jumps(&self) -> usize {
        self.jumps.len()
    }

    /// `X_t`, right-continuous. Times outside `[0, T]` are clamped.
    pub fn spin_at(&self, t: f64) -> f64 {
        let before = self.jumps.partition_point(|&x| x <= t);
        if before % 2 == 0 {
            self.initial.value()
        } else {
            -self.initial.value()
        }
    }

    /// `∏_i X_{t_i}`.
    pub fn product_at(&self, times: &[f64]) -> f64 {
        times.iter().map(|&t| self.spin_at(t)).product()
    }

    /// Constant-spin pieces `(start, end, spin)`.
    pub fn segments(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let n = self.jumps.len();
        let s0 = self.initial.value();
        (0..=n).map(move |i| {
            let a = if i == 0 { 0.0 } else { self.jumps[i - 1] };
            let b = if i == n { self.horizon } else { self.jumps[i] };
            let s = if i % 2 == 0 { s0 } else { -s0 };
            (a, b, s)
        })
    }

    /// `∫_0^T X_t dt`.
    pub fn integral(&self) -> f64 {
        self.segments().map(|(a, b, s)| s * (b - a)).sum()
    }

    /// The path `-X`.
    pub fn flipped(&self) -> SpinPath {
        SpinPath {
            horizon: self.horizon,
            initial: self.initial.flipped(),
            jumps: self.jumps.clone(),
        }
    }

    pub(crate) fn flip_initial(&mut self) {
        self.initial = self.initial.flipped();
    }

    pub(crate) fn insert_jump(&mut self, t: f64) {
        let i = self.jumps.partition_point(|&x| x < t);
        self.jumps.insert(i, t);
    }

    pub(crate) fn remove_jump(&mut self, index: usize) -> f64 {
        self.jumps.remove(index)
    }

    /// Moves jump `index` to `t`, which must not cross another jump.
    pub(crate) fn move_jump(&mut self, index: usize, t: f64) {
        self.jumps[index] = t;
    }

    /// Breakpoints `0, t_1, .., t_k, T` and the jump measure of `X`, i.e.
    /// `X_{x+} - X_{x-}` with `X = 0` outside `[0, T]`.
    pub(crate) fn jump_measure(&self) -> (Vec<f64>, Vec<f64>) {
        let k = self.jumps.len();
        let mut points = Vec::with_capacity(k + 2);
        let mut coeffs = Vec::with_capacity(k + 2);
        let mut s = self.initial.value();
        points.push(0.0);
        coeffs.push(s);
        for &t in &self.jumps {
            points.push(t);
            coeffs.push(-2.0 * s);
            s = -s;
        }
        points.push(self.horizon);
        coeffs.push(-s);
        (points, coeffs)
    }
}

/// Bilinear form `∬ g(t-s) dμ(s) dν(t)` written through `G`: for step
/// functions with jump measures `a`, `b` the double integral of
/// `g(t-s) X_s Y_t` equals `-Σ a_i b_j G(y_j - x_i)`.
pub(crate) fn jump_form(
    kernel: &Kernel,
    xs: &[f64],
    a: &[f64],
    ys: &[f64],
    b: &[f64],
) -> KernelResult<f64> {
    let mut total = 0.0;
    for (&x, &ca) in xs.iter().zip(a) {
        if ca == 0.0 {
            continue;
        }
        let mut row = 0.0;
        for (&y, &cb) in ys.iter().zip(b) {
            if cb != 0.0 {
                row += cb * kernel.second_antideriv(y - x)?;
            }
        }
        total += ca * row;
    }
    Ok(-total)
}

/// `Φ(X) = ∬_{[0,T]²} g(t-s) X_s X_t ds dt`.
pub fn path_interaction(path: &SpinPath, kernel: &Kernel) -> KernelResult<f64> {
    let (points, coeffs) = path.jump_measure();
    let mut total = 0.0;
    for i in 0..points.len() {
        let mut row = 0.0;
        for j in i + 1..points.len() {
            row += coeffs[j] * kernel.second_antideriv(points[j] - points[i])?;
        }
        total += coeffs[i] * row;
    }
    Ok(-2.0 * total)
}

/// `α Φ(X)`, the log-weight of a path relative to the free walk.
pub fn path_energy(path: &SpinPath, kernel: &Kernel, alpha: f64) -> KernelResult<f64> {
    if alpha == 0.0 {
        return Ok(0.0);
    }
    Ok(alpha * path_interaction(path, kernel)?)
}

/// `∫_0^T ∫_0^T g(u + v) Y_u Z_v du dv`, the interaction across the origin of
/// the left half `Y` (read backwards from 0) and the right half `Z`.
pub fn cross_interaction(left: &SpinPath, right: &SpinPath, kernel: &Kernel) -> KernelResult<f64> {
    // place the left path on [-T_l, 0] as s ↦ Y_{-s}
    let (lp, lc) = left.jump_measure();
    let xs: Vec<f64> = lp.iter().rev().map(|&p| -p).collect();
    let a: Vec<f64> = lc.iter().rev().map(|&c| -c).collect();
    let (ys, b) = right.jump_measure();
    jump_form(kernel, &xs, &a, &ys, &b)
}

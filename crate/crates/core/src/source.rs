//! Semilinear sources `f(m, u, q)` and their splitting into the mean,
//! the two characteristic parts and the noncharacteristic double-mode part.
//!
//! A source is composed with `q = grad u + W_r(theta_r) dphi_r + W_i(theta_i) dphi_i`
//! on a tensor grid of `(theta_r, theta_i)` nodes and split with a 2D FFT.
//! Spacetime points and gradients are ordered `(x1, x2, t)`.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::{eval_modes, Modes};

/// A nonlinear source `f(m, p, q)` with `f(m, 0, 0) = 0`.
pub trait Source: Sync {
    fn eval(&self, m: &[f64; 3], p: f64, q: &[f64; 3]) -> f64;
    /// Global Lipschitz constant in `(p, q)` for the sum norm `|dp| + |dq|_1`.
    fn lipschitz(&self) -> f64;
}

/// Serializable catalogue of the sources used by scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceSpec {
    /// `f = 0`.
    Zero,
    /// `f = kappa sin p`.
    SinU { kappa: f64 },
    /// `f = kappa (sin(q_t + psi) - sin psi)`.
    SinDt { kappa: f64, psi: f64 },
}

impl SourceSpec {
    pub fn is_zero(&self) -> bool {
        match *self {
            SourceSpec::Zero => true,
            SourceSpec::SinU { kappa } | SourceSpec::SinDt { kappa, .. } => kappa == 0.0,
        }
    }
}

impl Source for SourceSpec {
    fn eval(&self, _m: &[f64; 3], p: f64, q: &[f64; 3]) -> f64 {
        match *self {
            SourceSpec::Zero => 0.0,
            SourceSpec::SinU { kappa } => kappa * p.sin(),
            SourceSpec::SinDt { kappa, psi } => kappa * ((q[2] + psi).sin() - psi.sin()),
        }
    }

    fn lipschitz(&self) -> f64 {
        match *self {
            SourceSpec::Zero => 0.0,
            SourceSpec::SinU { kappa } | SourceSpec::SinDt { kappa, .. } => kappa.abs(),
        }
    }
}

/// Checks sampled difference quotients of `f` against its declared constant.
pub fn lipschitz_check(src: &dyn Source, samples: usize, radius: f64, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = src.lipschitz();
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let m = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-1.0..1.0)];
        let p0 = rng.random_range(-radius..radius);
        let p1 = rng.random_range(-radius..radius);
        let q0: [f64; 3] = std::array::from_fn(|_| rng.random_range(-radius..radius));
        let q1: [f64; 3] = std::array::from_fn(|_| rng.random_range(-radius..radius));
        let d = (p0 - p1).abs() + q0.iter().zip(&q1).map(|(a, b)| (a - b).abs()).sum::<f64>();
        if d < 1e-12 {
            continue;
        }
        let quotient = (src.eval(&m, p0, &q0) - src.eval(&m, p1, &q1)).abs() / d;
        worst = worst.max(quotient);
    }
    if worst > k * (1.0 + 1e-12) + 1e-15 {
        return Err(Error::LipschitzViolation { quotient: worst, k });
    }
    Ok(worst)
}

/// Parts of a source composed with the profiles at one spacetime point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointDecomposition {
    /// Double mean over `(theta_r, theta_i)`.
    pub mean: f64,
    /// Modes `(n, 0)`, `n = 1..=N`.
    pub char_r: Modes,
    /// Modes `(0, n)`, `n = 1..=N`.
    pub char_i: Modes,
    /// Modes `(k_r, k_i)` with `k_r >= 1`, `k_i != 0` and `max(|k_r|, |k_i|) <= M`;
    /// the modes with `k_r <= -1` are the conjugates of these.
    pub nc: Vec<((i32, i32), Complex64)>,
    /// Squared L2 norm (theta-average of `f^2`) of the composition.
    pub total_sq: f64,
    /// Squared norm of the modes dropped by the caps `N` and `M`.
    pub tail_sq: f64,
}

impl PointDecomposition {
    /// Squared theta-averaged norm of the noncharacteristic part kept in the table.
    pub fn nc_norm_sq(&self) -> f64 {
        2.0 * self.nc.iter().map(|(_, c)| c.norm_sqr()).sum::<f64>()
    }

    /// Squared norm of the four kept parts, which by Parseval equals
    /// `total_sq - tail_sq`.
    pub fn kept_norm_sq(&self) -> f64 {
        let cr: f64 = self.char_r.iter().map(|c| c.norm_sqr()).sum();
        let ci: f64 = self.char_i.iter().map(|c| c.norm_sqr()).sum();
        self.mean * self.mean + 2.0 * (cr + ci) + self.nc_norm_sq()
    }

    /// Evaluates the kept parts at `(theta_r, theta_i)`.
    pub fn eval(&self, theta_r: f64, theta_i: f64) -> f64 {
        let mut v = self.mean + eval_modes(&self.char_r, theta_r) + eval_modes(&self.char_i, theta_i);
        v += self.eval_nc(theta_r, theta_i);
        v
    }

    pub fn eval_nc(&self, theta_r: f64, theta_i: f64) -> f64 {
        let mut v = 0.0;
        for ((kr, ki), c) in &self.nc {
            let ph = *kr as f64 * theta_r + *ki as f64 * theta_i;
            let (s, co) = ph.sin_cos();
            v += 2.0 * (c.re * co - c.im * s);
        }
        v
    }
}

/// Forward 2D DFT of an `nq x nq` row-major grid indexed `[i_r * nq + i_i]`,
/// normalized so that the result holds Fourier coefficients.
pub fn fft2(values: &[f64], nq: usize) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = values.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    let fft = FftPlanner::new().plan_fft_forward(nq);
    for row in buf.chunks_mut(nq) {
        fft.process(row);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); nq];
    for j in 0..nq {
        for i in 0..nq {
            col[i] = buf[i * nq + j];
        }
        fft.process(&mut col);
        for i in 0..nq {
            buf[i * nq + j] = col[i];
        }
    }
    let scale = 1.0 / (nq * nq) as f64;
    buf.iter_mut().for_each(|c| *c *= scale);
    buf
}

fn wrap(k: i32, nq: usize) -> usize {
    k.rem_euclid(nq as i32) as usize
}

/// Splits samples `f(theta_r, theta_i)` taken on the `nq x nq` grid of `[0, 2 pi)^2`.
pub fn split_grid(values: &[f64], nq: usize, n_modes: usize, m_cap: usize) -> PointDecomposition {
    let coef = fft2(values, nq);
    let total_sq = values.iter().map(|v| v * v).sum::<f64>() / (nq * nq) as f64;
    let half = (nq / 2) as i32;
    let nmax = (n_modes as i32).min(half - 1);
    let char_r: Modes = (1..=n_modes as i32)
        .map(|n| if n <= nmax { coef[wrap(n, nq) * nq] } else { Complex64::new(0.0, 0.0) })
        .collect();
    let char_i: Modes = (1..=n_modes as i32)
        .map(|n| if n <= nmax { coef[wrap(n, nq)] } else { Complex64::new(0.0, 0.0) })
        .collect();
    let mcap = (m_cap as i32).min(half - 1);
    let mut nc = Vec::new();
    for kr in 1..=mcap {
        for ki in -mcap..=mcap {
            if ki != 0 {
                nc.push(((kr, ki), coef[wrap(kr, nq) * nq + wrap(ki, nq)]));
            }
        }
    }
    let mut out = PointDecomposition { mean: coef[0].re, char_r, char_i, nc, total_sq, tail_sq: 0.0 };
    out.tail_sq = (total_sq - out.kept_norm_sq()).max(0.0);
    out
}

/// Samples a closure on the `(theta_r, theta_i)` grid and splits it.
pub fn decompose_samples(f: impl Fn(f64, f64) -> f64, nq: usize, n_modes: usize, m_cap: usize) -> PointDecomposition {
    let mut values = vec![0.0; nq * nq];
    for ir in 0..nq {
        let tr = TAU * ir as f64 / nq as f64;
        for ii in 0..nq {
            let ti = TAU * ii as f64 / nq as f64;
            values[ir * nq + ii] = f(tr, ti);
        }
    }
    split_grid(&values, nq, n_modes, m_cap)
}

/// Local state entering the source at one spacetime point.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalState<'a> {
    pub m: [f64; 3],
    pub u: f64,
    pub grad_u: [f64; 3],
    pub w_r: &'a [Complex64],
    pub w_i: &'a [Complex64],
    pub dphi_r: [f64; 3],
    pub dphi_i: [f64; 3],
}

/// Composes `f(m, u, grad u + W_r dphi_r + W_i dphi_i)` on the theta grid and splits it.
pub fn decompose_source(src: &dyn Source, st: &LocalState<'_>, nq: usize, n_modes: usize, m_cap: usize) -> PointDecomposition {
    let wr: Vec<f64> = (0..nq).map(|k| eval_modes(st.w_r, TAU * k as f64 / nq as f64)).collect();
    let wi: Vec<f64> = (0..nq).map(|k| eval_modes(st.w_i, TAU * k as f64 / nq as f64)).collect();
    let mut values = vec![0.0; nq * nq];
    for ir in 0..nq {
        for ii in 0..nq {
            let q: [f64; 3] = std::array::from_fn(|c| st.grad_u[c] + wr[ir] * st.dphi_r[c] + wi[ii] * st.dphi_i[c]);
            values[ir * nq + ii] = src.eval(&st.m, st.u, &q);
        }
    }
    split_grid(&values, nq, n_modes, m_cap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::single_mode;
    use approx::assert_relative_eq;

    #[test]
    fn product_of_cosines_is_noncharacteristic() {
        let d = decompose_samples(|a, b| a.cos() * b.cos(), 16, 4, 4);
        assert!(d.mean.abs() < 1e-15);
        assert!(d.char_r.iter().chain(&d.char_i).all(|c| c.norm() < 1e-15));
        for ((kr, ki), c) in &d.nc {
            let expect = if *kr == 1 && ki.abs() == 1 { 0.25 } else { 0.0 };
            assert_relative_eq!(c.re, expect, epsilon = 1e-15);
            assert!(c.im.abs() < 1e-15);
        }
    }

    #[test]
    fn additive_separation() {
        let d = decompose_samples(|a, _| 0.7 + (2.0 * a).sin(), 16, 4, 4);
        assert_relative_eq!(d.mean, 0.7, epsilon = 1e-14);
        assert_relative_eq!(d.char_r[1].im, -0.5, epsilon = 1e-14);
        assert!(d.nc_norm_sq() < 1e-28);
    }

    #[test]
    fn sine_of_sum_matches_fine_oracle() {
        let f = |a: f64, b: f64| 0.1 * (a.cos() + 0.5 * b.sin()).sin();
        let d = decompose_samples(f, 64, 16, 16);
        assert!(d.tail_sq < 1e-24);
        for &(tr, ti) in &[(0.3, 1.1), (2.0, 5.0), (4.4, 0.2)] {
            assert!((d.eval(tr, ti) - f(tr, ti)).abs() < 1e-10);
        }
    }

    #[test]
    fn composed_sin_dt_has_zero_double_mean_when_profiles_vanish() {
        let src = SourceSpec::SinDt { kappa: 0.1, psi: 0.3 };
        let z = vec![Complex64::new(0.0, 0.0); 4];
        let st = LocalState { m: [0.0; 3], u: 0.0, grad_u: [0.0; 3], w_r: &z, w_i: &z, dphi_r: [0.0, 1.0, -1.0], dphi_i: [0.0, 1.0, -1.0] };
        let d = decompose_source(&src, &st, 16, 4, 4);
        assert_eq!(d.total_sq, 0.0);
        let w = single_mode(4, 1, 1.0, 0.0);
        let st = LocalState { w_r: &w, ..st };
        let d = decompose_source(&src, &st, 16, 4, 4);
        assert!(d.nc_norm_sq() < 1e-28);
        assert!(d.char_r[0].norm() > 1e-3);
        assert!(lipschitz_check(&src, 2000, 3.0, 7).is_ok());
    }
}

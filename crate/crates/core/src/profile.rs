//! Oscillation profiles stored as mean-zero theta-Fourier modes over ray
//! grids, theta primitives, and the transport ODE along a ray.
//!
//! Only the positive modes `n = 1..=N` are stored. Mode `-n` is the complex
//! conjugate of mode `n` and mode `0` is identically zero, so reality and the
//! mean-zero property hold by construction.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::chart::ChartKind;
use crate::error::{Error, Result};

/// Positive Fourier modes of a real mean-zero function of theta.
pub type Modes = Vec<Complex64>;

/// `W(theta) = sum_{n != 0} w_n e^{i n theta} = 2 Re sum_{n >= 1} w_n e^{i n theta}`.
pub fn eval_modes(w: &[Complex64], theta: f64) -> f64 {
    let mut acc = 0.0;
    for (k, c) in w.iter().enumerate() {
        let n = (k + 1) as f64;
        let (s, co) = (n * theta).sin_cos();
        acc += c.re * co - c.im * s;
    }
    2.0 * acc
}

/// `dW/dtheta` of [`eval_modes`].
pub fn eval_modes_dtheta(w: &[Complex64], theta: f64) -> f64 {
    let mut acc = 0.0;
    for (k, c) in w.iter().enumerate() {
        let n = (k + 1) as f64;
        let (s, co) = (n * theta).sin_cos();
        acc += n * (-c.re * s - c.im * co);
    }
    2.0 * acc
}

/// Mode `n` for any integer `n`, using the reality relation.
pub fn mode(w: &[Complex64], n: i64) -> Complex64 {
    match n {
        0 => Complex64::new(0.0, 0.0),
        n if n > 0 => w.get(n as usize - 1).copied().unwrap_or_default(),
        n => w.get((-n) as usize - 1).map(|c| c.conj()).unwrap_or_default(),
    }
}

/// Modes of `a sin(k theta) + b cos(k theta)`.
pub fn single_mode(n_modes: usize, k: usize, a_sin: f64, b_cos: f64) -> Modes {
    let mut w = vec![Complex64::new(0.0, 0.0); n_modes];
    if (1..=n_modes).contains(&k) {
        w[k - 1] = Complex64::new(0.5 * b_cos, -0.5 * a_sin);
    }
    w
}

/// Extracts modes `1..=n_modes` from equispaced samples on `[0, 2 pi)`.
pub fn modes_from_samples(samples: &[f64], n_modes: usize, mean_tol: f64) -> Result<Modes> {
    let nq = samples.len();
    let mut buf: Vec<Complex64> = samples.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(nq).process(&mut buf);
    let scale = 1.0 / nq as f64;
    let mean = buf[0].re * scale;
    let size = samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if mean.abs() > mean_tol * size.max(1.0) {
        return Err(Error::NonZeroMean { mean });
    }
    Ok((1..=n_modes)
        .map(|n| if n < nq { buf[n] * scale } else { Complex64::new(0.0, 0.0) })
        .collect())
}

/// Mean-zero periodic primitive: `U_n = W_n / (i n)`.
pub fn theta_primitive_modes(w: &[Complex64]) -> Modes {
    w.iter()
        .enumerate()
        .map(|(k, c)| c / Complex64::new(0.0, (k + 1) as f64))
        .collect()
}

/// Profile values along one ray: `w[k * modes + (n - 1)]` at parameter `s[k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayProfile {
    pub s: Vec<f64>,
    pub w: Vec<Complex64>,
}

impl RayProfile {
    pub fn zeros(s: Vec<f64>, modes: usize) -> Self {
        let len = s.len() * modes;
        RayProfile { s, w: vec![Complex64::new(0.0, 0.0); len] }
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }
}

/// A profile `W(labels, s, theta)` on a lattice of rays labelled by `(a, tau)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileGrid {
    pub kind: ChartKind,
    pub modes: usize,
    pub labels_a: Vec<f64>,
    pub labels_tau: Vec<f64>,
    pub ds: f64,
    /// Rays in row-major order `ia * labels_tau.len() + it`.
    pub rays: Vec<RayProfile>,
}

impl ProfileGrid {
    pub fn ray_index(&self, ia: usize, it: usize) -> usize {
        ia * self.labels_tau.len() + it
    }

    pub fn ray(&self, ia: usize, it: usize) -> &RayProfile {
        &self.rays[self.ray_index(ia, it)]
    }

    pub fn modes_at(&self, ray: usize, k: usize) -> &[Complex64] {
        &self.rays[ray].w[k * self.modes..(k + 1) * self.modes]
    }

    pub fn modes_at_mut(&mut self, ray: usize, k: usize) -> &mut [Complex64] {
        let m = self.modes;
        &mut self.rays[ray].w[k * m..(k + 1) * m]
    }

    /// Mode-wise linear interpolation along a ray at parameter `s`.
    pub fn interp_on_ray(&self, ray: usize, s: f64, out: &mut [Complex64]) {
        let r = &self.rays[ray];
        out.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        if r.s.is_empty() || s < -1e-12 || s > r.s[r.s.len() - 1] + 1e-12 {
            return;
        }
        if r.s.len() == 1 {
            out.copy_from_slice(self.modes_at(ray, 0));
            return;
        }
        let k = r.s.partition_point(|v| *v <= s).saturating_sub(1).min(r.s.len() - 2);
        let (s0, s1) = (r.s[k], r.s[k + 1]);
        let u = if s1 > s0 { ((s - s0) / (s1 - s0)).clamp(0.0, 1.0) } else { 0.0 };
        let (a, b) = (self.modes_at(ray, k), self.modes_at(ray, k + 1));
        for n in 0..self.modes {
            out[n] = a[n] * (1.0 - u) + b[n] * u;
        }
    }

    /// Bilinear interpolation in the labels and linear in `s`; zero outside the lattice.
    pub fn interp(&self, a: f64, tau: f64, s: f64, out: &mut [Complex64]) {
        out.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        let Some((ia, ua)) = locate(&self.labels_a, a) else { return };
        let Some((it, ut)) = locate(&self.labels_tau, tau) else { return };
        let mut tmp = vec![Complex64::new(0.0, 0.0); self.modes];
        for (da, wa) in [(0, 1.0 - ua), (1, ua)] {
            for (dt, wt) in [(0, 1.0 - ut), (1, ut)] {
                let w = wa * wt;
                if w == 0.0 {
                    continue;
                }
                let ja = (ia + da).min(self.labels_a.len() - 1);
                let jt = (it + dt).min(self.labels_tau.len() - 1);
                self.interp_on_ray(self.ray_index(ja, jt), s, &mut tmp);
                for n in 0..self.modes {
                    out[n] += tmp[n] * w;
                }
            }
        }
    }

    /// Mean-zero theta primitive of every sample.
    pub fn theta_primitive(&self) -> ProfileGrid {
        let mut out = self.clone();
        for ray in out.rays.iter_mut() {
            for chunk in ray.w.chunks_mut(self.modes) {
                let p = theta_primitive_modes(chunk);
                chunk.copy_from_slice(&p);
            }
        }
        out
    }

    /// Largest imaginary part of the reconstructed profile on `nq` theta nodes.
    pub fn max_imaginary(&self, nq: usize) -> f64 {
        let mut worst = 0.0f64;
        for ray in &self.rays {
            for chunk in ray.w.chunks(self.modes) {
                for q in 0..nq {
                    let th = std::f64::consts::TAU * q as f64 / nq as f64;
                    let mut z = Complex64::new(0.0, 0.0);
                    for n in -(self.modes as i64)..=(self.modes as i64) {
                        z += mode(chunk, n) * Complex64::from_polar(1.0, n as f64 * th);
                    }
                    worst = worst.max(z.im.abs());
                }
            }
        }
        worst
    }

    /// `sum |w|^2` over all samples and modes weighted by a per-ray measure and the
    /// trapezoid rule in `s`; equals `(2 pi)^{-1} ||W||^2` by Parseval when the
    /// weights are the label cell areas.
    pub fn weighted_norm_sq(&self, weight: impl Fn(usize, usize) -> f64) -> f64 {
        let mut acc = 0.0;
        for (ri, ray) in self.rays.iter().enumerate() {
            let n = ray.s.len();
            for k in 0..n {
                let ds = trapezoid_weight(&ray.s, k);
                let e: f64 = self.modes_at(ri, k).iter().map(|c| c.norm_sqr()).sum::<f64>() * 2.0;
                acc += weight(ri, k) * ds * e;
            }
        }
        acc
    }

    /// `||self - other||^2` with the same weighting as [`ProfileGrid::weighted_norm_sq`].
    pub fn diff_norm_sq(&self, other: &ProfileGrid, weight: impl Fn(usize, usize) -> f64) -> f64 {
        let mut acc = 0.0;
        for (ri, (ra, rb)) in self.rays.iter().zip(&other.rays).enumerate() {
            for k in 0..ra.s.len().min(rb.s.len()) {
                let ds = trapezoid_weight(&ra.s, k);
                let a = self.modes_at(ri, k);
                let b = other.modes_at(ri, k);
                let e: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>() * 2.0;
                acc += weight(ri, k) * ds * e;
            }
        }
        acc
    }

    /// Textual table rows `(ray, s, mode, re, im)` for export.
    pub fn table_rows(&self) -> Vec<(usize, f64, usize, f64, f64)> {
        let mut rows = Vec::new();
        for (ri, ray) in self.rays.iter().enumerate() {
            for (k, s) in ray.s.iter().enumerate() {
                for (n, c) in self.modes_at(ri, k).iter().enumerate() {
                    if c.norm_sqr() > 0.0 {
                        rows.push((ri, *s, n + 1, c.re, c.im));
                    }
                }
            }
        }
        rows
    }
}

/// Cell index and fraction of `x` in a sorted uniform lattice.
pub fn locate(grid: &[f64], x: f64) -> Option<(usize, f64)> {
    let n = grid.len();
    if n == 0 || x < grid[0] - 1e-12 || x > grid[n - 1] + 1e-12 {
        return None;
    }
    if n == 1 {
        return Some((0, 0.0));
    }
    let h = (grid[n - 1] - grid[0]) / (n - 1) as f64;
    let i = (((x - grid[0]) / h).floor().max(0.0) as usize).min(n - 2);
    Some((i, ((x - grid[i]) / h).clamp(0.0, 1.0)))
}

/// Trapezoid quadrature weight of node `k` in the (possibly non-uniform) grid `s`.
pub fn trapezoid_weight(s: &[f64], k: usize) -> f64 {
    let n = s.len();
    if n < 2 {
        return 0.0;
    }
    let left = if k > 0 { s[k] - s[k - 1] } else { 0.0 };
    let right = if k + 1 < n { s[k + 1] - s[k] } else { 0.0 };
    0.5 * (left + right)
}

/// Cumulative trapezoid integral of `f` over the grid `x`.
pub fn cumtrapz(x: &[f64], f: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for k in 1..x.len() {
        out[k] = out[k - 1] + 0.5 * (x[k] - x[k - 1]) * (f[k] + f[k - 1]);
    }
    out
}

/// Solves `dW/dsigma + (c/2) W = f/2`, `W(0) = w0`, on the grid `sigma` with the
/// integrating factor `exp(int c/2)` and cumulative trapezoid quadrature.
///
/// This is the transport equation `dW/ds + c W = f` written in the ray time
/// `sigma = 2 s`, which is also the elapsed physical time along the ray.
pub fn transport_scalar(sigma: &[f64], c: &[f64], f: &[f64], w0: f64, ray: usize) -> Result<Vec<f64>> {
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::CoefficientSingular { ray });
    }
    let half_c: Vec<f64> = c.iter().map(|v| 0.5 * v).collect();
    let big_i = cumtrapz(sigma, &half_c);
    let e: Vec<f64> = big_i.iter().map(|v| v.exp()).collect();
    let g: Vec<f64> = e.iter().zip(f).map(|(a, b)| 0.5 * a * b).collect();
    let gi = cumtrapz(sigma, &g);
    let out: Vec<f64> = e.iter().zip(&gi).map(|(ek, gk)| (w0 + gk) / ek).collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::CoefficientSingular { ray });
    }
    Ok(out)
}

/// Mode-wise version of [`transport_scalar`]; `f[k]` holds the source modes at `sigma[k]`.
pub fn transport_modes(sigma: &[f64], c: &[f64], f: &[Modes], w0: &[Complex64], ray: usize) -> Result<Vec<Modes>> {
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::CoefficientSingular { ray });
    }
    let half_c: Vec<f64> = c.iter().map(|v| 0.5 * v).collect();
    let big_i = cumtrapz(sigma, &half_c);
    let e: Vec<f64> = big_i.iter().map(|v| v.exp()).collect();
    let modes = w0.len();
    let mut out = vec![w0.to_vec(); sigma.len()];
    let mut acc = vec![Complex64::new(0.0, 0.0); modes];
    for k in 0..sigma.len() {
        if k > 0 {
            let h = 0.5 * (sigma[k] - sigma[k - 1]);
            for n in 0..modes {
                acc[n] += (f[k][n] * e[k] + f[k - 1][n] * e[k - 1]) * (0.5 * h);
            }
        }
        for n in 0..modes {
            out[k][n] = (w0[n] + acc[n]) / e[k];
        }
    }
    if !e.iter().all(|v| v.is_finite() && *v > 0.0) {
        return Err(Error::CoefficientSingular { ray });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cos_primitive_is_sin() {
        let w = single_mode(4, 1, 0.0, 1.0);
        let u = theta_primitive_modes(&w);
        for th in [0.0, 0.4, 2.0] {
            assert_relative_eq!(eval_modes(&u, th), th.sin(), epsilon = 1e-15);
        }
    }

    #[test]
    fn sin2_primitive() {
        let w = single_mode(4, 2, 1.0, 0.0);
        let u = theta_primitive_modes(&w);
        for th in [0.0, 0.4, 2.0] {
            assert_relative_eq!(eval_modes(&u, th), -(2.0 * th).cos() / 2.0, epsilon = 1e-15);
            assert_relative_eq!(eval_modes_dtheta(&u, th), eval_modes(&w, th), epsilon = 1e-14);
        }
    }

    #[test]
    fn samples_round_trip_and_mean_guard() {
        let nq = 32;
        let xs: Vec<f64> = (0..nq)
            .map(|q| {
                let t = std::f64::consts::TAU * q as f64 / nq as f64;
                0.3 * t.sin() - 1.2 * (3.0 * t).cos()
            })
            .collect();
        let w = modes_from_samples(&xs, 8, 1e-12).unwrap();
        for (q, x) in xs.iter().enumerate() {
            let t = std::f64::consts::TAU * q as f64 / nq as f64;
            assert_relative_eq!(eval_modes(&w, t), *x, epsilon = 1e-13);
        }
        let shifted: Vec<f64> = xs.iter().map(|v| v + 0.1).collect();
        assert!(matches!(modes_from_samples(&shifted, 8, 1e-12), Err(Error::NonZeroMean { .. })));
    }

    #[test]
    fn constant_coefficient_decay() {
        let sigma: Vec<f64> = (0..=1000).map(|k| k as f64 * 1e-3).collect();
        let c = vec![0.8; sigma.len()];
        let f = vec![0.0; sigma.len()];
        let w = transport_scalar(&sigma, &c, &f, 2.0, 0).unwrap();
        for (s, v) in sigma.iter().zip(&w) {
            assert_relative_eq!(*v, 2.0 * (-0.8 * s / 2.0).exp(), epsilon = 1e-12);
        }
    }
}

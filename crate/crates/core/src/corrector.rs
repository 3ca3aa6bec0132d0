//! Noncharacteristic corrector: `U_alpha = -f_alpha / p(alpha_r dphi_r + alpha_i dphi_i)`
//! for the double modes of the source, with a guard against resonant division.
//!
//! With `box = Delta - d_t^2`, applying `box` to `eps^2 U_alpha e^{i alpha . phi / eps}`
//! gives `-p(alpha . dphi) U_alpha e^{...}` at leading order, so this choice cancels
//! the noncharacteristic source part `f_alpha e^{...}`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::source::{decompose_samples, PointDecomposition};

/// `p(xi, tau) = |xi|^2 - tau^2` for a spacetime covector `(xi1, xi2, tau)`.
pub fn symbol(c: &[f64; 3]) -> f64 {
    c[0] * c[0] + c[1] * c[1] - c[2] * c[2]
}

/// Lorentz bilinear form `B(a, b)` with `p(a) = B(a, a)`.
pub fn bilinear(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] - a[2] * b[2]
}

/// `p(alpha_r dphi_r + alpha_i dphi_i)` evaluated directly.
pub fn combined_symbol(alpha: (i32, i32), dphi_r: &[f64; 3], dphi_i: &[f64; 3]) -> f64 {
    let c: [f64; 3] = std::array::from_fn(|k| alpha.0 as f64 * dphi_r[k] + alpha.1 as f64 * dphi_i[k]);
    symbol(&c)
}

/// The same value through `p(a + b) = p(a) + p(b) + 2 B(a, b)`.
pub fn combined_symbol_split(alpha: (i32, i32), dphi_r: &[f64; 3], dphi_i: &[f64; 3]) -> f64 {
    let (kr, ki) = (alpha.0 as f64, alpha.1 as f64);
    kr * kr * symbol(dphi_r) + ki * ki * symbol(dphi_i) + 2.0 * kr * ki * bilinear(dphi_r, dphi_i)
}

/// Corrector coefficients at one spacetime point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectorTable {
    /// `(alpha, U_alpha)` for `alpha_r >= 1`; negative `alpha_r` are conjugates.
    pub entries: Vec<((i32, i32), Complex64)>,
    /// Smallest `|p(alpha . dphi)|` met.
    pub min_symbol: f64,
}

impl CorrectorTable {
    pub fn zero() -> Self {
        CorrectorTable { entries: Vec::new(), min_symbol: f64::INFINITY }
    }

    /// Real value `sum_alpha U_alpha e^{i alpha . theta}`.
    pub fn eval(&self, theta_r: f64, theta_i: f64) -> f64 {
        self.entries
            .iter()
            .map(|((kr, ki), c)| {
                let (s, co) = (*kr as f64 * theta_r + *ki as f64 * theta_i).sin_cos();
                2.0 * (c.re * co - c.im * s)
            })
            .sum()
    }
}

/// Builds `U_alpha` for every kept double mode of `decomp`.
pub fn corrector_coefficients(decomp: &PointDecomposition, dphi_r: &[f64; 3], dphi_i: &[f64; 3], guard: f64) -> Result<CorrectorTable> {
    let mut table = CorrectorTable::zero();
    for (alpha, f) in &decomp.nc {
        if f.norm() == 0.0 {
            table.entries.push((*alpha, Complex64::new(0.0, 0.0)));
            continue;
        }
        let p = combined_symbol(*alpha, dphi_r, dphi_i);
        table.min_symbol = table.min_symbol.min(p.abs());
        if p.abs() < guard {
            return Err(Error::ResonantDivision { p: p.abs() });
        }
        table.entries.push((*alpha, -f / p));
    }
    Ok(table)
}

/// Smallest cap `M <= m_max` whose discarded noncharacteristic tail norm is
/// below `rho1`, for samples `f(theta_r, theta_i)` on an `nq x nq` grid.
pub fn cap_for_tail(f: impl Fn(f64, f64) -> f64, nq: usize, rho1: f64, m_max: usize) -> Option<(usize, f64)> {
    let full = decompose_samples(&f, nq, 1, nq / 2 - 1);
    let all = full.nc_norm_sq();
    for m in 1..=m_max.min(nq / 2 - 1) {
        let kept: f64 = 2.0
            * full
                .nc
                .iter()
                .filter(|((kr, ki), _)| *kr as usize <= m && ki.unsigned_abs() as usize <= m)
                .map(|(_, c)| c.norm_sqr())
                .sum::<f64>();
        let tail = (all - kept).max(0.0).sqrt();
        if tail < rho1 {
            return Some((m, tail));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_source_gives_zero_corrector() {
        let d = decompose_samples(|_, _| 0.0, 16, 2, 3);
        let t = corrector_coefficients(&d, &[0.6, 0.8, -1.0], &[0.0, 1.0, -1.0], 1e-8).unwrap();
        assert!(t.entries.iter().all(|(_, c)| c.norm() == 0.0));
    }

    #[test]
    fn single_mode_division() {
        // Parabola reflected covector at x2 = -0.5: (sin 2 psi, cos 2 psi) with tan psi = 1.
        let dr = [1.0, 0.0, -1.0];
        let di = [0.0, 1.0, -1.0];
        let p_direct = combined_symbol((1, 1), &dr, &di);
        let p_split = combined_symbol_split((1, 1), &dr, &di);
        assert_relative_eq!(p_direct, p_split, epsilon = 1e-14);
        assert_relative_eq!(p_direct, 2.0 * bilinear(&dr, &di), epsilon = 1e-14);
        let d = decompose_samples(|a, b| (a + b).cos(), 16, 2, 2);
        let t = corrector_coefficients(&d, &dr, &di, 1e-8).unwrap();
        let u = t.entries.iter().find(|(al, _)| *al == (1, 1)).unwrap().1;
        assert_relative_eq!(u.re, -0.5 / p_direct, epsilon = 1e-14);
    }

    #[test]
    fn resonance_is_guarded() {
        let d = decompose_samples(|a, b| (a + b).cos(), 16, 2, 2);
        let same = [0.0, 1.0, -1.0];
        assert!(matches!(corrector_coefficients(&d, &same, &same, 1e-8), Err(Error::ResonantDivision { .. })));
    }

    #[test]
    fn tail_cap() {
        let f = |a: f64, b: f64| 0.3 * (a.cos() * b.sin()).sin();
        let (m, tail) = cap_for_tail(f, 32, 1e-3, 10).unwrap();
        assert!(tail < 1e-3);
        assert!(m >= 2);
    }
}

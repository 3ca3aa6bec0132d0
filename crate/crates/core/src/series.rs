//! Truncated univariate power series.
//!
//! A [`Series`] holds Taylor coefficients `c[0..=d]` of a function of one
//! variable `s` at `s = 0`. Arithmetic is exact up to the truncation
//! degree, which makes it the tool of choice for extracting high-order
//! derivatives of `beta` along a line (`H_p^j beta = j! c_j`).

use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub c: Vec<f64>,
}

impl Series {
    pub fn zero(degree: usize) -> Self {
        Series {
            c: vec![0.0; degree + 1],
        }
    }

    pub fn constant(value: f64, degree: usize) -> Self {
        let mut s = Self::zero(degree);
        s.c[0] = value;
        s
    }

    /// The series of `a + b s`.
    pub fn affine(a: f64, b: f64, degree: usize) -> Self {
        let mut s = Self::constant(a, degree);
        if degree >= 1 {
            s.c[1] = b;
        }
        s
    }

    pub fn degree(&self) -> usize {
        self.c.len() - 1
    }

    /// The `j`-th derivative at zero, `j! c_j`.
    pub fn derivative_at_zero(&self, j: usize) -> f64 {
        let fact: f64 = (1..=j).map(|k| k as f64).product();
        self.c[j] * fact
    }

    pub fn scale(&self, k: f64) -> Self {
        Series {
            c: self.c.iter().map(|v| v * k).collect(),
        }
    }

    pub fn add_scalar(&self, k: f64) -> Self {
        let mut out = self.clone();
        out.c[0] += k;
        out
    }

    pub fn div(&self, other: &Series) -> Result<Series> {
        let b0 = other.c[0];
        if b0 == 0.0 || !b0.is_finite() {
            return Err(Error::NonFinite {
                what: "series division by a series vanishing at 0".into(),
            });
        }
        let d = self.degree();
        let mut q = vec![0.0; d + 1];
        for k in 0..=d {
            let mut acc = self.c[k];
            for j in 1..=k {
                acc -= other.c[j] * q[k - j];
            }
            q[k] = acc / b0;
        }
        Ok(Series { c: q })
    }

    pub fn exp(&self) -> Series {
        let d = self.degree();
        let mut e = vec![0.0; d + 1];
        e[0] = self.c[0].exp();
        for k in 1..=d {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += j as f64 * self.c[j] * e[k - j];
            }
            e[k] = acc / k as f64;
        }
        Series { c: e }
    }

    pub fn ln(&self) -> Result<Series> {
        let a0 = self.c[0];
        if a0 <= 0.0 {
            return Err(Error::NonFinite {
                what: "logarithm of a series with non-positive constant term".into(),
            });
        }
        let d = self.degree();
        let mut l = vec![0.0; d + 1];
        l[0] = a0.ln();
        for k in 1..=d {
            let mut acc = 0.0;
            for j in 1..k {
                acc += j as f64 * l[j] * self.c[k - j];
            }
            l[k] = (self.c[k] - acc / k as f64) / a0;
        }
        Ok(Series { c: l })
    }

    pub fn powi(&self, n: i32) -> Result<Series> {
        if n < 0 {
            let p = self.powi(-n)?;
            return Series::constant(1.0, self.degree()).div(&p);
        }
        let mut result = Series::constant(1.0, self.degree());
        let mut base = self.clone();
        let mut e = n as u32;
        while e > 0 {
            if e & 1 == 1 {
                result = &result * &base;
            }
            base = &base * &base;
            e >>= 1;
        }
        Ok(result)
    }

    pub fn powf(&self, p: f64) -> Result<Series> {
        if p.fract() == 0.0 && p.abs() < 64.0 {
            return self.powi(p as i32);
        }
        Ok(self.ln()?.scale(p).exp())
    }

    /// Evaluates a polynomial `sum_k a_k X^k` at `X = self` by Horner's rule.
    pub fn compose_poly(&self, coeffs: &[f64]) -> Series {
        let d = self.degree();
        let mut acc = Series::zero(d);
        for &a in coeffs.iter().rev() {
            acc = (&acc * self).add_scalar(a);
        }
        acc
    }
}

impl Add for &Series {
    type Output = Series;
    fn add(self, rhs: &Series) -> Series {
        Series {
            c: self.c.iter().zip(&rhs.c).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &Series {
    type Output = Series;
    fn sub(self, rhs: &Series) -> Series {
        Series {
            c: self.c.iter().zip(&rhs.c).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Neg for &Series {
    type Output = Series;
    fn neg(self) -> Series {
        self.scale(-1.0)
    }
}

impl Mul for &Series {
    type Output = Series;
    fn mul(self, rhs: &Series) -> Series {
        let d = self.degree().min(rhs.degree());
        let mut c = vec![0.0; d + 1];
        for (i, a) in self.c.iter().enumerate().take(d + 1) {
            if *a == 0.0 {
                continue;
            }
            for j in 0..=(d - i) {
                c[i + j] += a * rhs.c[j];
            }
        }
        Series { c }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exp_of_linear_matches_factorials() {
        let s = Series::affine(0.0, 1.0, 8).exp();
        for k in 0..=8 {
            assert_relative_eq!(s.derivative_at_zero(k), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn division_inverts_multiplication() {
        let a = Series { c: vec![2.0, -1.0, 0.5, 3.0] };
        let b = Series { c: vec![1.5, 0.25, -2.0, 1.0] };
        let q = (&a * &b).div(&b).unwrap();
        for (x, y) in q.c.iter().zip(&a.c) {
            assert_relative_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn ln_and_exp_round_trip() {
        let a = Series { c: vec![2.0, 0.3, -0.1, 0.05, 0.0] };
        let r = a.ln().unwrap().exp();
        for (x, y) in r.c.iter().zip(&a.c) {
            assert_relative_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn powi_of_binomial() {
        let p = Series::affine(1.0, 1.0, 4).powi(4).unwrap();
        assert_eq!(p.c, vec![1.0, 4.0, 6.0, 4.0, 1.0]);
    }
}

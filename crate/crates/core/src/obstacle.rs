//! Convex obstacles given as graphs `x1 = F(xbar)` near the base point `(1, 0)`.
//!
//! The obstacle is `{x1 < F(xbar)}`; the exterior domain is `x1 >= F(xbar)`.
//! Every family is normalized so that `F(0) = 1` and `grad F(0) = 0`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::series::Series;

/// The three quartic/sextic examples in three dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuarticVariant {
    /// `1 - (x2^4 + x2^2 x3^2 + x3^4)`
    F3,
    /// `1 - (x2^4 + x2^2 x3^2 + x3^4 - x2 x3^3)`
    F4,
    /// `1 - (x2^6 + x2^2 x3^4 + x2^4 x3^2 + x3^6)`
    F5,
}

impl QuarticVariant {
    pub fn leading_expression(self) -> &'static str {
        match self {
            QuarticVariant::F3 => "1 - (x2^4 + x2^2*x3^2 + x3^4)",
            QuarticVariant::F4 => "1 - (x2^4 + x2^2*x3^2 + x3^4 - x2*x3^3)",
            QuarticVariant::F5 => "1 - (x2^6 + x2^2*x3^4 + x2^4*x3^2 + x3^6)",
        }
    }
}

/// Obstacle family.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    /// Two-dimensional `F = 1 - sum_i coeffs[i] x2^(i+2)`; higher
    /// coefficients play the role of the remainder term.
    Poly2D { coeffs: Vec<f64> },
    /// `F = 1 - |xbar|^(2k)`.
    IsoPower { k: u32 },
    /// `F = 1 - exp(-|xbar|^-2)`, flat at the origin.
    ExpFlat,
    /// One of `F3, F4, F5` with an optional remainder added to `F`.
    Quartic3D {
        variant: QuarticVariant,
        remainder: Option<Expr>,
    },
    /// `F = 1 - h(<Lambda xbar, xbar>)`, `h(q) = sum_j h[j] q^j`, `h[0] = 0`.
    Radial { h: Vec<f64>, lambda: DMatrix<f64> },
    /// `F` given by an arithmetic expression in `x2 .. xn`.
    Custom { expr: Expr },
}

/// Obstacle boundary `x1 = F(xbar)` on the ball `|xbar| < r` of `R^(n-1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphObstacle {
    pub family: Family,
    /// Validity radius of the tangential domain.
    pub r: f64,
    /// Ambient space dimension `n >= 2`.
    pub dim: usize,
    expr: Option<Expr>,
}

/// Value, gradient and Hessian of `F`.
#[derive(Debug, Clone)]
pub struct FEval {
    pub f: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy)]
enum RadialKind<'a> {
    Series(&'a [f64]),
    Power(u32),
    Flat,
}

fn radial_h(kind: RadialKind, q: f64) -> (f64, f64, f64) {
    match kind {
        RadialKind::Series(h) => {
            let mut v = 0.0;
            let mut d1 = 0.0;
            let mut d2 = 0.0;
            for (j, c) in h.iter().enumerate().rev() {
                let jf = j as f64;
                v = v * q + c;
                if j >= 1 {
                    d1 += jf * c * q.powi(j as i32 - 1);
                }
                if j >= 2 {
                    d2 += jf * (jf - 1.0) * c * q.powi(j as i32 - 2);
                }
            }
            (v, d1, d2)
        }
        RadialKind::Power(k) => {
            let kf = k as f64;
            let v = q.powi(k as i32);
            let d1 = kf * q.powi(k as i32 - 1);
            let d2 = if k >= 2 {
                kf * (kf - 1.0) * q.powi(k as i32 - 2)
            } else {
                0.0
            };
            (v, d1, d2)
        }
        RadialKind::Flat => {
            if q <= 0.0 {
                (0.0, 0.0, 0.0)
            } else {
                let e = (-1.0 / q).exp();
                let q2 = q * q;
                (e, e / q2, e * (1.0 / (q2 * q2) - 2.0 / (q2 * q)))
            }
        }
    }
}

impl GraphObstacle {
    /// Builds an obstacle and checks the normalization `F(0) = 1`, `grad F(0) = 0`.
    pub fn new(family: Family, dim: usize, r: f64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::WrongDimension { expected: 2, got: dim });
        }
        if !(r > 0.0) {
            return Err(Error::Unsupported("validity radius must be positive".into()));
        }
        let m = dim - 1;
        let expr = match &family {
            Family::Poly2D { .. } if dim != 2 => {
                return Err(Error::WrongDimension { expected: 2, got: dim })
            }
            Family::Quartic3D { variant, remainder } => {
                if dim != 3 {
                    return Err(Error::WrongDimension { expected: 3, got: dim });
                }
                let lead = Expr::parse(variant.leading_expression())?;
                Some(match remainder {
                    Some(rem) => Expr::Add(Box::new(lead), Box::new(rem.clone())),
                    None => lead,
                })
            }
            Family::Radial { h, lambda } => {
                if lambda.nrows() != m || lambda.ncols() != m {
                    return Err(Error::WrongDimension { expected: m, got: lambda.nrows() });
                }
                if h.first().copied().unwrap_or(0.0) != 0.0 {
                    return Err(Error::Unsupported("radial profile needs h(0) = 0".into()));
                }
                if (lambda - lambda.transpose()).amax() > 1e-14 {
                    return Err(Error::Unsupported("Lambda must be symmetric".into()));
                }
                None
            }
            Family::Custom { expr } => {
                if expr.arity() > m {
                    return Err(Error::WrongDimension { expected: m, got: expr.arity() });
                }
                Some(expr.clone())
            }
            _ => None,
        };
        let ob = GraphObstacle { family, r, dim, expr };
        let e0 = ob.eval(&DVector::zeros(m))?;
        if (e0.f - 1.0).abs() > 1e-12 || e0.grad.amax() > 1e-12 {
            return Err(Error::Unsupported(format!(
                "obstacle is not normalized: F(0) = {}, |grad F(0)| = {}",
                e0.f,
                e0.grad.amax()
            )));
        }
        Ok(ob)
    }

    /// Number of tangential coordinates, `n - 1`.
    pub fn m(&self) -> usize {
        self.dim - 1
    }

    /// The arithmetic expression backing `Quartic3D` and `Custom` families.
    pub fn expression(&self) -> Option<&Expr> {
        self.expr.as_ref()
    }

    fn radial_parts(&self) -> Option<(RadialKind<'_>, Option<&DMatrix<f64>>)> {
        match &self.family {
            Family::IsoPower { k } => Some((RadialKind::Power(*k), None)),
            Family::ExpFlat => Some((RadialKind::Flat, None)),
            Family::Radial { h, lambda } => Some((RadialKind::Series(h), Some(lambda))),
            _ => None,
        }
    }

    /// `F`, `grad F` and `hess F` at `xbar`.
    pub fn eval(&self, x: &DVector<f64>) -> Result<FEval> {
        let m = self.m();
        if x.len() != m {
            return Err(Error::WrongDimension { expected: m, got: x.len() });
        }
        let norm = x.norm();
        if norm >= self.r {
            return Err(Error::OutOfDomain { norm, radius: self.r });
        }
        let out = match &self.family {
            Family::Poly2D { coeffs } => {
                let t = x[0];
                let (mut f, mut f1, mut f2) = (1.0, 0.0, 0.0);
                for (i, c) in coeffs.iter().enumerate() {
                    let p = (i + 2) as i32;
                    let pf = p as f64;
                    f -= c * t.powi(p);
                    f1 -= c * pf * t.powi(p - 1);
                    f2 -= c * pf * (pf - 1.0) * t.powi(p - 2);
                }
                FEval {
                    f,
                    grad: DVector::from_element(1, f1),
                    hess: DMatrix::from_element(1, 1, f2),
                }
            }
            Family::Quartic3D { .. } | Family::Custom { .. } => {
                let j = self.expr.as_ref().unwrap().jet(x.as_slice())?;
                let hess = DMatrix::from_row_slice(m, m, &j.h);
                FEval {
                    f: j.v,
                    grad: DVector::from_vec(j.g),
                    hess: (&hess + hess.transpose()) * 0.5,
                }
            }
            _ => {
                let (kind, lambda) = self.radial_parts().unwrap();
                let lx = match lambda {
                    Some(l) => l * x,
                    None => x.clone(),
                };
                let q = lx.dot(x);
                let (h0, h1, h2) = radial_h(kind, q);
                let lam = match lambda {
                    Some(l) => l.clone(),
                    None => DMatrix::identity(m, m),
                };
                FEval {
                    f: 1.0 - h0,
                    grad: &lx * (-2.0 * h1),
                    hess: lam * (-2.0 * h1) - (&lx * lx.transpose()) * (4.0 * h2),
                }
            }
        };
        if !out.f.is_finite() || out.grad.iter().chain(out.hess.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "obstacle evaluation".into() });
        }
        Ok(out)
    }

    pub fn value(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(self.eval(x)?.f)
    }

    /// Taylor series in `s` of `F(x0 + s d)` up to `degree`.
    pub fn series_along(&self, x0: &DVector<f64>, d: &DVector<f64>, degree: usize) -> Result<Series> {
        match &self.family {
            Family::Poly2D { coeffs } => {
                let mut poly = vec![1.0, 0.0];
                poly.extend(coeffs.iter().map(|c| -c));
                Ok(Series::affine(x0[0], d[0], degree).compose_poly(&poly))
            }
            Family::Quartic3D { .. } | Family::Custom { .. } => {
                self.expr.as_ref().unwrap().series_along(x0.as_slice(), d.as_slice(), degree)
            }
            _ => {
                let (kind, lambda) = self.radial_parts().unwrap();
                let (lx0, ld) = match lambda {
                    Some(l) => (l * x0, l * d),
                    None => (x0.clone(), d.clone()),
                };
                let mut q = Series::zero(degree);
                q.c[0] = lx0.dot(x0);
                if degree >= 1 {
                    q.c[1] = 2.0 * lx0.dot(d);
                }
                if degree >= 2 {
                    q.c[2] = ld.dot(d);
                }
                let h = match kind {
                    RadialKind::Series(h) => q.compose_poly(h),
                    RadialKind::Power(k) => q.powi(k as i32)?,
                    RadialKind::Flat => {
                        if q.c[0] <= 0.0 {
                            // exp(-1/q) is flat wherever the non-negative q vanishes.
                            Series::zero(degree)
                        } else {
                            Series::constant(-1.0, degree).div(&q)?.exp()
                        }
                    }
                };
                Ok((-&h).add_scalar(1.0))
            }
        }
    }

    /// Whether the family is of the radial type `1 - h(<Lambda x, x>)`.
    pub fn radial_matrix(&self) -> Option<DMatrix<f64>> {
        match &self.family {
            Family::IsoPower { .. } | Family::ExpFlat => Some(DMatrix::identity(self.m(), self.m())),
            Family::Radial { lambda, .. } => Some(lambda.clone()),
            _ => None,
        }
    }
}

/// Outcome of [`validate_strict_convexity`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub pass: bool,
    pub samples: usize,
    pub seed: u64,
    /// Largest value of `F(x*) - F(x) - <grad F(x), x* - x>` found.
    pub worst_gap: f64,
    pub worst_pair: (Vec<f64>, Vec<f64>),
    /// Whether every sampled Hessian off the origin was negative definite.
    pub hessian_definite: bool,
    pub max_hessian_eigenvalue: f64,
}

/// Uniform sample in the open ball of radius `r` in `R^m` by rejection.
pub fn sample_ball(rng: &mut impl Rng, m: usize, r: f64) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n < 1.0 && n > 0.0 {
            return v * r;
        }
    }
}

fn grid_points(m: usize, r: f64, per_axis: usize) -> Vec<DVector<f64>> {
    let mut pts = Vec::new();
    let total = per_axis.pow(m as u32);
    for idx in 0..total {
        let mut rem = idx;
        let v = DVector::from_fn(m, |_, _| {
            let i = rem % per_axis;
            rem /= per_axis;
            -r + 2.0 * r * (i as f64 + 0.5) / per_axis as f64
        });
        if v.norm() < r && v.norm() > 0.0 {
            pts.push(v);
        }
    }
    pts
}

/// Samples the supporting-hyperplane inequality on random pairs and a grid.
///
/// Points are drawn from the ball of radius `0.95 r`. A pair violates
/// strict convexity when the gap exceeds `1e-13` times the local scale.
pub fn validate_strict_convexity(ob: &GraphObstacle, samples: usize, seed: u64) -> Result<ConvexityReport> {
    let m = ob.m();
    let rr = 0.95 * ob.r;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts: Vec<DVector<f64>> = (0..samples.max(2)).map(|_| sample_ball(&mut rng, m, rr)).collect();
    let per_axis = match m {
        1 => 41,
        2 => 15,
        3 => 7,
        _ => 4,
    };
    let grid = grid_points(m, rr, per_axis);
    // Axis points detect semidefinite Hessians that random samples miss.
    let mut axis = Vec::new();
    for i in 0..m {
        for k in 1..=6 {
            let mut v = DVector::zeros(m);
            v[i] = rr * k as f64 / 7.0;
            axis.push(v.clone());
            axis.push(-v);
        }
    }
    pts.extend(grid.iter().cloned());
    pts.extend(axis.iter().cloned());

    let evals: Vec<FEval> = pts.iter().map(|p| ob.eval(p)).collect::<Result<_>>()?;
    let mut worst_gap = f64::NEG_INFINITY;
    let mut worst_pair = (vec![], vec![]);
    let n = pts.len();
    let mut check = |i: usize, j: usize| {
        if i == j {
            return;
        }
        let d = &pts[j] - &pts[i];
        if d.norm() == 0.0 {
            return;
        }
        let gap = evals[j].f - evals[i].f - evals[i].grad.dot(&d);
        if gap > worst_gap {
            worst_gap = gap;
            worst_pair = (pts[i].as_slice().to_vec(), pts[j].as_slice().to_vec());
        }
    };
    for i in 0..n {
        check(i, (i + 1) % n);
        check(i, (i * 7 + 3) % n);
        check(i, (i * 13 + 5) % n);
    }
    for i in 0..pts.len().min(400) {
        for j in 0..pts.len().min(400) {
            check(i, j);
        }
    }
    // Nearby pairs probe local concavity.
    for (i, p) in pts.iter().enumerate().take(samples.max(2)) {
        let dir = sample_ball(&mut rng, m, 1.0);
        let q = p + dir * (0.02 * ob.r);
        if q.norm() < rr {
            let eq = ob.eval(&q)?;
            let gap = eq.f - evals[i].f - evals[i].grad.dot(&(&q - p));
            if gap > worst_gap {
                worst_gap = gap;
                worst_pair = (p.as_slice().to_vec(), q.as_slice().to_vec());
            }
        }
    }
    let mut max_eig = f64::NEG_INFINITY;
    for e in &evals {
        let eig = e.hess.clone().symmetric_eigen();
        max_eig = max_eig.max(eig.eigenvalues.max());
    }
    Ok(ConvexityReport {
        pass: worst_gap <= 1e-13,
        samples,
        seed,
        worst_gap,
        worst_pair,
        hessian_definite: max_eig < 0.0,
        max_hessian_eigenvalue: max_eig,
    })
}

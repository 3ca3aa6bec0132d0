//! Incoming plane phase, reflected covector, the closed-form reflected flow
//! map `Z_r` and its Jacobian determinant by four independent routes.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::obstacle::{FEval, GraphObstacle};

/// The incoming phase `-t + <theta, xbar>`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanePhase {
    pub theta: DVector<f64>,
}

impl PlanePhase {
    pub fn new(theta: &DVector<f64>) -> Self {
        PlanePhase { theta: theta.normalize() }
    }

    /// Value at the spacetime point `(x, t)`, `x = (x1, xbar)`.
    pub fn value(&self, x: &DVector<f64>, t: f64) -> f64 {
        -t + self.theta.dot(&x.rows(1, x.len() - 1))
    }

    /// Spatial covector `(0, theta)`; the time component is `-1`.
    pub fn covector(&self) -> DVector<f64> {
        let m = self.theta.len();
        let mut xi = DVector::zeros(m + 1);
        xi.rows_mut(1, m).copy_from(&self.theta);
        xi
    }
}

/// Lorentz pairing `<xi, xi'> - tau tau'` of two covectors, so that `p(a) = pair(a, a)`.
pub fn lorentz_pair(xi: &DVector<f64>, tau: f64, xi2: &DVector<f64>, tau2: f64) -> f64 {
    xi.dot(xi2) - tau * tau2
}

/// Reflected covector `(xi1, xibar, -1)` over a boundary point.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectedCovector {
    pub xi1: f64,
    pub xibar: DVector<f64>,
    pub tau: f64,
}

impl ReflectedCovector {
    /// The spatial covector `(xi1, xibar)`.
    pub fn spatial(&self) -> DVector<f64> {
        let m = self.xibar.len();
        let mut v = DVector::zeros(m + 1);
        v[0] = self.xi1;
        v.rows_mut(1, m).copy_from(&self.xibar);
        v
    }
}

fn covector_from(e: &FEval, theta: &DVector<f64>) -> Result<ReflectedCovector> {
    let a = theta.dot(&e.grad);
    if a < -1e-13 {
        return Err(Error::ShadowSide { g: a });
    }
    let a = a.max(0.0);
    let d = 1.0 + e.grad.norm_squared();
    let xi1 = 2.0 * a / d;
    Ok(ReflectedCovector {
        xi1,
        xibar: theta - &e.grad * xi1,
        tau: -1.0,
    })
}

/// `xi1 = 2 <theta, grad F> / (1 + |grad F|^2)`, `xibar = theta - xi1 grad F`, `tau = -1`.
pub fn reflected_covector(ob: &GraphObstacle, theta: &DVector<f64>, x: &DVector<f64>) -> Result<ReflectedCovector> {
    covector_from(&ob.eval(x)?, &theta.normalize())
}

/// Residuals of the law of reflection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EqualAngleReport {
    /// `|(0, -theta) . n - xi_r . n|` with `n = (1, -grad F)`.
    pub angle: f64,
    /// Distance of `xi_r - (0, theta)` from the normal line.
    pub coplanarity: f64,
    /// `| |xi_r| - 1 |`.
    pub norm_defect: f64,
}

pub fn equal_angle_check(ob: &GraphObstacle, theta: &DVector<f64>, x: &DVector<f64>) -> Result<EqualAngleReport> {
    let theta = theta.normalize();
    let e = ob.eval(x)?;
    let r = covector_from(&e, &theta)?;
    let m = theta.len();
    let mut n = DVector::zeros(m + 1);
    n[0] = 1.0;
    n.rows_mut(1, m).copy_from(&(-&e.grad));
    let mut inc = DVector::zeros(m + 1);
    inc.rows_mut(1, m).copy_from(&theta);
    let xr = r.spatial();
    let angle = ((-&inc).dot(&n) - xr.dot(&n)).abs();
    let diff = &xr - &inc;
    let along = diff.dot(&n) / n.norm_squared();
    let coplanarity = (&diff - &n * along).norm();
    Ok(EqualAngleReport {
        angle,
        coplanarity,
        norm_defect: (xr.norm() - 1.0).abs(),
    })
}

/// First derivatives of the reflected covector in the boundary parameters.
#[derive(Debug, Clone)]
pub struct CovectorJet {
    pub eval: FEval,
    pub cov: ReflectedCovector,
    /// `a = <theta, grad F>`.
    pub a: f64,
    /// Gradient of `xi1`.
    pub dxi1: DVector<f64>,
    /// `dxibar[(i, k)] = d xibar_i / d x_k`.
    pub dxibar: DMatrix<f64>,
}

/// Reflected flow for an obstacle and a plane wave, evaluated in closed form.
#[derive(Debug, Clone)]
pub struct ReflectedFlow {
    pub ob: GraphObstacle,
    pub phase: PlanePhase,
}

impl ReflectedFlow {
    pub fn new(ob: GraphObstacle, theta: &DVector<f64>) -> Result<Self> {
        if theta.len() != ob.m() {
            return Err(Error::WrongDimension { expected: ob.m(), got: theta.len() });
        }
        Ok(ReflectedFlow { ob, phase: PlanePhase::new(theta) })
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.phase.theta
    }

    pub fn m(&self) -> usize {
        self.ob.m()
    }

    pub fn covector(&self, x: &DVector<f64>) -> Result<ReflectedCovector> {
        covector_from(&self.ob.eval(x)?, self.theta())
    }

    pub fn covector_jet(&self, x: &DVector<f64>) -> Result<CovectorJet> {
        let e = self.ob.eval(x)?;
        let th = self.theta();
        let cov = covector_from(&e, th)?;
        let a = th.dot(&e.grad).max(0.0);
        let d = 1.0 + e.grad.norm_squared();
        let h_theta = &e.hess * th;
        let h_grad = &e.hess * &e.grad;
        let dxi1 = &h_theta * (2.0 / d) - &h_grad * (4.0 * a / (d * d));
        let m = self.m();
        let dxibar = DMatrix::from_fn(m, m, |i, k| -e.grad[i] * dxi1[k] - cov.xi1 * e.hess[(i, k)]);
        Ok(CovectorJet { eval: e, cov, a, dxi1, dxibar })
    }

    fn check_params(&self, s: f64, x: &DVector<f64>) -> Result<()> {
        if !(s >= 0.0) || !s.is_finite() {
            return Err(Error::OutOfChart(format!("ray parameter s = {s}")));
        }
        if x.len() != self.m() {
            return Err(Error::WrongDimension { expected: self.m(), got: x.len() });
        }
        if x.norm() >= self.ob.r {
            return Err(Error::OutOfChart(format!("|xbar| = {} >= r = {}", x.norm(), self.ob.r)));
        }
        Ok(())
    }

    /// Spatial image `(F + 2 s xi1, xbar + 2 s xibar)`; the time is `t' + 2s`.
    pub fn spatial_forward(&self, s: f64, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_params(s, x)?;
        let e = self.ob.eval(x)?;
        let r = covector_from(&e, self.theta())?;
        let m = self.m();
        let mut out = DVector::zeros(m + 1);
        out[0] = e.f + 2.0 * s * r.xi1;
        out.rows_mut(1, m).copy_from(&(x + &r.xibar * (2.0 * s)));
        Ok(out)
    }

    /// `Z_r(s, xbar, t') = (F + 2 s xi1, xbar + 2 s xibar, t' + 2 s)`.
    pub fn zr_forward(&self, s: f64, x: &DVector<f64>, tp: f64) -> Result<(DVector<f64>, f64)> {
        Ok((self.spatial_forward(s, x)?, tp + 2.0 * s))
    }

    /// Spatial Jacobian matrix of `(s, xbar) -> x` with columns `(d/ds, d/dx_k)`.
    pub fn spatial_jacobian(&self, s: f64, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_params(s, x)?;
        let jet = self.covector_jet(x)?;
        Ok(self.spatial_jacobian_from(s, &jet))
    }

    fn spatial_jacobian_from(&self, s: f64, jet: &CovectorJet) -> DMatrix<f64> {
        let m = self.m();
        let mut j = DMatrix::zeros(m + 1, m + 1);
        j[(0, 0)] = 2.0 * jet.cov.xi1;
        for i in 0..m {
            j[(i + 1, 0)] = 2.0 * jet.cov.xibar[i];
        }
        for k in 0..m {
            j[(0, k + 1)] = jet.eval.grad[k] + 2.0 * s * jet.dxi1[k];
            for i in 0..m {
                let id = if i == k { 1.0 } else { 0.0 };
                j[(i + 1, k + 1)] = id + 2.0 * s * jet.dxibar[(i, k)];
            }
        }
        j
    }

    /// Determinant of the full Jacobian of `Z_r` by direct expansion of the analytic matrix.
    pub fn jacobian_direct(&self, s: f64, x: &DVector<f64>) -> Result<f64> {
        Ok(self.spatial_jacobian(s, x)?.determinant())
    }

    /// `j = 2 xi1 det(B - 2 s C hess F)` with `B = I - xibar grad F^T / xi1`
    /// and `C = xi1 I + theta xibar^T / a`; falls back to the direct
    /// determinant where `a` is too small for the factored form.
    pub fn jacobian_analytic(&self, s: f64, x: &DVector<f64>) -> Result<f64> {
        self.check_params(s, x)?;
        let jet = self.covector_jet(x)?;
        if jet.a < 1e-8 {
            return Ok(self.spatial_jacobian_from(s, &jet).determinant());
        }
        let (b, c) = bc_matrices(&jet.eval.grad, self.theta(), &jet.cov, jet.a);
        let a_mat = &b - (&c * &jet.eval.hess) * (2.0 * s);
        Ok(2.0 * jet.cov.xi1 * a_mat.determinant())
    }

    /// Two-dimensional closed form `2 theta F' - 8 s F'' / (1 + F'^2)`.
    pub fn jacobian_2d_closed(&self, s: f64, x2: f64) -> Result<f64> {
        if self.m() != 1 {
            return Err(Error::WrongDimension { expected: 2, got: self.ob.dim });
        }
        let e = self.ob.eval(&DVector::from_element(1, x2))?;
        let (fp, fpp) = (e.grad[0], e.hess[(0, 0)]);
        Ok(2.0 * self.theta()[0] * fp - 8.0 * s * fpp / (1.0 + fp * fp))
    }

    /// Central finite-difference determinant of the full `(n+1) x (n+1)` Jacobian of `Z_r`.
    pub fn jacobian_fd(&self, s: f64, x: &DVector<f64>, h: f64) -> Result<f64> {
        let m = self.m();
        let n = m + 2;
        let eval = |p: &DVector<f64>| -> Result<DVector<f64>> {
            let (sp, t) = self.zr_forward(p[0], &p.rows(1, m).into_owned(), p[m + 1])?;
            let mut v = DVector::zeros(n);
            v.rows_mut(0, m + 1).copy_from(&sp);
            v[m + 1] = t;
            Ok(v)
        };
        let mut p = DVector::zeros(n);
        p[0] = s;
        p.rows_mut(1, m).copy_from(x);
        let mut jac = DMatrix::zeros(n, n);
        for k in 0..n {
            let (mut pp, mut pm) = (p.clone(), p.clone());
            pp[k] += h;
            pm[k] -= h;
            let mut denom = 2.0 * h;
            if k == 0 && s < h {
                pm[0] = s;
                denom = h;
            }
            let col = (eval(&pp)? - eval(&pm)?) / denom;
            jac.set_column(k, &col);
        }
        Ok(jac.determinant())
    }

    /// Reflected phase and covector at `Z_r(s, xbar, t')`: `phi_r = -t' + <theta, xbar>`.
    pub fn phase_at(&self, x: &DVector<f64>, tp: f64) -> Result<(f64, ReflectedCovector)> {
        Ok((-tp + self.theta().dot(x), self.covector(x)?))
    }

    /// `box phi_r` at `Z_r(s, xbar, .)`: trace of `d xi_r / d x` obtained from
    /// the analytic covector jet and the inverse spatial Jacobian.
    pub fn box_phi_r(&self, s: f64, x: &DVector<f64>) -> Result<f64> {
        self.check_params(s, x)?;
        let jet = self.covector_jet(x)?;
        let js = self.spatial_jacobian_from(s, &jet);
        let det = js.determinant();
        if det.abs() < 1e-14 {
            return Err(Error::NearShadowBoundary { j: det });
        }
        let inv = js.try_inverse().ok_or(Error::NearShadowBoundary { j: det })?;
        let m = self.m();
        let mut dxi = DMatrix::zeros(m + 1, m + 1);
        for k in 0..m {
            dxi[(0, k + 1)] = jet.dxi1[k];
            for i in 0..m {
                dxi[(i + 1, k + 1)] = jet.dxibar[(i, k)];
            }
        }
        Ok((dxi * inv).trace())
    }

    /// `d/ds log j` at fixed boundary parameters, in closed form from the
    /// spatial Jacobian: `tr(J^{-1} dJ/ds)`.
    pub fn dlogj_ds(&self, s: f64, x: &DVector<f64>) -> Result<f64> {
        self.check_params(s, x)?;
        let jet = self.covector_jet(x)?;
        let js = self.spatial_jacobian_from(s, &jet);
        let inv = js
            .clone()
            .try_inverse()
            .ok_or(Error::NearShadowBoundary { j: js.determinant() })?;
        let m = self.m();
        let mut dj = DMatrix::zeros(m + 1, m + 1);
        for k in 0..m {
            dj[(0, k + 1)] = 2.0 * jet.dxi1[k];
            for i in 0..m {
                dj[(i + 1, k + 1)] = 2.0 * jet.dxibar[(i, k)];
            }
        }
        Ok((inv * dj).trace())
    }
}

/// The matrices `B` and `C` of the factored Jacobian.
pub fn bc_matrices(grad: &DVector<f64>, theta: &DVector<f64>, cov: &ReflectedCovector, a: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let m = grad.len();
    let b = DMatrix::identity(m, m) - (&cov.xibar * grad.transpose()) / cov.xi1;
    let c = DMatrix::identity(m, m) * cov.xi1 + (theta * cov.xibar.transpose()) / a;
    (b, c)
}

/// Numerical check of `det B = (1 + |grad F|^2)/2` and
/// `C B^T = (xi1^2 I + xibar xibar^T) / xi1`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixLemmaReport {
    pub xi1: f64,
    pub det_b: f64,
    pub det_b_expected: f64,
    /// `|xibar| |grad F| / xi1`, the size of the rank-one part of `B` that
    /// cancels in its determinant.
    pub rank_one_scale: f64,
    /// Largest entry of `C B^T - (xi1^2 I + xibar xibar^T)/xi1`.
    pub cbt_defect: f64,
    pub cbt_asymmetry: f64,
    pub cbt_min_eigenvalue: f64,
}

impl MatrixLemmaReport {
    pub fn passes(&self, tol: f64) -> bool {
        let scale = 1.0 + self.det_b_expected.abs() + self.rank_one_scale;
        (self.det_b - self.det_b_expected).abs() <= tol * scale
            && self.cbt_defect <= tol * (1.0 + 1.0 / self.xi1)
            && self.cbt_asymmetry <= tol * (1.0 + 1.0 / self.xi1)
            && self.cbt_min_eigenvalue >= self.xi1 - tol * (1.0 + 1.0 / self.xi1)
    }
}

/// Checks both matrix identities for a given gradient and direction.
pub fn matrix_lemmas_from_gradient(grad: &DVector<f64>, theta: &DVector<f64>) -> Result<MatrixLemmaReport> {
    let theta = theta.normalize();
    let a = theta.dot(grad);
    let d = 1.0 + grad.norm_squared();
    let xi1 = 2.0 * a / d;
    if xi1 <= 1e-12 {
        return Err(Error::GrazingDegenerate { xi1 });
    }
    let cov = ReflectedCovector { xi1, xibar: &theta - grad * xi1, tau: -1.0 };
    let (b, c) = bc_matrices(grad, &theta, &cov, a);
    let cbt = &c * b.transpose();
    let m = grad.len();
    let expected = (DMatrix::identity(m, m) * (xi1 * xi1) + &cov.xibar * cov.xibar.transpose()) / xi1;
    let cbt_defect = (&cbt - &expected).amax();
    let cbt_asymmetry = (&cbt - cbt.transpose()).amax();
    let sym = (&cbt + cbt.transpose()) * 0.5;
    let cbt_min_eigenvalue = sym.symmetric_eigen().eigenvalues.min();
    Ok(MatrixLemmaReport {
        xi1,
        det_b: b.determinant(),
        det_b_expected: d / 2.0,
        rank_one_scale: cov.xibar.norm() * grad.norm() / xi1,
        cbt_defect,
        cbt_asymmetry,
        cbt_min_eigenvalue,
    })
}

pub fn matrix_lemma_checks(ob: &GraphObstacle, theta: &DVector<f64>, x: &DVector<f64>) -> Result<MatrixLemmaReport> {
    matrix_lemmas_from_gradient(&ob.eval(x)?.grad, theta)
}

/// `|det(I + a b^T) - (1 + <a, b>)|`.
pub fn rank_one_det_defect(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let m = a.len();
    let mat = DMatrix::identity(m, m) + a * b.transpose();
    (mat.determinant() - (1.0 + a.dot(b))).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::obstacle::Family;
    use approx::assert_relative_eq;

    fn parabola_flow() -> ReflectedFlow {
        let ob = GraphObstacle::new(Family::Poly2D { coeffs: vec![1.0] }, 2, 3.0).unwrap();
        ReflectedFlow::new(ob, &DVector::from_element(1, 1.0)).unwrap()
    }

    #[test]
    fn covector_examples() {
        let fl = parabola_flow();
        let r = fl.covector(&DVector::from_element(1, -0.5)).unwrap();
        assert_relative_eq!(r.xi1, 1.0, epsilon = 1e-15);
        assert_relative_eq!(r.xibar[0], 0.0, epsilon = 1e-15);
        let g = fl.covector(&DVector::zeros(1)).unwrap();
        assert_eq!(g.xi1, 0.0);
        assert_eq!(g.xibar[0], 1.0);
        assert!(matches!(fl.covector(&DVector::from_element(1, 0.5)), Err(Error::ShadowSide { .. })));
    }

    #[test]
    fn forward_and_jacobian_examples() {
        let fl = parabola_flow();
        let x = DVector::from_element(1, -0.5);
        let (p, t) = fl.zr_forward(0.1, &x, 0.0).unwrap();
        assert_relative_eq!(p[0], 0.95, epsilon = 1e-15);
        assert_relative_eq!(p[1], -0.5, epsilon = 1e-15);
        assert_relative_eq!(t, 0.2, epsilon = 1e-15);
        assert_relative_eq!(fl.jacobian_analytic(0.1, &x).unwrap(), 2.8, epsilon = 1e-13);
        assert_relative_eq!(fl.jacobian_direct(0.1, &x).unwrap(), 2.8, epsilon = 1e-13);
        assert_relative_eq!(fl.jacobian_2d_closed(0.1, -0.5).unwrap(), 2.8, epsilon = 1e-13);
        assert_relative_eq!(fl.jacobian_fd(0.1, &x, 1e-5).unwrap(), 2.8, epsilon = 1e-8);
    }

    #[test]
    fn box_phi_matches_liouville_on_parabola() {
        let fl = parabola_flow();
        let x = DVector::from_element(1, -0.5);
        assert_relative_eq!(fl.box_phi_r(0.0, &x).unwrap(), 2.0, epsilon = 1e-13);
        for s in [0.0, 0.1, 0.5] {
            assert_relative_eq!(fl.box_phi_r(s, &x).unwrap() * 2.0, fl.dlogj_ds(s, &x).unwrap(), epsilon = 1e-12);
        }
    }

    #[test]
    fn det_b_example() {
        let grad = DVector::from_vec(vec![0.1, 0.0]);
        let r = matrix_lemmas_from_gradient(&grad, &DVector::from_vec(vec![1.0, 0.0])).unwrap();
        assert_relative_eq!(r.det_b, 0.505, epsilon = 1e-14);
        assert!(r.passes(1e-12));
    }

    #[test]
    fn three_d_forward_example() {
        let ob = GraphObstacle::new(Family::IsoPower { k: 1 }, 3, 2.0).unwrap();
        let fl = ReflectedFlow::new(ob, &DVector::from_vec(vec![1.0, 0.0])).unwrap();
        let x = DVector::from_vec(vec![-0.5, 0.0]);
        let r = fl.covector(&x).unwrap();
        assert_relative_eq!(r.xi1, 1.0, epsilon = 1e-15);
        assert_relative_eq!(r.xibar.norm(), 0.0, epsilon = 1e-15);
        for s in [0.0, 0.2, 0.7] {
            let a = fl.jacobian_analytic(s, &x).unwrap();
            assert_relative_eq!(a, fl.jacobian_direct(s, &x).unwrap(), max_relative = 1e-12);
            assert_relative_eq!(a, fl.jacobian_fd(s, &x, 1e-5).unwrap(), max_relative = 1e-7);
        }
    }
}

//! Verification building blocks: closed-form flow maps against integrated
//! bicharacteristics, analytic Jacobians against difference quotients,
//! matrix identities on random samples, and transport along rays against
//! conservation and manufactured solutions. Results are collected into
//! [`Verdict`] lines that the command-line front end and the acceptance
//! suite print.

use std::fmt;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::flow::{integrate_bichar, CotangentPoint};
use crate::obstacle::{sample_ball, GraphObstacle};
use crate::phase::{matrix_lemma_checks, ReflectedFlow};
use crate::profile::transport_scalar;

/// Outcome of one verification item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skipped => "SKIPPED",
        })
    }
}

/// One printed line of a verification run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub id: String,
    pub name: String,
    pub status: Status,
    pub detail: String,
    pub seconds: f64,
}

impl Verdict {
    pub fn new(id: impl Into<String>, name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Verdict {
            id: id.into(),
            name: name.into(),
            status: if passed { Status::Pass } else { Status::Fail },
            detail: detail.into(),
            seconds: 0.0,
        }
    }

    pub fn skipped(id: impl Into<String>, name: impl Into<String>, why: impl Into<String>) -> Self {
        Verdict { id: id.into(), name: name.into(), status: Status::Skipped, detail: why.into(), seconds: 0.0 }
    }

    pub fn timed(mut self, seconds: f64) -> Self {
        self.seconds = seconds;
        self
    }

    pub fn failed(&self) -> bool {
        self.status == Status::Fail
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: {} ({}; {:.2} s)", self.id, self.name, self.status, self.detail, self.seconds)
    }
}

/// Random illuminated boundary parameters: `|xbar| < 0.9 r` and
/// `<theta, grad F> >= min_incidence`.
pub fn illuminated_samples(ob: &GraphObstacle, theta: &DVector<f64>, n: usize, min_incidence: f64, seed: u64) -> Result<Vec<DVector<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let th = theta.normalize();
    let mut out = Vec::with_capacity(n);
    let mut tries = 0usize;
    while out.len() < n {
        tries += 1;
        if tries > 1000 * n.max(1) {
            return Err(crate::Error::OutOfChart("no illuminated samples in the validity ball".into()));
        }
        let x = sample_ball(&mut rng, ob.m(), 0.9 * ob.r);
        if ob.eval(&x)?.grad.dot(&th) >= min_incidence {
            out.push(x);
        }
    }
    Ok(out)
}

/// Closed-form reflected flow against integrated bicharacteristics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowMapReport {
    pub samples: usize,
    /// Largest `|Z_r - gamma(s)|` over spacetime components.
    pub max_error: f64,
    /// Largest `| |xi_r|^2 - tau^2 |` of the reflected start covectors.
    pub max_null_defect: f64,
}

/// Integrates the wave bicharacteristic from `(F(xbar), xbar, t')` with the
/// covector obtained by mirroring `(0, theta, -1)` in the boundary normal,
/// and compares its position at `s` with [`ReflectedFlow::zr_forward`].
pub fn flowmap_oracle(flow: &ReflectedFlow, s0: f64, samples: usize, seed: u64) -> Result<FlowMapReport> {
    let theta = flow.theta().normalize();
    let feet = illuminated_samples(&flow.ob, &theta, samples, 1e-6, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let params: Vec<(f64, f64)> = (0..samples).map(|_| (s0 * rng.random::<f64>(), rng.random_range(-1.0..1.0))).collect();
    let m = flow.m();
    let rows: Vec<Result<(f64, f64)>> = feet
        .par_iter()
        .zip(params.par_iter())
        .map(|(x, &(s, tp))| {
            let e = flow.ob.eval(x)?;
            let mut normal = DVector::zeros(m + 1);
            normal[0] = 1.0;
            normal.rows_mut(1, m).copy_from(&(-&e.grad));
            let normal = normal.normalize();
            let mut xi = DVector::zeros(m + 1);
            xi.rows_mut(1, m).copy_from(&theta);
            let xi_r = &xi - &normal * (2.0 * xi.dot(&normal));
            let null = (xi_r.norm_squared() - 1.0).abs();
            let mut pos = DVector::zeros(m + 1);
            pos[0] = e.f;
            pos.rows_mut(1, m).copy_from(x);
            let start = CotangentPoint::new(pos, tp, xi_r, -1.0);
            let end = integrate_bichar(&start, s, 1e-12)?.end().clone();
            let (z, t) = flow.zr_forward(s, x, tp)?;
            let err = (&z - &end.x).amax().max((t - end.t).abs());
            Ok((err, null))
        })
        .collect();
    let mut rep = FlowMapReport { samples, max_error: 0.0, max_null_defect: 0.0 };
    for r in rows {
        let (e, n) = r?;
        rep.max_error = rep.max_error.max(e);
        rep.max_null_defect = rep.max_null_defect.max(n);
    }
    Ok(rep)
}

/// Analytic Jacobians against central difference quotients of `Z_r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JacobianReport {
    pub samples: usize,
    pub max_rel_error: f64,
    /// Smallest `j - 2 <theta, grad F>`; non-negative when the lower bound holds.
    pub min_lower_margin: f64,
    pub lower_bound_holds: bool,
}

/// Compares the closed form (two dimensions) or the factored determinant
/// (higher dimensions) with [`ReflectedFlow::jacobian_fd`] at step `h` on
/// samples whose incidence `<theta, grad F>` is at least `min_incidence`.
pub fn jacobian_oracle(flow: &ReflectedFlow, s0: f64, samples: usize, seed: u64, min_incidence: f64, h: f64) -> Result<JacobianReport> {
    let theta = flow.theta().normalize();
    let feet = illuminated_samples(&flow.ob, &theta, samples, min_incidence, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7ac0);
    let ss: Vec<f64> = (0..samples).map(|_| s0 * rng.random::<f64>()).collect();
    let rows: Vec<Result<(f64, f64, f64)>> = feet
        .par_iter()
        .zip(ss.par_iter())
        .map(|(x, &s)| {
            let analytic = if flow.m() == 1 { flow.jacobian_2d_closed(s, x[0])? } else { flow.jacobian_analytic(s, x)? };
            let fd = flow.jacobian_fd(s, x, h)?;
            let a = flow.ob.eval(x)?.grad.dot(&theta);
            Ok(((analytic - fd).abs() / analytic.abs(), analytic - 2.0 * a, analytic.abs()))
        })
        .collect();
    let mut rep = JacobianReport { samples, max_rel_error: 0.0, min_lower_margin: f64::INFINITY, lower_bound_holds: true };
    for r in rows {
        let (rel, margin, scale) = r?;
        rep.max_rel_error = rep.max_rel_error.max(rel);
        rep.min_lower_margin = rep.min_lower_margin.min(margin);
        if margin < -1e-12 * scale.max(1.0) {
            rep.lower_bound_holds = false;
        }
    }
    Ok(rep)
}

/// Worst defects of the two matrix identities over random illuminated points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixSweep {
    pub samples: usize,
    pub failures: usize,
    pub max_det_defect: f64,
    pub max_cbt_defect: f64,
}

pub fn matrix_lemma_sweep(ob: &GraphObstacle, theta: &DVector<f64>, samples: usize, seed: u64, tol: f64) -> Result<MatrixSweep> {
    let feet = illuminated_samples(ob, theta, samples, 1e-3, seed)?;
    let mut rep = MatrixSweep { samples, failures: 0, max_det_defect: 0.0, max_cbt_defect: 0.0 };
    for x in &feet {
        let r = matrix_lemma_checks(ob, theta, x)?;
        rep.max_det_defect = rep.max_det_defect.max((r.det_b - r.det_b_expected).abs());
        rep.max_cbt_defect = rep.max_cbt_defect.max(r.cbt_defect);
        if !r.passes(tol) {
            rep.failures += 1;
        }
    }
    Ok(rep)
}

/// Drift of `sqrt(j) W` along reflected rays with zero source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConservationReport {
    pub rays: usize,
    pub ds: f64,
    /// Largest `| sqrt(j(s)/j(0)) W(s) / W(0) - 1 |`.
    pub max_drift: f64,
}

/// Transports `W(0) = 1` along the reflected rays with feet `feet` using the
/// coefficient `box phi_r` and the ray step `ds`, and measures the drift of
/// `sqrt(j) W` relative to its initial value.
pub fn transport_conservation(flow: &ReflectedFlow, feet: &[DVector<f64>], s_max: f64, ds: f64) -> Result<ConservationReport> {
    let n = (s_max / ds).round().max(1.0) as usize;
    let s: Vec<f64> = (0..=n).map(|k| k as f64 * s_max / n as f64).collect();
    let sigma: Vec<f64> = s.iter().map(|v| 2.0 * v).collect();
    let drifts: Vec<Result<f64>> = feet
        .par_iter()
        .enumerate()
        .map(|(ray, x)| {
            let c = s.iter().map(|&v| flow.box_phi_r(v, x)).collect::<Result<Vec<f64>>>()?;
            let w = transport_scalar(&sigma, &c, &vec![0.0; s.len()], 1.0, ray)?;
            let j0 = flow.jacobian_analytic(0.0, x)?;
            let mut worst = 0.0f64;
            for (k, &v) in s.iter().enumerate() {
                let j = flow.jacobian_analytic(v, x)?;
                worst = worst.max(((j / j0).sqrt() * w[k] - 1.0).abs());
            }
            Ok(worst)
        })
        .collect();
    let mut max_drift = 0.0f64;
    for d in drifts {
        max_drift = max_drift.max(d?);
    }
    Ok(ConservationReport { rays: feet.len(), ds: s_max / n as f64, max_drift })
}

/// Step-halving study of the integrating-factor solver on a manufactured solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManufacturedReport {
    /// `(step, max error)` for every step.
    pub errors: Vec<(f64, f64)>,
    /// `e(h) / e(h / 2)` for consecutive steps.
    pub ratios: Vec<f64>,
}

/// Solves `dW/dsigma + (c/2) W = f/2` on `[0, 2]` with `c = 1 + sin(sigma) / 2`
/// and `f` manufactured from `W = (1 + sigma) cos(sigma)`, for each step in `steps`.
pub fn manufactured_transport(steps: &[f64]) -> Result<ManufacturedReport> {
    let exact = |x: f64| (1.0 + x) * x.cos();
    let dexact = |x: f64| x.cos() - (1.0 + x) * x.sin();
    let coef = |x: f64| 1.0 + 0.5 * x.sin();
    let mut errors = Vec::new();
    for &h in steps {
        let n = (2.0 / h).round() as usize;
        let sigma: Vec<f64> = (0..=n).map(|k| 2.0 * k as f64 / n as f64).collect();
        let c: Vec<f64> = sigma.iter().map(|&x| coef(x)).collect();
        let f: Vec<f64> = sigma.iter().map(|&x| 2.0 * dexact(x) + coef(x) * exact(x)).collect();
        let w = transport_scalar(&sigma, &c, &f, exact(0.0), 0)?;
        let err = sigma.iter().zip(&w).map(|(&x, v)| (v - exact(x)).abs()).fold(0.0, f64::max);
        errors.push((2.0 / n as f64, err));
    }
    let ratios = errors.windows(2).map(|w| w[0].1 / w[1].1).collect();
    Ok(ManufacturedReport { errors, ratios })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::obstacle::Family;

    fn parabola_flow() -> ReflectedFlow {
        let ob = GraphObstacle::new(Family::Poly2D { coeffs: vec![1.0] }, 2, 2.0).unwrap();
        ReflectedFlow::new(ob, &DVector::from_element(1, 1.0)).unwrap()
    }

    #[test]
    fn flowmap_matches_integration() {
        let rep = flowmap_oracle(&parabola_flow(), 1.0, 200, 3).unwrap();
        assert!(rep.max_error < 1e-10, "{rep:?}");
        assert!(rep.max_null_defect < 1e-14);
    }

    #[test]
    fn jacobian_matches_difference_quotients() {
        let rep = jacobian_oracle(&parabola_flow(), 1.0, 200, 3, 0.05, 1e-5).unwrap();
        assert!(rep.max_rel_error < 1e-6, "{rep:?}");
        assert!(rep.lower_bound_holds);
    }

    #[test]
    fn samples_are_illuminated() {
        let fl = parabola_flow();
        for x in illuminated_samples(&fl.ob, fl.theta(), 50, 0.1, 1).unwrap() {
            assert!(fl.ob.eval(&x).unwrap().grad[0] >= 0.1);
        }
    }

    #[test]
    fn conservation_on_the_parabola() {
        let fl = parabola_flow();
        let feet: Vec<DVector<f64>> = [-0.5, -0.8, -1.1].iter().map(|v| DVector::from_element(1, *v)).collect();
        let rep = transport_conservation(&fl, &feet, 1.0, 1e-3).unwrap();
        assert!(rep.max_drift < 1e-6, "{rep:?}");
    }

    #[test]
    fn manufactured_is_second_order() {
        let rep = manufactured_transport(&[0.02, 0.01, 0.005]).unwrap();
        for r in &rep.ratios {
            assert!((r - 4.0).abs() < 0.5, "{rep:?}");
        }
    }

    #[test]
    fn verdict_line_format() {
        let v = Verdict::new("criterion 1", "flow map", true, "max error 1e-15").timed(0.5);
        assert_eq!(v.to_string(), "criterion 1 flow map: PASS (max error 1e-15; 0.50 s)");
        assert!(!v.failed());
    }
}

//! The wave symbol, its Hamilton field, bicharacteristic integration and
//! classification of boundary points by glancing order.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::obstacle::GraphObstacle;
use crate::series::Series;

/// A point `(x, t; xi, tau)` of phase space over spacetime.
#[derive(Debug, Clone, PartialEq)]
pub struct CotangentPoint {
    pub x: DVector<f64>,
    pub t: f64,
    pub xi: DVector<f64>,
    pub tau: f64,
}

impl CotangentPoint {
    pub fn new(x: DVector<f64>, t: f64, xi: DVector<f64>, tau: f64) -> Self {
        CotangentPoint { x, t, xi, tau }
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    fn to_state(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 * self.n() + 2);
        v.extend(self.x.iter());
        v.push(self.t);
        v.extend(self.xi.iter());
        v.push(self.tau);
        v
    }

    fn from_state(v: &[f64]) -> Self {
        let n = (v.len() - 2) / 2;
        CotangentPoint {
            x: DVector::from_column_slice(&v[..n]),
            t: v[n],
            xi: DVector::from_column_slice(&v[n + 1..2 * n + 1]),
            tau: v[2 * n + 1],
        }
    }
}

/// Components of a tangent vector to phase space.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTangent {
    pub dx: DVector<f64>,
    pub dt: f64,
    pub dxi: DVector<f64>,
    pub dtau: f64,
}

/// A principal symbol `p(x, t, xi, tau)` with its first partial derivatives.
pub trait Symbol: Sync {
    fn value(&self, pt: &CotangentPoint) -> f64;

    /// Hamilton field `(p_xi, p_tau, -p_x, -p_t)`.
    fn hamilton(&self, pt: &CotangentPoint) -> PhaseTangent;
}

/// The d'Alembertian symbol `|xi|^2 - tau^2`.
#[derive(Debug, Clone, Copy, Default)]
pub struct WaveSymbol;

impl Symbol for WaveSymbol {
    fn value(&self, pt: &CotangentPoint) -> f64 {
        pt.xi.norm_squared() - pt.tau * pt.tau
    }

    fn hamilton(&self, pt: &CotangentPoint) -> PhaseTangent {
        PhaseTangent {
            dx: &pt.xi * 2.0,
            dt: -2.0 * pt.tau,
            dxi: DVector::zeros(pt.n()),
            dtau: 0.0,
        }
    }
}

/// Hamilton field of the wave symbol: `(2 xi, -2 tau, 0, 0)`.
pub fn hamilton_field(pt: &CotangentPoint) -> PhaseTangent {
    WaveSymbol.hamilton(pt)
}

/// A sampled integral curve of a Hamilton field.
#[derive(Debug, Clone)]
pub struct Bicharacteristic {
    pub samples: Vec<(f64, CotangentPoint)>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl Bicharacteristic {
    pub fn end(&self) -> &CotangentPoint {
        &self.samples.last().unwrap().1
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IntegrateOptions {
    pub tol: f64,
    /// Largest step; keeps the sampling dense enough to see boundary crossings.
    pub h_max: f64,
    pub h_min: f64,
}

fn field_state<S: Symbol>(sym: &S, v: &[f64]) -> Vec<f64> {
    let pt = CotangentPoint::from_state(v);
    let h = sym.hamilton(&pt);
    let mut out = Vec::with_capacity(v.len());
    out.extend(h.dx.iter());
    out.push(h.dt);
    out.extend(h.dxi.iter());
    out.push(h.dtau);
    out
}

// Dormand-Prince 5(4) tableau; the Hamilton field does not depend on s,
// so the node coefficients are not needed.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Adaptive Dormand-Prince integration of the Hamilton field from `start` over `[0, s_max]`.
pub fn integrate_with<S: Symbol>(
    sym: &S,
    start: &CotangentPoint,
    s_max: f64,
    opts: IntegrateOptions,
) -> Result<Bicharacteristic> {
    if !(opts.tol > 0.0) {
        return Err(Error::Unsupported("integration tolerance must be positive".into()));
    }
    let mut y = start.to_state();
    let dim = y.len();
    let mut s = 0.0;
    let mut h = opts.h_max.min(s_max).max(opts.h_min);
    let mut samples = vec![(0.0, start.clone())];
    let (mut accepted, mut rejected) = (0, 0);
    let mut k = vec![vec![0.0; dim]; 7];
    let mut tmp = vec![0.0; dim];
    while s < s_max {
        if s + h > s_max {
            h = s_max - s;
        }
        k[0] = field_state(sym, &y);
        for stage in 1..7 {
            for i in 0..dim {
                let mut acc = y[i];
                for (j, kj) in k.iter().enumerate().take(stage) {
                    acc += h * A[stage][j] * kj[i];
                }
                tmp[i] = acc;
            }
            k[stage] = field_state(sym, &tmp);
        }
        let mut err = 0.0f64;
        let mut y5 = vec![0.0; dim];
        for i in 0..dim {
            let mut a5 = 0.0;
            let mut a4 = 0.0;
            for j in 0..7 {
                a5 += B5[j] * k[j][i];
                a4 += B4[j] * k[j][i];
            }
            y5[i] = y[i] + h * a5;
            let sc = opts.tol * (1.0 + y[i].abs().max(y5[i].abs()));
            err = err.max((h * (a5 - a4)).abs() / sc);
        }
        if !err.is_finite() {
            return Err(Error::NonFinite { what: "bicharacteristic step".into() });
        }
        if err <= 1.0 {
            s += h;
            y = y5;
            accepted += 1;
            samples.push((s, CotangentPoint::from_state(&y)));
            let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = (h * grow).min(opts.h_max);
        } else {
            rejected += 1;
            h *= (0.9 * err.powf(-0.25)).max(0.1);
            if h < opts.h_min {
                return Err(Error::StepFailure { s });
            }
        }
    }
    Ok(Bicharacteristic {
        samples,
        accepted_steps: accepted,
        rejected_steps: rejected,
    })
}

/// Integrates the wave-symbol bicharacteristic through `start` for `s` in `[0, s_max]`.
pub fn integrate_bichar(start: &CotangentPoint, s_max: f64, tol: f64) -> Result<Bicharacteristic> {
    integrate_with(
        &WaveSymbol,
        start,
        s_max,
        IntegrateOptions {
            tol,
            h_max: (s_max / 64.0).max(1e-12),
            h_min: 1e-14 * s_max.max(1.0),
        },
    )
}

/// Integrates many starts in parallel.
pub fn integrate_many(starts: &[CotangentPoint], s_max: f64, tol: f64) -> Result<Vec<Bicharacteristic>> {
    starts.par_iter().map(|p| integrate_bichar(p, s_max, tol)).collect()
}

/// Boundary-defining function `beta = x1 - F(xbar)`; positive in the exterior.
pub fn beta(ob: &GraphObstacle, x: &DVector<f64>) -> Result<f64> {
    let xbar = x.rows(1, x.len() - 1).into_owned();
    Ok(x[0] - ob.value(&xbar)?)
}

/// First crossing of `beta = 0` along the sampled curve in either direction,
/// refined by bisection on the cubic Hermite interpolant of consecutive samples.
pub fn first_boundary_hit(ob: &GraphObstacle, bc: &Bicharacteristic) -> Result<Option<(f64, CotangentPoint)>> {
    let interp = |a: &(f64, CotangentPoint), b: &(f64, CotangentPoint), s: f64| -> CotangentPoint {
        let h = b.0 - a.0;
        let u = (s - a.0) / h;
        let (fa, fb) = (hamilton_field(&a.1), hamilton_field(&b.1));
        let h00 = 2.0 * u.powi(3) - 3.0 * u * u + 1.0;
        let h10 = u.powi(3) - 2.0 * u * u + u;
        let h01 = -2.0 * u.powi(3) + 3.0 * u * u;
        let h11 = u.powi(3) - u * u;
        let x = &a.1.x * h00 + &fa.dx * (h * h10) + &b.1.x * h01 + &fb.dx * (h * h11);
        let t = a.1.t * h00 + fa.dt * h * h10 + b.1.t * h01 + fb.dt * h * h11;
        let w = u;
        CotangentPoint {
            x,
            t,
            xi: &a.1.xi * (1.0 - w) + &b.1.xi * w,
            tau: a.1.tau * (1.0 - w) + b.1.tau * w,
        }
    };
    let mut prev = beta(ob, &bc.samples[0].1.x)?;
    for w in bc.samples.windows(2) {
        let cur = beta(ob, &w[1].1.x)?;
        if prev != 0.0 && (cur == 0.0 || (cur > 0.0) != (prev > 0.0)) {
            let side = prev > 0.0;
            let (mut lo, mut hi) = (w[0].0, w[1].0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let b = beta(ob, &interp(&w[0], &w[1], mid).x)?;
                if b != 0.0 && (b > 0.0) == side {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 1e-16 * hi.abs().max(1.0) {
                    break;
                }
            }
            let s = 0.5 * (lo + hi);
            return Ok(Some((s, interp(&w[0], &w[1], s))));
        }
        prev = cur;
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PointClass {
    Elliptic,
    Hyperbolic,
    Glancing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GlancingType {
    Diffractive,
    Gliding,
    Inflection,
    NotGlancing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Order {
    Finite(usize),
    /// No non-zero derivative up to and including the cap.
    Infinite { cap: usize },
}

/// Result of [`glancing_order`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GlancingReport {
    pub class: PointClass,
    pub order: Order,
    pub kind: GlancingType,
    /// `H_p^j beta` for `j = 0..=cap`.
    pub derivatives: Vec<f64>,
    /// Largest `s` for which `beta(gamma(s)) >= 0` was sampled on `(0, s_probe]`.
    pub s_probe: Option<f64>,
}

/// Thresholds for deciding that an iterated derivative vanishes.
#[derive(Debug, Clone, Copy)]
pub struct OrderThresholds {
    pub zero: f64,
    pub noise: f64,
}

impl Default for OrderThresholds {
    fn default() -> Self {
        OrderThresholds { zero: 1e-9, noise: 1e-7 }
    }
}

fn beta_series(ob: &GraphObstacle, pt: &CotangentPoint, degree: usize) -> Result<Series> {
    let n = pt.n();
    let xbar = pt.x.rows(1, n - 1).into_owned();
    let dbar = pt.xi.rows(1, n - 1).into_owned() * 2.0;
    let f = ob.series_along(&xbar, &dbar, degree)?;
    Ok(&Series::affine(pt.x[0], 2.0 * pt.xi[0], degree) - &f)
}

/// `beta(gamma(s))` along the straight wave bicharacteristic through `pt`.
pub fn beta_along(ob: &GraphObstacle, pt: &CotangentPoint, s: f64) -> Result<f64> {
    let x = &pt.x + &pt.xi * (2.0 * s);
    beta(ob, &x)
}

/// Glancing order of the wave bicharacteristic through a boundary point.
pub fn glancing_order_at(
    ob: &GraphObstacle,
    pt: &CotangentPoint,
    cap: usize,
    th: OrderThresholds,
) -> Result<GlancingReport> {
    if cap < 2 {
        return Err(Error::Unsupported("order cap must be at least 2".into()));
    }
    let defect = beta(ob, &pt.x)?;
    if defect.abs() > 1e-10 {
        return Err(Error::NotOnBoundary { defect: defect.abs() });
    }
    let series = beta_series(ob, pt, cap)?;
    let mut derivatives = vec![0.0; cap + 1];
    for j in 1..=cap {
        derivatives[j] = series.derivative_at_zero(j);
    }
    let scale = series.c.iter().skip(1).fold(1.0f64, |m, v| m.max(v.abs()));
    let mut order = Order::Infinite { cap };
    for j in 1..=cap {
        let c = series.c[j].abs();
        if c > th.noise * scale {
            order = Order::Finite(j);
            break;
        }
        if c > th.zero * scale {
            return Err(Error::AmbiguousOrder { j, value: derivatives[j] });
        }
    }
    let n = pt.n();
    let xbar = pt.x.rows(1, n - 1).into_owned();
    let speed = 2.0 * pt.xi.rows(1, n - 1).norm();
    let reach = 0.45 * (ob.r - xbar.norm());
    let s_max = if speed > 0.0 { reach / speed } else { reach };
    let (class, kind, s_probe) = match order {
        Order::Finite(1) => (PointClass::Hyperbolic, GlancingType::NotGlancing, None),
        Order::Finite(j) if j % 2 == 1 => (PointClass::Glancing, GlancingType::Inflection, None),
        Order::Finite(j) => {
            let kind = if derivatives[j] > 0.0 {
                GlancingType::Diffractive
            } else {
                GlancingType::Gliding
            };
            let probe = if kind == GlancingType::Diffractive {
                probe_interior(ob, pt, s_max)?
            } else {
                None
            };
            (PointClass::Glancing, kind, probe)
        }
        Order::Infinite { .. } => {
            let probe = probe_interior(ob, pt, s_max)?;
            let kind = if probe.is_some() {
                GlancingType::Diffractive
            } else {
                GlancingType::Gliding
            };
            (PointClass::Glancing, kind, probe)
        }
    };
    Ok(GlancingReport {
        class,
        order,
        kind,
        derivatives,
        s_probe,
    })
}

/// Checks `beta >= 0` on a geometric grid in `(0, s_max]` in both directions
/// and that it is positive somewhere; returns `s_max` on success.
fn probe_interior(ob: &GraphObstacle, pt: &CotangentPoint, s_max: f64) -> Result<Option<f64>> {
    let mut positive = false;
    for i in 0..200 {
        let s = s_max * 10f64.powf(-4.0 * i as f64 / 199.0);
        for sign in [1.0, -1.0] {
            let b = beta_along(ob, pt, sign * s)?;
            if b < 0.0 {
                return Ok(None);
            }
            positive |= b > 0.0;
        }
    }
    Ok(positive.then_some(s_max))
}

/// The grazing-direction start `(F(x0), x0, 0; 0, theta, -1)`.
pub fn plane_wave_start(ob: &GraphObstacle, theta: &DVector<f64>, x0: &DVector<f64>) -> Result<CotangentPoint> {
    let m = ob.m();
    if theta.len() != m || x0.len() != m {
        return Err(Error::WrongDimension { expected: m, got: theta.len().min(x0.len()) });
    }
    let f = ob.value(x0)?;
    let mut x = DVector::zeros(m + 1);
    x[0] = f;
    x.rows_mut(1, m).copy_from(x0);
    let mut xi = DVector::zeros(m + 1);
    xi.rows_mut(1, m).copy_from(&theta.normalize());
    Ok(CotangentPoint::new(x, 0.0, xi, -1.0))
}

/// Glancing order of the incoming plane-wave ray through `(F(x0), x0)`.
pub fn glancing_order(ob: &GraphObstacle, theta: &DVector<f64>, x0: &DVector<f64>, cap: usize) -> Result<GlancingReport> {
    let pt = plane_wave_start(ob, theta, x0)?;
    glancing_order_at(ob, &pt, cap, OrderThresholds::default())
}

/// Finite-difference estimates of `H_p^j beta` for `j = 1..=jmax`, using
/// central differences at three step sizes combined by Richardson extrapolation.
pub fn glancing_derivatives_fd(ob: &GraphObstacle, pt: &CotangentPoint, jmax: usize, h: f64) -> Result<Vec<f64>> {
    let f = |s: f64| beta_along(ob, pt, s);
    let mut out = vec![0.0; jmax + 1];
    for (j, slot) in out.iter_mut().enumerate().skip(1) {
        let diff = |h: f64| -> Result<f64> {
            let mut acc = 0.0;
            let mut binom = 1.0;
            for k in 0..=j {
                let sgn = if k % 2 == 0 { 1.0 } else { -1.0 };
                acc += sgn * binom * f((j as f64 / 2.0 - k as f64) * h)?;
                binom = binom * (j - k) as f64 / (k + 1) as f64;
            }
            Ok(acc / h.powi(j as i32))
        };
        let d1 = diff(h)?;
        let d2 = diff(h / 2.0)?;
        let d3 = diff(h / 4.0)?;
        let r1 = (4.0 * d2 - d1) / 3.0;
        let r2 = (4.0 * d3 - d2) / 3.0;
        *slot = (16.0 * r2 - r1) / 15.0;
    }
    Ok(out)
}

/// Classifies a tangential covector `(eta, tau)` at the boundary point over `x0`
/// by the number of real `xi` with `p = 0` pulling back to it.
pub fn classify_tangential(ob: &GraphObstacle, x0: &DVector<f64>, eta: &DVector<f64>, tau: f64) -> Result<PointClass> {
    let e = ob.eval(x0)?;
    let d = 1.0 + e.grad.norm_squared();
    let b = eta.dot(&e.grad);
    let disc = b * b - d * (eta.norm_squared() - tau * tau);
    let scale = 1.0 + eta.norm_squared() + tau * tau;
    let split = disc.abs().sqrt() / d;
    Ok(if split <= 1e-9 * scale.sqrt() {
        PointClass::Glancing
    } else if disc > 0.0 {
        PointClass::Hyperbolic
    } else {
        PointClass::Elliptic
    })
}

/// Classification of the incoming plane-wave covector `(0, theta, -1)` over `x0`.
pub fn classify_boundary_point(ob: &GraphObstacle, theta: &DVector<f64>, x0: &DVector<f64>) -> Result<PointClass> {
    classify_tangential(ob, x0, &theta.normalize(), -1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::obstacle::Family;
    use approx::assert_relative_eq;

    fn parabola() -> GraphObstacle {
        GraphObstacle::new(Family::Poly2D { coeffs: vec![1.0] }, 2, 3.0).unwrap()
    }

    #[test]
    fn field_of_grazing_covector() {
        let pt = CotangentPoint::new(DVector::zeros(2), 0.0, DVector::from_vec(vec![0.0, 1.0]), -1.0);
        let h = hamilton_field(&pt);
        assert_eq!(h.dx.as_slice(), &[0.0, 2.0]);
        assert_eq!(h.dt, 2.0);
    }

    #[test]
    fn straight_line_integration() {
        let pt = CotangentPoint::new(DVector::from_vec(vec![0.75, -0.5]), 0.0, DVector::from_vec(vec![1.0, 0.0]), -1.0);
        let bc = integrate_bichar(&pt, 0.1, 1e-12).unwrap();
        let end = bc.end();
        assert_relative_eq!(end.x[0], 0.95, epsilon = 1e-14);
        assert_relative_eq!(end.x[1], -0.5, epsilon = 1e-14);
        assert_relative_eq!(end.t, 0.2, epsilon = 1e-14);
    }

    #[test]
    fn hit_on_parabola() {
        let ob = parabola();
        let pt = CotangentPoint::new(DVector::from_vec(vec![0.2, -0.5]), 0.0, DVector::from_vec(vec![1.0, 0.0]), -1.0);
        let bc = integrate_bichar(&pt, 1.0, 1e-12).unwrap();
        let (s, hit) = first_boundary_hit(&ob, &bc).unwrap().unwrap();
        assert_relative_eq!(hit.x[0], 0.75, epsilon = 1e-12);
        assert_relative_eq!(s, 0.275, epsilon = 1e-12);
    }

    #[test]
    fn parabola_is_order_two() {
        let ob = parabola();
        let r = glancing_order(&ob, &DVector::from_element(1, 1.0), &DVector::zeros(1), 12).unwrap();
        assert_eq!(r.order, Order::Finite(2));
        assert_eq!(r.kind, GlancingType::Diffractive);
        assert_relative_eq!(r.derivatives[2], 8.0, epsilon = 1e-12);
    }

    #[test]
    fn expflat_is_infinite() {
        let ob = GraphObstacle::new(Family::ExpFlat, 2, 1.0).unwrap();
        let r = glancing_order(&ob, &DVector::from_element(1, 1.0), &DVector::zeros(1), 12).unwrap();
        assert_eq!(r.order, Order::Infinite { cap: 12 });
        assert_eq!(r.kind, GlancingType::Diffractive);
        assert!(r.s_probe.is_some());
    }

    #[test]
    fn fd_matches_series() {
        let ob = GraphObstacle::new(Family::Poly2D { coeffs: vec![0.5, 0.1, 0.3, 0.0, 0.2] }, 2, 2.0).unwrap();
        let pt = plane_wave_start(&ob, &DVector::from_element(1, 1.0), &DVector::from_element(1, 0.2)).unwrap();
        let fd = glancing_derivatives_fd(&ob, &pt, 6, 0.1).unwrap();
        let r = glancing_order_at(&ob, &pt, 6, OrderThresholds::default()).unwrap();
        for j in 1..=6 {
            let scale = r.derivatives[j].abs().max(1.0);
            assert!((fd[j] - r.derivatives[j]).abs() <= 1e-6 * scale, "j={j}: {} vs {}", fd[j], r.derivatives[j]);
        }
    }

    #[test]
    fn classification_cases() {
        let ob = parabola();
        let th = DVector::from_element(1, 1.0);
        assert_eq!(classify_boundary_point(&ob, &th, &DVector::from_element(1, -0.5)).unwrap(), PointClass::Hyperbolic);
        assert_eq!(classify_boundary_point(&ob, &th, &DVector::zeros(1)).unwrap(), PointClass::Glancing);
        let el = classify_tangential(&ob, &DVector::zeros(1), &DVector::from_element(1, 2.0), -1.0).unwrap();
        assert_eq!(el, PointClass::Elliptic);
    }
}

//! Shadow boundary, injectivity fuzzing, nonresonance scans and the
//! Jacobian scaling diagnostics near the grazing set.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chart::{FlowChart, InvertOptions};
use crate::error::{Error, Result};
use crate::flow::{glancing_order, Order};
use crate::grazing::GrazingSetChart;
use crate::obstacle::GraphObstacle;
use crate::phase::{lorentz_pair, ReflectedFlow};

/// Shadow boundary `SB_+ u SB_-`: straight flowouts of the grazing set along `(0, 2 theta, 2)`.
#[derive(Debug, Clone)]
pub struct ShadowBoundary {
    pub theta: DVector<f64>,
    /// Foot points `(F(xbar), xbar)` of the grazing set.
    pub feet: Vec<DVector<f64>>,
    pub t_window: (f64, f64),
}

fn bisect_root<F: Fn(f64) -> Result<f64>>(f: F, mut a: f64, mut b: f64) -> Result<Option<f64>> {
    let mut fa = f(a)?;
    let fb = f(b)?;
    if fa == 0.0 {
        return Ok(Some(a));
    }
    if fa * fb > 0.0 {
        return Ok(None);
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let fm = f(m)?;
        if fm == 0.0 {
            return Ok(Some(m));
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(Some(0.5 * (a + b)))
}

/// Orthonormal complement of `n` in its ambient space.
fn complement(n: &DVector<f64>) -> Vec<DVector<f64>> {
    let m = n.len();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for i in 0..m {
        let mut v = DVector::zeros(m);
        v[i] = 1.0;
        v -= n * n.dot(&v);
        for b in &basis {
            v -= b * b.dot(&v);
        }
        if v.norm() > 1e-8 {
            basis.push(v.normalize());
        }
        if basis.len() + 1 == m {
            break;
        }
    }
    basis
}

/// Samples the grazing set by root-finding `<grad F, theta>` along the normal
/// direction `grad zeta(0)` from a grid on its orthogonal complement, then
/// records the flowouts over the time window.
pub fn shadow_boundary(
    ob: &GraphObstacle,
    chart: &GrazingSetChart,
    t_window: (f64, f64),
    per_axis: usize,
) -> Result<ShadowBoundary> {
    let m = ob.m();
    let n0 = chart.grad_zeta(&DVector::zeros(m)).normalize();
    let tang = complement(&n0);
    let reach = 0.9 * ob.r;
    let g = |x: &DVector<f64>| -> Result<f64> { Ok(ob.eval(x)?.grad.dot(&chart.theta)) };
    let mut feet = Vec::new();
    let count = per_axis.pow(tang.len() as u32);
    for code in 0..count {
        let mut c = code;
        let mut base = DVector::zeros(m);
        for b in &tang {
            let k = c % per_axis;
            c /= per_axis;
            let u = if per_axis > 1 { -reach + 2.0 * reach * k as f64 / (per_axis - 1) as f64 } else { 0.0 };
            base += b * u;
        }
        if base.norm() >= reach {
            continue;
        }
        let span = (reach * reach - base.norm_squared()).sqrt();
        if let Some(l) = bisect_root(|l| g(&(&base + &n0 * l)), -span, span)? {
            let x = &base + &n0 * l;
            let mut p = DVector::zeros(m + 1);
            p[0] = ob.value(&x)?;
            p.rows_mut(1, m).copy_from(&x);
            feet.push(p);
        }
    }
    Ok(ShadowBoundary {
        theta: chart.theta.clone(),
        feet,
        t_window,
    })
}

impl ShadowBoundary {
    fn direction(&self) -> DVector<f64> {
        let m = self.theta.len();
        let mut d = DVector::zeros(m + 1);
        d.rows_mut(1, m).copy_from(&self.theta);
        d
    }

    /// Spacetime point of `SB_+` (for `s >= 0`) or `SB_-` (for `s < 0`) over a foot at time `t0`.
    pub fn point(&self, foot: usize, s: f64, t0: f64) -> (DVector<f64>, f64) {
        (&self.feet[foot] + self.direction() * (2.0 * s), t0 + 2.0 * s)
    }

    /// Spatial distance from `x` to the forward flowout; the surface is the same at every time.
    pub fn distance_plus(&self, x: &DVector<f64>) -> f64 {
        let d = self.direction();
        self.feet
            .iter()
            .map(|f| {
                let l = (x - f).dot(&d).max(0.0);
                (x - f - &d * l).norm()
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Spatial distance to the full line flowout `SB_+ u SB_-`.
    pub fn distance(&self, x: &DVector<f64>) -> f64 {
        let d = self.direction();
        self.feet
            .iter()
            .map(|f| {
                let l = (x - f).dot(&d);
                (x - f - &d * l).norm()
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Whether the exterior point `x` is shadowed: the backward incoming ray
/// through `x` meets the obstacle inside its validity ball.
pub fn in_shadow(ob: &GraphObstacle, theta: &DVector<f64>, x: &DVector<f64>) -> Result<bool> {
    let m = ob.m();
    let xb = x.rows(1, m).into_owned();
    let th = theta.normalize();
    let r = 0.999 * ob.r;
    // Backward parameters l >= 0 with |xb - l theta| < r.
    let b = xb.dot(&th);
    let disc = b * b - (xb.norm_squared() - r * r);
    if disc <= 0.0 {
        return Ok(false);
    }
    let hi = b + disc.sqrt();
    let lo = (b - disc.sqrt()).max(0.0);
    if hi <= lo {
        return Ok(false);
    }
    // F is concave along the line, so golden-section search finds its maximum.
    let f = |l: f64| ob.value(&(&xb - &th * l));
    let (mut a, mut c) = (lo, hi);
    let gr = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..120 {
        let l1 = c - gr * (c - a);
        let l2 = a + gr * (c - a);
        if f(l1)? < f(l2)? {
            a = l1;
        } else {
            c = l2;
        }
    }
    let peak = f(0.5 * (a + c))?.max(f(lo)?);
    Ok(x[0] < peak)
}

/// Result of [`injectivity_fuzz`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InjectivityReport {
    pub pairs: usize,
    pub collisions: usize,
    /// Smallest `|Z(p) - Z(q)| / |p - q|` over the sampled pairs.
    pub min_expansion: f64,
    /// Round trips `Z^{-1}(Z(p))` that returned a different preimage, beyond
    /// the Newton tolerance amplified by `1 / j`.
    pub inverse_mismatches: usize,
    pub inverse_failures: usize,
    /// Largest sampled reflection-angle derivative (two dimensions only; must be `<= 0`).
    pub max_alpha_prime: Option<f64>,
    /// Largest discrepancy between the closed-form and finite-difference angle derivative.
    pub alpha_prime_defect: Option<f64>,
}

impl InjectivityReport {
    pub fn pass(&self) -> bool {
        self.collisions == 0
            && self.inverse_mismatches == 0
            && self.max_alpha_prime.is_none_or(|a| a <= 1e-12)
    }
}

fn random_params(rng: &mut ChaCha8Rng, chart: &FlowChart) -> (f64, DVector<f64>, f64) {
    let i = rng.random_range(0..chart.params.len());
    let m = chart.flow.m();
    let spacing = if chart.params.len() > 1 {
        (&chart.params[0] - &chart.params[1]).norm().max(1e-6)
    } else {
        1e-3
    };
    let mut x = chart.params[i].clone();
    for k in 0..m {
        x[k] += spacing * (rng.random::<f64>() - 0.5);
    }
    (rng.random::<f64>() * chart.s0, x, rng.random::<f64>() - 0.5)
}

/// Random-pair fuzzing of `Z_r` over the chart parameters.
pub fn injectivity_fuzz(chart: &FlowChart, pairs: usize, seed: u64) -> Result<InjectivityReport> {
    let flow = &chart.flow;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(pairs);
    while samples.len() < pairs {
        let p = random_params(&mut rng, chart);
        let q = if samples.len() % 2 == 0 {
            random_params(&mut rng, chart)
        } else {
            let eps = 10f64.powf(-1.0 - 4.0 * rng.random::<f64>());
            let mut x = p.1.clone();
            for k in 0..x.len() {
                x[k] += eps * (rng.random::<f64>() - 0.5);
            }
            ((p.0 + eps * (rng.random::<f64>() - 0.5)).max(0.0), x, p.2 + eps * (rng.random::<f64>() - 0.5))
        };
        let ok = |v: &(f64, DVector<f64>, f64)| -> bool {
            v.1.norm() < flow.ob.r && flow.covector(&v.1).is_ok() && v.0 <= chart.s0
        };
        if ok(&p) && ok(&q) {
            samples.push((p, q));
        }
    }
    let results: Vec<Result<(bool, f64, u8)>> = samples
        .par_iter()
        .map(|(p, q)| {
            let (zp, tp) = flow.zr_forward(p.0, &p.1, p.2)?;
            let (zq, tq) = flow.zr_forward(q.0, &q.1, q.2)?;
            let dz = ((&zp - &zq).norm_squared() + (tp - tq).powi(2)).sqrt();
            let dp = ((p.0 - q.0).powi(2) + (&p.1 - &q.1).norm_squared() + (p.2 - q.2).powi(2)).sqrt();
            let collision = dz <= 1e-9 && dp > 1e-7;
            let ratio = if dp > 0.0 { dz / dp } else { f64::INFINITY };
            let opts = InvertOptions::default();
            let status = match chart.invert(&zp, tp, opts) {
                Ok(back) => {
                    let d = ((back.s - p.0).powi(2) + (&back.x - &p.1).norm_squared()).sqrt();
                    // Newton stops at residual `tol`, which moves the preimage by up to `tol / j`.
                    let conditioning = 100.0 * opts.tol * (1.0 + zp.norm()) / flow.jacobian_analytic(p.0, &p.1)?.abs();
                    if d > 1e-7_f64.max(conditioning) {
                        1
                    } else {
                        0
                    }
                }
                Err(_) => 2,
            };
            Ok((collision, ratio, status))
        })
        .collect();
    let mut report = InjectivityReport {
        pairs,
        collisions: 0,
        min_expansion: f64::INFINITY,
        inverse_mismatches: 0,
        inverse_failures: 0,
        max_alpha_prime: None,
        alpha_prime_defect: None,
    };
    for r in results {
        let (c, ratio, status) = r?;
        report.collisions += c as usize;
        report.min_expansion = report.min_expansion.min(ratio);
        match status {
            1 => report.inverse_mismatches += 1,
            2 => report.inverse_failures += 1,
            _ => {}
        }
    }
    if flow.m() == 1 {
        let (amax, defect) = defocusing_scan(flow, &chart.params)?;
        report.max_alpha_prime = Some(amax);
        report.alpha_prime_defect = Some(defect);
    }
    Ok(report)
}

/// Reflection angle `alpha(x2) = theta * atan2(xi1, theta * xi2)` in two dimensions.
pub fn reflection_angle(flow: &ReflectedFlow, x2: f64) -> Result<f64> {
    let th = flow.theta()[0];
    let c = flow.covector(&DVector::from_element(1, x2))?;
    Ok(th * c.xi1.atan2(th * c.xibar[0]))
}

/// Samples `alpha'(x2) = 2 theta F'' / (1 + F'^2)` on the given parameters and compares with
/// central differences of [`reflection_angle`].
pub fn defocusing_scan(flow: &ReflectedFlow, params: &[DVector<f64>]) -> Result<(f64, f64)> {
    let th = flow.theta()[0];
    let mut amax = f64::NEG_INFINITY;
    let mut defect = 0.0f64;
    for p in params {
        let x2 = p[0];
        let e = flow.ob.eval(p)?;
        let (fp, fpp) = (e.grad[0], e.hess[(0, 0)]);
        let ap = 2.0 * th * fpp / (1.0 + fp * fp);
        amax = amax.max(ap);
        let h = 1e-6;
        if let (Ok(a1), Ok(a0)) = (reflection_angle(flow, x2 + h), reflection_angle(flow, x2 - h)) {
            defect = defect.max(((a1 - a0) / (2.0 * h) - ap).abs());
        }
    }
    Ok((amax, defect))
}

/// Minimum of `|p(k_i dphi_i + k_r dphi_r)|` over integer pairs and sample points.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NonresonanceReport {
    pub min_abs_p: f64,
    pub argmin_point: Vec<f64>,
    pub argmin_k: (i32, i32),
    pub points: usize,
    pub skipped: usize,
}

pub fn nonresonance_scan(chart: &FlowChart, points: &[DVector<f64>], k_max: i32) -> Result<NonresonanceReport> {
    let xi_i = chart.flow.phase.covector();
    let mut rep = NonresonanceReport {
        min_abs_p: f64::INFINITY,
        argmin_point: vec![],
        argmin_k: (0, 0),
        points: 0,
        skipped: 0,
    };
    for x in points {
        let Ok((_, cov)) = chart.phi_r(x, 0.0) else {
            rep.skipped += 1;
            continue;
        };
        rep.points += 1;
        let xi_r = cov.spatial();
        for ki in (-k_max..=k_max).filter(|k| *k != 0) {
            for kr in (-k_max..=k_max).filter(|k| *k != 0) {
                let xi = &xi_i * ki as f64 + &xi_r * kr as f64;
                let tau = -(ki as f64) - kr as f64;
                let p = lorentz_pair(&xi, tau, &xi, tau).abs();
                if p < rep.min_abs_p {
                    rep.min_abs_p = p;
                    rep.argmin_point = x.iter().copied().collect();
                    rep.argmin_k = (ki, kr);
                }
            }
        }
    }
    Ok(rep)
}

/// Least-squares fit of the Jacobian against `c_s s + c_y y1` in the
/// coordinates of the leading-form expansion.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LeadingFitReport {
    pub alpha: f64,
    /// Fitted coefficients per window: `(window, c_s, c_y, max residual / window^2)`.
    pub windows: Vec<(f64, f64, f64, f64)>,
    /// Ratio of maximal residuals between consecutive windows.
    pub residual_ratios: Vec<f64>,
}

/// Geodesic normal coordinates of a two-dimensional exterior point: signed
/// distance to the boundary curve and the normal derivative of the incoming
/// phase at the nearest boundary point.
fn normal_coordinates(ob: &GraphObstacle, theta: f64, p: &DVector<f64>) -> Result<(f64, f64)> {
    let mut z = p[1];
    for _ in 0..60 {
        let e = ob.eval(&DVector::from_element(1, z))?;
        let (f, fp, fpp) = (e.f, e.grad[0], e.hess[(0, 0)]);
        let g = -(p[0] - f) * fp - (p[1] - z);
        let gp = fp * fp - (p[0] - f) * fpp + 1.0;
        let dz = g / gp;
        z -= dz;
        if dz.abs() < 1e-15 {
            break;
        }
    }
    let e = ob.eval(&DVector::from_element(1, z))?;
    let fp = e.grad[0];
    let d = (1.0 + fp * fp).sqrt();
    let dist = ((p[0] - e.f) - fp * (p[1] - z)) / d;
    let y = -theta * fp / d;
    Ok((dist, y))
}

/// Fits `j(s, y1) ~ 4 alpha s - 2 y1` over windows `[0, w] x [-w, 0]` for `w` in `windows`.
pub fn appendix_jacobian_leading(ob: &GraphObstacle, theta: f64, windows: &[f64], per_axis: usize) -> Result<LeadingFitReport> {
    if ob.m() != 1 {
        return Err(Error::WrongDimension { expected: 2, got: ob.dim });
    }
    let th = DVector::from_element(1, theta.signum());
    let rep = glancing_order(ob, &th, &DVector::zeros(1), 12)?;
    if rep.order != Order::Finite(2) {
        return Err(Error::WrongOrder {
            expected: "2".into(),
            found: format!("{:?}", rep.order),
        });
    }
    let alpha = rep.derivatives[2] / 2.0;
    let flow = ReflectedFlow::new(ob.clone(), &th)?;
    // Boundary parameter x2 with normal coordinate y1, by Newton on y(x2).
    let x2_of_y = |y: f64| -> Result<f64> {
        let mut x2 = -y / (2.0 * alpha.max(1e-12)).sqrt();
        for _ in 0..60 {
            let f = |x: f64| -> Result<f64> {
                let e = ob.eval(&DVector::from_element(1, x))?;
                let fp = e.grad[0];
                Ok(-th[0] * fp / (1.0 + fp * fp).sqrt())
            };
            let h = 1e-7;
            let v = f(x2)? - y;
            let d = (f(x2 + h)? - f(x2 - h)?) / (2.0 * h);
            let step = v / d;
            x2 -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        Ok(x2)
    };
    let map = |s: f64, y: f64| -> Result<(f64, f64)> {
        let x2 = x2_of_y(y)?;
        let p = flow.spatial_forward(s.max(0.0), &DVector::from_element(1, x2))?;
        normal_coordinates(ob, th[0], &p)
    };
    let jac = |s: f64, y: f64| -> Result<f64> {
        let h = 1e-6 * (s.abs() + y.abs()).max(1e-4);
        let (sp, sm, ds) = if s >= h { (s + h, s - h, 2.0 * h) } else { (s + h, s, h) };
        let (yp, ym, dy) = if y <= -h { (y + h, y - h, 2.0 * h) } else { (y, y - h, h) };
        let a = map(sp, y)?;
        let b = map(sm, y)?;
        let c = map(s, yp)?;
        let d = map(s, ym)?;
        let m = DMatrix::from_row_slice(2, 2, &[(a.0 - b.0) / ds, (c.0 - d.0) / dy, (a.1 - b.1) / ds, (c.1 - d.1) / dy]);
        Ok(m.determinant())
    };
    let mut out = LeadingFitReport { alpha, windows: vec![], residual_ratios: vec![] };
    let mut last_res: Option<f64> = None;
    for &w in windows {
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for i in 0..per_axis {
            for k in 0..per_axis {
                let s = w * (i as f64 + 0.5) / per_axis as f64;
                let y = -w * (k as f64 + 0.5) / per_axis as f64;
                rows.push([s, y]);
                rhs.push(jac(s, y)?);
            }
        }
        let a = DMatrix::from_fn(rows.len(), 2, |r, c| rows[r][c]);
        let b = DVector::from_vec(rhs);
        let sol = (a.transpose() * &a)
            .lu()
            .solve(&(a.transpose() * &b))
            .ok_or_else(|| Error::NonFinite { what: "leading-form fit".into() })?;
        let model = DVector::from_fn(rows.len(), |r, _| 4.0 * alpha * rows[r][0] - 2.0 * rows[r][1]);
        let res = (&b - model).amax();
        out.windows.push((w, sol[0], sol[1], res / (w * w)));
        if let Some(prev) = last_res {
            out.residual_ratios.push(res / prev);
        }
        last_res = Some(res);
    }
    Ok(out)
}

/// Exponent fits of `j(0, x2)` and `d j / ds` against `|x2|` near the grazing point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingReport {
    pub exponent_j0: f64,
    pub exponent_ds: f64,
    /// `j(0, x2) / |x2|^10` along a decreasing sequence of `|x2|`.
    pub flat_ratios: Vec<f64>,
}

fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.abs().ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    num / den
}

/// Log-log fits over `|x2|` in `[lo, hi]` on the illuminated side.
pub fn jacobian_scaling_near_grazing(flow: &ReflectedFlow, lo: f64, hi: f64, samples: usize) -> Result<ScalingReport> {
    if flow.m() != 1 {
        return Err(Error::WrongDimension { expected: 2, got: flow.ob.dim });
    }
    // Illuminated side: theta F'(x2) > 0.
    let probe = 0.5 * (lo + hi);
    let side = if flow.ob.eval(&DVector::from_element(1, probe))?.grad[0] * flow.theta()[0] > 0.0 {
        1.0
    } else {
        -1.0
    };
    let mut xs = Vec::new();
    let mut j0 = Vec::new();
    let mut ds = Vec::new();
    for i in 0..samples {
        let a = lo * (hi / lo).powf(i as f64 / (samples - 1).max(1) as f64);
        let x2 = side * a;
        xs.push(a);
        j0.push(flow.jacobian_analytic(0.0, &DVector::from_element(1, x2))?);
        let s1 = flow.jacobian_analytic(1.0, &DVector::from_element(1, x2))?;
        ds.push(s1 - j0.last().unwrap());
    }
    let flat_ratios = xs.iter().rev().zip(j0.iter().rev()).map(|(x, j)| j / x.powi(10)).collect();
    Ok(ScalingReport {
        exponent_j0: loglog_slope(&xs, &j0),
        exponent_ds: loglog_slope(&xs, &ds),
        flat_ratios,
    })
}

/// Samples `n` uniformly random points of the box `[lo, hi]`.
pub fn random_box_points(lo: &DVector<f64>, hi: &DVector<f64>, n: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| DVector::from_fn(lo.len(), |i, _| lo[i] + (hi[i] - lo[i]) * rng.random::<f64>()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grazing::build_grazing_chart;
    use crate::obstacle::Family;
    use approx::assert_relative_eq;

    fn parabola() -> GraphObstacle {
        GraphObstacle::new(Family::Poly2D { coeffs: vec![1.0] }, 2, 3.0).unwrap()
    }

    #[test]
    fn parabola_shadow_boundary() {
        let ob = parabola();
        let th = DVector::from_element(1, 1.0);
        let ch = build_grazing_chart(&ob, &th).unwrap();
        let sb = shadow_boundary(&ob, &ch, (-1.0, 1.0), 5).unwrap();
        assert_eq!(sb.feet.len(), 1);
        assert_relative_eq!(sb.feet[0][0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(sb.feet[0][1], 0.0, epsilon = 1e-14);
        let (p, t) = sb.point(0, 0.3, -0.2);
        assert_relative_eq!(p[1], 0.6, epsilon = 1e-14);
        assert_relative_eq!(t, 0.4, epsilon = 1e-14);
        assert!(in_shadow(&ob, &th, &DVector::from_vec(vec![0.9, 0.5])).unwrap());
        assert!(!in_shadow(&ob, &th, &DVector::from_vec(vec![1.1, 0.5])).unwrap());
        assert!(!in_shadow(&ob, &th, &DVector::from_vec(vec![0.9, -0.5])).unwrap());
    }

    #[test]
    fn nonresonance_matches_pairing_formula() {
        let ob = parabola();
        let flow = ReflectedFlow::new(ob, &DVector::from_element(1, 1.0)).unwrap();
        let chart = FlowChart::build(flow, 1.0, &DVector::from_element(1, -1.5), &DVector::from_element(1, 0.0), 61, 40).unwrap();
        let rep = nonresonance_scan(&chart, &[DVector::from_vec(vec![0.95, -0.5])], 3).unwrap();
        // At x2 = -0.5: xi_r = (1, 0), B = <xibar_r, theta> - 1 = -1, p = 2 k_i k_r B.
        assert_relative_eq!(rep.min_abs_p, 2.0, epsilon = 1e-10);
    }

    #[test]
    fn order_four_is_rejected_by_leading_fit() {
        let ob = GraphObstacle::new(Family::Poly2D { coeffs: vec![0.0, 0.0, 1.0] }, 2, 1.0).unwrap();
        let err = appendix_jacobian_leading(&ob, 1.0, &[1e-2], 4).unwrap_err();
        assert!(matches!(err, Error::WrongOrder { .. }));
    }

    #[test]
    fn leading_fit_on_parabola() {
        let rep = appendix_jacobian_leading(&parabola(), 1.0, &[1e-2, 5e-3], 6).unwrap();
        assert_relative_eq!(rep.alpha, 4.0, epsilon = 1e-12);
        let (_, cs, cy, _) = rep.windows[0];
        assert!((cs / 16.0 - 1.0).abs() < 0.02, "c_s = {cs}");
        assert!((cy / -2.0 - 1.0).abs() < 0.02, "c_y = {cy}");
        assert!(rep.residual_ratios[0] <= 0.6, "{:?}", rep.residual_ratios);
    }
}

//! Two-dimensional ray bookkeeping for the incoming and reflected fields:
//! ray labels, hit points, label inversion, the flow-aligned cutoff and the
//! closed-form linear geometric-optics field.
//!
//! Rays of both families are labelled by `(a, tau)`. The incoming ray with
//! label `(a, tau)` is the line `x1 = a`, `x2 = x2*(a) + theta (t - tau)`,
//! where `x2*(a)` is the illuminated root of `F(x2) = a` and `tau` the hit
//! time; rays that miss the obstacle use `x2* = 0`. The reflected ray with the
//! same label leaves the foot `(a, x2*(a))` at time `tau`. Ray parameters are
//! `s` with `dt/ds = 2`.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chart::{FlowChart, InvertOptions};
use crate::error::{Error, Result};
use crate::obstacle::GraphObstacle;
use crate::phase::ReflectedFlow;
use crate::profile::{single_mode, Modes, ProfileGrid};

/// `C^infinity` step: 0 for `v <= 0`, 1 for `v >= 1`.
pub fn smooth_step(v: f64) -> f64 {
    if v <= 0.0 {
        return 0.0;
    }
    if v >= 1.0 {
        return 1.0;
    }
    let p = (-1.0 / v).exp();
    let q = (-1.0 / (1.0 - v)).exp();
    p / (p + q)
}

/// Cutoff `chi(z / mu)`: 0 for `z <= mu`, 1 for `z >= 2 mu`.
pub fn cutoff(z: f64, mu: f64) -> f64 {
    if mu <= 0.0 {
        return 1.0;
    }
    smooth_step(z / mu - 1.0)
}

/// Labels of a reflected ray through a spatial point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReflectedSpot {
    pub s: f64,
    /// Foot parameter `x2'`.
    pub foot: f64,
    pub a: f64,
}

/// Ray geometry for a 2D obstacle `x1 = F(x2)` with apex at `x2 = 0` and the
/// incoming phase `-t + theta x2`, `theta = +-1`.
#[derive(Debug, Clone)]
pub struct RayGeometry {
    pub flow: ReflectedFlow,
    pub chart: FlowChart,
    pub theta: f64,
    pub t_max: f64,
    pub apex: f64,
    /// Largest `|x2|` used for roots.
    pub reach: f64,
}

impl RayGeometry {
    /// Builds the geometry with a reflected chart over feet `x2' in [-theta foot_reach, 0]`.
    pub fn new(ob: GraphObstacle, theta: f64, t_max: f64, foot_reach: f64, chart_rays: usize, chart_steps: usize) -> Result<Self> {
        if ob.m() != 1 {
            return Err(Error::WrongDimension { expected: 2, got: ob.dim });
        }
        if theta.abs() != 1.0 {
            return Err(Error::Unsupported(format!("2D direction must be +-1, got {theta}")));
        }
        let th = DVector::from_element(1, theta);
        let flow = ReflectedFlow::new(ob.clone(), &th)?;
        let (lo, hi) = if theta > 0.0 { (-foot_reach, 0.0) } else { (0.0, foot_reach) };
        let chart = FlowChart::build(
            flow.clone(),
            t_max.max(0.5),
            &DVector::from_element(1, lo),
            &DVector::from_element(1, hi),
            chart_rays,
            chart_steps,
        )?;
        let apex = ob.value(&DVector::zeros(1))?;
        Ok(RayGeometry { flow, chart, theta, t_max, apex, reach: 0.999 * ob.r })
    }

    pub fn f(&self, x2: f64) -> f64 {
        self.flow.ob.value(&DVector::from_element(1, x2)).unwrap_or(f64::NAN)
    }

    pub fn fp(&self, x2: f64) -> f64 {
        self.flow
            .ob
            .eval(&DVector::from_element(1, x2))
            .map(|e| e.grad[0])
            .unwrap_or(f64::NAN)
    }

    /// `z` in `[0, reach]` with `F(-theta z) = level`, if bracketed.
    fn root_depth(&self, level: f64) -> Option<f64> {
        let g = |z: f64| self.f(-self.theta * z) - level;
        let (mut lo, mut hi) = (0.0, self.reach);
        if g(lo) < 0.0 || g(hi) > 0.0 {
            return None;
        }
        for _ in 0..100 {
            let m = 0.5 * (lo + hi);
            if g(m) > 0.0 {
                lo = m;
            } else {
                hi = m;
            }
        }
        Some(0.5 * (lo + hi))
    }

    /// Illuminated foot `x2*(a)`, or `None` if the line `x1 = a` misses the obstacle.
    pub fn hit_x2(&self, a: f64) -> Option<f64> {
        if a >= self.apex {
            return None;
        }
        self.root_depth(a).map(|z| -self.theta * z)
    }

    /// Foot used in the labels: `x2*(a)` for hitting rays, `0` otherwise.
    pub fn label_foot(&self, a: f64) -> f64 {
        self.hit_x2(a).unwrap_or(0.0)
    }

    /// Distance-like coordinate to the grazing ray: `|x2*(a)|` for hitting
    /// rays and the mirrored depth for missing ones.
    pub fn grazing_coord(&self, a: f64) -> f64 {
        if a < self.apex {
            self.root_depth(a).unwrap_or(f64::INFINITY)
        } else {
            self.root_depth(2.0 * self.apex - a).unwrap_or(f64::INFINITY)
        }
    }

    /// Flow-aligned cutoff of the ray family with label `a`.
    pub fn chi(&self, a: f64, mu: f64) -> f64 {
        cutoff(self.grazing_coord(a), mu)
    }

    /// Point `(x1, x2, t)` on the incoming ray `(a, tau)` at parameter `s` from `t = -T`.
    pub fn incoming_point(&self, a: f64, tau: f64, s: f64) -> [f64; 3] {
        let t = -self.t_max + 2.0 * s;
        [a, self.label_foot(a) + self.theta * (t - tau), t]
    }

    /// Largest ray parameter of the incoming ray in the window (hit or `t = T`).
    pub fn incoming_s_end(&self, a: f64, tau: f64) -> f64 {
        let t_end = if self.hit_x2(a).is_some() { tau.min(self.t_max) } else { self.t_max };
        (0.5 * (t_end + self.t_max)).max(0.0)
    }

    /// Incoming labels and ray parameter of `(x, t)`, or `None` past the hit.
    pub fn incoming_labels(&self, x: &[f64; 2], t: f64) -> Option<(f64, f64, f64)> {
        let a = x[0];
        let foot = self.hit_x2(a);
        let tau = t - self.theta * (x[1] - foot.unwrap_or(0.0));
        if foot.is_some() && t > tau + 1e-14 {
            return None;
        }
        if let Some(z) = foot {
            if a < self.f(z) - 1e-12 {
                return None;
            }
        }
        Some((a, tau, 0.5 * (t + self.t_max)))
    }

    /// Spatial point on the reflected ray with foot `x2'` at parameter `s`.
    pub fn reflected_point(&self, foot: f64, s: f64) -> Result<[f64; 2]> {
        let p = self.flow.spatial_forward(s, &DVector::from_element(1, foot))?;
        Ok([p[0], p[1]])
    }

    /// Reflected labels of a spatial point (time independent); `None` outside the image.
    pub fn reflected_spot(&self, x: &[f64; 2]) -> Result<Option<ReflectedSpot>> {
        let xv = DVector::from_vec(x.to_vec());
        match self.chart.invert(&xv, 0.0, InvertOptions::default()) {
            Ok(p) => {
                let foot = p.x[0];
                Ok(Some(ReflectedSpot { s: p.s, foot, a: self.f(foot) }))
            }
            Err(Error::NotInImage) | Err(Error::NearShadowBoundary { .. }) | Err(Error::OutOfChart(_)) | Err(Error::ShadowSide { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Jacobian `j(s, x2')` of the spatial reflected map.
    pub fn j(&self, s: f64, foot: f64) -> Result<f64> {
        self.flow.jacobian_2d_closed(s, foot)
    }

    /// Reflected spacetime covector `(xi1, xi2, -1)` of the ray with foot `x2'`.
    pub fn dphi_r(&self, foot: f64) -> Result<[f64; 3]> {
        let c = self.flow.covector(&DVector::from_element(1, foot))?;
        Ok([c.xi1, c.xibar[0], -1.0])
    }

    pub fn dphi_i(&self) -> [f64; 3] {
        [0.0, self.theta, -1.0]
    }

    pub fn phi_i(&self, x: &[f64; 2], t: f64) -> f64 {
        -t + self.theta * x[1]
    }

    /// `phi_r = -t' + theta x2'`.
    pub fn phi_r_labels(&self, foot: f64, tp: f64) -> f64 {
        -tp + self.theta * foot
    }

    /// `|dx2'/da| = 1 / |F'(x2')|` at a foot.
    pub fn dfoot_da(&self, foot: f64) -> f64 {
        1.0 / self.fp(foot).abs()
    }

    /// Whether `(x1, x2)` lies in the closed exterior `x1 >= F(x2)`.
    pub fn exterior(&self, x: &[f64; 2]) -> bool {
        x[0] >= self.f(x[1])
    }
}

/// Initial oscillation data `g(x, theta) = A b(x) (cos(k theta + psi))` with a
/// smooth compactly supported elliptic bump `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpData {
    pub center: [f64; 2],
    pub radii: [f64; 2],
    pub amplitude: f64,
    pub mode: usize,
    pub phase: f64,
}

impl BumpData {
    pub fn bump(&self, x: &[f64; 2]) -> f64 {
        let u = (x[0] - self.center[0]) / self.radii[0];
        let v = (x[1] - self.center[1]) / self.radii[1];
        let r2 = u * u + v * v;
        if r2 >= 1.0 {
            0.0
        } else {
            (1.0 - 1.0 / (1.0 - r2)).exp()
        }
    }

    pub fn modes(&self, x: &[f64; 2], n_modes: usize) -> Modes {
        let b = self.amplitude * self.bump(x);
        let (s, c) = self.phase.sin_cos();
        single_mode(n_modes, self.mode, -b * s, b * c)
    }
}

/// Closed-form linear profiles: incoming `W_i` is constant on rays and the
/// reflected `W_r = -W_i(foot) sqrt(j(0) / j(s))`, both multiplied by the cutoff.
#[derive(Debug, Clone)]
pub struct LinearOptics<'a> {
    pub geo: &'a RayGeometry,
    pub data: BumpData,
    pub n_modes: usize,
    pub mu: f64,
}

/// Profiles and phases at one spacetime point.
#[derive(Debug, Clone, PartialEq)]
pub struct OpticsSample {
    pub w_i: Modes,
    pub w_r: Modes,
    pub phi_i: f64,
    pub phi_r: f64,
    pub dphi_i: [f64; 3],
    pub dphi_r: [f64; 3],
    /// Whether a reflected ray passes through the point.
    pub reflected: bool,
}

impl LinearOptics<'_> {
    fn zero(&self) -> Modes {
        vec![Complex64::new(0.0, 0.0); self.n_modes]
    }

    /// Incoming profile at `(x, t)`.
    pub fn w_i(&self, x: &[f64; 2], t: f64) -> Modes {
        match self.geo.incoming_labels(x, t) {
            Some((a, _, _)) => {
                let x0 = [a, x[1] - self.geo.theta * (t + self.geo.t_max)];
                let chi = self.geo.chi(a, self.mu);
                self.data.modes(&x0, self.n_modes).into_iter().map(|c| c * chi).collect()
            }
            None => self.zero(),
        }
    }

    /// Reflected profile given the spatial labels of `x`.
    pub fn w_r_at(&self, spot: &ReflectedSpot, t: f64) -> Result<Modes> {
        let tp = t - 2.0 * spot.s;
        if tp < -self.geo.t_max {
            return Ok(self.zero());
        }
        let chi = self.geo.chi(spot.a, self.mu);
        if chi == 0.0 {
            return Ok(self.zero());
        }
        let x0 = [spot.a, spot.foot - self.geo.theta * (tp + self.geo.t_max)];
        let ratio = (self.geo.j(0.0, spot.foot)? / self.geo.j(spot.s, spot.foot)?).sqrt();
        Ok(self
            .data
            .modes(&x0, self.n_modes)
            .into_iter()
            .map(|c| -c * chi * ratio)
            .collect())
    }

    /// Both profiles and phases at `(x, t)`.
    pub fn sample(&self, x: &[f64; 2], t: f64) -> Result<OpticsSample> {
        let spot = self.geo.reflected_spot(x)?;
        self.sample_with(x, t, spot)
    }

    pub fn sample_with(&self, x: &[f64; 2], t: f64, spot: Option<ReflectedSpot>) -> Result<OpticsSample> {
        let w_i = self.w_i(x, t);
        let (w_r, phi_r, dphi_r, reflected) = match spot {
            Some(sp) => (
                self.w_r_at(&sp, t)?,
                self.geo.phi_r_labels(sp.foot, t - 2.0 * sp.s),
                self.geo.dphi_r(sp.foot)?,
                true,
            ),
            None => (self.zero(), 0.0, [0.0; 3], false),
        };
        Ok(OpticsSample { w_i, w_r, phi_i: self.geo.phi_i(x, t), phi_r, dphi_i: self.geo.dphi_i(), dphi_r, reflected })
    }
}

/// Multiplies every ray of a profile grid by the cutoff of its label.
pub fn truncate_along_flow(grid: &ProfileGrid, geo: &RayGeometry, mu: f64) -> ProfileGrid {
    let mut out = grid.clone();
    let nt = grid.labels_tau.len();
    for (ri, ray) in out.rays.iter_mut().enumerate() {
        let chi = geo.chi(grid.labels_a[ri / nt], mu);
        ray.w.iter_mut().for_each(|c| *c *= chi);
    }
    out
}

/// Cutoff of the incoming family at a spacetime point (zero past the hit).
pub fn chi_incoming_at(geo: &RayGeometry, x: &[f64; 2], t: f64, mu: f64) -> Option<f64> {
    geo.incoming_labels(x, t).map(|(a, _, _)| geo.chi(a, mu))
}

/// Cutoff of the reflected family at a spatial point.
pub fn chi_reflected_at(geo: &RayGeometry, x: &[f64; 2], mu: f64) -> Result<Option<f64>> {
    Ok(geo.reflected_spot(x)?.map(|sp| geo.chi(sp.a, mu)))
}

/// Largest central-difference derivative of the pointwise cutoffs along
/// `T_phi` on the given ray samples `(a, tau, s)` of both families.
pub fn cutoff_transport_derivative(geo: &RayGeometry, mu: f64, rays: &[(f64, f64, f64)], h: f64) -> Result<f64> {
    let mut worst = 0.0f64;
    for &(a, tau, s) in rays {
        let p = |s: f64| geo.incoming_point(a, tau, s);
        let (pp, pm) = (p(s + h), p(s - h));
        if let (Some(cp), Some(cm)) = (
            chi_incoming_at(geo, &[pp[0], pp[1]], pp[2], mu),
            chi_incoming_at(geo, &[pm[0], pm[1]], pm[2], mu),
        ) {
            worst = worst.max(((cp - cm) / (2.0 * h)).abs());
        }
        if let Some(foot) = geo.hit_x2(a) {
            if s > h {
                let xp = geo.reflected_point(foot, s + h)?;
                let xm = geo.reflected_point(foot, s - h)?;
                if let (Some(cp), Some(cm)) = (chi_reflected_at(geo, &xp, mu)?, chi_reflected_at(geo, &xm, mu)?) {
                    worst = worst.max(((cp - cm) / (2.0 * h)).abs());
                }
            }
        }
    }
    Ok(worst)
}

/// Squared L2 gaps `||W_mu - W||^2` of the linear incoming and reflected
/// profiles, integrated over the cut band of labels with `na x ntau` nodes.
pub fn truncation_gap_sq(geo: &RayGeometry, data: &BumpData, mu: f64, na: usize, ntau: usize) -> Result<(f64, f64)> {
    let edge = geo.f(-geo.theta * 2.0 * mu);
    let (a0, a1) = (edge, 2.0 * geo.apex - edge);
    let (t0, t1) = (-geo.t_max - 1.0, geo.t_max + 1.0);
    let da = (a1 - a0) / na as f64;
    let dt = (t1 - t0) / ntau as f64;
    let mut gap_i = 0.0;
    let mut gap_r = 0.0;
    for ia in 0..na {
        let a = a0 + (ia as f64 + 0.5) * da;
        let w = (1.0 - geo.chi(a, mu)).powi(2);
        if w == 0.0 {
            continue;
        }
        for it in 0..ntau {
            let tau = t0 + (it as f64 + 0.5) * dt;
            let s_end = geo.incoming_s_end(a, tau);
            if s_end <= 0.0 {
                continue;
            }
            let p0 = geo.incoming_point(a, tau, 0.0);
            if !geo.exterior(&[p0[0], p0[1]]) {
                continue;
            }
            let g2: f64 = 2.0 * data.modes(&[p0[0], p0[1]], data.mode).iter().map(|c| c.norm_sqr()).sum::<f64>();
            gap_i += w * g2 * 2.0 * s_end * da * dt;
            if let Some(foot) = geo.hit_x2(a) {
                if tau >= -geo.t_max && tau <= geo.t_max {
                    // |W_r|^2 j / 2 = |g|^2 j(0) / 2 along the ray.
                    let factor = 0.5 * geo.j(0.0, foot)? * geo.dfoot_da(foot);
                    gap_r += w * g2 * factor * (geo.t_max - tau) * da * dt;
                }
            }
        }
    }
    Ok((gap_i, gap_r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::obstacle::Family;
    use approx::assert_relative_eq;

    fn parabola() -> RayGeometry {
        let ob = GraphObstacle::new(Family::Poly2D { coeffs: vec![1.0] }, 2, 2.0).unwrap();
        RayGeometry::new(ob, 1.0, 1.0, 1.2, 121, 60).unwrap()
    }

    #[test]
    fn hit_roots_and_grazing_coordinate() {
        let g = parabola();
        assert_relative_eq!(g.hit_x2(0.75).unwrap(), -0.5, epsilon = 1e-12);
        assert!(g.hit_x2(1.2).is_none());
        assert_relative_eq!(g.grazing_coord(0.96), 0.2, epsilon = 1e-12);
        assert_relative_eq!(g.grazing_coord(1.04), 0.2, epsilon = 1e-12);
    }

    #[test]
    fn cutoff_is_smooth_step() {
        assert_eq!(cutoff(0.05, 0.1), 0.0);
        assert_eq!(cutoff(0.25, 0.1), 1.0);
        assert_relative_eq!(cutoff(0.15, 0.1), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn reflected_labels_round_trip() {
        let g = parabola();
        let x = g.reflected_point(-0.4, 0.3).unwrap();
        let spot = g.reflected_spot(&x).unwrap().unwrap();
        assert_relative_eq!(spot.foot, -0.4, epsilon = 1e-10);
        assert_relative_eq!(spot.s, 0.3, epsilon = 1e-10);
        assert_relative_eq!(spot.a, 0.84, epsilon = 1e-10);
    }

    #[test]
    fn boundary_values_cancel() {
        let g = parabola();
        let data = BumpData { center: [0.8, -1.3], radii: [0.35, 0.3], amplitude: 1.0, mode: 1, phase: 0.0 };
        let lin = LinearOptics { geo: &g, data, n_modes: 2, mu: 0.1 };
        let foot = -0.45;
        let x = [g.f(foot), foot];
        for t in [-0.4, -0.3, -0.2] {
            let s = lin.sample(&x, t).unwrap();
            assert!(s.reflected);
            assert!((s.w_i[0] + s.w_r[0]).norm() < 1e-9);
        }
    }

    #[test]
    fn cutoff_commutes_with_transport() {
        let g = parabola();
        let rays = [(0.9, -0.2, 0.3), (0.97, 0.0, 0.2), (1.03, -0.1, 0.5), (0.985, 0.1, 0.4)];
        assert!(cutoff_transport_derivative(&g, 0.1, &rays, 1e-4).unwrap() < 1e-6);
    }

    #[test]
    fn truncation_gap_vanishes_with_mu() {
        let g = parabola();
        let data = BumpData { center: [1.0, -1.3], radii: [0.35, 0.3], amplitude: 1.0, mode: 1, phase: 0.0 };
        let gaps: Vec<f64> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&mu| {
                let (i, r) = truncation_gap_sq(&g, &data, mu, 400, 400).unwrap();
                i + r
            })
            .collect();
        assert!(gaps[0] > 0.0);
        assert!(gaps[1] <= 0.5 * gaps[0] && gaps[2] <= 0.5 * gaps[1], "{gaps:?}");
    }
}

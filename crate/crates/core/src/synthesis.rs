//! Assembly of the asymptotic field
//! `u + eps U_r(phi_r / eps) + eps U_i(phi_i / eps) + eps^2 U_nc(phi_r / eps, phi_i / eps)`
//! and the residual scan that applies the wave operator to it by fourth-order
//! finite differences.
//!
//! Points and gradients are ordered `(x1, x2, t)` and the operator is
//! `box = d_x1^2 + d_x2^2 - d_t^2`, so the residual is `box u_a - f(m, u_a, grad u_a)`.

use std::f64::consts::TAU;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corrector::{corrector_coefficients, symbol, CorrectorTable};
use crate::diagnostics::in_shadow;
use crate::error::{Error, Result};
use crate::picard::PicardResult;
use crate::profile::{eval_modes, eval_modes_dtheta, theta_primitive_modes, Modes};
use crate::rays::{LinearOptics, RayGeometry, ReflectedSpot};
use crate::source::{decompose_source, split_grid, LocalState, Source, SourceSpec};

/// Slow components of the field at one spacetime point.
#[derive(Debug, Clone, PartialEq)]
pub struct Components {
    pub u: f64,
    pub grad_u: [f64; 3],
    pub w_i: Modes,
    pub w_r: Modes,
    /// Mean-zero theta primitives of `w_i` and `w_r`.
    pub u_i: Modes,
    pub u_r: Modes,
    pub phi_i: f64,
    pub phi_r: f64,
    pub dphi_i: [f64; 3],
    pub dphi_r: [f64; 3],
    pub corrector: Option<CorrectorTable>,
    /// Squared theta-averaged norm of the noncharacteristic source part.
    pub source_nc_sq: f64,
}

impl Components {
    #[allow(clippy::too_many_arguments)]
    pub fn new(u: f64, grad_u: [f64; 3], w_i: Modes, w_r: Modes, phi_i: f64, phi_r: f64, dphi_i: [f64; 3], dphi_r: [f64; 3]) -> Self {
        let u_i = theta_primitive_modes(&w_i);
        let u_r = theta_primitive_modes(&w_r);
        Components { u, grad_u, w_i, w_r, u_i, u_r, phi_i, phi_r, dphi_i, dphi_r, corrector: None, source_nc_sq: 0.0 }
    }

    /// Mean field only.
    pub fn mean_only(u: f64, grad_u: [f64; 3], n_modes: usize) -> Self {
        let z = vec![Complex64::new(0.0, 0.0); n_modes];
        Components::new(u, grad_u, z.clone(), z, 0.0, 0.0, [0.0; 3], [0.0; 3])
    }

    pub fn has_profiles(&self) -> bool {
        self.w_i.iter().chain(&self.w_r).any(|c| c.norm_sqr() > 0.0)
    }

    /// Fast variables `(phi_r / eps + shift_r, phi_i / eps + shift_i)` reduced mod `2 pi`.
    pub fn thetas(&self, eps: f64, shift: (f64, f64)) -> (f64, f64) {
        ((self.phi_r / eps + shift.0).rem_euclid(TAU), (self.phi_i / eps + shift.1).rem_euclid(TAU))
    }

    /// Assembled value.
    pub fn value(&self, eps: f64, shift: (f64, f64)) -> f64 {
        let (tr, ti) = self.thetas(eps, shift);
        let mut v = self.u + eps * (eval_modes(&self.u_r, tr) + eval_modes(&self.u_i, ti));
        if let Some(c) = &self.corrector {
            v += eps * eps * c.eval(tr, ti);
        }
        v
    }

    /// Leading-order gradient `grad u + W_r(theta_r) dphi_r + W_i(theta_i) dphi_i`.
    pub fn gradient(&self, eps: f64, shift: (f64, f64)) -> [f64; 3] {
        let (tr, ti) = self.thetas(eps, shift);
        let (wr, wi) = (eval_modes(&self.w_r, tr), eval_modes(&self.w_i, ti));
        std::array::from_fn(|k| self.grad_u[k] + wr * self.dphi_r[k] + wi * self.dphi_i[k])
    }

    /// `eps^2 U_nc` at the point.
    pub fn corrector_value(&self, eps: f64) -> f64 {
        let (tr, ti) = self.thetas(eps, (0.0, 0.0));
        self.corrector.as_ref().map(|c| eps * eps * c.eval(tr, ti)).unwrap_or(0.0)
    }

    /// Largest `|p(dphi_k) d_theta^2 U_k|` over both families, sampled in theta.
    pub fn eikonal_coefficient(&self) -> f64 {
        let mut worst = 0.0f64;
        for (w, d) in [(&self.w_i, &self.dphi_i), (&self.w_r, &self.dphi_r)] {
            if w.iter().all(|c| c.norm_sqr() == 0.0) {
                continue;
            }
            let sup = (0..32).map(|k| eval_modes_dtheta(w, TAU * k as f64 / 32.0).abs()).fold(0.0, f64::max);
            worst = worst.max(symbol(d).abs() * sup);
        }
        worst
    }
}

/// Anything that produces the slow components of an asymptotic field.
pub trait FieldModel: Sync {
    /// Components at `(x, t)`, or `None` inside the obstacle.
    fn components(&self, x: &[f64; 2], t: f64) -> Result<Option<Components>>;
    fn n_modes(&self) -> usize;
}

/// Settings of the noncharacteristic corrector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectorSettings {
    pub enabled: bool,
    /// Theta nodes per direction of the source splitting.
    pub nq: usize,
    pub m_cap: usize,
    /// Smallest admissible `|p(alpha . dphi)|`.
    pub guard: f64,
}

impl Default for CorrectorSettings {
    fn default() -> Self {
        CorrectorSettings { enabled: true, nq: 16, m_cap: 4, guard: 1e-6 }
    }
}

fn attach_source(c: &mut Components, m: [f64; 3], source: &SourceSpec, cs: &CorrectorSettings) -> Result<()> {
    if source.is_zero() || !c.has_profiles() {
        return Ok(());
    }
    let st = LocalState { m, u: c.u, grad_u: c.grad_u, w_r: &c.w_r, w_i: &c.w_i, dphi_r: c.dphi_r, dphi_i: c.dphi_i };
    let dec = decompose_source(source, &st, cs.nq, c.w_i.len(), cs.m_cap);
    c.source_nc_sq = dec.nc_norm_sq();
    if cs.enabled && c.dphi_r != [0.0; 3] {
        c.corrector = Some(corrector_coefficients(&dec, &c.dphi_r, &c.dphi_i, cs.guard)?);
    }
    Ok(())
}

/// Closed-form linear profiles with zero mean field, optionally composed with
/// a source to produce the noncharacteristic corrector.
#[derive(Debug, Clone)]
pub struct LinearModel<'a> {
    pub optics: LinearOptics<'a>,
    pub source: SourceSpec,
    pub corrector: CorrectorSettings,
}

impl LinearModel<'_> {
    /// Components on the boundary point with foot `x2'` at time `t`.
    pub fn boundary_components(&self, foot: f64, t: f64) -> Result<Components> {
        let geo = self.optics.geo;
        let a = geo.f(foot);
        let x = [a, foot];
        let s = self.optics.sample_with(&x, t, Some(ReflectedSpot { s: 0.0, foot, a }))?;
        let mut c = Components::new(0.0, [0.0; 3], s.w_i, s.w_r, s.phi_i, s.phi_r, s.dphi_i, s.dphi_r);
        attach_source(&mut c, [x[0], x[1], t], &self.source, &self.corrector)?;
        Ok(c)
    }
}

impl FieldModel for LinearModel<'_> {
    fn components(&self, x: &[f64; 2], t: f64) -> Result<Option<Components>> {
        if !self.optics.geo.exterior(x) {
            return Ok(None);
        }
        let s = self.optics.sample(x, t)?;
        let mut c = Components::new(0.0, [0.0; 3], s.w_i, s.w_r, s.phi_i, s.phi_r, s.dphi_i, s.dphi_r);
        attach_source(&mut c, [x[0], x[1], t], &self.source, &self.corrector)?;
        Ok(Some(c))
    }

    fn n_modes(&self) -> usize {
        self.optics.n_modes
    }
}

/// Field built from a Picard result: interpolated mean field and profile grids.
#[derive(Debug, Clone)]
pub struct PicardModel<'a> {
    pub geo: &'a RayGeometry,
    pub result: &'a PicardResult,
    pub source: SourceSpec,
    pub corrector: CorrectorSettings,
}

impl FieldModel for PicardModel<'_> {
    fn components(&self, x: &[f64; 2], t: f64) -> Result<Option<Components>> {
        let g = self.geo;
        if !g.exterior(x) {
            return Ok(None);
        }
        let mean = &self.result.mean;
        let (hx, hz) = (mean.grid.hx, mean.grid.hz);
        let xz = [x[0] - g.f(x[1]), x[1]];
        let (u, ut) = mean.sample(xz[0], xz[1], t);
        let ux = (mean.sample(xz[0] + hx, xz[1], t).0 - mean.sample(xz[0] - hx, xz[1], t).0) / (2.0 * hx);
        let uz = (mean.sample(xz[0], xz[1] + hz, t).0 - mean.sample(xz[0], xz[1] - hz, t).0) / (2.0 * hz);
        let grad_u = [ux, uz - g.fp(x[1]) * ux, ut];
        let n = self.n_modes();
        let mut wi = vec![Complex64::new(0.0, 0.0); n];
        let mut wr = wi.clone();
        if let Some((a, tau, s)) = g.incoming_labels(x, t) {
            self.result.w_i.interp(a, tau, s, &mut wi);
        }
        let (mut phi_r, mut dphi_r) = (0.0, [0.0; 3]);
        if let Some(sp) = g.reflected_spot(x)? {
            let tp = t - 2.0 * sp.s;
            phi_r = g.phi_r_labels(sp.foot, tp);
            dphi_r = g.dphi_r(sp.foot)?;
            if tp >= -g.t_max {
                self.result.w_r.interp(sp.a, tp, sp.s, &mut wr);
            }
        }
        let mut c = Components::new(u, grad_u, wi, wr, g.phi_i(x, t), phi_r, g.dphi_i(), dphi_r);
        attach_source(&mut c, [x[0], x[1], t], &self.source, &self.corrector)?;
        Ok(Some(c))
    }

    fn n_modes(&self) -> usize {
        self.result.w_i.modes
    }
}

/// One assembled sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub m: [f64; 3],
    pub value: f64,
    pub gradient: [f64; 3],
    pub inside: bool,
}

/// Evaluates the assembled field and its leading-order gradient at `points`.
pub fn assemble_field(model: &dyn FieldModel, eps: f64, points: &[[f64; 3]]) -> Result<Vec<FieldSample>> {
    points
        .par_iter()
        .map(|m| {
            Ok(match model.components(&[m[0], m[1]], m[2])? {
                Some(c) => FieldSample { m: *m, value: c.value(eps, (0.0, 0.0)), gradient: c.gradient(eps, (0.0, 0.0)), inside: false },
                None => FieldSample { m: *m, value: 0.0, gradient: [0.0; 3], inside: true },
            })
        })
        .collect()
}

/// Which part of spacetime a residual sample lies in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionClass {
    /// Reached by incoming rays only.
    Illuminated,
    /// Reached by reflected rays issued inside the time window.
    Overlap,
    /// Behind the obstacle.
    Shadow,
}

/// Fixed random sample points for residual scans, shared across `eps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRegion {
    pub points: Vec<[f64; 3]>,
    pub class: Vec<RegionClass>,
    /// Volume represented by each point (box volume over candidate count).
    pub weight: f64,
    /// Largest stencil step the region admits.
    pub h_max: f64,
}

/// Options of [`SampleRegion::build`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionSettings {
    /// `[x1_lo, x1_hi, x2_lo, x2_hi, t_lo, t_hi]`.
    pub bbox: [f64; 6],
    pub candidates: usize,
    pub seed: u64,
    /// Smallest admissible grazing coordinate of the labels through a point.
    pub label_margin: f64,
    /// Minimal `x1 - F(x2)` in units of `h_max`.
    pub wall: f64,
    pub h_max: f64,
}

impl SampleRegion {
    pub fn build(geo: &RayGeometry, rs: &RegionSettings) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(rs.seed);
        let b = rs.bbox;
        let cands: Vec<[f64; 3]> = (0..rs.candidates)
            .map(|_| [rng.random_range(b[0]..b[1]), rng.random_range(b[2]..b[3]), rng.random_range(b[4]..b[5])])
            .collect();
        let theta = DVector::from_element(1, geo.theta);
        let h = rs.h_max;
        let kept: Vec<Option<([f64; 3], RegionClass)>> = cands
            .par_iter()
            .map(|m| {
                let x = [m[0], m[1]];
                if x[0] - geo.f(x[1]) < rs.wall * h {
                    return Ok(None);
                }
                for k in 0..2 {
                    for d in [-2.0, -1.0, 1.0, 2.0] {
                        let mut y = x;
                        y[k] += d * h;
                        if y[0] - geo.f(y[1]) < 0.5 * rs.wall * h {
                            return Ok(None);
                        }
                    }
                }
                if geo.grazing_coord(x[0]) < rs.label_margin {
                    return Ok(None);
                }
                let spot = geo.reflected_spot(&x)?;
                if let Some(sp) = spot {
                    if geo.grazing_coord(sp.a) < rs.label_margin {
                        return Ok(None);
                    }
                }
                let class = if in_shadow(&geo.flow.ob, &theta, &DVector::from_vec(vec![x[0], x[1]]))? {
                    RegionClass::Shadow
                } else if spot.is_some_and(|sp| m[2] - 2.0 * sp.s >= -geo.t_max) {
                    RegionClass::Overlap
                } else {
                    RegionClass::Illuminated
                };
                Ok(Some((*m, class)))
            })
            .collect::<Result<Vec<_>>>()?;
        let vol = (b[1] - b[0]) * (b[3] - b[2]) * (b[5] - b[4]);
        let (points, class) = kept.into_iter().flatten().unzip();
        Ok(SampleRegion { points, class, weight: vol / rs.candidates as f64, h_max: h })
    }
}

/// Settings of [`residual_scan`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualSettings {
    /// Stencil step in units of `eps`; at most `0.1`.
    pub h_ratio: f64,
    /// Number of phase shifts per direction for the splitting of the residual;
    /// `0` evaluates the unshifted residual only.
    pub shifts: usize,
    pub n_modes: usize,
    pub m_cap: usize,
}

impl Default for ResidualSettings {
    fn default() -> Self {
        ResidualSettings { h_ratio: 0.1, shifts: 0, n_modes: 4, m_cap: 4 }
    }
}

/// L2 norms of the residual parts over the phase-shift torus.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ResidualParts {
    pub mean: f64,
    pub char_r: f64,
    pub char_i: f64,
    pub nc: f64,
    pub tail: f64,
    /// L2 norm of the noncharacteristic source part `f*_nc`.
    pub source_nc: f64,
}

/// Output of [`residual_scan`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub eps: f64,
    pub h: f64,
    pub samples: usize,
    pub illuminated: f64,
    pub overlap: f64,
    pub shadow: f64,
    pub total: f64,
    /// Largest `|p(dphi) d_theta^2 U|` seen.
    pub eikonal: f64,
    /// Largest gap between the finite-difference and the analytic phase gradients.
    pub phase_gradient_gap: f64,
    pub parts: Option<ResidualParts>,
}

const OFFSETS: [f64; 4] = [1.0, -1.0, 2.0, -2.0];

fn stencil(m: &[f64; 3], h: f64) -> [[f64; 3]; 13] {
    let mut out = [*m; 13];
    for k in 0..3 {
        for (q, d) in OFFSETS.iter().enumerate() {
            out[1 + 4 * k + q][k] += d * h;
        }
    }
    out
}

/// Fourth-order `box v` and gradient from the 13 stencil values.
fn apply_stencil(v: &[f64; 13], h: f64) -> (f64, [f64; 3]) {
    let mut second = [0.0; 3];
    let mut first = [0.0; 3];
    for k in 0..3 {
        let (p1, m1, p2, m2) = (v[1 + 4 * k], v[2 + 4 * k], v[3 + 4 * k], v[4 + 4 * k]);
        second[k] = (-p2 + 16.0 * p1 - 30.0 * v[0] + 16.0 * m1 - m2) / (12.0 * h * h);
        first[k] = (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * h);
    }
    (second[0] + second[1] - second[2], first)
}

struct PointResult {
    class: RegionClass,
    r0: f64,
    parts: [f64; 5],
    source_nc: f64,
    eikonal: f64,
    phase_gap: f64,
}

/// Applies `box` to the assembled field on the region and subtracts the composed source.
pub fn residual_scan(model: &dyn FieldModel, source: &SourceSpec, region: &SampleRegion, eps: f64, rs: &ResidualSettings) -> Result<ResidualReport> {
    let h = rs.h_ratio * eps;
    if rs.h_ratio > 0.1 + 1e-12 {
        return Err(Error::StencilUnresolved { h, limit: 0.1 * eps });
    }
    if h > region.h_max * (1.0 + 1e-12) {
        return Err(Error::StencilUnresolved { h, limit: region.h_max });
    }
    let nq = rs.shifts;
    let results: Vec<PointResult> = region
        .points
        .par_iter()
        .zip(&region.class)
        .map(|(m, class)| {
            let pts = stencil(m, h);
            let mut comps = Vec::with_capacity(13);
            for p in &pts {
                match model.components(&[p[0], p[1]], p[2])? {
                    Some(c) => comps.push(c),
                    None => return Err(Error::StencilUnresolved { h, limit: 0.0 }),
                }
            }
            let residual_at = |shift: (f64, f64)| {
                let vals: [f64; 13] = std::array::from_fn(|k| comps[k].value(eps, shift));
                let (boxed, grad) = apply_stencil(&vals, h);
                boxed - source.eval(m, vals[0], &grad)
            };
            let r0 = residual_at((0.0, 0.0));
            let mut parts = [0.0; 5];
            if nq > 0 {
                let mut grid = vec![0.0; nq * nq];
                for a in 0..nq {
                    for b in 0..nq {
                        grid[a * nq + b] = residual_at((TAU * a as f64 / nq as f64, TAU * b as f64 / nq as f64));
                    }
                }
                let d = split_grid(&grid, nq, rs.n_modes, rs.m_cap);
                let cr: f64 = 2.0 * d.char_r.iter().map(|c| c.norm_sqr()).sum::<f64>();
                let ci: f64 = 2.0 * d.char_i.iter().map(|c| c.norm_sqr()).sum::<f64>();
                parts = [d.mean * d.mean, cr, ci, d.nc_norm_sq(), d.tail_sq];
            }
            let phase_gap = if comps[0].has_profiles() {
                let mut gap = 0.0f64;
                let fi: [f64; 13] = std::array::from_fn(|k| comps[k].phi_i);
                let (_, gi) = apply_stencil(&fi, h);
                if comps[0].w_i.iter().any(|c| c.norm_sqr() > 0.0) {
                    gap = gap.max((0..3).map(|k| (gi[k] - comps[0].dphi_i[k]).abs()).fold(0.0, f64::max));
                }
                if comps[0].w_r.iter().any(|c| c.norm_sqr() > 0.0) && comps.iter().all(|c| c.dphi_r != [0.0; 3]) {
                    let fr: [f64; 13] = std::array::from_fn(|k| comps[k].phi_r);
                    let (_, gr) = apply_stencil(&fr, h);
                    gap = gap.max((0..3).map(|k| (gr[k] - comps[0].dphi_r[k]).abs()).fold(0.0, f64::max));
                }
                gap
            } else {
                0.0
            };
            Ok(PointResult {
                class: *class,
                r0,
                parts,
                source_nc: comps[0].source_nc_sq,
                eikonal: comps[0].eikonal_coefficient(),
                phase_gap,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let w = region.weight;
    let norm = |c: Option<RegionClass>| {
        results
            .iter()
            .filter(|r| c.is_none_or(|c| r.class == c))
            .map(|r| r.r0 * r.r0)
            .sum::<f64>()
            .mul_add(w, 0.0)
            .sqrt()
    };
    let parts = (nq > 0).then(|| {
        let sum = |k: usize| (results.iter().map(|r| r.parts[k]).sum::<f64>() * w).sqrt();
        ResidualParts {
            mean: sum(0),
            char_r: sum(1),
            char_i: sum(2),
            nc: sum(3),
            tail: sum(4),
            source_nc: (results.iter().map(|r| r.source_nc).sum::<f64>() * w).sqrt(),
        }
    });
    Ok(ResidualReport {
        eps,
        h,
        samples: results.len(),
        illuminated: norm(Some(RegionClass::Illuminated)),
        overlap: norm(Some(RegionClass::Overlap)),
        shadow: norm(Some(RegionClass::Shadow)),
        total: norm(None),
        eikonal: results.iter().map(|r| r.eikonal).fold(0.0, f64::max),
        phase_gradient_gap: results.iter().map(|r| r.phase_gap).fold(0.0, f64::max),
        parts,
    })
}

/// Dirichlet defect of the assembled linear field on the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefectReport {
    /// `max |u_a|` on the sampled boundary points.
    pub defect: f64,
    /// `max |eps^2 U_nc|` there.
    pub corrector_trace: f64,
    /// `max |u_a - eps^2 U_nc|`, which vanishes when `W_r = -W_i` on the boundary.
    pub mismatch: f64,
}

/// Samples the boundary trace of the assembled field over feet and times.
pub fn dirichlet_defect(model: &LinearModel<'_>, eps: f64, feet: &[f64], times: &[f64]) -> Result<DefectReport> {
    let mut rep = DefectReport { defect: 0.0, corrector_trace: 0.0, mismatch: 0.0 };
    for &foot in feet {
        for &t in times {
            let c = model.boundary_components(foot, t)?;
            let v = c.value(eps, (0.0, 0.0));
            let ct = c.corrector_value(eps);
            rep.defect = rep.defect.max(v.abs());
            rep.corrector_trace = rep.corrector_trace.max(ct.abs());
            rep.mismatch = rep.mismatch.max((v - ct).abs());
        }
    }
    Ok(rep)
}

/// Convergence of `||a(., phi / eps)||_{L^2}` to its theta-averaged limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillatoryReport {
    /// `(eps, norm)` for every scale.
    pub norms: Vec<(f64, f64)>,
    pub limit: f64,
    /// `|norm - limit| / limit` at the smallest `eps`.
    pub rel_error: f64,
    /// Largest increase of the relative error between consecutive scales.
    pub worst_step: f64,
}

/// Quadrature box `[x1_lo, x1_hi] x [x2_lo, x2_hi]` with `n x n` midpoint nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quadrature {
    pub bbox: [f64; 4],
    pub n: usize,
}

impl Quadrature {
    fn nodes(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        let b = self.bbox;
        let (hx, hy) = ((b[1] - b[0]) / self.n as f64, (b[3] - b[2]) / self.n as f64);
        (0..self.n * self.n).map(move |k| [b[0] + (k / self.n) as f64 * hx + 0.5 * hx, b[2] + (k % self.n) as f64 * hy + 0.5 * hy])
    }

    fn cell(&self) -> f64 {
        let b = self.bbox;
        (b[1] - b[0]) * (b[3] - b[2]) / (self.n * self.n) as f64
    }
}

fn oscillatory_report(norms: Vec<(f64, f64)>, limit: f64) -> OscillatoryReport {
    let rel: Vec<f64> = norms.iter().map(|(_, v)| (v - limit).abs() / limit).collect();
    let worst_step = rel.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max).max(0.0);
    OscillatoryReport { rel_error: *rel.last().unwrap_or(&f64::NAN), norms, limit, worst_step }
}

/// Single-phase version: `a(x, theta)` composed with `phi(x) / eps`; the limit
/// is `(2 pi)^{-1/2} ||a||_{L^2(omega x T)}` computed with `n_theta` nodes.
pub fn oscillatory_norm_check(
    a: impl Fn(&[f64; 2], f64) -> f64 + Sync,
    phi: impl Fn(&[f64; 2]) -> f64 + Sync,
    eps: &[f64],
    quad: &Quadrature,
    n_theta: usize,
) -> OscillatoryReport {
    let nodes: Vec<[f64; 2]> = quad.nodes().collect();
    let limit_sq: f64 = nodes
        .par_iter()
        .map(|x| (0..n_theta).map(|k| a(x, TAU * k as f64 / n_theta as f64).powi(2)).sum::<f64>() / n_theta as f64)
        .sum::<f64>()
        * quad.cell();
    let norms = eps
        .iter()
        .map(|&e| {
            let s: f64 = nodes.par_iter().map(|x| a(x, phi(x) / e).powi(2)).sum();
            (e, (s * quad.cell()).sqrt())
        })
        .collect();
    oscillatory_report(norms, limit_sq.sqrt())
}

/// Two-phase version with limit `(2 pi)^{-1} ||a||_{L^2(omega x T^2)}`.
pub fn oscillatory_norm_check_two_phase(
    a: impl Fn(&[f64; 2], f64, f64) -> f64 + Sync,
    phi1: impl Fn(&[f64; 2]) -> f64 + Sync,
    phi2: impl Fn(&[f64; 2]) -> f64 + Sync,
    eps: &[f64],
    quad: &Quadrature,
    n_theta: usize,
) -> OscillatoryReport {
    let nodes: Vec<[f64; 2]> = quad.nodes().collect();
    let nt2 = (n_theta * n_theta) as f64;
    let limit_sq: f64 = nodes
        .par_iter()
        .map(|x| {
            let mut s = 0.0;
            for i in 0..n_theta {
                for j in 0..n_theta {
                    s += a(x, TAU * i as f64 / n_theta as f64, TAU * j as f64 / n_theta as f64).powi(2);
                }
            }
            s / nt2
        })
        .sum::<f64>()
        * quad.cell();
    let norms = eps
        .iter()
        .map(|&e| {
            let s: f64 = nodes.par_iter().map(|x| a(x, phi1(x) / e, phi2(x) / e).powi(2)).sum();
            (e, (s * quad.cell()).sqrt())
        })
        .collect();
    oscillatory_report(norms, limit_sq.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::obstacle::{Family, GraphObstacle};
    use crate::rays::BumpData;
    use approx::assert_relative_eq;

    fn geometry() -> RayGeometry {
        let ob = GraphObstacle::new(Family::Poly2D { coeffs: vec![1.0] }, 2, 2.0).unwrap();
        RayGeometry::new(ob, 1.0, 1.0, 1.2, 121, 60).unwrap()
    }

    fn data(amplitude: f64) -> BumpData {
        BumpData { center: [1.0, -1.3], radii: [0.35, 0.3], amplitude, mode: 1, phase: 0.0 }
    }

    #[test]
    fn zero_profiles_give_the_mean_field() {
        let c = Components::mean_only(0.7, [1.0, 2.0, 3.0], 3);
        assert_eq!(c.value(0.1, (0.0, 0.0)), 0.7);
        assert_eq!(c.gradient(0.1, (0.3, 0.2)), [1.0, 2.0, 3.0]);
    }

    #[test]
    fn single_mode_substitution() {
        // W = cos theta has primitive U = sin theta.
        let w = crate::profile::single_mode(2, 1, 0.0, 1.0);
        let z = vec![Complex64::new(0.0, 0.0); 2];
        let c = Components::new(0.0, [0.0; 3], w, z, 0.37, 0.0, [0.0, 1.0, -1.0], [0.0; 3]);
        assert_relative_eq!(c.value(0.1, (0.0, 0.0)), 0.1 * (0.37f64 / 0.1).sin(), epsilon = 1e-14);
    }

    #[test]
    fn assembly_is_linear() {
        let mk = |s: f64| {
            let w = crate::profile::single_mode(2, 1, 0.3 * s, -0.2 * s);
            let v = crate::profile::single_mode(2, 2, 0.1 * s, 0.5);
            Components::new(s, [s, 0.0, 2.0 * s], w, v, 0.4, 1.3, [0.0, 1.0, -1.0], [0.6, 0.8, -1.0])
        };
        let (a, b) = (mk(1.0), mk(-0.7));
        let mut sum = a.clone();
        sum.u += b.u;
        for k in 0..2 {
            sum.u_i[k] += b.u_i[k];
            sum.u_r[k] += b.u_r[k];
        }
        let e = 0.05;
        assert_relative_eq!(sum.value(e, (0.0, 0.0)), a.value(e, (0.0, 0.0)) + b.value(e, (0.0, 0.0)), epsilon = 1e-14);
    }

    #[test]
    fn leading_gradient_matches_difference_quotients() {
        let g = geometry();
        let model = LinearModel {
            optics: LinearOptics { geo: &g, data: data(1.0), n_modes: 2, mu: 0.1 },
            source: SourceSpec::Zero,
            corrector: CorrectorSettings::default(),
        };
        let m = [1.05, -0.4, -0.2];
        let mut worst = Vec::new();
        for eps in [0.04, 0.02] {
            let h = eps / 40.0;
            let pts = stencil(&m, h);
            let vals: [f64; 13] = std::array::from_fn(|k| {
                model.components(&[pts[k][0], pts[k][1]], pts[k][2]).unwrap().unwrap().value(eps, (0.0, 0.0))
            });
            let (_, fd) = apply_stencil(&vals, h);
            let lead = model.components(&[m[0], m[1]], m[2]).unwrap().unwrap().gradient(eps, (0.0, 0.0));
            worst.push((0..3).map(|k| (fd[k] - lead[k]).abs()).fold(0.0, f64::max));
        }
        assert!(worst[0] < 0.2 && worst[1] < 0.6 * worst[0], "{worst:?}");
    }

    #[test]
    fn stencil_resolution_is_enforced() {
        let g = geometry();
        let model = LinearModel {
            optics: LinearOptics { geo: &g, data: data(1.0), n_modes: 2, mu: 0.1 },
            source: SourceSpec::Zero,
            corrector: CorrectorSettings::default(),
        };
        let region = SampleRegion { points: vec![], class: vec![], weight: 1.0, h_max: 0.01 };
        let rs = ResidualSettings { h_ratio: 0.2, ..ResidualSettings::default() };
        assert!(matches!(residual_scan(&model, &SourceSpec::Zero, &region, 0.1, &rs), Err(Error::StencilUnresolved { .. })));
    }

    #[test]
    fn boundary_trace_is_the_corrector_trace() {
        let g = geometry();
        let model = LinearModel {
            optics: LinearOptics { geo: &g, data: data(1.0), n_modes: 2, mu: 0.1 },
            source: SourceSpec::SinDt { kappa: 0.5, psi: 0.5 },
            corrector: CorrectorSettings::default(),
        };
        let feet: Vec<f64> = (0..12).map(|k| -0.55 + 0.04 * k as f64).collect();
        let times: Vec<f64> = (0..12).map(|k| -0.4 + 0.1 * k as f64).collect();
        let rep = dirichlet_defect(&model, 0.05, &feet, &times).unwrap();
        assert!(rep.mismatch < 1e-12, "{rep:?}");
        assert!(rep.corrector_trace > 0.0);
    }

    #[test]
    fn oscillatory_norm_single_phase() {
        let b = |x: &[f64; 2]| (-(x[0] * x[0] + x[1] * x[1])).exp();
        let quad = Quadrature { bbox: [-1.0, 1.0, -1.0, 1.0], n: 800 };
        let rep = oscillatory_norm_check(|x, th| b(x) * th.sin(), |x| x[0] + 0.5 * x[1] * x[1], &[0.1, 0.05, 1.0 / 80.0], &quad, 64);
        // ||b||^2 over the square, by a fine independent tensor rule.
        let n = 2000;
        let hh = 2.0 / n as f64;
        let mut bn = 0.0;
        for i in 0..n {
            for j in 0..n {
                bn += b(&[-1.0 + (i as f64 + 0.5) * hh, -1.0 + (j as f64 + 0.5) * hh]).powi(2);
            }
        }
        let oracle = (bn * hh * hh).sqrt() / 2f64.sqrt();
        assert_relative_eq!(rep.limit, oracle, max_relative = 1e-4);
        assert!(rep.rel_error < 0.02, "{rep:?}");
    }

    #[test]
    fn theta_independent_control_is_exact() {
        let quad = Quadrature { bbox: [0.0, 1.0, 0.0, 1.0], n: 100 };
        let rep = oscillatory_norm_check(|x, _| x[0] + 1.0, |x| x[0], &[0.1, 0.05], &quad, 16);
        for (_, v) in &rep.norms {
            assert_relative_eq!(*v, rep.limit, epsilon = 1e-12);
        }
    }
}

//! Sampled flow charts with a cell index and Newton inversion, the reflected
//! phase field, and the transport coefficient `box phi_r` by three routes.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::{PlanePhase, ReflectedCovector, ReflectedFlow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChartKind {
    Incoming,
    Reflected,
}

/// The affine incoming flow `Z_i(s, x0, t0) = (x0 + 2 s (0, theta), t0 + 2 s)`.
#[derive(Debug, Clone)]
pub struct IncomingFlow {
    pub phase: PlanePhase,
}

impl IncomingFlow {
    pub fn forward(&self, s: f64, x0: &DVector<f64>, t0: f64) -> (DVector<f64>, f64) {
        (x0 + self.phase.covector() * (2.0 * s), t0 + 2.0 * s)
    }

    /// Inverse relative to the initial slice `t = t0`.
    pub fn invert(&self, x: &DVector<f64>, t: f64, t0: f64) -> (f64, DVector<f64>) {
        let s = 0.5 * (t - t0);
        (s, x - self.phase.covector() * (2.0 * s))
    }
}

/// Uniform bucket index over sampled image points.
#[derive(Debug, Clone)]
struct CellIndex {
    lo: DVector<f64>,
    cell: f64,
    buckets: HashMap<Vec<i64>, Vec<usize>>,
}

impl CellIndex {
    fn build(points: &[DVector<f64>], cell: f64) -> Self {
        let dim = points[0].len();
        let mut lo = DVector::from_element(dim, f64::INFINITY);
        for p in points {
            lo = lo.inf(p);
        }
        let mut idx = CellIndex { lo, cell, buckets: HashMap::new() };
        for (i, p) in points.iter().enumerate() {
            let key = idx.key(p);
            idx.buckets.entry(key).or_default().push(i);
        }
        idx
    }

    fn key(&self, p: &DVector<f64>) -> Vec<i64> {
        p.iter()
            .zip(self.lo.iter())
            .map(|(v, l)| ((v - l) / self.cell).floor() as i64)
            .collect()
    }

    /// Nearest indexed sample within `rings` cells of `p`.
    fn nearest(&self, p: &DVector<f64>, points: &[DVector<f64>], rings: i64) -> Option<usize> {
        let base = self.key(p);
        let dim = base.len();
        let width = (2 * rings + 1) as usize;
        let mut best: Option<(f64, usize)> = None;
        for code in 0..width.pow(dim as u32) {
            let mut c = code;
            let key: Vec<i64> = base
                .iter()
                .map(|b| {
                    let off = (c % width) as i64 - rings;
                    c /= width;
                    b + off
                })
                .collect();
            if let Some(list) = self.buckets.get(&key) {
                for &i in list {
                    let d = (&points[i] - p).norm_squared();
                    if best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, i));
                    }
                }
            }
        }
        best.map(|(_, i)| i)
    }
}

/// Parameters `(s, xbar, t')` of a reflected chart point.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartParams {
    pub s: f64,
    pub x: DVector<f64>,
    pub tp: f64,
}

/// A sampled reflected flow map over `[0, s0] x patch` with a Newton-based inverse.
#[derive(Debug, Clone)]
pub struct FlowChart {
    pub kind: ChartKind,
    pub flow: ReflectedFlow,
    pub s0: f64,
    /// Boundary parameters of the sampled rays.
    pub params: Vec<DVector<f64>>,
    pub s_grid: Vec<f64>,
    /// Spatial images, indexed `[ray * s_grid.len() + k]`.
    pub images: Vec<DVector<f64>>,
    /// Jacobian determinants at the samples.
    pub jacobians: Vec<f64>,
    pub j_min: f64,
    index: CellIndex,
}

/// Newton settings for [`FlowChart::invert`].
#[derive(Debug, Clone, Copy)]
pub struct InvertOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for InvertOptions {
    fn default() -> Self {
        InvertOptions { tol: 1e-12, max_iter: 20 }
    }
}

impl FlowChart {
    /// Samples the reflected chart on a tensor grid of the illuminated part of
    /// the box `[lo, hi]` with `per_axis` rays per boundary coordinate and `ns` steps in s.
    pub fn build(
        flow: ReflectedFlow,
        s0: f64,
        lo: &DVector<f64>,
        hi: &DVector<f64>,
        per_axis: usize,
        ns: usize,
    ) -> Result<Self> {
        let m = flow.m();
        if lo.len() != m || hi.len() != m {
            return Err(Error::WrongDimension { expected: m, got: lo.len() });
        }
        let mut params = Vec::new();
        for code in 0..per_axis.pow(m as u32) {
            let mut c = code;
            let x = DVector::from_fn(m, |i, _| {
                let k = c % per_axis;
                c /= per_axis;
                lo[i] + (hi[i] - lo[i]) * k as f64 / (per_axis.max(2) - 1) as f64
            });
            if x.norm() >= flow.ob.r {
                continue;
            }
            let g = flow.ob.eval(&x)?.grad.dot(flow.theta());
            if g >= 0.0 {
                params.push(x);
            }
        }
        if params.is_empty() {
            return Err(Error::OutOfChart("patch has no illuminated boundary samples".into()));
        }
        let s_grid: Vec<f64> = (0..=ns).map(|k| s0 * k as f64 / ns as f64).collect();
        let mut images = Vec::with_capacity(params.len() * s_grid.len());
        let mut jacobians = Vec::with_capacity(images.capacity());
        for x in &params {
            for &s in &s_grid {
                images.push(flow.spatial_forward(s, x)?);
                jacobians.push(flow.jacobian_analytic(s, x)?);
            }
        }
        let mut extent = 0.0f64;
        for d in 0..=m {
            let (mn, mx) = images
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p[d]), b.max(p[d])));
            extent = extent.max(mx - mn);
        }
        let cell = (extent / (images.len() as f64).powf(1.0 / (m + 1) as f64)).max(1e-9);
        let index = CellIndex::build(&images, cell);
        Ok(FlowChart {
            kind: ChartKind::Reflected,
            flow,
            s0,
            params,
            s_grid,
            images,
            jacobians,
            j_min: 1e-6,
            index,
        })
    }

    fn seed(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        let i = self
            .index
            .nearest(x, &self.images, 2)
            .ok_or(Error::NotInImage)?;
        let ns = self.s_grid.len();
        Ok((self.s_grid[i % ns], self.params[i / ns].clone()))
    }

    /// Inverts the spatial part of `Z_r` from an explicit seed by damped Newton.
    pub fn invert_spatial_from(
        &self,
        x: &DVector<f64>,
        seed: (f64, DVector<f64>),
        opts: InvertOptions,
    ) -> Result<(f64, DVector<f64>)> {
        let m = self.flow.m();
        let (mut s, mut xb) = seed;
        let residual = |s: f64, xb: &DVector<f64>| -> Result<DVector<f64>> {
            Ok(self.flow.spatial_forward(s, xb)? - x)
        };
        let mut r = residual(s, &xb)?;
        for _ in 0..opts.max_iter {
            if r.norm() <= opts.tol {
                break;
            }
            let jac = self.flow.spatial_jacobian(s, &xb)?;
            let det = jac.determinant();
            let step = match jac.lu().solve(&r) {
                Some(v) if det.abs() > 1e-300 => v,
                _ => return Err(Error::NearShadowBoundary { j: det }),
            };
            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..30 {
                let s_new = s - lambda * step[0];
                let x_new = &xb - step.rows(1, m) * lambda;
                if let Ok(r_new) = residual(s_new.max(0.0), &x_new) {
                    if s_new >= -1e-12 && r_new.norm() < r.norm() {
                        s = s_new.max(0.0);
                        xb = x_new;
                        r = r_new;
                        accepted = true;
                        break;
                    }
                }
                lambda *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        let j = self.flow.jacobian_analytic(s, &xb)?;
        if r.norm() > opts.tol.max(1e-14 * (1.0 + x.norm())) {
            if j.abs() < self.j_min {
                return Err(Error::NearShadowBoundary { j });
            }
            return Err(Error::NotInImage);
        }
        if j.abs() < self.j_min {
            return Err(Error::NearShadowBoundary { j });
        }
        Ok((s, xb))
    }

    /// `Z_r^{-1}(x, t) = (s, xbar, t - 2 s)`.
    pub fn invert(&self, x: &DVector<f64>, t: f64, opts: InvertOptions) -> Result<ChartParams> {
        let seed = self.seed(x)?;
        let (s, xb) = self.invert_spatial_from(x, seed, opts)?;
        Ok(ChartParams { s, x: xb, tp: t - 2.0 * s })
    }

    /// Reflected phase value and spacetime covector `(xi_r, -1)` at `(x, t)`.
    pub fn phi_r(&self, x: &DVector<f64>, t: f64) -> Result<(f64, ReflectedCovector)> {
        let p = self.invert(x, t, InvertOptions::default())?;
        self.flow.phase_at(&p.x, p.tp)
    }

    /// `box phi_r` by central differences of the inverted covector field.
    pub fn box_phi_r_fd(&self, x: &DVector<f64>, h: f64) -> Result<f64> {
        let m = self.flow.m();
        let (s0, xb0) = self.invert_spatial_from(x, self.seed(x)?, InvertOptions::default())?;
        let mut div = 0.0;
        for d in 0..=m {
            let mut vals = [0.0; 2];
            for (slot, sign) in [1.0, -1.0].iter().enumerate() {
                let mut y = x.clone();
                y[d] += sign * h;
                let (_, xb) = self.invert_spatial_from(&y, (s0, xb0.clone()), InvertOptions::default())?;
                vals[slot] = self.flow.covector(&xb)?.spatial()[d];
            }
            div += (vals[0] - vals[1]) / (2.0 * h);
        }
        Ok(div)
    }

    /// `box phi_r` from the analytic covector jet at the inverted parameters.
    pub fn box_phi_r_analytic(&self, x: &DVector<f64>) -> Result<f64> {
        let (s, xb) = self.invert_spatial_from(x, self.seed(x)?, InvertOptions::default())?;
        self.flow.box_phi_r(s, &xb)
    }

    /// Half the logarithmic derivative of `j` along the ray through `x`,
    /// by central differences of the analytic `j` in `s`.
    pub fn liouville_half_dlogj(&self, x: &DVector<f64>, h: f64) -> Result<f64> {
        let (s, xb) = self.invert_spatial_from(x, self.seed(x)?, InvertOptions::default())?;
        let lo = (s - h).max(0.0);
        let hi = s + h;
        let jl = self.flow.jacobian_analytic(lo, &xb)?;
        let jh = self.flow.jacobian_analytic(hi, &xb)?;
        Ok(0.5 * (jh.ln() - jl.ln()) / (hi - lo))
    }

    /// Dense matrix of chart rows `(s, params, image, covector, j)` for export.
    pub fn rows(&self) -> Result<DMatrix<f64>> {
        let m = self.flow.m();
        let ns = self.s_grid.len();
        let width = 1 + m + (m + 1) + (m + 1) + 1;
        let mut out = DMatrix::zeros(self.images.len(), width);
        for (i, img) in self.images.iter().enumerate() {
            let x = &self.params[i / ns];
            let cov = self.flow.covector(x)?.spatial();
            let mut c = 0;
            out[(i, c)] = self.s_grid[i % ns];
            c += 1;
            for v in x.iter().chain(img.iter()).chain(cov.iter()) {
                out[(i, c)] = *v;
                c += 1;
            }
            out[(i, c)] = self.jacobians[i];
        }
        Ok(out)
    }
}

/// How a reflected ray leaves the region of interest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExitKind {
    /// Reaches the final time before leaving the validity ball.
    Time,
    /// Leaves the validity ball of the boundary chart first.
    Boundary,
    /// Both exits occur within the tolerance of each other.
    Ambiguous,
}

/// Exit classification of the reflected ray from `(xbar, t')` in the window `t <= t_end`.
pub fn ray_exit(flow: &ReflectedFlow, x: &DVector<f64>, tp: f64, t_end: f64, tol: f64) -> Result<(ExitKind, f64)> {
    let s_time = 0.5 * (t_end - tp);
    let cov = flow.covector(x)?;
    let v = &cov.xibar * 2.0;
    // Solve |x + s v| = r for the forward root.
    let r = flow.ob.r;
    let (a, b, c) = (v.norm_squared(), 2.0 * x.dot(&v), x.norm_squared() - r * r);
    let s_ball = if a > 0.0 { (-b + (b * b - 4.0 * a * c).sqrt()) / (2.0 * a) } else { f64::INFINITY };
    let kind = if (s_time - s_ball).abs() <= tol {
        ExitKind::Ambiguous
    } else if s_time < s_ball {
        ExitKind::Time
    } else {
        ExitKind::Boundary
    };
    Ok((kind, s_time.min(s_ball)))
}

//! Picard iteration for the coupled profile system in 2D: the mean field
//! `box u = f_bar` on the flattened half-space, and the transport equations
//! of the incoming and reflected profiles with their characteristic sources.
//!
//! Iterates are produced in the order `u^1, W_i^1, W_r^1, u^2, ...`: the mean
//! field and both sources are composed from the previous iterate, and the
//! reflected boundary data is `-W_i` of the new incoming iterate. Profiles
//! carry the flow-aligned cutoff `chi_mu`, which is constant on rays, so data
//! and sources are cut before integration and rays inside the cut stay zero.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chart::ChartKind;
use crate::error::{Error, Result};
use crate::halfspace::{Coefficients, Grid2, Leapfrog, MeanField, Start};
use crate::profile::{trapezoid_weight, transport_modes, Modes, ProfileGrid, RayProfile};
use crate::rays::{BumpData, RayGeometry, ReflectedSpot};
use crate::source::{decompose_source, LocalState, Source, SourceSpec};

/// Discretization and stopping parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PicardSettings {
    pub n_modes: usize,
    pub nq: usize,
    pub m_cap: usize,
    pub mu: f64,
    /// Label spacing in `a` and `tau`.
    pub dlabel: f64,
    /// Ray step in `s`.
    pub ds: f64,
    /// Mean-field grid spacing and box `[X0, X1, Z0, Z1]`.
    pub mean_h: f64,
    pub mean_box: [f64; 4],
    pub cfl: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for PicardSettings {
    fn default() -> Self {
        PicardSettings {
            n_modes: 4,
            nq: 16,
            m_cap: 4,
            mu: 0.1,
            dlabel: 0.025,
            ds: 0.01,
            mean_h: 0.05,
            mean_box: [0.0, 3.5, -1.8, 1.4],
            cfl: 0.8,
            max_iter: 12,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
struct SampleGeo {
    m: [f64; 3],
    xz: [f64; 2],
    /// Labels `(a, tau, s)` in the other ray family through the sample.
    other: Option<(f64, f64, f64)>,
    dphi_r: [f64; 3],
}

#[derive(Debug, Clone)]
struct RaySet {
    grid: ProfileGrid,
    geo: Vec<Vec<SampleGeo>>,
    chi: Vec<f64>,
    active: Vec<bool>,
    /// Spacetime measure per unit `ds` at each sample.
    weight: Vec<Vec<f64>>,
    coef: Vec<Vec<f64>>,
    data: Vec<Modes>,
}

#[derive(Debug, Clone)]
struct NodeGeo {
    x: [f64; 2],
    spot: Option<ReflectedSpot>,
    dphi_r: [f64; 3],
}

/// One line of the convergence trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PicardStep {
    pub iteration: usize,
    pub diff_u: f64,
    pub diff_wi: f64,
    pub diff_wr: f64,
    pub diff: f64,
    pub ratio: Option<f64>,
}

/// Output of [`picard_iterate`].
#[derive(Debug, Clone)]
pub struct PicardResult {
    pub mean: MeanField,
    pub w_i: ProfileGrid,
    pub w_r: ProfileGrid,
    pub trace: Vec<PicardStep>,
    pub converged: bool,
    /// `max |W_r + W_i|` over all modes at the boundary feet.
    pub boundary_defect: f64,
    /// Squared L2 weights per sample for norms of `w_i` and `w_r`.
    pub weights_i: Vec<Vec<f64>>,
    pub weights_r: Vec<Vec<f64>>,
    pub chi_i: Vec<f64>,
    pub chi_r: Vec<f64>,
    /// `box phi_r` at every reflected sample.
    pub coef_r: Vec<Vec<f64>>,
    /// Squared weighted L2 norms of the characteristic sources of the last round.
    pub source_norm_sq_i: f64,
    pub source_norm_sq_r: f64,
}

impl PicardResult {
    /// Largest ratio of consecutive differences over the tail of the trace.
    pub fn contraction_ratio(&self) -> Option<f64> {
        self.trace.iter().filter_map(|s| s.ratio).filter(|r| r.is_finite()).reduce(f64::max)
    }

    /// Geometric-mean contraction over the recorded ratios.
    pub fn mean_ratio(&self) -> Option<f64> {
        let r: Vec<f64> = self.trace.iter().filter_map(|s| s.ratio).filter(|r| r.is_finite() && *r > 0.0).collect();
        if r.is_empty() {
            return None;
        }
        Some((r.iter().map(|v| v.ln()).sum::<f64>() / r.len() as f64).exp())
    }
}

/// The coupled problem on a 2D ray geometry.
pub struct ProfileProblem<'a> {
    pub geo: &'a RayGeometry,
    pub data: BumpData,
    pub source: SourceSpec,
    pub settings: PicardSettings,
}

fn uniform_s(end: f64, ds: f64) -> Vec<f64> {
    if end <= 0.0 {
        return Vec::new();
    }
    let n = (end / ds).ceil().max(1.0) as usize;
    (0..=n).map(|k| end * k as f64 / n as f64).collect()
}

fn labels(lo: f64, hi: f64, h: f64) -> Vec<f64> {
    let n = ((hi - lo) / h).round().max(1.0) as usize;
    (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect()
}

impl ProfileProblem<'_> {
    fn to_flat(&self, x: &[f64; 2]) -> [f64; 2] {
        [x[0] - self.geo.f(x[1]), x[1]]
    }

    /// Label box covering the data support.
    fn label_ranges(&self) -> ((f64, f64), (f64, f64)) {
        let g = self.geo;
        let d = &self.data;
        let a = (d.center[0] - d.radii[0], d.center[0] + d.radii[0]);
        // tau = foot - theta (x2(-T) - ...): bounded by the extreme hit points.
        let x2 = (d.center[1] - d.radii[1], d.center[1] + d.radii[1]);
        let mut tlo = f64::INFINITY;
        let mut thi = f64::NEG_INFINITY;
        for k in 0..=40 {
            let ak = a.0 + (a.1 - a.0) * k as f64 / 40.0;
            let foot = g.label_foot(ak);
            for x in [x2.0, x2.1] {
                let tau = -g.t_max + g.theta * (foot - x);
                tlo = tlo.min(tau);
                thi = thi.max(tau);
            }
        }
        let h = self.settings.dlabel;
        ((a.0 - h, a.1 + h), (tlo - h, thi + h))
    }

    fn incoming_set(&self, la: &[f64], lt: &[f64]) -> Result<RaySet> {
        let g = self.geo;
        let st = &self.settings;
        let nr = la.len() * lt.len();
        let rows: Vec<Result<(RayProfile, Vec<SampleGeo>, f64, bool, Modes)>> = (0..nr)
            .into_par_iter()
            .map(|ri| {
                let (a, tau) = (la[ri / lt.len()], lt[ri % lt.len()]);
                let s = uniform_s(g.incoming_s_end(a, tau), st.ds);
                let chi = g.chi(a, st.mu);
                let p0 = g.incoming_point(a, tau, 0.0);
                let data = self.data.modes(&[p0[0], p0[1]], st.n_modes);
                let start_ok = s.is_empty() || g.exterior(&[p0[0], p0[1]]);
                let active = chi > 0.0 && !s.is_empty() && start_ok && data.iter().any(|c| c.norm() > 0.0);
                let mut geo = Vec::with_capacity(s.len());
                if active {
                    for &sk in &s {
                        let m = g.incoming_point(a, tau, sk);
                        let x = [m[0], m[1]];
                        let spot = g.reflected_spot(&x)?;
                        let (other, dphi_r) = match spot {
                            Some(sp) if m[2] - 2.0 * sp.s >= -g.t_max => {
                                (Some((sp.a, m[2] - 2.0 * sp.s, sp.s)), g.dphi_r(sp.foot)?)
                            }
                            _ => (None, [0.0; 3]),
                        };
                        geo.push(SampleGeo { m, xz: self.to_flat(&x), other, dphi_r });
                    }
                }
                Ok((RayProfile::zeros(s, st.n_modes), geo, chi, active, data))
            })
            .collect();
        self.assemble(ChartKind::Incoming, la, lt, rows, |_, _| Ok((2.0, 0.0)))
    }

    fn reflected_set(&self, la: &[f64], lt: &[f64]) -> Result<RaySet> {
        let g = self.geo;
        let st = &self.settings;
        let nr = la.len() * lt.len();
        let rows: Vec<Result<(RayProfile, Vec<SampleGeo>, f64, bool, Modes)>> = (0..nr)
            .into_par_iter()
            .map(|ri| {
                let (a, tau) = (la[ri / lt.len()], lt[ri % lt.len()]);
                let foot = g.hit_x2(a);
                let s = match foot {
                    Some(_) if tau >= -g.t_max => uniform_s(0.5 * (g.t_max - tau), st.ds),
                    _ => Vec::new(),
                };
                let chi = g.chi(a, st.mu);
                let active = chi > 0.0 && !s.is_empty();
                let mut geo = Vec::with_capacity(s.len());
                if active {
                    let foot = foot.unwrap_or(0.0);
                    let dphi_r = g.dphi_r(foot)?;
                    for &sk in &s {
                        let x = g.reflected_point(foot, sk)?;
                        let m = [x[0], x[1], tau + 2.0 * sk];
                        let other = g.incoming_labels(&x, m[2]);
                        geo.push(SampleGeo { m, xz: self.to_flat(&x), other, dphi_r });
                    }
                }
                Ok((RayProfile::zeros(s, st.n_modes), geo, chi, active, Vec::new()))
            })
            .collect();
        self.assemble(ChartKind::Reflected, la, lt, rows, |a, s| {
            let foot = g.label_foot(a);
            let x = nalgebra::DVector::from_element(1, foot);
            let j = g.j(s, foot)?;
            let c = g.flow.box_phi_r(s, &x)?;
            Ok((j * g.dfoot_da(foot), c))
        })
    }

    #[allow(clippy::type_complexity)]
    fn assemble(
        &self,
        kind: ChartKind,
        la: &[f64],
        lt: &[f64],
        rows: Vec<Result<(RayProfile, Vec<SampleGeo>, f64, bool, Modes)>>,
        measure: impl Fn(f64, f64) -> Result<(f64, f64)> + Sync,
    ) -> Result<RaySet> {
        let da = if la.len() > 1 { la[1] - la[0] } else { 1.0 };
        let dt = if lt.len() > 1 { lt[1] - lt[0] } else { 1.0 };
        let mut set = RaySet {
            grid: ProfileGrid {
                kind,
                modes: self.settings.n_modes,
                labels_a: la.to_vec(),
                labels_tau: lt.to_vec(),
                ds: self.settings.ds,
                rays: Vec::new(),
            },
            geo: Vec::new(),
            chi: Vec::new(),
            active: Vec::new(),
            weight: Vec::new(),
            coef: Vec::new(),
            data: Vec::new(),
        };
        for (ri, row) in rows.into_iter().enumerate() {
            let (ray, geo, chi, active, data) = row?;
            let a = la[ri / lt.len()];
            let mut w = Vec::with_capacity(ray.s.len());
            let mut c = Vec::with_capacity(ray.s.len());
            if active {
                for &s in &ray.s {
                    let (mw, cc) = measure(a, s)?;
                    w.push(mw * da * dt);
                    c.push(cc);
                }
            } else {
                w = vec![0.0; ray.s.len()];
                c = vec![0.0; ray.s.len()];
            }
            set.grid.rays.push(ray);
            set.geo.push(geo);
            set.chi.push(chi);
            set.active.push(active);
            set.weight.push(w);
            set.coef.push(c);
            set.data.push(data);
        }
        Ok(set)
    }

    /// Mean-field solver on the flattened box over `[-T, T]`.
    fn leapfrog(&self) -> Leapfrog {
        let b = self.settings.mean_box;
        let grid = Grid2::covering(b[0], b[1], b[2], b[3], self.settings.mean_h);
        let ob = &self.geo.flow.ob;
        let coef = Coefficients::flattened(&grid, |z| {
            let e = ob.eval(&nalgebra::DVector::from_element(1, z)).expect("obstacle evaluation inside its ball");
            (e.grad[0], e.hess[(0, 0)])
        });
        Leapfrog::new(grid, coef, -self.geo.t_max, self.geo.t_max, self.settings.cfl)
    }

    fn node_geo(&self, grid: &Grid2) -> Result<Vec<NodeGeo>> {
        (0..grid.len())
            .into_par_iter()
            .map(|k| {
                let (i, j) = (k / grid.nz, k % grid.nz);
                let z = grid.z(j);
                let x = [grid.x(i) + self.geo.f(z), z];
                let spot = self.geo.reflected_spot(&x)?;
                let dphi_r = match spot {
                    Some(sp) => self.geo.dphi_r(sp.foot)?,
                    None => [0.0; 3],
                };
                Ok(NodeGeo { x, spot, dphi_r })
            })
            .collect()
    }

    /// Physical `(u, [u_x1, u_x2, u_t])` from the mean field at flattened `(X, Z, t)`.
    fn mean_state(&self, mean: &MeanField, xz: &[f64; 2], t: f64) -> (f64, [f64; 3]) {
        let g = &mean.grid;
        let (u, ut) = mean.sample(xz[0], xz[1], t);
        let ux = (mean.sample(xz[0] + g.hx, xz[1], t).0 - mean.sample(xz[0] - g.hx, xz[1], t).0) / (2.0 * g.hx);
        let uz = (mean.sample(xz[0], xz[1] + g.hz, t).0 - mean.sample(xz[0], xz[1] - g.hz, t).0) / (2.0 * g.hz);
        let fp = self.geo.fp(xz[1]);
        (u, [ux, uz - fp * ux, ut])
    }

    fn decompose_at(
        &self,
        m: [f64; 3],
        u: f64,
        grad_u: [f64; 3],
        w_r: &[Complex64],
        w_i: &[Complex64],
        dphi_r: [f64; 3],
    ) -> crate::source::PointDecomposition {
        let st = &self.settings;
        let state = LocalState { m, u, grad_u, w_r, w_i, dphi_r, dphi_i: self.geo.dphi_i() };
        decompose_source(&self.source, &state, st.nq, st.n_modes, st.m_cap)
    }

    /// Runs the iteration from zero profiles and a zero mean field.
    pub fn solve(&self) -> Result<PicardResult> {
        let st = self.settings;
        let g = self.geo;
        let ((a0, a1), (t0, t1)) = self.label_ranges();
        let la = labels(a0, a1, st.dlabel);
        let lt = labels(t0, t1, st.dlabel);
        let inc = self.incoming_set(&la, &lt)?;
        let refl = self.reflected_set(&la, &lt)?;
        let lf = self.leapfrog();
        let grid = lf.grid;
        let nodes = if self.source.is_zero() { Vec::new() } else { self.node_geo(&grid)? };
        let zero_modes = vec![Complex64::new(0.0, 0.0); st.n_modes];

        let mut mean = MeanField::zeros(grid, lf.t0, lf.dt, lf.nt);
        mean.slope = lf.coef.slope.clone();
        let mut w_i = inc.grid.clone();
        let mut w_r = refl.grid.clone();
        let mut trace: Vec<PicardStep> = Vec::new();
        let mut converged = false;
        let mut non_decreasing = 0usize;
        let mut src_norms = (0.0, 0.0);

        for iteration in 1..=st.max_iter {
            // Mean field from the previous iterate.
            let new_mean = if self.source.is_zero() {
                let mut z = MeanField::zeros(grid, lf.t0, lf.dt, lf.nt);
                z.slope = lf.coef.slope.clone();
                z
            } else {
                let forcing: Vec<Vec<f64>> = (0..=lf.nt)
                    .into_par_iter()
                    .map(|n| {
                        let t = lf.t(n);
                        let layer = mean.layer(n).expect("all layers stored");
                        let next = mean.layer((n + 1).min(lf.nt)).expect("all layers stored");
                        let prev = mean.layer(n.saturating_sub(1)).expect("all layers stored");
                        let span = if n == 0 || n == lf.nt { lf.dt } else { 2.0 * lf.dt };
                        let mut out = vec![0.0; grid.len()];
                        let mut wr = zero_modes.clone();
                        let mut wi = zero_modes.clone();
                        for i in 1..grid.nx - 1 {
                            for j in 1..grid.nz - 1 {
                                let id = grid.idx(i, j);
                                let nd = &nodes[id];
                                let u = layer[id];
                                let gr = mean.gradient(layer, i, j);
                                let ut = (next[id] - prev[id]) / span;
                                let grad_u = [gr[0], gr[1], ut];
                                let m = [nd.x[0], nd.x[1], t];
                                wi.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
                                wr.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
                                if let Some((a, tau, s)) = g.incoming_labels(&nd.x, t) {
                                    w_i.interp(a, tau, s, &mut wi);
                                }
                                if let Some(sp) = nd.spot {
                                    let tp = t - 2.0 * sp.s;
                                    if tp >= -g.t_max {
                                        w_r.interp(sp.a, tp, sp.s, &mut wr);
                                    }
                                }
                                let has_w = wi.iter().chain(wr.iter()).any(|c| c.norm_sqr() > 0.0);
                                out[id] = if has_w {
                                    self.decompose_at(m, u, grad_u, &wr, &wi, nd.dphi_r).mean
                                } else {
                                    self.source.eval(&m, u, &grad_u)
                                };
                            }
                        }
                        out
                    })
                    .collect();
                let z = vec![0.0; grid.len()];
                lf.solve(Start::Taylor { u0: z.clone(), v0: z }, |n, _, f| f.copy_from_slice(&forcing[n]), |_, _, _| 0.0, |_| true)?
            };

            // Characteristic sources composed from the previous iterate.
            let src_i = self.ray_sources(&inc, &mean, &w_i, &w_r, ChartKind::Incoming);
            let src_r = self.ray_sources(&refl, &mean, &w_i, &w_r, ChartKind::Reflected);
            src_norms = (sources_norm_sq(&inc, &src_i), sources_norm_sq(&refl, &src_r));

            // Incoming transport with data at t = -T.
            let mut new_i = inc.grid.clone();
            let solved: Vec<Result<Vec<Modes>>> = (0..inc.grid.rays.len())
                .into_par_iter()
                .map(|ri| {
                    if !inc.active[ri] {
                        return Ok(Vec::new());
                    }
                    let sigma: Vec<f64> = inc.grid.rays[ri].s.iter().map(|s| 2.0 * s).collect();
                    let w0: Modes = inc.data[ri].iter().map(|c| c * inc.chi[ri]).collect();
                    transport_modes(&sigma, &inc.coef[ri], &src_i[ri], &w0, ri)
                })
                .collect();
            for (ri, sol) in solved.into_iter().enumerate() {
                for (k, modes) in sol?.into_iter().enumerate() {
                    new_i.modes_at_mut(ri, k).copy_from_slice(&modes);
                }
            }

            // Reflected transport with data -W_i at the foot.
            let mut new_r = refl.grid.clone();
            let solved: Vec<Result<Vec<Modes>>> = (0..refl.grid.rays.len())
                .into_par_iter()
                .map(|ri| {
                    if !refl.active[ri] {
                        return Ok(Vec::new());
                    }
                    let n_in = new_i.rays[ri].s.len();
                    let w0: Modes = if inc.active[ri] && n_in > 0 {
                        new_i.modes_at(ri, n_in - 1).iter().map(|c| -c).collect()
                    } else {
                        zero_modes.clone()
                    };
                    let sigma: Vec<f64> = refl.grid.rays[ri].s.iter().map(|s| 2.0 * s).collect();
                    transport_modes(&sigma, &refl.coef[ri], &src_r[ri], &w0, ri)
                })
                .collect();
            for (ri, sol) in solved.into_iter().enumerate() {
                for (k, modes) in sol?.into_iter().enumerate() {
                    new_r.modes_at_mut(ri, k).copy_from_slice(&modes);
                }
            }

            let du: f64 = mean
                .layers
                .iter()
                .zip(&new_mean.layers)
                .map(|((_, a), (_, b))| a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>())
                .sum::<f64>()
                * grid.hx
                * grid.hz
                * lf.dt;
            let dwi = new_i.diff_norm_sq(&w_i, |r, k| inc.weight[r].get(k).copied().unwrap_or(0.0));
            let dwr = new_r.diff_norm_sq(&w_r, |r, k| refl.weight[r].get(k).copied().unwrap_or(0.0));
            let diff = du.sqrt() + dwi.sqrt() + dwr.sqrt();
            let ratio = trace.last().map(|p| if p.diff > 0.0 { diff / p.diff } else { f64::NAN });
            trace.push(PicardStep { iteration, diff_u: du.sqrt(), diff_wi: dwi.sqrt(), diff_wr: dwr.sqrt(), diff, ratio });
            mean = new_mean;
            w_i = new_i;
            w_r = new_r;
            if iteration > 1 && diff <= st.tol {
                converged = true;
                break;
            }
            if matches!(ratio, Some(r) if r >= 1.0) {
                non_decreasing += 1;
                if non_decreasing >= 5 {
                    return Err(Error::NoContraction(format!("differences grew over 5 consecutive iterations (last {diff:e})")));
                }
            } else {
                non_decreasing = 0;
            }
        }

        let mut defect = 0.0f64;
        for ri in 0..w_r.rays.len() {
            let n_in = w_i.rays[ri].s.len();
            if !refl.active[ri] || w_r.rays[ri].s.is_empty() || n_in == 0 {
                continue;
            }
            let a = w_r.modes_at(ri, 0);
            let b = w_i.modes_at(ri, n_in - 1);
            for (p, q) in a.iter().zip(b) {
                defect = defect.max((p + q).norm());
            }
        }
        Ok(PicardResult {
            mean,
            w_i,
            w_r,
            trace,
            converged,
            boundary_defect: defect,
            weights_i: inc.weight,
            weights_r: refl.weight,
            chi_i: inc.chi,
            chi_r: refl.chi,
            coef_r: refl.coef,
            source_norm_sq_i: src_norms.0,
            source_norm_sq_r: src_norms.1,
        })
    }

    /// Characteristic source modes times the cutoff along every active ray.
    fn ray_sources(&self, set: &RaySet, mean: &MeanField, w_i: &ProfileGrid, w_r: &ProfileGrid, kind: ChartKind) -> Vec<Vec<Modes>> {
        let st = &self.settings;
        let own = if kind == ChartKind::Incoming { w_i } else { w_r };
        (0..set.grid.rays.len())
            .into_par_iter()
            .map(|ri| {
                let n = set.grid.rays[ri].s.len();
                let zero = vec![Complex64::new(0.0, 0.0); st.n_modes];
                if !set.active[ri] || self.source.is_zero() {
                    return vec![zero; n];
                }
                let mut out = Vec::with_capacity(n);
                let mut other = zero.clone();
                for k in 0..n {
                    let sg = &set.geo[ri][k];
                    let mine = own.modes_at(ri, k);
                    other.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
                    if let Some((a, tau, s)) = sg.other {
                        let grid = if kind == ChartKind::Incoming { w_r } else { w_i };
                        grid.interp(a, tau, s, &mut other);
                    }
                    let (u, grad_u) = self.mean_state(mean, &sg.xz, sg.m[2]);
                    let (wr, wi) = if kind == ChartKind::Incoming { (&other[..], mine) } else { (mine, &other[..]) };
                    let d = self.decompose_at(sg.m, u, grad_u, wr, wi, sg.dphi_r);
                    let part = if kind == ChartKind::Incoming { d.char_i } else { d.char_r };
                    out.push(part.into_iter().map(|c| c * set.chi[ri]).collect());
                }
                out
            })
            .collect()
    }
}

fn sources_norm_sq(set: &RaySet, src: &[Vec<Modes>]) -> f64 {
    let mut acc = 0.0;
    for (ri, ray) in src.iter().enumerate() {
        for (k, modes) in ray.iter().enumerate() {
            let e: f64 = 2.0 * modes.iter().map(|c| c.norm_sqr()).sum::<f64>();
            acc += e * set.weight[ri][k] * trapezoid_weight(&set.grid.rays[ri].s, k);
        }
    }
    acc
}

/// Convenience entry point.
pub fn picard_iterate(geo: &RayGeometry, data: BumpData, source: SourceSpec, settings: PicardSettings) -> Result<PicardResult> {
    ProfileProblem { geo, data, source, settings }.solve()
}

/// Squared weighted L2 norm of a profile grid with the per-sample weights of a result.
pub fn profile_norm_sq(grid: &ProfileGrid, weights: &[Vec<f64>]) -> f64 {
    grid.weighted_norm_sq(|r, k| weights[r].get(k).copied().unwrap_or(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::obstacle::{Family, GraphObstacle};

    fn setup() -> RayGeometry {
        let ob = GraphObstacle::new(Family::Poly2D { coeffs: vec![1.0] }, 2, 2.0).unwrap();
        RayGeometry::new(ob, 1.0, 1.0, 1.2, 121, 60).unwrap()
    }

    fn data() -> BumpData {
        BumpData { center: [1.0, -1.3], radii: [0.35, 0.3], amplitude: 1.0, mode: 1, phase: 0.0 }
    }

    fn coarse() -> PicardSettings {
        PicardSettings { dlabel: 0.05, ds: 0.02, mean_h: 0.1, max_iter: 6, ..PicardSettings::default() }
    }

    #[test]
    fn zero_source_converges_immediately() {
        let g = setup();
        let r = picard_iterate(&g, data(), SourceSpec::Zero, coarse()).unwrap();
        assert!(r.converged);
        assert_eq!(r.trace.len(), 2);
        assert_eq!(r.trace[1].diff, 0.0);
        assert!(r.boundary_defect < 1e-14);
        assert!(profile_norm_sq(&r.w_r, &r.weights_r) > 0.0);
    }

    #[test]
    fn semilinear_source_contracts() {
        let g = setup();
        let r = picard_iterate(&g, data(), SourceSpec::SinDt { kappa: 0.1, psi: 0.5 }, coarse()).unwrap();
        let ratio = r.contraction_ratio().unwrap();
        assert!(ratio < 0.5, "ratio {ratio}");
        assert!(r.boundary_defect < 1e-12);
    }
}

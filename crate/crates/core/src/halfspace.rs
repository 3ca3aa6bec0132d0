//! Second-order leapfrog solver for `L u - u_tt = f` on a rectangle in the
//! half-space `X >= 0`, with Dirichlet data on the edges, where
//! `L u = a u_XX + 2 b u_XZ + c u_ZZ + d u_X + e u_Z`.
//!
//! Flattened coordinates `X = x1 - F(x2)`, `Z = x2` turn the exterior of a 2D
//! graph obstacle into the half-space; the wave operator becomes
//! `(1 + F'^2) u_XX - 2 F' u_XZ + u_ZZ - F'' u_X - u_tt`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform node grid `X_i = x0 + i hx`, `Z_j = z0 + j hz`, stored row-major in `i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2 {
    pub x0: f64,
    pub hx: f64,
    pub nx: usize,
    pub z0: f64,
    pub hz: f64,
    pub nz: usize,
}

impl Grid2 {
    /// Grid over `[x0, x1] x [z0, z1]` with spacing at most `h` in each direction.
    pub fn covering(x0: f64, x1: f64, z0: f64, z1: f64, h: f64) -> Self {
        let nx = ((x1 - x0) / h).ceil() as usize + 1;
        let nz = ((z1 - z0) / h).ceil() as usize + 1;
        Grid2 { x0, hx: (x1 - x0) / (nx - 1) as f64, nx, z0, hz: (z1 - z0) / (nz - 1) as f64, nz }
    }

    pub fn len(&self) -> usize {
        self.nx * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.nz + j
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + self.hx * i as f64
    }

    pub fn z(&self, j: usize) -> f64 {
        self.z0 + self.hz * j as f64
    }

    pub fn is_edge(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i + 1 == self.nx || j + 1 == self.nz
    }
}

/// Nodal coefficients `(a, b, c, d, e)` of the spatial operator.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub d: Vec<f64>,
    pub e: Vec<f64>,
    /// `F'(Z_j)` when the operator comes from a flattened graph, used for physical gradients.
    pub slope: Option<Vec<f64>>,
}

impl Coefficients {
    pub fn from_fn(grid: &Grid2, f: impl Fn(f64, f64) -> [f64; 5]) -> Self {
        let n = grid.len();
        let mut k = Coefficients { a: vec![0.0; n], b: vec![0.0; n], c: vec![0.0; n], d: vec![0.0; n], e: vec![0.0; n], slope: None };
        for i in 0..grid.nx {
            for j in 0..grid.nz {
                let v = f(grid.x(i), grid.z(j));
                let id = grid.idx(i, j);
                k.a[id] = v[0];
                k.b[id] = v[1];
                k.c[id] = v[2];
                k.d[id] = v[3];
                k.e[id] = v[4];
            }
        }
        k
    }

    /// The flat Laplacian.
    pub fn flat(grid: &Grid2) -> Self {
        let mut k = Self::from_fn(grid, |_, _| [1.0, 0.0, 1.0, 0.0, 0.0]);
        k.slope = Some(vec![0.0; grid.nz]);
        k
    }

    /// Laplacian in flattened coordinates of the graph `x1 = F(x2)`; `fd(z) = (F'(z), F''(z))`.
    pub fn flattened(grid: &Grid2, fd: impl Fn(f64) -> (f64, f64)) -> Self {
        let derivs: Vec<(f64, f64)> = (0..grid.nz).map(|j| fd(grid.z(j))).collect();
        let mut k = Self::from_fn(grid, |_, z| {
            let j = ((z - grid.z0) / grid.hz).round() as usize;
            let (fp, fpp) = derivs[j];
            [1.0 + fp * fp, -fp, 1.0, -fpp, 0.0]
        });
        k.slope = Some(derivs.iter().map(|d| d.0).collect());
        k
    }

    /// Gershgorin bound on the spectrum of the discrete `-L`.
    pub fn gershgorin(&self, grid: &Grid2) -> f64 {
        let (hx, hz) = (grid.hx, grid.hz);
        (0..grid.len())
            .map(|k| {
                4.0 * self.a[k] / (hx * hx)
                    + 4.0 * self.c[k] / (hz * hz)
                    + 2.0 * self.b[k].abs() / (hx * hz)
                    + self.d[k].abs() / hx
                    + self.e[k].abs() / hz
            })
            .fold(0.0, f64::max)
    }

    /// Largest stable leapfrog step `2 / sqrt(lambda_max)`.
    pub fn dt_limit(&self, grid: &Grid2) -> f64 {
        2.0 / self.gershgorin(grid).sqrt()
    }
}

fn apply_l(grid: &Grid2, k: &Coefficients, u: &[f64], i: usize, j: usize) -> f64 {
    let (hx, hz) = (grid.hx, grid.hz);
    let id = grid.idx(i, j);
    let c = u[id];
    let xp = u[grid.idx(i + 1, j)];
    let xm = u[grid.idx(i - 1, j)];
    let zp = u[grid.idx(i, j + 1)];
    let zm = u[grid.idx(i, j - 1)];
    let uxx = (xp - 2.0 * c + xm) / (hx * hx);
    let uzz = (zp - 2.0 * c + zm) / (hz * hz);
    let mut v = k.a[id] * uxx + k.c[id] * uzz;
    if k.b[id] != 0.0 {
        let uxz = (u[grid.idx(i + 1, j + 1)] - u[grid.idx(i + 1, j - 1)] - u[grid.idx(i - 1, j + 1)] + u[grid.idx(i - 1, j - 1)])
            / (4.0 * hx * hz);
        v += 2.0 * k.b[id] * uxz;
    }
    if k.d[id] != 0.0 {
        v += k.d[id] * (xp - xm) / (2.0 * hx);
    }
    if k.e[id] != 0.0 {
        v += k.e[id] * (zp - zm) / (2.0 * hz);
    }
    v
}

/// Initial data for the leapfrog scheme.
#[derive(Debug, Clone, PartialEq)]
pub enum Start {
    /// `u(t0)` and `u_t(t0)`; the first step is the second-order Taylor step.
    Taylor { u0: Vec<f64>, v0: Vec<f64> },
    /// Two consecutive layers `u(t0)` and `u(t0 + dt)`.
    Layers { u0: Vec<f64>, u1: Vec<f64> },
}

/// A time-stepping problem on `[t0, t0 + nt dt]`.
#[derive(Debug, Clone)]
pub struct Leapfrog {
    pub grid: Grid2,
    pub coef: Coefficients,
    pub t0: f64,
    pub dt: f64,
    pub nt: usize,
}

impl Leapfrog {
    /// Chooses `nt` so that `dt <= cfl * dt_limit` over `[t0, t1]`.
    pub fn new(grid: Grid2, coef: Coefficients, t0: f64, t1: f64, cfl: f64) -> Self {
        let limit = coef.dt_limit(&grid) * cfl;
        let nt = ((t1 - t0) / limit).ceil().max(1.0) as usize;
        Leapfrog { grid, coef, t0, dt: (t1 - t0) / nt as f64, nt }
    }

    pub fn t(&self, n: usize) -> f64 {
        self.t0 + self.dt * n as f64
    }

    /// Runs the scheme. `forcing(n, t, f)` fills `f` at layer `n`, `boundary(t, X, Z)`
    /// gives Dirichlet values on the edges and `store(n)` selects kept layers.
    pub fn solve(
        &self,
        start: Start,
        mut forcing: impl FnMut(usize, f64, &mut [f64]),
        boundary: impl Fn(f64, f64, f64) -> f64 + Sync,
        store: impl Fn(usize) -> bool,
    ) -> Result<MeanField> {
        let g = self.grid;
        let limit = self.coef.dt_limit(&g);
        if self.dt > limit {
            return Err(Error::CflViolation { dt: self.dt, limit });
        }
        let n = g.len();
        let dt2 = self.dt * self.dt;
        let mut f = vec![0.0; n];
        let set_edges = |u: &mut [f64], t: f64| {
            for i in 0..g.nx {
                for j in 0..g.nz {
                    if g.is_edge(i, j) {
                        u[g.idx(i, j)] = boundary(t, g.x(i), g.z(j));
                    }
                }
            }
        };
        let (mut prev, mut cur) = match start {
            Start::Layers { u0, u1 } => (u0, u1),
            Start::Taylor { u0, v0 } => {
                forcing(0, self.t0, &mut f);
                let mut u1 = u0.clone();
                for i in 1..g.nx - 1 {
                    for j in 1..g.nz - 1 {
                        let id = g.idx(i, j);
                        u1[id] = u0[id] + self.dt * v0[id] + 0.5 * dt2 * (apply_l(&g, &self.coef, &u0, i, j) - f[id]);
                    }
                }
                set_edges(&mut u1, self.t(1));
                (u0, u1)
            }
        };
        if prev.len() != n || cur.len() != n {
            return Err(Error::WrongDimension { expected: n, got: prev.len().min(cur.len()) });
        }
        let mut layers = Vec::new();
        if store(0) {
            layers.push((0, prev.clone()));
        }
        if store(1) {
            layers.push((1, cur.clone()));
        }
        let mut next = vec![0.0; n];
        for step in 1..self.nt {
            forcing(step, self.t(step), &mut f);
            let coef = &self.coef;
            next.par_chunks_mut(g.nz).enumerate().for_each(|(i, row)| {
                if i == 0 || i + 1 == g.nx {
                    return;
                }
                for j in 1..g.nz - 1 {
                    let id = g.idx(i, j);
                    row[j] = 2.0 * cur[id] - prev[id] + dt2 * (apply_l(&g, coef, &cur, i, j) - f[id]);
                }
            });
            set_edges(&mut next, self.t(step + 1));
            if next.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { what: format!("leapfrog layer {}", step + 1) });
            }
            std::mem::swap(&mut prev, &mut cur);
            std::mem::swap(&mut cur, &mut next);
            if store(step + 1) {
                layers.push((step + 1, cur.clone()));
            }
        }
        Ok(MeanField { grid: g, t0: self.t0, dt: self.dt, nt: self.nt, slope: self.coef.slope.clone(), layers })
    }
}

/// A stored solution on the space-time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanField {
    pub grid: Grid2,
    pub t0: f64,
    pub dt: f64,
    pub nt: usize,
    pub slope: Option<Vec<f64>>,
    /// Stored layers `(n, u(t0 + n dt))` in increasing `n`.
    pub layers: Vec<(usize, Vec<f64>)>,
}

impl MeanField {
    /// Zero field on every layer.
    pub fn zeros(grid: Grid2, t0: f64, dt: f64, nt: usize) -> Self {
        let layers = (0..=nt).map(|n| (n, vec![0.0; grid.len()])).collect();
        MeanField { grid, t0, dt, nt, slope: None, layers }
    }

    pub fn layer(&self, n: usize) -> Option<&[f64]> {
        self.layers
            .binary_search_by_key(&n, |(k, _)| *k)
            .ok()
            .map(|p| self.layers[p].1.as_slice())
    }

    fn slope_at(&self, j: usize) -> f64 {
        self.slope.as_ref().map(|s| s[j]).unwrap_or(0.0)
    }

    /// `(u, u_t)` at `(X, Z, t)` by bilinear interpolation in space and
    /// linear interpolation in time; requires every layer to be stored.
    pub fn sample(&self, x: f64, z: f64, t: f64) -> (f64, f64) {
        let g = &self.grid;
        let fx = (x - g.x0) / g.hx;
        let fz = (z - g.z0) / g.hz;
        let ft = (t - self.t0) / self.dt;
        if fx < 0.0 || fz < 0.0 || ft < 0.0 || fx > (g.nx - 1) as f64 || fz > (g.nz - 1) as f64 || ft > self.nt as f64 {
            return (0.0, 0.0);
        }
        let i = (fx.floor() as usize).min(g.nx - 2);
        let j = (fz.floor() as usize).min(g.nz - 2);
        let n = (ft.floor() as usize).min(self.nt.saturating_sub(1));
        let (ux, uz, ut) = (fx - i as f64, fz - j as f64, ft - n as f64);
        let spatial = |layer: &[f64]| {
            let v00 = layer[g.idx(i, j)];
            let v10 = layer[g.idx(i + 1, j)];
            let v01 = layer[g.idx(i, j + 1)];
            let v11 = layer[g.idx(i + 1, j + 1)];
            (1.0 - ux) * ((1.0 - uz) * v00 + uz * v01) + ux * ((1.0 - uz) * v10 + uz * v11)
        };
        match (self.layer(n), self.layer(n + 1)) {
            (Some(a), Some(b)) => {
                let (va, vb) = (spatial(a), spatial(b));
                ((1.0 - ut) * va + ut * vb, (vb - va) / self.dt)
            }
            _ => (0.0, 0.0),
        }
    }

    /// Physical `(u_x1, u_x2)` at an interior node of layer `layer`.
    pub fn gradient(&self, layer: &[f64], i: usize, j: usize) -> [f64; 2] {
        let g = &self.grid;
        let ux = (layer[g.idx(i + 1, j)] - layer[g.idx(i - 1, j)]) / (2.0 * g.hx);
        let uz = (layer[g.idx(i, j + 1)] - layer[g.idx(i, j - 1)]) / (2.0 * g.hz);
        [ux, uz - self.slope_at(j) * ux]
    }

    /// `int (u^2 + |grad u|^2 + u_t^2) dX dZ` between stored layers `n` and `n + 1`
    /// (midpoint in time) over interior nodes accepted by `window(X, Z)`.
    pub fn slab_energy(&self, n: usize, window: impl Fn(f64, f64) -> bool) -> Option<f64> {
        let (a, b) = (self.layer(n)?, self.layer(n + 1)?);
        let g = &self.grid;
        let mut acc = 0.0;
        let mid: Vec<f64> = a.iter().zip(b).map(|(p, q)| 0.5 * (p + q)).collect();
        for i in 1..g.nx - 1 {
            for j in 1..g.nz - 1 {
                if !window(g.x(i), g.z(j)) {
                    continue;
                }
                let id = g.idx(i, j);
                let gr = self.gradient(&mid, i, j);
                let ut = (b[id] - a[id]) / self.dt;
                acc += mid[id] * mid[id] + gr[0] * gr[0] + gr[1] * gr[1] + ut * ut;
            }
        }
        Some(acc * g.hx * g.hz)
    }

    /// Squared `H^1(Omega_T)` norm over all stored consecutive layer pairs.
    pub fn h1_norm_sq(&self) -> f64 {
        let mut acc = 0.0;
        for w in self.layers.windows(2) {
            if w[1].0 == w[0].0 + 1 {
                acc += self.slab_energy(w[0].0, |_, _| true).unwrap_or(0.0) * self.dt;
            }
        }
        acc
    }

    /// Squared `L^2(Omega_T)` norm of every stored layer (rectangle rule in time).
    pub fn l2_norm_sq(&self) -> f64 {
        let g = &self.grid;
        self.layers
            .iter()
            .map(|(_, u)| u.iter().map(|v| v * v).sum::<f64>() * g.hx * g.hz * self.dt)
            .sum()
    }

    /// Maximum absolute value on the `X = 0` edge over stored layers.
    pub fn dirichlet_defect(&self) -> f64 {
        let g = &self.grid;
        self.layers
            .iter()
            .flat_map(|(_, u)| (0..g.nz).map(move |j| u[g.idx(0, j)].abs()))
            .fold(0.0, f64::max)
    }

    /// CSV rows `t, X, Z, u` of a stored layer.
    pub fn csv_layer(&self, n: usize) -> Option<String> {
        let u = self.layer(n)?;
        let g = &self.grid;
        let t = self.t0 + self.dt * n as f64;
        let mut s = String::from("t,X,Z,u\n");
        for i in 0..g.nx {
            for j in 0..g.nz {
                s.push_str(&format!("{t},{},{},{}\n", g.x(i), g.z(j), u[g.idx(i, j)]));
            }
        }
        Some(s)
    }
}

/// Result of [`kreiss_ratio`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KreissReport {
    pub t_half_width: f64,
    pub u_h1: f64,
    pub f_l2: f64,
    pub ratio: f64,
}

/// Solves with zero data on `[-T, T]` and the forcing `f(X, Z, t)` and
/// returns `||u||_{H^1(Omega_T)} / ||f||_{L^2(Omega_T)}`.
pub fn kreiss_ratio(grid: Grid2, coef: Coefficients, t_half: f64, f: impl Fn(f64, f64, f64) -> f64 + Sync, cfl: f64) -> Result<KreissReport> {
    let lf = Leapfrog::new(grid, coef, -t_half, t_half, cfl);
    let zero = vec![0.0; grid.len()];
    let mut f_sq = 0.0;
    let sol = lf.solve(
        Start::Taylor { u0: zero.clone(), v0: zero },
        |_, t, out| {
            for i in 0..grid.nx {
                for j in 0..grid.nz {
                    out[grid.idx(i, j)] = f(grid.x(i), grid.z(j), t);
                }
            }
            f_sq += out.iter().map(|v| v * v).sum::<f64>() * grid.hx * grid.hz * lf.dt;
        },
        |_, _, _| 0.0,
        |_| true,
    )?;
    let u_h1 = sol.h1_norm_sq().sqrt();
    let f_l2 = f_sq.sqrt();
    Ok(KreissReport { t_half_width: t_half, u_h1, f_l2, ratio: u_h1 / f_l2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn eigenmode_error(n: usize) -> f64 {
        let grid = Grid2 { x0: 0.0, hx: PI / n as f64, nx: n + 1, z0: 0.0, hz: 1.0 / n as f64, nz: n + 1 };
        let coef = Coefficients::flat(&grid);
        let lf = Leapfrog::new(grid, coef, 0.0, 1.0, 0.5);
        let u0 = vec![0.0; grid.len()];
        let v0: Vec<f64> = (0..grid.len()).map(|k| grid.x(k / grid.nz).sin()).collect();
        let sol = lf
            .solve(Start::Taylor { u0, v0 }, |_, _, f| f.fill(0.0), |t, x, _| x.sin() * t.sin(), |n| n == lf.nt)
            .unwrap();
        let last = sol.layer(lf.nt).unwrap();
        (0..grid.len())
            .map(|k| (last[k] - grid.x(k / grid.nz).sin() * 1f64.sin()).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn eigenmode_second_order() {
        let e1 = eigenmode_error(32);
        let e2 = eigenmode_error(64);
        assert!(e1 < 1e-3);
        assert!((e1 / e2 - 4.0).abs() < 0.5, "ratio {}", e1 / e2);
    }

    #[test]
    fn cfl_violation_is_reported() {
        let grid = Grid2::covering(0.0, 1.0, 0.0, 1.0, 0.05);
        let coef = Coefficients::flat(&grid);
        let mut lf = Leapfrog::new(grid, coef, 0.0, 1.0, 0.9);
        lf.dt *= 2.0;
        let z = vec![0.0; grid.len()];
        let r = lf.solve(Start::Layers { u0: z.clone(), u1: z }, |_, _, _| {}, |_, _, _| 0.0, |_| false);
        assert!(matches!(r, Err(Error::CflViolation { .. })));
    }

    #[test]
    fn kreiss_ratio_shrinks_with_window() {
        let grid = Grid2::covering(0.0, 3.0, -1.5, 1.5, 0.05);
        let src = |x: f64, z: f64, _t: f64| (-(x - 1.5).powi(2) * 4.0 - z * z * 4.0).exp();
        let r1 = kreiss_ratio(grid, Coefficients::flat(&grid), 1.0, src, 0.8).unwrap();
        let r2 = kreiss_ratio(grid, Coefficients::flat(&grid), 0.5, src, 0.8).unwrap();
        assert!(r2.ratio < r1.ratio);
    }
}

//! Direct finite-difference reference solutions of the linear exterior
//! problem in flattened coordinates `X = x1 - F(x2)`, `Z = x2`, windowed
//! `H^1` energies, and the comparison against the assembled field.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::halfspace::{Coefficients, Grid2, Leapfrog, MeanField, Start};
use crate::rays::RayGeometry;
use crate::synthesis::FieldModel;

/// Grid and budget of a reference run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSettings {
    /// Grid nodes per wavelength `2 pi eps`.
    pub points_per_wavelength: f64,
    /// Flattened box `[X_lo, X_hi, Z_lo, Z_hi]`; `X_lo` must be 0.
    pub bbox: [f64; 4],
    pub cfl: f64,
    /// Largest admissible number of grid nodes.
    pub max_cells: usize,
}

impl Default for ReferenceSettings {
    fn default() -> Self {
        ReferenceSettings { points_per_wavelength: 16.0, bbox: [0.0, 3.5, -1.8, 1.4], cfl: 0.8, max_cells: 4_000_000 }
    }
}

/// Last two layers of a reference run ending at `t = T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    pub eps: f64,
    pub field: MeanField,
}

impl ReferenceSolution {
    /// Index of the first of the two stored layers.
    pub fn slab(&self) -> usize {
        self.field.nt - 1
    }
}

fn grid_for(rs: &ReferenceSettings, eps: f64) -> Result<Grid2> {
    let h = TAU * eps / rs.points_per_wavelength;
    let b = rs.bbox;
    let grid = Grid2::covering(b[0], b[1], b[2], b[3], h);
    if grid.len() > rs.max_cells {
        return Err(Error::ResourceBudget { cells: grid.len(), budget: rs.max_cells });
    }
    Ok(grid)
}

fn flattened_operator(geo: &RayGeometry, grid: &Grid2) -> Coefficients {
    let ob = &geo.flow.ob;
    Coefficients::flattened(grid, |z| {
        let e = ob.eval(&nalgebra::DVector::from_element(1, z)).expect("obstacle evaluation inside its ball");
        (e.grad[0], e.hess[(0, 0)])
    })
}

/// Assembled field (minus its mean part) on every node of `grid` at time `t`.
pub fn field_layer(model: &dyn FieldModel, geo: &RayGeometry, grid: &Grid2, eps: f64, t: f64) -> Result<Vec<f64>> {
    (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / grid.nz, k % grid.nz);
            let z = grid.z(j);
            let x = [grid.x(i) + geo.f(z), z];
            Ok(match model.components(&x, t)? {
                Some(c) => c.value(eps, (0.0, 0.0)) - c.u,
                None => 0.0,
            })
        })
        .collect()
}

/// Solves `box u = 0` outside the obstacle with `u = 0` on the boundary, starting
/// from two layers of the assembled field of `model` at `t = -T` and `-T + dt`.
pub fn reference_solve(model: &dyn FieldModel, geo: &RayGeometry, eps: f64, rs: &ReferenceSettings) -> Result<ReferenceSolution> {
    let grid = grid_for(rs, eps)?;
    let coef = flattened_operator(geo, &grid);
    let lf = Leapfrog::new(grid, coef, -geo.t_max, geo.t_max, rs.cfl);
    let mut u0 = field_layer(model, geo, &grid, eps, lf.t(0))?;
    let mut u1 = field_layer(model, geo, &grid, eps, lf.t(1))?;
    for layer in [&mut u0, &mut u1] {
        for i in 0..grid.nx {
            for j in 0..grid.nz {
                if grid.is_edge(i, j) {
                    layer[grid.idx(i, j)] = 0.0;
                }
            }
        }
    }
    let nt = lf.nt;
    let field = lf.solve(Start::Layers { u0, u1 }, |_, _, f| f.iter_mut().for_each(|v| *v = 0.0), |_, _, _| 0.0, |n| n + 1 >= nt)?;
    Ok(ReferenceSolution { eps, field })
}

/// Two layers of the assembled field on the grid and times of a reference run.
pub fn assembled_like(model: &dyn FieldModel, geo: &RayGeometry, reference: &ReferenceSolution) -> Result<MeanField> {
    let f = &reference.field;
    let n = reference.slab();
    let mut out = f.clone();
    out.layers = vec![
        (n, field_layer(model, geo, &f.grid, reference.eps, f.t0 + f.dt * n as f64)?),
        (n + 1, field_layer(model, geo, &f.grid, reference.eps, f.t0 + f.dt * (n + 1) as f64)?),
    ];
    Ok(out)
}

/// `int (u^2 + |grad u|^2 + u_t^2)` at the final slab over physical points accepted by `window`.
pub fn window_energy(field: &MeanField, geo: &RayGeometry, window: impl Fn(&[f64; 2]) -> bool) -> f64 {
    let n = field.layers.first().map(|l| l.0).unwrap_or(0);
    field.slab_energy(n, |x, z| window(&[x + geo.f(z), z])).unwrap_or(0.0)
}

/// Pointwise difference of two fields on the same grid and layers.
pub fn difference(a: &MeanField, b: &MeanField) -> MeanField {
    let mut out = a.clone();
    for ((_, u), (_, v)) in out.layers.iter_mut().zip(&b.layers) {
        u.iter_mut().zip(v).for_each(|(p, q)| *p -= q);
    }
    out
}

/// Windowed energies at `t = T` for one scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SilenceRow {
    pub eps: f64,
    pub shadow: f64,
    pub illuminated: f64,
}

/// Windowed energies across scales together with the monotonicity verdicts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SilenceReport {
    pub rows: Vec<SilenceRow>,
    /// Shadow energy strictly decreasing along the schedule.
    pub shadow_decreasing: bool,
    /// `max / min` of the illuminated energies.
    pub illuminated_spread: f64,
}

impl SilenceReport {
    pub fn from_rows(rows: Vec<SilenceRow>) -> Self {
        let shadow_decreasing = rows.windows(2).all(|w| w[1].shadow < w[0].shadow);
        let max = rows.iter().map(|r| r.illuminated).fold(0.0, f64::max);
        let min = rows.iter().map(|r| r.illuminated).fold(f64::INFINITY, f64::min);
        SilenceReport { rows, shadow_decreasing, illuminated_spread: max / min }
    }
}

/// Windows used by the silence checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Windows {
    /// `[x1_lo, x1_hi, x2_lo, x2_hi]`, exterior points only.
    pub shadow: [f64; 4],
    pub illuminated: [f64; 4],
}

impl Default for Windows {
    fn default() -> Self {
        Windows { shadow: [-10.0, 0.7, 0.55, 10.0], illuminated: [1.3, 10.0, -10.0, 10.0] }
    }
}

fn inside(b: &[f64; 4], x: &[f64; 2]) -> bool {
    x[0] >= b[0] && x[0] <= b[1] && x[1] >= b[2] && x[1] <= b[3]
}

/// Windowed energies of the assembled oscillation `u_a - u` on the grid of a
/// reference run; the shadow value vanishes when no profile reaches the window.
pub fn shadow_silence(model: &dyn FieldModel, geo: &RayGeometry, eps: &[f64], rs: &ReferenceSettings, win: &Windows) -> Result<SilenceReport> {
    let mut rows = Vec::new();
    for &e in eps {
        let grid = grid_for(rs, e)?;
        let dt = 0.5 * grid.hx.min(grid.hz);
        let field = MeanField {
            grid,
            t0: geo.t_max - dt,
            dt,
            nt: 1,
            slope: flattened_operator(geo, &grid).slope,
            layers: vec![
                (0, field_layer(model, geo, &grid, e, geo.t_max - dt)?),
                (1, field_layer(model, geo, &grid, e, geo.t_max)?),
            ],
        };
        rows.push(SilenceRow {
            eps: e,
            shadow: window_energy(&field, geo, |x| inside(&win.shadow, x)),
            illuminated: window_energy(&field, geo, |x| inside(&win.illuminated, x)),
        });
    }
    Ok(SilenceReport::from_rows(rows))
}

/// The same windowed energies for direct reference solutions.
pub fn reference_silence(model: &dyn FieldModel, geo: &RayGeometry, eps: &[f64], rs: &ReferenceSettings, win: &Windows) -> Result<SilenceReport> {
    let mut rows = Vec::new();
    for &e in eps {
        let sol = reference_solve(model, geo, e, rs)?;
        rows.push(SilenceRow {
            eps: e,
            shadow: window_energy(&sol.field, geo, |x| inside(&win.shadow, x)),
            illuminated: window_energy(&sol.field, geo, |x| inside(&win.illuminated, x)),
        });
    }
    Ok(SilenceReport::from_rows(rows))
}

/// One row of the reference comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub eps: f64,
    pub h: f64,
    pub cells: usize,
    /// `||u_ref - u_a||_{H^1}` over the comparison region at `t = T`.
    pub error: f64,
    /// `||u_ref||_{H^1}` over the same region.
    pub reference_norm: f64,
}

/// Errors across scales and the observed rate (logged without claim).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub rows: Vec<CompareRow>,
    /// `log(e_k / e_{k+1}) / log(eps_k / eps_{k+1})` for consecutive rows.
    pub rates: Vec<f64>,
}

impl CompareReport {
    /// Whether each error is at most `(1 + tol)` times the previous one.
    pub fn decreasing(&self, tol: f64) -> bool {
        self.rows.windows(2).all(|w| w[1].error <= (1.0 + tol) * w[0].error)
    }
}

/// Compares reference runs (started from `start`) with the assembled field of `model`
/// at `t = T` over exterior points whose ray labels stay `margin` away from grazing.
pub fn reference_compare(
    start: &dyn FieldModel,
    model: &dyn FieldModel,
    geo: &RayGeometry,
    eps: &[f64],
    rs: &ReferenceSettings,
    margin: f64,
) -> Result<CompareReport> {
    let mut rows = Vec::new();
    for &e in eps {
        let sol = reference_solve(start, geo, e, rs)?;
        let asm = assembled_like(model, geo, &sol)?;
        let g = sol.field.grid;
        let mask: Vec<bool> = (0..g.len())
            .into_par_iter()
            .map(|k| {
                let (i, j) = (k / g.nz, k % g.nz);
                let z = g.z(j);
                let x = [g.x(i) + geo.f(z), z];
                if geo.grazing_coord(x[0]) < margin {
                    return Ok(false);
                }
                Ok(match geo.reflected_spot(&x)? {
                    Some(sp) => geo.grazing_coord(sp.a) >= margin,
                    None => true,
                })
            })
            .collect::<Result<_>>()?;
        let region = |x: f64, z: f64| {
            let i = ((x - g.x(0)) / g.hx).round() as usize;
            let j = ((z - g.z(0)) / g.hz).round() as usize;
            mask[g.idx(i, j)]
        };
        let n = sol.slab();
        let diff = difference(&sol.field, &asm);
        let error = diff.slab_energy(n, region).unwrap_or(0.0).sqrt();
        let reference_norm = sol.field.slab_energy(n, region).unwrap_or(0.0).sqrt();
        rows.push(CompareRow { eps: e, h: g.hx, cells: g.len(), error, reference_norm });
    }
    let rates = rows
        .windows(2)
        .map(|w| (w[0].error / w[1].error).ln() / (w[0].eps / w[1].eps).ln())
        .collect();
    Ok(CompareReport { rows, rates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::obstacle::{Family, GraphObstacle};
    use crate::rays::{BumpData, LinearOptics};
    use crate::source::SourceSpec;
    use crate::synthesis::{CorrectorSettings, LinearModel};

    fn geometry() -> RayGeometry {
        let ob = GraphObstacle::new(Family::Poly2D { coeffs: vec![1.0] }, 2, 2.0).unwrap();
        RayGeometry::new(ob, 1.0, 1.0, 1.2, 121, 60).unwrap()
    }

    fn model(g: &RayGeometry, amplitude: f64, mu: f64) -> LinearModel<'_> {
        let data = BumpData { center: [1.0, -1.3], radii: [0.35, 0.3], amplitude, mode: 1, phase: 0.0 };
        LinearModel { optics: LinearOptics { geo: g, data, n_modes: 1, mu }, source: SourceSpec::Zero, corrector: CorrectorSettings::default() }
    }

    #[test]
    fn budget_is_enforced() {
        let g = geometry();
        let m = model(&g, 1.0, 0.0);
        let rs = ReferenceSettings { max_cells: 1000, ..ReferenceSettings::default() };
        assert!(matches!(reference_solve(&m, &g, 0.1, &rs), Err(Error::ResourceBudget { .. })));
    }

    #[test]
    fn zero_data_gives_zero_error() {
        let g = geometry();
        let m = model(&g, 0.0, 0.0);
        let rs = ReferenceSettings { points_per_wavelength: 6.0, ..ReferenceSettings::default() };
        let rep = reference_compare(&m, &m, &g, &[0.1], &rs, 0.3).unwrap();
        assert_eq!(rep.rows[0].error, 0.0);
    }

    #[test]
    fn assembled_shadow_is_silent() {
        let g = geometry();
        let m = model(&g, 1.0, 0.1);
        let rs = ReferenceSettings { points_per_wavelength: 12.0, ..ReferenceSettings::default() };
        let rep = shadow_silence(&m, &g, &[0.1, 0.05], &rs, &Windows::default()).unwrap();
        assert!(rep.rows.iter().all(|r| r.shadow == 0.0 && r.illuminated > 0.0), "{rep:?}");
        assert!(rep.illuminated_spread < 2.0);
    }
}

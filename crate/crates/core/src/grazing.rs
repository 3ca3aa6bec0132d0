//! Grazing set of an incoming plane wave and its defining function `zeta`.
//!
//! For the plane phase `-t + <theta, xbar>` the grazing set is
//! `{<grad F(xbar), theta> = 0}`. Three constructions of `zeta` are
//! provided: `zeta = x2` in two dimensions, `zeta = <theta, Lambda xbar>`
//! for radial obstacles, and in three dimensions the quotient form
//! `zeta = l(xbar) + <grad r, theta> / G(xbar)` built from the factored
//! leading grazing polynomial `g_2k = l * G`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{poly_diff, poly_eval, poly_homogeneous_part, Poly};
use crate::obstacle::GraphObstacle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regularity {
    Smooth,
    C1Only,
}

/// The unique real zero line of the leading grazing form in three dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroLine {
    /// Unit direction `(u2, u3)` of the line.
    pub direction: [f64; 2],
    /// Coefficients `(a2, a3)` of the linear factor `l = a2 x2 + a3 x3`,
    /// normalized so that the larger-magnitude coefficient equals one.
    pub normal: [f64; 2],
}

impl ZeroLine {
    /// Slope `c` of the line written as `x3 = c x2`.
    pub fn x3_per_x2(&self) -> f64 {
        self.direction[1] / self.direction[0]
    }

    /// Slope `c` of the line written as `x2 = c x3`.
    pub fn x2_per_x3(&self) -> f64 {
        self.direction[0] / self.direction[1]
    }
}

#[derive(Debug, Clone)]
enum ZetaKind {
    TwoD,
    Radial {
        lambda_theta: DVector<f64>,
    },
    Quotient {
        normal: [f64; 2],
        g_quot: Poly,
        g_quot_grad: [Poly; 2],
        rem_theta: Poly,
        rem_theta_grad: [Poly; 2],
    },
}

/// Defining function of the grazing set with its gradient.
#[derive(Debug, Clone)]
pub struct GrazingSetChart {
    kind: ZetaKind,
    pub theta: DVector<f64>,
    pub regularity: Regularity,
    pub line: Option<ZeroLine>,
    /// Half the glancing order of the leading form (`2k`), when known.
    pub leading_degree: Option<u32>,
    /// Guard constant `C` with `G(xbar) >= C |xbar|^(2k-2)`.
    pub guard_constant: Option<f64>,
    /// Sign `o` such that `o * zeta <= 0` exactly on the illuminable side.
    pub orientation: f64,
}

impl GrazingSetChart {
    pub fn zeta(&self, x: &DVector<f64>) -> f64 {
        match &self.kind {
            ZetaKind::TwoD => x[0],
            ZetaKind::Radial { lambda_theta } => lambda_theta.dot(x),
            ZetaKind::Quotient {
                normal,
                g_quot,
                rem_theta,
                ..
            } => {
                let l = normal[0] * x[0] + normal[1] * x[1];
                if x.norm() == 0.0 {
                    return 0.0;
                }
                let g = poly_eval(g_quot, x.as_slice());
                l + poly_eval(rem_theta, x.as_slice()) / g
            }
        }
    }

    pub fn grad_zeta(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.kind {
            ZetaKind::TwoD => DVector::from_element(1, 1.0),
            ZetaKind::Radial { lambda_theta } => lambda_theta.clone(),
            ZetaKind::Quotient {
                normal,
                g_quot,
                g_quot_grad,
                rem_theta,
                rem_theta_grad,
            } => {
                let mut out = DVector::from_vec(vec![normal[0], normal[1]]);
                if x.norm() == 0.0 {
                    return out;
                }
                let xs = x.as_slice();
                let g = poly_eval(g_quot, xs);
                let rt = poly_eval(rem_theta, xs);
                for i in 0..2 {
                    let dg = poly_eval(&g_quot_grad[i], xs);
                    let dr = poly_eval(&rem_theta_grad[i], xs);
                    out[i] += (dr * g - rt * dg) / (g * g);
                }
                out
            }
        }
    }

    /// Oriented coordinate: non-positive exactly on the illuminable side.
    pub fn oriented(&self, x: &DVector<f64>) -> f64 {
        self.orientation * self.zeta(x)
    }

    /// `H_p zeta` at the base point `(1, 0, t0; 0, theta, -1)`: `2 <theta, grad zeta(0)>`.
    pub fn hp_zeta_at_base(&self) -> f64 {
        let z = DVector::zeros(self.theta.len());
        2.0 * self.theta.dot(&self.grad_zeta(&z))
    }
}

fn normalize(theta: &DVector<f64>) -> Result<DVector<f64>> {
    let n = theta.norm();
    if !(n > 0.0) {
        return Err(Error::Unsupported("incidence direction must be non-zero".into()));
    }
    Ok(theta / n)
}

/// Homogeneous bivariate polynomial as coefficients `p_j` of `x2^(D-j) x3^j`.
fn bivariate_coeffs(p: &Poly, degree: u32) -> Vec<f64> {
    let mut c = vec![0.0; degree as usize + 1];
    for (k, v) in p {
        c[k[1] as usize] += v;
    }
    c
}

fn bivariate_poly(c: &[f64]) -> Poly {
    let d = c.len() as u32 - 1;
    let mut p = Poly::new();
    for (j, v) in c.iter().enumerate() {
        if *v != 0.0 {
            p.insert(vec![d - j as u32, j as u32], *v);
        }
    }
    p
}

/// Divides a homogeneous bivariate form by `a2 x2 + a3 x3`; returns the quotient
/// and the remainder.
fn divide_linear(c: &[f64], a: [f64; 2]) -> (Vec<f64>, f64) {
    let d = c.len() - 1;
    if a[0].abs() >= a[1].abs() {
        // Long division in x2 with x3-coefficients.
        let mut q = vec![0.0; d];
        let mut rem = c.to_vec();
        for j in 0..d {
            q[j] = rem[j] / a[0];
            rem[j] -= q[j] * a[0];
            rem[j + 1] -= q[j] * a[1];
        }
        (q, rem[d])
    } else {
        let mut q = vec![0.0; d];
        let mut rem = c.to_vec();
        for j in (0..d).rev() {
            q[j] = rem[j + 1] / a[1];
            rem[j + 1] -= q[j] * a[1];
            rem[j] -= q[j] * a[0];
        }
        (q, rem[0])
    }
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let mut fa = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
        if (b - a).abs() < 1e-16 {
            break;
        }
    }
    0.5 * (a + b)
}

/// Angles in `[0, 2 pi)` where `f(cos psi, sin psi)` changes sign.
pub fn circle_roots<F: Fn(f64, f64) -> f64>(f: F, samples: usize) -> Vec<f64> {
    let g = |psi: f64| f(psi.cos(), psi.sin());
    let step = std::f64::consts::TAU / samples as f64;
    let offset = 0.5 * step * 0.618_033_988_7;
    let mut roots = Vec::new();
    for i in 0..samples {
        let a = offset + i as f64 * step;
        let b = a + step;
        let (fa, fb) = (g(a), g(b));
        if fa == 0.0 {
            roots.push(a);
        } else if fa * fb < 0.0 {
            roots.push(bisect(&g, a, b));
        }
    }
    roots
}

fn build_quotient(ob: &GraphObstacle, theta: &DVector<f64>) -> Result<GrazingSetChart> {
    let expr = ob
        .expression()
        .ok_or_else(|| Error::Unsupported("three-dimensional chart needs a polynomial obstacle".into()))?;
    let f = expr
        .to_poly(2)
        .ok_or_else(|| Error::Unsupported("three-dimensional chart needs a polynomial obstacle".into()))?;
    let max_deg = f.keys().map(|k| k.iter().sum::<u32>()).max().unwrap_or(0);
    let mut lead_deg = None;
    for d in 2..=max_deg {
        if !poly_homogeneous_part(&f, d).is_empty() {
            lead_deg = Some(d);
            break;
        }
    }
    let d = lead_deg.ok_or_else(|| Error::DegenerateLeadingForm("F is constant".into()))?;
    if d % 2 == 1 {
        return Err(Error::DegenerateLeadingForm(format!("leading form has odd degree {d}")));
    }
    let lead = poly_homogeneous_part(&f, d);
    let mut rem = f.clone();
    for (k, v) in &lead {
        *rem.get_mut(k).unwrap() -= v;
    }
    if let Some(c) = rem.get_mut(&vec![0, 0]) {
        *c -= 1.0;
    }
    rem.retain(|_, v| *v != 0.0);

    let theta_dot = |p: &Poly| -> Poly {
        let mut out = Poly::new();
        for i in 0..2 {
            for (k, v) in poly_diff(p, i) {
                *out.entry(k).or_insert(0.0) += theta[i] * v;
            }
        }
        out.retain(|_, v| *v != 0.0);
        out
    };
    let g_lead = theta_dot(&lead);
    if g_lead.is_empty() {
        return Err(Error::DegenerateLeadingForm("g_2k vanishes identically".into()));
    }
    let gc = bivariate_coeffs(&g_lead, d - 1);
    let roots = circle_roots(|c, s| poly_eval(&g_lead, &[c, s]), 7200);
    if roots.is_empty() {
        return Err(Error::DegenerateLeadingForm("no real zero line".into()));
    }
    if roots.len() > 2 {
        return Err(Error::MultipleZeroLines { lines: roots.len().div_ceil(2) });
    }
    let psi = roots[0];
    let dir = [psi.cos(), psi.sin()];
    let mut normal = [-dir[1], dir[0]];
    let big = if normal[0].abs() >= normal[1].abs() { normal[0] } else { normal[1] };
    normal = [normal[0] / big, normal[1] / big];
    let (mut q, remainder) = divide_linear(&gc, normal);
    let scale = gc.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if remainder.abs() > 1e-8 * scale.max(1.0) {
        return Err(Error::DegenerateLeadingForm(format!(
            "linear factor leaves remainder {remainder:e}"
        )));
    }
    let mut g_quot = bivariate_poly(&q);
    // Orient G to be positive and estimate the guard constant on the unit circle.
    let mut gmin = f64::INFINITY;
    let mut gmax = f64::NEG_INFINITY;
    for i in 0..3600 {
        let a = std::f64::consts::TAU * i as f64 / 3600.0;
        let v = poly_eval(&g_quot, &[a.cos(), a.sin()]);
        gmin = gmin.min(v);
        gmax = gmax.max(v);
    }
    if gmax <= 0.0 {
        for v in q.iter_mut() {
            *v = -*v;
        }
        normal = [-normal[0], -normal[1]];
        g_quot = bivariate_poly(&q);
        std::mem::swap(&mut gmin, &mut gmax);
        gmin = -gmin;
    }
    if !(gmin > 1e-10 * gmax.abs()) {
        return Err(Error::DegenerateLeadingForm(format!(
            "G is not bounded below on the unit circle (min {gmin:e})"
        )));
    }
    let rem_theta = theta_dot(&rem);
    let g_quot_grad = [poly_diff(&g_quot, 0), poly_diff(&g_quot, 1)];
    let rem_theta_grad = [poly_diff(&rem_theta, 0), poly_diff(&rem_theta, 1)];
    let k = d / 2;
    let mut chart = GrazingSetChart {
        kind: ZetaKind::Quotient {
            normal,
            g_quot,
            g_quot_grad,
            rem_theta,
            rem_theta_grad,
        },
        theta: theta.clone(),
        regularity: if k > 1 { Regularity::C1Only } else { Regularity::Smooth },
        line: Some(ZeroLine { direction: dir, normal }),
        leading_degree: Some(d),
        guard_constant: Some(gmin),
        orientation: 1.0,
    };
    chart.orientation = orientation(ob, &chart)?;
    Ok(chart)
}

fn orientation(ob: &GraphObstacle, chart: &GrazingSetChart) -> Result<f64> {
    let m = ob.m();
    let g0 = chart.grad_zeta(&DVector::zeros(m));
    let probe = -g0.normalize() * (0.3 * ob.r).min(0.3);
    let g = ob.eval(&probe)?.grad.dot(&chart.theta);
    Ok(if g > 0.0 { 1.0 } else { -1.0 })
}

/// Constructs `zeta` for the plane wave with direction `theta`.
pub fn build_grazing_chart(ob: &GraphObstacle, theta: &DVector<f64>) -> Result<GrazingSetChart> {
    let m = ob.m();
    if theta.len() != m {
        return Err(Error::WrongDimension { expected: m, got: theta.len() });
    }
    let theta = normalize(theta)?;
    if m == 1 {
        let mut chart = GrazingSetChart {
            kind: ZetaKind::TwoD,
            theta: theta.clone(),
            regularity: Regularity::Smooth,
            line: None,
            leading_degree: None,
            guard_constant: None,
            orientation: 1.0,
        };
        chart.orientation = orientation(ob, &chart)?;
        return Ok(chart);
    }
    if let Some(lambda) = ob.radial_matrix() {
        let mut chart = GrazingSetChart {
            kind: ZetaKind::Radial {
                lambda_theta: &lambda * &theta,
            },
            theta: theta.clone(),
            regularity: Regularity::Smooth,
            line: None,
            leading_degree: None,
            guard_constant: None,
            orientation: 1.0,
        };
        chart.orientation = orientation(ob, &chart)?;
        return Ok(chart);
    }
    if m == 2 {
        return build_quotient(ob, &theta);
    }
    Err(Error::Unsupported(format!(
        "grazing chart for a non-radial obstacle in dimension {}",
        ob.dim
    )))
}

/// Sign-bracketing comparison of `zeta` against `<grad F, theta>` on a grid.
///
/// Returns the number of grid points where the oriented `zeta` and `-g`
/// have strictly opposite signs beyond `tol`, together with the points checked.
pub fn cozero_mismatches(ob: &GraphObstacle, chart: &GrazingSetChart, per_axis: usize, tol: f64) -> Result<(usize, usize)> {
    let m = ob.m();
    let r = 0.9 * ob.r;
    let mut bad = 0;
    let mut total = 0;
    let count = per_axis.pow(m as u32);
    for idx in 0..count {
        let mut rem = idx;
        let x = DVector::from_fn(m, |_, _| {
            let i = rem % per_axis;
            rem /= per_axis;
            -r + 2.0 * r * i as f64 / (per_axis - 1) as f64
        });
        if x.norm() >= r {
            continue;
        }
        total += 1;
        let z = chart.oriented(&x);
        let g = ob.eval(&x)?.grad.dot(&chart.theta);
        if (z > tol && g > tol) || (z < -tol && g < -tol) {
            bad += 1;
        }
    }
    Ok((bad, total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::obstacle::{Family, QuarticVariant};
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    #[test]
    fn divide_linear_recovers_factor() {
        // (x2 - 2 x3)(x2^2 + x3^2) = x2^3 - 2 x2^2 x3 + x2 x3^2 - 2 x3^3
        let c = [1.0, -2.0, 1.0, -2.0];
        let (q, r) = divide_linear(&c, [1.0, -2.0]);
        assert_relative_eq!(r, 0.0);
        assert_eq!(q, vec![1.0, 0.0, 1.0]);
        let (q, r) = divide_linear(&c, [-0.5, 1.0]);
        assert_relative_eq!(r, 0.0, epsilon = 1e-14);
        assert_relative_eq!(q[0], -2.0, epsilon = 1e-14);
        assert_relative_eq!(q[2], -2.0, epsilon = 1e-14);
    }

    #[test]
    fn f3_line_is_antidiagonal() {
        let ob = GraphObstacle::new(
            Family::Quartic3D { variant: QuarticVariant::F3, remainder: None },
            3,
            1.0,
        )
        .unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let chart = build_grazing_chart(&ob, &DVector::from_vec(vec![s, s])).unwrap();
        let line = chart.line.unwrap();
        assert_relative_eq!(line.x2_per_x3(), -1.0, epsilon = 1e-12);
        assert_eq!(chart.regularity, Regularity::C1Only);
    }

    #[test]
    fn radial_zeta_is_lambda_theta() {
        let lambda = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0]));
        let ob = GraphObstacle::new(Family::Radial { h: vec![0.0, 1.0], lambda }, 3, 1.0).unwrap();
        let chart = build_grazing_chart(&ob, &DVector::from_vec(vec![1.0, 0.0])).unwrap();
        let x = DVector::from_vec(vec![0.3, -0.2]);
        assert_relative_eq!(chart.zeta(&x), 0.3);
        assert_eq!(chart.regularity, Regularity::Smooth);
    }

    #[test]
    fn two_d_orientation_follows_theta() {
        let ob = GraphObstacle::new(Family::Poly2D { coeffs: vec![1.0] }, 2, 2.0).unwrap();
        let up = build_grazing_chart(&ob, &DVector::from_element(1, 1.0)).unwrap();
        let down = build_grazing_chart(&ob, &DVector::from_element(1, -1.0)).unwrap();
        let x = DVector::from_element(1, -0.5);
        assert!(up.oriented(&x) < 0.0);
        assert!(down.oriented(&x) > 0.0);
    }

    #[test]
    fn sum_of_powers_is_degenerate() {
        let e = crate::expr::Expr::parse("1 - (x2^4 + x3^4)").unwrap();
        let ob = GraphObstacle::new(Family::Custom { expr: e }, 3, 1.0).unwrap();
        let err = build_grazing_chart(&ob, &DVector::from_vec(vec![1.0, 0.0])).unwrap_err();
        assert!(matches!(err, Error::DegenerateLeadingForm(_)));
    }
}

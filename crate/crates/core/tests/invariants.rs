//! Property tests of the structural invariants: convexity of the obstacle
//! families, null bicharacteristics, the reflected covector and Jacobian,
//! the grazing-set chart, source splitting, expression jets and scenario
//! round trips.

use std::f64::consts::TAU;

use approx::assert_relative_eq;
use diffract::expr::Expr;
use diffract::flow::{glancing_order, integrate_bichar, plane_wave_start, CotangentPoint};
use diffract::grazing::build_grazing_chart;
use diffract::obstacle::{Family, GraphObstacle, QuarticVariant};
use diffract::phase::{matrix_lemmas_from_gradient, ReflectedFlow};
use diffract::profile::{eval_modes, transport_modes};
use diffract::scenario::Scenario;
use diffract::source::decompose_samples;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;

const PARABOLA: &str = include_str!("../scenarios/parabola.toml");

fn families() -> Vec<GraphObstacle> {
    let mut out = vec![
        GraphObstacle::new(Family::Poly2D { coeffs: vec![1.0, 0.0, 0.3] }, 2, 1.0).unwrap(),
        GraphObstacle::new(Family::ExpFlat, 2, 0.8).unwrap(),
        GraphObstacle::new(Family::Quartic3D { variant: QuarticVariant::F3, remainder: None }, 3, 0.6).unwrap(),
        GraphObstacle::new(Family::Quartic3D { variant: QuarticVariant::F5, remainder: None }, 3, 0.6).unwrap(),
        GraphObstacle::new(
            Family::Radial { h: vec![0.0, 1.0, 0.5], lambda: DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]) },
            3,
            0.5,
        )
        .unwrap(),
    ];
    for k in 1..=3 {
        out.push(GraphObstacle::new(Family::IsoPower { k }, 4, 0.6).unwrap());
    }
    out
}

/// A point of the open ball of radius `0.95 r` in dimension `m`, from unit-cube coordinates.
fn in_ball(u: &[f64], m: usize, r: f64) -> DVector<f64> {
    let v = DVector::from_fn(m, |i, _| 2.0 * u[i] - 1.0);
    let n = v.norm();
    if n > 1.0 {
        v * (0.95 * r / n)
    } else {
        v * (0.95 * r)
    }
}

fn unit_from_angle(m: usize, a: f64, b: f64) -> DVector<f64> {
    let v = match m {
        1 => DVector::from_element(1, 1.0),
        2 => DVector::from_vec(vec![a.cos(), a.sin()]),
        _ => DVector::from_fn(m, |i, _| (a * (i + 1) as f64 + b).cos() + 0.1),
    };
    v.normalize()
}

fn cube(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..1.0f64, n)
}

#[test]
fn normalization_at_the_base_point() {
    for ob in families() {
        let e = ob.eval(&DVector::zeros(ob.m())).unwrap();
        assert_eq!(e.f, 1.0);
        assert!(e.grad.amax() == 0.0, "{:?}", ob.family);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn supporting_hyperplane_inequality(which in 0usize..8, u in cube(3), v in cube(3)) {
        let ob = &families()[which];
        let m = ob.m();
        let x = in_ball(&u, m, ob.r);
        let y = in_ball(&v, m, ob.r);
        let ex = ob.eval(&x).unwrap();
        let fy = ob.value(&y).unwrap();
        let gap = ex.grad.dot(&(&y - &x)) - (fy - ex.f);
        prop_assert!(gap >= -1e-13, "gap {gap} for {:?}", ob.family);
        if (&y - &x).norm() > 1e-3 && !matches!(ob.family, Family::ExpFlat) {
            prop_assert!(gap > 0.0);
        }
    }

    #[test]
    fn null_bicharacteristics_stay_null(x in cube(3), dir in cube(3), s in 0.1..3.0f64) {
        let xi = DVector::from_fn(3, |i, _| dir[i] - 0.5);
        prop_assume!(xi.norm() > 1e-2);
        let xi = xi.normalize();
        let start = CotangentPoint::new(DVector::from_column_slice(&x), 0.0, xi, -1.0);
        let bc = integrate_bichar(&start, s, 1e-12).unwrap();
        for (_, p) in &bc.samples {
            prop_assert!((p.xi.norm_squared() - p.tau * p.tau).abs() <= 1e-12);
        }
        let end = bc.end();
        prop_assert!((end.t - 2.0 * s).abs() <= 1e-10);
    }

    #[test]
    fn order_is_rotation_invariant(k in 1u32..=3, a in 0.0..TAU) {
        let ob = GraphObstacle::new(Family::IsoPower { k }, 3, 0.6).unwrap();
        let base = glancing_order(&ob, &DVector::from_vec(vec![1.0, 0.0]), &DVector::zeros(2), 12).unwrap();
        let rotated = glancing_order(&ob, &unit_from_angle(2, a, 0.0), &DVector::zeros(2), 12).unwrap();
        prop_assert_eq!(base.order, rotated.order);
        prop_assert_eq!(base.kind, rotated.kind);
    }

    #[test]
    fn reflected_covector_is_null_and_jacobian_bounded(which in 0usize..8, u in cube(3), a in 0.0..TAU, b in 0.0..TAU, s in 0.0..1.5f64) {
        let ob = families()[which].clone();
        let m = ob.m();
        let x = in_ball(&u, m, ob.r);
        let grad = ob.eval(&x).unwrap().grad;
        let mut theta = unit_from_angle(m, a, b);
        if grad.dot(&theta) < 0.0 {
            theta = -theta;
        }
        let g = grad.dot(&theta);
        prop_assume!(g > 1e-3);
        let flow = ReflectedFlow::new(ob, &theta).unwrap();
        let cov = flow.covector(&x).unwrap();
        prop_assert!((cov.xi1 * cov.xi1 + cov.xibar.norm_squared() - 1.0).abs() <= 1e-13);
        let j0 = flow.jacobian_analytic(0.0, &x).unwrap();
        let j1 = flow.jacobian_analytic(s, &x).unwrap();
        prop_assert!(j0 >= 2.0 * g - 1e-12 * (1.0 + grad.norm()));
        prop_assert!(j1 >= j0 - 1e-12 * (1.0 + grad.norm()));
    }

    #[test]
    fn matrix_identities_for_random_gradients(g in prop::collection::vec(-2.0..2.0f64, 4), a in 0.0..TAU, b in 0.0..TAU) {
        let grad = DVector::from_vec(g);
        let mut theta = unit_from_angle(4, a, b);
        if theta.dot(&grad) < 0.0 {
            theta = -theta;
        }
        prop_assume!(theta.dot(&grad) > 1e-2);
        let rep = matrix_lemmas_from_gradient(&grad, &theta).unwrap();
        prop_assert!(rep.passes(1e-12), "{rep:?}");
    }

    #[test]
    fn radial_zeta_vanishes_with_the_incidence(a in 0.0..TAU, u in cube(2)) {
        let lambda = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 2.0]);
        let ob = GraphObstacle::new(Family::Radial { h: vec![0.0, 1.0, 0.2], lambda }, 3, 0.6).unwrap();
        let theta = unit_from_angle(2, a, 0.0);
        let chart = build_grazing_chart(&ob, &theta).unwrap();
        let x = in_ball(&u, 2, 0.6);
        let g = ob.eval(&x).unwrap().grad.dot(&theta);
        let z = chart.oriented(&x);
        if g.abs() > 1e-10 {
            prop_assert!(z * g < 0.0, "zeta {z} against incidence {g}");
        }
        prop_assert!(chart.grad_zeta(&DVector::zeros(2)).norm() > 0.0);
    }

    #[test]
    fn source_split_reassembles(c in prop::collection::vec(-1.0..1.0f64, 6), tr in 0.0..TAU, ti in 0.0..TAU) {
        let f = |r: f64, i: f64| c[0] + c[1] * r.sin() + c[2] * (2.0 * i).cos() + c[3] * (r - i).sin() + c[4] * (r + 2.0 * i).cos() + c[5] * (3.0 * r).sin() * i.cos();
        let dec = decompose_samples(f, 16, 4, 4);
        prop_assert!((dec.eval(tr, ti) - f(tr, ti)).abs() <= 1e-12);
        prop_assert!(dec.tail_sq <= 1e-12);
        let n = 32;
        let nc_mean_r: f64 = (0..n).map(|k| dec.eval_nc(TAU * k as f64 / n as f64, ti)).sum::<f64>() / n as f64;
        let nc_mean_i: f64 = (0..n).map(|k| dec.eval_nc(tr, TAU * k as f64 / n as f64)).sum::<f64>() / n as f64;
        prop_assert!(nc_mean_r.abs() <= 1e-12 && nc_mean_i.abs() <= 1e-12);
    }

    #[test]
    fn transported_profiles_stay_mean_zero_and_real(w in prop::collection::vec(-1.0..1.0f64, 6), c0 in 0.0..2.0f64, th in 0.0..TAU) {
        let sigma: Vec<f64> = (0..=50).map(|k| 0.02 * k as f64).collect();
        let c: Vec<f64> = sigma.iter().map(|s| c0 + s.sin()).collect();
        let w0: Vec<Complex64> = w.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect();
        let f: Vec<Vec<Complex64>> = sigma.iter().map(|s| w0.iter().map(|m| m * s.cos()).collect()).collect();
        let out = transport_modes(&sigma, &c, &f, &w0, 0).unwrap();
        for modes in &out {
            let mean: f64 = (0..16).map(|k| eval_modes(modes, TAU * k as f64 / 16.0)).sum::<f64>() / 16.0;
            prop_assert!(mean.abs() <= 1e-12);
            prop_assert!(eval_modes(modes, th).is_finite());
        }
    }

    #[test]
    fn expression_hessian_matches_gradient_differences(c in prop::collection::vec(-2.0..2.0f64, 4), u in cube(2)) {
        let src = format!("{} * x2^4 + {} * x2^2 * x3^2 - {} * exp(x2 * x3) + {} / (2 + x3^2)", c[0], c[1], c[2], c[3]);
        let e = Expr::parse(&src).unwrap();
        let x = [u[0] - 0.5, u[1] - 0.5];
        let jet = e.jet(&x).unwrap();
        let h = 1e-4;
        for i in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let (gp, gm) = (e.jet(&xp).unwrap().g, e.jet(&xm).unwrap().g);
            for k in 0..2 {
                let fd = (gp[k] - gm[k]) / (2.0 * h);
                let exact = jet.h[i * 2 + k];
                prop_assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1.0), "{fd} vs {exact}");
            }
        }
    }

    #[test]
    fn scenario_round_trip(seed in any::<u64>(), eps0 in 0.05..0.2f64, mu in 0.01..0.5f64, kappa in 0.0..0.3f64, n in 1usize..6) {
        let mut sc = Scenario::parse(PARABOLA).unwrap();
        sc.seed = seed;
        sc.asymptotics.eps = vec![eps0, eps0 / 2.0, eps0 / 4.0];
        sc.asymptotics.mu = vec![mu];
        sc.asymptotics.n_modes = n;
        sc.source = diffract::source::SourceSpec::SinDt { kappa, psi: 0.5 };
        let back = Scenario::parse(&sc.to_toml()).unwrap();
        prop_assert_eq!(&back, &sc);
        prop_assert_eq!(back.inputs_hash(), sc.inputs_hash());
    }
}

#[test]
fn plane_wave_start_is_null() {
    let ob = GraphObstacle::new(Family::IsoPower { k: 1 }, 3, 0.6).unwrap();
    let theta = DVector::from_vec(vec![0.6, 0.8]);
    let pt = plane_wave_start(&ob, &theta, &DVector::from_vec(vec![0.1, -0.2])).unwrap();
    assert_relative_eq!(pt.xi.norm_squared(), pt.tau * pt.tau, epsilon = 1e-15);
}

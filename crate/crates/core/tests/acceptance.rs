//! Acceptance suite: runs every criterion at its stated tolerance and runtime
//! budget and prints one verdict line per criterion.
//!
//! The stretch criterion 13 is skipped, and reported as such, when the
//! environment variable `DIFFRACT_SKIP_STRETCH` is set to a non-empty value
//! other than `0`, or when the binary is run with `--skip-stretch`:
//!
//! ```text
//! cargo test -p diffract --test acceptance -- --skip-stretch
//! ```

use std::f64::consts::FRAC_1_SQRT_2;
use std::time::Instant;

use diffract::chart::FlowChart;
use diffract::checks::{flowmap_oracle, jacobian_oracle, manufactured_transport, matrix_lemma_sweep, transport_conservation, Verdict};
use diffract::diagnostics::{appendix_jacobian_leading, injectivity_fuzz, jacobian_scaling_near_grazing};
use diffract::flow::{glancing_order, Order};
use diffract::grazing::build_grazing_chart;
use diffract::obstacle::{Family, GraphObstacle, QuarticVariant};
use diffract::phase::ReflectedFlow;
use diffract::picard::{picard_iterate, PicardSettings};
use diffract::rays::{BumpData, LinearOptics, RayGeometry};
use diffract::reference::{reference_compare, reference_silence, ReferenceSettings, Windows};
use diffract::scenario::Scenario;
use diffract::source::SourceSpec;
use diffract::synthesis::{
    oscillatory_norm_check, oscillatory_norm_check_two_phase, residual_scan, CorrectorSettings, LinearModel, Quadrature, RegionSettings,
    ResidualSettings, SampleRegion,
};
use diffract::Result;
use nalgebra::{DMatrix, DVector};

const PARABOLA: &str = include_str!("../scenarios/parabola.toml");
const ISOPOWER2: &str = include_str!("../scenarios/isopower2.toml");
const EXPFLAT: &str = include_str!("../scenarios/expflat.toml");

fn scenario(text: &str) -> Scenario {
    Scenario::parse(text).expect("bundled scenario parses")
}

fn flow_of(sc: &Scenario) -> Result<ReflectedFlow> {
    ReflectedFlow::new(sc.obstacle()?, &sc.theta())
}

fn iso(k: u32, dim: usize, r: f64) -> Result<GraphObstacle> {
    GraphObstacle::new(Family::IsoPower { k }, dim, r)
}

fn unit(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v).normalize()
}

fn sci(v: f64) -> String {
    format!("{v:.2e}")
}

fn budget(detail: String, seconds: f64, limit: f64) -> (bool, String) {
    (seconds < limit, format!("{detail}; budget {limit} s"))
}

fn criterion_1() -> Result<(bool, String)> {
    let mut ok = true;
    let mut parts = Vec::new();
    for text in [PARABOLA, ISOPOWER2] {
        let sc = scenario(text);
        let rep = flowmap_oracle(&flow_of(&sc)?, sc.chart.s0, 10_000, sc.seed)?;
        ok &= rep.max_error <= 1e-10;
        parts.push(format!("{} max error {}", sc.name, sci(rep.max_error)));
    }
    Ok((ok, parts.join(", ")))
}

fn criterion_2() -> Result<(bool, String)> {
    let sc = scenario(PARABOLA);
    let mut cases = vec![("2D parabola".to_string(), flow_of(&sc)?, sc.chart.s0)];
    for n in [3, 4] {
        let mut theta = vec![0.0; n - 1];
        theta[0] = 1.0;
        theta[1] = 0.5;
        cases.push((format!("iso k=1 n={n}"), ReflectedFlow::new(iso(1, n, 0.6)?, &unit(&theta))?, 1.0));
    }
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, flow, s0) in cases {
        let rep = jacobian_oracle(&flow, s0, 2000, 5, 0.05, 1e-5)?;
        ok &= rep.max_rel_error <= 1e-6 && rep.lower_bound_holds;
        parts.push(format!("{name} rel error {} margin {}", sci(rep.max_rel_error), sci(rep.min_lower_margin)));
    }
    Ok((ok, parts.join(", ")))
}

fn criterion_3() -> Result<(bool, String)> {
    let mut ok = true;
    let mut parts = Vec::new();
    for n in [3, 4, 5] {
        let theta = unit(&(0..n - 1).map(|i| 1.0 + 0.3 * i as f64).collect::<Vec<_>>());
        for k in [1, 2] {
            let rep = matrix_lemma_sweep(&iso(k, n, 0.6)?, &theta, 1000, 13 + n as u64, 1e-12)?;
            ok &= rep.failures == 0;
            parts.push(format!("n={n} k={k} failures {} det {} cbt {}", rep.failures, sci(rep.max_det_defect), sci(rep.max_cbt_defect)));
        }
    }
    Ok((ok, parts.join(", ")))
}

fn criterion_4() -> Result<(bool, String)> {
    let theta = unit(&[1.0, 0.0]);
    let origin = DVector::zeros(2);
    let mut cases: Vec<(String, GraphObstacle, Order)> = Vec::new();
    for k in 1..=3u32 {
        cases.push((format!("iso k={k}"), iso(k, 3, 0.6)?, Order::Finite(2 * k as usize)));
    }
    cases.push(("exp flat".into(), GraphObstacle::new(Family::ExpFlat, 3, 0.6)?, Order::Infinite { cap: 12 }));
    let lambda = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
    for (h, first) in [(vec![0.0, 1.0], 1usize), (vec![0.0, 0.0, 1.0], 2), (vec![0.0, 0.0, 0.0, 2.0], 3)] {
        cases.push((
            format!("radial h={h:?}"),
            GraphObstacle::new(Family::Radial { h, lambda: lambda.clone() }, 3, 0.6)?,
            Order::Finite(2 * first),
        ));
    }
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, ob, expected) in cases {
        let rep = glancing_order(&ob, &theta, &origin, 12)?;
        ok &= rep.order == expected;
        parts.push(format!("{name} {:?}", rep.order));
    }
    Ok((ok, parts.join(", ")))
}

/// Root of `c^3 - 2 c^2 - 4` in `(2.5, 3)` by plain bisection.
fn cubic_root() -> f64 {
    let p = |c: f64| c * c * c - 2.0 * c * c - 4.0;
    let (mut lo, mut hi) = (2.5, 3.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if p(lo) * p(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn criterion_5() -> Result<(bool, String)> {
    let quartic = |variant| GraphObstacle::new(Family::Quartic3D { variant, remainder: None }, 3, 0.6);
    let f3 = build_grazing_chart(&quartic(QuarticVariant::F3)?, &unit(&[1.0, 1.0]))?;
    let f4 = build_grazing_chart(&quartic(QuarticVariant::F4)?, &unit(&[1.0, 0.0]))?;
    let (Some(l3), Some(l4)) = (f3.line, f4.line) else {
        return Ok((false, "no zero line was found".into()));
    };
    let c3 = l3.x2_per_x3();
    let c4 = l4.x3_per_x2();
    let root = cubic_root();
    let ok = (c3 + 1.0).abs() <= 1e-12 && (c4 - root).abs() <= 1e-8 && c4 > 2.5 && c4 < 3.0;
    Ok((ok, format!("F3 x2/x3 = {c3}, F4 x3/x2 = {c4} against bisection {root}")))
}

fn criterion_6() -> Result<(bool, String)> {
    let mut cases: Vec<(String, ReflectedFlow, f64, f64, usize, usize)> = Vec::new();
    for text in [PARABOLA, EXPFLAT, ISOPOWER2] {
        let sc = scenario(text);
        cases.push((sc.name.clone(), flow_of(&sc)?, sc.chart.s0, sc.chart.foot_reach, sc.chart.rays, sc.chart.steps));
    }
    let quartic = GraphObstacle::new(Family::Poly2D { coeffs: vec![0.0, 0.0, 1.0] }, 2, 1.0)?;
    cases.insert(1, ("order 4".into(), ReflectedFlow::new(quartic, &unit(&[1.0]))?, 1.2, 0.9, 121, 60));
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, flow, s0, reach, rays, steps) in cases {
        let m = flow.m();
        let chart = FlowChart::build(flow, s0, &DVector::from_element(m, -reach), &DVector::from_element(m, reach), rays, steps)?;
        let rep = injectivity_fuzz(&chart, 100_000, 3)?;
        ok &= rep.pass();
        parts.push(format!("{name} collisions {} mismatches {}", rep.collisions, rep.inverse_mismatches));
    }
    Ok((ok, parts.join(", ")))
}

fn criterion_7() -> Result<(bool, String)> {
    let mut ok = true;
    let mut parts = Vec::new();
    for k in [1u32, 2] {
        let mut coeffs = vec![0.0; 2 * k as usize - 1];
        coeffs[2 * k as usize - 2] = 1.0;
        let ob = GraphObstacle::new(Family::Poly2D { coeffs }, 2, 1.0)?;
        let rep = jacobian_scaling_near_grazing(&ReflectedFlow::new(ob, &unit(&[1.0]))?, 1e-3, 1e-2, 20)?;
        let expected = (2 * k - 1) as f64;
        ok &= (rep.exponent_j0 / expected - 1.0).abs() <= 0.05;
        parts.push(format!("k={k} exponent {:.4}", rep.exponent_j0));
    }
    let ob = GraphObstacle::new(Family::Poly2D { coeffs: vec![1.0] }, 2, 1.0)?;
    let fit = appendix_jacobian_leading(&ob, 1.0, &[1e-2, 5e-3], 6)?;
    let (_, cs, cy, _) = fit.windows[0];
    ok &= (cs / (4.0 * fit.alpha) - 1.0).abs() <= 0.02 && (cy / -2.0 - 1.0).abs() <= 0.02;
    ok &= fit.residual_ratios.iter().all(|r| *r < 0.5);
    parts.push(format!("leading fit c_s {cs:.4} (4 alpha {}), c_y {cy:.4}, residual ratios {:?}", 4.0 * fit.alpha, fit.residual_ratios));
    Ok((ok, parts.join(", ")))
}

fn criterion_8() -> Result<(bool, String)> {
    let flow = flow_of(&scenario(PARABOLA))?;
    let feet: Vec<DVector<f64>> = (0..7).map(|i| DVector::from_element(1, -0.5 - 0.1 * i as f64)).collect();
    let cons = transport_conservation(&flow, &feet, 1.0, 1e-3)?;
    let man = manufactured_transport(&[0.02, 0.01, 0.005])?;
    let ok = cons.max_drift <= 1e-6 && man.ratios.iter().all(|r| (r - 4.0).abs() <= 0.5);
    Ok((ok, format!("drift {} over {} rays, manufactured ratios {:?}", sci(cons.max_drift), cons.rays, man.ratios)))
}

fn parabola_geometry(t_max: f64) -> Result<RayGeometry> {
    let ob = GraphObstacle::new(Family::Poly2D { coeffs: vec![1.0] }, 2, 2.0)?;
    RayGeometry::new(ob, 1.0, t_max, 1.2, 121, 60)
}

fn bump(center_x2: f64) -> BumpData {
    BumpData { center: [1.0, center_x2], radii: [0.35, 0.3], amplitude: 1.0, mode: 1, phase: 0.0 }
}

fn criterion_9() -> Result<(bool, String)> {
    let settings = PicardSettings { dlabel: 0.05, ds: 0.02, mean_h: 0.1, max_iter: 6, ..PicardSettings::default() };
    let source = SourceSpec::SinDt { kappa: 0.1, psi: 0.5 };
    let mut ratios = Vec::new();
    let mut defect = 0.0f64;
    for t in [1.0, 0.5] {
        let geo = parabola_geometry(t)?;
        let res = picard_iterate(&geo, bump(-0.3 - t), source, settings)?;
        ratios.push(res.contraction_ratio().unwrap_or(f64::INFINITY));
        defect = defect.max(res.boundary_defect);
    }
    let ok = ratios[0] < 0.5 && ratios[1] < ratios[0] && defect <= 1e-8;
    Ok((ok, format!("ratio {:.4} at T = 1, {:.4} at T = 1/2, boundary defect {}", ratios[0], ratios[1], sci(defect))))
}

fn criterion_10() -> Result<(bool, String)> {
    let geo = parabola_geometry(1.0)?;
    let region = SampleRegion::build(
        &geo,
        &RegionSettings { bbox: [0.3, 2.6, -1.7, 1.2, -0.9, 0.9], candidates: 3000, seed: 7, label_margin: 0.2, wall: 5.0, h_max: 0.01 },
    )?;
    let linear = |source, corrector| LinearModel { optics: LinearOptics { geo: &geo, data: bump(-1.3), n_modes: 2, mu: 0.1 }, source, corrector };
    let model = linear(SourceSpec::Zero, CorrectorSettings::default());
    let mut totals = Vec::new();
    let mut eikonal = 0.0f64;
    for eps in [0.1, 0.05, 0.025] {
        let rep = residual_scan(&model, &SourceSpec::Zero, &region, eps, &ResidualSettings::default())?;
        totals.push(rep.total);
        eikonal = eikonal.max(rep.eikonal);
    }
    let decreasing = totals.windows(2).all(|w| w[1] < w[0]);

    let source = SourceSpec::SinDt { kappa: 0.5, psi: 0.5 };
    let shifted = ResidualSettings { shifts: 16, ..ResidualSettings::default() };
    let mut nc = Vec::new();
    for eps in [0.05, 0.025] {
        let mut pair = [0.0; 2];
        for (slot, enabled) in [true, false].into_iter().enumerate() {
            let m = linear(source, CorrectorSettings { enabled, ..CorrectorSettings::default() });
            pair[slot] = residual_scan(&m, &source, &region, eps, &shifted)?.parts.map_or(f64::NAN, |p| p.nc);
        }
        nc.push((eps, pair));
    }
    let corrector_helps = nc.iter().all(|(_, [on, off])| on < off);
    let ok = decreasing && eikonal <= 1e-12 && corrector_helps;
    let nc_text: Vec<String> = nc.iter().map(|(e, [on, off])| format!("eps {e}: {} on, {} off", sci(*on), sci(*off))).collect();
    Ok((
        ok,
        format!(
            "{} samples, totals {:?}, eikonal {}, noncharacteristic part {}",
            region.points.len(),
            totals.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>(),
            sci(eikonal),
            nc_text.join("; ")
        ),
    ))
}

fn criterion_11() -> Result<(bool, String)> {
    let geo = parabola_geometry(1.0)?;
    let start = LinearModel {
        optics: LinearOptics { geo: &geo, data: bump(-1.3), n_modes: 1, mu: 0.0 },
        source: SourceSpec::Zero,
        corrector: CorrectorSettings::default(),
    };
    let rep = reference_silence(&start, &geo, &[0.1, 0.05, 0.025], &ReferenceSettings::default(), &Windows::default())?;
    let ok = rep.shadow_decreasing && rep.illuminated_spread <= 2.0;
    let shadow: Vec<String> = rep.rows.iter().map(|r| sci(r.shadow)).collect();
    let lit: Vec<String> = rep.rows.iter().map(|r| format!("{:.4}", r.illuminated)).collect();
    Ok((ok, format!("shadow {shadow:?}, illuminated {lit:?}, spread {:.3}", rep.illuminated_spread)))
}

/// `||b||_{L^2([-1, 1]^2)}` for `b = exp(-|x|^2)` by composite Simpson in each direction.
fn gaussian_norm() -> f64 {
    let n = 2000;
    let h = 2.0 / n as f64;
    (0..=n)
        .map(|i| {
            let x = -1.0 + i as f64 * h;
            let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            w * (-2.0 * x * x).exp()
        })
        .sum::<f64>()
        * h
        / 3.0
}

fn criterion_12() -> Result<(bool, String)> {
    let b = |x: &[f64; 2]| (-(x[0] * x[0] + x[1] * x[1])).exp();
    let quad = Quadrature { bbox: [-1.0, 1.0, -1.0, 1.0], n: 800 };
    let eps = [0.1, 0.05, 1.0 / 80.0];
    let norm_b = gaussian_norm();

    let one = oscillatory_norm_check(|x, th| b(x) * th.sin(), |x| x[0] + 0.5 * x[1] * x[1], &eps, &quad, 64);
    let (_, n1) = *one.norms.last().expect("three scales");
    let err1 = (n1 - norm_b * FRAC_1_SQRT_2).abs() / (norm_b * FRAC_1_SQRT_2);

    let two = oscillatory_norm_check_two_phase(
        |x, t1, t2| b(x) * t1.sin() * t2.sin(),
        |x| x[0] + 0.5 * x[1] * x[1],
        |x| x[1] - 0.3 * x[0],
        &eps,
        &quad,
        64,
    );
    let (_, n2) = *two.norms.last().expect("three scales");
    let err2 = (n2 - 0.5 * norm_b).abs() / (0.5 * norm_b);

    let ok = err1 <= 0.02 && err2 <= 0.03;
    Ok((ok, format!("one phase {:.3}% off ||b||/sqrt 2, two phases {:.3}% off ||b||/2 at eps 1/80", 100.0 * err1, 100.0 * err2)))
}

fn criterion_13() -> Result<(bool, String)> {
    let geo = parabola_geometry(1.0)?;
    let optics = |mu| LinearOptics { geo: &geo, data: bump(-1.3), n_modes: 1, mu };
    let start = LinearModel { optics: optics(0.0), source: SourceSpec::Zero, corrector: CorrectorSettings::default() };
    let assembled = LinearModel { optics: optics(0.1), source: SourceSpec::Zero, corrector: CorrectorSettings::default() };
    let rs = ReferenceSettings { points_per_wavelength: 32.0, ..ReferenceSettings::default() };
    let rep = reference_compare(&start, &assembled, &geo, &[0.1, 0.05], &rs, 0.3)?;
    let errors: Vec<String> = rep.rows.iter().map(|r| format!("{:.4} at eps {}", r.error, r.eps)).collect();
    Ok((rep.decreasing(0.1), format!("H1 error {}, observed rate {:?}", errors.join(" to "), rep.rates)))
}

fn skip_stretch() -> bool {
    let by_env = std::env::var("DIFFRACT_SKIP_STRETCH").is_ok_and(|v| !v.is_empty() && v != "0");
    by_env || std::env::args().any(|a| a == "--skip-stretch")
}

type Criterion = fn() -> Result<(bool, String)>;

fn main() {
    let plan: [(&str, Criterion, f64); 13] = [
        ("flow-map oracle", criterion_1, 10.0),
        ("Jacobian oracle and lower bound", criterion_2, 30.0),
        ("matrix identities", criterion_3, 5.0),
        ("glancing order classification", criterion_4, 5.0),
        ("grazing-set zero lines", criterion_5, 5.0),
        ("injectivity fuzz", criterion_6, 60.0),
        ("Jacobian scaling near grazing", criterion_7, 30.0),
        ("transport conservation", criterion_8, 30.0),
        ("Picard contraction", criterion_9, 120.0),
        ("residual sweep", criterion_10, 300.0),
        ("shadow silence", criterion_11, 120.0),
        ("oscillatory norm limits", criterion_12, 60.0),
        ("reference comparison (stretch)", criterion_13, 1200.0),
    ];
    let mut verdicts = Vec::new();
    for (i, (name, run, limit)) in plan.into_iter().enumerate() {
        let id = format!("criterion {}", i + 1);
        if i == 12 && skip_stretch() {
            let v = Verdict::skipped(id, name, "stretch criterion skipped on request");
            println!("{v}");
            verdicts.push(v);
            continue;
        }
        let started = Instant::now();
        let outcome = run();
        let seconds = started.elapsed().as_secs_f64();
        let v = match outcome {
            Ok((passed, detail)) => {
                let (in_time, detail) = budget(detail, seconds, limit);
                Verdict::new(id, name, passed && in_time, detail)
            }
            Err(e) => Verdict::new(id, name, false, format!("error: {e}")),
        }
        .timed(seconds);
        println!("{v}");
        verdicts.push(v);
    }
    let failed = verdicts.iter().filter(|v| v.failed()).count();
    println!("{} criteria, {failed} failed", verdicts.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

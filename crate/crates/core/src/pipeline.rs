//! Scenario pipeline: the stages behind the command-line front end. Every
//! stage reads the manifests of the stages it depends on, writes its tables
//! and figures atomically, records a summary of its verdicts and metrics,
//! and finishes with a manifest listing the digest of every output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::chart::FlowChart;
use crate::checks::{flowmap_oracle, illuminated_samples, jacobian_oracle, matrix_lemma_sweep, Status, Verdict};
use crate::diagnostics::{appendix_jacobian_leading, injectivity_fuzz, jacobian_scaling_near_grazing};
use crate::energy::energy_diagnostic;
use crate::error::{Error, Result};
use crate::export::{jsonl, sha256_hex, svg_heatmap, svg_points, write_atomic, Csv};
use crate::flow::{
    classify_boundary_point, first_boundary_hit, glancing_order, integrate_bichar, CotangentPoint, GlancingType, Order, PointClass,
};
use crate::grazing::{build_grazing_chart, cozero_mismatches};
use crate::manifest::{Dependency, Manifest, OutputFile};
use crate::obstacle::{sample_ball, GraphObstacle};
use crate::phase::ReflectedFlow;
use crate::picard::{picard_iterate, PicardResult};
use crate::profile::ProfileGrid;
use crate::rays::{truncation_gap_sq, RayGeometry};
use crate::scenario::Scenario;
use crate::synthesis::{assemble_field, residual_scan, CorrectorSettings, PicardModel, ResidualSettings, SampleRegion};

/// Name of the random generator recorded in manifests.
pub const GENERATOR: &str = "ChaCha8";

/// Highest iterated derivative examined by the order classification.
pub const ORDER_CAP: usize = 12;

/// `|<theta, grad F>|` below which a boundary sample counts as grazing.
const GRAZING_TOL: f64 = 1e-12;

/// Finite-difference step of the Jacobian oracle.
const JACOBIAN_FD_STEP: f64 = 1e-5;

/// Label nodes per direction of the truncation-gap quadrature.
const GAP_NODES: usize = 400;

/// Pipeline stages in dependency order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Classify,
    Trace,
    Flowmap,
    Jacobian,
    Zeta,
    Profiles,
    Synthesize,
    Verify,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 9] = [
        Stage::Classify,
        Stage::Trace,
        Stage::Flowmap,
        Stage::Jacobian,
        Stage::Zeta,
        Stage::Profiles,
        Stage::Synthesize,
        Stage::Verify,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Classify => "classify",
            Stage::Trace => "trace",
            Stage::Flowmap => "flowmap",
            Stage::Jacobian => "jacobian",
            Stage::Zeta => "zeta",
            Stage::Profiles => "profiles",
            Stage::Synthesize => "synthesize",
            Stage::Verify => "verify",
            Stage::Report => "report",
        }
    }

    /// Stages whose manifests must exist before this one runs.
    pub fn depends(self) -> &'static [Stage] {
        match self {
            Stage::Classify => &[],
            Stage::Trace => &[Stage::Classify],
            Stage::Flowmap => &[Stage::Trace],
            Stage::Jacobian => &[Stage::Flowmap],
            Stage::Zeta => &[Stage::Classify],
            Stage::Profiles => &[Stage::Jacobian, Stage::Zeta],
            Stage::Synthesize => &[Stage::Profiles],
            Stage::Verify => &[
                Stage::Classify,
                Stage::Trace,
                Stage::Flowmap,
                Stage::Jacobian,
                Stage::Zeta,
                Stage::Profiles,
                Stage::Synthesize,
            ],
            Stage::Report => &[Stage::Verify],
        }
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Stage> {
        Stage::ALL.into_iter().find(|st| st.name() == s).ok_or_else(|| Error::Usage(format!("unknown stage {s}")))
    }
}

/// Verdicts and metrics written by a stage to `<stage>.summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub stage: Stage,
    pub inputs_hash: String,
    pub verdicts: Vec<Verdict>,
    pub metrics: Value,
}

impl Summary {
    pub fn file_name(stage: Stage) -> String {
        format!("{}.summary.json", stage.name())
    }

    pub fn read(dir: &Path, stage: Stage) -> Result<Summary> {
        let path = dir.join(Summary::file_name(stage));
        let bytes = std::fs::read(&path).map_err(|_| Error::MissingDependency(format!("{} (expected {})", stage.name(), path.display())))?;
        serde_json::from_slice(&bytes).map_err(|e| Error::ManifestMismatch(format!("{}: {e}", path.display())))
    }

    pub fn passed(&self) -> bool {
        !self.verdicts.iter().any(Verdict::failed)
    }
}

/// Result of running one stage.
#[derive(Debug, Clone)]
pub struct StageOutcome {
    pub stage: Stage,
    pub verdicts: Vec<Verdict>,
    /// Output files relative to the output directory, manifest last.
    pub outputs: Vec<String>,
    /// Rendered report text (report stage only).
    pub text: Option<String>,
}

impl StageOutcome {
    pub fn passed(&self) -> bool {
        !self.verdicts.iter().any(Verdict::failed)
    }
}

/// Files, verdicts and metrics collected while a stage runs.
#[derive(Default)]
struct Emit {
    files: Vec<(String, Vec<u8>)>,
    verdicts: Vec<Verdict>,
    metrics: serde_json::Map<String, Value>,
}

impl Emit {
    fn file(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    fn verdict(&mut self, v: Verdict, started: Instant) {
        self.verdicts.push(v.timed(started.elapsed().as_secs_f64()));
    }

    fn metric(&mut self, key: &str, value: Value) {
        self.metrics.insert(key.to_string(), value);
    }
}

/// Verdict lines without their timings, so that reruns write identical bytes.
fn verdict_records(hash: &str, verdicts: &[Verdict]) -> Result<Vec<u8>> {
    #[derive(Serialize)]
    struct Record<'a> {
        id: &'a str,
        name: &'a str,
        status: Status,
        detail: &'a str,
    }
    let records: Vec<Record<'_>> = verdicts.iter().map(|v| Record { id: &v.id, name: &v.name, status: v.status, detail: &v.detail }).collect();
    jsonl(hash, &records)
}

/// Applies command-line overrides to a scenario and revalidates it.
pub fn apply_overrides(sc: &mut Scenario, seed: Option<u64>, eps: Option<Vec<f64>>, mu: Option<Vec<f64>>) -> Result<()> {
    if let Some(s) = seed {
        sc.seed = s;
    }
    if let Some(e) = eps {
        if e.is_empty() || e.iter().any(|v| !(*v > 0.0)) || e.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Usage("--eps must list positive, strictly decreasing values".into()));
        }
        sc.asymptotics.eps = e;
    }
    if let Some(m) = mu {
        if m.is_empty() || m.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Usage("--mu must list positive values".into()));
        }
        sc.asymptotics.mu = m;
    }
    Ok(())
}

/// A scenario bound to an output directory.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub scenario: Scenario,
    pub out: PathBuf,
    hash: String,
}

impl Pipeline {
    /// Uses the scenario's own output directory unless `out` is given.
    pub fn new(scenario: Scenario, out: Option<PathBuf>) -> Self {
        let out = out.unwrap_or_else(|| PathBuf::from(&scenario.output));
        let hash = scenario.inputs_hash();
        Pipeline { scenario, out, hash }
    }

    pub fn inputs_hash(&self) -> &str {
        &self.hash
    }

    pub fn run(&self, stage: Stage) -> Result<StageOutcome> {
        let mut depends = Vec::new();
        for dep in stage.depends() {
            depends.push(Manifest::require(&self.out, dep.name(), &self.hash)?.1);
        }
        let mut text = None;
        let (params, emit) = match stage {
            Stage::Classify => self.classify()?,
            Stage::Trace => self.trace()?,
            Stage::Flowmap => self.flowmap()?,
            Stage::Jacobian => self.jacobian()?,
            Stage::Zeta => self.zeta()?,
            Stage::Profiles => self.profiles()?,
            Stage::Synthesize => self.synthesize()?,
            Stage::Verify => self.verify()?,
            Stage::Report => {
                let (p, e, t) = self.report()?;
                text = Some(t);
                (p, e)
            }
        };
        let mut outcome = self.finish(stage, params, depends, emit)?;
        outcome.text = text;
        Ok(outcome)
    }

    /// Runs every stage in order and stops at the first error.
    pub fn run_all(&self) -> Result<Vec<StageOutcome>> {
        Stage::ALL.into_iter().map(|s| self.run(s)).collect()
    }

    fn finish(&self, stage: Stage, parameters: Value, depends: Vec<Dependency>, mut emit: Emit) -> Result<StageOutcome> {
        let summary = Summary {
            stage,
            inputs_hash: self.hash.clone(),
            verdicts: emit.verdicts.clone(),
            metrics: Value::Object(std::mem::take(&mut emit.metrics)),
        };
        let mut text = serde_json::to_string_pretty(&summary).map_err(|e| Error::Io(e.to_string()))?;
        text.push('\n');
        emit.file(&Summary::file_name(stage), text.into_bytes());
        let mut outputs = Vec::new();
        for (name, bytes) in &emit.files {
            write_atomic(&self.out.join(name), bytes)?;
            outputs.push(OutputFile { path: name.clone(), sha256: sha256_hex(bytes) });
        }
        let manifest = Manifest {
            stage: stage.name().to_string(),
            scenario: self.scenario.name.clone(),
            inputs_hash: self.hash.clone(),
            seed: self.scenario.seed,
            generator: GENERATOR.to_string(),
            parameters,
            depends,
            outputs,
        };
        manifest.write(&self.out)?;
        let mut names: Vec<String> = emit.files.into_iter().map(|(n, _)| n).collect();
        names.push(Manifest::path(Path::new(""), stage.name()).display().to_string());
        Ok(StageOutcome { stage, verdicts: emit.verdicts, outputs: names, text: None })
    }

    fn flow(&self) -> Result<ReflectedFlow> {
        ReflectedFlow::new(self.scenario.obstacle()?, &self.scenario.theta())
    }

    fn classify(&self) -> Result<(Value, Emit)> {
        let sc = &self.scenario;
        let ob = sc.obstacle()?;
        let th = sc.theta();
        let m = ob.m();
        let mut emit = Emit::default();
        let started = Instant::now();
        let points = boundary_points(&ob, sc.chart.grid, sc.chart.samples, sc.seed);
        let records: Vec<ClassRecord> = points.par_iter().map(|x| classify_point(&ob, &th, x)).collect::<Result<_>>()?;
        emit.file("classify.jsonl", jsonl(&self.hash, &records)?);

        let base = glancing_order(&ob, &th, &DVector::zeros(m), ORDER_CAP);
        let v = match &base {
            Ok(r) => {
                let ok = r.class == PointClass::Glancing && (r.kind == GlancingType::Diffractive || matches!(r.order, Order::Infinite { .. }));
                Verdict::new("classify.base", "base point is diffractive glancing", ok, format!("{:?}, order {}", r.kind, order_label(r.order)))
            }
            Err(e) => Verdict::new("classify.base", "base point is diffractive glancing", false, e.to_string()),
        };
        emit.verdict(v, started);
        if let Ok(r) = &base {
            emit.metric("base_order", json!(order_label(r.order)));
            emit.metric("base_kind", json!(r.kind));
        }
        if m == 1 {
            let signs: Vec<f64> = records.iter().filter(|r| r.incidence.abs() > GRAZING_TOL).map(|r| r.incidence.signum()).collect();
            let changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
            let grazing: Vec<f64> = records.iter().filter(|r| r.side == Side::Grazing).map(|r| r.x[0]).collect();
            emit.metric("grazing_points", json!(grazing));
            emit.verdict(
                Verdict::new("classify.grazing", "a single grazing point separates the sides", changes == 1, format!("{changes} sign changes of the incidence")),
                started,
            );
        }
        let mut line_segment = Vec::new();
        if m == 2 {
            if let Ok(chart) = build_grazing_chart(&ob, &th) {
                if let Some(line) = &chart.line {
                    let d = &line.direction;
                    let r = 0.9 * ob.r;
                    line_segment.push([-r * d[0], -r * d[1], r * d[0], r * d[1]]);
                    emit.metric("zero_line", json!({ "direction": [d[0], d[1]], "x3_per_x2": line.x3_per_x2(), "x2_per_x3": line.x2_per_x3() }));
                }
            }
        }
        let count = |s: Side| records.iter().filter(|r| r.side == s).count();
        emit.metric("points", json!(records.len()));
        emit.metric("illuminated", json!(count(Side::Illuminated)));
        emit.metric("shadow", json!(count(Side::Shadow)));
        emit.metric("grazing", json!(count(Side::Grazing)));

        let plotted: Vec<([f64; 2], usize)> = records
            .iter()
            .map(|r| {
                let p = if m == 1 { [r.x[0], r.f] } else { [r.x[0], r.x[1]] };
                (p, r.side as usize)
            })
            .collect();
        let bbox = padded_bbox(plotted.iter().map(|(p, _)| *p));
        let palette = [("illuminated", "#d95f02"), ("shadow", "#7570b3"), ("grazing", "#1b9e77")];
        let title = format!("{}: boundary partition", sc.name);
        emit.file("partition.svg", svg_points(&self.hash, &title, bbox, &plotted, &palette, &line_segment).into_bytes());
        Ok((json!({ "grid": sc.chart.grid, "samples": sc.chart.samples, "order_cap": ORDER_CAP }), emit))
    }

    fn trace(&self) -> Result<(Value, Emit)> {
        let sc = &self.scenario;
        let flow = self.flow()?;
        let ob = &flow.ob;
        let th = flow.theta().normalize();
        let m = ob.m();
        let n_rays = sc.chart.rays.min(25);
        let mut emit = Emit::default();
        let started = Instant::now();
        let feet = illuminated_samples(ob, &th, n_rays, sc.tolerances.grazing_margin, sc.seed)?;
        let traced: Vec<TracedRay> = feet.par_iter().map(|x| trace_ray(&flow, &th, x, sc.chart.s0)).collect::<Result<_>>()?;
        let mut header: Vec<String> = vec!["ray".into(), "branch".into(), "s".into()];
        header.extend((1..=m + 1).map(|i| format!("x{i}")));
        header.push("t".into());
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut csv = Csv::new(&self.hash, &header);
        for (i, ray) in traced.iter().enumerate() {
            for (branch, pts) in [(0.0, &ray.incoming), (1.0, &ray.reflected)] {
                for (s, p) in pts {
                    let mut row = vec![i as f64, branch, *s];
                    row.extend(p.x.iter());
                    row.push(p.t);
                    csv.row(&row);
                }
            }
        }
        emit.file("trace.csv", csv.into_bytes());
        let misses = traced.iter().filter(|r| r.hit_error.is_none()).count();
        let hit = traced.iter().filter_map(|r| r.hit_error).fold(0.0, f64::max);
        let refl = traced.iter().map(|r| r.reflected_error).fold(0.0, f64::max);
        emit.verdict(
            Verdict::new(
                "trace.hit",
                "incoming rays meet the boundary at their feet",
                misses == 0 && hit <= sc.tolerances.boundary,
                format!("{} rays, {misses} misses, max error {hit:.2e}", traced.len()),
            ),
            started,
        );
        emit.verdict(
            Verdict::new(
                "trace.reflected",
                "integrated reflected rays follow the closed-form flow",
                refl <= sc.tolerances.flowmap,
                format!("max error {refl:.2e} at s = {}", sc.chart.s0),
            ),
            started,
        );
        emit.metric("rays", json!(traced.len()));
        emit.metric("max_hit_error", json!(hit));
        emit.metric("max_reflected_error", json!(refl));
        Ok((json!({ "rays": n_rays, "s0": sc.chart.s0, "tol": 1e-12 }), emit))
    }

    fn flowmap(&self) -> Result<(Value, Emit)> {
        let sc = &self.scenario;
        let flow = self.flow()?;
        let m = flow.m();
        let mut emit = Emit::default();
        let reach = sc.chart.foot_reach;
        let chart = FlowChart::build(flow.clone(), sc.chart.s0, &DVector::from_element(m, -reach), &DVector::from_element(m, reach), sc.chart.rays, sc.chart.steps)?;
        let mut header: Vec<String> = vec!["ray".into()];
        header.extend((2..=m + 1).map(|i| format!("foot_x{i}")));
        header.push("s".into());
        header.extend((1..=m + 1).map(|i| format!("x{i}")));
        header.push("j".into());
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut csv = Csv::new(&self.hash, &header);
        let ns = chart.s_grid.len();
        for (k, (img, j)) in chart.images.iter().zip(&chart.jacobians).enumerate() {
            let mut row = vec![(k / ns) as f64];
            row.extend(chart.params[k / ns].iter());
            row.push(chart.s_grid[k % ns]);
            row.extend(img.iter());
            row.push(*j);
            csv.row(&row);
        }
        emit.file("flowmap.csv", csv.into_bytes());

        let started = Instant::now();
        let rep = flowmap_oracle(&flow, sc.chart.s0, sc.chart.samples, sc.seed)?;
        emit.verdict(
            Verdict::new(
                "flowmap.oracle",
                "closed-form flow matches integrated bicharacteristics",
                rep.max_error <= sc.tolerances.flowmap,
                format!("{} samples, max error {:.2e}, null defect {:.2e}", rep.samples, rep.max_error, rep.max_null_defect),
            ),
            started,
        );
        emit.metric("oracle", json!(rep));
        let started = Instant::now();
        let pairs = 10 * sc.chart.samples;
        let inj = injectivity_fuzz(&chart, pairs, sc.seed)?;
        emit.verdict(
            Verdict::new(
                "flowmap.injective",
                "reflected flow map is injective on the chart",
                inj.pass(),
                format!("{pairs} pairs, {} collisions, {} inverse mismatches", inj.collisions, inj.inverse_mismatches),
            ),
            started,
        );
        emit.metric("injectivity", json!(inj));
        emit.metric("chart_rays", json!(chart.params.len()));
        Ok((json!({ "rays_per_axis": sc.chart.rays, "steps": sc.chart.steps, "foot_reach": reach, "s0": sc.chart.s0, "pairs": pairs }), emit))
    }

    fn jacobian(&self) -> Result<(Value, Emit)> {
        let sc = &self.scenario;
        let flow = self.flow()?;
        let th = flow.theta().normalize();
        let m = flow.m();
        let tol = &sc.tolerances;
        let mut emit = Emit::default();

        let started = Instant::now();
        let rep = jacobian_oracle(&flow, sc.chart.s0, sc.chart.samples, sc.seed, tol.grazing_margin, JACOBIAN_FD_STEP)?;
        emit.verdict(
            Verdict::new(
                "jacobian.oracle",
                "analytic Jacobian matches finite differences",
                rep.max_rel_error <= tol.jacobian,
                format!("{} samples, max relative error {:.2e}", rep.samples, rep.max_rel_error),
            ),
            started,
        );
        emit.verdict(
            Verdict::new(
                "jacobian.lower_bound",
                "Jacobian dominates twice the incidence",
                rep.lower_bound_holds,
                format!("smallest margin {:.3e}", rep.min_lower_margin),
            ),
            started,
        );
        emit.metric("oracle", json!(rep));

        let feet = illuminated_samples(&flow.ob, &th, sc.chart.samples.min(400), tol.grazing_margin, sc.seed ^ 0x1ac0)?;
        let s = 0.5 * sc.chart.s0;
        let mut header: Vec<String> = (2..=m + 1).map(|i| format!("x{i}")).collect();
        header.extend(["s", "j", "j_fd", "twice_incidence"].map(String::from));
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let mut csv = Csv::new(&self.hash, &header);
        for x in &feet {
            let mut row: Vec<f64> = x.iter().copied().collect();
            let g = flow.ob.eval(x)?.grad.dot(&th);
            row.extend([s, flow.jacobian_analytic(s, x)?, flow.jacobian_fd(s, x, JACOBIAN_FD_STEP)?, 2.0 * g]);
            csv.row(&row);
        }
        emit.file("jacobian.csv", csv.into_bytes());

        if m >= 2 {
            let started = Instant::now();
            let sweep = matrix_lemma_sweep(&flow.ob, &th, sc.chart.samples.min(1000), sc.seed, tol.matrix)?;
            emit.verdict(
                Verdict::new(
                    "jacobian.matrix",
                    "boundary matrix identities hold",
                    sweep.failures == 0,
                    format!("{} points, det defect {:.2e}, CB^T defect {:.2e}", sweep.samples, sweep.max_det_defect, sweep.max_cbt_defect),
                ),
                started,
            );
            emit.metric("matrix", json!(sweep));
        } else {
            self.scaling(&flow, &mut emit)?;
        }
        Ok((json!({ "fd_step": JACOBIAN_FD_STEP, "samples": sc.chart.samples, "min_incidence": tol.grazing_margin }), emit))
    }

    /// Exponent of the Jacobian near the grazing point and, for order two,
    /// the fit of its leading form (two dimensions).
    fn scaling(&self, flow: &ReflectedFlow, emit: &mut Emit) -> Result<()> {
        let started = Instant::now();
        let order = glancing_order(&flow.ob, flow.theta(), &DVector::zeros(1), ORDER_CAP)?.order;
        // A flat Jacobian underflows below |x2| ~ 0.04, so the flat test uses a wider band.
        let (lo, hi, samples) = match order {
            Order::Finite(_) => (1e-3, 1e-2, 20),
            Order::Infinite { .. } => (0.05, 0.3, 20),
        };
        let rep = jacobian_scaling_near_grazing(flow, lo, hi, samples)?;
        match order {
            Order::Finite(o) => {
                let expected = (o - 1) as f64;
                let rel = (rep.exponent_j0 / expected - 1.0).abs();
                emit.verdict(
                    Verdict::new(
                        "jacobian.scaling",
                        "Jacobian exponent at grazing is order minus one",
                        rel <= 0.05,
                        format!("exponent {:.4}, expected {expected}", rep.exponent_j0),
                    ),
                    started,
                );
            }
            Order::Infinite { .. } => {
                let decreasing = rep.flat_ratios.windows(2).all(|w| w[1] < w[0]);
                emit.verdict(
                    Verdict::new("jacobian.scaling", "Jacobian vanishes faster than any power at grazing", decreasing, format!("{} ratios j/|x2|^10", rep.flat_ratios.len())),
                    started,
                );
            }
        }
        emit.metric("scaling", json!(rep));
        let theta = flow.theta()[0];
        let side = if flow.ob.eval(&DVector::from_element(1, -0.5 * hi))?.grad[0] * theta > 0.0 { -1.0 } else { 1.0 };
        let mut csv = Csv::new(&self.hash, &["abs_x2", "j0", "j1_minus_j0"]);
        for i in 0..samples {
            let a = lo * (hi / lo).powf(i as f64 / (samples - 1) as f64);
            let x = DVector::from_element(1, side * a);
            let j0 = flow.jacobian_analytic(0.0, &x)?;
            csv.row(&[a, j0, flow.jacobian_analytic(1.0, &x)? - j0]);
        }
        emit.file("scaling.csv", csv.into_bytes());

        if order == Order::Finite(2) {
            let started = Instant::now();
            let fit = appendix_jacobian_leading(&flow.ob, theta, &[1e-2, 5e-3], 6)?;
            let (_, cs, cy, _) = fit.windows[0];
            let ok = (cs / (4.0 * fit.alpha) - 1.0).abs() <= 0.02 && (cy / -2.0 - 1.0).abs() <= 0.02 && fit.residual_ratios.iter().all(|r| *r < 0.5);
            emit.verdict(
                Verdict::new(
                    "jacobian.leading",
                    "leading Jacobian form fits with superlinear residual decay",
                    ok,
                    format!("c_s = {cs:.4} (4 alpha = {}), c_y = {cy:.4}, residual ratios {:?}", 4.0 * fit.alpha, fit.residual_ratios),
                ),
                started,
            );
            emit.metric("leading_fit", json!(fit));
        }
        Ok(())
    }

    fn zeta(&self) -> Result<(Value, Emit)> {
        let sc = &self.scenario;
        let ob = sc.obstacle()?;
        let th = sc.theta();
        let m = ob.m();
        let mut emit = Emit::default();
        let started = Instant::now();
        let per_axis = match m {
            1 => sc.chart.grid,
            2 => sc.chart.grid.min(81),
            _ => 11,
        };
        let chart = match build_grazing_chart(&ob, &th) {
            Ok(c) => c,
            Err(Error::Unsupported(why)) => {
                emit.verdict(Verdict::skipped("zeta.cozero", "grazing function shares zeros and sign with the incidence", why.clone()), started);
                emit.file("zeta.json", format!("{}\n", json!({ "inputs_hash": self.hash, "supported": false, "reason": why })).into_bytes());
                return Ok((json!({ "per_axis": per_axis }), emit));
            }
            Err(e) => return Err(e),
        };
        let line = chart.line.as_ref().map(|l| json!({ "direction": l.direction.as_slice(), "normal": l.normal.as_slice(), "x3_per_x2": l.x3_per_x2(), "x2_per_x3": l.x2_per_x3() }));
        let info = json!({
            "inputs_hash": self.hash,
            "supported": true,
            "regularity": chart.regularity,
            "line": line,
            "leading_degree": chart.leading_degree,
            "guard_constant": chart.guard_constant,
            "orientation": chart.orientation,
        });
        emit.file("zeta.json", format!("{info}\n").into_bytes());
        emit.metric("line", line.unwrap_or(Value::Null));

        let (bad, total) = cozero_mismatches(&ob, &chart, per_axis, 1e-12)?;
        emit.verdict(
            Verdict::new(
                "zeta.cozero",
                "grazing function shares zeros and sign with the incidence",
                bad == 0,
                format!("{bad} mismatches on {total} grid points"),
            ),
            started,
        );
        emit.metric("mismatches", json!(bad));
        emit.metric("checked", json!(total));

        if m <= 2 {
            let r = 0.9 * ob.r;
            let n = per_axis.max(2);
            let ny = if m == 1 { 1 } else { n };
            let mut header: Vec<String> = (2..=m + 1).map(|i| format!("x{i}")).collect();
            header.extend(["zeta", "oriented", "incidence"].map(String::from));
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            let mut csv = Csv::new(&self.hash, &header);
            let mut heat = vec![f64::NAN; n * ny];
            let coord = |i: usize| -r + 2.0 * r * i as f64 / (n - 1) as f64;
            for i in 0..n {
                for j in 0..ny {
                    let x = if m == 1 { DVector::from_element(1, coord(i)) } else { DVector::from_vec(vec![coord(i), coord(j)]) };
                    if x.norm() >= r + 1e-12 {
                        continue;
                    }
                    let g = ob.eval(&x)?.grad.dot(&chart.theta);
                    let o = chart.oriented(&x);
                    heat[i * ny + j] = o;
                    let mut row: Vec<f64> = x.iter().copied().collect();
                    row.extend([chart.zeta(&x), o, g]);
                    csv.row(&row);
                }
            }
            emit.file("zeta.csv", csv.into_bytes());
            let bbox = if m == 1 { [-r, r, -1.0, 1.0] } else { [-r, r, -r, r] };
            let title = format!("{}: oriented grazing function", sc.name);
            emit.file("zeta.svg", svg_heatmap(&self.hash, &title, bbox, n, ny, &heat).into_bytes());
        }
        Ok((json!({ "per_axis": per_axis, "tol": 1e-12 }), emit))
    }

    fn picard(&self, geo: &RayGeometry, mu: f64) -> Result<PicardResult> {
        let sc = &self.scenario;
        picard_iterate(geo, sc.data, sc.source, sc.picard_settings(mu))
    }

    fn profile_table(&self, res: &PicardResult) -> Vec<u8> {
        let mut csv = Csv::new(&self.hash, &["family", "ray", "a", "tau", "s", "mode", "re", "im"]);
        for (label, grid) in [("i", &res.w_i), ("r", &res.w_r)] {
            write_profile_rows(&mut csv, label, grid);
        }
        csv.into_bytes()
    }

    fn profiles(&self) -> Result<(Value, Emit)> {
        let sc = &self.scenario;
        let mut emit = Emit::default();
        let started = Instant::now();
        if !sc.planar() {
            emit.verdict(Verdict::skipped("profiles.picard", "profile iteration converges", "profiles need an enabled planar scenario"), started);
            return Ok((json!({ "planar": false }), emit));
        }
        let geo = sc.geometry()?;
        let mu = sc.asymptotics.mu[0];
        let res = self.picard(&geo, mu)?;
        emit.file("profiles.csv", self.profile_table(&res));
        emit.file("picard.jsonl", jsonl(&self.hash, &res.trace)?);
        let last = res.mean.layers.last().map(|(n, _)| *n).unwrap_or(0);
        let mean = res.mean.csv_layer(last).unwrap_or_default();
        emit.file("mean.csv", format!("# inputs_hash={}\n{mean}", self.hash).into_bytes());

        let ratio = res.contraction_ratio();
        emit.verdict(
            Verdict::new(
                "profiles.picard",
                "profile iteration converges",
                res.converged && ratio.is_none_or(|r| r < 1.0),
                format!("{} iterations, contraction ratio {}", res.trace.len(), ratio.map_or("n/a".into(), |r| format!("{r:.3e}"))),
            ),
            started,
        );
        emit.verdict(
            Verdict::new(
                "profiles.boundary",
                "reflected and incoming profiles cancel on the boundary",
                res.boundary_defect <= sc.tolerances.boundary,
                format!("max |W_r + W_i| = {:.2e}", res.boundary_defect),
            ),
            started,
        );
        let nq = sc.picard_settings(mu).nq;
        let imag = res.w_i.max_imaginary(nq).max(res.w_r.max_imaginary(nq));
        emit.verdict(Verdict::new("profiles.real", "profiles are real", imag <= 1e-12, format!("max imaginary part {imag:.2e}")), started);
        let energy = energy_diagnostic(&res, &geo, 8);
        emit.metric("energy", json!(energy));
        emit.metric("contraction_ratio", json!(ratio));
        emit.metric("mean_ratio", json!(res.mean_ratio()));
        emit.metric("boundary_defect", json!(res.boundary_defect));
        Ok((json!({ "picard": sc.picard_settings(mu) }), emit))
    }

    fn residual_settings(&self) -> ResidualSettings {
        let a = &self.scenario.asymptotics;
        ResidualSettings { h_ratio: 0.1, shifts: 0, n_modes: a.n_modes, m_cap: a.m_cap }
    }

    fn corrector(&self) -> CorrectorSettings {
        CorrectorSettings { m_cap: self.scenario.asymptotics.m_cap, ..CorrectorSettings::default() }
    }

    fn synthesize(&self) -> Result<(Value, Emit)> {
        let sc = &self.scenario;
        let mut emit = Emit::default();
        let started = Instant::now();
        if !sc.planar() {
            emit.verdict(Verdict::skipped("synthesize.residual", "residual decreases with eps", "synthesis needs an enabled planar scenario"), started);
            return Ok((json!({ "planar": false }), emit));
        }
        let geo = sc.geometry()?;
        let res = self.picard(&geo, sc.asymptotics.mu[0])?;
        let (profiles, _) = Manifest::read(&self.out, Stage::Profiles.name())?;
        let recorded = profiles.output_digest("profiles.csv").ok_or_else(|| Error::MissingDependency("profiles output profiles.csv".into()))?;
        if sha256_hex(&self.profile_table(&res)) != recorded {
            return Err(Error::ManifestMismatch("recomputed profiles differ from profiles.csv".into()));
        }
        let model = PicardModel { geo: &geo, result: &res, source: sc.source, corrector: self.corrector() };
        let region = SampleRegion::build(&geo, &sc.region_settings())?;
        let rs = self.residual_settings();
        let mut records = Vec::new();
        for &eps in &sc.asymptotics.eps {
            let rep = residual_scan(&model, &sc.source, &region, eps, &rs)?;
            records.push(ResidualRecord::new(sc, sc.asymptotics.mu[0], region.points.len(), rep));
        }
        emit.file("residual.jsonl", jsonl(&self.hash, &records)?);
        let totals: Vec<f64> = records.iter().map(|r| r.report.total).collect();
        emit.verdict(
            Verdict::new("synthesize.residual", "residual decreases with eps", strictly_decreasing(&totals), format!("totals {}", list(&totals))),
            started,
        );
        let eik = records.iter().map(|r| r.report.eikonal).fold(0.0, f64::max);
        emit.verdict(
            Verdict::new("synthesize.eikonal", "eikonal coefficient vanishes", eik <= sc.tolerances.eikonal, format!("max {eik:.2e}")),
            started,
        );
        emit.metric("totals", json!(totals));
        emit.metric("eikonal", json!(eik));

        let eps = *sc.asymptotics.eps.last().expect("eps is non-empty");
        let b = sc.region.bbox;
        let t = b[5];
        let n = 81;
        let points: Vec<[f64; 3]> = (0..n * n)
            .map(|k| [b[0] + (b[1] - b[0]) * (k / n) as f64 / (n - 1) as f64, b[2] + (b[3] - b[2]) * (k % n) as f64 / (n - 1) as f64, t])
            .collect();
        let field = assemble_field(&model, eps, &points)?;
        let mut csv = Csv::new(&self.hash, &["x1", "x2", "t", "u", "u_x1", "u_x2", "u_t"]);
        for f in &field {
            if !f.inside {
                csv.row(&[f.m[0], f.m[1], f.m[2], f.value, f.gradient[0], f.gradient[1], f.gradient[2]]);
            }
        }
        emit.file("field.csv", csv.into_bytes());
        let heat: Vec<f64> = field.iter().map(|f| if f.inside { f64::NAN } else { f.value }).collect();
        let title = format!("{}: assembled field at t = {t}, eps = {eps}", sc.name);
        emit.file("field.svg", svg_heatmap(&self.hash, &title, [b[0], b[1], b[2], b[3]], n, n, &heat).into_bytes());
        Ok((json!({ "residual": rs, "corrector": self.corrector(), "region": sc.region_settings().h_max, "field_grid": n, "field_t": t }), emit))
    }

    fn verify(&self) -> Result<(Value, Emit)> {
        let sc = &self.scenario;
        let mut emit = Emit::default();
        let started = Instant::now();
        let mut failed = Vec::new();
        for st in Stage::Verify.depends() {
            let s = Summary::read(&self.out, *st)?;
            if s.inputs_hash != self.hash {
                return Err(Error::ManifestMismatch(format!("summary of {} belongs to other inputs", st.name())));
            }
            if !s.passed() {
                failed.push(st.name());
            }
        }
        emit.verdict(
            Verdict::new("verify.stages", "every stage passed its checks", failed.is_empty(), if failed.is_empty() { "all stages pass".into() } else { format!("failed: {}", failed.join(", ")) }),
            started,
        );
        if !sc.planar() {
            emit.verdict(Verdict::skipped("verify.sweep", "nested parameter sweep", "the sweep needs an enabled planar scenario"), started);
            emit.file("verify.jsonl", verdict_records(&self.hash, &emit.verdicts)?);
            return Ok((json!({ "planar": false }), emit));
        }
        let started = Instant::now();
        let geo = sc.geometry()?;
        let region = SampleRegion::build(&geo, &sc.region_settings())?;
        let rs = self.residual_settings();
        let mut mus = sc.asymptotics.mu.clone();
        mus.sort_by(|a, b| b.total_cmp(a));
        mus.dedup();
        let rho = sc.asymptotics.rho.first().copied();
        let mut csv = Csv::new(&self.hash, &["mu", "rho", "m_cap", "eps", "total", "illuminated", "overlap", "shadow", "eikonal", "gap_i", "gap_r"]);
        let mut gaps = Vec::new();
        let mut sweep = Vec::new();
        for &mu in &mus {
            let res = self.picard(&geo, mu)?;
            let model = PicardModel { geo: &geo, result: &res, source: sc.source, corrector: self.corrector() };
            let (gi, gr) = truncation_gap_sq(&geo, &sc.data, mu, GAP_NODES, GAP_NODES)?;
            gaps.push(gi + gr);
            let mut totals = Vec::new();
            for &eps in &sc.asymptotics.eps {
                let r = residual_scan(&model, &sc.source, &region, eps, &rs)?;
                csv.row(&[mu, rho.unwrap_or(f64::NAN), rs.m_cap as f64, eps, r.total, r.illuminated, r.overlap, r.shadow, r.eikonal, gi, gr]);
                totals.push(r.total);
            }
            emit.verdict(
                Verdict::new(
                    format!("verify.eps[mu={mu}]"),
                    "residual decreases with eps at fixed mu",
                    strictly_decreasing(&totals),
                    format!("totals {}", list(&totals)),
                ),
                started,
            );
            sweep.push(json!({ "mu": mu, "totals": totals, "gap_i": gi, "gap_r": gr, "contraction_ratio": res.contraction_ratio() }));
        }
        if mus.len() > 1 {
            emit.verdict(
                Verdict::new("verify.mu", "truncation gap shrinks with mu", strictly_decreasing(&gaps), format!("squared gaps {}", list(&gaps))),
                started,
            );
        } else {
            emit.verdict(Verdict::skipped("verify.mu", "truncation gap shrinks with mu", "a single mu"), started);
        }
        emit.file("mu_sweep.csv", csv.into_bytes());
        emit.metric("sweep", json!(sweep));
        emit.metric("eps", json!(sc.asymptotics.eps));
        emit.metric("rho", json!(sc.asymptotics.rho));
        emit.metric("m_cap", json!(rs.m_cap));
        emit.file("verify.jsonl", verdict_records(&self.hash, &emit.verdicts)?);
        Ok((json!({ "mu": mus, "eps": sc.asymptotics.eps, "rho": sc.asymptotics.rho, "m_cap": rs.m_cap, "gap_nodes": GAP_NODES }), emit))
    }

    fn report(&self) -> Result<(Value, Emit, String)> {
        let sc = &self.scenario;
        let mut emit = Emit::default();
        let started = Instant::now();
        let mut md = String::new();
        let _ = writeln!(md, "# Scenario {}\n", sc.name);
        let _ = writeln!(md, "- inputs hash: `{}`", self.hash);
        let _ = writeln!(md, "- seed: {} ({GENERATOR})", sc.seed);
        let _ = writeln!(md, "- obstacle: {:?}, n = {}, radius {}", sc.obstacle.family, sc.obstacle.dim, sc.obstacle.radius);
        let _ = writeln!(md, "- theta: {:?}, T = {}\n", sc.incidence.theta, sc.incidence.t_max);
        let _ = writeln!(md, "| stage | pass | fail | skipped | outputs |");
        let _ = writeln!(md, "|---|---|---|---|---|");
        let mut all = Vec::new();
        for st in Stage::Verify.depends().iter().chain([Stage::Verify].iter()) {
            let (m, _) = Manifest::read(&self.out, st.name())?;
            let s = Summary::read(&self.out, *st)?;
            let count = |k: Status| s.verdicts.iter().filter(|v| v.status == k).count();
            let outs: Vec<&str> = m.outputs.iter().map(|o| o.path.as_str()).collect();
            let _ = writeln!(md, "| {} | {} | {} | {} | {} |", st.name(), count(Status::Pass), count(Status::Fail), count(Status::Skipped), outs.join(", "));
            all.extend(s.verdicts);
        }
        let _ = writeln!(md, "\n## Checks\n");
        for v in &all {
            let _ = writeln!(md, "- {v}");
        }
        let verify = Summary::read(&self.out, Stage::Verify)?;
        if let Some(Value::Array(rows)) = verify.metrics.get("sweep") {
            let _ = writeln!(md, "\n## Residual by mu and eps\n");
            let eps: Vec<f64> = serde_json::from_value(verify.metrics["eps"].clone()).unwrap_or_default();
            let _ = writeln!(md, "| mu | gap_i + gap_r | {} |", eps.iter().map(|e| format!("eps = {e}")).collect::<Vec<_>>().join(" | "));
            let _ = writeln!(md, "|---|---|{}", "---|".repeat(eps.len()));
            for r in rows {
                let totals: Vec<f64> = serde_json::from_value(r["totals"].clone()).unwrap_or_default();
                let gap = r["gap_i"].as_f64().unwrap_or(f64::NAN) + r["gap_r"].as_f64().unwrap_or(f64::NAN);
                let cells: Vec<String> = totals.iter().map(|t| format!("{t:.4e}")).collect();
                let _ = writeln!(md, "| {} | {gap:.4e} | {} |", r["mu"], cells.join(" | "));
            }
        }
        emit.verdict(
            Verdict::new("report.verify", "verification passed", verify.passed(), format!("{} checks in total", all.len())),
            started,
        );
        emit.file("report.md", md.clone().into_bytes());
        Ok((json!({}), emit, md))
    }
}

fn order_label(o: Order) -> String {
    match o {
        Order::Finite(n) => n.to_string(),
        Order::Infinite { cap } => format!(">{cap}"),
    }
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.4e}")).collect::<Vec<_>>().join(", ")
}

fn write_profile_rows(csv: &mut Csv, label: &str, grid: &ProfileGrid) {
    let nt = grid.labels_tau.len();
    for (ray, s, mode, re, im) in grid.table_rows() {
        csv.labelled_row(label, &[ray as f64, grid.labels_a[ray / nt], grid.labels_tau[ray % nt], s, mode as f64, re, im]);
    }
}

fn padded_bbox(points: impl Iterator<Item = [f64; 2]>) -> [f64; 4] {
    let mut b = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
    for p in points {
        b = [b[0].min(p[0]), b[1].max(p[0]), b[2].min(p[1]), b[3].max(p[1])];
    }
    let px = 0.05 * (b[1] - b[0]).max(1e-3);
    let py = 0.05 * (b[3] - b[2]).max(1e-3);
    [b[0] - px, b[1] + px, b[2] - py, b[3] + py]
}

/// Boundary samples for classification: a uniform grid of `grid` points per
/// axis in the `0.9 r` ball for one or two tangential variables, otherwise
/// `samples` seeded random points.
fn boundary_points(ob: &GraphObstacle, grid: usize, samples: usize, seed: u64) -> Vec<DVector<f64>> {
    let m = ob.m();
    let r = 0.9 * ob.r;
    if m > 2 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pts = vec![DVector::zeros(m)];
        pts.extend((1..samples).map(|_| sample_ball(&mut rng, m, r)));
        return pts;
    }
    let n = grid.max(3);
    let coord = |i: usize| -r + 2.0 * r * i as f64 / (n - 1) as f64;
    (0..n.pow(m as u32))
        .map(|k| if m == 1 { DVector::from_element(1, coord(k)) } else { DVector::from_vec(vec![coord(k / n), coord(k % n)]) })
        .filter(|x| x.norm() <= r + 1e-12)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Side {
    Illuminated,
    Shadow,
    Grazing,
}

#[derive(Debug, Clone, Serialize)]
struct ClassRecord {
    x: Vec<f64>,
    f: f64,
    incidence: f64,
    side: Side,
    class: PointClass,
    order: Option<String>,
    kind: Option<GlancingType>,
}

fn classify_point(ob: &GraphObstacle, th: &DVector<f64>, x: &DVector<f64>) -> Result<ClassRecord> {
    let e = ob.eval(x)?;
    let g = e.grad.dot(th);
    let side = if g.abs() <= GRAZING_TOL {
        Side::Grazing
    } else if g > 0.0 {
        Side::Illuminated
    } else {
        Side::Shadow
    };
    let report = glancing_order(ob, th, x, ORDER_CAP).ok();
    Ok(ClassRecord {
        x: x.iter().copied().collect(),
        f: e.f,
        incidence: g,
        side,
        class: classify_boundary_point(ob, th, x)?,
        order: report.as_ref().map(|r| order_label(r.order)),
        kind: report.map(|r| r.kind),
    })
}

struct TracedRay {
    incoming: Vec<(f64, CotangentPoint)>,
    reflected: Vec<(f64, CotangentPoint)>,
    hit_error: Option<f64>,
    reflected_error: f64,
}

/// Follows the incoming ray that lands on `(F(x), x)` at `t = 0` from inside
/// the validity ball, locates its boundary hit, and continues along the
/// reflected bicharacteristic up to `s0`.
fn trace_ray(flow: &ReflectedFlow, th: &DVector<f64>, x: &DVector<f64>, s0: f64) -> Result<TracedRay> {
    let ob = &flow.ob;
    let m = ob.m();
    let r = 0.95 * ob.r;
    let b = x.dot(th);
    let back = (b + (b * b - x.norm_squared() + r * r).max(0.0).sqrt()).min(0.5 * ob.r);
    let f = ob.value(x)?;
    let mut pos = DVector::zeros(m + 1);
    pos[0] = f;
    pos.rows_mut(1, m).copy_from(&(x - th * back));
    let mut xi = DVector::zeros(m + 1);
    xi.rows_mut(1, m).copy_from(th);
    let start = CotangentPoint::new(pos, -back, xi, -1.0);
    let s_hit = 0.5 * back;
    let incoming = integrate_bichar(&start, 1.05 * s_hit, 1e-12)?;
    let mut foot = DVector::zeros(m + 1);
    foot[0] = f;
    foot.rows_mut(1, m).copy_from(x);
    let hit_error = first_boundary_hit(ob, &incoming)?.map(|(s, p)| (s - s_hit).abs().max((&p.x - &foot).amax()).max(p.t.abs()));
    let cov = flow.covector(x)?;
    let refl = integrate_bichar(&CotangentPoint::new(foot, 0.0, cov.spatial(), cov.tau), s0, 1e-12)?;
    let (z, t) = flow.zr_forward(s0, x, 0.0)?;
    let end = refl.end();
    let reflected_error = (&end.x - &z).amax().max((end.t - t).abs());
    let incoming = incoming.samples.into_iter().filter(|(s, _)| *s <= s_hit).collect();
    Ok(TracedRay { incoming, reflected: refl.samples, hit_error, reflected_error })
}

/// One row of `residual.jsonl`: the report with its parameter tuple.
#[derive(Debug, Clone, Serialize)]
struct ResidualRecord {
    eps: f64,
    mu: f64,
    rho: Vec<f64>,
    n_modes: usize,
    m_cap: usize,
    region_points: usize,
    report: crate::synthesis::ResidualReport,
}

impl ResidualRecord {
    fn new(sc: &Scenario, mu: f64, region_points: usize, report: crate::synthesis::ResidualReport) -> Self {
        ResidualRecord {
            eps: report.eps,
            mu,
            rho: sc.asymptotics.rho.clone(),
            n_modes: sc.asymptotics.n_modes,
            m_cap: sc.asymptotics.m_cap,
            region_points,
            report,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_names_round_trip() {
        for st in Stage::ALL {
            assert_eq!(st.name().parse::<Stage>().unwrap(), st);
        }
        assert!(matches!("bogus".parse::<Stage>(), Err(Error::Usage(_))));
    }

    #[test]
    fn dependencies_precede_their_stage() {
        for (i, st) in Stage::ALL.iter().enumerate() {
            for d in st.depends() {
                assert!(Stage::ALL.iter().position(|s| s == d).unwrap() < i);
            }
        }
    }

    #[test]
    fn overrides_are_validated() {
        let mut sc = Scenario::parse(include_str!("../scenarios/parabola.toml")).unwrap();
        assert!(matches!(apply_overrides(&mut sc, None, Some(vec![0.1, 0.2]), None), Err(Error::Usage(_))));
        apply_overrides(&mut sc, Some(3), Some(vec![0.2, 0.1]), Some(vec![0.3])).unwrap();
        assert_eq!((sc.seed, sc.asymptotics.eps.clone(), sc.asymptotics.mu.clone()), (3, vec![0.2, 0.1], vec![0.3]));
    }

    #[test]
    fn classification_grid_contains_the_base_point() {
        let ob = GraphObstacle::new(crate::obstacle::Family::Poly2D { coeffs: vec![1.0] }, 2, 2.0).unwrap();
        let pts = boundary_points(&ob, 5, 0, 1);
        assert_eq!(pts.len(), 5);
        assert_eq!(pts[2][0], 0.0);
    }
}

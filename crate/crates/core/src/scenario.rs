//! Scenario files: a TOML description of the obstacle, the incoming plane
//! wave, chart sizes, oscillation data, source, asymptotic parameters and
//! tolerances. Loading normalizes the direction and validates the
//! invariants; parse errors carry the line and column of the offending input.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::obstacle::{Family, GraphObstacle, QuarticVariant};
use crate::picard::PicardSettings;
use crate::rays::{BumpData, RayGeometry};
use crate::source::SourceSpec;
use crate::synthesis::RegionSettings;

/// Obstacle family as written in a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FamilySpec {
    Poly2d { coeffs: Vec<f64> },
    IsoPower { k: u32 },
    ExpFlat,
    Quartic3d {
        variant: QuarticVariant,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        remainder: Option<String>,
    },
    /// `lambda` is given row by row.
    Radial { h: Vec<f64>, lambda: Vec<Vec<f64>> },
    Custom { expr: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstacleSpec {
    #[serde(flatten)]
    pub family: FamilySpec,
    /// Ambient dimension `n`.
    pub dim: usize,
    /// Validity radius of the tangential ball.
    pub radius: f64,
}

impl ObstacleSpec {
    pub fn build(&self) -> Result<GraphObstacle> {
        let family = match &self.family {
            FamilySpec::Poly2d { coeffs } => Family::Poly2D { coeffs: coeffs.clone() },
            FamilySpec::IsoPower { k } => Family::IsoPower { k: *k },
            FamilySpec::ExpFlat => Family::ExpFlat,
            FamilySpec::Quartic3d { variant, remainder } => Family::Quartic3D {
                variant: *variant,
                remainder: remainder.as_deref().map(Expr::parse).transpose()?,
            },
            FamilySpec::Radial { h, lambda } => {
                let m = lambda.len();
                if lambda.iter().any(|row| row.len() != m) {
                    return Err(Error::Unsupported("lambda must be a square matrix".into()));
                }
                Family::Radial { h: h.clone(), lambda: DMatrix::from_fn(m, m, |i, j| lambda[i][j]) }
            }
            FamilySpec::Custom { expr } => Family::Custom { expr: Expr::parse(expr)? },
        };
        GraphObstacle::new(family, self.dim, self.radius)
    }
}

/// Incoming plane wave `phi_i = -t + <theta, xbar>` on the window `|t| <= t_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Incidence {
    pub theta: Vec<f64>,
    pub t_max: f64,
}

/// Sizes of the reflected chart and of the random oracle samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChartSpec {
    /// Largest ray parameter.
    pub s0: f64,
    /// Feet `x2'` between `-theta foot_reach` and the grazing point (2D).
    pub foot_reach: f64,
    pub rays: usize,
    pub steps: usize,
    /// Random samples per oracle check.
    pub samples: usize,
    /// Boundary grid points per axis for classification.
    pub grid: usize,
}

impl Default for ChartSpec {
    fn default() -> Self {
        ChartSpec { s0: 1.2, foot_reach: 1.2, rays: 121, steps: 60, samples: 2000, grid: 41 }
    }
}

/// Asymptotic parameters: the scales, truncations, regularization and caps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Asymptotics {
    /// Strictly decreasing wavelengths.
    pub eps: Vec<f64>,
    /// Truncation parameters of the flow-aligned cutoff.
    pub mu: Vec<f64>,
    /// Regularization tuple; `rho[0]` bounds the noncharacteristic tail.
    pub rho: Vec<f64>,
    /// Fourier cap `N`.
    pub n_modes: usize,
    /// Corrector cap `M`.
    pub m_cap: usize,
}

impl Default for Asymptotics {
    fn default() -> Self {
        Asymptotics { eps: vec![0.1, 0.05, 0.025], mu: vec![0.1], rho: vec![1e-3], n_modes: 2, m_cap: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub flowmap: f64,
    pub jacobian: f64,
    pub matrix: f64,
    pub boundary: f64,
    pub eikonal: f64,
    /// Smallest incidence `<theta, grad F>` for the Jacobian oracle.
    pub grazing_margin: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { flowmap: 1e-10, jacobian: 1e-6, matrix: 1e-12, boundary: 1e-8, eikonal: 1e-12, grazing_margin: 0.05 }
    }
}

/// Discretization of the profile system (two dimensions).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProfileSpec {
    /// Whether the profile and synthesis stages run (planar scenarios only).
    pub enabled: bool,
    pub dlabel: f64,
    pub ds: f64,
    pub mean_h: f64,
    pub max_iter: usize,
}

impl Default for ProfileSpec {
    fn default() -> Self {
        ProfileSpec { enabled: true, dlabel: 0.05, ds: 0.02, mean_h: 0.1, max_iter: 8 }
    }
}

/// Residual sample region (two dimensions).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegionSpec {
    /// `[x1_lo, x1_hi, x2_lo, x2_hi, t_lo, t_hi]`.
    pub bbox: [f64; 6],
    pub candidates: usize,
    pub label_margin: f64,
    pub wall: f64,
}

impl Default for RegionSpec {
    fn default() -> Self {
        RegionSpec { bbox: [0.3, 2.6, -1.7, 1.2, -0.9, 0.9], candidates: 3000, label_margin: 0.2, wall: 5.0 }
    }
}

/// A complete scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    /// Output directory, relative to the working directory.
    pub output: String,
    pub obstacle: ObstacleSpec,
    pub incidence: Incidence,
    #[serde(default)]
    pub chart: ChartSpec,
    pub data: BumpData,
    pub source: SourceSpec,
    #[serde(default)]
    pub asymptotics: Asymptotics,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub profiles: ProfileSpec,
    #[serde(default)]
    pub region: RegionSpec,
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map(|p| p + 1).unwrap_or(0) + 1;
    (line, column)
}

/// Validation error positioned at the first line assigning `key`, or at `1:1`.
fn invalid(text: &str, key: &str, message: String) -> Error {
    let line = text
        .lines()
        .position(|l| l.trim_start().strip_prefix(key).is_some_and(|r| r.trim_start().starts_with('=')))
        .map(|i| i + 1)
        .unwrap_or(1);
    Error::Config { line, column: 1, message }
}

impl Scenario {
    /// Parses and validates a scenario; `theta` is normalized.
    pub fn parse(text: &str) -> Result<Scenario> {
        let mut sc: Scenario = toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map(|s| line_column(text, s.start)).unwrap_or((1, 1));
            Error::Config { line, column, message: e.message().to_string() }
        })?;
        sc.validate(text)?;
        let norm = sc.incidence.theta.iter().map(|v| v * v).sum::<f64>().sqrt();
        sc.incidence.theta.iter_mut().for_each(|v| *v /= norm);
        Ok(sc)
    }

    pub fn load(path: &std::path::Path) -> Result<Scenario> {
        Scenario::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario values are always representable in TOML")
    }

    fn validate(&self, text: &str) -> Result<()> {
        let m = self.obstacle.dim.saturating_sub(1);
        if self.obstacle.dim < 2 {
            return Err(invalid(text, "dim", format!("obstacle.dim must be at least 2, got {}", self.obstacle.dim)));
        }
        if self.incidence.theta.len() != m {
            return Err(invalid(text, "theta", format!("incidence.theta needs {m} components, got {}", self.incidence.theta.len())));
        }
        let norm = self.incidence.theta.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(invalid(text, "theta", "incidence.theta must be a non-zero vector".into()));
        }
        let a = &self.asymptotics;
        if a.eps.is_empty() || a.eps.iter().any(|e| !(*e > 0.0)) || a.eps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(invalid(text, "eps", "asymptotics.eps must be positive and strictly decreasing".into()));
        }
        if a.mu.is_empty() || a.mu.iter().any(|v| !(*v > 0.0)) {
            return Err(invalid(text, "mu", "asymptotics.mu must be a non-empty list of positive values".into()));
        }
        if a.rho.iter().any(|v| !(*v > 0.0)) || a.n_modes == 0 || a.m_cap == 0 {
            return Err(invalid(text, "rho", "asymptotics.rho must be positive and the caps at least 1".into()));
        }
        let t = &self.tolerances;
        if [t.flowmap, t.jacobian, t.matrix, t.boundary, t.eikonal, t.grazing_margin].iter().any(|v| !(*v > 0.0)) {
            return Err(invalid(text, "flowmap", "all tolerances must be positive".into()));
        }
        if !(self.incidence.t_max > 0.0) || !(self.obstacle.radius > 0.0) || !(self.chart.s0 > 0.0) {
            return Err(invalid(text, "t_max", "t_max, radius and s0 must be positive".into()));
        }
        Ok(())
    }

    pub fn obstacle(&self) -> Result<GraphObstacle> {
        self.obstacle.build()
    }

    pub fn theta(&self) -> DVector<f64> {
        DVector::from_vec(self.incidence.theta.clone())
    }

    /// Whether the profile and synthesis stages apply: planar and enabled.
    pub fn planar(&self) -> bool {
        self.obstacle.dim == 2 && self.profiles.enabled
    }

    /// Ray geometry of a planar scenario.
    pub fn geometry(&self) -> Result<RayGeometry> {
        if !self.planar() {
            return Err(Error::Unsupported(format!("profiles need a planar obstacle, scenario has n = {}", self.obstacle.dim)));
        }
        let c = &self.chart;
        RayGeometry::new(self.obstacle()?, self.incidence.theta[0].signum(), self.incidence.t_max, c.foot_reach, c.rays, c.steps)
    }

    pub fn picard_settings(&self, mu: f64) -> PicardSettings {
        let p = &self.profiles;
        PicardSettings {
            n_modes: self.asymptotics.n_modes,
            m_cap: self.asymptotics.m_cap,
            mu,
            dlabel: p.dlabel,
            ds: p.ds,
            mean_h: p.mean_h,
            max_iter: p.max_iter,
            ..PicardSettings::default()
        }
    }

    pub fn region_settings(&self) -> RegionSettings {
        let r = &self.region;
        RegionSettings {
            bbox: r.bbox,
            candidates: r.candidates,
            seed: self.seed,
            label_margin: r.label_margin,
            wall: r.wall,
            h_max: 0.1 * self.asymptotics.eps[0],
        }
    }

    /// SHA-256 of the canonical TOML form; identifies the inputs of every stage.
    pub fn inputs_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PARABOLA: &str = include_str!("../scenarios/parabola.toml");

    #[test]
    fn parabola_parses() {
        let sc = Scenario::parse(PARABOLA).unwrap();
        assert_eq!(sc.obstacle.dim, 2);
        assert_eq!(sc.incidence.theta, vec![1.0]);
        assert!(sc.geometry().is_ok());
    }

    #[test]
    fn round_trip_is_identity() {
        let sc = Scenario::parse(PARABOLA).unwrap();
        let again = Scenario::parse(&sc.to_toml()).unwrap();
        assert_eq!(sc, again);
        assert_eq!(sc.inputs_hash(), again.inputs_hash());
    }

    #[test]
    fn theta_is_normalized() {
        let text = include_str!("../scenarios/f4.toml").replace("theta = [1.0, 0.0]", "theta = [3.0, 4.0]");
        let sc = Scenario::parse(&text).unwrap();
        assert!((sc.incidence.theta[0] - 0.6).abs() < 1e-15);
        assert!((sc.incidence.theta[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn missing_obstacle_reports_position() {
        let text: String = PARABOLA
            .lines()
            .filter(|l| !l.starts_with("[obstacle]") && !l.starts_with("family") && !l.starts_with("coeffs") && !l.starts_with("dim") && !l.starts_with("radius"))
            .collect::<Vec<_>>()
            .join("\n");
        match Scenario::parse(&text) {
            Err(Error::Config { line, column, message }) => {
                assert!(line >= 1 && column >= 1);
                assert!(message.contains("obstacle"), "{message}");
            }
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn bad_value_points_at_its_line() {
        let text = PARABOLA.replace("seed = 7", "seed = \"seven\"");
        let line = text.lines().position(|l| l.starts_with("seed")).unwrap() + 1;
        match Scenario::parse(&text) {
            Err(Error::Config { line: l, column, .. }) => {
                assert_eq!(l, line);
                assert_eq!(column, 8);
            }
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn eps_must_decrease() {
        let text = PARABOLA.replace("eps = [0.1, 0.05, 0.025]", "eps = [0.1, 0.1]");
        let line = text.lines().position(|l| l.starts_with("eps")).unwrap() + 1;
        assert!(matches!(Scenario::parse(&text), Err(Error::Config { line: l, .. }) if l == line));
    }

    #[test]
    fn tolerances_must_be_positive() {
        let text = PARABOLA.replace("flowmap = 1e-10", "flowmap = 0.0");
        assert!(matches!(Scenario::parse(&text), Err(Error::Config { .. })));
    }
}

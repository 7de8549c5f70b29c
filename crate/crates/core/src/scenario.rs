//! TOML scenario files: parsing, validation with line-anchored errors, and assembly into a
//! [`ProblemSpec`] plus solver and verification settings.

use std::fmt;
use std::path::{Path as FsPath, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::analysis::DependenceVariant;
use crate::dynamics::{Forcing, KernelWeight, ModelError, ProblemSpec, VolterraKernel};
use crate::path::{constant, Path};
use crate::sets::{Motion, MovingSet, Shape};
use crate::solver::{GridChoice, Scheme, SolverConfig};

/// Parse or validation failure, anchored to a line of the source when one is known.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioError {
    pub origin: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "{}:{}: {}", self.origin, line, self.message),
            None => write!(f, "{}: {}", self.origin, self.message),
        }
    }
}

impl std::error::Error for ScenarioError {}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: String,
    dimension: usize,
    interval: [f64; 2],
    x0: Vec<f64>,
    set: SetSection,
    #[serde(default)]
    forcing: ForcingSection,
    #[serde(default)]
    kernel: KernelSection,
    #[serde(default)]
    z: Option<PathSection>,
    #[serde(default)]
    solver: SolverSection,
    #[serde(default)]
    verify: VerifySection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SetSection {
    kind: String,
    normal: Option<Vec<f64>>,
    offset: Option<f64>,
    offset_rate: Option<f64>,
    lower: Option<Vec<f64>>,
    upper: Option<Vec<f64>>,
    center: Option<Vec<f64>>,
    center_velocity: Option<Vec<f64>>,
    radius: Option<f64>,
    translate: Option<PathSection>,
    motion_rate: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ForcingSection {
    matrix: Option<Vec<Vec<f64>>>,
    offset: Option<Vec<f64>>,
    offset_velocity: Option<Vec<f64>>,
    beta: Option<f64>,
    kappa: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelSection {
    weight: Option<String>,
    scale: Option<f64>,
    rate: Option<f64>,
    constant: Option<f64>,
    t_coef: Option<f64>,
    s_coef: Option<f64>,
    matrix: Option<Vec<Vec<f64>>>,
    offset: Option<Vec<f64>>,
    sigma: Option<f64>,
    mu: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PathSection {
    kind: String,
    origin: Option<Vec<f64>>,
    velocity: Option<Vec<f64>>,
    amplitude: Option<Vec<f64>>,
    frequency: Option<f64>,
    phase: Option<f64>,
    speed_bound: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct SolverSection {
    scheme: String,
    steps: usize,
    tol_fp: f64,
    max_iter: usize,
    tol_feas: f64,
    reparametrize: bool,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            scheme: "catching-up".into(),
            steps: match d.grid {
                GridChoice::Uniform(n) => n,
                GridChoice::Explicit(ref g) => g.len() - 1,
            },
            tol_fp: d.tol_fp,
            max_iter: d.max_iter,
            tol_feas: d.tol_feas,
            reparametrize: d.reparametrize,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct VerifySection {
    envelopes: bool,
    slow: bool,
    dependence: Option<String>,
    dependence_variant: Option<String>,
    gronwall_self_test: bool,
}

/// Verification toggles of a scenario.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Verify {
    pub envelopes: bool,
    pub slow: bool,
    /// Sibling scenario (resolved against the scenario's directory) and bound variant.
    pub dependence: Option<(PathBuf, DependenceVariant)>,
    pub gronwall_self_test: bool,
}

/// A loaded, validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub spec: ProblemSpec,
    pub config: SolverConfig,
    pub verify: Verify,
    pub origin: String,
}

/// Locates `key` inside `[section]` (or at top level) in the raw source.
fn line_of(source: &str, section: Option<&str>, key: Option<&str>) -> Option<usize> {
    let mut current: Option<String> = None;
    let mut header_line = None;
    for (i, raw) in source.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            let name = line.trim_start_matches('[').trim_end_matches(']').trim().to_string();
            if section == Some(name.as_str()) {
                header_line = Some(i + 1);
            }
            current = Some(name);
            continue;
        }
        let in_section = match section {
            None => current.is_none(),
            Some(s) => current.as_deref() == Some(s),
        };
        if let (true, Some(key)) = (in_section, key) {
            if let Some(rest) = line.strip_prefix(key) {
                if rest.trim_start().starts_with('=') {
                    return Some(i + 1);
                }
            }
        }
    }
    header_line
}

struct Builder<'a> {
    source: &'a str,
    origin: &'a str,
    dim: usize,
}

impl Builder<'_> {
    fn err(&self, section: Option<&str>, key: Option<&str>, message: impl Into<String>) -> ScenarioError {
        ScenarioError {
            origin: self.origin.to_string(),
            line: line_of(self.source, section, key),
            message: message.into(),
        }
    }

    fn vector(&self, section: &str, key: &str, values: &[f64]) -> Result<DVector<f64>, ScenarioError> {
        if values.len() != self.dim {
            return Err(self.err(
                Some(section),
                Some(key),
                format!("`{key}` has {} entries, dimension is {}", values.len(), self.dim),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(self.err(Some(section), Some(key), format!("`{key}` has a non-finite entry")));
        }
        Ok(DVector::from_column_slice(values))
    }

    fn opt_vector(&self, section: &str, key: &str, values: &Option<Vec<f64>>) -> Result<DVector<f64>, ScenarioError> {
        match values {
            Some(v) => self.vector(section, key, v),
            None => Ok(DVector::zeros(self.dim)),
        }
    }

    fn required<'v, T>(&self, section: &str, key: &str, value: &'v Option<T>) -> Result<&'v T, ScenarioError> {
        value
            .as_ref()
            .ok_or_else(|| self.err(Some(section), None, format!("[{section}] needs `{key}`")))
    }

    fn matrix(&self, section: &str, rows: &Option<Vec<Vec<f64>>>) -> Result<DMatrix<f64>, ScenarioError> {
        let Some(rows) = rows else {
            return Ok(DMatrix::zeros(self.dim, self.dim));
        };
        if rows.len() != self.dim || rows.iter().any(|r| r.len() != self.dim) {
            return Err(self.err(
                Some(section),
                Some("matrix"),
                format!("`matrix` must be {0}×{0}", self.dim),
            ));
        }
        Ok(DMatrix::from_fn(self.dim, self.dim, |i, j| rows[i][j]))
    }

    fn path(&self, section: &str, p: &PathSection) -> Result<Path, ScenarioError> {
        let origin = self.opt_vector(section, "origin", &p.origin)?;
        match p.kind.as_str() {
            "constant" => Ok(Path::Constant(origin)),
            "linear" => Ok(Path::Linear {
                origin,
                velocity: self.vector(section, "velocity", self.required(section, "velocity", &p.velocity)?)?,
            }),
            "sinusoidal" => Ok(Path::Sinusoidal {
                origin,
                amplitude: self.vector(section, "amplitude", self.required(section, "amplitude", &p.amplitude)?)?,
                frequency: *self.required(section, "frequency", &p.frequency)?,
                phase: p.phase.unwrap_or(0.0),
            }),
            other => Err(self.err(
                Some(section),
                Some("kind"),
                format!("unknown path kind `{other}` (constant | linear | sinusoidal)"),
            )),
        }
    }

    fn set(&self, s: &SetSection) -> Result<MovingSet, ScenarioError> {
        let sec = "set";
        let (shape, derived_rate) = match s.kind.as_str() {
            "whole-space" => (Shape::WholeSpace { dim: self.dim }, 0.0),
            "half-space" => {
                let normal = self.vector(sec, "normal", self.required(sec, "normal", &s.normal)?)?;
                let offset = s.offset.unwrap_or(0.0);
                let rate = s.offset_rate.unwrap_or(0.0);
                let path = if rate == 0.0 {
                    Path::scalar(offset)
                } else {
                    Path::Linear {
                        origin: DVector::from_element(1, offset),
                        velocity: DVector::from_element(1, rate),
                    }
                };
                let norm = normal.norm();
                let derived = if norm > 0.0 { rate.abs() / norm } else { 0.0 };
                (Shape::HalfSpace { normal, offset: path }, derived)
            }
            "box" => (
                Shape::Box {
                    lower: self.vector(sec, "lower", self.required(sec, "lower", &s.lower)?)?,
                    upper: self.vector(sec, "upper", self.required(sec, "upper", &s.upper)?)?,
                },
                0.0,
            ),
            kind @ ("ball" | "sphere") => {
                let center = self.opt_vector(sec, "center", &s.center)?;
                let radius = *self.required(sec, "radius", &s.radius)?;
                let (path, derived) = match &s.center_velocity {
                    Some(v) => {
                        let velocity = self.vector(sec, "center_velocity", v)?;
                        let speed = velocity.norm();
                        (
                            Path::Linear {
                                origin: center,
                                velocity,
                            },
                            speed,
                        )
                    }
                    None => (Path::Constant(center), 0.0),
                };
                if kind == "ball" {
                    (Shape::Ball { center: path, radius }, derived)
                } else {
                    (Shape::Sphere { center: path, radius }, derived)
                }
            }
            other => {
                return Err(self.err(
                    Some(sec),
                    Some("kind"),
                    format!("unknown set kind `{other}` (whole-space | half-space | box | ball | sphere)"),
                ))
            }
        };
        let (shape, derived_rate) = match &s.translate {
            Some(p) => {
                let shift = self.path("set.translate", p)?;
                let speed = shift.speed_bound().unwrap_or(0.0);
                (
                    Shape::Translated {
                        base: Box::new(shape),
                        shift,
                    },
                    derived_rate + speed,
                )
            }
            None => (shape, derived_rate),
        };
        let rate = s.motion_rate.unwrap_or(derived_rate);
        let motion = if rate == 0.0 {
            Motion::Static
        } else {
            Motion::Linear { rate }
        };
        MovingSet::new(shape, motion).map_err(|e| self.err(Some(sec), Some("kind"), e.to_string()))
    }

    fn forcing(&self, f: &ForcingSection) -> Result<Forcing, ScenarioError> {
        let sec = "forcing";
        let matrix = self.matrix(sec, &f.matrix)?;
        let offset = self.opt_vector(sec, "offset", &f.offset)?;
        let path = match &f.offset_velocity {
            Some(v) => Path::Linear {
                origin: offset,
                velocity: self.vector(sec, "offset_velocity", v)?,
            },
            None => Path::Constant(offset),
        };
        let mut forcing = Forcing::affine(matrix, path);
        if let Some(beta) = f.beta {
            forcing = forcing.with_growth(constant(beta));
        }
        if let Some(kappa) = f.kappa {
            forcing = forcing.with_lipschitz(std::sync::Arc::new(move |_, _| kappa));
        }
        Ok(forcing)
    }

    fn kernel(&self, k: &KernelSection, t0: f64) -> Result<VolterraKernel, ScenarioError> {
        let sec = "kernel";
        let weight = match k.weight.as_deref() {
            None if k.matrix.is_none() && k.offset.is_none() => return Ok(VolterraKernel::zero(self.dim)),
            None | Some("constant") => KernelWeight::Constant(k.scale.unwrap_or(1.0)),
            Some("exponential") => KernelWeight::Exponential {
                scale: k.scale.unwrap_or(1.0),
                rate: k.rate.unwrap_or(0.0),
            },
            Some("affine") => KernelWeight::Affine {
                constant: k.constant.unwrap_or(0.0),
                t_coef: k.t_coef.unwrap_or(0.0),
                s_coef: k.s_coef.unwrap_or(0.0),
            },
            Some(other) => {
                return Err(self.err(
                    Some(sec),
                    Some("weight"),
                    format!("unknown kernel weight `{other}` (constant | exponential | affine)"),
                ))
            }
        };
        let matrix = self.matrix(sec, &k.matrix)?;
        let offset = self.opt_vector(sec, "offset", &k.offset)?;
        let mut kernel = VolterraKernel::separable(weight, matrix, offset, t0);
        if let Some(sigma) = k.sigma {
            kernel = kernel.with_growth(std::sync::Arc::new(move |_, _| sigma));
        }
        if let Some(mu) = k.mu {
            kernel = kernel.with_lipschitz(std::sync::Arc::new(move |_, _| mu));
        }
        Ok(kernel)
    }

    fn solver(&self, s: &SolverSection) -> Result<SolverConfig, ScenarioError> {
        let sec = "solver";
        let scheme = match s.scheme.as_str() {
            "catching-up" => Scheme::CatchingUp,
            "fixed-point" => Scheme::FixedPoint,
            other => {
                return Err(self.err(
                    Some(sec),
                    Some("scheme"),
                    format!("unknown scheme `{other}` (catching-up | fixed-point)"),
                ))
            }
        };
        let config = SolverConfig {
            scheme,
            grid: GridChoice::Uniform(s.steps),
            tol_fp: s.tol_fp,
            max_iter: s.max_iter,
            tol_feas: s.tol_feas,
            reparametrize: s.reparametrize,
        };
        config
            .validate()
            .map_err(|e| self.err(Some(sec), None, e.to_string()))?;
        Ok(config)
    }
}

/// Section of the scenario file a model error refers to.
fn model_anchor(e: &ModelError) -> (Option<&'static str>, Option<&'static str>) {
    match e {
        ModelError::ModulusViolation { modulus, .. } if modulus.contains("forcing") => (Some("forcing"), None),
        ModelError::ModulusViolation { modulus, .. } if modulus.contains("kernel") => (Some("kernel"), None),
        ModelError::ModulusViolation { modulus, .. } if modulus.contains("speed") => (Some("z"), Some("speed_bound")),
        ModelError::ModulusViolation { .. } => (Some("set"), Some("motion_rate")),
        ModelError::InfeasibleStart { .. } => (None, Some("x0")),
        ModelError::InvalidInterval(..) => (None, Some("interval")),
        _ => (None, Some("dimension")),
    }
}

impl Scenario {
    pub fn from_file(path: &FsPath) -> Result<Self, ScenarioError> {
        let origin = path.display().to_string();
        let source = std::fs::read_to_string(path).map_err(|e| ScenarioError {
            origin: origin.clone(),
            line: None,
            message: format!("cannot read scenario: {e}"),
        })?;
        let base = path.parent().map(FsPath::to_path_buf).unwrap_or_default();
        Self::parse(&source, &origin, &base)
    }

    /// Parses `source`; `base` resolves relative references such as the dependence sibling.
    pub fn parse(source: &str, origin: &str, base: &FsPath) -> Result<Self, ScenarioError> {
        let file: ScenarioFile = toml::from_str(source).map_err(|e| ScenarioError {
            origin: origin.to_string(),
            line: e
                .span()
                .map(|span| source[..span.start.min(source.len())].matches('\n').count() + 1),
            message: e.message().to_string(),
        })?;
        let b = Builder {
            source,
            origin,
            dim: file.dimension,
        };
        if file.dimension == 0 {
            return Err(b.err(None, Some("dimension"), "dimension must be positive"));
        }
        let x0 = b.vector_top("x0", &file.x0)?;
        let [t0, t1] = file.interval;
        let set = b.set(&file.set)?;
        let forcing = b.forcing(&file.forcing)?;
        let kernel = b.kernel(&file.kernel, t0)?;
        let (z, speed) = match &file.z {
            Some(p) => (b.path("z", p)?, p.speed_bound),
            None => (Path::zero(file.dimension), None),
        };
        let config = b.solver(&file.solver)?;
        let mut spec = ProblemSpec::new((t0, t1), set, z, forcing, kernel, x0).map_err(|e| {
            let (section, key) = model_anchor(&e);
            b.err(section, key, e.to_string())
        })?;
        if let Some(r) = speed {
            spec = spec.with_z_speed(constant(r));
        } else if spec.z.speed_bound().is_none() {
            return Err(b.err(Some("z"), None, "[z] needs `speed_bound` for this path"));
        }
        spec.check_feasible(config.tol_feas)
            .map_err(|e| b.err(None, Some("x0"), e.to_string()))?;
        spec.validate().map_err(|e| {
            let (section, key) = model_anchor(&e);
            b.err(section, key, e.to_string())
        })?;

        let variant = match file.verify.dependence_variant.as_deref() {
            None | Some("general") | Some("general-z") => DependenceVariant::General,
            Some("shared-z") => DependenceVariant::SharedZ,
            Some(other) => {
                return Err(b.err(
                    Some("verify"),
                    Some("dependence_variant"),
                    format!("unknown dependence variant `{other}` (general | shared-z)"),
                ))
            }
        };
        let verify = Verify {
            envelopes: file.verify.envelopes,
            slow: file.verify.slow,
            dependence: file.verify.dependence.as_ref().map(|p| (base.join(p), variant)),
            gronwall_self_test: file.verify.gronwall_self_test,
        };
        Ok(Scenario {
            name: file.name,
            spec,
            config,
            verify,
            origin: origin.to_string(),
        })
    }
}

impl Builder<'_> {
    fn vector_top(&self, key: &str, values: &[f64]) -> Result<DVector<f64>, ScenarioError> {
        if values.len() != self.dim {
            return Err(self.err(
                None,
                Some(key),
                format!("`{key}` has {} entries, dimension is {}", values.len(), self.dim),
            ));
        }
        Ok(DVector::from_column_slice(values))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HALF_LINE: &str = r#"
name = "moving-half-line"
dimension = 1
interval = [0.0, 1.0]
x0 = [0.0]

[set]
kind = "half-space"
normal = [1.0]
offset_rate = 1.0

[solver]
steps = 10
"#;

    fn parse(src: &str) -> Result<Scenario, ScenarioError> {
        Scenario::parse(src, "test.toml", FsPath::new("."))
    }

    #[test]
    fn minimal_scenario_loads() {
        let s = parse(HALF_LINE).unwrap();
        assert_eq!(s.name, "moving-half-line");
        assert_eq!(s.config.grid, GridChoice::Uniform(10));
        assert_eq!(s.spec.set.motion().rate(0.3), 1.0);
        assert!(s.spec.kernel.is_zero());
    }

    #[test]
    fn unknown_key_is_line_anchored() {
        let src = HALF_LINE.replace("offset_rate = 1.0", "offset_rate = 1.0\nwobble = 3");
        let err = parse(&src).unwrap_err();
        assert_eq!(err.line, Some(11));
        assert!(err.message.contains("wobble"), "{err}");
    }

    #[test]
    fn wrong_dimension_points_at_key() {
        let src = HALF_LINE.replace("normal = [1.0]", "normal = [1.0, 0.0]");
        let err = parse(&src).unwrap_err();
        assert_eq!(err.line, Some(9));
    }

    #[test]
    fn understated_growth_is_rejected() {
        let src = format!("{HALF_LINE}\n[forcing]\nmatrix = [[2.0]]\nbeta = 0.5\n");
        let err = parse(&src).unwrap_err();
        assert!(err.message.contains("β"), "{err}");
        assert!(err.message.contains("t = "), "{err}");
        assert_eq!(err.line, Some(line_of(&src, Some("forcing"), None).unwrap()));
    }

    #[test]
    fn understated_motion_is_rejected() {
        let src = HALF_LINE.replace("offset_rate = 1.0", "offset_rate = 1.0\nmotion_rate = 0.5");
        let err = parse(&src).unwrap_err();
        assert!(err.message.contains("motion"), "{err}");
        assert_eq!(err.line, Some(11));
    }

    #[test]
    fn infeasible_x0_is_rejected() {
        let src = HALF_LINE.replace("x0 = [0.0]", "x0 = [-1.0]");
        let err = parse(&src).unwrap_err();
        assert_eq!(err.line, Some(5));
    }

    #[test]
    fn syntax_error_has_line() {
        let err = parse("name = \"x\"\ndimension = \n").unwrap_err();
        assert_eq!(err.line, Some(2));
    }
}

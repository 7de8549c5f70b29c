//! Batch front end: run a scenario with its verifications, convergence studies, and the
//! built-in self test. Exit codes: 0 pass, 1 verification failure, 2 parse/validation error.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path as FsPath, PathBuf};

use nalgebra::DVector;

use crate::analysis::{check_envelopes, compute_envelopes, dependence_bound, slow_residual, DependenceVariant};
use crate::builtins;
use crate::dynamics::{ProblemSpec, Trajectory};
use crate::grid::TimeGrid;
use crate::gronwall::{bound, builtin_cases, verify_dominance};
use crate::scenario::{Scenario, ScenarioError};
use crate::solver::{catching_up_on, fixed_point_solve, solve, GridChoice, Scheme, SolverConfig};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_VERIFY: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug)]
pub enum CliError {
    Input(ScenarioError),
    Io(io::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        CliError::Input(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Io(_) => EXIT_VERIFY,
        }
    }
}

/// One summary line per verification plus the overall verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub lines: Vec<String>,
    pub passed: bool,
}

impl Outcome {
    fn new() -> Self {
        Self {
            lines: Vec::new(),
            passed: true,
        }
    }

    fn record(&mut self, ok: bool, line: String) {
        self.passed &= ok;
        self.lines.push(format!("{} {line}", if ok { "PASS" } else { "FAIL" }));
    }

    fn note(&mut self, line: String) {
        self.lines.push(line);
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed {
            EXIT_PASS
        } else {
            EXIT_VERIFY
        }
    }
}

fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes a CSV with the given header; every value uses 17 significant digits.
pub fn write_csv<const N: usize>(path: &FsPath, header: &str, rows: &[[f64; N]]) -> io::Result<()> {
    let mut out = String::with_capacity(rows.len() * N * 24);
    out.push_str(header);
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&v| fmt_float(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    fs::write(path, out)
}

pub fn write_trajectory(path: &FsPath, traj: &Trajectory) -> io::Result<()> {
    let d = traj.dim();
    let mut header = String::from("t");
    for i in 1..=d {
        write!(header, ",x{i}").unwrap();
    }
    for i in 1..=d {
        write!(header, ",d{i}").unwrap();
    }
    let mut out = header;
    out.push('\n');
    for (k, &t) in traj.times().iter().enumerate() {
        let mut cells = vec![fmt_float(t)];
        cells.extend(traj.states[k].iter().map(|&v| fmt_float(v)));
        cells.extend(traj.derivatives[k].iter().map(|&v| fmt_float(v)));
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    fs::write(path, out)
}

fn step_of(config: &SolverConfig, spec: &ProblemSpec) -> f64 {
    match &config.grid {
        GridChoice::Uniform(n) => (spec.t1 - spec.t0) / *n as f64,
        GridChoice::Explicit(g) => g.max_step(),
    }
}

/// Envelope tolerance `5h + 1e−9`.
pub fn envelope_tolerance(h: f64) -> f64 {
    5.0 * h + 1e-9
}

/// Dependence tolerance `5h + 1e−6`.
pub fn dependence_tolerance(h: f64) -> f64 {
    5.0 * h + 1e-6
}

/// Minimal observed order for the slow residual under one halving of `h`.
pub const SLOW_ORDER: f64 = 0.45;
/// Residuals at or below this are treated as exactly zero.
pub const EXACT_ZERO: f64 = 1e-12;

pub fn run_scenario(path: &FsPath, out_dir: &FsPath) -> Result<Outcome, CliError> {
    let scenario = Scenario::from_file(path)?;
    run_loaded(&scenario, out_dir)
}

pub fn run_loaded(scenario: &Scenario, out_dir: &FsPath) -> Result<Outcome, CliError> {
    fs::create_dir_all(out_dir)?;
    let spec = &scenario.spec;
    let config = &scenario.config;
    let mut outcome = Outcome::new();
    let h = step_of(config, spec);

    let (traj, report) = match solve(spec, config) {
        Ok(v) => v,
        Err(e) => {
            outcome.record(false, format!("solve: {e}"));
            return Ok(outcome);
        }
    };
    write_trajectory(&out_dir.join("trajectory.csv"), &traj)?;
    match report {
        Some(r) => outcome.record(
            r.converged,
            format!(
                "solve: fixed-point converged in {} iterations (last delta {:.3e})",
                r.iterations,
                r.deltas.last().copied().unwrap_or(0.0)
            ),
        ),
        None => outcome.note(format!("solve: catching-up on {} nodes", traj.grid.len())),
    }

    let env = compute_envelopes(spec, &traj.grid);
    let env_report = check_envelopes(&traj, &env).expect("same grid");
    write_csv(&out_dir.join("envelope.csv"), "t,‖x‖,r,‖d‖,θ", &env_report.rows)?;
    if scenario.verify.envelopes {
        let tol = envelope_tolerance(h);
        outcome.record(
            env_report.passes(tol),
            format!(
                "envelopes: r-margin {:.6e} (t = {}), θ-margin {:.6e} (t = {}), tol {:.3e}",
                env_report.r_margin, env_report.r_worst_time, env_report.theta_margin, env_report.theta_worst_time, tol
            ),
        );
    }

    if scenario.verify.slow {
        match slow_check(spec, &traj, config) {
            Ok((ok, line, rows)) => {
                write_csv(&out_dir.join("slow.csv"), "t,residual", &rows)?;
                outcome.record(ok, line);
            }
            Err(line) => outcome.record(false, line),
        }
    }

    if let Some((sibling, variant)) = &scenario.verify.dependence {
        let other = Scenario::from_file(sibling)?;
        match dependence_check(spec, &other.spec, &traj, config, *variant) {
            Ok((ok, line, rows)) => {
                write_csv(&out_dir.join("dependence.csv"), "t,measured,bound,Δ,δ,ε,ν", &rows)?;
                outcome.record(ok, line);
            }
            Err(line) => outcome.record(false, line),
        }
    }

    if scenario.verify.gronwall_self_test {
        for line in gronwall_self_test(Some(out_dir))? {
            outcome.record(line.0, line.1);
        }
    }
    Ok(outcome)
}

type Check<const N: usize> = Result<(bool, String, Vec<[f64; N]>), String>;

fn slow_check(spec: &ProblemSpec, traj: &Trajectory, config: &SolverConfig) -> Check<2> {
    let coarse = slow_residual(traj, spec).map_err(|e| format!("slow: {e}"))?;
    let fine_grid = traj.grid.refine(2);
    let fine_traj = catching_up_on(spec, &fine_grid, config.tol_feas).map_err(|e| format!("slow: {e}"))?;
    let fine = slow_residual(&fine_traj, spec).map_err(|e| format!("slow: {e}"))?;
    let (ok, order) = if coarse.max <= EXACT_ZERO && fine.max <= EXACT_ZERO {
        (true, "exact".to_string())
    } else if fine.max <= EXACT_ZERO {
        (true, "∞".to_string())
    } else {
        let p = (coarse.max / fine.max).log2();
        (p >= SLOW_ORDER, format!("{p:.3}"))
    };
    let rows = coarse.times.iter().zip(&coarse.values).map(|(&t, &r)| [t, r]).collect();
    Ok((
        ok,
        format!(
            "slow: residual max {:.6e} (mean {:.3e}), refined max {:.6e}, order {order} (need ≥ {SLOW_ORDER})",
            coarse.max, coarse.mean, fine.max
        ),
        rows,
    ))
}

fn dependence_check(
    spec: &ProblemSpec,
    other: &ProblemSpec,
    traj: &Trajectory,
    config: &SolverConfig,
    variant: DependenceVariant,
) -> Check<7> {
    let second = match config.scheme {
        Scheme::CatchingUp => catching_up_on(other, &traj.grid, config.tol_feas),
        Scheme::FixedPoint => fixed_point_solve(other, config).map(|(t, _)| t),
    }
    .map_err(|e| format!("dependence: {e}"))?;
    let report = dependence_bound(spec, other, traj, &second, variant).map_err(|e| format!("dependence: {e}"))?;
    let tol = dependence_tolerance(traj.grid.max_step());
    let estimate = if report.estimated {
        " (sampled sup estimate)"
    } else {
        ""
    };
    Ok((
        report.passes(tol),
        format!(
            "dependence ({variant}): margin {:.6e}, tol {:.3e}{estimate}",
            report.margin, tol
        ),
        report.rows(),
    ))
}

/// Dominance of every built-in Gronwall case; writes `gronwall_<case>.csv` when asked.
pub fn gronwall_self_test(out_dir: Option<&FsPath>) -> io::Result<Vec<(bool, String)>> {
    let mut lines = Vec::new();
    for (name, data) in builtin_cases() {
        let grid = TimeGrid::uniform(data.t0, data.t1, 200).expect("valid interval");
        let line = match bound(&data, &grid).and_then(|curve| {
            if let Some(dir) = out_dir {
                let rows: Vec<[f64; 2]> = curve.grid.iter().zip(&curve.values).map(|(&t, &v)| [t, v]).collect();
                write_csv(&dir.join(format!("gronwall_{name}.csv")), "t,value", &rows).ok();
            }
            verify_dominance(&curve, &data, &grid)
        }) {
            Ok(report) => (
                report.passes(1e-6),
                format!(
                    "gronwall {name}: margin {:.6e} at t = {}",
                    report.margin, report.worst_time
                ),
            ),
            Err(e) => (false, format!("gronwall {name}: {e}")),
        };
        lines.push(line);
    }
    Ok(lines)
}

/// Reference against which convergence errors are measured.
pub enum Reference<'a> {
    /// Catching-up on the largest grid refined by this factor.
    Refined(usize),
    Exact(&'a dyn Fn(f64) -> DVector<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub steps: usize,
    pub h: f64,
    pub error: f64,
    /// `log₂(e_{prev}/e)` relative to the previous row.
    pub order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyTable {
    pub rows: Vec<StudyRow>,
    /// Least-squares slope of `log e` against `log h`; `None` when the errors vanish.
    pub fitted_order: Option<f64>,
    pub exact: bool,
}

impl StudyTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,h,error,order\n");
        for row in &self.rows {
            let order = if self.exact {
                "exact".to_string()
            } else {
                row.order.map(fmt_float).unwrap_or_default()
            };
            writeln!(
                out,
                "{},{},{},{}",
                row.steps,
                fmt_float(row.h),
                fmt_float(row.error),
                order
            )
            .unwrap();
        }
        out
    }
}

fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Catching-up on each uniform grid, sup-error at the grid nodes against `reference`.
pub fn convergence_study(
    spec: &ProblemSpec,
    config: &SolverConfig,
    grids: &[usize],
    reference: Reference<'_>,
) -> Result<StudyTable, String> {
    if grids.len() < 3 || grids.windows(2).any(|w| w[1] <= w[0]) {
        return Err("need at least 3 strictly increasing grid sizes".into());
    }
    let largest = *grids.last().expect("non-empty");
    let fine = match reference {
        Reference::Refined(factor) => {
            let grid = TimeGrid::uniform(spec.t0, spec.t1, largest * factor).map_err(|e| e.to_string())?;
            Some(catching_up_on(spec, &grid, config.tol_feas).map_err(|e| e.to_string())?)
        }
        Reference::Exact(_) => None,
    };
    let mut rows: Vec<StudyRow> = Vec::with_capacity(grids.len());
    for &n in grids {
        let grid = TimeGrid::uniform(spec.t0, spec.t1, n).map_err(|e| e.to_string())?;
        let traj = catching_up_on(spec, &grid, config.tol_feas).map_err(|e| e.to_string())?;
        let error = match (&reference, &fine) {
            (Reference::Exact(exact), _) => traj
                .states
                .iter()
                .zip(traj.times())
                .map(|(x, &t)| (x - exact(t)).norm())
                .fold(0.0, f64::max),
            (Reference::Refined(_), Some(fine)) => {
                let total = fine.grid.len() - 1;
                if total % n != 0 {
                    return Err(format!("grid size {n} does not divide the reference size {total}"));
                }
                let stride = total / n;
                traj.states
                    .iter()
                    .enumerate()
                    .map(|(k, x)| (x - &fine.states[k * stride]).norm())
                    .fold(0.0, f64::max)
            }
            _ => unreachable!(),
        };
        let order = rows.last().and_then(|prev: &StudyRow| {
            (prev.error > EXACT_ZERO && error > EXACT_ZERO)
                .then(|| (prev.error / error).ln() / (prev.h / grid.max_step()).ln())
        });
        rows.push(StudyRow {
            steps: n,
            h: (spec.t1 - spec.t0) / n as f64,
            error,
            order,
        });
    }
    let exact = rows.iter().all(|r| r.error <= EXACT_ZERO);
    let positive: Vec<&StudyRow> = rows.iter().filter(|r| r.error > EXACT_ZERO).collect();
    let fitted_order = (positive.len() >= 2).then(|| {
        let xs: Vec<f64> = positive.iter().map(|r| r.h.ln()).collect();
        let ys: Vec<f64> = positive.iter().map(|r| r.error.ln()).collect();
        fit_slope(&xs, &ys)
    });
    Ok(StudyTable {
        rows,
        fitted_order,
        exact,
    })
}

/// `study` verb: self-convergence against the largest grid refined ×8.
pub fn run_study(path: &FsPath, grids: &[usize], out_dir: &FsPath) -> Result<(StudyTable, Outcome), CliError> {
    let scenario = Scenario::from_file(path)?;
    fs::create_dir_all(out_dir)?;
    let mut outcome = Outcome::new();
    match convergence_study(&scenario.spec, &scenario.config, grids, Reference::Refined(8)) {
        Ok(table) => {
            fs::write(out_dir.join("study.csv"), table.to_csv())?;
            let fitted = match (table.exact, table.fitted_order) {
                (true, _) => "exact".to_string(),
                (false, Some(p)) => format!("{p:.4}"),
                (false, None) => "undetermined".to_string(),
            };
            outcome.note(format!("study: fitted order {fitted}"));
            Ok((table, outcome))
        }
        Err(e) => Err(CliError::Input(ScenarioError {
            origin: scenario.origin.clone(),
            line: None,
            message: e,
        })),
    }
}

/// Built-in Gronwall dominance plus scheme agreement and envelope dominance on every
/// built-in scenario.
pub fn selftest() -> Outcome {
    let mut outcome = Outcome::new();
    for (ok, line) in gronwall_self_test(None).expect("no i/o without an output directory") {
        outcome.record(ok, line);
    }
    for (name, scenario) in builtins::all() {
        let spec = &scenario.spec;
        let config = SolverConfig {
            scheme: Scheme::CatchingUp,
            ..scenario.config.clone()
        };
        let h = step_of(&config, spec);
        let result = catching_up_on(spec, &config.grid_for(spec).expect("valid grid"), config.tol_feas)
            .map_err(|e| e.to_string())
            .and_then(|cu| {
                let (fp, report) = fixed_point_solve(spec, &config).map_err(|e| e.to_string())?;
                let gap = fp.sup_distance(&cu).map_err(|e| e.to_string())?;
                let env = compute_envelopes(spec, &cu.grid);
                let worst = [&cu, &fp]
                    .iter()
                    .map(|t| check_envelopes(t, &env).expect("same grid"))
                    .map(|r| r.r_margin.min(r.theta_margin))
                    .fold(f64::INFINITY, f64::min);
                Ok((gap, report.iterations, worst))
            });
        match result {
            Ok((gap, iterations, worst)) => {
                let agree = gap <= config.tol_fp + 5.0 * h;
                let envelope = worst >= -envelope_tolerance(h);
                outcome.record(
                    agree && envelope,
                    format!("{name}: scheme gap {gap:.3e} ({iterations} iterations), envelope margin {worst:.3e}"),
                );
            }
            Err(e) => outcome.record(false, format!("{name}: {e}")),
        }
    }
    outcome
}

/// Default output directory for a scenario path: `out/<file stem>`.
pub fn default_out_dir(path: &FsPath) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    PathBuf::from("out").join(stem)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_exact_power_law() {
        let hs = [0.1f64, 0.05, 0.025];
        let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
        let ys: Vec<f64> = hs.iter().map(|h| (3.0 * h * h).ln()).collect();
        assert!((fit_slope(&xs, &ys) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn float_format_round_trips() {
        let v = 0.1 + 0.2;
        assert_eq!(fmt_float(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn study_rejects_bad_grid_lists() {
        let (_, s) = builtins::all().into_iter().next().unwrap();
        assert!(convergence_study(&s.spec, &s.config, &[10, 20], Reference::Refined(8)).is_err());
        assert!(convergence_study(&s.spec, &s.config, &[10, 30, 20], Reference::Refined(8)).is_err());
    }
}

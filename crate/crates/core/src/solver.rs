//! Time-stepping for the perturbed sweeping process: the direct catching-up scheme and the
//! fixed-point iteration on the history-dependent operator with an inner sweeping solve.

use nalgebra::DVector;
use thiserror::Error;

use crate::analysis::compute_envelopes;
use crate::dynamics::{phi_reparametrization, MemoryIntegrator, ModelError, ProblemSpec, Provenance, Trajectory};
use crate::grid::{trapezoid_weights, GridError, TimeGrid};
use crate::path::Path;
use crate::sets::{MovingSet, SetError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    CatchingUp,
    FixedPoint,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GridChoice {
    /// Number of equal steps.
    Uniform(usize),
    Explicit(TimeGrid),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub scheme: Scheme,
    pub grid: GridChoice,
    pub tol_fp: f64,
    pub max_iter: usize,
    pub tol_feas: f64,
    pub reparametrize: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::CatchingUp,
            grid: GridChoice::Uniform(400),
            tol_fp: 1e-8,
            max_iter: 50,
            tol_feas: 1e-9,
            reparametrize: false,
        }
    }
}

impl SolverConfig {
    pub fn with_steps(mut self, steps: usize) -> Self {
        self.grid = GridChoice::Uniform(steps);
        self
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if let GridChoice::Uniform(n) = self.grid {
            if n < 2 {
                return Err(SolverError::InvalidConfig(format!("need at least 2 steps, got {n}")));
            }
        }
        if !(self.tol_fp > 0.0) {
            return Err(SolverError::InvalidConfig("tol_fp must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(SolverError::InvalidConfig("max_iter must be at least 1".into()));
        }
        if !(self.tol_feas > 0.0) {
            return Err(SolverError::InvalidConfig("tol_feas must be positive".into()));
        }
        Ok(())
    }

    /// The grid this configuration prescribes on the problem interval.
    pub fn grid_for(&self, spec: &ProblemSpec) -> Result<TimeGrid, SolverError> {
        self.validate()?;
        match &self.grid {
            GridChoice::Uniform(n) => Ok(TimeGrid::uniform(spec.t0, spec.t1, *n)?),
            GridChoice::Explicit(grid) => {
                let tol = 1e-12 * (spec.t1 - spec.t0).abs().max(1.0);
                if (grid.start() - spec.t0).abs() > tol || (grid.end() - spec.t1).abs() > tol {
                    return Err(GridError::Mismatch("explicit grid does not span the interval".into()).into());
                }
                Ok(grid.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointReport {
    pub iterations: usize,
    /// `‖y_{m+1} − y_m‖_∞` per iteration.
    pub deltas: Vec<f64>,
    pub converged: bool,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("initial point is at distance {distance} from C(T0) + z(T0)")]
    InfeasibleStart { distance: f64 },
    #[error("state {index} left the constraint by {distance}")]
    Infeasible { index: usize, distance: f64 },
    #[error("fixed-point iteration did not converge in {} iterations (last delta {:?})", .0.iterations, .0.deltas.last())]
    NoConvergence(FixedPointReport),
    #[error(transparent)]
    Set(#[from] SetError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Model(ModelError),
}

impl From<ModelError> for SolverError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::InfeasibleStart { distance } => SolverError::InfeasibleStart { distance },
            ModelError::Set(e) => SolverError::Set(e),
            ModelError::Grid(e) => SolverError::Grid(e),
            other => SolverError::Model(other),
        }
    }
}

fn check_start(spec: &ProblemSpec, tol: f64) -> Result<(), SolverError> {
    spec.check_feasible(tol).map_err(SolverError::from)
}

fn feasibility(set: &MovingSet, z: &Path, t: f64, x: &DVector<f64>, index: usize, tol: f64) -> Result<(), SolverError> {
    let distance = set.distance(t, &(x - z.eval(t)))?;
    if distance > tol * (1.0 + x.norm()) {
        return Err(SolverError::Infeasible { index, distance });
    }
    Ok(())
}

/// `x_{k+1} = proj_{C(t_{k+1}) + z(t_{k+1})}(x_k + h_k·F_k)` with `F_k = f(t_k, x_k) + ∫g`.
pub fn catching_up(spec: &ProblemSpec, config: &SolverConfig) -> Result<Trajectory, SolverError> {
    let grid = config.grid_for(spec)?;
    catching_up_on(spec, &grid, config.tol_feas)
}

pub fn catching_up_on(spec: &ProblemSpec, grid: &TimeGrid, tol_feas: f64) -> Result<Trajectory, SolverError> {
    check_start(spec, tol_feas)?;
    let nodes = grid.nodes();
    let mut states = Vec::with_capacity(nodes.len());
    states.push(spec.x0.clone());
    let mut memory = MemoryIntegrator::new(&spec.kernel);
    for k in 0..nodes.len() - 1 {
        let x = &states[k];
        memory.push(x);
        let forcing = spec.forcing.eval(nodes[k], x) + memory.integral(nodes, &states, k);
        let predictor = x + forcing * grid.step(k);
        let t = nodes[k + 1];
        let next = spec.set.project_shifted(t, &predictor, &spec.z.eval(t))?;
        feasibility(&spec.set, &spec.z, t, &next, k + 1, tol_feas)?;
        states.push(next);
    }
    Ok(Trajectory::new(grid.clone(), states, Provenance::CatchingUp))
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerSweep {
    pub trajectory: Trajectory,
    /// `min_k (‖h_k‖ + motion_k − ‖d_k − h_k‖)` with the secant motion
    /// `(|v(t_{k+1}) − v(t_k)| + ‖z(t_{k+1}) − z(t_k)‖)/h_k`.
    pub margin: f64,
}

/// Catching-up with the forcing frozen to `forcing[k]` on `[t_k, t_{k+1}]`.
pub fn solve_inner_sweeping(
    set: &MovingSet,
    z: &Path,
    forcing: &[DVector<f64>],
    grid: &TimeGrid,
    x0: &DVector<f64>,
    tol_feas: f64,
) -> Result<InnerSweep, SolverError> {
    let steps: Vec<f64> = (0..grid.len() - 1).map(|k| grid.step(k)).collect();
    sweep(set, z, forcing, grid, &steps, x0, tol_feas)
}

/// Inner solve where node `k` advances by `steps[k]·forcing[k]`; the steps differ from the
/// time steps in rescaled time.
fn sweep(
    set: &MovingSet,
    z: &Path,
    forcing: &[DVector<f64>],
    grid: &TimeGrid,
    steps: &[f64],
    x0: &DVector<f64>,
    tol_feas: f64,
) -> Result<InnerSweep, SolverError> {
    let nodes = grid.nodes();
    if forcing.len() + 1 < nodes.len() {
        return Err(GridError::Mismatch(format!(
            "forcing has {} values for {} steps",
            forcing.len(),
            nodes.len() - 1
        ))
        .into());
    }
    let distance = set.distance(nodes[0], &(x0 - z.eval(nodes[0])))?;
    if distance > tol_feas * (1.0 + x0.norm()) {
        return Err(SolverError::InfeasibleStart { distance });
    }
    let mut states = Vec::with_capacity(nodes.len());
    states.push(x0.clone());
    let mut margin = f64::INFINITY;
    for k in 0..nodes.len() - 1 {
        let t = nodes[k + 1];
        let z_next = z.eval(t);
        let next = set.project_shifted(t, &(&states[k] + &forcing[k] * steps[k]), &z_next)?;
        feasibility(set, z, t, &next, k + 1, tol_feas)?;
        let h = grid.step(k);
        let effective = &forcing[k] * (steps[k] / h);
        let d = (&next - &states[k]) / h;
        let motion =
            ((set.motion().value(t) - set.motion().value(nodes[k])).abs() + (z_next - z.eval(nodes[k])).norm()) / h;
        margin = margin.min(effective.norm() + motion - (d - &effective).norm());
        states.push(next);
    }
    Ok(InnerSweep {
        trajectory: Trajectory::new(grid.clone(), states, Provenance::FixedPoint),
        margin,
    })
}

fn truncate(y: &DVector<f64>, radius: f64) -> DVector<f64> {
    let norm = y.norm();
    if norm > radius {
        y * (radius / norm)
    } else {
        y.clone()
    }
}

/// The operator `F`: truncate `y` onto `r(t_k)·B`, build the history-dependent forcing and
/// solve the inner sweeping process.
struct Operator<'a> {
    spec: &'a ProblemSpec,
    grid: &'a TimeGrid,
    radius: &'a [f64],
    tol_feas: f64,
    rescaled: Option<Rescaled>,
}

/// Data of the `Φ`-rescaled time variable.
struct Rescaled {
    phi: Vec<f64>,
    s_nodes: Vec<f64>,
    steps: Vec<f64>,
}

impl Operator<'_> {
    fn apply(&self, y: &[DVector<f64>]) -> Result<Vec<DVector<f64>>, SolverError> {
        let nodes = self.grid.nodes();
        let n = nodes.len();
        let truncated: Vec<DVector<f64>> = y.iter().zip(self.radius).map(|(y, &r)| truncate(y, r)).collect();
        let mut memory = MemoryIntegrator::new(&self.spec.kernel);
        let mut forcing = Vec::with_capacity(n - 1);
        for k in 0..n - 1 {
            let t = nodes[k];
            memory.push(&truncated[k]);
            let local = self.spec.forcing.eval(t, &truncated[k]);
            let value = match &self.rescaled {
                None => local + memory.integral(nodes, &truncated, k),
                Some(re) => {
                    // f̃ = f/φ and g̃ = g/(φ(t)φ(s)) integrated in rescaled time
                    let weights = trapezoid_weights(&re.s_nodes, k)
                        .enumerate()
                        .map(|(j, w)| w / re.phi[j]);
                    (local + memory.weighted(t, nodes, &truncated, weights)) / re.phi[k]
                }
            };
            forcing.push(value);
        }
        let steps: Vec<f64> = match &self.rescaled {
            None => (0..n - 1).map(|k| self.grid.step(k)).collect(),
            Some(re) => re.steps.clone(),
        };
        let inner = sweep(
            &self.spec.set,
            &self.spec.z,
            &forcing,
            self.grid,
            &steps,
            &self.spec.x0,
            self.tol_feas,
        )?;
        Ok(inner.trajectory.states)
    }
}

fn sup_delta(a: &[DVector<f64>], b: &[DVector<f64>]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max)
}

/// Picard iteration `y_{m+1} = F(y_m)` from the constant curve `x0`, with truncation radius
/// taken from the a priori envelope. Returns `y_m` once `‖F(y_m) − y_m‖_∞ ≤ tol_fp`.
pub fn fixed_point_solve(
    spec: &ProblemSpec,
    config: &SolverConfig,
) -> Result<(Trajectory, FixedPointReport), SolverError> {
    let grid = config.grid_for(spec)?;
    let envelope = compute_envelopes(spec, &grid);
    fixed_point_with_radius(spec, config, &grid, &envelope.r)
}

/// As [`fixed_point_solve`] with an explicit truncation radius per node.
pub fn fixed_point_with_radius(
    spec: &ProblemSpec,
    config: &SolverConfig,
    grid: &TimeGrid,
    radius: &[f64],
) -> Result<(Trajectory, FixedPointReport), SolverError> {
    config.validate()?;
    check_start(spec, config.tol_feas)?;
    if radius.len() != grid.len() {
        return Err(GridError::Mismatch("one radius per node".into()).into());
    }
    let rescaled = if config.reparametrize {
        let r_final = radius[radius.len() - 1];
        let rep = phi_reparametrization(spec, r_final, grid);
        let steps = rep.cumulative.windows(2).map(|w| w[1] - w[0]).collect();
        Some(Rescaled {
            phi: rep.phi,
            s_nodes: rep.cumulative,
            steps,
        })
    } else {
        None
    };
    let operator = Operator {
        spec,
        grid,
        radius,
        tol_feas: config.tol_feas,
        rescaled,
    };
    let mut y = vec![spec.x0.clone(); grid.len()];
    let mut deltas = Vec::new();
    for m in 0..config.max_iter {
        let next = operator.apply(&y)?;
        let delta = sup_delta(&next, &y);
        deltas.push(delta);
        if delta <= config.tol_fp {
            let report = FixedPointReport {
                iterations: m + 1,
                deltas,
                converged: true,
            };
            return Ok((Trajectory::new(grid.clone(), y, Provenance::FixedPoint), report));
        }
        y = next;
    }
    Err(SolverError::NoConvergence(FixedPointReport {
        iterations: config.max_iter,
        deltas,
        converged: false,
    }))
}

/// Sup-norm fixed-point residual `‖F(y) − y‖_∞` of a trajectory under the envelope radius.
pub fn fixed_point_residual(spec: &ProblemSpec, config: &SolverConfig, traj: &Trajectory) -> Result<f64, SolverError> {
    let envelope = compute_envelopes(spec, &traj.grid);
    let operator = Operator {
        spec,
        grid: &traj.grid,
        radius: &envelope.r,
        tol_feas: config.tol_feas,
        rescaled: None,
    };
    Ok(sup_delta(&operator.apply(&traj.states)?, &traj.states))
}

/// Catching-up on the grid refined by `fine_factor`, restricted to the coarse nodes.
pub fn reference_solve(
    spec: &ProblemSpec,
    config: &SolverConfig,
    fine_factor: usize,
) -> Result<Trajectory, SolverError> {
    if fine_factor < 4 {
        return Err(SolverError::InvalidConfig(format!(
            "fine_factor must be at least 4, got {fine_factor}"
        )));
    }
    let coarse = config.grid_for(spec)?;
    let fine = catching_up_on(spec, &coarse.refine(fine_factor), config.tol_feas)?;
    let states = fine.states.into_iter().step_by(fine_factor).collect();
    Ok(Trajectory::new(coarse, states, Provenance::Reference))
}

/// Runs the configured scheme.
pub fn solve(spec: &ProblemSpec, config: &SolverConfig) -> Result<(Trajectory, Option<FixedPointReport>), SolverError> {
    match config.scheme {
        Scheme::CatchingUp => Ok((catching_up(spec, config)?, None)),
        Scheme::FixedPoint => {
            let (traj, report) = fixed_point_solve(spec, config)?;
            Ok((traj, Some(report)))
        }
    }
}

//! Problem data: forcing `f(t, x)`, Volterra kernel `g(t, s, x)`, perturbation path `z`,
//! the growth/Lipschitz moduli they declare, and the trajectories produced from them.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::grid::{cumulative_trapezoid, trapezoid_weights, GridError, TimeGrid};
use crate::path::{KernelFn, Path, RadialFn, ScalarFn};
use crate::sets::{MovingSet, SetError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(
        "{modulus} violated at t = {t}{}, x = {x:?}: {lhs} > {rhs}",
        s.map(|s| format!(", s = {s}")).unwrap_or_default()
    )]
    ModulusViolation {
        modulus: &'static str,
        t: f64,
        s: Option<f64>,
        x: Vec<f64>,
        lhs: f64,
        rhs: f64,
    },
    #[error("initial point is at distance {distance} from C(T0) + z(T0)")]
    InfeasibleStart { distance: f64 },
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid interval [{0}, {1}]")]
    InvalidInterval(f64, f64),
    #[error("trajectory does not cover node {needed} (has {available} states)")]
    GridMismatch { needed: usize, available: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Set(#[from] SetError),
}

/// Largest singular value.
pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// `f(t, x)` evaluator.
pub type ForcingFn = Arc<dyn Fn(f64, &DVector<f64>) -> DVector<f64> + Send + Sync>;
/// `g(t, s, x)` evaluator.
pub type KernelEvalFn = Arc<dyn Fn(f64, f64, &DVector<f64>) -> DVector<f64> + Send + Sync>;

#[derive(Clone)]
pub enum ForcingKind {
    /// `f(t, x) = A·x + b(t)`
    Affine {
        matrix: DMatrix<f64>,
        offset: Path,
    },
    Custom(ForcingFn),
}

/// `f(t, x)` with growth modulus `β(t)` and Lipschitz family `κ_r(t)`.
#[derive(Clone)]
pub struct Forcing {
    dim: usize,
    kind: ForcingKind,
    growth: ScalarFn,
    lipschitz: RadialFn,
}

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ForcingKind::Affine { matrix, offset } => f
                .debug_struct("Forcing::Affine")
                .field("matrix", &matrix.as_slice())
                .field("offset", offset)
                .finish(),
            ForcingKind::Custom(_) => f.debug_struct("Forcing::Custom").field("dim", &self.dim).finish(),
        }
    }
}

impl Forcing {
    /// Affine forcing with moduli derived from `‖A‖`: `κ_r = ‖A‖`, `β(t) = max(‖A‖, ‖b(t)‖)`.
    pub fn affine(matrix: DMatrix<f64>, offset: Path) -> Self {
        let norm = operator_norm(&matrix);
        let b = offset.clone();
        Self {
            dim: matrix.nrows(),
            kind: ForcingKind::Affine { matrix, offset },
            growth: Arc::new(move |t| norm.max(b.eval(t).norm())),
            lipschitz: Arc::new(move |_, _| norm),
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self::affine(DMatrix::zeros(dim, dim), Path::zero(dim))
    }

    /// A user evaluator; its moduli are declared, not derived.
    pub fn custom(
        dim: usize,
        f: impl Fn(f64, &DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        growth: ScalarFn,
        lipschitz: RadialFn,
    ) -> Self {
        Self {
            dim,
            kind: ForcingKind::Custom(Arc::new(f)),
            growth,
            lipschitz,
        }
    }

    pub fn with_growth(mut self, growth: ScalarFn) -> Self {
        self.growth = growth;
        self
    }

    pub fn with_lipschitz(mut self, lipschitz: RadialFn) -> Self {
        self.lipschitz = lipschitz;
        self
    }

    pub fn kind(&self) -> &ForcingKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, t: f64, x: &DVector<f64>) -> DVector<f64> {
        match &self.kind {
            ForcingKind::Affine { matrix, offset } => matrix * x + offset.eval(t),
            ForcingKind::Custom(f) => f(t, x),
        }
    }

    /// β(t)
    pub fn growth(&self, t: f64) -> f64 {
        (self.growth)(t)
    }

    /// κ_r(t)
    pub fn lipschitz(&self, r: f64, t: f64) -> f64 {
        (self.lipschitz)(r, t)
    }
}

/// Scalar weight `k(t, s)` of a separable kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelWeight {
    Constant(f64),
    /// `scale·exp(−rate·(t − s))`
    Exponential {
        scale: f64,
        rate: f64,
    },
    /// `constant + t_coef·t + s_coef·s`
    Affine {
        constant: f64,
        t_coef: f64,
        s_coef: f64,
    },
}

impl KernelWeight {
    pub fn eval(&self, t: f64, s: f64) -> f64 {
        match *self {
            KernelWeight::Constant(c) => c,
            KernelWeight::Exponential { scale, rate } => scale * (-rate * (t - s)).exp(),
            KernelWeight::Affine {
                constant,
                t_coef,
                s_coef,
            } => constant + t_coef * t + s_coef * s,
        }
    }

    /// `sup_{s ∈ [t0, t]} |k(t, s)|`; every weight is monotone in `s`.
    pub fn sup_abs(&self, t: f64, t0: f64) -> f64 {
        self.eval(t, t).abs().max(self.eval(t, t0.min(t)).abs())
    }
}

#[derive(Clone)]
pub enum KernelKind {
    /// `g(t, s, x) = k(t, s)·(B·x + c)`
    Separable {
        weight: KernelWeight,
        matrix: DMatrix<f64>,
        offset: DVector<f64>,
    },
    Custom(KernelEvalFn),
}

/// `g(t, s, x)` on `{s ≤ t}` with growth modulus `σ(t, s)` and Lipschitz family `μ_r(t)`.
#[derive(Clone)]
pub struct VolterraKernel {
    dim: usize,
    kind: KernelKind,
    growth: KernelFn,
    lipschitz: RadialFn,
}

impl fmt::Debug for VolterraKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            KernelKind::Separable { weight, matrix, offset } => f
                .debug_struct("VolterraKernel::Separable")
                .field("weight", weight)
                .field("matrix", &matrix.as_slice())
                .field("offset", &offset.as_slice())
                .finish(),
            KernelKind::Custom(_) => f
                .debug_struct("VolterraKernel::Custom")
                .field("dim", &self.dim)
                .finish(),
        }
    }
}

impl VolterraKernel {
    /// Separable kernel with derived moduli `σ(t,s) = |k(t,s)|·max(‖B‖, ‖c‖)` and
    /// `μ_r(t) = ‖B‖·sup_{s∈[t0,t]} |k(t,s)|`.
    pub fn separable(weight: KernelWeight, matrix: DMatrix<f64>, offset: DVector<f64>, t0: f64) -> Self {
        let b_norm = operator_norm(&matrix);
        let scale = b_norm.max(offset.norm());
        Self {
            dim: matrix.nrows(),
            kind: KernelKind::Separable { weight, matrix, offset },
            growth: Arc::new(move |t, s| weight.eval(t, s).abs() * scale),
            lipschitz: Arc::new(move |_, t| b_norm * weight.sup_abs(t, t0)),
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self::separable(
            KernelWeight::Constant(0.0),
            DMatrix::zeros(dim, dim),
            DVector::zeros(dim),
            0.0,
        )
    }

    pub fn custom(
        dim: usize,
        g: impl Fn(f64, f64, &DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        growth: KernelFn,
        lipschitz: RadialFn,
    ) -> Self {
        Self {
            dim,
            kind: KernelKind::Custom(Arc::new(g)),
            growth,
            lipschitz,
        }
    }

    pub fn with_growth(mut self, growth: KernelFn) -> Self {
        self.growth = growth;
        self
    }

    pub fn with_lipschitz(mut self, lipschitz: RadialFn) -> Self {
        self.lipschitz = lipschitz;
        self
    }

    pub fn kind(&self) -> &KernelKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        match &self.kind {
            KernelKind::Separable { weight, matrix, offset } => {
                *weight == KernelWeight::Constant(0.0)
                    || (matrix.iter().all(|&v| v == 0.0) && offset.iter().all(|&v| v == 0.0))
            }
            KernelKind::Custom(_) => false,
        }
    }

    pub fn eval(&self, t: f64, s: f64, x: &DVector<f64>) -> DVector<f64> {
        debug_assert!(s <= t + 1e-12 * t.abs().max(1.0), "kernel queried with s > t");
        match &self.kind {
            KernelKind::Separable { weight, matrix, offset } => (matrix * x + offset) * weight.eval(t, s),
            KernelKind::Custom(g) => g(t, s, x),
        }
    }

    /// σ(t, s)
    pub fn growth(&self, t: f64, s: f64) -> f64 {
        (self.growth)(t, s)
    }

    /// μ_r(t)
    pub fn lipschitz(&self, r: f64, t: f64) -> f64 {
        (self.lipschitz)(r, t)
    }

    /// `B·x + c` for separable kernels, cached per state by [`MemoryIntegrator`].
    fn memory_term(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        match &self.kind {
            KernelKind::Separable { matrix, offset, .. } => Some(matrix * x + offset),
            KernelKind::Custom(_) => None,
        }
    }
}

/// Incremental trapezoid evaluation of `∫_{t_0}^{t_k} g(t_k, s, x(s)) ds` along a growing
/// trajectory.
pub(crate) struct MemoryIntegrator<'a> {
    kernel: &'a VolterraKernel,
    terms: Vec<DVector<f64>>,
}

impl<'a> MemoryIntegrator<'a> {
    pub(crate) fn new(kernel: &'a VolterraKernel) -> Self {
        Self {
            kernel,
            terms: Vec::new(),
        }
    }

    /// Registers the next state `x_j`.
    pub(crate) fn push(&mut self, x: &DVector<f64>) {
        if let Some(term) = self.kernel.memory_term(x) {
            self.terms.push(term);
        }
    }

    /// Integral at node `k`; `states[..=k]` must have been pushed.
    pub(crate) fn integral(&self, nodes: &[f64], states: &[DVector<f64>], k: usize) -> DVector<f64> {
        self.weighted(nodes[k], nodes, states, trapezoid_weights(nodes, k))
    }

    /// `Σ_j w_j g(t, t_j, x_j)` over the leading nodes, one per weight.
    pub(crate) fn weighted(
        &self,
        t: f64,
        nodes: &[f64],
        states: &[DVector<f64>],
        weights: impl Iterator<Item = f64>,
    ) -> DVector<f64> {
        let mut acc = DVector::zeros(self.kernel.dim);
        match &self.kernel.kind {
            KernelKind::Separable { weight, .. } => {
                for (j, w) in weights.enumerate() {
                    if w != 0.0 {
                        acc.axpy(w * weight.eval(t, nodes[j]), &self.terms[j], 1.0);
                    }
                }
            }
            KernelKind::Custom(g) => {
                for (j, w) in weights.enumerate() {
                    if w != 0.0 {
                        acc.axpy(w, &g(t, nodes[j], &states[j]), 1.0);
                    }
                }
            }
        }
        acc
    }
}

/// Trapezoid value of `∫_{T0}^t g(t, s, x(s)) ds` over the nodes of `grid` up to `t`.
pub fn accumulate_volterra(
    kernel: &VolterraKernel,
    grid: &TimeGrid,
    states: &[DVector<f64>],
    t: f64,
) -> Result<DVector<f64>, ModelError> {
    let k = grid.index_of(t)?;
    if states.len() <= k {
        return Err(ModelError::GridMismatch {
            needed: k,
            available: states.len(),
        });
    }
    let mut memory = MemoryIntegrator::new(kernel);
    for x in &states[..=k] {
        memory.push(x);
    }
    Ok(memory.integral(grid.nodes(), states, k))
}

/// The problem `SP(x0, z, f, g)` on `[t0, t1]` with moving set `C`.
#[derive(Clone)]
pub struct ProblemSpec {
    pub t0: f64,
    pub t1: f64,
    pub set: MovingSet,
    pub z: Path,
    /// Declared `R(t) ≥ ‖ż(t)‖`.
    pub z_speed: ScalarFn,
    pub forcing: Forcing,
    pub kernel: VolterraKernel,
    pub x0: DVector<f64>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("interval", &(self.t0, self.t1))
            .field("set", &self.set)
            .field("z", &self.z)
            .field("forcing", &self.forcing)
            .field("kernel", &self.kernel)
            .field("x0", &self.x0.as_slice())
            .finish()
    }
}

/// Times used by the sampled validations.
const VALIDATION_TIMES: usize = 9;

impl ProblemSpec {
    /// Assembles a problem; `R` defaults to the closed-form speed bound of `z`.
    pub fn new(
        (t0, t1): (f64, f64),
        set: MovingSet,
        z: Path,
        forcing: Forcing,
        kernel: VolterraKernel,
        x0: DVector<f64>,
    ) -> Result<Self, ModelError> {
        let speed = z.speed_bound().unwrap_or(f64::INFINITY);
        let spec = Self {
            t0,
            t1,
            set,
            z,
            z_speed: Arc::new(move |_| speed),
            forcing,
            kernel,
            x0,
        };
        spec.check_shape()?;
        spec.check_feasible(1e-9)?;
        Ok(spec)
    }

    pub fn with_z_speed(mut self, speed: ScalarFn) -> Self {
        self.z_speed = speed;
        self
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    fn check_shape(&self) -> Result<(), ModelError> {
        if !(self.t0 < self.t1) || !self.t0.is_finite() || !self.t1.is_finite() {
            return Err(ModelError::InvalidInterval(self.t0, self.t1));
        }
        let d = self.dim();
        for (what, found) in [
            ("set", self.set.dim()),
            ("z", self.z.dim()),
            ("forcing", self.forcing.dim()),
            ("kernel", self.kernel.dim()),
        ] {
            if found != d {
                return Err(ModelError::DimensionMismatch {
                    what,
                    expected: d,
                    found,
                });
            }
        }
        Ok(())
    }

    /// `x0 ∈ C(T0) + z(T0)` within `tol·(1 + ‖x0‖)`.
    pub fn check_feasible(&self, tol: f64) -> Result<(), ModelError> {
        let shift = self.z.eval(self.t0);
        let distance = self.set.distance(self.t0, &(&self.x0 - shift))?;
        if distance > tol * (1.0 + self.x0.norm()) {
            return Err(ModelError::InfeasibleStart { distance });
        }
        Ok(())
    }

    /// `R(t)`
    pub fn z_speed(&self, t: f64) -> f64 {
        (self.z_speed)(t)
    }

    fn validation_times(&self) -> Vec<f64> {
        (0..VALIDATION_TIMES)
            .map(|i| self.t0 + (self.t1 - self.t0) * i as f64 / (VALIDATION_TIMES - 1) as f64)
            .collect()
    }

    /// Samples the growth and Lipschitz inequalities of `f` and `g`, the speed bound `R` and
    /// the motion modulus of `C`; the first violation is returned as an error.
    pub fn validate(&self) -> Result<(), ModelError> {
        let times = self.validation_times();
        let d = self.dim();
        let slack = |rhs: f64| rhs * (1.0 + 1e-9) + 1e-12;
        let violation = |modulus, t, s, x: &DVector<f64>, lhs, rhs| ModelError::ModulusViolation {
            modulus,
            t,
            s,
            x: x.as_slice().to_vec(),
            lhs,
            rhs,
        };
        for radius in [1.0, 10.0] {
            let points = halton_ball(d, radius, 48);
            for &t in &times {
                let beta = self.forcing.growth(t);
                let kappa = self.forcing.lipschitz(radius, t);
                let mu = self.kernel.lipschitz(radius, t);
                for (i, x) in points.iter().enumerate() {
                    let fx = self.forcing.eval(t, x);
                    let rhs = beta * (1.0 + x.norm());
                    if fx.norm() > slack(rhs) {
                        return Err(violation("forcing growth modulus β", t, None, x, fx.norm(), rhs));
                    }
                    let y = &points[(i + 1) % points.len()];
                    let lhs = (&fx - self.forcing.eval(t, y)).norm();
                    let rhs = kappa * (x - y).norm();
                    if lhs > slack(rhs) {
                        return Err(violation("forcing Lipschitz modulus κ", t, None, x, lhs, rhs));
                    }
                    for &s in times.iter().filter(|&&s| s <= t) {
                        let gx = self.kernel.eval(t, s, x);
                        let rhs = self.kernel.growth(t, s) * (1.0 + x.norm());
                        if gx.norm() > slack(rhs) {
                            return Err(violation("kernel growth modulus σ", t, Some(s), x, gx.norm(), rhs));
                        }
                        let lhs = (&gx - self.kernel.eval(t, s, y)).norm();
                        let rhs = mu * (x - y).norm();
                        if lhs > slack(rhs) {
                            return Err(violation("kernel Lipschitz modulus μ", t, Some(s), x, lhs, rhs));
                        }
                    }
                }
            }
        }
        let zero = DVector::zeros(d);
        for &t in &times {
            let speed = self.z.derivative(t).norm();
            if speed > slack(self.z_speed(t)) {
                return Err(violation(
                    "perturbation speed bound R",
                    t,
                    None,
                    &zero,
                    speed,
                    self.z_speed(t),
                ));
            }
        }
        if let Some((s, t, excess, bound)) = self.set.check_motion(&times, 64, 1e-9) {
            return Err(violation("set motion modulus v", t, Some(s), &zero, excess, bound));
        }
        Ok(())
    }

    /// Same problem with a different initial point.
    pub fn with_x0(mut self, x0: DVector<f64>) -> Self {
        self.x0 = x0;
        self
    }
}

/// Deterministic Halton points mapped into the closed ball `radius·B` of ℝ^dim
/// (cube points outside the unit ball are pushed onto the sphere).
pub fn halton_ball(dim: usize, radius: f64, count: usize) -> Vec<DVector<f64>> {
    let primes = first_primes(dim);
    let mut out = Vec::with_capacity(count + 1);
    out.push(DVector::zeros(dim));
    for i in 1..=count {
        let mut y = DVector::from_iterator(dim, primes.iter().map(|&p| 2.0 * radical_inverse(i, p) - 1.0));
        let norm = y.norm();
        if norm > 1.0 {
            y /= norm;
        }
        out.push(y * radius);
    }
    out
}

fn radical_inverse(mut i: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

fn first_primes(n: usize) -> Vec<usize> {
    let mut primes = Vec::with_capacity(n);
    let mut c = 2;
    while primes.len() < n {
        if primes.iter().all(|p| c % p != 0) {
            primes.push(c);
        }
        c += 1;
    }
    primes
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    CatchingUp,
    FixedPoint,
    Reference,
}

/// States on a grid with forward-difference derivatives; the last node reuses the last
/// difference.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub states: Vec<DVector<f64>>,
    pub derivatives: Vec<DVector<f64>>,
    pub provenance: Provenance,
}

impl Trajectory {
    pub fn new(grid: TimeGrid, states: Vec<DVector<f64>>, provenance: Provenance) -> Self {
        assert_eq!(grid.len(), states.len(), "one state per node");
        let n = states.len();
        let mut derivatives: Vec<DVector<f64>> = (0..n - 1)
            .map(|k| (&states[k + 1] - &states[k]) / grid.step(k))
            .collect();
        derivatives.push(derivatives[n - 2].clone());
        Self {
            grid,
            states,
            derivatives,
            provenance,
        }
    }

    pub fn times(&self) -> &[f64] {
        self.grid.nodes()
    }

    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn last(&self) -> &DVector<f64> {
        &self.states[self.states.len() - 1]
    }

    /// Sup-norm distance over nodes; grids must coincide.
    pub fn sup_distance(&self, other: &Trajectory) -> Result<f64, GridError> {
        if self.grid != other.grid {
            return Err(GridError::Mismatch("trajectories live on different grids".into()));
        }
        Ok(self
            .states
            .iter()
            .zip(&other.states)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }
}

/// `γ(t) = 2β(t) + 2∫_{T0}^t σ(t, s) ds` at every node (trapezoid in `s`).
pub fn gamma_curve(spec: &ProblemSpec, grid: &TimeGrid) -> Vec<f64> {
    let nodes = grid.nodes();
    nodes
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let memory: f64 = trapezoid_weights(nodes, k)
                .zip(nodes)
                .map(|(w, &s)| w * spec.kernel.growth(t, s))
                .sum();
            2.0 * spec.forcing.growth(t) + 2.0 * memory
        })
        .collect()
}

/// `φ = max{1, κ_{r(T)}, μ_{r(T)}, β, ∫σ}` and its running integral `Φ`, which maps the
/// time grid onto the grid of the rescaled interval `[0, Φ(T)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Reparametrization {
    pub phi: Vec<f64>,
    /// `Φ(t_k)`, starting at 0.
    pub cumulative: Vec<f64>,
}

impl Reparametrization {
    /// Image of the time grid under `Φ`.
    pub fn rescaled_grid(&self) -> Result<TimeGrid, GridError> {
        TimeGrid::new(self.cumulative.clone())
    }

    /// Index of the time node whose image is `s`.
    pub fn inverse_node(&self, s: f64) -> Result<usize, GridError> {
        self.rescaled_grid()?.index_of(s)
    }
}

pub fn phi_reparametrization(spec: &ProblemSpec, r_final: f64, grid: &TimeGrid) -> Reparametrization {
    let nodes = grid.nodes();
    let phi: Vec<f64> = nodes
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let memory: f64 = trapezoid_weights(nodes, k)
                .zip(nodes)
                .map(|(w, &s)| w * spec.kernel.growth(t, s))
                .sum();
            1f64.max(spec.forcing.lipschitz(r_final, t))
                .max(spec.kernel.lipschitz(r_final, t))
                .max(spec.forcing.growth(t))
                .max(memory)
        })
        .collect();
    let cumulative = cumulative_trapezoid(nodes, &phi);
    Reparametrization { phi, cumulative }
}

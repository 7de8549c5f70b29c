//! A priori envelopes, continuous-dependence bounds and slow-solution residuals, each
//! computed from problem data and checked against solver output.

use std::fmt;

use nalgebra::DVector;
use thiserror::Error;

use crate::dynamics::{
    gamma_curve, halton_ball, operator_norm, ForcingKind, KernelKind, MemoryIntegrator, ModelError, ProblemSpec,
    Trajectory,
};
use crate::grid::{cumulative_trapezoid, linear_majorant, trapezoid_weights, GridError, TimeGrid};
use crate::sets::SetError;

/// Sample count for sup estimates over `r·B` when the data are not affine.
pub const SUP_SAMPLES: usize = 256;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("shared-z bound requested but z₁ and z₂ differ by {gap} at t = {t}")]
    VariantMismatch { t: f64, gap: f64 },
    #[error("the two problems are not comparable: {0}")]
    Incompatible(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Set(#[from] SetError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// `r(t)` bounds `‖x(t)‖`, `θ(t)` bounds `‖ẋ(t)‖`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundEnvelope {
    pub grid: TimeGrid,
    pub r: Vec<f64>,
    pub theta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub x0_norm: f64,
    /// `|v̇(t_k)|`
    pub motion_rate: Vec<f64>,
    /// `R(t_k)`
    pub z_speed: Vec<f64>,
}

impl BoundEnvelope {
    pub fn r_final(&self) -> f64 {
        self.r[self.r.len() - 1]
    }
}

/// `r = ‖x0‖e^{∫γ} + ∫(γ + |v̇| + R)e^{∫_s^t γ} ds` and `θ = γ(1 + r) + |v̇| + R`.
pub fn compute_envelopes(spec: &ProblemSpec, grid: &TimeGrid) -> BoundEnvelope {
    let nodes = grid.nodes();
    let gamma = gamma_curve(spec, grid);
    let motion_rate: Vec<f64> = nodes.iter().map(|&t| spec.set.motion().rate(t)).collect();
    let z_speed: Vec<f64> = nodes.iter().map(|&t| spec.z_speed(t)).collect();
    let source: Vec<f64> = (0..nodes.len())
        .map(|k| gamma[k] + motion_rate[k] + z_speed[k])
        .collect();
    let x0_norm = spec.x0.norm();
    let r = linear_majorant(nodes, x0_norm, &gamma, &source);
    let theta = (0..nodes.len())
        .map(|k| gamma[k] * (1.0 + r[k]) + motion_rate[k] + z_speed[k])
        .collect();
    BoundEnvelope {
        grid: grid.clone(),
        r,
        theta,
        gamma,
        x0_norm,
        motion_rate,
        z_speed,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeReport {
    /// `min_k (r_k − ‖x_k‖)`
    pub r_margin: f64,
    pub r_worst_time: f64,
    /// `min_k (max(θ_k, θ_{k+1}) − ‖d_k‖)`
    pub theta_margin: f64,
    pub theta_worst_time: f64,
    /// Rows `t, ‖x‖, r, ‖d‖, θ`.
    pub rows: Vec<[f64; 5]>,
}

impl EnvelopeReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.r_margin >= -tol && self.theta_margin >= -tol
    }
}

pub fn check_envelopes(traj: &Trajectory, env: &BoundEnvelope) -> Result<EnvelopeReport, AnalysisError> {
    if traj.grid != env.grid {
        return Err(GridError::Mismatch("trajectory and envelope grids differ".into()).into());
    }
    let t = traj.times();
    let n = t.len();
    let mut report = EnvelopeReport {
        r_margin: f64::INFINITY,
        r_worst_time: t[0],
        theta_margin: f64::INFINITY,
        theta_worst_time: t[0],
        rows: Vec::with_capacity(n),
    };
    for (k, (state, derivative)) in traj.states.iter().zip(&traj.derivatives).enumerate() {
        let x = state.norm();
        let d = derivative.norm();
        let margin = env.r[k] - x;
        if margin < report.r_margin {
            report.r_margin = margin;
            report.r_worst_time = t[k];
        }
        // the last derivative repeats the last forward difference
        let theta = if k + 1 < n {
            env.theta[k].max(env.theta[k + 1])
        } else {
            env.theta[k - 1].max(env.theta[k])
        };
        let margin = theta - d;
        if margin < report.theta_margin {
            report.theta_margin = margin;
            report.theta_worst_time = t[k];
        }
        report.rows.push([t[k], x, env.r[k], d, env.theta[k]]);
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DependenceVariant {
    /// `‖x₁ − x₂‖² ≤ a²e^{∫(δ+Δ)} + 2∫(ε + Δ)e^{∫(δ+Δ)}`
    General,
    /// `‖x₁ − x₂‖ ≤ a·e^{∫δ} + ∫Δe^{∫δ}` when `z₁ = z₂`
    SharedZ,
}

impl fmt::Display for DependenceVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DependenceVariant::General => "general-z",
            DependenceVariant::SharedZ => "shared-z",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DependenceReport {
    pub grid: TimeGrid,
    pub variant: DependenceVariant,
    /// Bound on `‖x₁ − x₂‖` for the requested variant.
    pub bound: Vec<f64>,
    /// Square root of the general right-hand side, always computed.
    pub general: Vec<f64>,
    /// Shared-z bound when `z₁ = z₂` on the grid.
    pub shared: Option<Vec<f64>>,
    pub measured: Vec<f64>,
    pub big_delta: Vec<f64>,
    pub delta: Vec<f64>,
    pub epsilon: Vec<f64>,
    pub nu: Vec<f64>,
    /// `min_k (bound_k − measured_k)`
    pub margin: f64,
    /// Set when `d_r` or `D_r` came from sampling rather than a closed form.
    pub estimated: bool,
}

impl DependenceReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.margin >= -tol
    }

    /// Rows `t, measured, bound, Δ, δ, ε, ν`.
    pub fn rows(&self) -> Vec<[f64; 7]> {
        self.grid
            .nodes()
            .iter()
            .enumerate()
            .map(|(k, &t)| {
                [
                    t,
                    self.measured[k],
                    self.bound[k],
                    self.big_delta[k],
                    self.delta[k],
                    self.epsilon[k],
                    self.nu[k],
                ]
            })
            .collect()
    }
}

/// `sup_{‖x‖≤r} ‖f₁(t,x) − f₂(t,x)‖`; the flag marks a sampled estimate.
fn forcing_gap(spec1: &ProblemSpec, spec2: &ProblemSpec, r: f64, t: f64, samples: &[DVector<f64>]) -> (f64, bool) {
    if let (ForcingKind::Affine { matrix: a1, offset: b1 }, ForcingKind::Affine { matrix: a2, offset: b2 }) =
        (spec1.forcing.kind(), spec2.forcing.kind())
    {
        return (operator_norm(&(a1 - a2)) * r + (b1.eval(t) - b2.eval(t)).norm(), false);
    }
    let gap = samples
        .iter()
        .map(|x| (spec1.forcing.eval(t, x) - spec2.forcing.eval(t, x)).norm())
        .fold(0.0, f64::max);
    (gap, true)
}

/// `sup_{‖x‖≤r} ‖g₁(t,s,x) − g₂(t,s,x)‖`.
fn kernel_gap(
    spec1: &ProblemSpec,
    spec2: &ProblemSpec,
    r: f64,
    t: f64,
    s: f64,
    samples: &[DVector<f64>],
) -> (f64, bool) {
    if let (
        KernelKind::Separable {
            weight: k1,
            matrix: b1,
            offset: c1,
        },
        KernelKind::Separable {
            weight: k2,
            matrix: b2,
            offset: c2,
        },
    ) = (spec1.kernel.kind(), spec2.kernel.kind())
    {
        let (w1, w2) = (k1.eval(t, s), k2.eval(t, s));
        let linear = operator_norm(&(b1 * w1 - b2 * w2));
        return (linear * r + (c1 * w1 - c2 * w2).norm(), false);
    }
    let gap = samples
        .iter()
        .map(|x| (spec1.kernel.eval(t, s, x) - spec2.kernel.eval(t, s, x)).norm())
        .fold(0.0, f64::max);
    (gap, true)
}

/// Continuous-dependence bound between the solutions of two problems sharing the interval,
/// the set family and the grid. Envelope data (γ, r, R, κ, μ) are the pointwise maxima over
/// the two problems.
pub fn dependence_bound(
    spec1: &ProblemSpec,
    spec2: &ProblemSpec,
    x1: &Trajectory,
    x2: &Trajectory,
    variant: DependenceVariant,
) -> Result<DependenceReport, AnalysisError> {
    if x1.grid != x2.grid {
        return Err(GridError::Mismatch("trajectories live on different grids".into()).into());
    }
    if spec1.t0 != spec2.t0 || spec1.t1 != spec2.t1 {
        return Err(AnalysisError::Incompatible("intervals differ".into()));
    }
    if spec1.set.kind() != spec2.set.kind() || spec1.dim() != spec2.dim() {
        return Err(AnalysisError::Incompatible("set families differ".into()));
    }
    let grid = &x1.grid;
    let nodes = grid.nodes();
    let n = nodes.len();

    let z_gap: Vec<f64> = nodes
        .iter()
        .map(|&t| (spec1.z.eval(t) - spec2.z.eval(t)).norm())
        .collect();
    let shared_z = z_gap.iter().all(|&g| g == 0.0);
    if variant == DependenceVariant::SharedZ && !shared_z {
        let (k, gap) = z_gap
            .iter()
            .copied()
            .enumerate()
            .find(|&(_, g)| g != 0.0)
            .expect("nonzero gap exists");
        return Err(AnalysisError::VariantMismatch { t: nodes[k], gap });
    }

    let env1 = compute_envelopes(spec1, grid);
    let env2 = compute_envelopes(spec2, grid);
    let r_final = env1.r_final().max(env2.r_final());
    let inv_rho = spec1.set.inv_prox_constant().max(spec2.set.inv_prox_constant());
    let samples = halton_ball(spec1.dim(), r_final, SUP_SAMPLES);

    let nu: Vec<f64> = (0..n)
        .map(|k| {
            let gamma = env1.gamma[k].max(env2.gamma[k]);
            let r = env1.r[k].max(env2.r[k]);
            let motion = env1.motion_rate[k].max(env2.motion_rate[k]);
            let speed = env1.z_speed[k].max(env2.z_speed[k]);
            0.5 * gamma * (1.0 + r) + motion + speed
        })
        .collect();
    let mu: Vec<f64> = nodes
        .iter()
        .map(|&t| {
            spec1
                .kernel
                .lipschitz(r_final, t)
                .max(spec2.kernel.lipschitz(r_final, t))
        })
        .collect();
    let mu_integral = cumulative_trapezoid(nodes, &mu);
    let delta: Vec<f64> = (0..n)
        .map(|k| {
            let t = nodes[k];
            let kappa = spec1
                .forcing
                .lipschitz(r_final, t)
                .max(spec2.forcing.lipschitz(r_final, t));
            // convex kinds contribute exactly zero here
            let prox = if inv_rho == 0.0 { 0.0 } else { 2.0 * nu[k] * inv_rho };
            prox + 2.0 * kappa + 2.0 * mu_integral[k]
        })
        .collect();

    let mut estimated = false;
    let big_delta: Vec<f64> = (0..n)
        .map(|k| {
            let t = nodes[k];
            let (d, est) = forcing_gap(spec1, spec2, r_final, t, &samples);
            estimated |= est;
            let memory: f64 = trapezoid_weights(nodes, k)
                .zip(nodes)
                .map(|(w, &s)| {
                    if w == 0.0 {
                        return 0.0;
                    }
                    let (gap, est) = kernel_gap(spec1, spec2, r_final, t, s, &samples);
                    estimated |= est;
                    w * gap
                })
                .sum();
            std::f64::consts::SQRT_2 * (d + memory)
        })
        .collect();
    let epsilon: Vec<f64> = (0..n).map(|k| 2.0 * nu[k] * z_gap[k]).collect();

    let a = (&spec1.x0 - &spec2.x0).norm();
    let rate: Vec<f64> = (0..n).map(|k| delta[k] + big_delta[k]).collect();
    let source: Vec<f64> = (0..n).map(|k| 2.0 * (epsilon[k] + big_delta[k])).collect();
    let general: Vec<f64> = linear_majorant(nodes, a * a, &rate, &source)
        .into_iter()
        .map(|v| v.max(0.0).sqrt())
        .collect();
    let shared = shared_z.then(|| linear_majorant(nodes, a, &delta, &big_delta));

    let measured: Vec<f64> = x1.states.iter().zip(&x2.states).map(|(p, q)| (p - q).norm()).collect();
    let bound = match variant {
        DependenceVariant::General => general.clone(),
        DependenceVariant::SharedZ => shared.clone().expect("shared z checked above"),
    };
    let margin = bound
        .iter()
        .zip(&measured)
        .map(|(b, m)| b - m)
        .fold(f64::INFINITY, f64::min);
    Ok(DependenceReport {
        grid: grid.clone(),
        variant,
        bound,
        general,
        shared,
        measured,
        big_delta,
        delta,
        epsilon,
        nu,
        margin,
        estimated,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlowResidual {
    pub times: Vec<f64>,
    /// `‖d_k − proj_{T_C(x_k)}(h_k)‖`
    pub values: Vec<f64>,
    pub max: f64,
    pub mean: f64,
}

/// Distance of the discrete velocity from the tangent-cone projection of the full forcing
/// `h_k = f(t_k, x_k) + ∫g`. Needs a fixed convex set (and constant `z`).
pub fn slow_residual(traj: &Trajectory, spec: &ProblemSpec) -> Result<SlowResidual, AnalysisError> {
    if !spec.set.is_convex() || !spec.set.is_static() || !spec.z.is_constant() {
        return Err(SetError::UnsupportedKind("moving or non-convex set").into());
    }
    let shift = spec.z.eval(spec.t0);
    let nodes = traj.times();
    let mut memory = MemoryIntegrator::new(&spec.kernel);
    let mut values = Vec::with_capacity(nodes.len());
    for (k, &t) in nodes.iter().enumerate() {
        let x = &traj.states[k];
        memory.push(x);
        let h = spec.forcing.eval(t, x) + memory.integral(nodes, &traj.states, k);
        let tangent = spec.set.tangent_projection(t, &(x - &shift), &h)?;
        values.push((&traj.derivatives[k] - tangent).norm());
    }
    let max = values.iter().copied().fold(0.0, f64::max);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    Ok(SlowResidual {
        times: nodes.to_vec(),
        values,
        max,
        mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{Forcing, Provenance, VolterraKernel};
    use crate::path::{constant, Path};
    use crate::sets::MovingSet;
    use nalgebra::DMatrix;
    use std::sync::Arc;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn line(forcing: Forcing, x0: f64) -> ProblemSpec {
        ProblemSpec::new(
            (0.0, 1.0),
            MovingSet::whole_space(1),
            Path::zero(1),
            forcing,
            VolterraKernel::zero(1),
            v(&[x0]),
        )
        .unwrap()
    }

    fn along(grid: &TimeGrid, f: impl Fn(f64) -> f64) -> Trajectory {
        let states = grid.nodes().iter().map(|&t| v(&[f(t)])).collect();
        Trajectory::new(grid.clone(), states, Provenance::Reference)
    }

    #[test]
    fn envelope_without_drivers_is_flat() {
        let grid = TimeGrid::uniform(0.0, 1.0, 10).unwrap();
        let env = compute_envelopes(&line(Forcing::zero(1), 1.0), &grid);
        assert!(env.r.iter().all(|&r| (r - 1.0).abs() < 1e-15));
        assert!(env.theta.iter().all(|&t| t == 0.0));
    }

    #[test]
    fn envelope_constant_growth_closed_form() {
        // β ≡ 1: γ ≡ 2, r = 2e^{2t} − 1
        let grid = TimeGrid::uniform(0.0, 1.0, 4000).unwrap();
        let spec = line(Forcing::zero(1).with_growth(constant(1.0)), 1.0);
        let env = compute_envelopes(&spec, &grid);
        let exact = 2.0 * 2f64.exp() - 1.0;
        assert!((env.r_final() - exact).abs() < 1e-5, "{}", env.r_final());
        assert!((env.r_final() - 13.778).abs() < 1e-3);
        assert!((env.theta[4000] - 2.0 * (1.0 + env.r_final())).abs() < 1e-12);
    }

    #[test]
    fn envelope_monotone_in_x0() {
        let grid = TimeGrid::uniform(0.0, 1.0, 50).unwrap();
        let f = Forcing::affine(DMatrix::identity(1, 1), Path::zero(1));
        let small = compute_envelopes(&line(f.clone(), 0.5), &grid);
        let large = compute_envelopes(&line(f, 2.0), &grid);
        assert!(small.r.iter().zip(&large.r).all(|(a, b)| a <= b));
    }

    #[test]
    fn dependence_examples() {
        let grid = TimeGrid::uniform(0.0, 1.0, 100).unwrap();
        let s1 = line(Forcing::zero(1), 1.0);
        let s2 = line(Forcing::zero(1), 0.0);
        let report = dependence_bound(
            &s1,
            &s2,
            &along(&grid, |_| 1.0),
            &along(&grid, |_| 0.0),
            DependenceVariant::SharedZ,
        )
        .unwrap();
        assert!(report.measured.iter().all(|&m| m == 1.0));
        assert!(report.margin >= 0.0);
        assert!(!report.estimated);

        let same = dependence_bound(
            &s1,
            &s1,
            &along(&grid, |_| 1.0),
            &along(&grid, |_| 1.0),
            DependenceVariant::SharedZ,
        )
        .unwrap();
        assert!(same.bound.iter().all(|&b| b == 0.0));

        // x₂ − x₁ = c·t with c = 0.01: Δ = √2·c, bound = √2·c·t
        let drift = line(Forcing::affine(DMatrix::zeros(1, 1), Path::scalar(0.01)), 0.0);
        let rest = line(Forcing::zero(1), 0.0);
        let report = dependence_bound(
            &rest,
            &drift,
            &along(&grid, |_| 0.0),
            &along(&grid, |t| 0.01 * t),
            DependenceVariant::SharedZ,
        )
        .unwrap();
        let shared = report.shared.as_ref().unwrap();
        assert!((shared[100] - std::f64::consts::SQRT_2 * 0.01).abs() < 1e-14);
        assert!((report.margin - 0.0).abs() < 1e-15);
        assert!(report.bound.iter().zip(&report.measured).all(|(b, m)| b >= m));
    }

    #[test]
    fn shared_variant_requires_equal_z() {
        let grid = TimeGrid::uniform(0.0, 1.0, 10).unwrap();
        let s1 = line(Forcing::zero(1), 0.0);
        let mut s2 = s1.clone();
        s2.z = Path::scalar(0.5);
        s2.x0 = v(&[0.5]);
        let err = dependence_bound(
            &s1,
            &s2,
            &along(&grid, |_| 0.0),
            &along(&grid, |_| 0.5),
            DependenceVariant::SharedZ,
        )
        .unwrap_err();
        assert!(matches!(err, AnalysisError::VariantMismatch { .. }));
        let general = dependence_bound(
            &s1,
            &s2,
            &along(&grid, |_| 0.0),
            &along(&grid, |_| 0.5),
            DependenceVariant::General,
        )
        .unwrap();
        assert!(general.shared.is_none());
        assert!(general.passes(0.0));
    }

    #[test]
    fn shared_bound_can_exceed_root_of_general() {
        // Δ = 0, a > 0, δ > 0: a·e^{∫δ} versus √(a²e^{∫δ}) = a·e^{∫δ/2}
        let grid = TimeGrid::uniform(0.0, 1.0, 100).unwrap();
        let f = Forcing::affine(DMatrix::identity(1, 1), Path::zero(1));
        let s1 = line(f.clone(), 1.0);
        let s2 = line(f, 1.1);
        let report = dependence_bound(
            &s1,
            &s2,
            &along(&grid, f64::exp),
            &along(&grid, |t| 1.1 * t.exp()),
            DependenceVariant::SharedZ,
        )
        .unwrap();
        let shared = report.shared.unwrap();
        assert!((shared[100] - 0.1 * 2f64.exp()).abs() < 1e-12);
        assert!((report.general[100] - 0.1 * 1f64.exp()).abs() < 1e-12);
        assert!(shared[100] > report.general[100]);
    }

    #[test]
    fn sampled_gap_flags_estimate() {
        let grid = TimeGrid::uniform(0.0, 1.0, 10).unwrap();
        let custom = Forcing::custom(1, |_, x| x * 0.5, constant(0.5), Arc::new(|_, _| 0.5));
        let s1 = line(custom, 0.0);
        let s2 = line(Forcing::zero(1), 0.0);
        let zero = along(&grid, |_| 0.0);
        let report = dependence_bound(&s1, &s2, &zero, &zero, DependenceVariant::General).unwrap();
        assert!(report.estimated);
        // sampling from inside r·B underestimates d_r = r/2, but only slightly
        let r_final = compute_envelopes(&s1, &grid)
            .r_final()
            .max(compute_envelopes(&s2, &grid).r_final());
        let exact = std::f64::consts::SQRT_2 * 0.5 * r_final;
        assert!(report.big_delta[0] <= exact && report.big_delta[0] >= 0.99 * exact);
    }

    #[test]
    fn slow_residual_examples() {
        let grid = TimeGrid::uniform(0.0, 1.0, 20).unwrap();
        let half_line = MovingSet::half_space(v(&[1.0]), Path::scalar(0.0)).unwrap();
        let spec = ProblemSpec::new(
            (0.0, 1.0),
            half_line.clone(),
            Path::zero(1),
            Forcing::affine(DMatrix::zeros(1, 1), Path::scalar(-1.0)),
            VolterraKernel::zero(1),
            v(&[0.0]),
        )
        .unwrap();
        let res = slow_residual(&along(&grid, |_| 0.0), &spec).unwrap();
        assert_eq!(res.max, 0.0);

        let moving = MovingSet::half_space(
            v(&[1.0]),
            Path::Linear {
                origin: v(&[0.0]),
                velocity: v(&[1.0]),
            },
        )
        .unwrap();
        let spec = ProblemSpec::new(
            (0.0, 1.0),
            moving,
            Path::zero(1),
            Forcing::zero(1),
            VolterraKernel::zero(1),
            v(&[0.0]),
        )
        .unwrap();
        assert!(matches!(
            slow_residual(&along(&grid, |t| t), &spec),
            Err(AnalysisError::Set(SetError::UnsupportedKind(_)))
        ));
    }

    #[test]
    fn envelope_check_equality_case() {
        // x = t on C(t) = [t, ∞): ‖ẋ‖ = 1 = θ
        let grid = TimeGrid::uniform(0.0, 1.0, 10).unwrap();
        let moving = MovingSet::half_space(
            v(&[1.0]),
            Path::Linear {
                origin: v(&[0.0]),
                velocity: v(&[1.0]),
            },
        )
        .unwrap()
        .with_motion(crate::sets::Motion::Linear { rate: 1.0 });
        let spec = ProblemSpec::new(
            (0.0, 1.0),
            moving,
            Path::zero(1),
            Forcing::zero(1),
            VolterraKernel::zero(1),
            v(&[0.0]),
        )
        .unwrap();
        let env = compute_envelopes(&spec, &grid);
        let report = check_envelopes(&along(&grid, |t| t), &env).unwrap();
        assert!(report.theta_margin.abs() < 1e-12);
        assert!(report.passes(1e-12));
    }
}

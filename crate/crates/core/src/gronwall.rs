//! Majorants from the classical and the two enhanced Gronwall inequalities, evaluated on a
//! time grid with the composite trapezoid rule, plus a numerical dominance check that
//! integrates the equality case of each hypothesis.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::grid::{cumulative_trapezoid, linear_majorant, trapezoid_weights, GridError, TimeGrid};
use crate::path::{constant, KernelFn, ScalarFn};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GronwallError {
    #[error("coefficient {name} is negative at t = {t}: {value}")]
    NegativeCoefficient { name: &'static str, t: f64, value: f64 },
    #[error("epsilon must vanish for the square-root bound, found {value} at t = {t}")]
    EpsilonNotZero { t: f64, value: f64 },
    #[error("data variant {found} cannot be evaluated as {expected}")]
    VariantMismatch { expected: Variant, found: Variant },
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// `ρ̇ ≤ ε + K1 ρ + K2 ∫ K3(t,s) ρ(s) ds`
    I,
    /// `ρ̇ ≤ ε + K1 √ρ + K2 ρ + K3 √ρ ∫ K4 √ρ`, bound on ρ
    IIa,
    /// same hypothesis with ε ≡ 0, bound on √ρ
    IIb,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::I => "I",
            Variant::IIa => "II-a",
            Variant::IIb => "II-b",
        })
    }
}

/// Memory term of the hypothesis.
#[derive(Clone)]
pub enum Memory {
    /// Two-argument kernel `K3(t, s)` (variant I).
    Volterra(KernelFn),
    /// Product form `K3(t)·∫ K4(s)…` (variants II).
    Split { k3: ScalarFn, k4: ScalarFn },
}

#[derive(Clone)]
pub struct GronwallData {
    pub t0: f64,
    pub t1: f64,
    pub rho0: f64,
    pub epsilon: ScalarFn,
    pub k1: ScalarFn,
    pub k2: ScalarFn,
    pub memory: Memory,
    pub variant: Variant,
}

impl fmt::Debug for GronwallData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GronwallData")
            .field("interval", &(self.t0, self.t1))
            .field("rho0", &self.rho0)
            .field("variant", &self.variant)
            .finish_non_exhaustive()
    }
}

impl GronwallData {
    /// Variant I data with a two-argument kernel.
    pub fn volterra(
        (t0, t1): (f64, f64),
        rho0: f64,
        epsilon: ScalarFn,
        k1: ScalarFn,
        k2: ScalarFn,
        k3: KernelFn,
    ) -> Self {
        Self {
            t0,
            t1,
            rho0,
            epsilon,
            k1,
            k2,
            memory: Memory::Volterra(k3),
            variant: Variant::I,
        }
    }

    /// Variant II data (`IIa` or `IIb`) with split kernel `K3(t)`, `K4(s)`.
    #[allow(clippy::too_many_arguments)]
    pub fn split(
        variant: Variant,
        (t0, t1): (f64, f64),
        rho0: f64,
        epsilon: ScalarFn,
        k1: ScalarFn,
        k2: ScalarFn,
        k3: ScalarFn,
        k4: ScalarFn,
    ) -> Self {
        Self {
            t0,
            t1,
            rho0,
            epsilon,
            k1,
            k2,
            memory: Memory::Split { k3, k4 },
            variant,
        }
    }
}

/// A majorant sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCurve {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub variant: Variant,
    /// Largest grid step.
    pub step: f64,
    /// Richardson estimate from the every-other-node subgrid.
    pub quadrature_error: f64,
}

impl BoundCurve {
    pub fn last(&self) -> f64 {
        self.values[self.values.len() - 1]
    }
}

fn sample(name: &'static str, f: &ScalarFn, nodes: &[f64]) -> Result<Vec<f64>, GronwallError> {
    nodes
        .iter()
        .map(|&t| {
            let value = f(t);
            if value < 0.0 || value.is_nan() {
                Err(GronwallError::NegativeCoefficient { name, t, value })
            } else {
                Ok(value)
            }
        })
        .collect()
}

fn check_interval(data: &GronwallData, grid: &TimeGrid) -> Result<(), GronwallError> {
    let tol = 1e-12 * (data.t1 - data.t0).abs().max(1.0);
    if (grid.start() - data.t0).abs() > tol || (grid.end() - data.t1).abs() > tol {
        return Err(GridError::Mismatch(format!(
            "grid spans [{}, {}], data interval is [{}, {}]",
            grid.start(),
            grid.end(),
            data.t0,
            data.t1
        ))
        .into());
    }
    if data.rho0 < 0.0 {
        return Err(GronwallError::NegativeCoefficient {
            name: "rho0",
            t: data.t0,
            value: data.rho0,
        });
    }
    Ok(())
}

fn curve_i(data: &GronwallData, nodes: &[f64]) -> Result<Vec<f64>, GronwallError> {
    let Memory::Volterra(k3) = &data.memory else {
        return Err(GronwallError::VariantMismatch {
            expected: Variant::I,
            found: data.variant,
        });
    };
    let eps = sample("epsilon", &data.epsilon, nodes)?;
    let k1 = sample("K1", &data.k1, nodes)?;
    let k2 = sample("K2", &data.k2, nodes)?;
    let mut gamma = Vec::with_capacity(nodes.len());
    for (k, &t) in nodes.iter().enumerate() {
        let mut inner = 0.0;
        for (w, &s) in trapezoid_weights(nodes, k).zip(nodes) {
            let value = k3(t, s);
            if value < 0.0 || value.is_nan() {
                return Err(GronwallError::NegativeCoefficient { name: "K3", t, value });
            }
            inner += w * value;
        }
        gamma.push(k1[k] + k2[k] * inner);
    }
    Ok(linear_majorant(nodes, data.rho0, &gamma, &eps))
}

/// `γ = K2 + K3·∫K4` for the split-memory variants.
fn split_gamma(data: &GronwallData, nodes: &[f64]) -> Result<Vec<f64>, GronwallError> {
    let Memory::Split { k3, k4 } = &data.memory else {
        return Err(GronwallError::VariantMismatch {
            expected: data.variant,
            found: Variant::I,
        });
    };
    let k2 = sample("K2", &data.k2, nodes)?;
    let k3 = sample("K3", k3, nodes)?;
    let k4 = sample("K4", k4, nodes)?;
    let inner = cumulative_trapezoid(nodes, &k4);
    Ok((0..nodes.len()).map(|k| k2[k] + k3[k] * inner[k]).collect())
}

fn curve_ii(data: &GronwallData, nodes: &[f64]) -> Result<Vec<f64>, GronwallError> {
    let gamma = split_gamma(data, nodes)?;
    let eps = sample("epsilon", &data.epsilon, nodes)?;
    let k1 = sample("K1", &data.k1, nodes)?;
    let rate: Vec<f64> = gamma.iter().zip(&k1).map(|(g, k)| g + k).collect();
    let source: Vec<f64> = eps.iter().zip(&k1).map(|(e, k)| e + k).collect();
    Ok(linear_majorant(nodes, data.rho0, &rate, &source))
}

fn curve_ii_sqrt(data: &GronwallData, nodes: &[f64]) -> Result<Vec<f64>, GronwallError> {
    for &t in nodes {
        let value = (data.epsilon)(t);
        if value != 0.0 {
            return Err(GronwallError::EpsilonNotZero { t, value });
        }
    }
    let gamma = split_gamma(data, nodes)?;
    let k1 = sample("K1", &data.k1, nodes)?;
    let rate: Vec<f64> = gamma.iter().map(|g| 0.5 * g).collect();
    let source: Vec<f64> = k1.iter().map(|k| 0.5 * k).collect();
    Ok(linear_majorant(nodes, data.rho0.sqrt(), &rate, &source))
}

fn build(
    data: &GronwallData,
    grid: &TimeGrid,
    expected: Variant,
    curve: fn(&GronwallData, &[f64]) -> Result<Vec<f64>, GronwallError>,
) -> Result<BoundCurve, GronwallError> {
    if data.variant != expected {
        return Err(GronwallError::VariantMismatch {
            expected,
            found: data.variant,
        });
    }
    check_interval(data, grid)?;
    let nodes = grid.nodes();
    let values = curve(data, nodes)?;

    let mut quadrature_error = 0.0;
    if nodes.len() >= 3 {
        let mut picks: Vec<usize> = (0..nodes.len()).step_by(2).collect();
        if *picks.last().unwrap() != nodes.len() - 1 {
            picks.push(nodes.len() - 1);
        }
        let coarse_nodes: Vec<f64> = picks.iter().map(|&i| nodes[i]).collect();
        let coarse = curve(data, &coarse_nodes)?;
        quadrature_error = picks
            .iter()
            .zip(&coarse)
            .map(|(&i, c)| (values[i] - c).abs() / 3.0)
            .fold(0.0, f64::max);
    }
    Ok(BoundCurve {
        grid: nodes.to_vec(),
        values,
        variant: expected,
        step: grid.max_step(),
        quadrature_error,
    })
}

/// Enhanced inequality I:
/// `ρ(t) ≤ ρ(T0)·exp(∫γ) + ∫ ε(s)·exp(∫_s^t γ) ds` with `γ(t) = K1(t) + K2(t)∫_{T0}^t K3(t,s) ds`.
pub fn gronwall_i(data: &GronwallData, grid: &TimeGrid) -> Result<BoundCurve, GronwallError> {
    build(data, grid, Variant::I, curve_i)
}

/// Enhanced inequality II(a): the classical majorant with rate `γ + K1` and source `ε + K1`,
/// where `γ(t) = K2(t) + K3(t)∫_{T0}^t K4`.
pub fn gronwall_ii(data: &GronwallData, grid: &TimeGrid) -> Result<BoundCurve, GronwallError> {
    build(data, grid, Variant::IIa, curve_ii)
}

/// Enhanced inequality II(b), a majorant for `√ρ` when `ε ≡ 0`:
/// `√ρ(T0)·exp(½∫γ) + ½∫ K1(s)·exp(½∫_s^t γ) ds`.
pub fn gronwall_ii_sqrt(data: &GronwallData, grid: &TimeGrid) -> Result<BoundCurve, GronwallError> {
    build(data, grid, Variant::IIb, curve_ii_sqrt)
}

/// Dispatches on `data.variant`.
pub fn bound(data: &GronwallData, grid: &TimeGrid) -> Result<BoundCurve, GronwallError> {
    match data.variant {
        Variant::I => gronwall_i(data, grid),
        Variant::IIa => gronwall_ii(data, grid),
        Variant::IIb => gronwall_ii_sqrt(data, grid),
    }
}

/// Outcome of [`verify_dominance`].
#[derive(Debug, Clone, PartialEq)]
pub struct DominanceReport {
    /// `min_k (bound_k − ρ_k)`, with `√ρ` in place of ρ for II-b. Nonnegative when dominated.
    pub margin: f64,
    pub worst_time: f64,
    /// Equality solution sampled on the bound grid (ρ, or √ρ for II-b).
    pub numeric: Vec<f64>,
    pub quadrature_error: f64,
}

impl DominanceReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.margin >= -tol
    }
}

/// RK4 substeps per bound-grid interval.
pub const DOMINANCE_SUBSTEPS: usize = 10;

struct History {
    times: Vec<f64>,
    values: Vec<f64>,
    /// running `∫ K4 √ρ` for the split memory
    prefix: Vec<f64>,
}

impl History {
    fn memory(&self, data: &GronwallData, tau: f64, rho: f64) -> f64 {
        let j = self.times.len() - 1;
        let (tj, rj) = (self.times[j], self.values[j]);
        match &data.memory {
            Memory::Volterra(k3) => {
                let mut acc = 0.0;
                for i in 1..=j {
                    let h = self.times[i] - self.times[i - 1];
                    acc += 0.5
                        * h
                        * (k3(tau, self.times[i]) * self.values[i] + k3(tau, self.times[i - 1]) * self.values[i - 1]);
                }
                acc + 0.5 * (tau - tj) * (k3(tau, tj) * rj + k3(tau, tau) * rho)
            }
            Memory::Split { k4, .. } => {
                self.prefix[j] + 0.5 * (tau - tj) * (k4(tj) * rj.max(0.0).sqrt() + k4(tau) * rho.max(0.0).sqrt())
            }
        }
    }

    fn rhs(&self, data: &GronwallData, tau: f64, rho: f64) -> f64 {
        let memory = self.memory(data, tau, rho);
        let root = rho.max(0.0).sqrt();
        match (&data.memory, data.variant) {
            (Memory::Volterra(_), _) => (data.epsilon)(tau) + (data.k1)(tau) * rho + (data.k2)(tau) * memory,
            (Memory::Split { k3, .. }, _) => {
                (data.epsilon)(tau) + (data.k1)(tau) * root + (data.k2)(tau) * rho + k3(tau) * root * memory
            }
        }
    }

    fn push(&mut self, data: &GronwallData, tau: f64, rho: f64) {
        if let Memory::Split { k4, .. } = &data.memory {
            let j = self.times.len() - 1;
            let inc = 0.5
                * (tau - self.times[j])
                * (k4(self.times[j]) * self.values[j].max(0.0).sqrt() + k4(tau) * rho.max(0.0).sqrt());
            self.prefix.push(self.prefix[j] + inc);
        }
        self.times.push(tau);
        self.values.push(rho);
    }
}

/// Integrates the equality version of the hypothesis from `ρ(T0) = ρ0` with RK4 at
/// `h / DOMINANCE_SUBSTEPS` (trapezoid for the memory integral) and compares with `bound`.
pub fn verify_dominance(
    bound: &BoundCurve,
    data: &GronwallData,
    grid: &TimeGrid,
) -> Result<DominanceReport, GronwallError> {
    if bound.grid.as_slice() != grid.nodes() {
        return Err(GridError::Mismatch("bound curve was computed on another grid".into()).into());
    }
    check_interval(data, grid)?;
    let mut history = History {
        times: vec![grid.start()],
        values: vec![data.rho0],
        prefix: vec![0.0],
    };
    let mut numeric = vec![data.rho0];
    let nodes = grid.nodes();
    for k in 0..nodes.len() - 1 {
        let h = (nodes[k + 1] - nodes[k]) / DOMINANCE_SUBSTEPS as f64;
        for m in 0..DOMINANCE_SUBSTEPS {
            let t = nodes[k] + m as f64 * h;
            let y = *history.values.last().unwrap();
            let s1 = history.rhs(data, t, y);
            let s2 = history.rhs(data, t + 0.5 * h, y + 0.5 * h * s1);
            let s3 = history.rhs(data, t + 0.5 * h, y + 0.5 * h * s2);
            let tn = if m + 1 == DOMINANCE_SUBSTEPS {
                nodes[k + 1]
            } else {
                t + h
            };
            let s4 = history.rhs(data, tn, y + h * s3);
            let next = (y + h / 6.0 * (s1 + 2.0 * s2 + 2.0 * s3 + s4)).max(0.0);
            history.push(data, tn, next);
        }
        numeric.push(*history.values.last().unwrap());
    }
    if data.variant == Variant::IIb {
        numeric.iter_mut().for_each(|r| *r = r.sqrt());
    }
    let (mut margin, mut worst_time) = (f64::INFINITY, grid.start());
    for (k, (b, r)) in bound.values.iter().zip(&numeric).enumerate() {
        if b - r < margin {
            margin = b - r;
            worst_time = nodes[k];
        }
    }
    Ok(DominanceReport {
        margin,
        worst_time,
        numeric,
        quadrature_error: bound.quadrature_error,
    })
}

/// The six reference cases on `[0, 1]` used by the self-test.
pub fn builtin_cases() -> Vec<(&'static str, GronwallData)> {
    let zero = || constant(0.0);
    let one = || constant(1.0);
    let unit = (0.0, 1.0);
    vec![
        (
            "I-classical",
            GronwallData::volterra(unit, 1.0, zero(), one(), zero(), Arc::new(|_, _| 0.0)),
        ),
        (
            "I-volterra",
            GronwallData::volterra(unit, 1.0, zero(), zero(), one(), Arc::new(|_, _| 1.0)),
        ),
        (
            "IIa-classical",
            GronwallData::split(Variant::IIa, unit, 1.0, zero(), zero(), one(), zero(), zero()),
        ),
        (
            "IIa-root-source",
            GronwallData::split(Variant::IIa, unit, 0.25, zero(), one(), zero(), zero(), zero()),
        ),
        (
            "IIb-linear",
            GronwallData::split(Variant::IIb, unit, 0.0, zero(), one(), zero(), zero(), zero()),
        ),
        (
            "IIb-exponential",
            GronwallData::split(Variant::IIb, unit, 4.0, zero(), zero(), constant(2.0), zero(), zero()),
        ),
    ]
}

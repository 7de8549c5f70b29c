//! Moving closed sets `C(t)` in ℝ^d: metric projection, tangent-cone projection and the
//! sampled diagnostics used to validate a declared motion modulus and prox-regularity constant.
//!
//! Supported slices are the whole space, half-spaces `{x : ⟨a, x⟩ ≥ b(t)}`, boxes, balls,
//! spheres and translates `K + u(t)` of a convex base. All projections are closed-form.

use std::fmt;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::path::{Path, ScalarFn};

/// Relative distance-to-ρ at which sphere projections are refused.
pub const AMBIGUITY_MARGIN: f64 = 1e-9;
/// Tolerance for "x lies on C(t)" in tangent-cone queries, scaled by `1 + ‖x‖`.
pub const ON_SET_TOL: f64 = 1e-8;

const SAMPLING_SEED: u64 = 0x5eed_c0de;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SetError {
    #[error("projection is not unique: distance {distance} to the set is not below ρ = {rho}")]
    ProjectionAmbiguous { distance: f64, rho: f64 },
    #[error("set slice is empty or malformed: {0}")]
    InfeasibleSet(String),
    #[error("point is at distance {distance} from the set (tolerance {tol})")]
    NotOnSet { distance: f64, tol: f64 },
    #[error("operation not supported for {0} sets")]
    UnsupportedKind(&'static str),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// Motion modulus `v(t)` of (H_C): `C(t) ⊂ C(s) + |v(t) − v(s)|·B`.
#[derive(Clone, Default)]
pub enum Motion {
    #[default]
    Static,
    /// `v(t) = rate·t`
    Linear {
        rate: f64,
    },
    Custom {
        value: ScalarFn,
        rate: ScalarFn,
    },
}

impl fmt::Debug for Motion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Motion::Static => write!(f, "Static"),
            Motion::Linear { rate } => f.debug_struct("Linear").field("rate", rate).finish(),
            Motion::Custom { .. } => write!(f, "Custom"),
        }
    }
}

impl Motion {
    pub fn value(&self, t: f64) -> f64 {
        match self {
            Motion::Static => 0.0,
            Motion::Linear { rate } => rate * t,
            Motion::Custom { value, .. } => value(t),
        }
    }

    /// `|v̇(t)|`
    pub fn rate(&self, t: f64) -> f64 {
        match self {
            Motion::Static => 0.0,
            Motion::Linear { rate } => rate.abs(),
            Motion::Custom { rate, .. } => rate(t).abs(),
        }
    }
}

/// Geometry of a slice.
#[derive(Debug, Clone)]
pub enum Shape {
    WholeSpace {
        dim: usize,
    },
    /// `{x : ⟨normal, x⟩ ≥ offset(t)}` with a scalar offset path.
    HalfSpace {
        normal: DVector<f64>,
        offset: Path,
    },
    Box {
        lower: DVector<f64>,
        upper: DVector<f64>,
    },
    Ball {
        center: Path,
        radius: f64,
    },
    Sphere {
        center: Path,
        radius: f64,
    },
    /// `base + shift(t)` for a convex base.
    Translated {
        base: Box<Shape>,
        shift: Path,
    },
}

impl Shape {
    fn dim(&self) -> usize {
        match self {
            Shape::WholeSpace { dim } => *dim,
            Shape::HalfSpace { normal, .. } => normal.len(),
            Shape::Box { lower, .. } => lower.len(),
            Shape::Ball { center, .. } | Shape::Sphere { center, .. } => center.dim(),
            Shape::Translated { shift, .. } => shift.dim(),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Shape::WholeSpace { .. } => "whole-space",
            Shape::HalfSpace { .. } => "half-space",
            Shape::Box { .. } => "box",
            Shape::Ball { .. } => "ball",
            Shape::Sphere { .. } => "sphere",
            Shape::Translated { .. } => "translated-convex",
        }
    }

    fn is_convex(&self) -> bool {
        match self {
            Shape::Sphere { .. } => false,
            Shape::Translated { base, .. } => base.is_convex(),
            _ => true,
        }
    }

    fn is_static(&self) -> bool {
        match self {
            Shape::WholeSpace { .. } | Shape::Box { .. } => true,
            Shape::HalfSpace { offset, .. } => offset.is_constant(),
            Shape::Ball { center, .. } | Shape::Sphere { center, .. } => center.is_constant(),
            Shape::Translated { base, shift } => base.is_static() && shift.is_constant(),
        }
    }

    fn prox_constant(&self) -> f64 {
        match self {
            Shape::Sphere { radius, .. } => *radius,
            Shape::Translated { base, .. } => base.prox_constant(),
            _ => f64::INFINITY,
        }
    }

    fn validate(&self) -> Result<(), SetError> {
        let dim = self.dim();
        let check = |found: usize| {
            if found == dim {
                Ok(())
            } else {
                Err(SetError::DimensionMismatch { expected: dim, found })
            }
        };
        match self {
            Shape::WholeSpace { .. } => Ok(()),
            Shape::HalfSpace { normal, offset } => {
                if offset.dim() != 1 {
                    return Err(SetError::DimensionMismatch {
                        expected: 1,
                        found: offset.dim(),
                    });
                }
                if !(normal.norm() > 0.0) {
                    return Err(SetError::InfeasibleSet("half-space normal must be nonzero".into()));
                }
                Ok(())
            }
            Shape::Box { lower, upper } => {
                check(upper.len())?;
                if let Some(i) = (0..dim).find(|&i| !(lower[i] <= upper[i])) {
                    return Err(SetError::InfeasibleSet(format!(
                        "box lower[{i}] = {} exceeds upper[{i}] = {}",
                        lower[i], upper[i]
                    )));
                }
                Ok(())
            }
            Shape::Ball { radius, .. } => {
                if !(*radius >= 0.0) || !radius.is_finite() {
                    return Err(SetError::InfeasibleSet(format!("ball radius {radius}")));
                }
                Ok(())
            }
            Shape::Sphere { radius, .. } => {
                if !(*radius > 0.0) || !radius.is_finite() {
                    return Err(SetError::InfeasibleSet(format!("sphere radius {radius}")));
                }
                Ok(())
            }
            Shape::Translated { base, shift } => {
                check(base.dim())?;
                check(shift.dim())?;
                if !base.is_convex() {
                    return Err(SetError::UnsupportedKind("non-convex translated"));
                }
                base.validate()
            }
        }
    }

    fn project(&self, t: f64, x: &DVector<f64>) -> Result<DVector<f64>, SetError> {
        Ok(match self {
            Shape::WholeSpace { .. } => x.clone(),
            Shape::HalfSpace { normal, offset } => {
                let gap = normal.dot(x) - offset.eval_scalar(t);
                if gap >= 0.0 {
                    x.clone()
                } else {
                    x - normal * (gap / normal.norm_squared())
                }
            }
            Shape::Box { lower, upper } => {
                DVector::from_iterator(x.len(), (0..x.len()).map(|i| x[i].clamp(lower[i], upper[i])))
            }
            Shape::Ball { center, radius } => {
                let c = center.eval(t);
                let offset = x - &c;
                let norm = offset.norm();
                if norm <= *radius {
                    x.clone()
                } else {
                    c + offset * (*radius / norm)
                }
            }
            Shape::Sphere { center, radius } => {
                let c = center.eval(t);
                let offset = x - &c;
                let norm = offset.norm();
                let distance = (norm - radius).abs();
                // exterior points always project uniquely; the threshold bites inside
                if norm < *radius && distance >= radius * (1.0 - AMBIGUITY_MARGIN) {
                    return Err(SetError::ProjectionAmbiguous { distance, rho: *radius });
                }
                c + offset * (*radius / norm)
            }
            Shape::Translated { base, shift } => {
                let u = shift.eval(t);
                base.project(t, &(x - &u))? + u
            }
        })
    }

    fn distance(&self, t: f64, x: &DVector<f64>) -> f64 {
        match self {
            Shape::Sphere { center, radius } => ((x - center.eval(t)).norm() - radius).abs(),
            _ => {
                // convex kinds never fail to project
                let p = self.project(t, x).expect("convex projection");
                (x - p).norm()
            }
        }
    }

    fn tangent_projection(&self, t: f64, x: &DVector<f64>, h: &DVector<f64>) -> Result<DVector<f64>, SetError> {
        Ok(match self {
            Shape::WholeSpace { .. } => h.clone(),
            Shape::HalfSpace { normal, offset } => {
                let b = offset.eval_scalar(t);
                let gap = normal.dot(x) - b;
                let active = gap <= 1e-9 * (1.0 + b.abs()) * normal.norm();
                let push = normal.dot(h);
                if active && push < 0.0 {
                    h - normal * (push / normal.norm_squared())
                } else {
                    h.clone()
                }
            }
            Shape::Box { lower, upper } => DVector::from_iterator(
                h.len(),
                (0..h.len()).map(|i| {
                    let at_lower = x[i] - lower[i] <= 1e-9 * (1.0 + lower[i].abs());
                    let at_upper = upper[i] - x[i] <= 1e-9 * (1.0 + upper[i].abs());
                    if (at_lower && h[i] < 0.0) || (at_upper && h[i] > 0.0) {
                        0.0
                    } else {
                        h[i]
                    }
                }),
            ),
            Shape::Ball { center, radius } => {
                let offset = x - center.eval(t);
                let norm = offset.norm();
                if norm < radius * (1.0 - 1e-9) || norm == 0.0 {
                    h.clone()
                } else {
                    let n = offset / norm;
                    let push = n.dot(h);
                    if push > 0.0 {
                        h - n * push
                    } else {
                        h.clone()
                    }
                }
            }
            Shape::Sphere { .. } => return Err(SetError::UnsupportedKind("sphere")),
            Shape::Translated { base, shift } => base.tangent_projection(t, &(x - shift.eval(t)), h)?,
        })
    }

    /// A point of the slice and a length scale, used to seed samples.
    fn anchor(&self, t: f64) -> (DVector<f64>, f64) {
        match self {
            Shape::WholeSpace { dim } => (DVector::zeros(*dim), 1.0),
            Shape::HalfSpace { normal, offset } => (normal * (offset.eval_scalar(t) / normal.norm_squared()), 1.0),
            Shape::Box { lower, upper } => ((lower + upper) * 0.5, ((upper - lower).norm() * 0.5).max(1e-3)),
            Shape::Ball { center, radius } | Shape::Sphere { center, radius } => (center.eval(t), radius.max(1e-3)),
            Shape::Translated { base, shift } => {
                let (p, s) = base.anchor(t);
                (p + shift.eval(t), s)
            }
        }
    }

    fn sample_point(&self, t: f64, rng: &mut ChaCha8Rng) -> DVector<f64> {
        let dim = self.dim();
        let g = DVector::from_iterator(dim, (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let (anchor, scale) = self.anchor(t);
        match self {
            Shape::Sphere { radius, .. } => {
                let norm = g.norm().max(f64::MIN_POSITIVE);
                anchor + g * (*radius / norm)
            }
            _ => {
                let y = anchor + g * (2.0 * scale / (dim as f64).sqrt());
                self.project(t, &y).expect("convex projection")
            }
        }
    }
}

/// Tag of a [`ConeVector`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeTag {
    Normal,
    Tangent,
}

/// A direction attached to a base point of `C(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeVector {
    pub base: DVector<f64>,
    pub direction: DVector<f64>,
    pub tag: ConeTag,
    pub time: f64,
}

/// Worst sampled value of `⟨v₁ − v₂, x₁ − x₂⟩ + (1/ρ)‖x₁ − x₂‖²` over unit proximal normals.
#[derive(Debug, Clone, PartialEq)]
pub struct HypomonotoneReport {
    pub inv_rho: f64,
    pub pairs: usize,
    pub worst: f64,
    /// `min ⟨v₁ − v₂, x₁ − x₂⟩ / ‖x₁ − x₂‖²`; must not drop below `−1/ρ`.
    pub worst_ratio: f64,
}

impl HypomonotoneReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.worst >= -tol && self.worst_ratio >= -(1.0 + tol) * self.inv_rho - tol
    }
}

/// A moving set `t ↦ C(t)` with its declared motion modulus.
#[derive(Debug, Clone)]
pub struct MovingSet {
    shape: Shape,
    motion: Motion,
}

impl MovingSet {
    pub fn new(shape: Shape, motion: Motion) -> Result<Self, SetError> {
        shape.validate()?;
        Ok(Self { shape, motion })
    }

    pub fn whole_space(dim: usize) -> Self {
        Self {
            shape: Shape::WholeSpace { dim },
            motion: Motion::Static,
        }
    }

    pub fn half_space(normal: DVector<f64>, offset: Path) -> Result<Self, SetError> {
        Self::new(Shape::HalfSpace { normal, offset }, Motion::Static)
    }

    pub fn boxed(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self, SetError> {
        Self::new(Shape::Box { lower, upper }, Motion::Static)
    }

    pub fn ball(center: Path, radius: f64) -> Result<Self, SetError> {
        Self::new(Shape::Ball { center, radius }, Motion::Static)
    }

    pub fn sphere(center: Path, radius: f64) -> Result<Self, SetError> {
        Self::new(Shape::Sphere { center, radius }, Motion::Static)
    }

    pub fn translated(base: Shape, shift: Path) -> Result<Self, SetError> {
        Self::new(
            Shape::Translated {
                base: Box::new(base),
                shift,
            },
            Motion::Static,
        )
    }

    pub fn with_motion(mut self, motion: Motion) -> Self {
        self.motion = motion;
        self
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn motion(&self) -> &Motion {
        &self.motion
    }

    pub fn dim(&self) -> usize {
        self.shape.dim()
    }

    pub fn kind(&self) -> &'static str {
        self.shape.name()
    }

    /// ρ: `+∞` for convex kinds, the radius for spheres.
    pub fn prox_constant(&self) -> f64 {
        self.shape.prox_constant()
    }

    /// `1/ρ`, exactly zero for convex kinds.
    pub fn inv_prox_constant(&self) -> f64 {
        let rho = self.prox_constant();
        if rho.is_infinite() {
            0.0
        } else {
            1.0 / rho
        }
    }

    pub fn is_convex(&self) -> bool {
        self.shape.is_convex()
    }

    pub fn is_static(&self) -> bool {
        self.shape.is_static()
    }

    fn check_dim(&self, x: &DVector<f64>) -> Result<(), SetError> {
        if x.len() != self.dim() {
            return Err(SetError::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Nearest point of `C(t)` to `x`.
    pub fn project(&self, t: f64, x: &DVector<f64>) -> Result<DVector<f64>, SetError> {
        self.check_dim(x)?;
        self.shape.project(t, x)
    }

    /// Nearest point of `C(t) + shift` to `x`.
    pub fn project_shifted(&self, t: f64, x: &DVector<f64>, shift: &DVector<f64>) -> Result<DVector<f64>, SetError> {
        Ok(self.project(t, &(x - shift))? + shift)
    }

    /// `dist(x, C(t))`; well defined for every kind, including the center of a sphere.
    pub fn distance(&self, t: f64, x: &DVector<f64>) -> Result<f64, SetError> {
        self.check_dim(x)?;
        Ok(self.shape.distance(t, x))
    }

    /// Metric projection of `h` onto the tangent cone `T_{C(t)}(x)` (convex kinds only).
    pub fn tangent_projection(&self, t: f64, x: &DVector<f64>, h: &DVector<f64>) -> Result<DVector<f64>, SetError> {
        self.check_dim(x)?;
        self.check_dim(h)?;
        if !self.is_convex() {
            return Err(SetError::UnsupportedKind(self.kind()));
        }
        let tol = ON_SET_TOL * (1.0 + x.norm());
        let distance = self.shape.distance(t, x);
        if distance > tol {
            return Err(SetError::NotOnSet { distance, tol });
        }
        self.shape.tangent_projection(t, x, h)
    }

    /// Unit proximal normal at `proj(x_out)` realized as `(x_out − proj)/‖x_out − proj‖`;
    /// zero when `x_out` already lies in the slice.
    pub fn proximal_normal(&self, t: f64, x_out: &DVector<f64>) -> Result<ConeVector, SetError> {
        let base = self.project(t, x_out)?;
        let offset = x_out - &base;
        let norm = offset.norm();
        let direction = if norm > 0.0 {
            offset / norm
        } else {
            DVector::zeros(x_out.len())
        };
        Ok(ConeVector {
            base,
            direction,
            tag: ConeTag::Normal,
            time: t,
        })
    }

    /// Samples `sample_count` unit proximal normals on `C(t)` and evaluates the
    /// `1/ρ`-hypomonotonicity expression over all pairs.
    pub fn check_hypomonotone(&self, t: f64, sample_count: usize, rng_seed: u64) -> HypomonotoneReport {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let (_, scale) = self.shape.anchor(t);
        let eps = 1e-4 * 2.0 * scale;
        let dim = self.dim();
        let mut normals = Vec::with_capacity(sample_count);
        for _ in 0..sample_count {
            let x = self.shape.sample_point(t, &mut rng);
            let dir = DVector::from_iterator(dim, (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)));
            let dir = dir.normalize();
            // ε is far below ρ, so the projection is unique
            if let Ok(cv) = self.proximal_normal(t, &(x + dir * eps)) {
                normals.push(cv);
            }
        }
        let inv_rho = self.inv_prox_constant();
        let mut worst = f64::INFINITY;
        let mut worst_ratio = f64::INFINITY;
        let mut pairs = 0;
        for i in 0..normals.len() {
            for j in (i + 1)..normals.len() {
                let dx = &normals[i].base - &normals[j].base;
                let dv = &normals[i].direction - &normals[j].direction;
                let inner = dv.dot(&dx);
                let sq = dx.norm_squared();
                worst = worst.min(inner + inv_rho * sq);
                if sq > 1e-24 {
                    worst_ratio = worst_ratio.min(inner / sq);
                }
                pairs += 1;
            }
        }
        if pairs == 0 {
            worst = 0.0;
        }
        HypomonotoneReport {
            inv_rho,
            pairs,
            worst,
            worst_ratio,
        }
    }

    /// Sampled Hausdorff distance between `C(s)` and `C(t)`: the larger of the two excesses
    /// `sup_{x∈C(t)} dist(x, C(s))` and `sup_{x∈C(s)} dist(x, C(t))`.
    pub fn motion_excess(&self, s: f64, t: f64, sample_count: usize) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(SAMPLING_SEED);
        let mut excess: f64 = 0.0;
        for _ in 0..sample_count {
            let x = self.shape.sample_point(t, &mut rng);
            excess = excess.max(self.shape.distance(s, &x));
            let y = self.shape.sample_point(s, &mut rng);
            excess = excess.max(self.shape.distance(t, &y));
        }
        excess
    }

    /// Checks `motion_excess(s, t) ≤ |v(t) − v(s)| + tol` on all pairs of the given times.
    /// Returns the first violating pair with the excess and the declared bound.
    pub fn check_motion(&self, times: &[f64], sample_count: usize, tol: f64) -> Option<(f64, f64, f64, f64)> {
        for (i, &s) in times.iter().enumerate() {
            for &t in &times[i + 1..] {
                let excess = self.motion_excess(s, t, sample_count);
                let bound = (self.motion.value(t) - self.motion.value(s)).abs();
                if excess > bound + tol {
                    return Some((s, t, excess, bound));
                }
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn upper_half_plane() -> MovingSet {
        MovingSet::half_space(v(&[0.0, 1.0]), Path::scalar(0.0)).unwrap()
    }

    fn unit_box() -> MovingSet {
        MovingSet::boxed(v(&[0.0, 0.0]), v(&[1.0, 1.0])).unwrap()
    }

    fn unit_circle() -> MovingSet {
        MovingSet::sphere(Path::zero(2), 1.0).unwrap()
    }

    #[test]
    fn project_examples() {
        assert_eq!(
            upper_half_plane().project(0.0, &v(&[3.0, -2.0])).unwrap(),
            v(&[3.0, 0.0])
        );
        let x = v(&[-4.0, 7.5, 1.0]);
        assert_eq!(MovingSet::whole_space(3).project(2.0, &x).unwrap(), x);
        assert_eq!(unit_circle().project(0.0, &v(&[2.0, 0.0])).unwrap(), v(&[1.0, 0.0]));
    }

    #[test]
    fn box_projection_matches_grid_search() {
        let x = v(&[1.5, -0.3]);
        // brute force over a 401×401 lattice of the box
        let mut best = (f64::INFINITY, v(&[0.0, 0.0]));
        for i in 0..=400 {
            for j in 0..=400 {
                let y = v(&[i as f64 / 400.0, j as f64 / 400.0]);
                let d = (&x - &y).norm();
                if d < best.0 {
                    best = (d, y);
                }
            }
        }
        assert_eq!(best.1, v(&[1.0, 0.0]));
        assert_eq!(unit_box().project(0.0, &x).unwrap(), best.1);
    }

    #[test]
    fn sphere_center_is_ambiguous() {
        let err = unit_circle().project(0.0, &v(&[0.0, 0.0])).unwrap_err();
        assert!(matches!(err, SetError::ProjectionAmbiguous { .. }));
        assert!(unit_circle().project(0.0, &v(&[1e-12, 0.0])).is_err());
        assert_eq!(unit_circle().project(0.0, &v(&[3.0, 0.0])).unwrap(), v(&[1.0, 0.0]));
        assert_eq!(unit_circle().distance(0.0, &v(&[0.0, 0.0])).unwrap(), 1.0);
    }

    #[test]
    fn malformed_sets_are_rejected() {
        assert!(matches!(
            MovingSet::boxed(v(&[0.0, 2.0]), v(&[1.0, 1.0])),
            Err(SetError::InfeasibleSet(_))
        ));
        assert!(matches!(
            MovingSet::half_space(v(&[0.0, 0.0]), Path::scalar(0.0)),
            Err(SetError::InfeasibleSet(_))
        ));
        assert!(MovingSet::sphere(Path::zero(2), 0.0).is_err());
        let sphere = Shape::Sphere {
            center: Path::zero(2),
            radius: 1.0,
        };
        assert!(matches!(
            MovingSet::translated(sphere, Path::zero(2)),
            Err(SetError::UnsupportedKind(_))
        ));
        assert!(matches!(
            unit_box().project(0.0, &v(&[1.0])),
            Err(SetError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn translated_projection_shifts_base() {
        let base = Shape::Box {
            lower: v(&[0.0, 0.0]),
            upper: v(&[1.0, 1.0]),
        };
        let set = MovingSet::translated(
            base,
            Path::Linear {
                origin: v(&[0.0, 0.0]),
                velocity: v(&[1.0, 0.0]),
            },
        )
        .unwrap();
        assert_eq!(set.project(2.0, &v(&[0.0, 0.5])).unwrap(), v(&[2.0, 0.5]));
        assert!(!set.is_static());
        assert!(set.is_convex());
    }

    #[test]
    fn tangent_projection_examples() {
        let h = upper_half_plane()
            .tangent_projection(0.0, &v(&[0.0, 0.0]), &v(&[1.0, -1.0]))
            .unwrap();
        assert_eq!(h, v(&[1.0, 0.0]));
        let h = unit_box()
            .tangent_projection(0.0, &v(&[0.5, 0.5]), &v(&[2.0, 3.0]))
            .unwrap();
        assert_eq!(h, v(&[2.0, 3.0]));
    }

    #[test]
    fn tangent_projection_at_box_corner_matches_grid_search() {
        let h = v(&[-1.0, 2.0]);
        // tangent cone at the corner is the nonnegative orthant
        let mut best = (f64::INFINITY, v(&[0.0, 0.0]));
        for i in 0..=300 {
            for j in 0..=300 {
                let w = v(&[i as f64 / 100.0, j as f64 / 100.0]);
                let d = (&h - &w).norm();
                if d < best.0 {
                    best = (d, w);
                }
            }
        }
        let got = unit_box().tangent_projection(0.0, &v(&[0.0, 0.0]), &h).unwrap();
        assert_eq!(got, v(&[0.0, 2.0]));
        assert!((got - best.1).norm() < 1e-12);
    }

    #[test]
    fn tangent_projection_errors() {
        assert!(matches!(
            unit_box().tangent_projection(0.0, &v(&[2.0, 0.5]), &v(&[1.0, 0.0])),
            Err(SetError::NotOnSet { .. })
        ));
        assert!(matches!(
            unit_circle().tangent_projection(0.0, &v(&[1.0, 0.0]), &v(&[1.0, 0.0])),
            Err(SetError::UnsupportedKind("sphere"))
        ));
    }

    #[test]
    fn hypomonotone_examples() {
        let r = upper_half_plane().check_hypomonotone(0.0, 100, 1);
        assert_eq!(r.inv_rho, 0.0);
        assert!(r.worst >= -1e-12, "{r:?}");
        let r = MovingSet::whole_space(2).check_hypomonotone(0.0, 50, 3);
        assert_eq!(r.worst, 0.0);
        let r = unit_circle().check_hypomonotone(0.0, 100, 7);
        assert_eq!(r.inv_rho, 1.0);
        assert!(r.passes(1e-9), "{r:?}");
    }

    #[test]
    fn sphere_hypomonotonicity_closed_form() {
        // normals ±x on the unit circle: the pairwise expression is exactly nonnegative and
        // vanishes for inward normals
        let pts: Vec<DVector<f64>> = (0..40)
            .map(|k| {
                let a = k as f64 * 0.157;
                v(&[a.cos(), a.sin()])
            })
            .collect();
        let mut worst = f64::INFINITY;
        for i in 0..pts.len() {
            for j in 0..pts.len() {
                for (si, sj) in [(1.0, 1.0), (-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0)] {
                    let dv = &pts[i] * si - &pts[j] * sj;
                    let dx = &pts[i] - &pts[j];
                    worst = worst.min(dv.dot(&dx) + dx.norm_squared());
                }
            }
        }
        assert!(worst >= -1e-14);
        let r = unit_circle().check_hypomonotone(0.0, 100, 11);
        assert!(r.worst >= -1e-9);
        assert!(r.worst_ratio >= -1.0 - 1e-6);
    }

    #[test]
    fn motion_excess_examples() {
        assert_eq!(unit_box().motion_excess(0.0, 1.0, 200), 0.0);
        let moving_line = MovingSet::half_space(
            v(&[1.0, 0.0]),
            Path::Linear {
                origin: v(&[0.0]),
                velocity: v(&[1.0]),
            },
        )
        .unwrap()
        .with_motion(Motion::Linear { rate: 1.0 });
        let e = moving_line.motion_excess(0.0, 1.0, 200);
        assert!((e - 1.0).abs() < 1e-12, "{e}");
        assert!(moving_line.check_motion(&[0.0, 0.5, 1.0], 200, 1e-9).is_none());

        let ball = MovingSet::ball(
            Path::Linear {
                origin: v(&[0.0, 0.0]),
                velocity: v(&[1.0, 0.0]),
            },
            1.0,
        )
        .unwrap();
        let e = ball.motion_excess(0.0, 0.5, 2000);
        assert!((e - 0.5).abs() < 2e-3, "{e}");
        // declared static motion is inconsistent with a moving center
        assert!(ball.check_motion(&[0.0, 0.5], 500, 1e-6).is_some());
    }

    fn arb_point() -> impl Strategy<Value = DVector<f64>> {
        prop::collection::vec(-3.0..3.0f64, 2).prop_map(DVector::from_vec)
    }

    fn convex_sets() -> Vec<MovingSet> {
        vec![
            MovingSet::whole_space(2),
            upper_half_plane(),
            MovingSet::half_space(v(&[1.0, 2.0]), Path::scalar(0.5)).unwrap(),
            unit_box(),
            MovingSet::ball(Path::Constant(v(&[0.5, -0.5])), 1.2).unwrap(),
            MovingSet::translated(
                Shape::Ball {
                    center: Path::zero(2),
                    radius: 0.7,
                },
                Path::Constant(v(&[1.0, 1.0])),
            )
            .unwrap(),
        ]
    }

    proptest! {
        #[test]
        fn projection_is_idempotent(x in arb_point()) {
            let mut sets = convex_sets();
            sets.push(unit_circle());
            for set in &sets {
                if let Ok(p) = set.project(0.3, &x) {
                    let q = set.project(0.3, &p).unwrap();
                    prop_assert!((&p - q).norm() <= 1e-12);
                }
            }
        }

        #[test]
        fn convex_projection_is_nonexpansive(x in arb_point(), y in arb_point()) {
            for set in convex_sets() {
                let px = set.project(0.0, &x).unwrap();
                let py = set.project(0.0, &y).unwrap();
                prop_assert!((px - py).norm() <= (&x - &y).norm() + 1e-12);
            }
        }

        #[test]
        fn moreau_decomposition(x in arb_point(), h in arb_point(), probes in prop::collection::vec(arb_point(), 8)) {
            for set in convex_sets() {
                let base = set.project(0.0, &x).unwrap();
                let tangent = set.tangent_projection(0.0, &base, &h).unwrap();
                let normal = &h - &tangent;
                prop_assert!(tangent.dot(&normal).abs() <= 1e-10 * (1.0 + h.norm_squared()));
                // the remainder is a normal vector: ⟨n, y − x⟩ ≤ 0 on the set
                for p in &probes {
                    let y = set.project(0.0, p).unwrap();
                    prop_assert!(normal.dot(&(y - &base)) <= 1e-9 * (1.0 + h.norm()));
                }
            }
        }
    }
}

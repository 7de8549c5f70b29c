//! Randomized affine problems shared by the integration tests.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use volterra_sweep::dynamics::{Forcing, KernelWeight, ProblemSpec, VolterraKernel};
use volterra_sweep::path::Path;
use volterra_sweep::sets::{Motion, MovingSet};

/// Parameters of a randomized affine problem on [0, 1] in the plane.
#[derive(Clone)]
pub struct AffineCase {
    pub kind: u8,
    pub set_rate: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub weight: KernelWeight,
    pub bmat: DMatrix<f64>,
    pub c: DVector<f64>,
    pub z0: DVector<f64>,
    pub zv: DVector<f64>,
    pub x0: DVector<f64>,
}

pub fn uniform_vec(rng: &mut ChaCha8Rng, scale: f64) -> DVector<f64> {
    DVector::from_fn(2, |_, _| rng.random_range(-scale..=scale))
}

impl AffineCase {
    /// Convex kinds only: box, moving ball, moving half-plane, whole plane.
    pub fn random(rng: &mut ChaCha8Rng) -> Self {
        Self::random_among(rng, 4)
    }

    /// Kinds `0..kinds`; kind 4 is a moving unit circle.
    pub fn random_among(rng: &mut ChaCha8Rng, kinds: u8) -> Self {
        let kind = rng.random_range(0..kinds);
        let weight = if rng.random_bool(0.5) {
            KernelWeight::Exponential {
                scale: rng.random_range(0.0..0.5),
                rate: rng.random_range(0.0..2.0),
            }
        } else {
            KernelWeight::Constant(rng.random_range(-0.5..0.5))
        };
        let mut case = Self {
            kind,
            set_rate: uniform_vec(rng, 0.8),
            a: DMatrix::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0)),
            b: uniform_vec(rng, 1.0),
            weight,
            bmat: DMatrix::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0)),
            c: uniform_vec(rng, 0.5),
            z0: uniform_vec(rng, 0.3),
            zv: uniform_vec(rng, 0.3),
            x0: uniform_vec(rng, 1.5),
        };
        case.x0 = case.feasible(&case.x0.clone());
        case
    }

    pub fn set(&self) -> MovingSet {
        match self.kind {
            0 => MovingSet::boxed(DVector::from_element(2, -1.0), DVector::from_element(2, 1.0)).unwrap(),
            1 => MovingSet::ball(
                Path::Linear {
                    origin: DVector::zeros(2),
                    velocity: self.set_rate.clone(),
                },
                1.0,
            )
            .unwrap()
            .with_motion(Motion::Linear {
                rate: self.set_rate.norm(),
            }),
            2 => {
                let normal = DVector::from_vec(vec![1.0, 0.5]);
                let rate = self.set_rate[0];
                MovingSet::half_space(
                    normal.clone(),
                    Path::Linear {
                        origin: DVector::from_element(1, -0.5),
                        velocity: DVector::from_element(1, rate),
                    },
                )
                .unwrap()
                .with_motion(Motion::Linear {
                    rate: rate.abs() / normal.norm(),
                })
            }
            3 => MovingSet::whole_space(2),
            _ => MovingSet::sphere(
                Path::Linear {
                    origin: DVector::zeros(2),
                    velocity: self.set_rate.clone(),
                },
                1.0,
            )
            .unwrap()
            .with_motion(Motion::Linear {
                rate: self.set_rate.norm(),
            }),
        }
    }

    pub fn feasible(&self, x: &DVector<f64>) -> DVector<f64> {
        self.set().project_shifted(0.0, x, &self.z0).unwrap()
    }

    pub fn spec(&self) -> ProblemSpec {
        ProblemSpec::new(
            (0.0, 1.0),
            self.set(),
            Path::Linear {
                origin: self.z0.clone(),
                velocity: self.zv.clone(),
            },
            Forcing::affine(self.a.clone(), Path::Constant(self.b.clone())),
            VolterraKernel::separable(self.weight, self.bmat.clone(), self.c.clone(), 0.0),
            self.x0.clone(),
        )
        .unwrap()
    }
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

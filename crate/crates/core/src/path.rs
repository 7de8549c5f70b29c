//! Time-dependent vectors and scalar coefficient handles.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

/// Scalar coefficient `t ↦ c(t)`.
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
/// Two-time scalar `(t, s) ↦ k(t, s)`.
pub type KernelFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
/// Radius-indexed modulus family `(r, t) ↦ κ_r(t)`.
pub type RadialFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
/// Vector-valued curve `t ↦ p(t)`.
pub type VectorFn = Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>;

pub fn constant(c: f64) -> ScalarFn {
    Arc::new(move |_| c)
}

/// A curve in ℝ^d together with its derivative.
#[derive(Clone)]
pub enum Path {
    Constant(DVector<f64>),
    /// `origin + velocity·t`
    Linear {
        origin: DVector<f64>,
        velocity: DVector<f64>,
    },
    /// `origin + amplitude·sin(frequency·t + phase)`
    Sinusoidal {
        origin: DVector<f64>,
        amplitude: DVector<f64>,
        frequency: f64,
        phase: f64,
    },
    Custom {
        dim: usize,
        value: VectorFn,
        derivative: VectorFn,
    },
}

impl fmt::Debug for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Path::Constant(v) => f.debug_tuple("Constant").field(&v.as_slice()).finish(),
            Path::Linear { origin, velocity } => f
                .debug_struct("Linear")
                .field("origin", &origin.as_slice())
                .field("velocity", &velocity.as_slice())
                .finish(),
            Path::Sinusoidal {
                origin,
                amplitude,
                frequency,
                phase,
            } => f
                .debug_struct("Sinusoidal")
                .field("origin", &origin.as_slice())
                .field("amplitude", &amplitude.as_slice())
                .field("frequency", frequency)
                .field("phase", phase)
                .finish(),
            Path::Custom { dim, .. } => f.debug_struct("Custom").field("dim", dim).finish(),
        }
    }
}

impl Path {
    pub fn zero(dim: usize) -> Self {
        Path::Constant(DVector::zeros(dim))
    }

    pub fn scalar(value: f64) -> Self {
        Path::Constant(DVector::from_element(1, value))
    }

    pub fn dim(&self) -> usize {
        match self {
            Path::Constant(v) => v.len(),
            Path::Linear { origin, .. } | Path::Sinusoidal { origin, .. } => origin.len(),
            Path::Custom { dim, .. } => *dim,
        }
    }

    pub fn eval(&self, t: f64) -> DVector<f64> {
        match self {
            Path::Constant(v) => v.clone(),
            Path::Linear { origin, velocity } => origin + velocity * t,
            Path::Sinusoidal {
                origin,
                amplitude,
                frequency,
                phase,
            } => origin + amplitude * (frequency * t + phase).sin(),
            Path::Custom { value, .. } => value(t),
        }
    }

    /// First component; used for scalar offsets.
    pub fn eval_scalar(&self, t: f64) -> f64 {
        self.eval(t)[0]
    }

    pub fn derivative(&self, t: f64) -> DVector<f64> {
        match self {
            Path::Constant(v) => DVector::zeros(v.len()),
            Path::Linear { velocity, .. } => velocity.clone(),
            Path::Sinusoidal {
                amplitude,
                frequency,
                phase,
                ..
            } => amplitude * (frequency * (frequency * t + phase).cos()),
            Path::Custom { derivative, .. } => derivative(t),
        }
    }

    /// Uniform bound on `‖ṗ(t)‖` when it is known in closed form.
    pub fn speed_bound(&self) -> Option<f64> {
        match self {
            Path::Constant(_) => Some(0.0),
            Path::Linear { velocity, .. } => Some(velocity.norm()),
            Path::Sinusoidal {
                amplitude, frequency, ..
            } => Some(amplitude.norm() * frequency.abs()),
            Path::Custom { .. } => None,
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Path::Constant(_) => true,
            Path::Linear { velocity, .. } => velocity.iter().all(|&v| v == 0.0),
            Path::Sinusoidal {
                amplitude, frequency, ..
            } => *frequency == 0.0 || amplitude.iter().all(|&a| a == 0.0),
            Path::Custom { .. } => false,
        }
    }

    /// The same curve shifted by a constant vector.
    pub fn shifted(&self, by: &DVector<f64>) -> Path {
        match self {
            Path::Constant(v) => Path::Constant(v + by),
            Path::Linear { origin, velocity } => Path::Linear {
                origin: origin + by,
                velocity: velocity.clone(),
            },
            Path::Sinusoidal {
                origin,
                amplitude,
                frequency,
                phase,
            } => Path::Sinusoidal {
                origin: origin + by,
                amplitude: amplitude.clone(),
                frequency: *frequency,
                phase: *phase,
            },
            Path::Custom { dim, value, derivative } => {
                let value = value.clone();
                let by = by.clone();
                Path::Custom {
                    dim: *dim,
                    value: Arc::new(move |t| value(t) + &by),
                    derivative: derivative.clone(),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sinusoid_derivative_matches_finite_difference() {
        let p = Path::Sinusoidal {
            origin: DVector::from_vec(vec![1.0, 0.0]),
            amplitude: DVector::from_vec(vec![0.3, -0.2]),
            frequency: 2.0,
            phase: 0.4,
        };
        let t = 0.7;
        let eps = 1e-6;
        let fd = (p.eval(t + eps) - p.eval(t - eps)) / (2.0 * eps);
        assert!((fd - p.derivative(t)).norm() < 1e-8);
        assert!(p.derivative(t).norm() <= p.speed_bound().unwrap() + 1e-15);
    }

    #[test]
    fn shift_preserves_velocity() {
        let p = Path::Linear {
            origin: DVector::from_vec(vec![0.0]),
            velocity: DVector::from_vec(vec![2.0]),
        };
        let q = p.shifted(&DVector::from_vec(vec![1.0]));
        assert_eq!(q.eval(1.0)[0], 3.0);
        assert_eq!(q.derivative(0.0)[0], 2.0);
        assert!(!q.is_constant());
    }
}

//! Scalar abstraction: every kernel is generic over a floating point type.

use num_traits::{Float, FromPrimitive};

/// Floating point scalar the laboratory works over (f32 or f64).
pub trait Real:
    Float + FromPrimitive + std::iter::Sum + std::fmt::Debug + std::fmt::Display + 'static
{
    /// Conversion from an f64 literal, for constants inside generic code.
    fn c(v: f64) -> Self {
        Self::from_f64(v).expect("constant not representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Floor used when a fixed decimal tolerance would drop below the
    /// resolution of the scalar type (relevant for f32 instantiations).
    fn tol_floor(fixed: f64) -> Self {
        let eps_based = Self::epsilon() * Self::c(64.0);
        let fixed = Self::c(fixed);
        if fixed > eps_based {
            fixed
        } else {
            eps_based
        }
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Euclidean norm of a small vector.
pub fn norm<R: Real>(v: &[R]) -> R {
    v.iter().map(|x| *x * *x).sum::<R>().sqrt()
}

/// Dot product.
pub fn dot<R: Real>(a: &[R], b: &[R]) -> R {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

/// Infinity norm.
pub fn norm_inf<R: Real>(v: &[R]) -> R {
    v.iter().fold(R::zero(), |m, x| m.max(x.abs()))
}

pub fn sub<R: Real>(a: &[R], b: &[R]) -> Vec<R> {
    a.iter().zip(b).map(|(x, y)| *x - *y).collect()
}

pub fn all_finite<R: Real>(v: &[R]) -> bool {
    v.iter().all(|x| x.is_finite())
}

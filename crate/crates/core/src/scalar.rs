use std::fmt::{Debug, Display, LowerExp};

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating point scalar usable by every algorithm in the crate: `f32` or `f64`.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + Debug + Display + LowerExp + Send + Sync {
    /// Converts an `f64` literal.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    /// A tolerance of `v`, floored at a small multiple of machine epsilon
    /// so that `f64` tolerances stay meaningful for `f32`.
    #[inline]
    fn tol(v: f64) -> Self {
        let floor = Self::default_epsilon() * Self::lit(64.0);
        let t = Self::lit(v);
        if t > floor {
            t
        } else {
            floor
        }
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

//! Orientation angles modulo π and measurement outcomes.
//!
//! Polarizer orientations and the hidden polarization λ are all defined
//! modulo π. An [`Angle`] always stores the canonical representative in
//! `[0, π)`; doubling (`2a`, `2a − 2λ`, ...) happens only inside formulas.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An orientation modulo π, stored as its representative in `[0, π)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Angle(f64);

impl Angle {
    pub const ZERO: Angle = Angle(0.0);

    /// Reduces `radians` into `[0, π)`. Rejects NaN and infinities.
    pub fn new(radians: f64) -> Result<Angle> {
        if !radians.is_finite() {
            return Err(Error::NonFiniteAngle(radians));
        }
        Ok(Angle::wrap(radians))
    }

    pub fn from_degrees(degrees: f64) -> Result<Angle> {
        Angle::new(degrees.to_radians())
    }

    /// Reduction for values already known to be finite.
    pub(crate) fn wrap(radians: f64) -> Angle {
        debug_assert!(radians.is_finite());
        let mut r = radians.rem_euclid(PI);
        // rem_euclid can round up to exactly π for tiny negative inputs.
        if r >= PI {
            r = 0.0;
        }
        Angle(r)
    }

    #[inline]
    pub fn radians(self) -> f64 {
        self.0
    }

    /// The angle rotated by `delta` radians, reduced again.
    pub fn rotated(self, delta: f64) -> Angle {
        Angle::wrap(self.0 + delta)
    }

    /// Distance on the mod-π circle, in `[0, π/2]`.
    pub fn distance(self, other: Angle) -> f64 {
        angular_distance(self, other)
    }
}

impl TryFrom<f64> for Angle {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Angle::new(value)
    }
}

impl From<Angle> for f64 {
    fn from(a: Angle) -> f64 {
        a.0
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Free-function form of [`Angle::new`].
pub fn reduce_angle(radians: f64) -> Result<Angle> {
    Angle::new(radians)
}

/// `min(|a − b|, π − |a − b|)`: the metric of the mod-π circle.
pub fn angular_distance(a: Angle, b: Angle) -> f64 {
    let diff = (a.0 - b.0).abs();
    diff.min(PI - diff).clamp(0.0, FRAC_PI_2)
}

/// A measurement result, `+1` or `−1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub enum Outcome {
    Plus,
    Minus,
}

impl Outcome {
    pub const BOTH: [Outcome; 2] = [Outcome::Plus, Outcome::Minus];

    pub fn value(self) -> i64 {
        match self {
            Outcome::Plus => 1,
            Outcome::Minus => -1,
        }
    }

    pub fn sign(self) -> f64 {
        self.value() as f64
    }

    pub fn flipped(self) -> Outcome {
        match self {
            Outcome::Plus => Outcome::Minus,
            Outcome::Minus => Outcome::Plus,
        }
    }

    /// `+1` for `x >= 0`, `−1` otherwise (so `sign(0) = +1`).
    pub fn sign_of(x: f64) -> Outcome {
        if x >= 0.0 {
            Outcome::Plus
        } else {
            Outcome::Minus
        }
    }
}

impl TryFrom<i64> for Outcome {
    type Error = Error;

    fn try_from(value: i64) -> Result<Self> {
        match value {
            1 => Ok(Outcome::Plus),
            -1 => Ok(Outcome::Minus),
            other => Err(Error::InvalidOutcome(other)),
        }
    }
}

impl From<Outcome> for i64 {
    fn from(o: Outcome) -> i64 {
        o.value()
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Plus => f.write_str("+1"),
            Outcome::Minus => f.write_str("-1"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_8;

    /// Brings `x` into `[0, π)` by repeated shifts of ±π.
    fn shift_oracle(mut x: f64) -> f64 {
        while x < 0.0 {
            x += PI;
        }
        while x >= PI {
            x -= PI;
        }
        x
    }

    #[test]
    fn reduce_examples() {
        assert_eq!(reduce_angle(0.0).unwrap().radians(), 0.0);
        assert!((reduce_angle(1.5 * PI).unwrap().radians() - FRAC_PI_2).abs() < 1e-15);
        let r = reduce_angle(-FRAC_PI_8).unwrap().radians();
        assert!((r - shift_oracle(-FRAC_PI_8)).abs() < 1e-15);
        assert!((r - 7.0 * FRAC_PI_8).abs() < 1e-15);
    }

    #[test]
    fn reduce_rejects_non_finite() {
        assert!(matches!(reduce_angle(f64::NAN), Err(Error::NonFiniteAngle(_))));
        assert!(reduce_angle(f64::INFINITY).is_err());
        assert!(reduce_angle(f64::NEG_INFINITY).is_err());
    }

    #[test]
    fn tiny_negative_does_not_land_on_pi() {
        let a = reduce_angle(-1e-300).unwrap();
        assert!(a.radians() < PI);
        assert!(a.radians() >= 0.0);
    }

    #[test]
    fn distance_examples() {
        let z = Angle::ZERO;
        assert_eq!(angular_distance(z, z), 0.0);
        let d = angular_distance(z, Angle::new(7.0 * FRAC_PI_8).unwrap());
        assert!((d - FRAC_PI_8).abs() < 1e-15);
        assert_eq!(angular_distance(z, Angle::new(FRAC_PI_2).unwrap()), FRAC_PI_2);
    }

    #[test]
    fn outcome_parsing() {
        assert_eq!(Outcome::try_from(1).unwrap(), Outcome::Plus);
        assert_eq!(Outcome::try_from(-1).unwrap(), Outcome::Minus);
        assert_eq!(Outcome::try_from(0), Err(Error::InvalidOutcome(0)));
        assert_eq!(Outcome::sign_of(0.0), Outcome::Plus);
        assert_eq!(Outcome::sign_of(-0.0), Outcome::Plus);
    }

    proptest! {
        #[test]
        fn reduction_is_idempotent(x in -1e6f64..1e6) {
            let once = Angle::new(x).unwrap();
            let twice = Angle::new(once.radians()).unwrap();
            prop_assert_eq!(once, twice);
            prop_assert!(once.radians() >= 0.0 && once.radians() < PI);
        }

        #[test]
        fn reduction_ignores_half_turns(x in -1e3f64..1e3) {
            let a = Angle::new(x).unwrap();
            let b = Angle::new(x + PI).unwrap();
            // equal on the circle up to rounding of the shifted input
            prop_assert!(angular_distance(a, b) < 1e-12);
        }

        #[test]
        fn distance_is_symmetric_and_bounded(x in 0.0f64..PI, y in 0.0f64..PI) {
            let (a, b) = (Angle::new(x).unwrap(), Angle::new(y).unwrap());
            let d = angular_distance(a, b);
            prop_assert_eq!(d, angular_distance(b, a));
            prop_assert!((0.0..=FRAC_PI_2).contains(&d));
        }
    }
}

//! Joint outcome distributions `p(A, B)` and the statistics read off them.

use serde::{Deserialize, Serialize};

use crate::angle::Outcome;
use crate::error::{Error, Result};
use crate::tolerance::{EXACT, ROUNDING_FLOOR};

/// One side of the experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Wing {
    A,
    B,
}

/// The four probabilities `p(A, B)` for `A, B = ±1`.
///
/// Cell order is `(+,+), (+,−), (−,+), (−,−)` throughout the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointDist {
    pub p_pp: f64,
    pub p_pm: f64,
    pub p_mp: f64,
    pub p_mm: f64,
}

impl JointDist {
    /// Validated constructor: entries in `[0, 1]`, summing to 1 within `1e-12`.
    pub fn new(p_pp: f64, p_pm: f64, p_mp: f64, p_mm: f64) -> Result<JointDist> {
        let j = JointDist { p_pp, p_pm, p_mp, p_mm };
        j.validate()?;
        Ok(j)
    }

    pub fn from_cells(cells: [f64; 4]) -> Result<JointDist> {
        JointDist::new(cells[0], cells[1], cells[2], cells[3])
    }

    /// Cleans up the output of a numerical evaluation: entries in
    /// `[-1e-14, 0)` are clamped to zero and the result is renormalized.
    /// Anything more negative, or a total that is not close to one, is an error.
    pub fn from_unnormalized(cells: [f64; 4], mass_tolerance: f64) -> Result<JointDist> {
        let mut cells = cells;
        for c in cells.iter_mut() {
            if !c.is_finite() {
                return Err(Error::InvalidJoint(format!("non-finite cell {c}")));
            }
            if *c < 0.0 {
                if *c < -ROUNDING_FLOOR {
                    return Err(Error::InvalidJoint(format!("negative cell {c}")));
                }
                *c = 0.0;
            }
        }
        let total: f64 = cells.iter().sum();
        if (total - 1.0).abs() > mass_tolerance {
            return Err(Error::InvalidJoint(format!("total mass {total}")));
        }
        for c in cells.iter_mut() {
            *c /= total;
        }
        JointDist::from_cells(cells)
    }

    pub fn uniform() -> JointDist {
        JointDist { p_pp: 0.25, p_pm: 0.25, p_mp: 0.25, p_mm: 0.25 }
    }

    pub fn cells(&self) -> [f64; 4] {
        [self.p_pp, self.p_pm, self.p_mp, self.p_mm]
    }

    pub fn get(&self, a: Outcome, b: Outcome) -> f64 {
        self.cells()[cell_index(a, b)]
    }

    pub fn validate(&self) -> Result<()> {
        let cells = self.cells();
        if let Some(bad) = cells.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidJoint(format!("entry {bad} outside [0, 1]")));
        }
        let total: f64 = cells.iter().sum();
        if (total - 1.0).abs() > EXACT {
            return Err(Error::InvalidJoint(format!("entries sum to {total}")));
        }
        Ok(())
    }

    /// `E = Σ A·B·p(A, B)`.
    pub fn correlator(&self) -> f64 {
        self.p_pp - self.p_pm - self.p_mp + self.p_mm
    }

    /// Probability of `+1` on the given wing.
    pub fn marginal(&self, wing: Wing) -> f64 {
        match wing {
            Wing::A => self.p_pp + self.p_pm,
            Wing::B => self.p_pp + self.p_mp,
        }
    }

    /// Total-variation distance `½ Σ |p − q|`.
    pub fn tv_distance(&self, other: &JointDist) -> f64 {
        0.5 * self
            .cells()
            .iter()
            .zip(other.cells())
            .map(|(p, q)| (p - q).abs())
            .sum::<f64>()
    }

    /// The same distribution with the roles of the wings exchanged.
    pub fn swapped(&self) -> JointDist {
        JointDist { p_pp: self.p_pp, p_pm: self.p_mp, p_mp: self.p_pm, p_mm: self.p_mm }
    }
}

/// Index of the `(a, b)` cell in [`JointDist::cells`] order.
pub fn cell_index(a: Outcome, b: Outcome) -> usize {
    match (a, b) {
        (Outcome::Plus, Outcome::Plus) => 0,
        (Outcome::Plus, Outcome::Minus) => 1,
        (Outcome::Minus, Outcome::Plus) => 2,
        (Outcome::Minus, Outcome::Minus) => 3,
    }
}

/// Outcome pair of cell `index`.
pub fn cell_outcomes(index: usize) -> (Outcome, Outcome) {
    match index {
        0 => (Outcome::Plus, Outcome::Plus),
        1 => (Outcome::Plus, Outcome::Minus),
        2 => (Outcome::Minus, Outcome::Plus),
        3 => (Outcome::Minus, Outcome::Minus),
        _ => panic!("cell index {index} out of range"),
    }
}

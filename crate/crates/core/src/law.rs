//! Setting-conditioned distributions of the hidden variable λ.
//!
//! A law is either a finite mixture of point masses or a piecewise-constant
//! density over `[0, π)`. Both families integrate exactly against the
//! trigonometric response rules, so nothing here is ever approximated by
//! narrow bumps or sampled grids.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::angle::{angular_distance, Angle};
use crate::error::{Error, Result};
use crate::tolerance::{ATOM_MERGE, BREAKPOINT_MERGE, EXACT, INTEGRATED};

/// A point mass of λ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub position: Angle,
    pub weight: f64,
}

/// A constant-density piece `[start, end)` of a continuous law, in radians
/// with `0 <= start < end <= π`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub density: f64,
}

impl Segment {
    pub fn len(&self) -> f64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn mass(&self) -> f64 {
        self.density * self.len()
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.start + self.end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LawKind {
    Atomic,
    PiecewiseDensity,
}

/// Distribution of λ for one choice of settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LambdaLaw {
    /// Point masses at distinct canonical positions, sorted by position.
    Atomic(Vec<Atom>),
    /// Constant-density segments partitioning `[0, π)`, sorted.
    PiecewiseDensity(Vec<Segment>),
}

impl LambdaLaw {
    /// Builds an atomic law, merging positions that coincide on the circle.
    pub fn atomic<I>(atoms: I) -> Result<LambdaLaw>
    where
        I: IntoIterator<Item = (Angle, f64)>,
    {
        let mut merged: Vec<Atom> = Vec::new();
        for (position, weight) in atoms {
            if !(weight.is_finite() && weight >= 0.0) {
                return Err(Error::InvalidLaw(format!("atom weight {weight}")));
            }
            match merged
                .iter_mut()
                .find(|m| angular_distance(m.position, position) < ATOM_MERGE)
            {
                Some(existing) => existing.weight += weight,
                None => merged.push(Atom { position, weight }),
            }
        }
        if merged.is_empty() {
            return Err(Error::InvalidLaw("no atoms".into()));
        }
        let total: f64 = merged.iter().map(|a| a.weight).sum();
        if (total - 1.0).abs() > EXACT {
            return Err(Error::InvalidLaw(format!("atom weights sum to {total}")));
        }
        merged.sort_by(|x, y| x.position.radians().total_cmp(&y.position.radians()));
        Ok(LambdaLaw::Atomic(merged))
    }

    /// Builds a continuous law from segments that partition `[0, π)`.
    ///
    /// Adjacent segments of equal density are merged and empty ones dropped.
    pub fn piecewise(segments: Vec<Segment>) -> Result<LambdaLaw> {
        let mut cleaned: Vec<Segment> = Vec::with_capacity(segments.len());
        let mut cursor = 0.0;
        for s in segments {
            if !(s.density.is_finite() && s.density >= 0.0) {
                return Err(Error::InvalidLaw(format!("density {}", s.density)));
            }
            if (s.start - cursor).abs() > BREAKPOINT_MERGE.max(EXACT) {
                return Err(Error::InvalidLaw(format!(
                    "segments leave a gap or overlap at {cursor}"
                )));
            }
            if s.end < s.start {
                return Err(Error::InvalidLaw(format!("segment [{}, {}) reversed", s.start, s.end)));
            }
            cursor = s.end;
            if s.end - s.start <= BREAKPOINT_MERGE {
                continue;
            }
            match cleaned.last_mut() {
                Some(last) if last.density == s.density => last.end = s.end,
                _ => cleaned.push(s),
            }
        }
        if (cursor - PI).abs() > EXACT {
            return Err(Error::InvalidLaw(format!("segments end at {cursor}, not π")));
        }
        if cleaned.is_empty() {
            return Err(Error::InvalidLaw("no segments".into()));
        }
        cleaned[0].start = 0.0;
        if let Some(last) = cleaned.last_mut() {
            last.end = PI;
        }
        let law = LambdaLaw::PiecewiseDensity(cleaned);
        let mass = law.mass();
        if (mass - 1.0).abs() > INTEGRATED {
            return Err(Error::InvalidLaw(format!("total mass {mass}")));
        }
        Ok(law)
    }

    /// Uniform density `1/π` on `[0, π)`.
    pub fn uniform() -> LambdaLaw {
        LambdaLaw::PiecewiseDensity(vec![Segment { start: 0.0, end: PI, density: 1.0 / PI }])
    }

    /// A single point mass.
    pub fn point(position: Angle) -> LambdaLaw {
        LambdaLaw::Atomic(vec![Atom { position, weight: 1.0 }])
    }

    pub fn kind(&self) -> LawKind {
        match self {
            LambdaLaw::Atomic(_) => LawKind::Atomic,
            LambdaLaw::PiecewiseDensity(_) => LawKind::PiecewiseDensity,
        }
    }

    /// Total probability mass.
    pub fn mass(&self) -> f64 {
        match self {
            LambdaLaw::Atomic(atoms) => atoms.iter().map(|a| a.weight).sum(),
            LambdaLaw::PiecewiseDensity(segs) => segs.iter().map(Segment::mass).sum(),
        }
    }

    /// Density at `lambda` (continuous laws only; `None` for atomic laws).
    pub fn density_at(&self, lambda: Angle) -> Option<f64> {
        match self {
            LambdaLaw::Atomic(_) => None,
            LambdaLaw::PiecewiseDensity(segs) => {
                let x = lambda.radians();
                let idx = segs.partition_point(|s| s.end <= x).min(segs.len() - 1);
                Some(segs[idx].density)
            }
        }
    }

    /// Weight of the atom at `position`, zero if there is none.
    pub fn weight_at(&self, position: Angle) -> Option<f64> {
        match self {
            LambdaLaw::Atomic(atoms) => Some(
                atoms
                    .iter()
                    .filter(|a| angular_distance(a.position, position) < ATOM_MERGE)
                    .map(|a| a.weight)
                    .sum(),
            ),
            LambdaLaw::PiecewiseDensity(_) => None,
        }
    }

    /// Interior segment boundaries of a continuous law (empty for atomic laws).
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            LambdaLaw::Atomic(_) => Vec::new(),
            LambdaLaw::PiecewiseDensity(segs) => segs.iter().skip(1).map(|s| s.start).collect(),
        }
    }

    /// True if both laws describe the same distribution within `tol`.
    pub fn approx_eq(&self, other: &LambdaLaw, tol: f64) -> bool {
        match (self, other) {
            (LambdaLaw::Atomic(x), LambdaLaw::Atomic(y)) => {
                x.len() == y.len()
                    && x.iter().zip(y).all(|(p, q)| {
                        angular_distance(p.position, q.position) < ATOM_MERGE
                            && (p.weight - q.weight).abs() <= tol
                    })
            }
            (LambdaLaw::PiecewiseDensity(_), LambdaLaw::PiecewiseDensity(_)) => {
                let mut cuts = self.breakpoints();
                cuts.extend(other.breakpoints());
                refine(&cuts).windows(2).all(|w| {
                    let mid = Angle::wrap(0.5 * (w[0] + w[1]));
                    (self.density_at(mid).unwrap() - other.density_at(mid).unwrap()).abs() <= tol
                })
            }
            _ => false,
        }
    }
}

/// Sorted, deduplicated partition points of `[0, π]` including both ends.
pub fn refine(cuts: &[f64]) -> Vec<f64> {
    let mut points: Vec<f64> = cuts
        .iter()
        .copied()
        .filter(|x| *x > BREAKPOINT_MERGE && *x < PI - BREAKPOINT_MERGE)
        .collect();
    points.push(0.0);
    points.push(PI);
    points.sort_by(f64::total_cmp);
    points.dedup_by(|later, earlier| (*later - *earlier).abs() <= BREAKPOINT_MERGE);
    // keep π as the last point even if a cut within the merge radius replaced it
    if let Some(last) = points.last_mut() {
        *last = PI;
    }
    points
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn ang(x: f64) -> Angle {
        Angle::new(x).unwrap()
    }

    #[test]
    fn atoms_merge_across_the_seam() {
        let law = LambdaLaw::atomic([(ang(0.0), 0.5), (ang(PI - 1e-15), 0.5)]).unwrap();
        match law {
            LambdaLaw::Atomic(atoms) => {
                assert_eq!(atoms.len(), 1);
                assert!((atoms[0].weight - 1.0).abs() < 1e-15);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn atomic_weights_must_sum_to_one() {
        assert!(LambdaLaw::atomic([(ang(0.0), 0.5)]).is_err());
        assert!(LambdaLaw::atomic([(ang(0.0), -0.5), (ang(1.0), 1.5)]).is_err());
        assert!(LambdaLaw::atomic(std::iter::empty()).is_err());
    }

    #[test]
    fn piecewise_validation() {
        let half = |d0: f64, d1: f64| {
            vec![
                Segment { start: 0.0, end: FRAC_PI_2, density: d0 },
                Segment { start: FRAC_PI_2, end: PI, density: d1 },
            ]
        };
        assert!(LambdaLaw::piecewise(half(1.0 / PI, 1.0 / PI)).is_ok());
        // mass 1 but uneven
        assert!(LambdaLaw::piecewise(half(0.5 / PI, 1.5 / PI)).is_ok());
        assert!(LambdaLaw::piecewise(half(1.0 / PI, 2.0 / PI)).is_err());
        assert!(LambdaLaw::piecewise(half(-1.0 / PI, 3.0 / PI)).is_err());
        let gap = vec![
            Segment { start: 0.0, end: 1.0, density: 1.0 / PI },
            Segment { start: 1.1, end: PI, density: 1.0 / PI },
        ];
        assert!(LambdaLaw::piecewise(gap).is_err());
    }

    #[test]
    fn equal_neighbours_merge() {
        let law = LambdaLaw::piecewise(vec![
            Segment { start: 0.0, end: 1.0, density: 1.0 / PI },
            Segment { start: 1.0, end: PI, density: 1.0 / PI },
        ])
        .unwrap();
        assert!(law.approx_eq(&LambdaLaw::uniform(), 0.0));
        assert!(law.breakpoints().is_empty());
    }

    #[test]
    fn density_lookup() {
        let law = LambdaLaw::piecewise(vec![
            Segment { start: 0.0, end: FRAC_PI_2, density: 0.5 / PI },
            Segment { start: FRAC_PI_2, end: PI, density: 1.5 / PI },
        ])
        .unwrap();
        assert_eq!(law.density_at(ang(0.1)), Some(0.5 / PI));
        assert_eq!(law.density_at(ang(FRAC_PI_2)), Some(1.5 / PI));
        assert_eq!(law.density_at(ang(3.0)), Some(1.5 / PI));
        assert_eq!(law.weight_at(ang(0.0)), None);
    }

    #[test]
    fn refine_dedups_and_bounds() {
        let r = refine(&[1.0, 1.0 + 1e-16, 0.0, PI, 2.0, -0.0]);
        assert_eq!(r, vec![0.0, 1.0, 2.0, PI]);
    }
}

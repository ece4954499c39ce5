//! Generic adaptive quadrature of the combination integral.
//!
//! This path never touches the closed-form antiderivatives in
//! [`crate::evaluator`]: it samples `p(λ)·p(A|a,λ)·p(B|b,λ)` pointwise and
//! integrates with adaptive Simpson between breakpoint hints. It is slow and
//! only used to cross-check the exact evaluator.

use crate::angle::Angle;
use crate::error::Result;
use crate::evaluator::integration_breakpoints;
use crate::joint::{cell_outcomes, JointDist};
use crate::law::LambdaLaw;
use crate::model::HiddenVariableModel;

const MAX_DEPTH: u32 = 48;

/// Adaptive Simpson integration of `f` over `[lo, hi]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, tol: f64) -> f64 {
    let mid = 0.5 * (lo + hi);
    let (flo, fmid, fhi) = (f(lo), f(mid), f(hi));
    let whole = simpson(lo, hi, flo, fmid, fhi);
    recurse(f, lo, hi, flo, fmid, fhi, whole, tol, MAX_DEPTH)
}

fn simpson(lo: f64, hi: f64, flo: f64, fmid: f64, fhi: f64) -> f64 {
    (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    lo: f64,
    hi: f64,
    flo: f64,
    fmid: f64,
    fhi: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let mid = 0.5 * (lo + hi);
    let (lm, rm) = (0.5 * (lo + mid), 0.5 * (mid + hi));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(lo, mid, flo, flm, fmid);
    let right = simpson(mid, hi, fmid, frm, fhi);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    recurse(f, lo, mid, flo, flm, fmid, left, 0.5 * tol, depth - 1)
        + recurse(f, mid, hi, fmid, frm, fhi, right, 0.5 * tol, depth - 1)
}

/// Joint distribution by pointwise quadrature. Atomic laws have no integral
/// to approximate and are summed directly.
pub fn combine_by_quadrature(
    model: &HiddenVariableModel,
    a: Angle,
    b: Angle,
    tol: f64,
) -> Result<JointDist> {
    let law = model.lambda_law(a, b);
    let mut cells = [0.0; 4];
    match &law {
        LambdaLaw::Atomic(atoms) => {
            for atom in atoms {
                for (i, cell) in cells.iter_mut().enumerate() {
                    let (oa, ob) = cell_outcomes(i);
                    *cell += atom.weight
                        * model.prob_a(a, b, atom.position, oa)
                        * model.prob_b(a, b, atom.position, ob);
                }
            }
        }
        LambdaLaw::PiecewiseDensity(_) => {
            let hints = integration_breakpoints(model, &law, a, b);
            for (i, cell) in cells.iter_mut().enumerate() {
                let (oa, ob) = cell_outcomes(i);
                for w in hints.windows(2) {
                    let (lo, hi) = (w[0], w[1]);
                    // the integrand is evaluated strictly inside each piece
                    let mid = Angle::wrap(0.5 * (lo + hi));
                    let density = law.density_at(mid).expect("piecewise law");
                    let integrand = |x: f64| {
                        let x = x.clamp(lo + (hi - lo) * 1e-12, hi - (hi - lo) * 1e-12);
                        let lambda = Angle::wrap(x);
                        density * model.prob_a(a, b, lambda, oa) * model.prob_b(a, b, lambda, ob)
                    };
                    *cell += adaptive_simpson(&integrand, lo, hi, tol);
                }
            }
        }
    }
    JointDist::from_unnormalized(cells, crate::tolerance::INTEGRATED)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn integrates_polynomials_and_trig() {
        let cube = |x: f64| x * x * x;
        assert!((adaptive_simpson(&cube, 0.0, 2.0, 1e-12) - 4.0).abs() < 1e-12);
        let wave = |x: f64| (3.0 * x).cos().powi(2);
        assert!((adaptive_simpson(&wave, 0.0, PI, 1e-12) - PI / 2.0).abs() < 1e-11);
    }

    #[test]
    fn agrees_with_exact_evaluator() {
        for model in crate::model::Model::builtins() {
            let Some(m) = model.hidden() else { continue };
            for (a, b) in [(0.0, 0.5), (1.2, 2.9), (0.7, 0.7)] {
                let (a, b) = (Angle::new(a).unwrap(), Angle::new(b).unwrap());
                let exact = crate::evaluator::combine_hidden(m, a, b).unwrap();
                let quad = combine_by_quadrature(m, a, b, 1e-13).unwrap();
                assert!(exact.tv_distance(&quad) < 1e-10, "{} {a} {b}", m.name());
            }
        }
    }
}

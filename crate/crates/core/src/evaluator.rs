//! Exact evaluation of `p(A, B) = ∫ dλ p(λ) p(A | a, λ) p(B | b, λ)`.
//!
//! Atomic laws reduce to a finite weighted sum. For piecewise-constant laws
//! the λ axis is cut at every density breakpoint and at every sign boundary
//! `s ± π/4` of a deterministic response; on each resulting interval every
//! response factor has the form `α + β cos(2λ − 2s)`, so the integrand is a
//! trigonometric polynomial with a closed-form antiderivative.

use std::f64::consts::FRAC_PI_4;

use crate::angle::{Angle, Outcome};
use crate::error::Result;
use crate::joint::{cell_outcomes, JointDist, Wing};
use crate::law::{refine, LambdaLaw};
use crate::model::{qm_joint, HiddenVariableModel, Model, ResponseLaw, ResponseRule};
use crate::tolerance::INTEGRATED;

/// Exact joint distribution of `model` at settings `(a, b)`.
pub fn combine(model: &Model, a: Angle, b: Angle) -> Result<JointDist> {
    match model {
        Model::Quantum => Ok(qm_joint(a, b)),
        Model::HiddenVariable(m) => combine_hidden(m, a, b),
    }
}

/// Exact joint distribution of a hidden-variable model.
pub fn combine_hidden(model: &HiddenVariableModel, a: Angle, b: Angle) -> Result<JointDist> {
    let law = model.lambda_law(a, b);
    let cells = match &law {
        LambdaLaw::Atomic(atoms) => {
            let mut cells = [0.0; 4];
            for atom in atoms {
                for (i, cell) in cells.iter_mut().enumerate() {
                    let (oa, ob) = cell_outcomes(i);
                    *cell += atom.weight
                        * model.prob_a(a, b, atom.position, oa)
                        * model.prob_b(a, b, atom.position, ob);
                }
            }
            cells
        }
        LambdaLaw::PiecewiseDensity(_) => {
            let sa = model.response_a().effective_setting(a, b);
            let sb = model.response_b().effective_setting(b, a);
            let cuts = integration_breakpoints(model, &law, a, b);
            let mut cells = [0.0; 4];
            for w in cuts.windows(2) {
                let (lo, hi) = (w[0], w[1]);
                let mid = Angle::wrap(0.5 * (lo + hi));
                let density = law.density_at(mid).expect("piecewise law");
                if density == 0.0 {
                    continue;
                }
                for (i, cell) in cells.iter_mut().enumerate() {
                    let (oa, ob) = cell_outcomes(i);
                    let fa = TrigFactor::of(model.response_a(), sa, mid, oa);
                    let fb = TrigFactor::of(model.response_b(), sb, mid, ob);
                    *cell += density * fa.integrate_product(&fb, lo, hi);
                }
            }
            cells
        }
    };
    JointDist::from_unnormalized(cells, INTEGRATED)
}

/// Cut points of `[0, π]` between which the integrand is a single smooth
/// trigonometric polynomial.
pub fn integration_breakpoints(
    model: &HiddenVariableModel,
    law: &LambdaLaw,
    a: Angle,
    b: Angle,
) -> Vec<f64> {
    let mut cuts = law.breakpoints();
    for (rule, setting) in [
        (model.response_a(), model.response_a().effective_setting(a, b)),
        (model.response_b(), model.response_b().effective_setting(b, a)),
    ] {
        if rule.law == ResponseLaw::Sign {
            cuts.push(setting.rotated(FRAC_PI_4).radians());
            cuts.push(setting.rotated(-FRAC_PI_4).radians());
        }
    }
    refine(&cuts)
}

/// `α + β cos(2λ − 2s)`, one response factor on one interval.
#[derive(Debug, Clone, Copy)]
struct TrigFactor {
    alpha: f64,
    beta: f64,
    phase: f64,
}

impl TrigFactor {
    /// The factor for `outcome` of a response rule applied at `setting`;
    /// `probe` is any point of the interval (used for the sign responses,
    /// which are constant there).
    fn of(rule: ResponseRule, setting: Angle, probe: Angle, outcome: Outcome) -> TrigFactor {
        match rule.law {
            ResponseLaw::Malus => TrigFactor {
                alpha: 0.5,
                beta: 0.5 * outcome.sign(),
                phase: 2.0 * setting.radians(),
            },
            ResponseLaw::Sign => TrigFactor {
                alpha: crate::model::hall_response(setting, probe, outcome),
                beta: 0.0,
                phase: 0.0,
            },
        }
    }

    /// `∫_lo^hi self(λ)·other(λ) dλ` in closed form.
    fn integrate_product(&self, other: &TrigFactor, lo: f64, hi: f64) -> f64 {
        let len = hi - lo;
        let mut total = self.alpha * other.alpha * len;
        if other.beta != 0.0 {
            total += self.alpha * other.beta * int_cos2(other.phase, lo, hi);
        }
        if self.beta != 0.0 {
            total += other.alpha * self.beta * int_cos2(self.phase, lo, hi);
        }
        if self.beta != 0.0 && other.beta != 0.0 {
            // cos x cos y = ½[cos(x − y) + cos(x + y)]
            let steady = (other.phase - self.phase).cos() * len;
            let sum_phase = self.phase + other.phase;
            let oscillating = ((4.0 * hi - sum_phase).sin() - (4.0 * lo - sum_phase).sin()) / 4.0;
            total += self.beta * other.beta * 0.5 * (steady + oscillating);
        }
        total
    }
}

/// `∫_lo^hi cos(2λ − phase) dλ`.
fn int_cos2(phase: f64, lo: f64, hi: f64) -> f64 {
    ((2.0 * hi - phase).sin() - (2.0 * lo - phase).sin()) / 2.0
}

/// `E = p₊₊ − p₊₋ − p₋₊ + p₋₋`.
pub fn correlator(j: &JointDist) -> f64 {
    j.correlator()
}

/// Probability of `+1` on `wing`.
pub fn marginal(j: &JointDist, wing: Wing) -> f64 {
    j.marginal(wing)
}

/// `½ Σ |p − q|` over the four cells.
pub fn tv_distance(j1: &JointDist, j2: &JointDist) -> f64 {
    j1.tv_distance(j2)
}

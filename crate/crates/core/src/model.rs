//! The reference and toy models.
//!
//! Four models are built in:
//!
//! * `qm`: the quantum singlet prediction for photon polarizations,
//!   `p(A, B) = ¼[1 + AB cos(2a − 2b)]`, with no hidden variable at all.
//! * `simplistic`: λ sits with equal weight on `a`, `a + π/2`, `b`,
//!   `b + π/2`, and each photon passes its analyzer by Malus' law.
//! * `hall`: a piecewise-constant λ density depending on `(a, b)` and
//!   deterministic responses `A = sign cos(2a − 2λ)`.
//! * `baseline`: uniform λ independent of the settings with the same
//!   deterministic responses: a Bell-local, measurement-independent model.
//!
//! A fifth constructor, [`Model::signaling`], builds a deliberately
//! signaling model whose wing-A response peeks at the remote setting. It
//! exists to prove that the no-signaling detectors can fire.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::angle::{angular_distance, Angle, Outcome};
use crate::error::{Error, Result};
use crate::joint::JointDist;
use crate::law::{refine, LambdaLaw, Segment};

/// Quantum singlet joint distribution for analyzer angles `a`, `b`.
pub fn qm_joint(a: Angle, b: Angle) -> JointDist {
    let c = (2.0 * (a.radians() - b.radians())).cos();
    let same = 0.25 * (1.0 + c);
    let diff = 0.25 * (1.0 - c);
    JointDist { p_pp: same, p_pm: diff, p_mp: diff, p_mm: same }
}

/// Malus' law: `cos²(λ − s)` for `+1`, `sin²(λ − s)` for `−1`.
///
/// The `−1` branch is computed as the complement of the `+1` branch so the
/// two always add up to exactly one.
pub fn malus_prob(setting: Angle, lambda: Angle, outcome: Outcome) -> f64 {
    let pass = malus_pass(lambda.radians() - setting.radians());
    match outcome {
        Outcome::Plus => pass,
        Outcome::Minus => 1.0 - pass,
    }
}

#[inline]
fn malus_pass(delta: f64) -> f64 {
    (0.5 * (1.0 + (2.0 * delta).cos())).clamp(0.0, 1.0)
}

/// λ-law of the simplistic model: weight ¼ at each of `a`, `a + π/2`,
/// `b`, `b + π/2`, coinciding positions merged.
pub fn simplistic_lambda_law(a: Angle, b: Angle) -> LambdaLaw {
    LambdaLaw::atomic([
        (a, 0.25),
        (a.rotated(FRAC_PI_2), 0.25),
        (b, 0.25),
        (b.rotated(FRAC_PI_2), 0.25),
    ])
    .expect("four quarter-weight atoms form a valid law")
}

/// Deterministic outcome `sign cos(2s − 2λ)`, with `sign(0) = +1`.
///
/// Equivalently `+1` iff λ lies within π/4 of the setting (boundary included).
pub fn hall_ahat(setting: Angle, lambda: Angle) -> Outcome {
    if angular_distance(setting, lambda) <= FRAC_PI_4 {
        Outcome::Plus
    } else {
        Outcome::Minus
    }
}

/// `z = (2/π)·|2a − 2b|`, with `|2a − 2b|` reduced to `[0, π]`; lies in `[0, 2]`.
pub fn hall_z(a: Angle, b: Angle) -> f64 {
    (2.0 / PI) * (2.0 * angular_distance(a, b))
}

/// Hall's λ density:
///
/// ```text
///            1   1 + ÂB̂ cos(2a − 2b)
/// p(λ) =    ─── ───────────────────
///            π    1 + ÂB̂ (1 − z)
/// ```
///
/// constant on every interval between the breakpoints `a ± π/4`, `b ± π/4`.
/// On the `ÂB̂ = +1` region (measure `π − 2d`) the numerator is `2cos²d` and
/// the denominator `2 − z`; on the `ÂB̂ = −1` region (measure `2d`) they are
/// `2sin²d` and `z`. At `d = 0` or `d = π/2` one region is empty, which is
/// why the denominator never vanishes where it matters.
pub fn hall_lambda_law(a: Angle, b: Angle) -> LambdaLaw {
    let d = angular_distance(a, b);
    let z = hall_z(a, b);
    let agree = 2.0 * d.cos().powi(2) / (PI * (2.0 - z));
    let disagree = 2.0 * d.sin().powi(2) / (PI * z);
    let cuts = [
        a.rotated(FRAC_PI_4).radians(),
        a.rotated(-FRAC_PI_4).radians(),
        b.rotated(FRAC_PI_4).radians(),
        b.rotated(-FRAC_PI_4).radians(),
    ];
    let segments = refine(&cuts)
        .windows(2)
        .map(|w| {
            let mid = Angle::wrap(0.5 * (w[0] + w[1]));
            let same = hall_ahat(a, mid) == hall_ahat(b, mid);
            let density = match (same, z) {
                (true, z) if z < 2.0 => agree,
                (false, z) if z > 0.0 => disagree,
                // only reachable on an interval of zero measure
                _ => 0.0,
            };
            Segment { start: w[0], end: w[1], density }
        })
        .collect();
    LambdaLaw::piecewise(segments).expect("Hall density is normalized")
}

/// Deterministic response `δ(A, Â)`.
pub fn hall_response(setting: Angle, lambda: Angle, outcome: Outcome) -> f64 {
    if hall_ahat(setting, lambda) == outcome {
        1.0
    } else {
        0.0
    }
}

/// How one wing turns (setting, λ) into an outcome probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResponseLaw {
    /// Malus' law, `cos²(λ − s)`.
    Malus,
    /// Deterministic `Â = sign cos(2s − 2λ)`.
    Sign,
}

/// A response law applied at an effective setting `local + coupling · remote`.
///
/// Every physical model has `remote_coupling = 0`; a nonzero coupling makes
/// the wing's marginal depend on the far setting, i.e. it signals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseRule {
    pub law: ResponseLaw,
    pub remote_coupling: f64,
}

impl ResponseRule {
    pub const MALUS: ResponseRule = ResponseRule { law: ResponseLaw::Malus, remote_coupling: 0.0 };
    pub const SIGN: ResponseRule = ResponseRule { law: ResponseLaw::Sign, remote_coupling: 0.0 };

    pub fn effective_setting(&self, local: Angle, remote: Angle) -> Angle {
        if self.remote_coupling == 0.0 {
            local
        } else {
            local.rotated(self.remote_coupling * remote.radians())
        }
    }

    pub fn prob(&self, local: Angle, remote: Angle, lambda: Angle, outcome: Outcome) -> f64 {
        let s = self.effective_setting(local, remote);
        match self.law {
            ResponseLaw::Malus => malus_prob(s, lambda, outcome),
            ResponseLaw::Sign => hall_response(s, lambda, outcome),
        }
    }
}

/// Where a model's λ-law comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LambdaRule {
    Simplistic,
    Hall,
    /// The same law for every pair of settings.
    Fixed(LambdaLaw),
}

impl LambdaRule {
    pub fn law(&self, a: Angle, b: Angle) -> LambdaLaw {
        match self {
            LambdaRule::Simplistic => simplistic_lambda_law(a, b),
            LambdaRule::Hall => hall_lambda_law(a, b),
            LambdaRule::Fixed(law) => law.clone(),
        }
    }
}

/// A λ-law plus one response rule per wing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenVariableModel {
    name: String,
    lambda_rule: LambdaRule,
    response_a: ResponseRule,
    response_b: ResponseRule,
    measurement_independent: bool,
}

impl HiddenVariableModel {
    /// A measurement-independent model must use a [`LambdaRule::Fixed`] law.
    pub fn new(
        name: impl Into<String>,
        lambda_rule: LambdaRule,
        response_a: ResponseRule,
        response_b: ResponseRule,
        measurement_independent: bool,
    ) -> Result<HiddenVariableModel> {
        if measurement_independent && !matches!(lambda_rule, LambdaRule::Fixed(_)) {
            return Err(Error::InvalidArgument(
                "a measurement-independent model needs a settings-independent λ-law".into(),
            ));
        }
        for r in [response_a, response_b] {
            if !r.remote_coupling.is_finite() {
                return Err(Error::InvalidArgument("remote coupling must be finite".into()));
            }
        }
        Ok(HiddenVariableModel {
            name: name.into(),
            lambda_rule,
            response_a,
            response_b,
            measurement_independent,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn lambda_rule(&self) -> &LambdaRule {
        &self.lambda_rule
    }

    pub fn response_a(&self) -> ResponseRule {
        self.response_a
    }

    pub fn response_b(&self) -> ResponseRule {
        self.response_b
    }

    pub fn is_measurement_independent(&self) -> bool {
        self.measurement_independent
    }

    pub fn lambda_law(&self, a: Angle, b: Angle) -> LambdaLaw {
        self.lambda_rule.law(a, b)
    }

    /// `p(A | a, λ)` (the remote setting only matters for signaling rules).
    pub fn prob_a(&self, a: Angle, b: Angle, lambda: Angle, outcome: Outcome) -> f64 {
        self.response_a.prob(a, b, lambda, outcome)
    }

    /// `p(B | b, λ)`.
    pub fn prob_b(&self, a: Angle, b: Angle, lambda: Angle, outcome: Outcome) -> f64 {
        self.response_b.prob(b, a, lambda, outcome)
    }
}

/// Uniform λ with the deterministic sign responses: local and
/// measurement independent, so it cannot reach the quantum correlations.
pub fn baseline_local_model() -> HiddenVariableModel {
    HiddenVariableModel::new(
        "baseline",
        LambdaRule::Fixed(LambdaLaw::uniform()),
        ResponseRule::SIGN,
        ResponseRule::SIGN,
        true,
    )
    .expect("baseline model is well formed")
}

/// Any model the evaluator knows how to combine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Model {
    /// Quantum singlet statistics, no hidden variable.
    Quantum,
    HiddenVariable(HiddenVariableModel),
}

impl Model {
    pub const BUILTIN_NAMES: [&'static str; 4] = ["qm", "simplistic", "hall", "baseline"];

    pub fn quantum() -> Model {
        Model::Quantum
    }

    pub fn simplistic() -> Model {
        Model::HiddenVariable(
            HiddenVariableModel::new(
                "simplistic",
                LambdaRule::Simplistic,
                ResponseRule::MALUS,
                ResponseRule::MALUS,
                false,
            )
            .expect("simplistic model is well formed"),
        )
    }

    pub fn hall() -> Model {
        Model::HiddenVariable(
            HiddenVariableModel::new(
                "hall",
                LambdaRule::Hall,
                ResponseRule::SIGN,
                ResponseRule::SIGN,
                false,
            )
            .expect("hall model is well formed"),
        )
    }

    pub fn baseline() -> Model {
        Model::HiddenVariable(baseline_local_model())
    }

    /// λ fixed at 0, Malus responses, with wing A analyzing at
    /// `a + coupling · b`. Signals whenever `coupling != 0`.
    pub fn signaling(coupling: f64) -> Result<Model> {
        Ok(Model::HiddenVariable(HiddenVariableModel::new(
            "signaling",
            LambdaRule::Fixed(LambdaLaw::point(Angle::ZERO)),
            ResponseRule { law: ResponseLaw::Malus, remote_coupling: coupling },
            ResponseRule::MALUS,
            true,
        )?))
    }

    /// The four built-in models in canonical order.
    pub fn builtins() -> Vec<Model> {
        vec![Model::quantum(), Model::simplistic(), Model::hall(), Model::baseline()]
    }

    /// Resolves a registered model name. `signaling` takes its coupling
    /// from `coupling` (default 1).
    pub fn by_name(name: &str, coupling: Option<f64>) -> Result<Model> {
        match name {
            "qm" | "quantum" => Ok(Model::quantum()),
            "simplistic" => Ok(Model::simplistic()),
            "hall" => Ok(Model::hall()),
            "baseline" | "baseline_local" => Ok(Model::baseline()),
            "signaling" => Model::signaling(coupling.unwrap_or(1.0)),
            other => Err(Error::UnknownModel(other.to_string())),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Model::Quantum => "qm",
            Model::HiddenVariable(m) => m.name(),
        }
    }

    pub fn hidden(&self) -> Option<&HiddenVariableModel> {
        match self {
            Model::Quantum => None,
            Model::HiddenVariable(m) => Some(m),
        }
    }

    pub fn is_measurement_independent(&self) -> bool {
        self.hidden().is_some_and(HiddenVariableModel::is_measurement_independent)
    }

    /// λ-law at `(a, b)`, or an error for the quantum model.
    pub fn lambda_law(&self, a: Angle, b: Angle) -> Result<LambdaLaw> {
        self.hidden()
            .map(|m| m.lambda_law(a, b))
            .ok_or_else(|| Error::NoHiddenVariable(self.name().to_string()))
    }

    /// Exact joint distribution at `(a, b)`.
    pub fn joint(&self, a: Angle, b: Angle) -> Result<JointDist> {
        crate::evaluator::combine(self, a, b)
    }

    /// Exact correlator `E(a, b)`.
    pub fn correlator(&self, a: Angle, b: Angle) -> Result<f64> {
        Ok(self.joint(a, b)?.correlator())
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::law::LawKind;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_8;

    fn ang(x: f64) -> Angle {
        Angle::new(x).unwrap()
    }

    fn atoms(law: &LambdaLaw) -> Vec<(f64, f64)> {
        match law {
            LambdaLaw::Atomic(atoms) => atoms.iter().map(|a| (a.position.radians(), a.weight)).collect(),
            _ => panic!("expected atomic law"),
        }
    }

    fn segments(law: &LambdaLaw) -> &[Segment] {
        match law {
            LambdaLaw::PiecewiseDensity(s) => s,
            _ => panic!("expected piecewise law"),
        }
    }

    #[test]
    fn qm_joint_examples() {
        let j = qm_joint(ang(0.0), ang(0.0));
        assert_eq!(j.cells(), [0.5, 0.0, 0.0, 0.5]);
        let j = qm_joint(ang(0.0), ang(FRAC_PI_4));
        for c in j.cells() {
            assert!((c - 0.25).abs() < 1e-16);
        }
        // ¼(1 ± cos(π/4)), evaluated by hand: 0.42677669529663687, 0.07322330470336313
        let j = qm_joint(ang(0.0), ang(FRAC_PI_8));
        assert!((j.p_pp - 0.426_776_695_296_636_9).abs() < 1e-12);
        assert!((j.p_mm - 0.426_776_695_296_636_9).abs() < 1e-12);
        assert!((j.p_pm - 0.073_223_304_703_363_1).abs() < 1e-12);
        assert!((j.p_mp - 0.073_223_304_703_363_1).abs() < 1e-12);
    }

    #[test]
    fn malus_examples() {
        assert_eq!(malus_prob(ang(0.0), ang(0.0), Outcome::Plus), 1.0);
        assert!((malus_prob(ang(0.0), ang(FRAC_PI_4), Outcome::Plus) - 0.5).abs() < 1e-15);
        let third = (PI / 3.0).cos().powi(2);
        assert!((malus_prob(ang(0.0), ang(PI / 3.0), Outcome::Plus) - third).abs() < 1e-15);
        assert!((third - 0.25).abs() < 1e-15);
    }

    #[test]
    fn simplistic_law_examples() {
        let got = atoms(&simplistic_lambda_law(ang(0.0), ang(FRAC_PI_8)));
        let want = [(0.0, 0.25), (FRAC_PI_8, 0.25), (FRAC_PI_2, 0.25), (5.0 * FRAC_PI_8, 0.25)];
        assert_eq!(got.len(), 4);
        for ((p, w), (q, v)) in got.iter().zip(want) {
            assert!((p - q).abs() < 1e-15);
            assert_eq!(*w, v);
        }
        for b in [0.0, FRAC_PI_2] {
            let got = atoms(&simplistic_lambda_law(ang(0.0), ang(b)));
            assert_eq!(got.len(), 2);
            assert!((got[0].0 - 0.0).abs() < 1e-15 && got[0].1 == 0.5);
            assert!((got[1].0 - FRAC_PI_2).abs() < 1e-15 && got[1].1 == 0.5);
        }
    }

    #[test]
    fn ahat_examples() {
        assert_eq!(hall_ahat(ang(0.0), ang(0.0)), Outcome::Plus);
        assert_eq!(hall_ahat(ang(0.0), ang(FRAC_PI_2)), Outcome::Minus);
        assert_eq!(hall_ahat(ang(0.0), ang(FRAC_PI_4)), Outcome::Plus);
        assert_eq!(hall_ahat(ang(0.0), ang(FRAC_PI_4 + 1e-12)), Outcome::Minus);
        assert_eq!(hall_ahat(ang(0.0), ang(PI - FRAC_PI_4)), Outcome::Plus);
    }

    #[test]
    fn z_examples() {
        assert_eq!(hall_z(ang(0.0), ang(0.0)), 0.0);
        assert_eq!(hall_z(ang(0.0), ang(FRAC_PI_2)), 2.0);
        assert!((hall_z(ang(0.0), ang(FRAC_PI_8)) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn hall_law_degenerate_settings_are_uniform() {
        let law = hall_lambda_law(ang(0.0), ang(0.0));
        let segs = segments(&law);
        assert_eq!(segs.len(), 1);
        assert!((segs[0].density - 1.0 / PI).abs() < 1e-15);
        let law = hall_lambda_law(ang(0.3), ang(0.3 + FRAC_PI_2));
        assert!((law.mass() - 1.0).abs() < 1e-10);
        assert!(law.approx_eq(&LambdaLaw::uniform(), 1e-12));
    }

    #[test]
    fn hall_law_at_pi_over_8() {
        // segment measures: π − 2d with ÂB̂ = +1, 2d with ÂB̂ = −1
        let d = FRAC_PI_8;
        let z = 0.5;
        let plus = (1.0 + FRAC_PI_4.cos()) / (2.0 * PI - PI * z);
        let minus = (1.0 - FRAC_PI_4.cos()) / (PI * z);
        assert!(((PI - 2.0 * d) * plus + 2.0 * d * minus - 1.0).abs() < 1e-14);

        let law = hall_lambda_law(ang(0.0), ang(FRAC_PI_8));
        let (mut m_plus, mut m_minus) = (0.0, 0.0);
        for s in segments(&law) {
            let mid = ang(s.midpoint());
            if hall_ahat(ang(0.0), mid) == hall_ahat(ang(FRAC_PI_8), mid) {
                assert!((s.density - plus).abs() < 1e-14);
                m_plus += s.len();
            } else {
                assert!((s.density - minus).abs() < 1e-14);
                m_minus += s.len();
            }
        }
        assert!((m_plus - (PI - 2.0 * d)).abs() < 1e-14);
        assert!((m_minus - 2.0 * d).abs() < 1e-14);
        assert!((law.mass() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn hall_response_examples() {
        assert_eq!(hall_response(ang(0.0), ang(0.0), Outcome::Plus), 1.0);
        assert_eq!(hall_response(ang(0.0), ang(FRAC_PI_2), Outcome::Plus), 0.0);
        assert_eq!(hall_response(ang(0.0), ang(PI / 3.0), Outcome::Minus), 1.0);
    }

    #[test]
    fn baseline_is_measurement_independent() {
        let m = baseline_local_model();
        assert!(m.is_measurement_independent());
        let l1 = m.lambda_law(ang(0.1), ang(2.0));
        let l2 = m.lambda_law(ang(1.3), ang(0.4));
        assert_eq!(l1, l2);
        assert_eq!(l1.kind(), LawKind::PiecewiseDensity);
    }

    #[test]
    fn measurement_independence_requires_fixed_law() {
        let bad = HiddenVariableModel::new(
            "x",
            LambdaRule::Hall,
            ResponseRule::SIGN,
            ResponseRule::SIGN,
            true,
        );
        assert!(bad.is_err());
    }

    #[test]
    fn registry() {
        for name in Model::BUILTIN_NAMES {
            assert_eq!(Model::by_name(name, None).unwrap().name(), name);
        }
        assert_eq!(Model::by_name("nope", None), Err(Error::UnknownModel("nope".into())));
        assert!(Model::quantum().lambda_law(Angle::ZERO, Angle::ZERO).is_err());
    }

    proptest! {
        #[test]
        fn malus_complements_exactly(s in 0.0f64..PI, l in 0.0f64..PI) {
            let (s, l) = (ang(s), ang(l));
            let p = malus_prob(s, l, Outcome::Plus);
            let m = malus_prob(s, l, Outcome::Minus);
            prop_assert_eq!(p + m, 1.0);
            prop_assert!((0.0..=1.0).contains(&p));
        }

        #[test]
        fn simplistic_weights_sum_to_one(a in 0.0f64..PI, b in 0.0f64..PI) {
            let law = simplistic_lambda_law(ang(a), ang(b));
            prop_assert!((law.mass() - 1.0).abs() < 1e-15);
        }

        #[test]
        fn ahat_flips_only_at_quarter_turn(s in 0.0f64..PI, l in 0.0f64..PI) {
            let (s, l) = (ang(s), ang(l));
            let d = angular_distance(s, l);
            let expect = if d <= FRAC_PI_4 { Outcome::Plus } else { Outcome::Minus };
            prop_assert_eq!(hall_ahat(s, l), expect);
            // agrees with the sign of cos(2s − 2λ) away from the boundary
            let c = (2.0 * (s.radians() - l.radians())).cos();
            if c.abs() > 1e-9 {
                prop_assert_eq!(hall_ahat(s, l), Outcome::sign_of(c));
            }
        }

        #[test]
        fn hall_law_normalized_and_nonnegative(a in 0.0f64..PI, b in 0.0f64..PI) {
            let law = hall_lambda_law(ang(a), ang(b));
            prop_assert!((law.mass() - 1.0).abs() < 1e-10);
            for s in segments(&law) {
                prop_assert!(s.density >= 0.0 && s.density.is_finite());
            }
        }

        #[test]
        fn hall_law_co_rotates(a in 0.0f64..PI, b in 0.0f64..PI, theta in 0.0f64..PI, l in 0.0f64..PI) {
            let base = hall_lambda_law(ang(a), ang(b));
            let rot = hall_lambda_law(ang(a + theta), ang(b + theta));
            let x = ang(l);
            let y = x.rotated(theta);
            // skip probes within rounding distance of a breakpoint
            let near_cut = [a, b].iter().any(|s| {
                (angular_distance(ang(*s), x) - FRAC_PI_4).abs() < 1e-9
            });
            if !near_cut {
                prop_assert!((base.density_at(x).unwrap() - rot.density_at(y).unwrap()).abs() < 1e-12);
            }
        }
    }
}

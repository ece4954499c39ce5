//! The full verification battery behind `bellcheck verify`.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::analysis::{
    chsh_scan, even_probes, mutual_information, no_signaling_report, SettingsEnsemble,
};
use crate::angle::Angle;
use crate::error::{Error, Result};
use crate::joint::Wing;
use crate::model::{hall_lambda_law, Model};
use crate::montecarlo::run_trials;
use crate::quadrature::combine_by_quadrature;
use crate::tolerance;

use super::record::{Check, Relation};

/// Sizes and model selection for the battery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatteryConfig {
    pub models: Vec<String>,
    /// Adds the signaling test model to the no-signaling checks, which must
    /// then fail.
    pub inject_signaling: bool,
    pub equivalence_grid: usize,
    pub normalization_grid: usize,
    pub probes: usize,
    pub scan_grid: usize,
    pub scan_refine: usize,
    pub mi_grid: usize,
    pub quadrature_pairs: usize,
    pub mc_trials: u64,
    pub mc_pairs: usize,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        BatteryConfig {
            models: Model::BUILTIN_NAMES.iter().map(|s| s.to_string()).collect(),
            inject_signaling: false,
            equivalence_grid: 64,
            normalization_grid: 100,
            probes: 16,
            scan_grid: 16,
            scan_refine: 50,
            mi_grid: 16,
            quadrature_pairs: 100,
            mc_trials: 1_000_000,
            mc_pairs: 20,
        }
    }
}

impl BatteryConfig {
    pub fn validate(&self) -> Result<()> {
        for name in &self.models {
            Model::by_name(name, None)?;
        }
        if self.scan_grid < 8 {
            return Err(Error::InvalidArgument("scan_grid must be at least 8".into()));
        }
        let sizes = [
            ("equivalence_grid", self.equivalence_grid),
            ("normalization_grid", self.normalization_grid),
            ("probes", self.probes),
            ("mi_grid", self.mi_grid),
            ("quadrature_pairs", self.quadrature_pairs),
            ("mc_pairs", self.mc_pairs),
        ];
        if let Some((name, _)) = sizes.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidArgument(format!("{name} must be at least 1")));
        }
        if self.mc_trials == 0 {
            return Err(Error::ZeroTrials);
        }
        Ok(())
    }
}

/// Thresholds of every check, overridable by name from a manifest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub qm_equivalence_simplistic: f64,
    pub qm_equivalence_hall: f64,
    pub normalization: f64,
    pub no_signaling: f64,
    pub signaling_detection: f64,
    pub chsh_scan: f64,
    pub mi_ceiling_bits: f64,
    pub quadrature: f64,
    pub monte_carlo_sigma: f64,
    pub chi_square_alpha: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            qm_equivalence_simplistic: tolerance::EXACT,
            qm_equivalence_hall: tolerance::INTEGRATED,
            normalization: tolerance::INTEGRATED,
            no_signaling: tolerance::INTEGRATED,
            signaling_detection: tolerance::SIGNALING_DETECTION,
            chsh_scan: tolerance::CHSH_SCAN,
            mi_ceiling_bits: tolerance::HALL_MI_CEILING_BITS,
            quadrature: tolerance::QUADRATURE_CROSS_CHECK,
            monte_carlo_sigma: tolerance::MC_SIGMA,
            chi_square_alpha: tolerance::CHI_SQUARE_ALPHA,
        }
    }
}

impl Tolerances {
    /// Applies named overrides; unknown names and non-positive values are errors.
    pub fn with_overrides(mut self, overrides: &BTreeMap<String, f64>) -> Result<Tolerances> {
        for (name, value) in overrides {
            if !(value.is_finite() && *value > 0.0) {
                return Err(Error::InvalidArgument(format!("tolerance {name} = {value} must be positive")));
            }
            let slot = match name.as_str() {
                "qm_equivalence_simplistic" => &mut self.qm_equivalence_simplistic,
                "qm_equivalence_hall" => &mut self.qm_equivalence_hall,
                "normalization" => &mut self.normalization,
                "no_signaling" => &mut self.no_signaling,
                "signaling_detection" => &mut self.signaling_detection,
                "chsh_scan" => &mut self.chsh_scan,
                "mi_ceiling_bits" => &mut self.mi_ceiling_bits,
                "quadrature" => &mut self.quadrature,
                "monte_carlo_sigma" => &mut self.monte_carlo_sigma,
                "chi_square_alpha" => &mut self.chi_square_alpha,
                other => return Err(Error::InvalidArgument(format!("unknown tolerance `{other}`"))),
            };
            *slot = *value;
        }
        Ok(self)
    }
}

/// Analytic maximum of `|S|` for a built-in model, if it has one.
pub fn chsh_target(model: &Model) -> Option<f64> {
    match model.name() {
        "qm" | "simplistic" | "hall" => Some(2.0 * SQRT_2),
        "baseline" => Some(2.0),
        _ => None,
    }
}

/// SplitMix64 finalizer, used to derive independent seeds from one.
pub fn mix_seed(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `count` setting pairs drawn uniformly from `[0, π)²`, reproducible from `seed`.
pub fn random_pairs(seed: u64, count: usize) -> Vec<(Angle, Angle)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let a: f64 = rng.random::<f64>() * PI;
            let b: f64 = rng.random::<f64>() * PI;
            (Angle::wrap(a), Angle::wrap(b))
        })
        .collect()
}

type Outcome = (Vec<Check>, Vec<(String, Value)>);
type Job<'a> = Box<dyn Fn() -> Result<Outcome> + Send + Sync + 'a>;

/// Runs every check the configuration selects. Checks come back sorted by
/// name whatever order they finished in.
pub fn run_battery(
    config: &BatteryConfig,
    tol: &Tolerances,
    seed: u64,
) -> Result<(Vec<Check>, BTreeMap<String, Value>)> {
    config.validate()?;
    let models: Vec<Model> = config
        .models
        .iter()
        .map(|n| Model::by_name(n, None))
        .collect::<Result<_>>()?;
    let has = |name: &str| models.iter().any(|m| m.name() == name);

    let mut jobs: Vec<Job> = Vec::new();

    if has("simplistic") || has("hall") || has("baseline") {
        jobs.push(Box::new(|| qm_equivalence(config, tol, &models)));
    }
    if has("hall") {
        jobs.push(Box::new(|| hall_normalization(config, tol)));
        jobs.push(Box::new(|| mi_checks(config, tol, has("simplistic"))));
    }
    let mut nosig_models = models.clone();
    if config.inject_signaling {
        nosig_models.push(Model::signaling(1.0)?);
    }
    for model in nosig_models {
        jobs.push(Box::new(move || no_signaling(config, tol, &model)));
    }
    jobs.push(Box::new(|| signaling_detector(config, tol)));
    for model in &models {
        jobs.push(Box::new(move || scan(config, tol, model)));
        if model.hidden().is_some() {
            jobs.push(Box::new(move || quadrature(config, tol, model, seed)));
        }
    }
    for (idx, model) in models.iter().enumerate() {
        jobs.push(Box::new(move || monte_carlo(config, tol, model, mix_seed(seed ^ mix_seed(idx as u64)))));
    }

    let outcomes: Vec<Outcome> = jobs.par_iter().map(|job| job()).collect::<Result<_>>()?;
    let mut checks = Vec::new();
    let mut values = BTreeMap::new();
    for (c, v) in outcomes {
        checks.extend(c);
        values.extend(v);
    }
    checks.sort_by(|x, y| x.name.cmp(&y.name));
    Ok((checks, values))
}

fn qm_equivalence(config: &BatteryConfig, tol: &Tolerances, models: &[Model]) -> Result<Outcome> {
    let axis = even_probes(config.equivalence_grid);
    let n = axis.len();
    let mut checks = Vec::new();
    let mut values = Vec::new();
    for model in models.iter().filter(|m| m.hidden().is_some()) {
        let worst = (0..n * n)
            .into_par_iter()
            .map(|k| {
                let (a, b) = (axis[k / n], axis[k % n]);
                Ok(model.joint(a, b)?.tv_distance(&Model::quantum().joint(a, b)?))
            })
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        let name = format!("qm_equivalence/{}", model.name());
        values.push((name.clone(), json!(worst)));
        let grid = format!("max TV distance over {n}×{n} grid");
        match model.name() {
            "simplistic" => checks.push(
                Check::new(name, Relation::AtMost, worst, 0.0, tol.qm_equivalence_simplistic).with_detail(grid),
            ),
            "hall" => checks.push(
                Check::new(name, Relation::AtMost, worst, 0.0, tol.qm_equivalence_hall).with_detail(grid),
            ),
            "baseline" => checks.push(
                Check::new("qm_equivalence/baseline_departs", Relation::Exceeds, worst, 0.0, 0.0)
                    .with_detail("the local baseline must not reproduce QM"),
            ),
            _ => {}
        }
    }
    Ok((checks, values))
}

fn hall_normalization(config: &BatteryConfig, tol: &Tolerances) -> Result<Outcome> {
    let mut axis = even_probes(config.normalization_grid);
    // degenerate geometries d = 0 and d = π/2 relative to every grid point
    axis.extend(even_probes(config.normalization_grid).iter().map(|a| a.rotated(FRAC_PI_2)));
    let n = axis.len();
    let worst = (0..n * n)
        .into_par_iter()
        .map(|k| (hall_lambda_law(axis[k / n], axis[k % n]).mass() - 1.0).abs())
        .reduce(|| 0.0, f64::max);
    let name = "normalization/hall".to_string();
    Ok((
        vec![Check::new(name.clone(), Relation::AtMost, worst, 0.0, tol.normalization)
            .with_detail(format!("max |mass − 1| over {n}×{n} settings incl. d ∈ {{0, π/2}}"))],
        vec![(name, json!(worst))],
    ))
}

fn no_signaling(config: &BatteryConfig, tol: &Tolerances, model: &Model) -> Result<Outcome> {
    let report = no_signaling_report(model, &even_probes(config.probes))?;
    let name = format!("no_signaling/{}", model.name());
    let detail = format!(
        "wing {:?} at local {} moves between remote {} and {}",
        report.wing,
        report.local,
        report.remote.0,
        report.remote.1
    );
    Ok((
        vec![Check::new(name.clone(), Relation::AtMost, report.deviation, 0.0, tol.no_signaling).with_detail(detail)],
        vec![(name, json!(report.deviation))],
    ))
}

fn signaling_detector(config: &BatteryConfig, tol: &Tolerances) -> Result<Outcome> {
    let dev = no_signaling_report(&Model::signaling(1.0)?, &even_probes(config.probes))?.deviation;
    let name = "no_signaling/detector_sensitivity".to_string();
    Ok((
        vec![Check::new(name.clone(), Relation::Exceeds, dev, tol.signaling_detection, 0.0)
            .with_detail("the signaling test model must be caught")],
        vec![(name, json!(dev))],
    ))
}

fn scan(config: &BatteryConfig, tol: &Tolerances, model: &Model) -> Result<Outcome> {
    let result = chsh_scan(model, config.scan_grid, config.scan_refine)?;
    let name = format!("chsh_scan/{}", model.name());
    let checks = chsh_target(model)
        .map(|target| Check::new(name.clone(), Relation::Within, result.max_abs_s, target, tol.chsh_scan))
        .into_iter()
        .collect();
    Ok((checks, vec![(name, serde_json::to_value(result).expect("serializable"))]))
}

fn mi_checks(config: &BatteryConfig, tol: &Tolerances, with_simplistic: bool) -> Result<Outcome> {
    let hall = Model::hall();
    let quad = SettingsEnsemble::chsh_quadruple();
    let grid = SettingsEnsemble::grid(config.mi_grid)?;
    let hall_quad = mutual_information(&hall, &quad)?;
    let hall_grid = mutual_information(&hall, &grid)?;
    let n = config.mi_grid;
    let mut checks = vec![
        Check::new("mutual_information/hall_chsh_quadruple", Relation::AtMost, hall_quad, tol.mi_ceiling_bits, 0.0)
            .with_detail("bits"),
        Check::new(format!("mutual_information/hall_grid{n}"), Relation::AtMost, hall_grid, tol.mi_ceiling_bits, 0.0)
            .with_detail("bits"),
    ];
    let mut values = vec![
        ("mutual_information/hall_chsh_quadruple".to_string(), json!(hall_quad)),
        (format!("mutual_information/hall_grid{n}"), json!(hall_grid)),
    ];
    if with_simplistic {
        let simp = mutual_information(&Model::simplistic(), &quad)?;
        checks.push(
            Check::new("mutual_information/simplistic_exceeds_hall", Relation::Exceeds, simp, hall_quad, 0.0)
                .with_detail("bits on the CHSH quadruple"),
        );
        values.push(("mutual_information/simplistic_chsh_quadruple".to_string(), json!(simp)));
    }
    Ok((checks, values))
}

fn quadrature(config: &BatteryConfig, tol: &Tolerances, model: &Model, seed: u64) -> Result<Outcome> {
    let hidden = model.hidden().expect("caller checked");
    let pairs = random_pairs(mix_seed(seed ^ 0x0051_7AD5), config.quadrature_pairs);
    let worst = pairs
        .par_iter()
        .map(|(a, b)| {
            let exact = model.joint(*a, *b)?;
            let quad = combine_by_quadrature(hidden, *a, *b, 1e-12)?;
            Ok(exact.tv_distance(&quad))
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let name = format!("quadrature/{}", model.name());
    Ok((
        vec![Check::new(name.clone(), Relation::AtMost, worst, 0.0, tol.quadrature)
            .with_detail(format!("max TV vs adaptive quadrature over {} random pairs", pairs.len()))],
        vec![(name, json!(worst))],
    ))
}

fn monte_carlo(config: &BatteryConfig, tol: &Tolerances, model: &Model, seed: u64) -> Result<Outcome> {
    let pairs = random_pairs(seed, config.mc_pairs);
    let mut max_z: f64 = 0.0;
    let mut min_p: f64 = 1.0;
    let mut max_marginal_z: f64 = 0.0;
    for (i, (a, b)) in pairs.iter().enumerate() {
        let exact = model.joint(*a, *b)?;
        let emp = run_trials(model, *a, *b, config.mc_trials, mix_seed(seed.wrapping_add(i as u64)))?;
        max_z = emp.z_scores(&exact).iter().fold(max_z, |m, z| m.max(z.abs()));
        min_p = min_p.min(emp.chi_square(&exact).p_value);
        for wing in [Wing::A, Wing::B] {
            let sigma = (0.25 / emp.n_total as f64).sqrt();
            max_marginal_z = max_marginal_z.max((emp.marginal(wing) - 0.5).abs() / sigma);
        }
    }
    let base = format!("monte_carlo/{}", model.name());
    let detail = format!("{} pairs × {} trials", pairs.len(), config.mc_trials);
    let checks = vec![
        Check::new(format!("{base}/cells_within_sigma"), Relation::AtMost, max_z, tol.monte_carlo_sigma, 0.0)
            .with_detail(format!("max |z| over cells, {detail}")),
        Check::new(format!("{base}/chi_square"), Relation::Exceeds, min_p, tol.chi_square_alpha, 0.0)
            .with_detail(format!("min p-value, {detail}")),
        Check::new(format!("{base}/marginals"), Relation::AtMost, max_marginal_z, tol.monte_carlo_sigma, 0.0)
            .with_detail(format!("max |z| of marginals against ½, {detail}")),
    ];
    let values = vec![(base, json!({ "max_abs_z": max_z, "min_chi_square_p": min_p, "max_marginal_z": max_marginal_z }))];
    Ok((checks, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> BatteryConfig {
        BatteryConfig {
            equivalence_grid: 8,
            normalization_grid: 8,
            scan_grid: 8,
            scan_refine: 5,
            mi_grid: 4,
            quadrature_pairs: 5,
            mc_trials: 20_000,
            mc_pairs: 2,
            ..BatteryConfig::default()
        }
    }

    // structural tests: 4.5σ keeps the many small-sample cells from tripping
    fn loose() -> Tolerances {
        Tolerances { monte_carlo_sigma: 4.5, ..Tolerances::default() }
    }

    #[test]
    fn small_battery_passes_and_is_sorted() {
        let (checks, values) = run_battery(&small(), &loose(), 1).unwrap();
        for c in &checks {
            assert!(c.passed, "{}", c.summary());
        }
        let names: Vec<_> = checks.iter().map(|c| c.name.clone()).collect();
        let mut sorted = names.clone();
        sorted.sort();
        assert_eq!(names, sorted);
        assert!(values.contains_key("mutual_information/hall_chsh_quadruple"));
    }

    #[test]
    fn injected_signaling_fails_by_name() {
        let config = BatteryConfig { inject_signaling: true, ..small() };
        let (checks, _) = run_battery(&config, &loose(), 1).unwrap();
        let failed: Vec<_> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        assert_eq!(failed, vec!["no_signaling/signaling"]);
    }

    #[test]
    fn overrides() {
        let mut o = BTreeMap::new();
        o.insert("chsh_scan".to_string(), 1e-3);
        assert_eq!(Tolerances::default().with_overrides(&o).unwrap().chsh_scan, 1e-3);
        o.insert("chsh_scan".to_string(), 0.0);
        assert!(Tolerances::default().with_overrides(&o).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(BatteryConfig { scan_grid: 4, ..small() }.validate().is_err());
        assert!(BatteryConfig { models: vec!["nope".into()], ..small() }.validate().is_err());
        assert!(BatteryConfig { mc_trials: 0, ..small() }.validate().is_err());
    }
}

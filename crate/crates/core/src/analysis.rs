//! CHSH values and their maxima, no-signaling deviations, and the mutual
//! information λ carries about the settings.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::angle::{angular_distance, Angle};
use crate::error::{Error, Result};
use crate::joint::Wing;
use crate::law::{refine, LambdaLaw, LawKind};
use crate::model::Model;
use crate::tolerance::{ATOM_MERGE, CHSH_REFINE_STOP, EXACT};

/// The four analyzer settings of a CHSH experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChshSettings {
    pub a: Angle,
    pub a_prime: Angle,
    pub b: Angle,
    pub b_prime: Angle,
}

impl ChshSettings {
    pub fn new(a: f64, a_prime: f64, b: f64, b_prime: f64) -> Result<ChshSettings> {
        Ok(ChshSettings {
            a: Angle::new(a)?,
            a_prime: Angle::new(a_prime)?,
            b: Angle::new(b)?,
            b_prime: Angle::new(b_prime)?,
        })
    }

    /// `a = 0, a′ = π/4, b = π/8, b′ = 3π/8`, where the quantum value is `−2√2`
    /// with the minus sign on `E(a, b′)`.
    pub fn standard() -> ChshSettings {
        ChshSettings::new(0.0, PI / 4.0, PI / 8.0, 3.0 * PI / 8.0).expect("finite")
    }

    fn to_array(self) -> [f64; 4] {
        [self.a, self.a_prime, self.b, self.b_prime].map(Angle::radians)
    }

    fn from_array(x: [f64; 4]) -> ChshSettings {
        ChshSettings {
            a: Angle::wrap(x[0]),
            a_prime: Angle::wrap(x[1]),
            b: Angle::wrap(x[2]),
            b_prime: Angle::wrap(x[3]),
        }
    }

    /// All four settings rotated by `theta`.
    pub fn rotated(self, theta: f64) -> ChshSettings {
        ChshSettings::from_array(self.to_array().map(|x| x + theta))
    }
}

/// `S = E(a, b) − E(a, b′) + E(a′, b) + E(a′, b′)` from exact correlators.
pub fn chsh(model: &Model, s: &ChshSettings) -> Result<f64> {
    Ok(model.correlator(s.a, s.b)? - model.correlator(s.a, s.b_prime)?
        + model.correlator(s.a_prime, s.b)?
        + model.correlator(s.a_prime, s.b_prime)?)
}

/// Outcome of [`chsh_scan`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChshScan {
    /// Best `|S|` found.
    pub max_abs_s: f64,
    /// Where it was found.
    pub settings: ChshSettings,
    /// Best `|S|` on the coarse grid, before refinement.
    pub grid_max: f64,
    /// Coordinate passes actually performed.
    pub passes: usize,
}

/// Maximizes `|S|` over all four settings: a full grid search with `grid_n`
/// points per axis, then up to `refine_iters` passes of coordinate-wise
/// golden-section refinement started from the best grid point.
pub fn chsh_scan(model: &Model, grid_n: usize, refine_iters: usize) -> Result<ChshScan> {
    if grid_n < 8 {
        return Err(Error::InvalidArgument(format!("grid_n must be at least 8, got {grid_n}")));
    }
    let step = PI / grid_n as f64;
    let axis: Vec<Angle> = (0..grid_n).map(|i| Angle::wrap(i as f64 * step)).collect();

    // E depends only on (a, b), so the n⁴ search reads from an n² table.
    let table: Vec<f64> = (0..grid_n * grid_n)
        .into_par_iter()
        .map(|k| model.correlator(axis[k / grid_n], axis[k % grid_n]))
        .collect::<Result<_>>()?;
    let e = |i: usize, j: usize| table[i * grid_n + j];

    let (grid_max, best_idx) = (0..grid_n)
        .into_par_iter()
        .map(|i| {
            let mut best = (f64::NEG_INFINITY, [0usize; 4]);
            for ip in 0..grid_n {
                for j in 0..grid_n {
                    for jp in 0..grid_n {
                        let s = (e(i, j) - e(i, jp) + e(ip, j) + e(ip, jp)).abs();
                        if s > best.0 {
                            best = (s, [i, ip, j, jp]);
                        }
                    }
                }
            }
            best
        })
        .reduce(|| (f64::NEG_INFINITY, [0; 4]), |x, y| if y.0 > x.0 { y } else { x });

    let objective = |x: [f64; 4]| chsh(model, &ChshSettings::from_array(x)).map(f64::abs);
    let mut x = best_idx.map(|i| axis[i].radians());
    let mut best = objective(x)?.max(grid_max);
    let mut passes = 0;
    for _ in 0..refine_iters {
        passes += 1;
        let before = best;
        for coord in 0..4 {
            let (arg, value) = golden_section_max(
                |t| {
                    let mut y = x;
                    y[coord] = t;
                    objective(y)
                },
                x[coord] - step,
                x[coord] + step,
                1e-12,
            )?;
            if value > best {
                best = value;
                x[coord] = arg;
            }
        }
        if best - before < CHSH_REFINE_STOP {
            break;
        }
    }
    Ok(ChshScan { max_abs_s: best, settings: ChshSettings::from_array(x), grid_max, passes })
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for a maximum of `f` on `[lo, hi]`.
pub fn golden_section_max<F>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1)?;
        }
    }
    Ok(if f1 >= f2 { (x1, f1) } else { (x2, f2) })
}

/// Largest marginal shift caused by changing the remote setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoSignalingReport {
    pub deviation: f64,
    pub wing: Wing,
    pub local: Angle,
    pub remote: (Angle, Angle),
}

/// For each wing and each local probe setting, the spread of that wing's
/// marginal as the remote setting ranges over the probes; the worst case.
pub fn no_signaling_report(model: &Model, probes: &[Angle]) -> Result<NoSignalingReport> {
    if probes.is_empty() {
        return Err(Error::InvalidArgument("no probe settings".into()));
    }
    let n = probes.len();
    // joints[i][j] = p at (a = probes[i], b = probes[j])
    let joints: Vec<_> = (0..n * n)
        .into_par_iter()
        .map(|k| model.joint(probes[k / n], probes[k % n]))
        .collect::<Result<_>>()?;
    let mut worst = NoSignalingReport {
        deviation: 0.0,
        wing: Wing::A,
        local: probes[0],
        remote: (probes[0], probes[0]),
    };
    for wing in [Wing::A, Wing::B] {
        for local in 0..n {
            let marginals: Vec<f64> = (0..n)
                .map(|remote| match wing {
                    Wing::A => joints[local * n + remote].marginal(Wing::A),
                    Wing::B => joints[remote * n + local].marginal(Wing::B),
                })
                .collect();
            let (lo, hi) = argmin_argmax(&marginals);
            let dev = marginals[hi] - marginals[lo];
            if dev > worst.deviation {
                worst = NoSignalingReport {
                    deviation: dev,
                    wing,
                    local: probes[local],
                    remote: (probes[lo], probes[hi]),
                };
            }
        }
    }
    Ok(worst)
}

fn argmin_argmax(xs: &[f64]) -> (usize, usize) {
    let mut lo = 0;
    let mut hi = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x < xs[lo] {
            lo = i;
        }
        if *x > xs[hi] {
            hi = i;
        }
    }
    (lo, hi)
}

/// `max |marginal(s, r) − marginal(s, r′)|` over wings, local settings and
/// remote pairs drawn from `probes`.
pub fn no_signaling_deviation(model: &Model, probes: &[Angle]) -> Result<f64> {
    Ok(no_signaling_report(model, probes)?.deviation)
}

/// `count` evenly spaced probe settings on `[0, π)`.
pub fn even_probes(count: usize) -> Vec<Angle> {
    (0..count).map(|i| Angle::wrap(i as f64 * PI / count as f64)).collect()
}

/// A prior over setting pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingsEnsemble {
    members: Vec<((Angle, Angle), f64)>,
}

impl SettingsEnsemble {
    pub fn new(members: Vec<((Angle, Angle), f64)>) -> Result<SettingsEnsemble> {
        if members.is_empty() {
            return Err(Error::InvalidEnsemble("empty".into()));
        }
        if let Some((_, w)) = members.iter().find(|(_, w)| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidEnsemble(format!("weight {w}")));
        }
        let total: f64 = members.iter().map(|(_, w)| w).sum();
        if (total - 1.0).abs() > EXACT {
            return Err(Error::InvalidEnsemble(format!("weights sum to {total}")));
        }
        Ok(SettingsEnsemble { members })
    }

    /// Equal weights on `pairs`.
    pub fn uniform(pairs: &[(Angle, Angle)]) -> Result<SettingsEnsemble> {
        let w = 1.0 / pairs.len().max(1) as f64;
        SettingsEnsemble::new(pairs.iter().map(|p| (*p, w)).collect())
    }

    /// Uniform over `(0, π/8), (0, 3π/8), (π/4, π/8), (π/4, 3π/8)`.
    pub fn chsh_quadruple() -> SettingsEnsemble {
        let s = ChshSettings::standard();
        SettingsEnsemble::uniform(&[(s.a, s.b), (s.a, s.b_prime), (s.a_prime, s.b), (s.a_prime, s.b_prime)])
            .expect("four pairs")
    }

    /// Uniform over the `n × n` grid `a, b ∈ {kπ/n}`.
    pub fn grid(n: usize) -> Result<SettingsEnsemble> {
        let axis = even_probes(n);
        let pairs: Vec<_> = axis.iter().flat_map(|a| axis.iter().map(move |b| (*a, *b))).collect();
        SettingsEnsemble::uniform(&pairs)
    }

    pub fn members(&self) -> &[((Angle, Angle), f64)] {
        &self.members
    }
}

/// `I(λ; (a, b))` together with the information about each setting alone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MutualInformation {
    /// Bits about the pair.
    pub total: f64,
    /// Bits about `a` with `b` marginalized over the ensemble.
    pub about_a: f64,
    /// Bits about `b` with `a` marginalized over the ensemble.
    pub about_b: f64,
    pub kind: LawKind,
}

/// Mutual information in bits between λ and the settings pair, computed
/// exactly: over the merged atom alphabet for atomic laws, and segment by
/// segment over the common refinement of all breakpoints for piecewise laws.
pub fn mutual_information(model: &Model, ensemble: &SettingsEnsemble) -> Result<f64> {
    Ok(mutual_information_report(model, ensemble)?.total)
}

pub fn mutual_information_report(model: &Model, ensemble: &SettingsEnsemble) -> Result<MutualInformation> {
    let laws: Vec<LambdaLaw> = ensemble
        .members
        .iter()
        .map(|((a, b), _)| model.lambda_law(*a, *b))
        .collect::<Result<_>>()?;
    let kind = common_kind(&laws)?;
    let weights: Vec<f64> = ensemble.members.iter().map(|(_, w)| *w).collect();
    let table = ProbabilityTable::build(&laws);

    let pair_labels: Vec<usize> = (0..laws.len()).collect();
    let a_labels = label_by(ensemble.members.iter().map(|((a, _), _)| *a));
    let b_labels = label_by(ensemble.members.iter().map(|((_, b), _)| *b));
    Ok(MutualInformation {
        total: table.mutual_information(&weights, &pair_labels),
        about_a: table.mutual_information(&weights, &a_labels),
        about_b: table.mutual_information(&weights, &b_labels),
        kind,
    })
}

/// `I(λ; S)` for a label `S` taking value `m` with probability `weight`
/// and then drawing λ from `law`.
pub fn mutual_information_of_laws(members: &[(LambdaLaw, f64)]) -> Result<f64> {
    if members.is_empty() {
        return Err(Error::InvalidEnsemble("empty".into()));
    }
    let laws: Vec<LambdaLaw> = members.iter().map(|(l, _)| l.clone()).collect();
    common_kind(&laws)?;
    let weights: Vec<f64> = members.iter().map(|(_, w)| *w).collect();
    let total: f64 = weights.iter().sum();
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || (total - 1.0).abs() > EXACT {
        return Err(Error::InvalidEnsemble(format!("weights sum to {total}")));
    }
    let labels: Vec<usize> = (0..laws.len()).collect();
    Ok(ProbabilityTable::build(&laws).mutual_information(&weights, &labels))
}

fn common_kind(laws: &[LambdaLaw]) -> Result<LawKind> {
    let kind = laws[0].kind();
    if laws.iter().any(|l| l.kind() != kind) {
        return Err(Error::MixedLambdaKinds);
    }
    Ok(kind)
}

fn label_by(angles: impl Iterator<Item = Angle>) -> Vec<usize> {
    let mut distinct: Vec<Angle> = Vec::new();
    angles
        .map(|x| match distinct.iter().position(|d| angular_distance(*d, x) < ATOM_MERGE) {
            Some(i) => i,
            None => {
                distinct.push(x);
                distinct.len() - 1
            }
        })
        .collect()
}

/// `probs[cell][member]`: mass of each member's law in each cell of a
/// common partition of λ-space, with `measure[cell]` the cell's size
/// (1 for atoms, length for segments).
struct ProbabilityTable {
    measure: Vec<f64>,
    probs: Vec<Vec<f64>>,
}

impl ProbabilityTable {
    fn build(laws: &[LambdaLaw]) -> ProbabilityTable {
        match &laws[0] {
            LambdaLaw::Atomic(_) => {
                let mut alphabet: Vec<Angle> = Vec::new();
                for law in laws {
                    if let LambdaLaw::Atomic(atoms) = law {
                        for atom in atoms {
                            if !alphabet.iter().any(|p| angular_distance(*p, atom.position) < ATOM_MERGE) {
                                alphabet.push(atom.position);
                            }
                        }
                    }
                }
                let probs = alphabet
                    .iter()
                    .map(|pos| laws.iter().map(|l| l.weight_at(*pos).unwrap_or(0.0)).collect())
                    .collect();
                ProbabilityTable { measure: vec![1.0; alphabet.len()], probs }
            }
            LambdaLaw::PiecewiseDensity(_) => {
                let cuts: Vec<f64> = laws.iter().flat_map(LambdaLaw::breakpoints).collect();
                let points = refine(&cuts);
                let mut measure = Vec::with_capacity(points.len());
                let mut probs = Vec::with_capacity(points.len());
                for w in points.windows(2) {
                    let mid = Angle::wrap(0.5 * (w[0] + w[1]));
                    measure.push(w[1] - w[0]);
                    probs.push(laws.iter().map(|l| l.density_at(mid).unwrap_or(0.0)).collect());
                }
                ProbabilityTable { measure, probs }
            }
        }
    }

    /// `I(λ; L)` where member `m` carries label `labels[m]` and prior `weights[m]`.
    fn mutual_information(&self, weights: &[f64], labels: &[usize]) -> f64 {
        let n_labels = labels.iter().max().map_or(0, |m| m + 1);
        let mut label_weight = vec![0.0; n_labels];
        for (w, l) in weights.iter().zip(labels) {
            label_weight[*l] += w;
        }
        let mut bits = 0.0;
        for (row, size) in self.probs.iter().zip(&self.measure) {
            let mut conditional = vec![0.0; n_labels];
            for ((p, w), l) in row.iter().zip(weights).zip(labels) {
                conditional[*l] += w * p;
            }
            let mean: f64 = conditional.iter().sum();
            if mean <= 0.0 {
                continue;
            }
            for (joint, lw) in conditional.iter().zip(&label_weight) {
                if *joint > 0.0 && *lw > 0.0 {
                    let p = joint / lw;
                    bits += joint * size * (p / mean).log2();
                }
            }
        }
        bits.max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, SQRT_2};

    fn ang(x: f64) -> Angle {
        Angle::new(x).unwrap()
    }

    #[test]
    fn chsh_examples() {
        let s = ChshSettings::standard();
        let q = chsh(&Model::quantum(), &s).unwrap();
        // E = cos(2a − 2b) at the four pairs
        let e = |a: f64, b: f64| (2.0 * (a - b)).cos();
        let expect = e(0.0, FRAC_PI_8) - e(0.0, 3.0 * FRAC_PI_8) + e(FRAC_PI_4, FRAC_PI_8)
            + e(FRAC_PI_4, 3.0 * FRAC_PI_8);
        assert!((q - expect).abs() < 1e-12);
        assert!((q.abs() - 2.0 * SQRT_2).abs() < 1e-12);
        let base = chsh(&Model::baseline(), &s).unwrap();
        assert!((base - 2.0).abs() < 1e-12);
        let degenerate = ChshSettings::new(0.3, 0.3, 1.1, 1.1).unwrap();
        for m in Model::builtins() {
            let s = chsh(&m, &degenerate).unwrap();
            assert!((s - 2.0 * m.correlator(ang(0.3), ang(1.1)).unwrap()).abs() < 1e-12);
            assert!(s.abs() <= 2.0 + 1e-12);
        }
    }

    #[test]
    fn chsh_is_rotation_invariant() {
        let s = ChshSettings::new(0.1, 0.9, 1.7, 2.6).unwrap();
        for m in Model::builtins() {
            let base = chsh(&m, &s).unwrap();
            for theta in [0.3, 1.0, 2.9] {
                assert!((chsh(&m, &s.rotated(theta)).unwrap() - base).abs() < 1e-10, "{m}");
            }
        }
    }

    #[test]
    fn scan_rejects_small_grids() {
        assert!(chsh_scan(&Model::quantum(), 7, 5).is_err());
    }

    #[test]
    fn scan_finds_tsirelson_off_grid() {
        // grid_n = 10 misses the optimal geometry; refinement has to find it
        let r = chsh_scan(&Model::quantum(), 10, 200).unwrap();
        assert!(r.grid_max < 2.0 * SQRT_2 - 1e-6);
        assert!((r.max_abs_s - 2.0 * SQRT_2).abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn golden_section_finds_peak() {
        let (x, v) = golden_section_max(|t| Ok(-(t - 0.3) * (t - 0.3)), 0.0, 1.0, 1e-12).unwrap();
        assert!((x - 0.3).abs() < 1e-6);
        assert!(v <= 0.0);
    }

    #[test]
    fn no_signaling_examples() {
        let probes = even_probes(16);
        assert!(no_signaling_deviation(&Model::quantum(), &probes).unwrap() < 1e-12);
        assert!(no_signaling_deviation(&Model::hall(), &probes).unwrap() < 1e-10);
        let leaky = Model::signaling(1.0).unwrap();
        let report = no_signaling_report(&leaky, &probes).unwrap();
        assert!(report.deviation > 0.01);
        assert_eq!(report.wing, Wing::A);
        assert!(no_signaling_deviation(&leaky, &[]).is_err());
    }

    #[test]
    fn ensemble_validation() {
        assert!(SettingsEnsemble::new(vec![]).is_err());
        assert!(SettingsEnsemble::new(vec![((ang(0.0), ang(0.0)), 0.7)]).is_err());
        assert!(SettingsEnsemble::new(vec![((ang(0.0), ang(0.0)), 1.0)]).is_ok());
        assert_eq!(SettingsEnsemble::grid(16).unwrap().members().len(), 256);
    }

    #[test]
    fn single_pair_carries_no_information() {
        let single = SettingsEnsemble::new(vec![((ang(0.2), ang(1.0)), 1.0)]).unwrap();
        for name in ["simplistic", "hall", "baseline"] {
            let m = Model::by_name(name, None).unwrap();
            assert_eq!(mutual_information(&m, &single).unwrap(), 0.0);
        }
    }

    #[test]
    fn measurement_independent_model_carries_no_information() {
        let mi = mutual_information(&Model::baseline(), &SettingsEnsemble::grid(8).unwrap()).unwrap();
        assert!(mi.abs() < 1e-12, "{mi}");
    }

    #[test]
    fn simplistic_quadruple_is_one_bit() {
        // 8 equiprobable atoms overall, 4 per pair: 3 − 2 bits
        let r = mutual_information_report(&Model::simplistic(), &SettingsEnsemble::chsh_quadruple()).unwrap();
        assert!((r.total - 1.0).abs() < 1e-12);
        assert_eq!(r.kind, LawKind::Atomic);
        assert!(r.about_a <= r.total + 1e-12 && r.about_b <= r.total + 1e-12);
    }

    #[test]
    fn mixed_kinds_are_rejected() {
        let members = vec![(LambdaLaw::uniform(), 0.5), (LambdaLaw::point(ang(0.0)), 0.5)];
        assert_eq!(mutual_information_of_laws(&members), Err(Error::MixedLambdaKinds));
        let same = vec![(LambdaLaw::point(ang(0.0)), 0.5), (LambdaLaw::point(ang(1.0)), 0.5)];
        assert!((mutual_information_of_laws(&same).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quantum_model_has_no_lambda() {
        let e = mutual_information(&Model::quantum(), &SettingsEnsemble::chsh_quadruple());
        assert!(matches!(e, Err(Error::NoHiddenVariable(_))));
    }
}

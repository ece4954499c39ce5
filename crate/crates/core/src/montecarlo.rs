//! Seeded Monte Carlo simulation of trial sequences.
//!
//! # Random streams
//!
//! Every run is split into batches of a fixed size. Batch `k` of a run with
//! seed `s` draws from `ChaCha8Rng::seed_from_u64(s)` switched to stream `k`
//! (`set_stream(k)`): the same key, a distinct 64-bit stream id, so batches
//! never share keystream. Batches can run on any thread in any order; their
//! counts are merged by addition. For a fixed `(seed, batch size)` the result
//! is bit-reproducible.

use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::angle::{Angle, Outcome};
use crate::error::{Error, Result};
use crate::joint::{cell_index, JointDist, Wing};
use crate::law::LambdaLaw;
use crate::model::{qm_joint, HiddenVariableModel, Model};

/// Trials per batch unless a caller asks otherwise.
pub const DEFAULT_BATCH_SIZE: u64 = 1 << 16;

/// The generator for batch `batch` of a run seeded with `seed`.
pub fn substream(seed: u64, batch: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(batch);
    rng
}

/// Inverse-CDF sampler for a [`LambdaLaw`].
#[derive(Debug, Clone)]
pub struct LambdaSampler {
    kind: SamplerKind,
}

#[derive(Debug, Clone)]
enum SamplerKind {
    Atomic { positions: Vec<Angle>, cumulative: Vec<f64> },
    Piecewise { starts: Vec<f64>, lengths: Vec<f64>, cumulative: Vec<f64> },
}

impl LambdaSampler {
    pub fn new(law: &LambdaLaw) -> LambdaSampler {
        let kind = match law {
            LambdaLaw::Atomic(atoms) => SamplerKind::Atomic {
                positions: atoms.iter().map(|a| a.position).collect(),
                cumulative: running_sum(atoms.iter().map(|a| a.weight)),
            },
            LambdaLaw::PiecewiseDensity(segs) => SamplerKind::Piecewise {
                starts: segs.iter().map(|s| s.start).collect(),
                lengths: segs.iter().map(|s| s.len()).collect(),
                cumulative: running_sum(segs.iter().map(|s| s.mass())),
            },
        };
        LambdaSampler { kind }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Angle {
        let u: f64 = rng.random();
        match &self.kind {
            SamplerKind::Atomic { positions, cumulative } => positions[pick(cumulative, u)],
            SamplerKind::Piecewise { starts, lengths, cumulative } => {
                let i = pick(cumulative, u);
                // uniform within the chosen segment
                let v: f64 = rng.random();
                Angle::wrap(starts[i] + v * lengths[i])
            }
        }
    }
}

fn running_sum(weights: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out: Vec<f64> = weights
        .map(|w| {
            acc += w;
            acc
        })
        .collect();
    // guard against u landing past a total that rounded below 1
    if let Some(last) = out.last_mut() {
        *last = f64::INFINITY;
    }
    out
}

/// Index of the first cumulative entry above `u`, skipping zero-width entries.
fn pick(cumulative: &[f64], u: f64) -> usize {
    cumulative.partition_point(|c| *c <= u).min(cumulative.len() - 1)
}

/// One draw of λ from `law`.
pub fn sample_lambda<R: Rng + ?Sized>(law: &LambdaLaw, rng: &mut R) -> Angle {
    LambdaSampler::new(law).sample(rng)
}

/// One realized trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub a: Angle,
    pub b: Angle,
    /// `None` for the quantum model, which has no hidden variable.
    pub lambda: Option<Angle>,
    pub outcome_a: Outcome,
    pub outcome_b: Outcome,
}

impl fmt::Display for TrialRecord {
    /// `a,b,lambda,A,B`; λ is left empty when the model has none.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lambda = self.lambda.map(|l| format!("{:.16e}", l.radians())).unwrap_or_default();
        write!(
            f,
            "{:.16e},{:.16e},{},{},{}",
            self.a.radians(),
            self.b.radians(),
            lambda,
            self.outcome_a.value(),
            self.outcome_b.value()
        )
    }
}

impl FromStr for TrialRecord {
    type Err = Error;

    fn from_str(line: &str) -> Result<TrialRecord> {
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != 5 {
            return Err(Error::InvalidArgument(format!("trial line needs 5 fields: {line:?}")));
        }
        let num = |s: &str| -> Result<f64> {
            s.trim().parse::<f64>().map_err(|e| Error::InvalidArgument(format!("{s:?}: {e}")))
        };
        let outcome = |s: &str| -> Result<Outcome> {
            let v = s.trim().parse::<i64>().map_err(|e| Error::InvalidArgument(format!("{s:?}: {e}")))?;
            Outcome::try_from(v)
        };
        let lambda = match fields[2].trim() {
            "" => None,
            s => Some(Angle::new(num(s)?)?),
        };
        Ok(TrialRecord {
            a: Angle::new(num(fields[0])?)?,
            b: Angle::new(num(fields[1])?)?,
            lambda,
            outcome_a: outcome(fields[3])?,
            outcome_b: outcome(fields[4])?,
        })
    }
}

/// A model prepared for repeated sampling at fixed settings.
#[derive(Debug, Clone)]
pub struct TrialSampler<'m> {
    a: Angle,
    b: Angle,
    source: Source<'m>,
}

#[derive(Debug, Clone)]
enum Source<'m> {
    Quantum { cumulative: Vec<f64> },
    Hidden { model: &'m HiddenVariableModel, lambda: LambdaSampler },
}

impl<'m> TrialSampler<'m> {
    pub fn new(model: &'m Model, a: Angle, b: Angle) -> TrialSampler<'m> {
        let source = match model {
            Model::Quantum => Source::Quantum {
                cumulative: running_sum(qm_joint(a, b).cells().into_iter()),
            },
            Model::HiddenVariable(m) => Source::Hidden {
                model: m,
                lambda: LambdaSampler::new(&m.lambda_law(a, b)),
            },
        };
        TrialSampler { a, b, source }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> TrialRecord {
        let (a, b) = (self.a, self.b);
        match &self.source {
            Source::Quantum { cumulative } => {
                let (outcome_a, outcome_b) = crate::joint::cell_outcomes(pick(cumulative, rng.random()));
                TrialRecord { a, b, lambda: None, outcome_a, outcome_b }
            }
            Source::Hidden { model, lambda } => {
                let l = lambda.sample(rng);
                // A and B are independent given λ
                let outcome_a = draw(rng, model.prob_a(a, b, l, Outcome::Plus));
                let outcome_b = draw(rng, model.prob_b(a, b, l, Outcome::Plus));
                TrialRecord { a, b, lambda: Some(l), outcome_a, outcome_b }
            }
        }
    }
}

fn draw<R: Rng + ?Sized>(rng: &mut R, p_plus: f64) -> Outcome {
    let u: f64 = rng.random();
    if u < p_plus {
        Outcome::Plus
    } else {
        Outcome::Minus
    }
}

/// One trial of `model` at `(a, b)`.
pub fn sample_outcomes<R: Rng + ?Sized>(model: &Model, a: Angle, b: Angle, rng: &mut R) -> TrialRecord {
    TrialSampler::new(model, a, b).sample(rng)
}

/// Counts of the four outcome cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EmpiricalJoint {
    pub counts: [u64; 4],
    pub n_total: u64,
}

/// Result of a chi-square goodness-of-fit test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
}

impl ChiSquareTest {
    pub fn passes(&self, alpha: f64) -> bool {
        self.p_value >= alpha
    }
}

impl EmpiricalJoint {
    pub fn record(&mut self, t: &TrialRecord) {
        self.counts[cell_index(t.outcome_a, t.outcome_b)] += 1;
        self.n_total += 1;
    }

    pub fn merge(mut self, other: EmpiricalJoint) -> EmpiricalJoint {
        for (c, o) in self.counts.iter_mut().zip(other.counts) {
            *c += o;
        }
        self.n_total += other.n_total;
        self
    }

    pub fn frequencies(&self) -> [f64; 4] {
        let n = self.n_total.max(1) as f64;
        self.counts.map(|c| c as f64 / n)
    }

    /// `√(p̂(1 − p̂)/n)` per cell.
    pub fn std_errors(&self) -> [f64; 4] {
        let n = self.n_total.max(1) as f64;
        self.frequencies().map(|p| (p * (1.0 - p) / n).sqrt())
    }

    /// `(p̂ − p)/σ` per cell with `σ` taken from the exact `p`. A cell with
    /// `p = 0` scores 0 when empty and infinity otherwise.
    pub fn z_scores(&self, exact: &JointDist) -> [f64; 4] {
        let n = self.n_total.max(1) as f64;
        let freq = self.frequencies();
        let mut z = [0.0; 4];
        for (i, p) in exact.cells().into_iter().enumerate() {
            let sigma = (p * (1.0 - p) / n).sqrt();
            let diff = freq[i] - p;
            z[i] = if sigma > 0.0 {
                diff / sigma
            } else if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY.copysign(diff)
            };
        }
        z
    }

    /// True if every cell is within `k` standard errors of `exact`.
    pub fn within_sigma(&self, exact: &JointDist, k: f64) -> bool {
        self.z_scores(exact).iter().all(|z| z.abs() <= k)
    }

    pub fn marginal(&self, wing: Wing) -> f64 {
        let f = self.frequencies();
        match wing {
            Wing::A => f[0] + f[1],
            Wing::B => f[0] + f[2],
        }
    }

    pub fn marginal_std_error(&self, wing: Wing) -> f64 {
        let p = self.marginal(wing);
        (p * (1.0 - p) / self.n_total.max(1) as f64).sqrt()
    }

    /// Pearson chi-square against `exact`. Cells with zero expectation drop
    /// out when empty; a count in such a cell makes the statistic infinite.
    pub fn chi_square(&self, exact: &JointDist) -> ChiSquareTest {
        let n = self.n_total as f64;
        let mut statistic = 0.0;
        let mut used = 0usize;
        for (count, p) in self.counts.iter().zip(exact.cells()) {
            let expected = n * p;
            if expected > 0.0 {
                statistic += (*count as f64 - expected).powi(2) / expected;
                used += 1;
            } else if *count > 0 {
                statistic = f64::INFINITY;
            }
        }
        let degrees_of_freedom = used.saturating_sub(1);
        let p_value = if statistic.is_infinite() {
            0.0
        } else if degrees_of_freedom == 0 {
            1.0
        } else {
            let dist = ChiSquared::new(degrees_of_freedom as f64).expect("positive dof");
            dist.sf(statistic)
        };
        ChiSquareTest { statistic, degrees_of_freedom, p_value }
    }
}

/// `n` trials of `model` at `(a, b)` with the default batch size.
pub fn run_trials(model: &Model, a: Angle, b: Angle, n: u64, seed: u64) -> Result<EmpiricalJoint> {
    run_trials_batched(model, a, b, n, seed, DEFAULT_BATCH_SIZE)
}

/// `n` trials split into batches of `batch_size`, batch `k` drawing from
/// [`substream`]`(seed, k)`. Batches run in parallel.
pub fn run_trials_batched(
    model: &Model,
    a: Angle,
    b: Angle,
    n: u64,
    seed: u64,
    batch_size: u64,
) -> Result<EmpiricalJoint> {
    if n == 0 {
        return Err(Error::ZeroTrials);
    }
    if batch_size == 0 {
        return Err(Error::ZeroBatch);
    }
    let sampler = TrialSampler::new(model, a, b);
    let batches = n.div_ceil(batch_size);
    let total = (0..batches)
        .into_par_iter()
        .map(|k| {
            let mut rng = substream(seed, k);
            let len = batch_size.min(n - k * batch_size);
            let mut counts = EmpiricalJoint::default();
            for _ in 0..len {
                counts.record(&sampler.sample(&mut rng));
            }
            counts
        })
        .reduce(EmpiricalJoint::default, EmpiricalJoint::merge);
    Ok(total)
}

/// Writes the same trials [`run_trials`] would count, one CSV line each
/// (`a,b,lambda,A,B`), and returns their counts.
pub fn write_trial_log<W: Write>(
    out: &mut W,
    model: &Model,
    a: Angle,
    b: Angle,
    n: u64,
    seed: u64,
) -> Result<EmpiricalJoint> {
    if n == 0 {
        return Err(Error::ZeroTrials);
    }
    let sampler = TrialSampler::new(model, a, b);
    let mut counts = EmpiricalJoint::default();
    let io_err = |e: io::Error| Error::InvalidArgument(format!("trial log: {e}"));
    for k in 0..n.div_ceil(DEFAULT_BATCH_SIZE) {
        let mut rng = substream(seed, k);
        for _ in 0..DEFAULT_BATCH_SIZE.min(n - k * DEFAULT_BATCH_SIZE) {
            let t = sampler.sample(&mut rng);
            counts.record(&t);
            writeln!(out, "{t}").map_err(io_err)?;
        }
    }
    Ok(counts)
}

/// Parses a trial log written by [`write_trial_log`].
pub fn read_trial_log<R: BufRead>(input: R) -> Result<Vec<TrialRecord>> {
    input
        .lines()
        .filter(|l| l.as_ref().map_or(true, |s| !s.trim().is_empty()))
        .map(|l| {
            l.map_err(|e| Error::InvalidArgument(format!("trial log: {e}")))?.parse()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{hall_ahat, hall_lambda_law, simplistic_lambda_law};
    use std::f64::consts::{FRAC_PI_8, PI};

    fn ang(x: f64) -> Angle {
        Angle::new(x).unwrap()
    }

    #[test]
    fn point_mass_always_hits() {
        let law = LambdaLaw::point(Angle::ZERO);
        let mut rng = substream(1, 0);
        for _ in 0..1000 {
            assert_eq!(sample_lambda(&law, &mut rng), Angle::ZERO);
        }
    }

    #[test]
    fn simplistic_atoms_hit_evenly() {
        let law = simplistic_lambda_law(ang(0.0), ang(FRAC_PI_8));
        let sampler = LambdaSampler::new(&law);
        let mut rng = substream(7, 0);
        let n = 1_000_000;
        let mut hits = std::collections::BTreeMap::new();
        for _ in 0..n {
            let l = sampler.sample(&mut rng);
            *hits.entry(l.radians().to_bits()).or_insert(0u64) += 1;
        }
        assert_eq!(hits.len(), 4);
        let sigma = (0.25f64 * 0.75 / n as f64).sqrt();
        for count in hits.values() {
            assert!((*count as f64 / n as f64 - 0.25).abs() < 3.0 * sigma);
        }
    }

    #[test]
    fn uniform_hall_law_passes_ks() {
        let law = hall_lambda_law(ang(0.0), ang(0.0));
        let sampler = LambdaSampler::new(&law);
        let mut rng = substream(11, 0);
        let n = 100_000;
        let mut xs: Vec<f64> = (0..n).map(|_| sampler.sample(&mut rng).radians() / PI).collect();
        xs.sort_by(f64::total_cmp);
        let d = xs
            .iter()
            .enumerate()
            .map(|(i, x)| ((i + 1) as f64 / n as f64 - x).max(x - i as f64 / n as f64))
            .fold(0.0, f64::max);
        // asymptotic 1% critical value of the one-sample KS statistic
        assert!(d < 1.628 / (n as f64).sqrt(), "D = {d}");
    }

    #[test]
    fn hall_trials_follow_ahat() {
        let model = Model::hall();
        let (a, b) = (ang(0.3), ang(1.9));
        let mut rng = substream(3, 0);
        for _ in 0..10_000 {
            let t = sample_outcomes(&model, a, b, &mut rng);
            let l = t.lambda.unwrap();
            assert_eq!(t.outcome_a, hall_ahat(a, l));
            assert_eq!(t.outcome_b, hall_ahat(b, l));
        }
    }

    #[test]
    fn aligned_malus_always_passes() {
        let m = HiddenVariableModel::new(
            "aligned",
            crate::model::LambdaRule::Fixed(LambdaLaw::point(ang(0.4))),
            crate::model::ResponseRule::MALUS,
            crate::model::ResponseRule::MALUS,
            true,
        )
        .unwrap();
        let model = Model::HiddenVariable(m);
        let mut rng = substream(5, 0);
        for _ in 0..1000 {
            let t = sample_outcomes(&model, ang(0.4), ang(1.0), &mut rng);
            assert_eq!(t.outcome_a, Outcome::Plus);
        }
    }

    #[test]
    fn determinism_and_zero_trials() {
        let m = Model::simplistic();
        let r1 = run_trials(&m, ang(0.2), ang(0.9), 50_000, 99).unwrap();
        let r2 = run_trials(&m, ang(0.2), ang(0.9), 50_000, 99).unwrap();
        assert_eq!(r1, r2);
        let r3 = run_trials(&m, ang(0.2), ang(0.9), 50_000, 100).unwrap();
        assert_ne!(r1, r3);
        assert_eq!(run_trials(&m, ang(0.0), ang(0.0), 0, 1), Err(Error::ZeroTrials));
        assert_eq!(run_trials_batched(&m, ang(0.0), ang(0.0), 5, 1, 0), Err(Error::ZeroBatch));
    }

    #[test]
    fn baseline_equal_settings_only_fill_diagonal() {
        for n in [1, 17, 100_000] {
            let r = run_trials(&Model::baseline(), ang(0.6), ang(0.6), n, 4).unwrap();
            assert_eq!(r.counts[1] + r.counts[2], 0);
            assert_eq!(r.counts.iter().sum::<u64>(), n);
        }
    }

    #[test]
    fn batch_size_does_not_shift_expectations() {
        let m = Model::hall();
        let (a, b) = (ang(0.0), ang(FRAC_PI_8));
        let exact = m.joint(a, b).unwrap();
        for batch in [1000, 4096, DEFAULT_BATCH_SIZE] {
            let r = run_trials_batched(&m, a, b, 400_000, 21, batch).unwrap();
            assert_eq!(r.n_total, 400_000);
            assert!(r.within_sigma(&exact, 4.0), "batch {batch}");
        }
    }

    #[test]
    fn trial_log_round_trips_and_matches_counts() {
        let m = Model::hall();
        let mut buf = Vec::new();
        let counts = write_trial_log(&mut buf, &m, ang(0.1), ang(0.8), 500, 8).unwrap();
        assert_eq!(counts, run_trials(&m, ang(0.1), ang(0.8), 500, 8).unwrap());
        let trials = read_trial_log(buf.as_slice()).unwrap();
        assert_eq!(trials.len(), 500);
        let mut recount = EmpiricalJoint::default();
        for t in &trials {
            recount.record(t);
        }
        assert_eq!(recount, counts);

        let mut buf = Vec::new();
        write_trial_log(&mut buf, &Model::quantum(), ang(0.0), ang(0.3), 3, 1).unwrap();
        let qm = read_trial_log(buf.as_slice()).unwrap();
        assert!(qm.iter().all(|t| t.lambda.is_none()));
        assert!("1,2,3".parse::<TrialRecord>().is_err());
        assert!("0,0,0,2,1".parse::<TrialRecord>().is_err());
    }

    #[test]
    fn chi_square_edge_cases() {
        let exact = JointDist::new(0.5, 0.0, 0.0, 0.5).unwrap();
        let ok = EmpiricalJoint { counts: [50, 0, 0, 50], n_total: 100 };
        let t = ok.chi_square(&exact);
        assert_eq!(t.degrees_of_freedom, 1);
        assert_eq!(t.statistic, 0.0);
        assert!(t.passes(1e-3));
        let bad = EmpiricalJoint { counts: [50, 1, 0, 49], n_total: 100 };
        assert!(!bad.chi_square(&exact).passes(1e-3));
        assert_eq!(bad.z_scores(&exact)[1], f64::INFINITY);
    }
}

//! Manifest-driven runs, result records and the verification battery.
//!
//! Every task is described by an [`ExperimentManifest`] and produces a
//! [`ResultRecord`]. The command-line tool builds a manifest from its flags
//! and goes through [`run_manifest`], so a run can always be replayed from
//! the manifest it emitted.

pub mod battery;
pub mod manifest;
pub mod record;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::time::Instant;

use serde_json::{json, Map, Value};

use crate::analysis::{chsh, chsh_scan, even_probes, mutual_information_report, no_signaling_report};
use crate::angle::Angle;
use crate::error::{Error, Result};
use crate::joint::JointDist;
use crate::model::{qm_joint, Model};
use crate::montecarlo::{run_trials, write_trial_log, EmpiricalJoint};

pub use battery::{run_battery, BatteryConfig, Tolerances};
pub use manifest::{ExperimentManifest, ModelSpec, SettingsSpec, Task};
pub use record::{Check, Relation, ResultRecord, TOOL_VERSION};

/// 17 significant digits, enough to round-trip any `f64`.
pub fn full(x: f64) -> String {
    format!("{x:.16e}")
}

fn joint_json(j: &JointDist) -> Value {
    json!({ "p_pp": j.p_pp, "p_pm": j.p_pm, "p_mp": j.p_mp, "p_mm": j.p_mm })
}

fn empirical_json(e: &EmpiricalJoint, exact: &JointDist) -> Value {
    let chi = e.chi_square(exact);
    json!({
        "counts": e.counts,
        "n_total": e.n_total,
        "frequencies": e.frequencies(),
        "std_errors": e.std_errors(),
        "z_scores": e.z_scores(exact),
        "chi_square": chi,
    })
}

fn pair_json(a: Angle, b: Angle) -> Value {
    json!([a.radians(), b.radians()])
}

/// Runs the task a manifest describes.
pub fn run_manifest(manifest: &ExperimentManifest) -> Result<ResultRecord> {
    manifest.validate()?;
    let started = Instant::now();
    let tol = Tolerances::default().with_overrides(&manifest.tolerances)?;
    let mut values = Map::new();
    let mut checks = Vec::new();

    match manifest.task {
        manifest::Task::Joint => {
            let model = manifest.model.resolve()?;
            let pairs = manifest.settings.as_ref().expect("validated").pairs()?;
            let mut rows = Vec::new();
            for (i, (a, b)) in pairs.iter().enumerate() {
                let exact = model.joint(*a, *b)?;
                let qm_tv = exact.tv_distance(&qm_joint(*a, *b));
                let mut row = json!({
                    "settings": pair_json(*a, *b),
                    "exact": joint_json(&exact),
                    "correlator": exact.correlator(),
                    "tv_distance_to_qm": qm_tv,
                    "differs_from_qm": qm_tv > tol.qm_equivalence_hall,
                });
                if let Some(n) = manifest.trials {
                    let seed = battery::mix_seed(manifest.seed.wrapping_add(i as u64));
                    let emp = run_trials(&model, *a, *b, n, seed)?;
                    row["empirical"] = empirical_json(&emp, &exact);
                    let max_z = emp.z_scores(&exact).iter().fold(0.0f64, |m, z| m.max(z.abs()));
                    checks.push(
                        Check::new(
                            format!("monte_carlo/{}/{}", a.radians(), b.radians()),
                            Relation::AtMost,
                            max_z,
                            tol.monte_carlo_sigma,
                            0.0,
                        )
                        .with_detail("max |z| over cells"),
                    );
                }
                rows.push(row);
            }
            values.insert("joints".into(), Value::Array(rows));
        }
        manifest::Task::Chsh => {
            let model = manifest.model.resolve()?;
            let s = manifest.settings.as_ref().expect("validated").chsh()?;
            let value = chsh(&model, &s)?;
            let corr = |a, b| model.correlator(a, b);
            values.insert("s".into(), json!(value));
            values.insert("abs_s".into(), json!(value.abs()));
            values.insert(
                "correlators".into(),
                json!({
                    "ab": corr(s.a, s.b)?,
                    "ab_prime": corr(s.a, s.b_prime)?,
                    "a_prime_b": corr(s.a_prime, s.b)?,
                    "a_prime_b_prime": corr(s.a_prime, s.b_prime)?,
                }),
            );
            values.insert("exceeds_local_bound".into(), json!(value.abs() > 2.0 + tol.chsh_scan));
        }
        manifest::Task::Scan => {
            let model = manifest.model.resolve()?;
            let grid_n = manifest.options.grid_n.unwrap_or(16);
            let refine = manifest.options.refine_iters.unwrap_or(50);
            let result = chsh_scan(&model, grid_n, refine)?;
            values.insert("scan".into(), serde_json::to_value(result).expect("serializable"));
            if let Some(target) = battery::chsh_target(&model) {
                checks.push(Check::new(
                    format!("chsh_scan/{}", model.name()),
                    Relation::Within,
                    result.max_abs_s,
                    target,
                    tol.chsh_scan,
                ));
            }
        }
        manifest::Task::Mi => {
            let model = manifest.model.resolve()?;
            let ensemble = manifest.ensemble()?;
            let mi = mutual_information_report(&model, &ensemble)?;
            values.insert("mutual_information".into(), serde_json::to_value(mi).expect("serializable"));
            values.insert("ensemble_size".into(), json!(ensemble.members().len()));
            if model.name() == "hall" {
                checks.push(
                    Check::new("mutual_information/hall", Relation::AtMost, mi.total, tol.mi_ceiling_bits, 0.0)
                        .with_detail("bits"),
                );
            }
        }
        manifest::Task::Nosignal => {
            let model = manifest.model.resolve()?;
            let probes = match (&manifest.settings, manifest.options.probes) {
                (_, Some(n)) => even_probes(n),
                (Some(s), None) => s.axis()?,
                (None, None) => even_probes(16),
            };
            let report = no_signaling_report(&model, &probes)?;
            values.insert("no_signaling".into(), serde_json::to_value(report).expect("serializable"));
            values.insert("probes".into(), json!(probes.len()));
            checks.push(Check::new(
                format!("no_signaling/{}", model.name()),
                Relation::AtMost,
                report.deviation,
                0.0,
                tol.no_signaling,
            ));
        }
        manifest::Task::Sample => {
            let model = manifest.model.resolve()?;
            let pairs = manifest.settings.as_ref().expect("validated").pairs()?;
            let n = manifest.trial_count();
            let mut log = match &manifest.options.trial_log {
                Some(path) => Some(BufWriter::new(
                    File::create(path).map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?,
                )),
                None => None,
            };
            let mut rows = Vec::new();
            for (i, (a, b)) in pairs.iter().enumerate() {
                let seed = battery::mix_seed(manifest.seed.wrapping_add(i as u64));
                let exact = model.joint(*a, *b)?;
                let emp = match log.as_mut() {
                    Some(w) => write_trial_log(w, &model, *a, *b, n, seed)?,
                    None => run_trials(&model, *a, *b, n, seed)?,
                };
                let chi = emp.chi_square(&exact);
                checks.push(
                    Check::new(
                        format!("sample/{i}/chi_square"),
                        Relation::Exceeds,
                        chi.p_value,
                        tol.chi_square_alpha,
                        0.0,
                    )
                    .with_detail(format!("p-value at ({}, {})", a.radians(), b.radians())),
                );
                rows.push(json!({
                    "settings": pair_json(*a, *b),
                    "exact": joint_json(&exact),
                    "empirical": empirical_json(&emp, &exact),
                }));
            }
            if let Some(mut w) = log {
                w.flush().map_err(|e| Error::InvalidArgument(format!("trial log: {e}")))?;
            }
            values.insert("samples".into(), Value::Array(rows));
        }
        manifest::Task::Verify => {
            let mut config = manifest.options.battery.clone().unwrap_or_default();
            if manifest.model.name != "all" {
                config.models = vec![manifest.model.name.clone()];
            }
            let (battery_checks, battery_values) = run_battery(&config, &tol, manifest.seed)?;
            checks = battery_checks;
            values.extend(battery_values);
        }
    }

    checks.sort_by(|x, y| x.name.cmp(&y.name));
    let wall_time_seconds = manifest.options.record_timing.then(|| started.elapsed().as_secs_f64());
    Ok(ResultRecord {
        manifest_digest: manifest.digest(),
        task: manifest.task,
        inputs: serde_json::to_value(manifest.without_output()).expect("manifest serializes"),
        values: Value::Object(values),
        checks,
        wall_time_seconds,
        tool_version: TOOL_VERSION.to_string(),
    })
}

/// Correlator curves `E(Δ)` at settings `(0, Δ)`: a CSV table with `delta`
/// in the first column and one column per model.
pub fn cmd_curve(models: &[Model], deltas: &[f64]) -> Result<String> {
    if models.is_empty() {
        return Err(Error::InvalidArgument("curve needs at least one model".into()));
    }
    let mut out = String::from("delta");
    for m in models {
        out.push(',');
        out.push_str(m.name());
    }
    out.push('\n');
    for d in deltas {
        let b = Angle::new(*d)?;
        out.push_str(&full(*d));
        for m in models {
            out.push(',');
            out.push_str(&full(m.correlator(Angle::ZERO, b)?));
        }
        out.push('\n');
    }
    Ok(out)
}

/// `steps + 1` evenly spaced values from `start` to `stop` inclusive.
pub fn delta_grid(start: f64, stop: f64, steps: usize) -> Vec<f64> {
    if steps == 0 {
        return vec![start];
    }
    (0..=steps).map(|k| start + (stop - start) * k as f64 / steps as f64).collect()
}

/// Writes a record as JSON, or its checks as CSV.
pub fn write_record(record: &ResultRecord, spec: &manifest::OutputSpec) -> Result<()> {
    let text = match spec.format {
        manifest::OutputFormat::Json => record.to_json() + "\n",
        manifest::OutputFormat::Csv => {
            let mut s = String::from("name,relation,value,reference,tolerance,passed\n");
            for c in &record.checks {
                s.push_str(&format!(
                    "{},{:?},{},{},{},{}\n",
                    c.name,
                    c.relation,
                    full(c.value),
                    full(c.reference),
                    full(c.tolerance),
                    c.passed
                ));
            }
            s
        }
    };
    std::fs::write(&spec.path, text).map_err(|e| Error::InvalidArgument(format!("{}: {e}", spec.path.display())))
}

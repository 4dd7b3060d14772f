//! Corpus-level evaluation and report formatting.

use std::fmt::Write as _;

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::{consistent, correct_count};
use crate::dsl::{format_program, Program};
use crate::generator::{derive_seed, inject_noise, Example, Instance, NoiseSpec, SeededRng};
use crate::model::{Model, ModelError};
use crate::nn::Real;
use crate::search::{induce, synthesize, InductionOptions, SynthesisOptions};

/// What a system produced for one instance.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemOutput {
    /// One prediction per assessment input; `None` when nothing was produced.
    pub predictions: Vec<Option<String>>,
    /// Synthesis only.
    pub program: Option<Program>,
    /// `None` for systems without a notion of consistency.
    pub consistent: Option<bool>,
}

/// Anything that maps observed examples to assessment predictions.
pub trait System {
    fn run(&self, observed: &[Example], inputs: &[String]) -> Result<SystemOutput, ModelError>;

    /// Short description for report headers.
    fn describe(&self) -> String;
}

pub struct Synthesizer<'m, T> {
    pub model: &'m Model<T>,
    pub options: SynthesisOptions,
}

impl<T: Real> System for Synthesizer<'_, T> {
    fn run(&self, observed: &[Example], inputs: &[String]) -> Result<SystemOutput, ModelError> {
        let r = synthesize(self.model, observed, inputs, &self.options)?;
        let predictions = if r.program.is_some() { r.predictions } else { vec![None; inputs.len()] };
        let ok = r.program.as_ref().is_some_and(|p| consistent(p, observed));
        Ok(SystemOutput { predictions, program: r.program, consistent: Some(ok) })
    }

    fn describe(&self) -> String {
        format!("synthesis beam={} metric={:?} dp={}", self.options.beam, self.options.metric, self.options.dp_enabled())
    }
}

pub struct Inducer<'m, T> {
    pub model: &'m Model<T>,
    pub options: InductionOptions,
}

impl<T: Real> System for Inducer<'_, T> {
    fn run(&self, observed: &[Example], inputs: &[String]) -> Result<SystemOutput, ModelError> {
        let outs = induce(self.model, observed, inputs, &self.options)?;
        Ok(SystemOutput { predictions: outs.into_iter().map(Some).collect(), program: None, consistent: None })
    }

    fn describe(&self) -> String {
        format!("induction beam={}", self.options.beam)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceOutcome {
    pub consistent: Option<bool>,
    pub correct: usize,
    pub total: usize,
    pub program: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub noise: usize,
    /// Absent for induction.
    pub consistency: Option<f64>,
    pub all_example: f64,
    pub average_example: f64,
    pub instances: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub outcomes: Vec<InstanceOutcome>,
}

impl ReportRow {
    fn from_outcomes(noise: usize, outcomes: Vec<InstanceOutcome>) -> ReportRow {
        let n = outcomes.len();
        let frac = |k: usize, d: usize| if d == 0 { 0.0 } else { k as f64 / d as f64 };
        let all = outcomes.iter().filter(|o| o.correct == o.total).count();
        let correct: usize = outcomes.iter().map(|o| o.correct).sum();
        let total: usize = outcomes.iter().map(|o| o.total).sum();
        let consistency = if outcomes.iter().all(|o| o.consistent.is_some()) && n > 0 {
            Some(frac(outcomes.iter().filter(|o| o.consistent == Some(true)).count(), n))
        } else {
            None
        };
        ReportRow {
            noise,
            consistency,
            all_example: frac(all, n),
            average_example: frac(correct, total),
            instances: n,
            outcomes,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub system: String,
    pub observed: Option<usize>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub config: ReportConfig,
    pub rows: Vec<ReportRow>,
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    /// Aligned text table, one line per row.
    pub fn to_text(&self) -> String {
        let mut s = format!("# {}\n", self.config.system);
        let _ = writeln!(s, "{:>5}  {:>11}  {:>11}  {:>15}  {:>9}", "noise", "consistency", "all_example", "average_example", "instances");
        for r in &self.rows {
            let c = r.consistency.map_or("-".to_string(), |c| format!("{c:.3}"));
            let _ = writeln!(
                s,
                "{:>5}  {:>11}  {:>11.3}  {:>15.3}  {:>9}",
                r.noise, c, r.all_example, r.average_example, r.instances
            );
        }
        s
    }
}

/// Runs `system` on every instance and aggregates one report row.
pub fn evaluate_corpus(system: &dyn System, instances: &[Instance], noise: usize) -> Result<ReportRow, ModelError> {
    let mut outcomes = Vec::with_capacity(instances.len());
    for inst in instances {
        let inputs: Vec<String> = inst.assessment.iter().map(|e| e.input.clone()).collect();
        let out = system.run(&inst.observed, &inputs)?;
        outcomes.push(InstanceOutcome {
            consistent: out.consistent,
            correct: correct_count(&out.predictions, &inst.assessment),
            total: inst.assessment.len(),
            program: out.program.as_ref().map(format_program),
        });
    }
    Ok(ReportRow::from_outcomes(noise, outcomes))
}

/// Applies `level` edits to the observed examples of each instance.
/// Deterministic in `seed`, `level`, and instance position.
pub fn noisy_copy(instances: &[Instance], level: usize, seed: u64) -> Vec<Instance> {
    instances
        .iter()
        .enumerate()
        .map(|(k, inst)| {
            if level == 0 {
                return inst.clone();
            }
            let mut rng = SeededRng::seed_from_u64(derive_seed(derive_seed(seed, level as u64), k as u64));
            inject_noise(&mut rng, inst, NoiseSpec { chars: level })
        })
        .collect()
}

/// One report row per noise level; assessment examples stay clean.
pub fn noise_sweep(
    system: &dyn System,
    instances: &[Instance],
    levels: &[usize],
    seed: u64,
) -> Result<MetricsReport, ModelError> {
    let rows = levels
        .iter()
        .map(|&l| evaluate_corpus(system, &noisy_copy(instances, l, seed), l))
        .collect::<Result<_, _>>()?;
    Ok(MetricsReport {
        config: ReportConfig { system: system.describe(), observed: instances.first().map(|i| i.observed.len()), seed },
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome(correct: usize, total: usize) -> InstanceOutcome {
        InstanceOutcome { consistent: Some(correct == total), correct, total, program: None }
    }

    #[test]
    fn six_and_five_of_six() {
        let row = ReportRow::from_outcomes(0, vec![outcome(6, 6), outcome(5, 6)]);
        assert_eq!(row.all_example, 0.5);
        assert!((row.average_example - 11.0 / 12.0).abs() < 1e-12);
        assert_eq!(row.consistency, Some(0.5));
    }

    #[test]
    fn all_wrong_is_zero() {
        let row = ReportRow::from_outcomes(0, vec![outcome(0, 6), outcome(0, 6)]);
        assert_eq!((row.all_example, row.average_example, row.consistency), (0.0, 0.0, Some(0.0)));
    }

    #[test]
    fn induction_rows_have_no_consistency() {
        let o = InstanceOutcome { consistent: None, correct: 1, total: 2, program: None };
        let row = ReportRow::from_outcomes(1, vec![o]);
        assert_eq!(row.consistency, None);
        let report = MetricsReport { config: ReportConfig { system: "x".into(), observed: Some(4), seed: 0 }, rows: vec![row] };
        let v: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
        assert!(v["rows"][0]["consistency"].is_null());
        assert!(report.to_text().contains("  -  ") || report.to_text().contains(" - "));
    }
}

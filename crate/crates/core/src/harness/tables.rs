use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{benchmark_abstraction, compute_metrics, run_pipeline, HarnessError, PipelineConfig, TrialMetrics};
use crate::dynamics::{ModelSimulator, PwaModel};
use crate::seeds;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TablesConfig {
    pub pipeline: PipelineConfig,
    /// Noise of the simulated black box.
    pub noise_sigma: f64,
    /// Active sample budgets swept at `fixed_steps` refinement passes.
    pub sample_sweep: Vec<usize>,
    pub fixed_steps: usize,
    /// Refinement passes swept at `fixed_samples` active samples.
    pub step_sweep: Vec<usize>,
    pub fixed_samples: usize,
}

impl Default for TablesConfig {
    fn default() -> Self {
        TablesConfig {
            pipeline: PipelineConfig::default(),
            noise_sigma: 0.1,
            sample_sweep: vec![20, 40, 60],
            fixed_steps: 20,
            step_sweep: vec![5, 10, 20],
            fixed_samples: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub seed: u64,
    pub metrics: Option<TrialMetrics>,
    /// Stage and message of a failed trial.
    pub error: Option<String>,
    /// Wall time, kept out of the serialized report so it stays reproducible.
    #[serde(skip)]
    pub elapsed_ms: u128,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    /// `"samples"` or `"steps"`: which parameter this row sweeps.
    pub table: String,
    pub active_samples: usize,
    pub refinement_steps: usize,
    pub trials: Vec<TrialOutcome>,
    /// Means over the trials that produced a value.
    pub mean_sigma_bar: Option<f64>,
    pub mean_param_error: Option<f64>,
    pub mean_region_error: Option<f64>,
    /// Trials that failed or found no σ.
    pub failures: usize,
}

impl TableRow {
    pub fn swept_value(&self) -> usize {
        if self.table == "samples" {
            self.active_samples
        } else {
            self.refinement_steps
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub benchmark_states: usize,
    pub rows: Vec<TableRow>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = values.collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

impl ExperimentReport {
    pub fn rows_of<'a>(&'a self, table: &'a str) -> impl Iterator<Item = &'a TableRow> + 'a {
        self.rows.iter().filter(move |r| r.table == table)
    }

    /// One line per trial.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("table,active_samples,refinement_steps,trial,seed,modes,sigma_bar,param_error,region_error,flag\n");
        for r in &self.rows {
            for t in &r.trials {
                let blank = String::new;
                let (modes, sb, pe, re, flag) = match &t.metrics {
                    Some(m) => (
                        m.modes_est.to_string(),
                        m.sigma_bar.map_or_else(blank, |v| v.to_string()),
                        m.param_error.to_string(),
                        m.region_error.to_string(),
                        if m.sigma.is_none() {
                            "no_sigma"
                        } else if m.mode_count_mismatch {
                            "mode_count_mismatch"
                        } else {
                            ""
                        },
                    ),
                    None => (blank(), blank(), blank(), blank(), "failed"),
                };
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{}",
                    r.table, r.active_samples, r.refinement_steps, t.trial, t.seed, modes, sb, pe, re, flag
                );
            }
        }
        out
    }

    /// Both sweeps as markdown tables of mean σ̄.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        for (table, title) in [
            ("samples", "Active samples (refinement steps fixed)"),
            ("steps", "Refinement steps (active samples fixed)"),
        ] {
            let rows: Vec<&TableRow> = self.rows_of(table).collect();
            if rows.is_empty() {
                continue;
            }
            let _ = writeln!(out, "### {title}\n");
            let head: Vec<String> = rows.iter().map(|r| r.swept_value().to_string()).collect();
            let _ = writeln!(out, "| | {} |", head.join(" | "));
            let _ = writeln!(out, "|---|{}", "---|".repeat(rows.len()));
            let cell = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.3}"));
            let line = |name: &str, f: &dyn Fn(&TableRow) -> Option<f64>| {
                format!("| {name} | {} |", rows.iter().map(|r| cell(f(r))).collect::<Vec<_>>().join(" | "))
            };
            let _ = writeln!(out, "{}", line("mean σ̄", &|r| r.mean_sigma_bar));
            let _ = writeln!(out, "{}", line("mean parameter error", &|r| r.mean_param_error));
            let _ = writeln!(out, "{}", line("mean region error", &|r| r.mean_region_error));
            let fails: Vec<String> = rows.iter().map(|r| r.failures.to_string()).collect();
            let _ = writeln!(out, "| failed trials | {} |\n", fails.join(" | "));
        }
        out
    }

    pub fn timings_csv(&self) -> String {
        let mut out = String::from("table,active_samples,refinement_steps,trial,elapsed_ms\n");
        for r in &self.rows {
            for t in &r.trials {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    r.table, r.active_samples, r.refinement_steps, t.trial, t.elapsed_ms
                );
            }
        }
        out
    }
}

fn run_trial(truth: &PwaModel, bench: &crate::abstraction::Abstraction, cfg: &PipelineConfig, noise: f64, trial: usize) -> TrialOutcome {
    let start = Instant::now();
    let seed = seeds::derive(cfg.seed, &[trial as u64]);
    let trial_cfg = PipelineConfig {
        seed,
        ..cfg.clone()
    };
    let result = (|| -> Result<TrialMetrics, HarnessError> {
        let mut bb = ModelSimulator::new(truth.with_noise(noise)?, seeds::derive(seed, &[0]));
        let out = run_pipeline(&mut bb, &trial_cfg, None)?;
        compute_metrics(
            truth,
            &out.model,
            &bench.ts,
            &out.abstraction.ts,
            cfg.sigma_step,
            cfg.hausdorff_samples,
            seeds::derive(seed, &[6]),
        )
    })();
    let (metrics, error) = match result {
        Ok(m) => (Some(m), None),
        Err(e) => (None, Some(format!("{}: {e}", e.stage()))),
    };
    TrialOutcome {
        trial,
        seed,
        metrics,
        error,
        elapsed_ms: start.elapsed().as_millis(),
    }
}

/// Both sweeps over `trials` trials each. Trial `k` uses the same seed in
/// every column, so columns differ only in the swept parameter. Failed
/// trials are recorded and excluded from the means.
pub fn run_tables(truth: &PwaModel, cfg: &TablesConfig) -> Result<ExperimentReport, HarnessError> {
    cfg.pipeline.validate()?;
    let bench = benchmark_abstraction(truth, &cfg.pipeline)?;
    let mut specs: Vec<(&str, usize, usize)> = Vec::new();
    for &s in &cfg.sample_sweep {
        specs.push(("samples", s, cfg.fixed_steps));
    }
    for &r in &cfg.step_sweep {
        specs.push(("steps", cfg.fixed_samples, r));
    }
    let jobs: Vec<(usize, usize)> = (0..specs.len())
        .flat_map(|row| (0..cfg.pipeline.trials).map(move |t| (row, t)))
        .collect();
    let outcomes: Vec<TrialOutcome> = jobs
        .par_iter()
        .map(|&(row, t)| {
            let (_, samples, steps) = specs[row];
            let pcfg = PipelineConfig {
                active_sample_budget: samples,
                refinement_cap: steps,
                ..cfg.pipeline.clone()
            };
            run_trial(truth, &bench, &pcfg, cfg.noise_sigma, t)
        })
        .collect();
    let mut rows = Vec::new();
    for (row, (table, samples, steps)) in specs.iter().enumerate() {
        let trials: Vec<TrialOutcome> = outcomes
            .iter()
            .zip(&jobs)
            .filter(|(_, j)| j.0 == row)
            .map(|(o, _)| o.clone())
            .collect();
        let ok = || trials.iter().filter_map(|t| t.metrics.as_ref());
        rows.push(TableRow {
            table: table.to_string(),
            active_samples: *samples,
            refinement_steps: *steps,
            mean_sigma_bar: mean(ok().filter_map(|m| m.sigma_bar)),
            mean_param_error: mean(ok().map(|m| m.param_error)),
            mean_region_error: mean(ok().map(|m| m.region_error)),
            failures: trials
                .iter()
                .filter(|t| t.metrics.as_ref().is_none_or(|m| m.sigma_bar.is_none()))
                .count(),
            trials,
        });
    }
    Ok(ExperimentReport {
        benchmark_states: bench.ts.cells().count(),
        rows,
    })
}

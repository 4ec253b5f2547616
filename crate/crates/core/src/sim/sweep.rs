//! Monte Carlo sweeps over noise level or number of images.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{generate, ScenarioConfig, SimError};
use crate::geometry::PoseError;
use crate::metrics::{aggregate, Aggregate};
use crate::pipeline::{run, PipelineConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Lambda,
    NumImages,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Lambda => "lambda",
            SweepAxis::NumImages => "num_images",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub scenario: ScenarioConfig,
    pub pipeline: PipelineConfig,
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub trials: usize,
    /// Images used per calibration on the lambda axis (all when `None`).
    pub num_images: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis_value: f64,
    pub trial: usize,
    pub seed: u64,
    /// Per-axis error averaged over cameras; NaN when the run failed.
    pub error: PoseError,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub axis_value: f64,
    /// Over successful trials; `None` when every trial failed.
    pub stats: Option<Aggregate>,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn summary(&self) -> Vec<SweepSummary> {
        let mut values: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !values.iter().any(|v| v.to_bits() == r.axis_value.to_bits()) {
                values.push(r.axis_value);
            }
        }
        values
            .into_iter()
            .map(|v| {
                let rows: Vec<_> = self
                    .rows
                    .iter()
                    .filter(|r| r.axis_value.to_bits() == v.to_bits())
                    .collect();
                let ok: Vec<PoseError> = rows
                    .iter()
                    .filter(|r| r.error.as_array().iter().all(|x| x.is_finite()))
                    .map(|r| r.error)
                    .collect();
                SweepSummary {
                    axis_value: v,
                    stats: aggregate(&ok).ok(),
                    failures: rows.len() - ok.len(),
                }
            })
            .collect()
    }
}

fn failed(axis_value: f64, trial: usize, seed: u64) -> SweepRow {
    SweepRow {
        axis_value,
        trial,
        seed,
        error: PoseError::from_array([f64::NAN; 6]),
        converged: false,
    }
}

fn calibrate_row(
    dataset: &crate::dataset::CalibrationDataset,
    pipeline: &PipelineConfig,
    axis_value: f64,
    trial: usize,
    seed: u64,
) -> SweepRow {
    let report = match run(dataset, pipeline) {
        Ok(r) => r,
        Err(_) => return failed(axis_value, trial, seed),
    };
    let Some(eval) = report.evaluation else {
        return failed(axis_value, trial, seed);
    };
    match aggregate(&eval.per_camera) {
        Ok(a) => SweepRow {
            axis_value,
            trial,
            seed,
            error: a.mean,
            converged: report.diagnostics.converged,
        },
        Err(_) => failed(axis_value, trial, seed),
    }
}

/// Runs `trials` calibrations per value. Trial `t` uses seed
/// `scenario.seed + t` for every value, so values share datasets up to the
/// swept parameter.
pub fn sweep(config: &SweepConfig) -> Result<SweepTable, SimError> {
    config.scenario.validate()?;
    if config.trials == 0 || config.values.is_empty() {
        return Err(SimError::Config("sweep needs at least one value and one trial".into()));
    }
    let rows: Vec<SweepRow> = match config.axis {
        SweepAxis::Lambda => {
            if let Some(v) = config.values.iter().find(|v| !(0.0..=10.0).contains(*v)) {
                return Err(SimError::Config(format!("lambda {v} outside [0, 10]")));
            }
            let jobs: Vec<(f64, usize)> = config
                .values
                .iter()
                .flat_map(|&v| (0..config.trials).map(move |t| (v, t)))
                .collect();
            jobs.par_iter()
                .map(|&(lambda, trial)| {
                    let seed = config.scenario.seed.wrapping_add(trial as u64);
                    let scenario = ScenarioConfig {
                        lambda,
                        seed,
                        ..config.scenario.clone()
                    };
                    match generate(&scenario) {
                        Ok(sim) => {
                            let data = match config.num_images {
                                Some(k) => sim.dataset.first_visible(k),
                                None => sim.dataset,
                            };
                            calibrate_row(&data, &config.pipeline, lambda, trial, seed)
                        }
                        Err(_) => failed(lambda, trial, seed),
                    }
                })
                .collect()
        }
        SweepAxis::NumImages => {
            if let Some(v) = config.values.iter().find(|v| !(**v >= 2.0 && v.fract() == 0.0)) {
                return Err(SimError::Config(format!("image count {v} must be an integer >= 2")));
            }
            let per_trial: Vec<Vec<SweepRow>> = (0..config.trials)
                .into_par_iter()
                .map(|trial| {
                    let seed = config.scenario.seed.wrapping_add(trial as u64);
                    let scenario = ScenarioConfig {
                        seed,
                        ..config.scenario.clone()
                    };
                    let sim = generate(&scenario);
                    config
                        .values
                        .iter()
                        .map(|&v| match &sim {
                            Ok(sim) => {
                                calibrate_row(&sim.dataset.first_visible(v as usize), &config.pipeline, v, trial, seed)
                            }
                            Err(_) => failed(v, trial, seed),
                        })
                        .collect()
                })
                .collect();
            let mut rows: Vec<SweepRow> = per_trial.into_iter().flatten().collect();
            // Value-major order, matching the lambda axis.
            rows.sort_by(|a, b| {
                let ia = config.values.iter().position(|v| *v == a.axis_value);
                let ib = config.values.iter().position(|v| *v == b.axis_value);
                ia.cmp(&ib).then(a.trial.cmp(&b.trial))
            });
            rows
        }
    };
    Ok(SweepTable {
        axis: config.axis,
        rows,
    })
}

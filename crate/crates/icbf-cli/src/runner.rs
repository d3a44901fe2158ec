//! Drives the configured scenario: simulate each requested controller
//! variant, write its trajectory CSV, and collect a summary of safety
//! and tracking metrics.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use icbf::acc::{
    build_acc_scenario, initial_condition_warnings, ControllerVariant,
};
use icbf::controllers::tracking_error_metrics;
use icbf::integrator::{simulate, Trajectory};
use icbf::types::{AugmentedState, ReferenceSignal};

use crate::config::RunConfig;
use crate::csv::write_trajectory_csv;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config: {0}")]
    Config(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Metrics for one completed variant. Safety minima are taken over the
/// emitted CSV channels, so the summary and the files agree exactly.
#[derive(Clone, Debug)]
pub struct VariantMetrics {
    pub min_h_x: f64,
    pub min_h_u: f64,
    pub min_h_e: f64,
    pub max_u: f64,
    pub tail_error: f64,
    pub infeasible_steps: usize,
    pub wall_secs: f64,
    pub csv_path: PathBuf,
}

#[derive(Clone, Debug)]
pub enum VariantOutcome {
    Completed(VariantMetrics),
    Halted { reason: String },
}

#[derive(Clone, Debug)]
pub struct VariantSummary {
    pub variant: ControllerVariant,
    pub outcome: VariantOutcome,
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub applied_defaults: Vec<String>,
    pub warnings: Vec<String>,
    pub variants: Vec<VariantSummary>,
}

impl RunSummary {
    pub fn any_halted(&self) -> bool {
        self.variants.iter().any(|v| matches!(v.outcome, VariantOutcome::Halted { .. }))
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        writeln!(out, "defaults applied:").unwrap();
        for line in &self.applied_defaults {
            writeln!(out, "  {line}").unwrap();
        }
        for w in &self.warnings {
            writeln!(out, "warning: {w}").unwrap();
        }
        for v in &self.variants {
            match &v.outcome {
                VariantOutcome::Completed(m) => {
                    writeln!(
                        out,
                        "{}: min h_x {} | min h_u {} | min h_e {} | max |u| {} | tail error {} | infeasible steps {} | wall {:.3}s | {}",
                        v.variant.name(),
                        m.min_h_x,
                        m.min_h_u,
                        m.min_h_e,
                        m.max_u,
                        m.tail_error,
                        m.infeasible_steps,
                        m.wall_secs,
                        m.csv_path.display(),
                    )
                    .unwrap();
                }
                VariantOutcome::Halted { reason } => {
                    writeln!(out, "{}: halted ({reason})", v.variant.name()).unwrap();
                }
            }
        }
        out
    }
}

fn metrics(
    traj: &Trajectory,
    cfg: &RunConfig,
    csv_path: PathBuf,
    wall_secs: f64,
) -> VariantMetrics {
    let reference = ReferenceSignal::constant(vec![cfg.params.vd]);
    let (tail_error, _) =
        tracking_error_metrics(traj, &reference, |x| vec![x[1]], cfg.tail_fraction);
    let max_u = traj
        .channel("u_norm")
        .map(|c| c.iter().copied().fold(0.0f64, f64::max))
        .unwrap_or(f64::NAN);
    let infeasible_steps = traj
        .channel("feasible")
        .map(|c| c.iter().filter(|v| **v == 0.0).count())
        .unwrap_or(0);
    VariantMetrics {
        min_h_x: traj.channel_min("h_x").unwrap_or(f64::NAN),
        min_h_u: traj.channel_min("h_u").unwrap_or(f64::NAN),
        min_h_e: traj.channel_min("h_e").unwrap_or(f64::NAN),
        max_u,
        tail_error,
        infeasible_steps,
        wall_secs,
        csv_path,
    }
}

/// Simulate every requested variant, write `acc_<variant>.csv` files
/// and `summary.txt` under the output directory.
pub fn run(cfg: &RunConfig) -> Result<RunSummary, RunError> {
    // `custom` reuses the same plant family; it only marks that the
    // overrides, not the stock benchmark, define the scenario.
    let scenario = build_acc_scenario(
        cfg.params.clone(),
        cfg.predictor_mode,
        cfg.infeasibility_policy,
        Some(AugmentedState::new(cfg.z0[..3].to_vec(), vec![cfg.z0[3]])),
    )
    .map_err(RunError::Config)?;

    std::fs::create_dir_all(&cfg.output_dir)?;
    let mut summary = RunSummary {
        applied_defaults: cfg.applied_defaults(),
        warnings: vec![],
        variants: vec![],
    };

    let variants = cfg.controller.variants();
    if variants.contains(&ControllerVariant::Combined) {
        summary.warnings = initial_condition_warnings(&scenario);
    }

    for variant in variants {
        let started = Instant::now();
        let (rhs, probes) = scenario.closed_loop(variant);
        let outcome = match simulate(&rhs, &scenario.z0, cfg.t_end, cfg.dt, &probes) {
            Ok(traj) => {
                let path = cfg.output_dir.join(format!("acc_{}.csv", variant.name()));
                write_trajectory_csv(&traj, &path)?;
                VariantOutcome::Completed(metrics(
                    &traj,
                    cfg,
                    path,
                    started.elapsed().as_secs_f64(),
                ))
            }
            Err(e) => VariantOutcome::Halted { reason: e.to_string() },
        };
        summary.variants.push(VariantSummary { variant, outcome });
    }

    std::fs::write(cfg.output_dir.join("summary.txt"), summary.render())?;
    Ok(summary)
}

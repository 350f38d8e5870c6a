//! Experiment orchestration: convergence tables, distributional comparisons,
//! cutoff-stability ladders and phase-law diagnostics, all reproducible from
//! a single config + base seed.
//!
//! Reproducibility contract: replication `r` draws from rng stream ids
//! derived from `base_seed` and `r` only, so execution order (including
//! rayon parallelism) never changes row contents; rows are sorted by their
//! natural key before writing; rerunning a config reproduces `_rows` and
//! `_summary` byte-identically. Wall-clock timestamps exist only in
//! `_meta.json`.

pub mod config;
pub mod convergence;
pub mod cutoff;
pub mod distribution;
pub mod output;
pub mod shiftlaw;

use std::path::PathBuf;

use serde_json::json;

use crate::error::Result;

pub use config::{ExperimentConfig, Regime, ShiftLawConfig, SubseqConfig};
pub use convergence::{run_convergence, ConvergenceRow, ConvergenceSummary};
pub use cutoff::{run_cutoff_stability, CutoffRow, CutoffSummary};
pub use distribution::{ks_distance, run_distribution, DistributionResult, DistributionRow};
pub use output::{Cell, OutputFormat, Table, SCHEMA_VERSION};
pub use shiftlaw::{run_shift_law, ShiftLawRow, ShiftLawSummary};

/// Stream-id layout: statistic paths, limit jump records and limit uniforms
/// never overlap, and replication `r` owns offset `r` within its block.
pub(crate) const STREAM_STAT_JUMPS: u64 = 0;
pub(crate) const STREAM_LIMIT_JUMPS: u64 = 1 << 32;
pub(crate) const STREAM_LIMIT_UNIFORMS: u64 = 2 << 32;
pub(crate) const STREAM_SHIFT_LAW: u64 = 3 << 32;

/// Median with `total_cmp` ordering; NaN sorts last, empty input gives NaN.
pub(crate) fn median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(|a, b| a.total_cmp(b));
    let mid = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[mid]
    } else {
        0.5 * (xs[mid - 1] + xs[mid])
    }
}

/// Interquartile range with linear interpolation between order statistics.
pub(crate) fn quartile_spread(mut xs: Vec<f64>) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    xs.sort_by(|a, b| a.total_cmp(b));
    let q = |t: f64| -> f64 {
        let pos = t * (xs.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let w = pos - lo as f64;
        xs[lo] * (1.0 - w) + xs[hi] * w
    };
    q(0.75) - q(0.25)
}

/// Typed result of an experiment, alongside the written artifact paths.
#[derive(Debug, Clone, PartialEq)]
pub enum RegimeResult {
    Convergence(Vec<ConvergenceSummary>),
    Distribution(DistributionResult),
    Cutoff(Vec<CutoffSummary>),
    ShiftLaw(Vec<ShiftLawSummary>),
    LimitDraws(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub rows_path: PathBuf,
    pub summary_path: PathBuf,
    pub meta_path: PathBuf,
    pub result: RegimeResult,
}

/// Validate, run and write a full experiment.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let plan = config.prepare()?;
    let (rows, summary, resolved, result) = match plan.regime {
        Regime::Toy | Regime::R2 | Regime::R1Coupled => {
            let (rows, summaries) = run_convergence(&plan)?;
            (
                convergence::rows_table(&rows),
                convergence::summary_table(&summaries),
                convergence::resolved_meta(&plan),
                RegimeResult::Convergence(summaries),
            )
        }
        Regime::Distribution => {
            let (rows, res) = run_distribution(&plan)?;
            let resolved = json!({
                "n": res.n,
                "etas": res.etas,
                "ks": res.ks,
                "ks_negative_control": res.ks_negative,
                "alpha_scale": plan.alpha_scale,
                "alpha_override": plan.alpha_override,
                "t_past": plan.t_past,
                "kernel_id": plan.kernel.as_ref().map(|k| k.id()),
                "levy_hash": plan.levy.as_ref().map(|l| l.hash()),
            });
            (
                distribution::rows_table(&rows),
                distribution::summary_table(&res, plan.replications),
                resolved,
                RegimeResult::Distribution(res),
            )
        }
        Regime::R1 => {
            let rows = distribution::run_limit_draws(&plan)?;
            let values: Vec<f64> = rows.iter().map(|r| r.value).collect();
            let mut summary = Table::new(&["replications", "median_value"]);
            summary.push(vec![
                Cell::U64(plan.replications),
                Cell::F64(median(values.clone())),
            ]);
            let resolved = convergence::resolved_meta(&plan);
            (distribution::rows_table(&rows), summary, resolved, RegimeResult::LimitDraws(values))
        }
        Regime::CutoffStability => {
            let (rows, summaries) = run_cutoff_stability(&plan)?;
            let resolved = json!({
                "n": plan.ns.last(),
                "cutoffs": plan.cutoffs,
                "alpha_scale": plan.alpha_scale,
                "t_past": plan.t_past,
                "kernel_id": plan.kernel.as_ref().map(|k| k.id()),
                "levy_hash": plan.levy.as_ref().map(|l| l.hash()),
            });
            (
                cutoff::rows_table(&rows),
                cutoff::summary_table(&summaries),
                resolved,
                RegimeResult::Cutoff(summaries),
            )
        }
        Regime::ShiftLaw => {
            let (rows, summaries) = run_shift_law(&plan)?;
            let sl = plan.shift_law.as_ref().expect("validated");
            let resolved = json!({
                "theta": sl.theta,
                "draws": sl.draws,
                "grid_sizes": plan.ns,
            });
            (
                shiftlaw::rows_table(&rows),
                shiftlaw::summary_table(&summaries),
                resolved,
                RegimeResult::ShiftLaw(summaries),
            )
        }
    };
    let (rows_path, summary_path, meta_path) =
        output::write_artifacts(&plan.output, plan.format, &rows, &summary, config, resolved)?;
    Ok(ExperimentOutcome { rows_path, summary_path, meta_path, result })
}

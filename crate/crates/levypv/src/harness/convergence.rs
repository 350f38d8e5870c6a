//! Pathwise convergence tables: one jump record per seed, reused across every
//! grid size, so the error trend along `n` is a coupled comparison.

use rayon::prelude::*;
use serde_json::json;

use crate::error::{Error, Result};
use crate::levy::{check_omega_eps, default_eps, separation_margin};
use crate::limits::{limit_regime1_coupled, limit_regime2, limit_toy};
use crate::simulate::simulate_path_with;
use crate::stats::power_variation;

use super::config::{Prepared, Regime};
use super::output::{Cell, Table};
use super::{median, quartile_spread, STREAM_STAT_JUMPS};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub n: u64,
    pub seed: u64,
    pub statistic: f64,
    pub limit: f64,
    pub abs_error: f64,
    pub rel_error: f64,
    /// Whether the realized jumps are well separated at the working radius.
    pub omega_eps: bool,
    /// Largest radius this record would satisfy.
    pub feasible_eps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceSummary {
    pub n: u64,
    pub rows: usize,
    pub flagged: usize,
    pub median_statistic: f64,
    pub median_limit: f64,
    pub median_abs_error: f64,
    pub median_rel_error: f64,
    pub iqr_rel_error: f64,
    /// Median relative error over the well-separated seeds only.
    pub median_rel_error_separated: f64,
}

pub(super) fn rel_error(statistic: f64, limit: f64) -> f64 {
    let abs = (statistic - limit).abs();
    if limit == 0.0 {
        if abs == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        abs / limit.abs()
    }
}

pub fn run_convergence(plan: &Prepared) -> Result<(Vec<ConvergenceRow>, Vec<ConvergenceSummary>)> {
    if !matches!(plan.regime, Regime::Toy | Regime::R2 | Regime::R1Coupled) {
        return Err(Error::precondition(format!(
            "convergence tables cover toy, r2 and r1_coupled, not {}",
            plan.regime.name()
        )));
    }
    let kernel = plan.kernel.as_ref().expect("prepared plan has a kernel");
    let levy = plan.levy.as_ref().expect("prepared plan has a driver");
    let thetas = kernel.thetas();
    let window = plan.window();

    let mut rows: Vec<ConvergenceRow> = (0..plan.replications)
        .into_par_iter()
        .map(|seed| -> Result<Vec<ConvergenceRow>> {
            let jumps = levy.simulate_jumps(window, STREAM_STAT_JUMPS + seed)?;
            let margin = separation_margin(&jumps, &thetas);
            let eps = plan.eps.unwrap_or_else(|| default_eps(&jumps, &thetas));
            let omega = check_omega_eps(&jumps, &thetas, eps);
            // n-independent limits are evaluated once per seed
            let fixed_limit = match plan.regime {
                Regime::Toy => Some(limit_toy(&jumps, plan.p)),
                Regime::R2 => Some(limit_regime2(kernel, &jumps, plan.p, plan.k)?.value),
                _ => None,
            };
            let mut out = Vec::with_capacity(plan.ns.len());
            for &n in &plan.ns {
                let limit = match fixed_limit {
                    Some(v) => v,
                    None => {
                        limit_regime1_coupled(kernel, &jumps, n as usize, plan.p, plan.k, plan.series)?
                            .value
                    }
                };
                let path = simulate_path_with(kernel, &jumps, n as usize, plan.t_past)?;
                let report = power_variation(&path, plan.p, plan.k, plan.alpha_scale)?;
                let statistic = match plan.regime {
                    Regime::R2 => report.scaled_r2,
                    _ => report.scaled_r1,
                };
                out.push(ConvergenceRow {
                    n,
                    seed,
                    statistic,
                    limit,
                    abs_error: (statistic - limit).abs(),
                    rel_error: rel_error(statistic, limit),
                    omega_eps: omega,
                    feasible_eps: margin,
                });
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    rows.sort_by_key(|r| (r.seed, r.n));

    let summaries = summarize(plan, &rows);
    Ok((rows, summaries))
}

fn summarize(plan: &Prepared, rows: &[ConvergenceRow]) -> Vec<ConvergenceSummary> {
    plan.ns
        .iter()
        .map(|&n| {
            let at_n: Vec<&ConvergenceRow> = rows.iter().filter(|r| r.n == n).collect();
            let pick = |f: fn(&ConvergenceRow) -> f64| -> Vec<f64> {
                at_n.iter().map(|r| f(r)).collect()
            };
            let rels = pick(|r| r.rel_error);
            let separated: Vec<f64> =
                at_n.iter().filter(|r| r.omega_eps).map(|r| r.rel_error).collect();
            ConvergenceSummary {
                n,
                rows: at_n.len(),
                flagged: at_n.iter().filter(|r| !r.omega_eps).count(),
                median_statistic: median(pick(|r| r.statistic)),
                median_limit: median(pick(|r| r.limit)),
                median_abs_error: median(pick(|r| r.abs_error)),
                median_rel_error: median(rels.clone()),
                iqr_rel_error: quartile_spread(rels),
                median_rel_error_separated: median(separated),
            }
        })
        .collect()
}

pub fn rows_table(rows: &[ConvergenceRow]) -> Table {
    let mut t = Table::new(&[
        "n",
        "seed",
        "statistic",
        "limit",
        "abs_error",
        "rel_error",
        "omega_eps",
        "feasible_eps",
    ]);
    for r in rows {
        t.push(vec![
            Cell::U64(r.n),
            Cell::U64(r.seed),
            Cell::F64(r.statistic),
            Cell::F64(r.limit),
            Cell::F64(r.abs_error),
            Cell::F64(r.rel_error),
            Cell::Bool(r.omega_eps),
            Cell::F64(r.feasible_eps),
        ]);
    }
    t
}

pub fn summary_table(summaries: &[ConvergenceSummary]) -> Table {
    let mut t = Table::new(&[
        "n",
        "rows",
        "flagged",
        "median_statistic",
        "median_limit",
        "median_abs_error",
        "median_rel_error",
        "iqr_rel_error",
        "median_rel_error_separated",
    ]);
    for s in summaries {
        t.push(vec![
            Cell::U64(s.n),
            Cell::U64(s.rows as u64),
            Cell::U64(s.flagged as u64),
            Cell::F64(s.median_statistic),
            Cell::F64(s.median_limit),
            Cell::F64(s.median_abs_error),
            Cell::F64(s.median_rel_error),
            Cell::F64(s.iqr_rel_error),
            Cell::F64(s.median_rel_error_separated),
        ]);
    }
    t
}

pub(super) fn resolved_meta(plan: &Prepared) -> serde_json::Value {
    json!({
        "grid_sizes": plan.ns,
        "alpha_scale": plan.alpha_scale,
        "alpha_min": plan.alpha_min,
        "min_alpha_set": plan.min_set,
        "etas": plan.etas,
        "t_past": plan.t_past,
        "window": [plan.window().0, plan.window().1],
        "series": {"rel_tol": plan.series.rel_tol, "r_cap": plan.series.r_cap, "r_init": plan.series.r_init},
        "kernel_id": plan.kernel.as_ref().map(|k| k.id()),
        "levy_hash": plan.levy.as_ref().map(|l| l.hash()),
    })
}

//! Distributional comparison: the scaled statistic at the finest grid against
//! independent draws of the limit law, measured by the two-sample
//! Kolmogorov-Smirnov distance. The limit has no closed-form CDF, so a
//! matched-size two-sample comparison is the honest test.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::limits::limit_regime1;
use crate::simulate::simulate_path_with;
use crate::stats::power_variation;
use crate::subseq::frac;

use super::config::{Prepared, Regime};
use super::output::{Cell, Table};
use super::{STREAM_LIMIT_JUMPS, STREAM_LIMIT_UNIFORMS, STREAM_STAT_JUMPS};

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionRow {
    pub kind: &'static str,
    pub rep: u64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionResult {
    pub n: u64,
    pub ks: f64,
    /// KS of the deliberately mis-scaled statistic, when requested.
    pub ks_negative: Option<f64>,
    pub etas: Vec<f64>,
}

/// Sup-distance between the empirical CDFs of two samples.
pub fn ks_distance(sample_a: &[f64], sample_b: &[f64]) -> Result<f64> {
    if sample_a.is_empty() || sample_b.is_empty() {
        return Err(Error::precondition("KS needs two nonempty samples"));
    }
    let mut a = sample_a.to_vec();
    let mut b = sample_b.to_vec();
    a.sort_by(|x, y| x.total_cmp(y));
    b.sort_by(|x, y| x.total_cmp(y));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Matched fractional-part targets at resolution `n`: the origin keeps 0, an
/// interior singularity achieves `{n theta_z}`.
fn matched_etas(plan: &Prepared, n: u64) -> Vec<f64> {
    let kernel = plan.kernel.as_ref().expect("prepared plan has a kernel");
    plan.min_set
        .iter()
        .zip(&plan.etas)
        .map(|(&z, &eta)| {
            if z == 0 {
                0.0
            } else if eta != 0.0 {
                eta
            } else {
                frac(n as f64 * kernel.singularities[z].theta)
            }
        })
        .collect()
}

pub fn run_distribution(plan: &Prepared) -> Result<(Vec<DistributionRow>, DistributionResult)> {
    if plan.regime != Regime::Distribution {
        return Err(Error::precondition("run_distribution needs the distribution regime"));
    }
    let kernel = plan.kernel.as_ref().expect("prepared plan has a kernel");
    let levy = plan.levy.as_ref().expect("prepared plan has a driver");
    let n = *plan.ns.last().expect("grid validated nonempty");
    let etas = matched_etas(plan, n);
    let window = plan.window();

    let statistic: Vec<(f64, f64)> = (0..plan.replications)
        .into_par_iter()
        .map(|rep| -> Result<(f64, f64)> {
            let jumps = levy.simulate_jumps(window, STREAM_STAT_JUMPS + rep)?;
            let path = simulate_path_with(kernel, &jumps, n as usize, plan.t_past)?;
            let report = power_variation(&path, plan.p, plan.k, plan.alpha_scale)?;
            // the negative control rescales the same raw variation
            let mis = plan
                .alpha_override
                .map(|a| (n as f64).powf(a * plan.p) * report.v)
                .unwrap_or(f64::NAN);
            Ok((report.scaled_r1, mis))
        })
        .collect::<Result<Vec<_>>>()?;

    let limit = limit_draws(plan, &etas)?;

    let sample_a: Vec<f64> = statistic.iter().map(|s| s.0).collect();
    let ks = ks_distance(&sample_a, &limit)?;
    let ks_negative = match plan.alpha_override {
        Some(_) => {
            let mis: Vec<f64> = statistic.iter().map(|s| s.1).collect();
            Some(ks_distance(&mis, &limit)?)
        }
        None => None,
    };

    let mut rows = Vec::with_capacity(sample_a.len() * 2);
    for (rep, s) in statistic.iter().enumerate() {
        rows.push(DistributionRow { kind: "statistic", rep: rep as u64, value: s.0 });
        if plan.alpha_override.is_some() {
            rows.push(DistributionRow { kind: "negative_control", rep: rep as u64, value: s.1 });
        }
    }
    for (rep, &v) in limit.iter().enumerate() {
        rows.push(DistributionRow { kind: "limit", rep: rep as u64, value: v });
    }
    rows.sort_by(|a, b| (a.kind, a.rep).cmp(&(b.kind, b.rep)));
    Ok((rows, DistributionResult { n, ks, ks_negative, etas }))
}

/// Independent draws of the regime-1 limit law: fresh jump record and fresh
/// uniforms per replication, on dedicated rng streams.
pub fn limit_draws(plan: &Prepared, etas: &[f64]) -> Result<Vec<f64>> {
    let kernel = plan.kernel.as_ref().expect("prepared plan has a kernel");
    let levy = plan.levy.as_ref().expect("prepared plan has a driver");
    let window = plan.window();
    (0..plan.replications)
        .into_par_iter()
        .map(|rep| -> Result<f64> {
            let jumps = levy.simulate_jumps(window, STREAM_LIMIT_JUMPS + rep)?;
            let mut rng = ChaCha8Rng::seed_from_u64(plan.base_seed);
            rng.set_stream(STREAM_LIMIT_UNIFORMS + rep);
            let sample =
                limit_regime1(kernel, &jumps, etas, plan.p, plan.k, &mut rng, plan.series)?;
            Ok(sample.value)
        })
        .collect()
}

/// The `r1` regime: emit the limit draws themselves.
pub fn run_limit_draws(plan: &Prepared) -> Result<Vec<DistributionRow>> {
    if plan.regime != Regime::R1 {
        return Err(Error::precondition("run_limit_draws needs the r1 regime"));
    }
    let n = *plan.ns.last().expect("grid validated nonempty");
    let etas = matched_etas(plan, n);
    let values = limit_draws(plan, &etas)?;
    Ok(values
        .iter()
        .enumerate()
        .map(|(rep, &v)| DistributionRow { kind: "limit", rep: rep as u64, value: v })
        .collect())
}

pub fn rows_table(rows: &[DistributionRow]) -> Table {
    let mut t = Table::new(&["kind", "rep", "value"]);
    for r in rows {
        t.push(vec![Cell::Str(r.kind.to_string()), Cell::U64(r.rep), Cell::F64(r.value)]);
    }
    t
}

pub fn summary_table(result: &DistributionResult, replications: u64) -> Table {
    let mut t = Table::new(&["n", "replications", "ks", "ks_negative_control"]);
    t.push(vec![
        Cell::U64(result.n),
        Cell::U64(replications),
        Cell::F64(result.ks),
        Cell::OptF64(result.ks_negative),
    ]);
    t
}

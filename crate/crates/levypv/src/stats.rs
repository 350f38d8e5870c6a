//! Filtered increments and realized power variation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::weights_f64;
use crate::simulate::SamplePath;

/// `V(p; k)_n` together with the two candidate scalings. Which scaling is the
/// meaningful one depends on the singularity exponents; both are reported so
/// downstream code can pick without recomputing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerVariationReport {
    pub p: f64,
    pub k: u32,
    pub n: usize,
    /// Raw power variation `sum_{i=k}^n |increment_i|^p`.
    pub v: f64,
    /// `n^{alpha p} V`.
    pub scaled_r1: f64,
    /// `n^{alpha p} V / ln n`.
    pub scaled_r2: f64,
    pub alpha_used: f64,
}

/// Order-`k` filtered increments `sum_j (-1)^j C(k,j) X_{(i-j)/n}`, `i = k..=n`.
pub fn increments(path: &SamplePath, k: u32) -> Result<Vec<f64>> {
    validate_order(path, k)?;
    let weights = weights_f64(k)?;
    Ok((k as usize..=path.n).map(|i| filtered_at(&path.values, &weights, i)).collect())
}

/// Streaming power variation: a single ascending pass over the grid, no
/// intermediate increment vector. Summation order equals the naive
/// `increments().map(|d| |d|^p).sum()`, so the two agree to the last bit.
pub fn power_variation(path: &SamplePath, p: f64, k: u32, alpha: f64) -> Result<PowerVariationReport> {
    validate_order(path, k)?;
    if path.n < 2 {
        return Err(Error::precondition("need n >= 2 for the log scaling".to_string()));
    }
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::invalid("p", format!("power must be positive, got {p}")));
    }
    if !alpha.is_finite() {
        return Err(Error::invalid("alpha", "scaling exponent must be finite"));
    }
    let weights = weights_f64(k)?;
    let mut v = 0.0;
    for i in k as usize..=path.n {
        v += filtered_at(&path.values, &weights, i).abs().powf(p);
    }
    let nf = path.n as f64;
    let scaled_r1 = nf.powf(alpha * p) * v;
    Ok(PowerVariationReport {
        p,
        k,
        n: path.n,
        v,
        scaled_r1,
        scaled_r2: scaled_r1 / nf.ln(),
        alpha_used: alpha,
    })
}

fn filtered_at(values: &[f64], weights: &[f64], i: usize) -> f64 {
    let mut acc = 0.0;
    for (j, &w) in weights.iter().enumerate() {
        acc += w * values[i - j];
    }
    acc
}

fn validate_order(path: &SamplePath, k: u32) -> Result<()> {
    if k == 0 {
        return Err(Error::invalid("k", "filter order must be at least 1"));
    }
    if k as usize > path.n {
        return Err(Error::precondition(format!(
            "filter order k = {k} exceeds grid resolution n = {}",
            path.n
        )));
    }
    Ok(())
}

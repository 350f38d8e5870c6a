//! Candidate limit values for the scaled power variations.
//!
//! Three laws are evaluated from a realized jump record:
//!
//! * regime 1: for minimal-exponent singularities `z` the limit is a weighted
//!   sum over jumps of the series `V_m^z = sum_r |h(r + 1 - shift)|^p`, with
//!   `shift = {U_m + eta_z}` for fresh uniforms (the subsequence law) or
//!   `shift = {n T_m + n theta_z}` for the pathwise coupled comparison;
//! * regime 2: at the boundary `alpha = k - 1/p` the series degenerates and a
//!   closed form `|q_{k,alpha}|^p sum_z |c_z|^p (1 + 1_{z>=1}) sum |jump|^p`
//!   remains after `log n` normalisation;
//! * toy: the unit-lag difference driver limit, two plain jump power sums.
//!
//! Series truncation is certified: the reported `tail_bound` dominates the
//! discarded mass via the envelope
//! `|h(x)| <= max(1, |q_{k,alpha}|) |x -+ k|^{alpha - k}` for `|x| >= k + 1`.
//! The prefactor comes from the mean value theorem for k-th differences
//! (`h(x) = q_{k,alpha} xi^{alpha-k}` for some `xi` between `x - k` and `x`),
//! so the bound stays valid even where the k-th difference overshoots the
//! plain unit envelope (possible once `|q_{k,alpha}| > 1`, e.g. `k = 3`,
//! `alpha = 2.5`).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{eval_h0_with, eval_hz_with, q_const, weights_f64, KernelSpec};
use crate::levy::{power_sum, JumpRecord};
use crate::subseq::frac;

/// Truncation policy for the limit series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SeriesPolicy {
    /// Stop once `tail_bound <= rel_tol * value`.
    pub rel_tol: f64,
    /// Hard cap on the truncation radius.
    pub r_cap: usize,
    /// First radius tried.
    pub r_init: usize,
}

impl Default for SeriesPolicy {
    fn default() -> Self {
        SeriesPolicy { rel_tol: 1e-8, r_cap: 1_000_000, r_init: 64 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesValue {
    pub value: f64,
    pub r_used: usize,
    pub tail_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitRegime {
    R1,
    R1Coupled,
    R2,
    Toy,
}

/// One jump's contribution to a regime-1 limit value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpContribution {
    pub z: usize,
    pub time: f64,
    pub size: f64,
    pub shift: f64,
    pub series: f64,
    pub term: f64,
}

/// A single evaluation of a limit law, exportable as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitSample {
    pub regime: LimitRegime,
    pub value: f64,
    /// Largest series radius used across contributions.
    pub series_r: usize,
    /// Weighted bound on the total truncated series mass.
    pub tail_bound: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u_draws: Option<Vec<f64>>,
    /// Fractional-part targets per minimal singularity (achieved values for
    /// the coupled regime).
    pub etas: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub contributions: Vec<JumpContribution>,
}

impl LimitSample {
    /// JSON export; `verbose` keeps the per-jump contribution table.
    pub fn to_json(&self, verbose: bool) -> Result<String> {
        let mut copy = self.clone();
        if !verbose {
            copy.contributions.clear();
        }
        serde_json::to_string_pretty(&copy).map_err(|e| Error::Serialization(e.to_string()))
    }
}

fn check_summable(k: u32, alpha: f64, p: f64) -> Result<()> {
    if !(alpha < k as f64 - 1.0 / p) {
        return Err(Error::precondition(format!(
            "series needs alpha < k - 1/p, got alpha = {alpha}, k = {k}, p = {p}"
        )));
    }
    Ok(())
}

/// Envelope mass of the series beyond radius `r`: integral comparison of
/// `2 sum_{s > r-k} (C s^{alpha-k})^p` with `C = max(1, |q_{k,alpha}|)`.
fn series_tail_bound(k: u32, alpha: f64, p: f64, r: usize) -> f64 {
    let prefactor = q_const(k, alpha).abs().max(1.0).powf(p);
    let exponent = p * (alpha - k as f64) + 1.0;
    prefactor * 2.0 * (r as f64 - k as f64).powf(exponent) / (p * (k as f64 - alpha) - 1.0)
}

/// Truncated limit series `sum_{|r| <= R} |h(r + 1 - shift)|^p` and a bound on
/// the discarded tail. `h` is the one-sided `h_k` when `one_sided` is set
/// (origin singularity), otherwise the two-sided `h_{k,z}`.
pub fn series_vmz(
    k: u32,
    alpha: f64,
    one_sided: bool,
    p: f64,
    shift: f64,
    r: usize,
) -> Result<(f64, f64)> {
    check_summable(k, alpha, p)?;
    if !(0.0..1.0).contains(&shift) {
        return Err(Error::invalid("shift", format!("must lie in [0, 1), got {shift}")));
    }
    if r < 2 * k as usize + 2 {
        return Err(Error::precondition(format!(
            "truncation radius {r} below the meaningful minimum {}",
            2 * k + 2
        )));
    }
    let weights = weights_f64(k)?;
    let mut value = 0.0;
    let lo = if one_sided { -1i64 } else { -(r as i64) };
    for idx in lo..=r as i64 {
        let x = idx as f64 + 1.0 - shift;
        let h = if one_sided {
            eval_h0_with(&weights, alpha, x)
        } else {
            eval_hz_with(&weights, alpha, x)
        };
        if h != 0.0 {
            value += h.abs().powf(p);
        }
    }
    Ok((value, series_tail_bound(k, alpha, p, r)))
}

/// Grow the radius geometrically until the tail bound is negligible relative
/// to the partial value, or the cap is reached.
pub fn series_vmz_auto(
    k: u32,
    alpha: f64,
    one_sided: bool,
    p: f64,
    shift: f64,
    policy: SeriesPolicy,
) -> Result<SeriesValue> {
    check_summable(k, alpha, p)?;
    let mut r = policy.r_init.max(2 * k as usize + 2);
    loop {
        let (value, tail_bound) = series_vmz(k, alpha, one_sided, p, shift, r)?;
        if (value > 0.0 && tail_bound <= policy.rel_tol * value) || r >= policy.r_cap {
            return Ok(SeriesValue { value, r_used: r, tail_bound });
        }
        r = (r * 4).min(policy.r_cap);
    }
}

/// Minimal singularity set and its exponent, with regime-1 admissibility checks.
fn regime1_setup(kernel: &KernelSpec, p: f64, k: u32) -> Result<(f64, Vec<usize>)> {
    kernel.validate()?;
    if !(p > 0.0) {
        return Err(Error::invalid("p", "power must be positive"));
    }
    let alpha_max = kernel.singularities.iter().map(|s| s.alpha).fold(0.0, f64::max);
    if !(alpha_max < k as f64 - 1.0 / p) {
        return Err(Error::precondition(format!(
            "regime 1 needs max alpha = {alpha_max} < k - 1/p = {}",
            k as f64 - 1.0 / p
        )));
    }
    let (alpha, set) = kernel.min_alpha_set();
    Ok((alpha, set))
}

/// Limit law along a subsequence with fractional-part targets `etas` (one per
/// minimal singularity, ascending `z`; the origin entry must be 0). One
/// uniform is drawn per jump in record order and shared across singularities.
pub fn limit_regime1<R: Rng>(
    kernel: &KernelSpec,
    jumps: &JumpRecord,
    etas: &[f64],
    p: f64,
    k: u32,
    rng: &mut R,
    policy: SeriesPolicy,
) -> Result<LimitSample> {
    let (alpha, set) = regime1_setup(kernel, p, k)?;
    if etas.len() != set.len() {
        return Err(Error::invalid(
            "etas",
            format!("need one target per minimal singularity ({}), got {}", set.len(), etas.len()),
        ));
    }
    for (&z, &eta) in set.iter().zip(etas) {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::invalid("etas", format!("targets must lie in [0, 1], got {eta}")));
        }
        if z == 0 && eta != 0.0 {
            return Err(Error::invalid(
                "etas",
                "the origin singularity has fractional part 0 along every subsequence",
            ));
        }
    }
    let u_draws: Vec<f64> = (0..jumps.len()).map(|_| rng.random::<f64>()).collect();
    let mut sample = accumulate_regime1(kernel, jumps, alpha, &set, p, k, policy, |m, a| {
        frac(u_draws[m] + etas[a])
    })?;
    sample.regime = LimitRegime::R1;
    sample.u_draws = Some(u_draws);
    sample.etas = etas.to_vec();
    Ok(sample)
}

/// Pathwise coupled limit at resolution `n`: shifts are the achieved
/// fractional parts `{n T_m + n theta_z}` of the same jump record, making the
/// value directly comparable to `n^{alpha p} V_n` seed by seed.
pub fn limit_regime1_coupled(
    kernel: &KernelSpec,
    jumps: &JumpRecord,
    n: usize,
    p: f64,
    k: u32,
    policy: SeriesPolicy,
) -> Result<LimitSample> {
    let (alpha, set) = regime1_setup(kernel, p, k)?;
    if n == 0 {
        return Err(Error::invalid("n", "grid resolution must be positive"));
    }
    let nf = n as f64;
    let thetas: Vec<f64> = set.iter().map(|&z| kernel.singularities[z].theta).collect();
    let times = jumps.times.clone();
    let mut sample = accumulate_regime1(kernel, jumps, alpha, &set, p, k, policy, |m, a| {
        frac(nf * times[m] + nf * thetas[a])
    })?;
    sample.regime = LimitRegime::R1Coupled;
    sample.etas = thetas.iter().map(|&t| frac(nf * t)).collect();
    Ok(sample)
}

#[allow(clippy::too_many_arguments)]
fn accumulate_regime1(
    kernel: &KernelSpec,
    jumps: &JumpRecord,
    alpha: f64,
    set: &[usize],
    p: f64,
    k: u32,
    policy: SeriesPolicy,
    shift_of: impl Fn(usize, usize) -> f64,
) -> Result<LimitSample> {
    let mut value = 0.0;
    let mut tail = 0.0;
    let mut r_max = 0;
    let mut contributions = Vec::new();
    for (a, &z) in set.iter().enumerate() {
        let sing = &kernel.singularities[z];
        let weight_c = sing.c.abs().powf(p);
        let window = (-sing.theta, 1.0 - sing.theta);
        for (m, (t, size)) in jumps.iter().enumerate() {
            if !(t > window.0 && t <= window.1) {
                continue;
            }
            let shift = shift_of(m, a);
            let series = series_vmz_auto(k, alpha, z == 0, p, shift, policy)?;
            let weight = weight_c * size.abs().powf(p);
            let term = weight * series.value;
            value += term;
            tail += weight * series.tail_bound;
            r_max = r_max.max(series.r_used);
            contributions.push(JumpContribution {
                z,
                time: t,
                size,
                shift,
                series: series.value,
                term,
            });
        }
    }
    Ok(LimitSample {
        regime: LimitRegime::R1,
        value,
        series_r: r_max,
        tail_bound: tail,
        u_draws: None,
        etas: Vec::new(),
        contributions,
    })
}

/// Boundary-regime limit (`alpha_z = k - 1/p` for every singularity): interior
/// singularities count twice, the origin once.
pub fn limit_regime2(kernel: &KernelSpec, jumps: &JumpRecord, p: f64, k: u32) -> Result<LimitSample> {
    kernel.validate()?;
    if !(p > 0.0) {
        return Err(Error::invalid("p", "power must be positive"));
    }
    let boundary = k as f64 - 1.0 / p;
    for s in &kernel.singularities {
        if (s.alpha - boundary).abs() > 1e-12 {
            return Err(Error::precondition(format!(
                "regime 2 needs every alpha = k - 1/p = {boundary}, got {}",
                s.alpha
            )));
        }
    }
    let q = q_const(k, boundary).abs().powf(p);
    let mut value = 0.0;
    for (z, s) in kernel.singularities.iter().enumerate() {
        let sides = if z == 0 { 1.0 } else { 2.0 };
        value += q
            * s.c.abs().powf(p)
            * sides
            * power_sum(jumps, p, (-s.theta, 1.0 - s.theta));
    }
    Ok(LimitSample {
        regime: LimitRegime::R2,
        value,
        series_r: 0,
        tail_bound: 0.0,
        u_draws: None,
        etas: Vec::new(),
        contributions: Vec::new(),
    })
}

/// Unit-lag toy limit: `sum_{(0,1]} |jump|^p + sum_{(-1,0]} |jump|^p`.
pub fn limit_toy(jumps: &JumpRecord, p: f64) -> f64 {
    power_sum(jumps, p, (0.0, 1.0)) + power_sum(jumps, p, (-1.0, 0.0))
}

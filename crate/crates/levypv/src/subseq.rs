//! Fractional-part machinery for subsequence selection.
//!
//! The regime-1 law only stabilises along grid resolutions `n` for which every
//! interior singularity's phase `{n theta_z}` sits near a prescribed target
//! `eta_z`. For irrational `theta` the orbit equidistributes, so a brute-force
//! scan finds qualifying `n`; for rational `theta = a/b` the orbit is the
//! finite set of multiples of `1/b` and some targets are simply unreachable.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fractional part in `[0, 1)`. The clamp handles negative inputs so tiny
/// that `x - floor(x)` rounds up to exactly 1.
pub fn frac(x: f64) -> f64 {
    let f = x - x.floor();
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

/// Distance on the unit circle between the fractional parts of `a` and `b`.
pub fn dist_circle(a: f64, b: f64) -> f64 {
    let d = (frac(a) - frac(b)).abs();
    d.min(1.0 - d)
}

/// The closure of `{ {n a / b} : n >= 1 }`: all multiples of `1/(b/gcd(a,b))`.
pub fn rational_orbit(num: u64, den: u64) -> Result<Vec<f64>> {
    if den == 0 {
        return Err(Error::invalid("den", "denominator must be positive"));
    }
    fn gcd(a: u64, b: u64) -> u64 {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    let q = den / gcd(num.max(1), den);
    Ok((0..q).map(|j| j as f64 / q as f64).collect())
}

/// Result of a brute-force subsequence scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsequencePlan {
    pub thetas: Vec<f64>,
    pub etas: Vec<f64>,
    pub tolerance: f64,
    /// Qualifying resolutions, ascending.
    pub terms: Vec<u64>,
    /// Achieved fractional parts `{n theta_z}` per term.
    pub achieved: Vec<Vec<f64>>,
    /// Worst-coordinate circle distance per term.
    pub residuals: Vec<f64>,
    /// Smallest residual seen over the whole scan (diagnoses unreachable targets).
    pub best_residual: f64,
    /// Scanned range `[n_min, n_max]` (the scan stops early once `max_terms` hit).
    pub scanned: (u64, u64),
}

fn check_phase_inputs(thetas: &[f64], etas: &[f64], tolerance: f64) -> Result<()> {
    if thetas.is_empty() || thetas.len() != etas.len() {
        return Err(Error::invalid(
            "thetas",
            "need matching, non-empty singularity and target lists",
        ));
    }
    for &t in thetas {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::invalid(
                "thetas",
                format!("phases are searched for interior singularities only, got {t}"),
            ));
        }
    }
    for &e in etas {
        if !(0.0..=1.0).contains(&e) {
            return Err(Error::invalid("etas", format!("targets must lie in [0, 1], got {e}")));
        }
    }
    if !(tolerance > 0.0 && tolerance < 0.5) {
        return Err(Error::invalid(
            "tolerance",
            format!("must lie in (0, 0.5) to be a meaningful circle distance, got {tolerance}"),
        ));
    }
    Ok(())
}

fn residual_at(n: u64, thetas: &[f64], etas: &[f64]) -> (f64, Vec<f64>) {
    let parts: Vec<f64> = thetas.iter().map(|&t| frac(n as f64 * t)).collect();
    let residual = parts
        .iter()
        .zip(etas)
        .map(|(&p, &e)| dist_circle(p, e))
        .fold(0.0, f64::max);
    (residual, parts)
}

/// Scan `n_min..=n_max` for resolutions whose phases all land within
/// `tolerance` of the targets; stop after `max_terms` hits. An empty `terms`
/// list is not an error — `best_residual` then reports how close the scan got.
pub fn find_subsequence(
    thetas: &[f64],
    etas: &[f64],
    tolerance: f64,
    n_min: u64,
    n_max: u64,
    max_terms: usize,
) -> Result<SubsequencePlan> {
    check_phase_inputs(thetas, etas, tolerance)?;
    if n_min == 0 || n_min > n_max {
        return Err(Error::invalid("n_min", "need 0 < n_min <= n_max"));
    }
    if max_terms == 0 {
        return Err(Error::invalid("max_terms", "must be positive"));
    }
    let mut plan = SubsequencePlan {
        thetas: thetas.to_vec(),
        etas: etas.to_vec(),
        tolerance,
        terms: Vec::new(),
        achieved: Vec::new(),
        residuals: Vec::new(),
        best_residual: f64::INFINITY,
        scanned: (n_min, n_max),
    };
    for n in n_min..=n_max {
        let (residual, parts) = residual_at(n, thetas, etas);
        plan.best_residual = plan.best_residual.min(residual);
        if residual <= tolerance {
            plan.terms.push(n);
            plan.achieved.push(parts);
            plan.residuals.push(residual);
            if plan.terms.len() == max_terms {
                plan.scanned.1 = n;
                break;
            }
        }
    }
    Ok(plan)
}

/// For each target resolution pick the nearest qualifying `n` within
/// `[n_min, n_max]`; errors if some target has none.
pub fn find_near_targets(
    thetas: &[f64],
    etas: &[f64],
    tolerance: f64,
    targets: &[u64],
    n_min: u64,
    n_max: u64,
) -> Result<Vec<u64>> {
    check_phase_inputs(thetas, etas, tolerance)?;
    if n_min == 0 || n_min > n_max {
        return Err(Error::invalid("n_min", "need 0 < n_min <= n_max"));
    }
    let mut out = Vec::with_capacity(targets.len());
    'targets: for &target in targets {
        let widest = target.max(n_max) - n_min;
        for d in 0..=widest {
            for n in [target.saturating_sub(d), target.saturating_add(d)] {
                if n < n_min || n > n_max {
                    continue;
                }
                if residual_at(n, thetas, etas).0 <= tolerance {
                    out.push(n);
                    continue 'targets;
                }
            }
        }
        return Err(Error::precondition(format!(
            "no resolution within [{n_min}, {n_max}] meets tolerance {tolerance} near {target}"
        )));
    }
    Ok(out)
}

/// Law of the random jump time used by [`shift_law_check`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeSampler {
    Uniform01,
    Beta22,
}

impl TimeSampler {
    fn sample<R: Rng>(self, rng: &mut R) -> f64 {
        match self {
            TimeSampler::Uniform01 => rng.random::<f64>(),
            // infallible for fixed shape (2, 2)
            TimeSampler::Beta22 => Beta::new(2.0, 2.0).unwrap().sample(rng),
        }
    }
}

/// One-sample Kolmogorov-Smirnov distance to the uniform law on `[0, 1]`.
pub fn ks_uniform(samples: &[f64]) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        d = d.max(x - i as f64 / n).max((i + 1) as f64 / n - x);
    }
    d
}

/// Empirically check that the coupled shift `{n T + n theta}` approaches
/// uniformity as `n` grows when `T` has a density: returns `(n, KS distance
/// to uniform)` per requested `n`. The comparator is uniform on `[0, 1)` for
/// any phase, since adding the constant `{n theta}` mod 1 preserves
/// uniformity. Draws for the i-th resolution come from rng stream
/// `stream_base + i`.
pub fn shift_law_check(
    sampler: TimeSampler,
    theta: f64,
    n_values: &[u64],
    draws: usize,
    seed: u64,
    stream_base: u64,
) -> Result<Vec<(u64, f64)>> {
    if !(theta >= 0.0 && theta.is_finite()) {
        return Err(Error::invalid("theta", "phase must be nonnegative and finite"));
    }
    if draws < 2 {
        return Err(Error::invalid("draws", "need at least two draws"));
    }
    let mut out = Vec::with_capacity(n_values.len());
    for (i, &n) in n_values.iter().enumerate() {
        if n == 0 {
            return Err(Error::invalid("n_values", "resolutions must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_base + i as u64);
        let nf = n as f64;
        let parts: Vec<f64> =
            (0..draws).map(|_| frac(nf * sampler.sample(&mut rng) + nf * theta)).collect();
        out.push((n, ks_uniform(&parts)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn frac_frozen_values() {
        assert_eq!(frac(3.25), 0.25);
        assert_eq!(frac(-0.25), 0.75);
        assert_eq!(frac(5.0), 0.0);
        assert_eq!(frac(0.0), 0.0);
        assert_relative_eq!(frac(10.0 * 2f64.sqrt()), 0.142135623730951, max_relative = 1e-12);
        // would round to 1.0 without the clamp
        assert_eq!(frac(-1e-20), 0.0);
        assert!((0.0..1.0).contains(&frac(-1e-20)));
    }

    #[test]
    fn circle_distance_wraps() {
        assert_relative_eq!(dist_circle(0.9, 0.1), 0.2, max_relative = 1e-15);
        assert_eq!(dist_circle(0.5, 0.5), 0.0);
        assert_eq!(dist_circle(0.0, 1.0), 0.0);
        assert_relative_eq!(dist_circle(1.25, 0.85), 0.4, max_relative = 1e-12);
    }

    #[test]
    fn rational_orbits_are_finite_grids() {
        assert_eq!(rational_orbit(1, 2).unwrap(), vec![0.0, 0.5]);
        let o = rational_orbit(3, 7).unwrap();
        assert_eq!(o.len(), 7);
        assert_relative_eq!(o[1], 1.0 / 7.0, max_relative = 1e-15);
        assert_eq!(rational_orbit(2, 4).unwrap(), vec![0.0, 0.5]);
        assert!(rational_orbit(1, 0).is_err());
    }

    #[test]
    fn half_integer_phase_splits_even_and_odd() {
        let even = find_subsequence(&[0.5], &[0.0], 0.01, 1, 20, 5).unwrap();
        assert_eq!(even.terms, vec![2, 4, 6, 8, 10]);
        let odd = find_subsequence(&[0.5], &[0.5], 0.01, 1, 20, 5).unwrap();
        assert_eq!(odd.terms, vec![1, 3, 5, 7, 9]);
        assert_eq!(odd.achieved[0], vec![0.5]);
    }

    #[test]
    fn irrational_phase_reaches_any_target() {
        let theta = 1.0 / 2f64.sqrt();
        let plan = find_subsequence(&[theta], &[0.3], 1e-3, 1, 100_000, 5).unwrap();
        assert_eq!(plan.terms.len(), 5);
        for (n, residual) in plan.terms.iter().zip(&plan.residuals) {
            let d = dist_circle(frac(*n as f64 * theta), 0.3);
            assert_relative_eq!(d, *residual, max_relative = 1e-12);
            assert!(d <= 1e-3);
        }
        // terms strictly increase and the scan stopped at the last hit
        assert!(plan.terms.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(plan.scanned.1, *plan.terms.last().unwrap());
    }

    #[test]
    fn unreachable_rational_target_reports_best_residual() {
        let plan = find_subsequence(&[0.5], &[0.25], 0.1, 1, 1000, 3).unwrap();
        assert!(plan.terms.is_empty());
        assert_relative_eq!(plan.best_residual, 0.25, max_relative = 1e-15);
        assert_eq!(plan.scanned, (1, 1000));
    }

    #[test]
    fn qualifying_density_matches_the_tolerance_window() {
        // {n theta} equidistributes, so about 2 * tol of all n qualify
        let theta = 2f64.sqrt();
        let plan = find_subsequence(&[theta], &[0.3], 0.01, 1, 100_000, usize::MAX).unwrap();
        let density = plan.terms.len() as f64 / 100_000.0;
        assert!((density - 0.02).abs() < 0.004, "density = {density}");
    }

    #[test]
    fn near_target_selection_prefers_the_closest_hit() {
        let theta = 1.0 / 2f64.sqrt();
        let picks =
            find_near_targets(&[theta], &[0.3], 1e-2, &[1024, 4096, 16384], 2, 100_000).unwrap();
        assert_eq!(picks.len(), 3);
        for (&n, &target) in picks.iter().zip(&[1024u64, 4096, 16384]) {
            assert!(residual_at(n, &[theta], &[0.3]).0 <= 1e-2);
            // nothing closer to the target qualifies
            let d = n.abs_diff(target);
            for m in target.saturating_sub(d.saturating_sub(1))..target + d {
                if m >= 2 {
                    assert!(residual_at(m, &[theta], &[0.3]).0 > 1e-2, "missed closer hit {m}");
                }
            }
        }
        // an unreachable target errors instead of silently shifting
        assert!(find_near_targets(&[0.5], &[0.25], 0.1, &[100], 1, 1000).is_err());
    }

    #[test]
    fn input_validation_rejects_degenerate_phases() {
        assert!(find_subsequence(&[], &[], 0.1, 1, 10, 1).is_err());
        assert!(find_subsequence(&[0.5], &[0.1, 0.2], 0.1, 1, 10, 1).is_err());
        assert!(find_subsequence(&[0.0], &[0.1], 0.1, 1, 10, 1).is_err());
        assert!(find_subsequence(&[0.5], &[1.5], 0.1, 1, 10, 1).is_err());
        assert!(find_subsequence(&[0.5], &[0.1], 0.6, 1, 10, 1).is_err());
        assert!(find_subsequence(&[0.5], &[0.1], 0.1, 0, 10, 1).is_err());
        assert!(find_subsequence(&[0.5], &[0.1], 0.1, 5, 4, 1).is_err());
    }

    #[test]
    fn ks_uniform_frozen_examples() {
        // empirical cdf of {0.5} jumps from 0 to 1 at 0.5
        assert_relative_eq!(ks_uniform(&[0.5]), 0.5, max_relative = 1e-15);
        let xs = [0.25, 0.75];
        assert_relative_eq!(ks_uniform(&xs), 0.25, max_relative = 1e-15);
        // a perfectly spaced grid achieves the minimum 1/(2N)
        let grid: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        assert_relative_eq!(ks_uniform(&grid), 0.005, max_relative = 1e-12);
    }

    #[test]
    fn shift_law_is_uniform_for_large_n_with_a_density() {
        let out =
            shift_law_check(TimeSampler::Uniform01, 2f64.sqrt(), &[10_000], 10_000, 42, 0).unwrap();
        assert!(out[0].1 < 0.03, "KS = {}", out[0].1);
        let beta =
            shift_law_check(TimeSampler::Beta22, 2f64.sqrt(), &[10_000], 10_000, 42, 0).unwrap();
        assert!(beta[0].1 < 0.03, "KS = {}", beta[0].1);
    }

    #[test]
    fn shift_law_improves_from_coarse_to_fine_resolution() {
        // at n = 1 the law of {T + 0.9} is a rotated Beta(2,2), whose CDF
        // deviates from uniform by ~0.17; by n = 1000 the wrapping has mixed
        // the density and the law is indistinguishable from uniform
        let out = shift_law_check(TimeSampler::Beta22, 0.9, &[1, 1000], 10_000, 42, 0).unwrap();
        assert!(out[0].1 > 0.08, "coarse KS = {}", out[0].1);
        assert!(out[1].1 < 0.03, "fine KS = {}", out[1].1);
        assert!(out[0].1 > out[1].1);
    }

    #[test]
    fn shift_law_with_zero_phase_and_unit_n_recovers_the_sampler() {
        // {1·T + 0} = T itself: uniform draws stay uniform up to noise
        let out = shift_law_check(TimeSampler::Uniform01, 0.0, &[1], 10_000, 42, 0).unwrap();
        assert!(out[0].1 < 0.03, "KS = {}", out[0].1);
    }

    #[test]
    fn shift_law_is_deterministic_in_the_seed() {
        let a = shift_law_check(TimeSampler::Beta22, 2f64.sqrt(), &[100, 1000], 500, 7, 0).unwrap();
        let b = shift_law_check(TimeSampler::Beta22, 2f64.sqrt(), &[100, 1000], 500, 7, 0).unwrap();
        assert_eq!(a, b);
        let c = shift_law_check(TimeSampler::Beta22, 2f64.sqrt(), &[100, 1000], 500, 8, 0).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn shift_law_validates_inputs() {
        assert!(shift_law_check(TimeSampler::Uniform01, -0.5, &[10], 100, 0, 0).is_err());
        assert!(shift_law_check(TimeSampler::Uniform01, f64::NAN, &[10], 100, 0, 0).is_err());
        assert!(shift_law_check(TimeSampler::Uniform01, 1.0, &[0], 100, 0, 0).is_err());
        assert!(shift_law_check(TimeSampler::Uniform01, 1.0, &[10], 1, 0, 0).is_err());
    }
}

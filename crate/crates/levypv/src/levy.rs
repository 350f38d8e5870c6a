//! Symmetric pure-jump drivers and their realized jump records.
//!
//! Two families are supported: compound Poisson with a symmetric jump law
//! (finite activity, Blumenthal-Getoor index 0) and the big-jump part of a
//! symmetric beta-stable driver, i.e. jumps of the Levy measure
//! `nu(dx) = scale |x|^{-1-beta} dx` restricted to `|x| > jump_cutoff`.
//!
//! Stable jumps are generated in decreasing size order by inverting the tail
//! mass of `nu` at a unit-rate Poisson sequence. Two records drawn from the
//! same `(seed, stream)` with different cutoffs are therefore nested: the
//! coarser record is exactly the fine record filtered to larger sizes. That
//! coupling is what makes cutoff-refinement studies meaningful pathwise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Guard against cutoff choices that would produce absurd jump counts.
const MAX_EXPECTED_JUMPS: f64 = 2e7;

/// Symmetric jump-size law of a compound Poisson driver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum JumpLaw {
    /// Sizes `-a` and `+a` with equal probability.
    TwoPoint { a: f64 },
    /// Centered Gaussian sizes.
    Gaussian { sigma: f64 },
    /// `|J| = x_min U^{-1/exponent}` with a random sign.
    Pareto { exponent: f64, x_min: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum LevyKind {
    CompoundPoisson { rate: f64, jump_law: JumpLaw },
    SymStable { beta: f64, scale: f64, jump_cutoff: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevySpec {
    pub kind: LevyKind,
    /// Root seed; experiment harnesses replace it with their own base seed.
    #[serde(default)]
    pub seed: u64,
}

/// Realized jumps on a window; times strictly increasing, sizes nonzero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpRecord {
    pub window: (f64, f64),
    pub times: Vec<f64>,
    pub sizes: Vec<f64>,
    /// Present when the record was drawn by `simulate_jumps`; feeds path provenance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<JumpOrigin>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpOrigin {
    pub levy_hash: String,
    pub seed: u64,
    pub stream: u64,
}

impl LevySpec {
    pub fn compound_poisson(rate: f64, jump_law: JumpLaw, seed: u64) -> Self {
        LevySpec { kind: LevyKind::CompoundPoisson { rate, jump_law }, seed }
    }

    pub fn sym_stable(beta: f64, scale: f64, jump_cutoff: f64, seed: u64) -> Self {
        LevySpec { kind: LevyKind::SymStable { beta, scale, jump_cutoff }, seed }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            LevyKind::CompoundPoisson { rate, jump_law } => {
                if !(rate >= 0.0) || !rate.is_finite() {
                    return Err(Error::invalid("rate", format!("must be >= 0, got {rate}")));
                }
                match jump_law {
                    JumpLaw::TwoPoint { a } => {
                        if !(a > 0.0) {
                            return Err(Error::invalid("a", "two-point size must be positive"));
                        }
                    }
                    JumpLaw::Gaussian { sigma } => {
                        if !(sigma > 0.0) {
                            return Err(Error::invalid("sigma", "must be positive"));
                        }
                    }
                    JumpLaw::Pareto { exponent, x_min } => {
                        if !(exponent > 0.0) || !(x_min > 0.0) {
                            return Err(Error::invalid("pareto", "exponent and x_min must be positive"));
                        }
                    }
                }
            }
            LevyKind::SymStable { beta, scale, jump_cutoff } => {
                if !(beta > 0.0 && beta < 2.0) {
                    return Err(Error::invalid("beta", format!("must lie in (0, 2), got {beta}")));
                }
                if !(scale > 0.0) {
                    return Err(Error::invalid("scale", "must be positive"));
                }
                if !(jump_cutoff > 0.0) {
                    return Err(Error::invalid("jump_cutoff", "must be positive"));
                }
            }
        }
        Ok(())
    }

    /// Blumenthal-Getoor index of the driver.
    pub fn bg_index(&self) -> f64 {
        match self.kind {
            LevyKind::CompoundPoisson { .. } => 0.0,
            LevyKind::SymStable { beta, .. } => beta,
        }
    }

    /// A copy with the stable cutoff replaced; identity for compound Poisson.
    pub fn with_cutoff(&self, cutoff: f64) -> Self {
        let mut spec = self.clone();
        if let LevyKind::SymStable { ref mut jump_cutoff, .. } = spec.kind {
            *jump_cutoff = cutoff;
        }
        spec
    }

    /// Expected number of jumps per unit time.
    pub fn jump_intensity(&self) -> f64 {
        match self.kind {
            LevyKind::CompoundPoisson { rate, .. } => rate,
            LevyKind::SymStable { beta, scale, jump_cutoff } => {
                2.0 * scale * jump_cutoff.powf(-beta) / beta
            }
        }
    }

    /// Draw the jump record on `window`. Deterministic in `(seed, stream)`.
    pub fn simulate_jumps(&self, window: (f64, f64), stream: u64) -> Result<JumpRecord> {
        self.validate()?;
        let (a, b) = window;
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::precondition(format!("window must satisfy a < b, got ({a}, {b})")));
        }
        let mut rng = self.rng(stream);
        let len = b - a;
        let mut events: Vec<(f64, f64)> = match self.kind {
            LevyKind::CompoundPoisson { rate, jump_law } => {
                let mean = rate * len;
                let count = if mean > 0.0 {
                    Poisson::new(mean)
                        .map_err(|e| Error::invalid("rate", e.to_string()))?
                        .sample(&mut rng) as usize
                } else {
                    0
                };
                let times: Vec<f64> = (0..count).map(|_| rng.random_range(a..b)).collect();
                let sizes: Vec<f64> = (0..count).map(|_| sample_size(jump_law, &mut rng)).collect();
                times.into_iter().zip(sizes).collect()
            }
            LevyKind::SymStable { beta, scale, jump_cutoff } => {
                // Tail mass of nu on the window: T(x) = coeff * x^{-beta}.
                let coeff = 2.0 * scale * len / beta;
                let expected = coeff * jump_cutoff.powf(-beta);
                if expected > MAX_EXPECTED_JUMPS {
                    return Err(Error::invalid(
                        "jump_cutoff",
                        format!("expected jump count {expected:.3e} exceeds the safety limit"),
                    ));
                }
                let exp1 = Exp::new(1.0).expect("unit rate");
                let mut gamma = 0.0;
                let mut events = Vec::new();
                loop {
                    gamma += exp1.sample(&mut rng);
                    let size = (coeff / gamma).powf(1.0 / beta);
                    if size <= jump_cutoff {
                        break;
                    }
                    let t = rng.random_range(a..b);
                    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    events.push((t, sign * size));
                }
                events
            }
        };
        events.sort_by(|x, y| x.0.total_cmp(&y.0));
        // ties have probability zero; nudge to keep times strictly increasing
        for i in 1..events.len() {
            if events[i].0 <= events[i - 1].0 {
                events[i].0 = events[i - 1].0.next_up();
            }
        }
        let (times, sizes) = events.into_iter().unzip();
        Ok(JumpRecord {
            window,
            times,
            sizes,
            origin: Some(JumpOrigin { levy_hash: self.hash(), seed: self.seed, stream }),
        })
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    /// Content hash for provenance records.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("levy spec serializes");
        let digest = Sha256::digest(json.as_bytes());
        format!("{:02x}{:02x}{:02x}{:02x}", digest[0], digest[1], digest[2], digest[3])
    }
}

fn sample_size(law: JumpLaw, rng: &mut ChaCha8Rng) -> f64 {
    match law {
        JumpLaw::TwoPoint { a } => {
            if rng.random::<bool>() {
                a
            } else {
                -a
            }
        }
        JumpLaw::Gaussian { sigma } => {
            let normal = Normal::new(0.0, sigma).expect("sigma validated");
            loop {
                let s = normal.sample(rng);
                if s != 0.0 {
                    return s;
                }
            }
        }
        JumpLaw::Pareto { exponent, x_min } => {
            let u = 1.0 - rng.random::<f64>(); // (0, 1]
            let mag = x_min * u.powf(-1.0 / exponent);
            if rng.random::<bool>() {
                mag
            } else {
                -mag
            }
        }
    }
}

impl JumpRecord {
    pub fn empty(window: (f64, f64)) -> Self {
        JumpRecord { window, times: Vec::new(), sizes: Vec::new(), origin: None }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.iter().copied().zip(self.sizes.iter().copied())
    }

    /// Drop jumps with `|size| <= cutoff`. Matches the generator's stopping
    /// rule, so re-truncating a fine stable record reproduces the coarser
    /// record of the same stream exactly.
    pub fn truncate_small(&self, cutoff: f64) -> Self {
        let kept: Vec<(f64, f64)> = self.iter().filter(|&(_, s)| s.abs() > cutoff).collect();
        JumpRecord {
            window: self.window,
            times: kept.iter().map(|j| j.0).collect(),
            sizes: kept.iter().map(|j| j.1).collect(),
            origin: self.origin.clone(),
        }
    }

    /// CSV rows `time,size` with 17 significant digits (lossless for f64).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time,size\n");
        for (t, s) in self.iter() {
            out.push_str(&format!("{t:.16e},{s:.16e}\n"));
        }
        out
    }
}

/// `sum |size|^p` over jump times in the half-open interval `(lo, hi]`.
pub fn power_sum(record: &JumpRecord, p: f64, interval: (f64, f64)) -> f64 {
    let (lo, hi) = interval;
    record
        .iter()
        .filter(|&(t, _)| t > lo && t <= hi)
        .map(|(_, s)| s.abs().powf(p))
        .sum()
}

/// Well-separation test for the jump configuration at resolution `eps`:
/// (a) jumps with a time in `[-theta_l, 1]` are more than `2 eps` away from
///     every other jump,
/// (b) the same after shifting by any `theta_z - theta_{z'}`,
/// (c) no jump lies within `eps` of an interval endpoint `-theta_z` or
///     `1 - theta_z`.
pub fn check_omega_eps(record: &JumpRecord, thetas: &[f64], eps: f64) -> bool {
    assert!(eps > 0.0, "eps must be positive");
    assert!(!thetas.is_empty() && thetas[0] == 0.0, "thetas must start at 0");
    separation_margin(record, thetas) > eps
}

/// Largest `eps` (exclusive) at which `check_omega_eps` passes. Infinite when
/// the record imposes no constraint (at most one jump, none near endpoints).
pub fn separation_margin(record: &JumpRecord, thetas: &[f64]) -> f64 {
    let theta_l = *thetas.last().expect("nonempty thetas");
    let mut margin = f64::INFINITY;
    let n = record.len();
    for m in 0..n {
        let tm = record.times[m];
        // (c) applies to every jump
        for &th in thetas {
            margin = margin.min((tm + th).abs());
            margin = margin.min((tm - (1.0 - th)).abs());
        }
        if !(-theta_l..=1.0).contains(&tm) {
            continue;
        }
        for i in 0..n {
            if i == m {
                continue;
            }
            let ti = record.times[i];
            // (a) plain separation; (b) separation after singularity shifts
            margin = margin.min((tm - ti).abs() / 2.0);
            for &tz in thetas {
                for &tz2 in thetas {
                    if tz == tz2 {
                        continue;
                    }
                    margin = margin.min((tm + tz - tz2 - ti).abs() / 2.0);
                }
            }
        }
    }
    margin
}

/// Default separation resolution: half the realized margin, capped at 0.05.
pub fn default_eps(record: &JumpRecord, thetas: &[f64]) -> f64 {
    let margin = separation_margin(record, thetas);
    if margin.is_finite() && margin > 0.0 {
        (margin / 2.0).min(0.05)
    } else {
        0.05
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(window: (f64, f64), jumps: &[(f64, f64)]) -> JumpRecord {
        JumpRecord {
            window,
            times: jumps.iter().map(|j| j.0).collect(),
            sizes: jumps.iter().map(|j| j.1).collect(),
            origin: None,
        }
    }

    #[test]
    fn zero_rate_produces_no_jumps() {
        let spec = LevySpec::compound_poisson(0.0, JumpLaw::TwoPoint { a: 1.0 }, 1);
        let rec = spec.simulate_jumps((-1.0, 1.0), 0).unwrap();
        assert!(rec.is_empty());
    }

    #[test]
    fn records_are_deterministic_in_seed_and_stream() {
        let spec = LevySpec::compound_poisson(4.0, JumpLaw::Gaussian { sigma: 1.0 }, 42);
        let a = spec.simulate_jumps((-2.0, 1.0), 7).unwrap();
        let b = spec.simulate_jumps((-2.0, 1.0), 7).unwrap();
        assert_eq!(a, b);
        let c = spec.simulate_jumps((-2.0, 1.0), 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn times_are_strictly_increasing_and_inside_the_window() {
        let spec = LevySpec::sym_stable(1.2, 1.0, 0.05, 3);
        let rec = spec.simulate_jumps((-1.5, 1.0), 0).unwrap();
        assert!(rec.len() > 10);
        for w in rec.times.windows(2) {
            assert!(w[1] > w[0]);
        }
        for &t in &rec.times {
            assert!((-1.5..1.0).contains(&t));
        }
        for &s in &rec.sizes {
            assert!(s.abs() > 0.05);
        }
    }

    #[test]
    fn compound_poisson_count_matches_rate() {
        let spec = LevySpec::compound_poisson(5.0, JumpLaw::TwoPoint { a: 1.0 }, 11);
        let trials = 2000u64;
        let total: usize = (0..trials)
            .map(|s| spec.simulate_jumps((-2.0, 1.0), s).unwrap().len())
            .sum();
        let mean = total as f64 / trials as f64;
        // Poisson(15): se of the mean over 2000 trials is 0.087
        assert!((mean - 15.0).abs() < 0.35, "mean count {mean}");
    }

    #[test]
    fn stable_count_matches_restricted_intensity() {
        // nu(|x| > 0.1) = 2 * 0.1^{-1.5} / 1.5 per unit time
        let spec = LevySpec::sym_stable(1.5, 1.0, 0.1, 5);
        let expected = 2.0 * 0.1f64.powf(-1.5) / 1.5;
        let trials = 10_000u64;
        let total: usize = (0..trials)
            .map(|s| spec.simulate_jumps((0.0, 1.0), s).unwrap().len())
            .sum();
        let mean = total as f64 / trials as f64;
        assert!(
            (mean - expected).abs() / expected < 0.02,
            "mean {mean} vs expected {expected}"
        );
    }

    #[test]
    fn signs_are_balanced() {
        let gauss = LevySpec::compound_poisson(10.0, JumpLaw::Gaussian { sigma: 1.0 }, 17);
        let mut sum = 0.0;
        let mut count = 0usize;
        for s in 0..2000u64 {
            let rec = gauss.simulate_jumps((0.0, 1.0), s).unwrap();
            sum += rec.sizes.iter().sum::<f64>();
            count += rec.len();
        }
        assert!((sum / count as f64).abs() < 0.03, "gaussian mean {}", sum / count as f64);

        let stable = LevySpec::sym_stable(1.5, 1.0, 0.1, 23);
        let mut signs = 0i64;
        let mut count = 0i64;
        for s in 0..500u64 {
            let rec = stable.simulate_jumps((0.0, 1.0), s).unwrap();
            signs += rec.sizes.iter().map(|v| v.signum() as i64).sum::<i64>();
            count += rec.len() as i64;
        }
        let frac = signs as f64 / count as f64;
        assert!(frac.abs() < 4.0 / (count as f64).sqrt(), "sign imbalance {frac}");
    }

    #[test]
    fn cutoff_records_are_nested() {
        let fine = LevySpec::sym_stable(1.2, 0.7, 0.05, 9);
        let coarse = fine.with_cutoff(0.2);
        let rec_fine = fine.simulate_jumps((-1.0, 1.0), 3).unwrap();
        let rec_coarse = coarse.simulate_jumps((-1.0, 1.0), 3).unwrap();
        let truncated = rec_fine.truncate_small(0.2);
        assert!(!truncated.is_empty());
        assert_eq!(truncated.times, rec_coarse.times);
        assert_eq!(truncated.sizes, rec_coarse.sizes);
    }

    #[test]
    fn bg_index_reports_the_activity_index() {
        assert_eq!(
            LevySpec::compound_poisson(3.0, JumpLaw::TwoPoint { a: 1.0 }, 0).bg_index(),
            0.0
        );
        assert_eq!(LevySpec::sym_stable(1.2, 1.0, 0.1, 0).bg_index(), 1.2);
        assert_eq!(LevySpec::sym_stable(0.5, 1.0, 0.1, 0).bg_index(), 0.5);
    }

    #[test]
    fn power_sum_frozen_examples() {
        let rec = record((-1.0, 1.0), &[(-0.4, 1.0), (0.3, 2.0)]);
        assert_eq!(power_sum(&rec, 2.0, (0.0, 1.0)), 4.0);
        assert_eq!(power_sum(&rec, 2.0, (-1.0, 0.0)), 1.0);
        assert_eq!(power_sum(&JumpRecord::empty((-1.0, 1.0)), 2.0, (0.0, 1.0)), 0.0);
    }

    #[test]
    fn power_sum_interval_is_left_open_right_closed() {
        let rec = record((-1.0, 1.0), &[(0.0, 3.0), (0.5, 1.0), (1.0, 2.0)]);
        // jump at the left endpoint excluded, at the right endpoint included
        assert_eq!(power_sum(&rec, 1.0, (0.0, 1.0)), 3.0);
        assert_eq!(power_sum(&rec, 1.0, (-1.0, 0.0)), 3.0);
    }

    #[test]
    fn omega_eps_examples() {
        let empty = JumpRecord::empty((-1.0, 1.0));
        assert!(check_omega_eps(&empty, &[0.0, 0.3], 0.1));

        // second jump sits exactly one singularity gap after the first
        let rec = record((-1.0, 1.0), &[(0.5, 1.0), (0.8, 1.0)]);
        assert!(!check_omega_eps(&rec, &[0.0, 0.3], 0.1));

        let single = record((-1.0, 1.0), &[(0.5, 1.0)]);
        assert!(check_omega_eps(&single, &[0.0], 0.01));
    }

    #[test]
    fn omega_eps_rejects_jumps_near_interval_endpoints() {
        let thetas = [0.0, 0.3];
        let rec = record((-1.0, 1.0), &[(-0.3, 1.0)]);
        assert!(!check_omega_eps(&rec, &thetas, 0.05));
        let rec = record((-1.0, 1.0), &[(0.68, 1.0)]); // within 0.05 of 1 - 0.3
        assert!(!check_omega_eps(&rec, &thetas, 0.05));
    }

    #[test]
    fn default_eps_is_feasible_and_capped() {
        let single = record((-1.0, 1.0), &[(0.5, 1.0)]);
        let eps = default_eps(&single, &[0.0]);
        assert_eq!(eps, 0.05);
        assert!(check_omega_eps(&single, &[0.0], eps));

        let tight = record((-1.0, 1.0), &[(0.5, 1.0), (0.52, 1.0)]);
        let eps = default_eps(&tight, &[0.0]);
        assert!(eps < 0.05);
        assert!(check_omega_eps(&tight, &[0.0], eps));
    }

    #[test]
    fn csv_round_trips_exactly() {
        let spec = LevySpec::compound_poisson(5.0, JumpLaw::Gaussian { sigma: 2.0 }, 3);
        let rec = spec.simulate_jumps((-2.0, 1.0), 1).unwrap();
        let csv = rec.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("time,size"));
        for (line, (t, s)) in lines.zip(rec.iter()) {
            let mut parts = line.split(',');
            let tp: f64 = parts.next().unwrap().parse().unwrap();
            let sp: f64 = parts.next().unwrap().parse().unwrap();
            assert_eq!(tp, t);
            assert_eq!(sp, s);
        }
    }

    #[test]
    fn specs_round_trip_through_json_and_toml() {
        let specs = [
            LevySpec::compound_poisson(3.0, JumpLaw::Pareto { exponent: 2.5, x_min: 0.1 }, 7),
            LevySpec::sym_stable(1.5, 1.0, 0.02, 9),
        ];
        for spec in &specs {
            let json = serde_json::to_string(spec).unwrap();
            let back: LevySpec = serde_json::from_str(&json).unwrap();
            assert_eq!(*spec, back);
            let toml_text = toml::to_string(spec).unwrap();
            let back: LevySpec = toml::from_str(&toml_text).unwrap();
            assert_eq!(*spec, back);
        }
    }

    proptest! {
        #[test]
        fn power_sum_is_additive_over_adjacent_intervals(
            times in proptest::collection::vec(-1f64..1.0, 0..20),
            split in -0.5f64..0.5,
        ) {
            let mut ts: Vec<f64> = times;
            ts.sort_by(f64::total_cmp);
            ts.dedup();
            let sizes: Vec<f64> = ts.iter().map(|t| 1.0 + t.abs()).collect();
            let rec = JumpRecord { window: (-1.0, 1.0), times: ts, sizes, origin: None };
            let whole = power_sum(&rec, 1.7, (-1.0, 1.0));
            let left = power_sum(&rec, 1.7, (-1.0, split));
            let right = power_sum(&rec, 1.7, (split, 1.0));
            prop_assert!((whole - (left + right)).abs() <= 1e-12 * whole.max(1.0));
        }
    }
}

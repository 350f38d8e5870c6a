//! Exact moving-average paths driven by finite jump records.
//!
//! With finitely many jumps the stochastic integral collapses to a finite sum:
//! `X_{i/n} = sum_m size_m (g(i/n - T_m) - g_0(-T_m))`. No discretisation of
//! the integral is involved; the only approximation relative to the idealised
//! process is the truncation of jumps before `-T_past`, quantified by
//! `truncation_error_report`.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::kernels::{Envelope, KernelSpec};
use crate::levy::{JumpRecord, JumpLaw, LevyKind, LevySpec};

/// Where a sample path came from; written as a JSON sidecar next to path CSVs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub kernel_id: String,
    pub levy_hash: Option<String>,
    pub seed: Option<u64>,
    pub stream: Option<u64>,
    pub t_past: f64,
    pub n: usize,
    pub jump_count: usize,
}

/// Equidistant observations `X_0, X_{1/n}, ..., X_1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    pub n: usize,
    pub values: Vec<f64>,
    pub past_window: f64,
    pub provenance: Provenance,
}

/// Default truncation horizon for the past window.
pub fn default_t_past(kernel: &KernelSpec) -> f64 {
    match kernel.envelope {
        // support of g is [0, 1]; anything below -2 cannot reach the grid
        Envelope::Indicator => 2.0,
        Envelope::PlusPower => 5.0,
        Envelope::BumpExp => kernel.theta_last() + 5.0,
    }
}

/// Simulate with the kernel's default past horizon.
pub fn simulate_path(kernel: &KernelSpec, jumps: &JumpRecord, n: usize) -> Result<SamplePath> {
    simulate_path_with(kernel, jumps, n, default_t_past(kernel))
}

/// `X_{i/n}` for `i = 0..=n` from the realized jumps. The record must cover
/// `[-t_past, 1]`; jumps outside that range are used as given (they only
/// improve the truncation).
pub fn simulate_path_with(
    kernel: &KernelSpec,
    jumps: &JumpRecord,
    n: usize,
    t_past: f64,
) -> Result<SamplePath> {
    kernel.validate()?;
    if n == 0 {
        return Err(Error::invalid("n", "grid resolution must be positive"));
    }
    if !(t_past > 0.0) || !t_past.is_finite() {
        return Err(Error::invalid("t_past", "past horizon must be positive and finite"));
    }
    let (a, b) = jumps.window;
    if a > -t_past || b < 1.0 {
        return Err(Error::precondition(format!(
            "jump window [{a}, {b}] too small for past truncation [-{t_past}, 1]"
        )));
    }
    let nf = n as f64;
    let mut values = vec![0.0; n + 1];
    // g_0 only enters through a level shift that is constant across the grid
    let mut level = 0.0;
    for (t_m, size) in jumps.iter() {
        level += size * kernel.eval_g0(-t_m);
        // g vanishes left of the jump; start one index early so float
        // rounding at the boundary can never exclude a valid grid point
        let start = (((nf * t_m).floor() as i64) - 1).max(0) as usize;
        let end = match kernel.envelope {
            Envelope::Indicator => ((((nf * (t_m + 1.0)).ceil() as i64) + 1).max(0) as usize).min(n),
            _ => n,
        };
        for (i, v) in values.iter_mut().enumerate().take(end + 1).skip(start) {
            *v += size * kernel.eval_g(i as f64 / nf - t_m);
        }
    }
    if level != 0.0 {
        for v in values.iter_mut() {
            *v -= level;
        }
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::precondition("path values are not finite".to_string()));
    }
    let origin = jumps.origin.as_ref();
    Ok(SamplePath {
        n,
        past_window: t_past,
        provenance: Provenance {
            kernel_id: kernel.id(),
            levy_hash: origin.map(|o| o.levy_hash.clone()),
            seed: origin.map(|o| o.seed),
            stream: origin.map(|o| o.stream),
            t_past,
            n,
            jump_count: jumps.len(),
        },
        values,
    })
}

impl SamplePath {
    /// CSV rows `i,t,x` with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,t,x\n");
        let nf = self.n as f64;
        for (i, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{i},{:.16e},{v:.16e}\n", i as f64 / nf));
        }
        out
    }

    pub fn provenance_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&self.provenance)
            .map_err(|e| Error::Serialization(e.to_string()))
    }
}

/// Conservative bound proxy for what jumps before `-t_past` can contribute to
/// any filtered increment: expected jump activity times the integrated sup of
/// `|g'|` over unit windows beyond the horizon. Strictly decreasing in
/// `t_past` whenever the kernel tail is nonzero. Infinite when the driver's
/// `p`-th size moment or the kernel's derivative tail is not integrable
/// (plus-power kernels: symmetric cancellation is real but not bounded here).
pub fn truncation_error_report(
    kernel: &KernelSpec,
    levy: &LevySpec,
    t_past: f64,
    p: f64,
) -> Result<f64> {
    kernel.validate()?;
    levy.validate()?;
    if !(p > 0.0) {
        return Err(Error::invalid("p", "power must be positive"));
    }
    let theta_l = kernel.theta_last();
    match kernel.envelope {
        Envelope::Indicator => {
            if t_past <= theta_l {
                return Err(Error::precondition(format!(
                    "t_past must exceed the kernel support end {theta_l}"
                )));
            }
            Ok(0.0)
        }
        Envelope::PlusPower => {
            if t_past <= 0.0 {
                return Err(Error::precondition("t_past must be positive".to_string()));
            }
            Ok(f64::INFINITY)
        }
        Envelope::BumpExp => {
            let onset = theta_l + 2.0 * kernel.bump_delta();
            if t_past <= onset {
                return Err(Error::precondition(format!(
                    "t_past must exceed the last bump support {onset}"
                )));
            }
            let moment = size_moment_p(levy, p);
            if !moment.is_finite() {
                return Ok(f64::INFINITY);
            }
            let last = kernel.singularities.last().expect("validated");
            // past the last bump: g(u) = c (u - theta_l)^alpha e^{-u}
            let deriv = |u: f64| -> f64 {
                let d = u - theta_l;
                (last.c * (-u).exp() * d.powf(last.alpha - 1.0) * (last.alpha - d)).abs()
            };
            let window_sup = |s: f64| -> f64 {
                let mut sup: f64 = 0.0;
                for j in 0..=16 {
                    sup = sup.max(deriv(s + j as f64 / 16.0));
                }
                sup * 1.0625 // margin for the sampled sup
            };
            let step = 0.05;
            let mut integral = 0.0;
            let mut s = t_past;
            let mut prev = window_sup(s);
            loop {
                let next = window_sup(s + step);
                integral += 0.5 * (prev + next) * step;
                s += step;
                prev = next;
                if (prev < 1e-280 && s > t_past + 3.0) || s > t_past + 800.0 {
                    break;
                }
            }
            Ok(levy.jump_intensity() * moment * integral)
        }
    }
}

/// `E[|J|^p]^{1/p}` for the driver's jump-size law; infinite when the moment
/// diverges.
fn size_moment_p(levy: &LevySpec, p: f64) -> f64 {
    match levy.kind {
        LevyKind::CompoundPoisson { jump_law, .. } => match jump_law {
            JumpLaw::TwoPoint { a } => a,
            JumpLaw::Gaussian { sigma } => {
                // E|N(0,1)|^p = 2^{p/2} Gamma((p+1)/2) / sqrt(pi)
                let m = 2f64.powf(p / 2.0) * gamma((p + 1.0) / 2.0) / std::f64::consts::PI.sqrt();
                sigma * m.powf(1.0 / p)
            }
            JumpLaw::Pareto { exponent, x_min } => {
                if p < exponent {
                    x_min * (exponent / (exponent - p)).powf(1.0 / p)
                } else {
                    f64::INFINITY
                }
            }
        },
        LevyKind::SymStable { beta, jump_cutoff, .. } => {
            // restricted sizes are Pareto(beta) above the cutoff
            if p < beta {
                jump_cutoff * (beta / (beta - p)).powf(1.0 / p)
            } else {
                f64::INFINITY
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::filter_weights;
    use crate::levy::JumpLaw;
    use approx::assert_relative_eq;

    fn record(window: (f64, f64), jumps: &[(f64, f64)]) -> JumpRecord {
        JumpRecord {
            window,
            times: jumps.iter().map(|j| j.0).collect(),
            sizes: jumps.iter().map(|j| j.1).collect(),
            origin: None,
        }
    }

    #[test]
    fn indicator_path_is_a_shifted_plateau() {
        let kernel = KernelSpec::indicator();
        let rec = record((-2.0, 1.0), &[(0.3, 2.0)]);
        let path = simulate_path(&kernel, &rec, 10).unwrap();
        for i in 0..=10usize {
            let expect = if i as f64 / 10.0 >= 0.3 { 2.0 } else { 0.0 };
            assert_eq!(path.values[i], expect, "i = {i}");
        }
    }

    #[test]
    fn empty_record_gives_the_zero_path() {
        let kernel = KernelSpec::indicator();
        let path = simulate_path(&kernel, &JumpRecord::empty((-2.0, 1.0)), 8).unwrap();
        assert!(path.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn lfsm_single_jump_matches_the_centered_power() {
        let kernel = KernelSpec::lfsm(0.4);
        let rec = record((-5.0, 1.0), &[(-0.5, 1.0)]);
        let path = simulate_path(&kernel, &rec, 4).unwrap();
        for i in 0..=4usize {
            let t = i as f64 / 4.0;
            let expect = (t + 0.5).powf(0.4) - 0.5f64.powf(0.4);
            assert_relative_eq!(path.values[i], expect, max_relative = 1e-14);
        }
    }

    #[test]
    fn paths_are_linear_in_jump_sizes() {
        let kernel = KernelSpec::multising(&[(0.0, 0.3, 1.0), (0.5, 0.6, -1.5)]).unwrap();
        let base = record((-6.0, 1.0), &[(-1.2, 0.7), (0.25, -1.1), (0.8, 0.4)]);
        let mut scaled = base.clone();
        for s in scaled.sizes.iter_mut() {
            *s *= -2.5;
        }
        let pa = simulate_path(&kernel, &base, 32).unwrap();
        let pb = simulate_path(&kernel, &scaled, 32).unwrap();
        for i in 0..=32usize {
            assert_relative_eq!(pb.values[i], -2.5 * pa.values[i], max_relative = 1e-12, epsilon = 1e-14);
        }
    }

    #[test]
    fn paths_superpose_over_disjoint_records() {
        let kernel = KernelSpec::lfsm(0.3);
        let ja = [(-2.0, 1.0), (0.6, -0.5)];
        let jb = [(-0.4, 0.8), (0.9, 1.5)];
        let mut merged: Vec<(f64, f64)> = ja.iter().chain(jb.iter()).copied().collect();
        merged.sort_by(|x, y| x.0.total_cmp(&y.0));
        let pa = simulate_path(&kernel, &record((-5.0, 1.0), &ja), 16).unwrap();
        let pb = simulate_path(&kernel, &record((-5.0, 1.0), &jb), 16).unwrap();
        let pm = simulate_path(&kernel, &record((-5.0, 1.0), &merged), 16).unwrap();
        for i in 0..=16usize {
            assert_relative_eq!(
                pm.values[i],
                pa.values[i] + pb.values[i],
                max_relative = 1e-12,
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn indicator_path_ignores_jumps_outside_the_reach() {
        let kernel = KernelSpec::indicator();
        let near = record((-2.0, 1.0), &[(0.3, 2.0)]);
        let far = record((-2.0, 1.0), &[(-1.7, 5.0), (0.3, 2.0)]);
        let pa = simulate_path(&kernel, &near, 10).unwrap();
        let pb = simulate_path(&kernel, &far, 10).unwrap();
        assert_eq!(pa.values, pb.values);
    }

    #[test]
    fn window_must_cover_the_past_horizon() {
        let kernel = KernelSpec::lfsm(0.3); // default t_past = 5
        let rec = record((-2.0, 1.0), &[(0.3, 1.0)]);
        assert!(simulate_path(&kernel, &rec, 8).is_err());
        assert!(simulate_path_with(&kernel, &rec, 8, 2.0).is_ok());
        let short = record((-2.0, 0.5), &[(0.3, 1.0)]);
        assert!(simulate_path_with(&kernel, &short, 8, 2.0).is_err());
    }

    #[test]
    fn provenance_records_the_generating_pieces() {
        let kernel = KernelSpec::indicator();
        let levy = LevySpec::compound_poisson(5.0, JumpLaw::TwoPoint { a: 1.0 }, 99);
        let rec = levy.simulate_jumps((-2.0, 1.0), 4).unwrap();
        let path = simulate_path(&kernel, &rec, 16).unwrap();
        assert_eq!(path.provenance.seed, Some(99));
        assert_eq!(path.provenance.stream, Some(4));
        assert_eq!(path.provenance.levy_hash.as_deref(), Some(levy.hash().as_str()));
        assert_eq!(path.provenance.jump_count, rec.len());
        let json = path.provenance_json().unwrap();
        assert!(json.contains("kernel_id"));
    }

    #[test]
    fn csv_has_n_plus_one_rows() {
        let kernel = KernelSpec::indicator();
        let path = simulate_path(&kernel, &record((-2.0, 1.0), &[(0.5, 1.0)]), 4).unwrap();
        let csv = path.to_csv();
        assert_eq!(csv.lines().count(), 6);
        assert!(csv.starts_with("i,t,x\n0,"));
    }

    #[test]
    fn truncation_report_is_zero_beyond_indicator_support() {
        let kernel = KernelSpec::indicator();
        let levy = LevySpec::compound_poisson(5.0, JumpLaw::TwoPoint { a: 1.0 }, 0);
        assert_eq!(truncation_error_report(&kernel, &levy, 1.5, 2.0).unwrap(), 0.0);
        assert!(truncation_error_report(&kernel, &levy, 0.5, 2.0).is_err());
    }

    #[test]
    fn truncation_report_decreases_when_the_horizon_grows() {
        let kernel = KernelSpec::multising(&[(0.0, 0.4, 1.0), (0.4, 0.8, 2.0)]).unwrap();
        let levy = LevySpec::compound_poisson(2.0, JumpLaw::TwoPoint { a: 1.0 }, 0);
        let b2 = truncation_error_report(&kernel, &levy, 2.0, 2.0).unwrap();
        let b4 = truncation_error_report(&kernel, &levy, 4.0, 2.0).unwrap();
        let b8 = truncation_error_report(&kernel, &levy, 8.0, 2.0).unwrap();
        assert!(b2 > b4 && b4 > b8, "{b2} {b4} {b8}");
        assert!(b8 > 0.0);
    }

    #[test]
    fn truncation_report_is_infinite_for_heavy_tails_and_power_kernels() {
        let lfsm = KernelSpec::lfsm(0.2);
        let cp = LevySpec::compound_poisson(2.0, JumpLaw::TwoPoint { a: 1.0 }, 0);
        assert_eq!(truncation_error_report(&lfsm, &cp, 5.0, 2.0).unwrap(), f64::INFINITY);

        let bump = KernelSpec::multising(&[(0.0, 0.4, 1.0)]).unwrap();
        let stable = LevySpec::sym_stable(1.5, 1.0, 0.1, 0);
        // p >= beta: the restricted size moment diverges
        assert_eq!(truncation_error_report(&bump, &stable, 3.0, 2.0).unwrap(), f64::INFINITY);
        // p < beta: finite
        assert!(truncation_error_report(&bump, &stable, 3.0, 1.0).unwrap().is_finite());
    }

    #[test]
    fn truncation_report_dominates_brute_force_window_extension() {
        let kernel = KernelSpec::multising(&[(0.0, 0.4, 1.0), (0.4, 0.8, 2.0)]).unwrap();
        let levy = LevySpec::compound_poisson(2.0, JumpLaw::TwoPoint { a: 1.0 }, 314);
        let t_past = 2.0;
        let bound = truncation_error_report(&kernel, &levy, t_past, 2.0).unwrap();
        let n = 64usize;
        let mut worst: f64 = 0.0;
        for stream in 0..100u64 {
            let wide = levy.simulate_jumps((-4.0 * t_past, 1.0), stream).unwrap();
            let kept: Vec<(f64, f64)> = wide.iter().filter(|&(t, _)| t >= -t_past).collect();
            let narrow = record((-t_past, 1.0), &kept);
            let pw = simulate_path_with(&kernel, &wide, n, t_past).unwrap();
            let pn = simulate_path_with(&kernel, &narrow, n, t_past).unwrap();
            for k in 1..=2u32 {
                let w = filter_weights(k).unwrap();
                for i in k as usize..=n {
                    let mut dw = 0.0;
                    let mut dn = 0.0;
                    for (j, &wj) in w.iter().enumerate() {
                        dw += wj as f64 * pw.values[i - j];
                        dn += wj as f64 * pn.values[i - j];
                    }
                    worst = worst.max((dw - dn).abs());
                }
            }
        }
        assert!(worst > 0.0, "brute force saw no far-jump effect at all");
        assert!(worst <= bound, "observed change {worst} exceeds bound {bound}");
    }
}

//! Kernel shapes with power-law singularities.
//!
//! A kernel `g` vanishes on `t < 0` and carries an ordered list of singular
//! points `0 = theta_0 < theta_1 < ... < theta_l`. Near `theta_z` it behaves
//! exactly like `c_z |t - theta_z|^{alpha_z}` (one-sided `t_+^{alpha_0}` at the
//! origin). Between singularities the shape is determined by the envelope:
//!
//! * `indicator`: `g = 1` on `[0, 1]`, a toy kernel whose moving average is a
//!   difference of the driver over a unit lag;
//! * `plus-power`: `g(t) = c_0 t_+^{alpha_0}`, the fractional-noise kernel
//!   (single singularity, no decay; only `g - g_0` is integrable);
//! * `bump-exp`: each singular piece is multiplied by a smooth bump equal to 1
//!   within radius `delta` of its singularity and supported within `2 delta`,
//!   and the last piece continues past its bump with an `e^{-t}` factor so the
//!   kernel decays at infinity. `delta` is a quarter of the minimal gap
//!   between singularities (0.25 when there is a single point).
//!
//! The bump construction keeps the local model exact within radius `delta`,
//! which is what makes pathwise comparisons against the limit series converge
//! at moderate grid sizes.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Radius used by `bump-exp` kernels with a single singular point.
const SINGLETON_DELTA: f64 = 0.25;

/// One power-law singularity of the kernel: `g(t) ~ c |t - theta|^alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingularPoint {
    pub theta: f64,
    pub alpha: f64,
    pub c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Envelope {
    Indicator,
    PlusPower,
    BumpExp,
}

impl Envelope {
    pub fn name(self) -> &'static str {
        match self {
            Envelope::Indicator => "indicator",
            Envelope::PlusPower => "plus-power",
            Envelope::BumpExp => "bump-exp",
        }
    }
}

/// Singularity list plus envelope; the part of a kernel that can be evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelShape {
    pub singularities: Vec<SingularPoint>,
    pub envelope: Envelope,
}

/// How the centering function `g_0` relates to `g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum G0Mode {
    /// `g_0 = 0`: the moving average is anchored at the process start.
    Zero,
    /// `g_0 = g`: stationary-increments normalisation.
    EqualToG,
    /// An independent shape evaluated with the same machinery.
    Custom(KernelShape),
}

/// Full kernel description as read from configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub singularities: Vec<SingularPoint>,
    pub envelope: Envelope,
    pub g0_mode: G0Mode,
    /// Declared integrability exponent of `g` (or `g - g_0`), in `(0, 2]`.
    #[serde(default = "default_w")]
    pub w: f64,
    /// Largest filter order the kernel declares smoothness bounds for.
    #[serde(default = "default_k_max")]
    pub k_max: u32,
}

fn default_w() -> f64 {
    1.0
}

fn default_k_max() -> u32 {
    8
}

impl KernelSpec {
    /// Toy kernel `g = 1` on `[0, 1]`, `g_0 = 0`. The nominal singular points
    /// mark the jump locations of the indicator; `alpha` and `c` are unused.
    pub fn indicator() -> Self {
        KernelSpec {
            singularities: vec![
                SingularPoint { theta: 0.0, alpha: 1.0, c: 1.0 },
                SingularPoint { theta: 1.0, alpha: 1.0, c: 1.0 },
            ],
            envelope: Envelope::Indicator,
            g0_mode: G0Mode::Zero,
            w: 1.0,
            k_max: 8,
        }
    }

    /// Fractional-noise kernel `g = g_0 = t_+^alpha`.
    pub fn lfsm(alpha: f64) -> Self {
        KernelSpec {
            singularities: vec![SingularPoint { theta: 0.0, alpha, c: 1.0 }],
            envelope: Envelope::PlusPower,
            g0_mode: G0Mode::EqualToG,
            w: 2.0,
            k_max: 8,
        }
    }

    /// Bump-localised multi-singularity kernel with `g_0 = 0`.
    pub fn multising(points: &[(f64, f64, f64)]) -> Result<Self> {
        let spec = KernelSpec {
            singularities: points
                .iter()
                .map(|&(theta, alpha, c)| SingularPoint { theta, alpha, c })
                .collect(),
            envelope: Envelope::BumpExp,
            g0_mode: G0Mode::Zero,
            w: 1.0,
            k_max: 8,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        validate_shape(&self.singularities, self.envelope)?;
        if let G0Mode::Custom(shape) = &self.g0_mode {
            validate_shape(&shape.singularities, shape.envelope)?;
        }
        if !(self.w > 0.0 && self.w <= 2.0) {
            return Err(Error::invalid("w", format!("must lie in (0, 2], got {}", self.w)));
        }
        if self.k_max == 0 {
            return Err(Error::invalid("k_max", "must be at least 1"));
        }
        Ok(())
    }

    pub fn eval_g(&self, t: f64) -> f64 {
        eval_shape(&self.singularities, self.envelope, t)
    }

    pub fn eval_g0(&self, t: f64) -> f64 {
        match &self.g0_mode {
            G0Mode::Zero => 0.0,
            G0Mode::EqualToG => self.eval_g(t),
            G0Mode::Custom(shape) => eval_shape(&shape.singularities, shape.envelope, t),
        }
    }

    /// Filtered kernel value `sum_j w_j g((i - j)/n - x)` for the order-`k`
    /// difference filter. Bit-identical to the explicit weighted sum because
    /// it performs exactly those operations in ascending `j`.
    pub fn eval_g_filtered(&self, i: u64, n: u64, k: u32, x: f64) -> Result<f64> {
        if n == 0 {
            return Err(Error::invalid("n", "grid resolution must be positive"));
        }
        if u64::from(k) > i {
            return Err(Error::precondition(format!(
                "filtered evaluation needs i >= k, got i = {i}, k = {k}"
            )));
        }
        let weights = filter_weights(k)?;
        let nf = n as f64;
        let mut acc = 0.0;
        for (j, &w) in weights.iter().enumerate() {
            let arg = (i - j as u64) as f64 / nf - x;
            acc += w as f64 * self.eval_g(arg);
        }
        Ok(acc)
    }

    pub fn thetas(&self) -> Vec<f64> {
        self.singularities.iter().map(|s| s.theta).collect()
    }

    pub fn theta_last(&self) -> f64 {
        self.singularities.last().map(|s| s.theta).unwrap_or(0.0)
    }

    /// Minimal gap between consecutive singular points, if there are two or more.
    pub fn min_gap(&self) -> Option<f64> {
        self.singularities
            .windows(2)
            .map(|w| w[1].theta - w[0].theta)
            .fold(None, |m, g| Some(m.map_or(g, |m: f64| m.min(g))))
    }

    /// Bump radius of the `bump-exp` construction.
    pub fn bump_delta(&self) -> f64 {
        self.min_gap().map_or(SINGLETON_DELTA, |g| g / 4.0)
    }

    /// Smallest singularity exponent and the indices attaining it.
    /// Ties are decided by exact float equality, which is the intended
    /// behaviour for configurations that repeat a literal exponent.
    pub fn min_alpha_set(&self) -> (f64, Vec<usize>) {
        let alpha = self
            .singularities
            .iter()
            .map(|s| s.alpha)
            .fold(f64::INFINITY, f64::min);
        let set = self
            .singularities
            .iter()
            .enumerate()
            .filter(|(_, s)| s.alpha == alpha)
            .map(|(z, _)| z)
            .collect();
        (alpha, set)
    }

    /// Short identifier for provenance records: envelope name plus a content hash.
    pub fn id(&self) -> String {
        let json = serde_json::to_string(self).expect("kernel spec serializes");
        let digest = Sha256::digest(json.as_bytes());
        format!("{}-{:02x}{:02x}{:02x}{:02x}", self.envelope.name(), digest[0], digest[1], digest[2], digest[3])
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: KernelSpec =
            serde_json::from_str(text).map_err(|e| Error::config(format!("kernel json: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }
}

fn validate_shape(sings: &[SingularPoint], envelope: Envelope) -> Result<()> {
    if sings.is_empty() {
        return Err(Error::invalid("singularities", "at least one singular point required"));
    }
    if sings[0].theta != 0.0 {
        return Err(Error::invalid(
            "singularities",
            format!("first singularity must sit at 0, got {}", sings[0].theta),
        ));
    }
    for pair in sings.windows(2) {
        if !(pair[1].theta > pair[0].theta) {
            return Err(Error::invalid(
                "singularities",
                "singular points must be strictly increasing",
            ));
        }
    }
    for s in sings {
        if !(s.alpha > 0.0) || !s.alpha.is_finite() {
            return Err(Error::invalid("alpha", format!("must be positive, got {}", s.alpha)));
        }
        if s.c == 0.0 || !s.c.is_finite() {
            return Err(Error::invalid("c", "local constants must be nonzero and finite"));
        }
        if !s.theta.is_finite() || s.theta < 0.0 {
            return Err(Error::invalid("theta", "singular points must be finite and nonnegative"));
        }
    }
    if envelope == Envelope::PlusPower && sings.len() != 1 {
        return Err(Error::invalid(
            "singularities",
            "plus-power kernels carry exactly one singularity at 0",
        ));
    }
    Ok(())
}

pub(crate) fn eval_shape(sings: &[SingularPoint], envelope: Envelope, t: f64) -> f64 {
    if t < 0.0 {
        return 0.0;
    }
    match envelope {
        Envelope::Indicator => {
            if t <= 1.0 {
                1.0
            } else {
                0.0
            }
        }
        Envelope::PlusPower => {
            let s = &sings[0];
            if t > 0.0 {
                s.c * t.powf(s.alpha)
            } else {
                0.0
            }
        }
        Envelope::BumpExp => eval_bump_exp(sings, t),
    }
}

fn eval_bump_exp(sings: &[SingularPoint], t: f64) -> f64 {
    let delta = if sings.len() >= 2 {
        sings
            .windows(2)
            .map(|w| w[1].theta - w[0].theta)
            .fold(f64::INFINITY, f64::min)
            / 4.0
    } else {
        SINGLETON_DELTA
    };
    let mut acc = 0.0;
    for (z, s) in sings.iter().enumerate() {
        let d = t - s.theta;
        let rho = bump_profile(d.abs(), delta);
        if rho > 0.0 {
            acc += s.c * local_power(z, s, t) * rho;
        }
    }
    // Exponential continuation of the last singular piece; inactive inside the
    // exact-model radius, so local behaviour at theta_l stays untouched.
    let last = sings.len() - 1;
    let s = &sings[last];
    let d = t - s.theta;
    if d > 0.0 {
        let rho = bump_profile(d, delta);
        if rho < 1.0 {
            acc += s.c * local_power(last, s, t) * (-t).exp() * (1.0 - rho);
        }
    }
    acc
}

/// `|t - theta_z|^{alpha_z}`, one-sided at the origin. Callers guarantee `t >= 0`.
fn local_power(z: usize, s: &SingularPoint, t: f64) -> f64 {
    if z == 0 {
        t.powf(s.alpha)
    } else {
        (t - s.theta).abs().powf(s.alpha)
    }
}

/// Smooth profile equal to 1 for `dist <= delta`, 0 for `dist >= 2 delta`.
fn bump_profile(dist: f64, delta: f64) -> f64 {
    smoothstep((2.0 * delta - dist) / delta)
}

/// `C^infinity` step: 0 on `(-inf, 0]`, 1 on `[1, inf)`, strictly monotone between.
fn smoothstep(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / x).exp();
        let b = (-1.0 / (1.0 - x)).exp();
        a / (a + b)
    }
}

/// Signed binomial weights `(-1)^j C(k, j)` of the order-`k` difference filter.
pub fn filter_weights(k: u32) -> Result<Vec<i64>> {
    if k == 0 {
        return Err(Error::invalid("k", "filter order must be at least 1"));
    }
    if k > 60 {
        return Err(Error::invalid("k", "filter order above 60 overflows the weight type"));
    }
    let mut weights = Vec::with_capacity(k as usize + 1);
    let mut binom: i64 = 1;
    for j in 0..=k as i64 {
        let sign = if j % 2 == 0 { 1 } else { -1 };
        weights.push(sign * binom);
        // C(k, j+1) = C(k, j) (k - j) / (j + 1); exact in integers.
        if j < k as i64 {
            binom = binom * (k as i64 - j) / (j + 1);
        }
    }
    Ok(weights)
}

pub(crate) fn weights_f64(k: u32) -> Result<Vec<f64>> {
    Ok(filter_weights(k)?.into_iter().map(|w| w as f64).collect())
}

/// One-sided limit function `h_k(x) = sum_j (-1)^j C(k,j) (x - j)_+^alpha`.
/// Vanishes on `x <= 0`; decays like `q_{k,alpha} x^{alpha - k}`.
pub fn eval_h0(k: u32, alpha: f64, x: f64) -> f64 {
    let weights = weights_f64(k).expect("k >= 1");
    eval_h0_with(&weights, alpha, x)
}

/// Two-sided limit function `h_{k,z}(x) = sum_j (-1)^j C(k,j) |x - j|^alpha`.
pub fn eval_hz(k: u32, alpha: f64, x: f64) -> f64 {
    let weights = weights_f64(k).expect("k >= 1");
    eval_hz_with(&weights, alpha, x)
}

/// Hot-path variant of `eval_h0` reusing precomputed filter weights.
pub(crate) fn eval_h0_with(weights: &[f64], alpha: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let mut acc = 0.0;
    for (j, &w) in weights.iter().enumerate() {
        let d = x - j as f64;
        if d > 0.0 {
            acc += w * d.powf(alpha);
        }
    }
    acc
}

/// Hot-path variant of `eval_hz` reusing precomputed filter weights.
pub(crate) fn eval_hz_with(weights: &[f64], alpha: f64, x: f64) -> f64 {
    let mut acc = 0.0;
    for (j, &w) in weights.iter().enumerate() {
        let d = x - j as f64;
        if d != 0.0 {
            acc += w * d.abs().powf(alpha);
        }
    }
    acc
}

/// `q_{k,alpha} = alpha (alpha - 1) ... (alpha - k + 1)`, the coefficient in
/// the tail asymptotics `h_k(x) ~ q_{k,alpha} x^{alpha - k}`.
pub fn q_const(k: u32, alpha: f64) -> f64 {
    let mut q = 1.0;
    for j in 0..k {
        q *= alpha - j as f64;
    }
    q
}

//! Experiment configuration: schema, validation, and resolution into a fully
//! prepared run plan.
//!
//! Validation is two-phase to keep exit codes meaningful: structural problems
//! (missing sections, inconsistent lists, unknown fields) are config errors,
//! while violated theorem preconditions (summability, boundary exponents,
//! driver activity vs `p`, subsequence availability) are precondition errors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{Envelope, KernelSpec};
use crate::levy::{LevyKind, LevySpec};
use crate::limits::SeriesPolicy;
use crate::simulate::default_t_past;
use crate::subseq::{find_near_targets, find_subsequence, TimeSampler};

use super::output::OutputFormat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Draw the subsequence limit law itself (no paths).
    R1,
    /// Pathwise coupled convergence to the regime-1 law.
    R1Coupled,
    /// Log-normalised boundary regime.
    R2,
    /// Unit-lag toy identity.
    Toy,
    /// Two-sample comparison: scaled statistic vs limit draws.
    Distribution,
    /// Stable-driver small-jump cutoff ladder.
    CutoffStability,
    /// Equidistribution diagnostics for `{n T + n theta}`.
    ShiftLaw,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::R1 => "r1",
            Regime::R1Coupled => "r1_coupled",
            Regime::R2 => "r2",
            Regime::Toy => "toy",
            Regime::Distribution => "distribution",
            Regime::CutoffStability => "cutoff_stability",
            Regime::ShiftLaw => "shift_law",
        }
    }
}

/// Subsequence selection in lieu of an explicit `grid_sizes` list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubseqConfig {
    pub tolerance: f64,
    /// Preferred resolutions; the nearest qualifying `n` is chosen for each.
    #[serde(default)]
    pub targets: Option<Vec<u64>>,
    #[serde(default = "default_n_min")]
    pub n_min: u64,
    pub n_max: u64,
    /// Without targets: take the first `max_terms` qualifying resolutions.
    #[serde(default)]
    pub max_terms: Option<usize>,
}

fn default_n_min() -> u64 {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftLawConfig {
    pub theta: f64,
    pub sampler: TimeSampler,
    pub draws: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub regime: Regime,
    #[serde(default)]
    pub kernel: Option<KernelSpec>,
    #[serde(default)]
    pub levy: Option<LevySpec>,
    #[serde(default)]
    pub k: Option<u32>,
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub grid_sizes: Vec<u64>,
    #[serde(default)]
    pub subsequence: Option<SubseqConfig>,
    pub replications: u64,
    pub base_seed: u64,
    pub output: String,
    #[serde(default)]
    pub format: Option<OutputFormat>,
    /// Past-truncation horizon; defaults per kernel envelope.
    #[serde(default)]
    pub t_past: Option<f64>,
    /// Well-separation radius for diagnostics; defaults to half the realized
    /// margin, capped at 0.05.
    #[serde(default)]
    pub eps: Option<f64>,
    /// Fractional-part targets, one per minimal singularity (origin first, 0).
    #[serde(default)]
    pub etas: Option<Vec<f64>>,
    /// Cutoff ladder for `cutoff_stability`, strictly decreasing.
    #[serde(default)]
    pub cutoffs: Option<Vec<f64>>,
    #[serde(default)]
    pub series: Option<SeriesPolicy>,
    /// Scaling-exponent override (negative controls); the limit still uses
    /// the kernel's own exponent.
    #[serde(default)]
    pub alpha_override: Option<f64>,
    #[serde(default)]
    pub shift_law: Option<ShiftLawConfig>,
}

impl ExperimentConfig {
    /// Parse TOML or JSON; `hint_json` forces JSON first (e.g. a `.json`
    /// extension). Both syntaxes are accepted either way.
    pub fn from_text(text: &str, hint_json: bool) -> Result<Self> {
        let as_json =
            |t: &str| serde_json::from_str::<Self>(t).map_err(|e| Error::config(format!("json: {e}")));
        let as_toml =
            |t: &str| toml::from_str::<Self>(t).map_err(|e| Error::config(format!("toml: {e}")));
        if hint_json || text.trim_start().starts_with('{') {
            as_json(text).or_else(|e| as_toml(text).map_err(|_| e))
        } else {
            as_toml(text).or_else(|e| as_json(text).map_err(|_| e))
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    fn need_kernel(&self) -> Result<&KernelSpec> {
        self.kernel
            .as_ref()
            .ok_or_else(|| Error::config(format!("regime {} needs a [kernel]", self.regime.name())))
    }

    fn need_levy(&self) -> Result<&LevySpec> {
        self.levy
            .as_ref()
            .ok_or_else(|| Error::config(format!("regime {} needs a [levy]", self.regime.name())))
    }

    fn need_k_p(&self) -> Result<(u32, f64)> {
        let k = self.k.ok_or_else(|| Error::config("k (filter order) is required"))?;
        let p = self.p.ok_or_else(|| Error::config("p (power) is required"))?;
        if k == 0 {
            return Err(Error::config("k must be at least 1"));
        }
        if !(p > 0.0 && p.is_finite()) {
            return Err(Error::config("p must be positive and finite"));
        }
        Ok((k, p))
    }

    /// Full validation and resolution. Cheap except for subsequence scans.
    pub fn prepare(&self) -> Result<Prepared> {
        if self.replications == 0 {
            return Err(Error::config("replications must be at least 1"));
        }
        if self.output.is_empty() {
            return Err(Error::config("output prefix must not be empty"));
        }
        if self.regime == Regime::ShiftLaw {
            return self.prepare_shift_law();
        }
        if self.shift_law.is_some() {
            return Err(Error::config("[shift_law] only applies to the shift_law regime"));
        }

        let kernel = self.need_kernel()?.clone();
        kernel.validate().map_err(|e| Error::config(format!("kernel: {e}")))?;
        let levy_in = self.need_levy()?;
        levy_in.validate().map_err(|e| Error::config(format!("levy: {e}")))?;
        let levy = LevySpec { kind: levy_in.kind, seed: self.base_seed };
        let (k, p) = self.need_k_p()?;
        if k > kernel.k_max {
            return Err(Error::config(format!("k = {k} exceeds the kernel's k_max = {}", kernel.k_max)));
        }

        // theorem preconditions from here on
        if !(p > levy.bg_index()) {
            return Err(Error::precondition(format!(
                "need p > activity index of the driver: p = {p}, index = {}",
                levy.bg_index()
            )));
        }
        let (alpha_min, min_set) = kernel.min_alpha_set();
        let nominal_alpha = match self.regime {
            Regime::Toy => 0.0,
            _ => alpha_min,
        };
        match self.regime {
            Regime::R1 | Regime::R1Coupled | Regime::Distribution => {
                let alpha_max =
                    kernel.singularities.iter().map(|s| s.alpha).fold(0.0, f64::max);
                if !(alpha_max < k as f64 - 1.0 / p) {
                    return Err(Error::precondition(format!(
                        "regime needs every alpha < k - 1/p = {}, largest is {alpha_max}",
                        k as f64 - 1.0 / p
                    )));
                }
            }
            Regime::R2 => {
                let boundary = k as f64 - 1.0 / p;
                for s in &kernel.singularities {
                    if (s.alpha - boundary).abs() > 1e-12 {
                        return Err(Error::precondition(format!(
                            "log regime needs every alpha = k - 1/p = {boundary}, got {}",
                            s.alpha
                        )));
                    }
                }
            }
            Regime::Toy => {
                if kernel.envelope != Envelope::Indicator {
                    return Err(Error::precondition(
                        "the toy identity is exact for the indicator kernel only",
                    ));
                }
            }
            Regime::CutoffStability | Regime::ShiftLaw => {}
        }

        let etas = self.resolve_etas(&kernel, &min_set)?;
        let ns = self.resolve_grid(&kernel, &min_set, &etas)?;
        let cutoffs = self.resolve_cutoffs(&levy)?;

        let t_past = self.t_past.unwrap_or_else(|| default_t_past(&kernel));
        if !(t_past > 0.0 && t_past.is_finite()) {
            return Err(Error::config("t_past must be positive and finite"));
        }
        if let Some(eps) = self.eps {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(Error::config("eps must be positive and finite"));
            }
        }
        if let Some(a) = self.alpha_override {
            if !a.is_finite() {
                return Err(Error::config("alpha_override must be finite"));
            }
            if self.regime != Regime::Distribution {
                return Err(Error::config("alpha_override only applies to the distribution regime"));
            }
        }
        if self.regime == Regime::Distribution && self.replications < 2 {
            return Err(Error::config("distribution comparisons need at least 2 replications"));
        }

        // advisory only: the integrability exponent is conventionally taken
        // equal to the stable index
        let mut warnings = Vec::new();
        if let LevyKind::SymStable { beta, .. } = levy.kind {
            if (kernel.w - beta).abs() > 1e-12 {
                warnings.push(format!(
                    "kernel declares w = {} but the stable driver has index beta = {beta}; \
                     the usual choice is w = beta",
                    kernel.w
                ));
            }
        }

        Ok(Prepared {
            regime: self.regime,
            kernel: Some(kernel),
            levy: Some(levy),
            k,
            p,
            ns,
            alpha_scale: nominal_alpha,
            alpha_min,
            min_set,
            etas,
            t_past,
            eps: self.eps,
            series: self.series.unwrap_or_default(),
            cutoffs,
            replications: self.replications,
            base_seed: self.base_seed,
            format: self.format.unwrap_or_default(),
            output: self.output.clone(),
            alpha_override: self.alpha_override,
            shift_law: None,
            warnings,
        })
    }

    fn prepare_shift_law(&self) -> Result<Prepared> {
        let sl = self
            .shift_law
            .as_ref()
            .ok_or_else(|| Error::config("shift_law regime needs a [shift_law] section"))?
            .clone();
        if self.subsequence.is_some() || self.kernel.is_some() || self.levy.is_some() {
            return Err(Error::config(
                "shift_law uses only [shift_law], grid_sizes, replications and base_seed",
            ));
        }
        if self.grid_sizes.is_empty() {
            return Err(Error::config("grid_sizes must be nonempty"));
        }
        check_increasing(&self.grid_sizes, 1)?;
        if self.grid_sizes.len() > 1024 {
            return Err(Error::config("at most 1024 grid sizes per shift_law run"));
        }
        if !(sl.theta > 0.0 && sl.theta.is_finite()) {
            return Err(Error::config("shift_law.theta must be positive and finite"));
        }
        if sl.draws < 2 {
            return Err(Error::config("shift_law.draws must be at least 2"));
        }
        Ok(Prepared {
            regime: self.regime,
            kernel: None,
            levy: None,
            k: 1,
            p: 1.0,
            ns: self.grid_sizes.clone(),
            alpha_scale: 0.0,
            alpha_min: 0.0,
            min_set: Vec::new(),
            etas: Vec::new(),
            t_past: 0.0,
            eps: None,
            series: SeriesPolicy::default(),
            cutoffs: Vec::new(),
            replications: self.replications,
            base_seed: self.base_seed,
            format: self.format.unwrap_or_default(),
            output: self.output.clone(),
            alpha_override: None,
            shift_law: Some(sl),
            warnings: Vec::new(),
        })
    }

    fn resolve_etas(&self, kernel: &KernelSpec, min_set: &[usize]) -> Result<Vec<f64>> {
        match &self.etas {
            None => Ok(vec![0.0; min_set.len()]),
            Some(e) => {
                if e.len() != min_set.len() {
                    return Err(Error::config(format!(
                        "etas needs one entry per minimal singularity ({}), got {}",
                        min_set.len(),
                        e.len()
                    )));
                }
                for (&z, &eta) in min_set.iter().zip(e) {
                    if !(0.0..=1.0).contains(&eta) {
                        return Err(Error::config(format!("etas entries must lie in [0, 1], got {eta}")));
                    }
                    if z == 0 && eta != 0.0 {
                        return Err(Error::config(
                            "the origin singularity's eta is 0 along every subsequence",
                        ));
                    }
                }
                let _ = kernel;
                Ok(e.clone())
            }
        }
    }

    fn resolve_grid(
        &self,
        kernel: &KernelSpec,
        min_set: &[usize],
        etas: &[f64],
    ) -> Result<Vec<u64>> {
        match (&self.subsequence, self.grid_sizes.is_empty()) {
            (None, true) => Err(Error::config("provide grid_sizes or a [subsequence] section")),
            (Some(_), false) => {
                Err(Error::config("grid_sizes and [subsequence] are mutually exclusive"))
            }
            (None, false) => {
                check_increasing(&self.grid_sizes, 2)?;
                Ok(self.grid_sizes.clone())
            }
            (Some(sub), true) => {
                // phases matter only for interior minimal singularities
                let mut thetas = Vec::new();
                let mut targets_eta = Vec::new();
                for (&z, &eta) in min_set.iter().zip(etas) {
                    if z > 0 {
                        thetas.push(kernel.singularities[z].theta);
                        targets_eta.push(eta);
                    }
                }
                if thetas.is_empty() {
                    return Err(Error::config(
                        "subsequence selection needs an interior minimal singularity; use grid_sizes",
                    ));
                }
                let ns = match (&sub.targets, sub.max_terms) {
                    (Some(targets), None) => find_near_targets(
                        &thetas,
                        &targets_eta,
                        sub.tolerance,
                        targets,
                        sub.n_min,
                        sub.n_max,
                    )?,
                    (None, Some(max_terms)) => {
                        let plan = find_subsequence(
                            &thetas,
                            &targets_eta,
                            sub.tolerance,
                            sub.n_min,
                            sub.n_max,
                            max_terms,
                        )?;
                        if plan.terms.is_empty() {
                            return Err(Error::precondition(format!(
                                "no resolution in [{}, {}] meets tolerance {} (best residual {})",
                                sub.n_min, sub.n_max, sub.tolerance, plan.best_residual
                            )));
                        }
                        plan.terms
                    }
                    _ => {
                        return Err(Error::config(
                            "subsequence needs exactly one of `targets` or `max_terms`",
                        ))
                    }
                };
                let mut sorted = ns.clone();
                sorted.sort_unstable();
                sorted.dedup();
                if sorted.len() != ns.len() {
                    return Err(Error::precondition(
                        "subsequence targets resolved to duplicate resolutions; widen the targets",
                    ));
                }
                Ok(sorted)
            }
        }
    }

    fn resolve_cutoffs(&self, levy: &LevySpec) -> Result<Vec<f64>> {
        if self.regime != Regime::CutoffStability {
            if self.cutoffs.is_some() {
                return Err(Error::config("cutoffs only apply to the cutoff_stability regime"));
            }
            return Ok(Vec::new());
        }
        let cutoffs = self
            .cutoffs
            .clone()
            .ok_or_else(|| Error::config("cutoff_stability needs a cutoffs list"))?;
        if cutoffs.len() < 2 {
            return Err(Error::config("need at least two cutoffs to difference"));
        }
        if !cutoffs.windows(2).all(|w| w[0] > w[1]) || !cutoffs.iter().all(|&c| c > 0.0) {
            return Err(Error::config("cutoffs must be strictly decreasing and positive"));
        }
        if levy.bg_index() == 0.0 {
            return Err(Error::precondition(
                "cutoff refinement is meaningful for the stable driver only",
            ));
        }
        Ok(cutoffs)
    }
}

/// A validated, fully resolved run plan.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub regime: Regime,
    pub kernel: Option<KernelSpec>,
    pub levy: Option<LevySpec>,
    pub k: u32,
    pub p: f64,
    pub ns: Vec<u64>,
    /// Exponent used for `n^{alpha p}` scaling of the statistic.
    pub alpha_scale: f64,
    pub alpha_min: f64,
    pub min_set: Vec<usize>,
    pub etas: Vec<f64>,
    pub t_past: f64,
    pub eps: Option<f64>,
    pub series: SeriesPolicy,
    pub cutoffs: Vec<f64>,
    pub replications: u64,
    pub base_seed: u64,
    pub format: OutputFormat,
    pub output: String,
    pub alpha_override: Option<f64>,
    pub shift_law: Option<ShiftLawConfig>,
    /// Advisory notes (not errors): surfaced on stderr by the CLI.
    pub warnings: Vec<String>,
}

impl Prepared {
    /// Simulation window covering the past horizon and the unit interval.
    pub fn window(&self) -> (f64, f64) {
        (-self.t_past, 1.0)
    }
}

fn check_increasing(ns: &[u64], min: u64) -> Result<()> {
    if ns.iter().any(|&n| n < min) {
        return Err(Error::config(format!("grid sizes must be at least {min}")));
    }
    if !ns.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::config("grid sizes must be strictly increasing"));
    }
    Ok(())
}

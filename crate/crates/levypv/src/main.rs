//! Command-line front end: simulate paths, compute power variations,
//! evaluate limit laws, plan subsequences, and run full experiments from a
//! TOML or JSON config. Every subcommand writes the same artifact triple
//! `<prefix>_rows.<ext>`, `<prefix>_summary.<ext>`, `<prefix>_meta.json`.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use levypv::error::{Error, Result};
use levypv::harness::config::{Prepared, Regime};
use levypv::harness::output::{write_artifacts, Cell, OutputFormat, Table};
use levypv::harness::{run_experiment, ExperimentConfig, RegimeResult};
use levypv::levy::{check_omega_eps, separation_margin};
use levypv::limits::{limit_regime1, limit_regime1_coupled, limit_regime2, limit_toy, LimitSample};
use levypv::simulate::simulate_path_with;
use levypv::stats::power_variation;
use levypv::subseq::{find_near_targets, find_subsequence};

#[derive(Parser)]
#[command(name = "levypv", version, about = "Power variation laboratory for singular moving averages")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Experiment config, TOML or JSON.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the config's base_seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the config's output prefix.
    #[arg(long, global = true)]
    out: Option<String>,
    /// Worker threads for replication loops (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Override the config's output format.
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Jsonl,
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Jsonl => OutputFormat::Jsonl,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Draw the jump record and emit the sample path on the finest grid.
    Simulate,
    /// Emit power-variation reports across the configured grid sizes.
    Powervar,
    /// Evaluate the configured limit law on a drawn jump record.
    Limit,
    /// Plan a subsequence of grid resolutions from the kernel's phases.
    Subseq,
    /// Run the configured experiment end to end.
    Experiment,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::config("--config <file> is required"))?;
    let text = std::fs::read_to_string(path)?;
    let hint_json = path.extension().map(|e| e == "json").unwrap_or(false);
    let mut config = ExperimentConfig::from_text(&text, hint_json)?;
    if let Some(seed) = cli.seed {
        config.base_seed = seed;
    }
    if let Some(out) = &cli.out {
        config.output = out.clone();
    }
    if let Some(format) = cli.format {
        config.format = Some(format.into());
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(Error::config("--threads must be at least 1"));
        }
        // a pool may already exist when invoked as a library; that's fine
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    let config = load_config(&cli)?;
    match cli.cmd {
        Cmd::Simulate => simulate_cmd(&config),
        Cmd::Powervar => powervar_cmd(&config),
        Cmd::Limit => limit_cmd(&config),
        Cmd::Subseq => subseq_cmd(&config),
        Cmd::Experiment => experiment_cmd(&config),
    }
}

fn announce(rows: &Path, summary: &Path, meta: &Path) {
    println!("rows: {}", rows.display());
    println!("summary: {}", summary.display());
    println!("meta: {}", meta.display());
}

fn print_warnings(plan: &Prepared) {
    for w in &plan.warnings {
        eprintln!("warning: {w}");
    }
}

fn drawn_record(plan: &Prepared) -> Result<levypv::levy::JumpRecord> {
    let levy = plan
        .levy
        .as_ref()
        .ok_or_else(|| Error::config("this subcommand needs a [levy] section"))?;
    levy.simulate_jumps(plan.window(), 0)
}

fn simulate_cmd(config: &ExperimentConfig) -> Result<()> {
    let plan = config.prepare()?;
    print_warnings(&plan);
    let kernel = plan.kernel.as_ref().ok_or_else(|| Error::config("needs a [kernel]"))?;
    let jumps = drawn_record(&plan)?;
    let n = *plan.ns.last().expect("validated nonempty") as usize;
    let path = simulate_path_with(kernel, &jumps, n, plan.t_past)?;

    let mut rows = Table::new(&["i", "t", "x"]);
    let nf = n as f64;
    for (i, &x) in path.values.iter().enumerate() {
        rows.push(vec![Cell::U64(i as u64), Cell::F64(i as f64 / nf), Cell::F64(x)]);
    }
    let mut summary = Table::new(&["n", "jump_count", "t_past", "min_x", "max_x"]);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &x in &path.values {
        lo = lo.min(x);
        hi = hi.max(x);
    }
    summary.push(vec![
        Cell::U64(n as u64),
        Cell::U64(jumps.len() as u64),
        Cell::F64(plan.t_past),
        Cell::F64(lo),
        Cell::F64(hi),
    ]);
    let resolved = serde_json::to_value(&path.provenance)
        .map_err(|e| Error::Serialization(e.to_string()))?;
    let (r, s, m) = write_artifacts(&plan.output, plan.format, &rows, &summary, config, resolved)?;
    announce(&r, &s, &m);
    Ok(())
}

fn powervar_cmd(config: &ExperimentConfig) -> Result<()> {
    let plan = config.prepare()?;
    print_warnings(&plan);
    let kernel = plan.kernel.as_ref().ok_or_else(|| Error::config("needs a [kernel]"))?;
    let jumps = drawn_record(&plan)?;

    let mut rows = Table::new(&["n", "k", "p", "v", "scaled_r1", "scaled_r2", "alpha_used"]);
    for &n in &plan.ns {
        let path = simulate_path_with(kernel, &jumps, n as usize, plan.t_past)?;
        let report = power_variation(&path, plan.p, plan.k, plan.alpha_scale)?;
        rows.push(vec![
            Cell::U64(n),
            Cell::U64(plan.k as u64),
            Cell::F64(plan.p),
            Cell::F64(report.v),
            Cell::F64(report.scaled_r1),
            Cell::F64(report.scaled_r2),
            Cell::F64(report.alpha_used),
        ]);
    }
    let thetas = kernel.thetas();
    let margin = separation_margin(&jumps, &thetas);
    let eps = plan.eps.unwrap_or_else(|| levypv::levy::default_eps(&jumps, &thetas));
    let mut summary = Table::new(&["jump_count", "eps", "feasible_eps", "omega_eps"]);
    summary.push(vec![
        Cell::U64(jumps.len() as u64),
        Cell::F64(eps),
        Cell::F64(margin),
        Cell::Bool(check_omega_eps(&jumps, &thetas, eps)),
    ]);
    let resolved = json!({
        "grid_sizes": plan.ns,
        "alpha_scale": plan.alpha_scale,
        "t_past": plan.t_past,
        "kernel_id": kernel.id(),
    });
    let (r, s, m) = write_artifacts(&plan.output, plan.format, &rows, &summary, config, resolved)?;
    announce(&r, &s, &m);
    Ok(())
}

fn limit_cmd(config: &ExperimentConfig) -> Result<()> {
    let plan = config.prepare()?;
    print_warnings(&plan);
    let kernel = plan.kernel.as_ref().ok_or_else(|| Error::config("needs a [kernel]"))?;
    let jumps = drawn_record(&plan)?;
    let n = *plan.ns.last().expect("validated nonempty");
    let sample: LimitSample = match plan.regime {
        Regime::R1 => {
            let mut rng = ChaCha8Rng::seed_from_u64(plan.base_seed);
            rng.set_stream(1);
            limit_regime1(kernel, &jumps, &plan.etas, plan.p, plan.k, &mut rng, plan.series)?
        }
        Regime::R1Coupled => {
            limit_regime1_coupled(kernel, &jumps, n as usize, plan.p, plan.k, plan.series)?
        }
        Regime::R2 => limit_regime2(kernel, &jumps, plan.p, plan.k)?,
        Regime::Toy => {
            let value = limit_toy(&jumps, plan.p);
            LimitSample {
                regime: levypv::limits::LimitRegime::Toy,
                value,
                series_r: 0,
                tail_bound: 0.0,
                u_draws: None,
                etas: Vec::new(),
                contributions: Vec::new(),
            }
        }
        other => {
            return Err(Error::precondition(format!(
                "limit evaluation covers r1, r1_coupled, r2 and toy, not {}",
                other.name()
            )))
        }
    };

    let mut rows = Table::new(&["z", "time", "size", "shift", "series", "term"]);
    for c in &sample.contributions {
        rows.push(vec![
            Cell::U64(c.z as u64),
            Cell::F64(c.time),
            Cell::F64(c.size),
            Cell::F64(c.shift),
            Cell::F64(c.series),
            Cell::F64(c.term),
        ]);
    }
    let mut summary = Table::new(&["regime", "value", "series_r", "tail_bound", "jump_count"]);
    summary.push(vec![
        Cell::Str(plan.regime.name().to_string()),
        Cell::F64(sample.value),
        Cell::U64(sample.series_r as u64),
        Cell::F64(sample.tail_bound),
        Cell::U64(jumps.len() as u64),
    ]);
    let resolved = serde_json::from_str(&sample.to_json(false)?)
        .map_err(|e| Error::Serialization(e.to_string()))?;
    let (r, s, m) = write_artifacts(&plan.output, plan.format, &rows, &summary, config, resolved)?;
    println!("value: {:.16e}", sample.value);
    announce(&r, &s, &m);
    Ok(())
}

fn subseq_cmd(config: &ExperimentConfig) -> Result<()> {
    let kernel = config
        .kernel
        .as_ref()
        .ok_or_else(|| Error::config("subseq planning needs a [kernel]"))?;
    kernel.validate().map_err(|e| Error::config(format!("kernel: {e}")))?;
    let sub = config
        .subsequence
        .as_ref()
        .ok_or_else(|| Error::config("subseq planning needs a [subsequence] section"))?;
    let (_, min_set) = kernel.min_alpha_set();
    let etas = match &config.etas {
        Some(e) if e.len() == min_set.len() => e.clone(),
        Some(_) => return Err(Error::config("etas must match the minimal singularity count")),
        None => vec![0.0; min_set.len()],
    };
    let mut thetas = Vec::new();
    let mut targets_eta = Vec::new();
    for (&z, &eta) in min_set.iter().zip(&etas) {
        if z > 0 {
            thetas.push(kernel.singularities[z].theta);
            targets_eta.push(eta);
        }
    }
    if thetas.is_empty() {
        return Err(Error::config(
            "subsequence planning needs an interior minimal singularity",
        ));
    }

    let (terms, best_residual, scanned) = match (&sub.targets, sub.max_terms) {
        (Some(targets), None) => {
            let ns = find_near_targets(&thetas, &targets_eta, sub.tolerance, targets, sub.n_min, sub.n_max)?;
            (ns, f64::NAN, (sub.n_min, sub.n_max))
        }
        (None, Some(max_terms)) => {
            let plan =
                find_subsequence(&thetas, &targets_eta, sub.tolerance, sub.n_min, sub.n_max, max_terms)?;
            (plan.terms, plan.best_residual, plan.scanned)
        }
        _ => {
            return Err(Error::config(
                "subsequence needs exactly one of `targets` or `max_terms`",
            ))
        }
    };

    let mut rows = Table::new(&["n", "residual"]);
    for &n in &terms {
        let residual = thetas
            .iter()
            .zip(&targets_eta)
            .map(|(&t, &e)| levypv::subseq::dist_circle(n as f64 * t, e))
            .fold(0.0, f64::max);
        rows.push(vec![Cell::U64(n), Cell::F64(residual)]);
    }
    let mut summary = Table::new(&["terms", "tolerance", "best_residual", "n_min", "n_max"]);
    summary.push(vec![
        Cell::U64(terms.len() as u64),
        Cell::F64(sub.tolerance),
        Cell::OptF64(if best_residual.is_nan() { None } else { Some(best_residual) }),
        Cell::U64(scanned.0),
        Cell::U64(scanned.1),
    ]);
    let resolved = json!({"thetas": thetas, "etas": targets_eta, "terms": terms});
    let format = config.format.unwrap_or_default();
    let (r, s, m) = write_artifacts(&config.output, format, &rows, &summary, config, resolved)?;
    println!("terms: {terms:?}");
    announce(&r, &s, &m);
    Ok(())
}

fn experiment_cmd(config: &ExperimentConfig) -> Result<()> {
    print_warnings(&config.prepare()?);
    let outcome = run_experiment(config)?;
    match &outcome.result {
        RegimeResult::Convergence(summaries) => {
            for s in summaries {
                println!(
                    "n={} median_rel_error={:.3e} (separated {:.3e}, flagged {})",
                    s.n, s.median_rel_error, s.median_rel_error_separated, s.flagged
                );
            }
        }
        RegimeResult::Distribution(res) => {
            print!("n={} ks={:.4}", res.n, res.ks);
            if let Some(neg) = res.ks_negative {
                print!(" negative_control={neg:.4}");
            }
            println!();
        }
        RegimeResult::Cutoff(summaries) => {
            for s in summaries {
                match s.median_diff_prev {
                    Some(d) => println!(
                        "cutoff={} median_statistic={:.6e} median_diff_prev={:.3e}",
                        s.cutoff, s.median_statistic, d
                    ),
                    None => println!("cutoff={} median_statistic={:.6e}", s.cutoff, s.median_statistic),
                }
            }
        }
        RegimeResult::ShiftLaw(summaries) => {
            for s in summaries {
                println!("n={} median_ks={:.4}", s.n, s.median_ks);
            }
        }
        RegimeResult::LimitDraws(values) => {
            println!("draws={}", values.len());
        }
    }
    announce(&outcome.rows_path, &outcome.summary_path, &outcome.meta_path);
    Ok(())
}

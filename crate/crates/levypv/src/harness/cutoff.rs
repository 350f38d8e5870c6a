//! Small-jump cutoff ladder for the stable driver: simulate once at the
//! finest cutoff per seed, re-truncate upward (shared randomness), and track
//! how the scaled statistic moves as smaller jumps enter. Stabilisation of
//! the successive differences is the diagnostic.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::simulate::simulate_path_with;
use crate::stats::power_variation;

use super::config::{Prepared, Regime};
use super::output::{Cell, Table};
use super::{median, STREAM_STAT_JUMPS};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffRow {
    pub cutoff: f64,
    pub seed: u64,
    pub statistic: f64,
    /// |statistic at this cutoff - statistic at the previous (coarser) one|.
    pub diff_prev: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffSummary {
    pub cutoff: f64,
    pub median_statistic: f64,
    pub median_diff_prev: Option<f64>,
}

pub fn run_cutoff_stability(plan: &Prepared) -> Result<(Vec<CutoffRow>, Vec<CutoffSummary>)> {
    if plan.regime != Regime::CutoffStability {
        return Err(Error::precondition("run_cutoff_stability needs the cutoff_stability regime"));
    }
    let kernel = plan.kernel.as_ref().expect("prepared plan has a kernel");
    let levy = plan.levy.as_ref().expect("prepared plan has a driver");
    let n = *plan.ns.last().expect("grid validated nonempty") as usize;
    let finest = *plan.cutoffs.last().expect("cutoffs validated nonempty");
    let window = plan.window();

    let mut rows: Vec<CutoffRow> = (0..plan.replications)
        .into_par_iter()
        .map(|seed| -> Result<Vec<CutoffRow>> {
            // one stable record at the finest cutoff; coarser ladders are
            // pathwise sub-records of it
            let fine = levy.with_cutoff(finest).simulate_jumps(window, STREAM_STAT_JUMPS + seed)?;
            let mut out = Vec::with_capacity(plan.cutoffs.len());
            let mut prev: Option<f64> = None;
            for &cutoff in &plan.cutoffs {
                let jumps = fine.truncate_small(cutoff);
                let path = simulate_path_with(kernel, &jumps, n, plan.t_past)?;
                let statistic =
                    power_variation(&path, plan.p, plan.k, plan.alpha_scale)?.scaled_r1;
                out.push(CutoffRow {
                    cutoff,
                    seed,
                    statistic,
                    diff_prev: prev.map(|p| (statistic - p).abs()),
                });
                prev = Some(statistic);
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    // seed ascending, then ladder order (cutoff descending)
    rows.sort_by(|a, b| a.seed.cmp(&b.seed).then(b.cutoff.total_cmp(&a.cutoff)));

    let summaries = plan
        .cutoffs
        .iter()
        .map(|&cutoff| {
            let at: Vec<&CutoffRow> = rows.iter().filter(|r| r.cutoff == cutoff).collect();
            let diffs: Vec<f64> = at.iter().filter_map(|r| r.diff_prev).collect();
            CutoffSummary {
                cutoff,
                median_statistic: median(at.iter().map(|r| r.statistic).collect()),
                median_diff_prev: if diffs.is_empty() { None } else { Some(median(diffs)) },
            }
        })
        .collect();
    Ok((rows, summaries))
}

pub fn rows_table(rows: &[CutoffRow]) -> Table {
    let mut t = Table::new(&["cutoff", "seed", "statistic", "diff_prev"]);
    for r in rows {
        t.push(vec![
            Cell::F64(r.cutoff),
            Cell::U64(r.seed),
            Cell::F64(r.statistic),
            Cell::OptF64(r.diff_prev),
        ]);
    }
    t
}

pub fn summary_table(summaries: &[CutoffSummary]) -> Table {
    let mut t = Table::new(&["cutoff", "median_statistic", "median_diff_prev"]);
    for s in summaries {
        t.push(vec![
            Cell::F64(s.cutoff),
            Cell::F64(s.median_statistic),
            Cell::OptF64(s.median_diff_prev),
        ]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::tests::toy_config;
    use crate::kernels::KernelSpec;
    use crate::levy::{LevyKind, LevySpec};

    fn small_cutoff_config() -> crate::harness::ExperimentConfig {
        let mut c = toy_config();
        c.regime = Regime::CutoffStability;
        c.kernel = Some(KernelSpec::lfsm(0.2));
        c.levy = Some(LevySpec {
            kind: LevyKind::SymStable { beta: 1.2, scale: 0.1, jump_cutoff: 0.2 },
            seed: 0,
        });
        c.k = Some(1);
        c.p = Some(2.0);
        c.grid_sizes = vec![512];
        c.replications = 8;
        c.cutoffs = Some(vec![0.2, 0.1, 0.05]);
        c.t_past = Some(2.0);
        c
    }

    #[test]
    fn ladder_rows_couple_to_one_record_per_seed() {
        let plan = small_cutoff_config().prepare().unwrap();
        let (rows, summaries) = run_cutoff_stability(&plan).unwrap();
        assert_eq!(rows.len(), 8 * 3);
        // per seed: statistics are increasing in refinement? not necessarily,
        // but the first cutoff has no diff and later ones do
        for seed in 0..8u64 {
            let seed_rows: Vec<&CutoffRow> = rows.iter().filter(|r| r.seed == seed).collect();
            assert_eq!(seed_rows.len(), 3);
            assert!(seed_rows[0].diff_prev.is_none());
            assert!(seed_rows[1].diff_prev.is_some());
            // recompute the difference from neighbouring rows
            let d = (seed_rows[1].statistic - seed_rows[0].statistic).abs();
            assert!((seed_rows[1].diff_prev.unwrap() - d).abs() < 1e-15);
        }
        assert_eq!(summaries.len(), 3);
        assert!(summaries[0].median_diff_prev.is_none());
        assert!(summaries[1].median_diff_prev.is_some());
    }

    #[test]
    fn ladder_is_deterministic() {
        let plan = small_cutoff_config().prepare().unwrap();
        let (a, _) = run_cutoff_stability(&plan).unwrap();
        let (b, _) = run_cutoff_stability(&plan).unwrap();
        assert_eq!(a, b);
    }

    /// Qualitative trend, logged rather than asserted: with `p` far above the
    /// driver index the re-added small jumps are much less visible in the
    /// statistic, so the ladder differences shrink faster than with `p` near
    /// the index. Medians move with the draw, so no inequality is pinned.
    #[test]
    fn large_p_over_index_damps_the_ladder_faster() {
        let ladder = |beta: f64, p: f64| {
            let mut c = small_cutoff_config();
            c.levy = Some(LevySpec {
                kind: LevyKind::SymStable { beta, scale: 0.1, jump_cutoff: 0.2 },
                seed: 0,
            });
            c.p = Some(p);
            let plan = c.prepare().unwrap();
            let (_, summaries) = run_cutoff_stability(&plan).unwrap();
            summaries.iter().filter_map(|s| s.median_diff_prev).collect::<Vec<f64>>()
        };
        let far = ladder(0.8, 4.0);
        let near = ladder(1.2, 1.4);
        assert!(far.iter().chain(&near).all(|d| d.is_finite()));
        eprintln!("ladder diffs, p = 4.0 vs beta = 0.8 (far): {far:?}");
        eprintln!("ladder diffs, p = 1.4 vs beta = 1.2 (near): {near:?}");
        eprintln!(
            "last-step ratio far/near: {:.3e}",
            far.last().unwrap() / near.last().unwrap()
        );
    }
}

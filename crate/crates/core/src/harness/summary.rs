//! Summary tables over run records: mean contrastivity with bootstrap CIs
//! per condition, running-max contrastivity by iteration depth, and the
//! iterations-used distribution; rendered as aligned text and CSV.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::RunRecord;
use crate::stats::{bootstrap_ci, mean, quantile_sorted, DEFAULT_LEVEL, DEFAULT_N_BOOT};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct SummaryOptions {
    pub n_boot: usize,
    pub level: f64,
    pub seed: u64,
}

impl Default for SummaryOptions {
    fn default() -> Self {
        SummaryOptions {
            n_boot: DEFAULT_N_BOOT,
            level: DEFAULT_LEVEL,
            seed: 0,
        }
    }
}

/// One condition cell: mean ground-truth contrastivity with its CI.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContrastivityRow {
    pub model: String,
    pub n_distractors: usize,
    pub n_samples: usize,
    pub n_games: usize,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub mean_iterations: f64,
    pub target_true_fraction: f64,
    pub parse_failure_fraction: f64,
}

/// Running-max ground-truth contrastivity at one iteration depth.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DepthRow {
    pub n_distractors: usize,
    pub n_samples: usize,
    pub iteration: usize,
    pub n_games: usize,
    pub mean: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub min: f64,
}

/// Count of runs that used a given number of iterations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationsRow {
    pub model: String,
    pub n_distractors: usize,
    pub n_samples: usize,
    pub iterations_used: usize,
    pub count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub contrastivity: Vec<ContrastivityRow>,
    pub depth: Vec<DepthRow>,
    pub iterations: Vec<IterationsRow>,
    pub error_records: usize,
}

/// Aggregate records into the three summary tables. Error records are
/// excluded from statistics and reported as a count.
pub fn summarize(records: &[RunRecord], options: &SummaryOptions) -> Result<Summary> {
    if records.is_empty() {
        return Err(Error::EmptyInput("records"));
    }
    let error_records = records.iter().filter(|r| r.error.is_some()).count();
    let good: Vec<&RunRecord> = records.iter().filter(|r| r.error.is_none()).collect();
    if good.is_empty() {
        return Err(Error::EmptyInput("records without errors"));
    }

    // (a) Mean contrastivity per (model, n_distractors, n_samples).
    let mut by_cell: BTreeMap<(String, usize, usize), Vec<&RunRecord>> = BTreeMap::new();
    for record in &good {
        by_cell
            .entry((
                record.model.clone(),
                record.n_distractors,
                record.n_samples,
            ))
            .or_default()
            .push(record);
    }
    let mut contrastivity = Vec::new();
    for ((model, n_distractors, n_samples), cell) in &by_cell {
        let values: Vec<f64> = cell.iter().map(|r| r.gt_contrastivity).collect();
        let (ci_low, ci_high) =
            bootstrap_ci(&values, options.n_boot, options.level, options.seed)?;
        contrastivity.push(ContrastivityRow {
            model: model.clone(),
            n_distractors: *n_distractors,
            n_samples: *n_samples,
            n_games: cell.len(),
            mean: mean(&values),
            ci_low,
            ci_high,
            mean_iterations: mean(
                &cell
                    .iter()
                    .map(|r| r.iterations_used as f64)
                    .collect::<Vec<_>>(),
            ),
            target_true_fraction: cell.iter().filter(|r| r.gt_target_true).count() as f64
                / cell.len() as f64,
            parse_failure_fraction: cell.iter().filter(|r| r.parse_failed).count() as f64
                / cell.len() as f64,
        });
    }

    // (b) Running-max contrastivity by depth, for the iterative engine.
    // Finished runs carry their final value forward to later depths.
    let mut depth = Vec::new();
    let mut by_depth_cell: BTreeMap<(usize, usize), Vec<&RunRecord>> = BTreeMap::new();
    for record in good.iter().filter(|r| r.model == "iterative") {
        by_depth_cell
            .entry((record.n_distractors, record.n_samples))
            .or_default()
            .push(record);
    }
    for ((n_distractors, n_samples), cell) in &by_depth_cell {
        let max_depth = cell
            .iter()
            .map(|r| r.max_iterations.max(r.iterations_used))
            .max()
            .unwrap_or(1);
        for iteration in 1..=max_depth {
            let mut values: Vec<f64> = Vec::with_capacity(cell.len());
            for record in cell {
                let running: Vec<f64> = record
                    .per_iteration_max_gt
                    .iter()
                    .scan(0.0f64, |acc, &v| {
                        *acc = acc.max(v);
                        Some(*acc)
                    })
                    .collect();
                if running.is_empty() {
                    continue;
                }
                let idx = iteration.min(running.len()) - 1;
                values.push(running[idx]);
            }
            if values.is_empty() {
                continue;
            }
            values.sort_by(|a, b| a.partial_cmp(b).unwrap());
            depth.push(DepthRow {
                n_distractors: *n_distractors,
                n_samples: *n_samples,
                iteration,
                n_games: values.len(),
                mean: mean(&values),
                q1: quantile_sorted(&values, 0.25),
                median: quantile_sorted(&values, 0.5),
                q3: quantile_sorted(&values, 0.75),
                min: values[0],
            });
        }
    }

    // (c) Iterations-used distribution.
    let mut iter_counts: BTreeMap<(String, usize, usize, usize), usize> = BTreeMap::new();
    for record in &good {
        *iter_counts
            .entry((
                record.model.clone(),
                record.n_distractors,
                record.n_samples,
                record.iterations_used,
            ))
            .or_default() += 1;
    }
    let iterations = iter_counts
        .into_iter()
        .map(
            |((model, n_distractors, n_samples, iterations_used), count)| IterationsRow {
                model,
                n_distractors,
                n_samples,
                iterations_used,
                count,
            },
        )
        .collect();

    Ok(Summary {
        contrastivity,
        depth,
        iterations,
        error_records,
    })
}

/// Aligned-text rendering of all three tables.
pub fn render_summary_text(summary: &Summary) -> String {
    let mut out = String::new();
    out.push_str("== mean ground-truth contrastivity ==\n");
    out.push_str(&format!(
        "{:<12} {:>6} {:>5} {:>6} {:>7} {:>15} {:>7} {:>8} {:>7}\n",
        "model", "distr", "n", "games", "mean", "95% CI", "iters", "tgt-true", "parse-f"
    ));
    for row in &summary.contrastivity {
        out.push_str(&format!(
            "{:<12} {:>6} {:>5} {:>6} {:>7.3} [{:>6.3},{:>6.3}] {:>7.2} {:>8.2} {:>7.2}\n",
            row.model,
            row.n_distractors,
            row.n_samples,
            row.n_games,
            row.mean,
            row.ci_low,
            row.ci_high,
            row.mean_iterations,
            row.target_true_fraction,
            row.parse_failure_fraction,
        ));
    }

    if !summary.depth.is_empty() {
        out.push_str("\n== running-max contrastivity by iteration (iterative engine) ==\n");
        out.push_str(&format!(
            "{:>6} {:>5} {:>5} {:>6} {:>7} {:>7} {:>7} {:>7} {:>7}\n",
            "distr", "n", "iter", "games", "mean", "q1", "median", "q3", "min"
        ));
        for row in &summary.depth {
            out.push_str(&format!(
                "{:>6} {:>5} {:>5} {:>6} {:>7.3} {:>7.3} {:>7.3} {:>7.3} {:>7.3}\n",
                row.n_distractors,
                row.n_samples,
                row.iteration,
                row.n_games,
                row.mean,
                row.q1,
                row.median,
                row.q3,
                row.min,
            ));
        }
    }

    out.push_str("\n== iterations used ==\n");
    out.push_str(&format!(
        "{:<12} {:>6} {:>5} {:>6} {:>6}\n",
        "model", "distr", "n", "iters", "count"
    ));
    for row in &summary.iterations {
        out.push_str(&format!(
            "{:<12} {:>6} {:>5} {:>6} {:>6}\n",
            row.model, row.n_distractors, row.n_samples, row.iterations_used, row.count
        ));
    }
    if summary.error_records > 0 {
        out.push_str(&format!(
            "\n({} records with errors excluded)\n",
            summary.error_records
        ));
    }
    out
}

/// Write the three tables as CSV files into a directory.
pub fn write_summary_csvs(summary: &Summary, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;

    let mut contrastivity = String::from(
        "model,n_distractors,n_samples,n_games,mean,ci_low,ci_high,mean_iterations,target_true_fraction,parse_failure_fraction\n",
    );
    for r in &summary.contrastivity {
        contrastivity.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.model,
            r.n_distractors,
            r.n_samples,
            r.n_games,
            r.mean,
            r.ci_low,
            r.ci_high,
            r.mean_iterations,
            r.target_true_fraction,
            r.parse_failure_fraction
        ));
    }
    std::fs::write(dir.join("contrastivity.csv"), contrastivity)?;

    let mut depth =
        String::from("n_distractors,n_samples,iteration,n_games,mean,q1,median,q3,min\n");
    for r in &summary.depth {
        depth.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.n_distractors, r.n_samples, r.iteration, r.n_games, r.mean, r.q1, r.median, r.q3, r.min
        ));
    }
    std::fs::write(dir.join("depth.csv"), depth)?;

    let mut iterations = String::from("model,n_distractors,n_samples,iterations_used,count\n");
    for r in &summary.iterations {
        iterations.push_str(&format!(
            "{},{},{},{},{}\n",
            r.model, r.n_distractors, r.n_samples, r.iterations_used, r.count
        ));
    }
    std::fs::write(dir.join("iterations.csv"), iterations)?;
    Ok(())
}

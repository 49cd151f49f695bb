//! Criterion comparison sweep: builds one merge tree per criterion and
//! seed on synthetic data, cuts it to every requested size, scores each cut
//! on a matched held-out set, and aggregates the metrics across seeds.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::synth::{gen_synthetic, SynthConfig};
use super::{evaluate, EvalError, EvalMetrics};
use crate::config::CriteriaConfig;
use crate::criteria::CriterionKind;
use crate::engine::{
    build_merge_tree, build_random_tree, CachePolicy, EngineConfig, EngineError,
};
use crate::tree::MergeTree;

/// Offset applied to a training seed to derive the held-out seed, so the
/// two draws never reuse a generator stream.
const TEST_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

/// Row label used for the seeded random-merge baseline.
const BASELINE_NAME: &str = "random";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    /// Corpus template; its `seed` is replaced by each entry of `seeds`.
    pub synth: SynthConfig,
    pub criteria: Vec<CriterionKind>,
    /// Codebook sizes to cut each tree to.
    pub sizes: Vec<usize>,
    /// Training seeds; each derives a distinct held-out seed.
    pub seeds: Vec<u64>,
    /// Also score random merge trees under the label `random`.
    pub baseline: bool,
    pub criteria_config: CriteriaConfig,
    pub cache_policy: CachePolicy,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            synth: SynthConfig::default(),
            criteria: CriterionKind::ALL.to_vec(),
            sizes: vec![8, 16, 32],
            seeds: vec![0],
            baseline: true,
            criteria_config: CriteriaConfig::default(),
            cache_policy: CachePolicy::default(),
        }
    }
}

/// One (criterion, size, seed) cell of the sweep. Failed cells carry the
/// error text instead of metrics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchRow {
    pub criterion: String,
    pub k: usize,
    pub seed: u64,
    pub metrics: Option<EvalMetrics>,
    pub runtime_ms: f64,
    pub error: Option<String>,
}

/// Across-seed aggregate for one (criterion, size) cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryRow {
    pub criterion: String,
    pub k: usize,
    /// Seeds that produced metrics (failed cells are excluded).
    pub runs: usize,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub ap_mean: f64,
    pub ap_std: f64,
    pub eer_mean: f64,
    pub eer_std: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<BenchRow>,
    pub summary: Vec<SummaryRow>,
}

impl EvalReport {
    /// Per-cell table as CSV. Failed cells are omitted; the JSON report
    /// keeps them.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("criterion,k,seed,accuracy,ap,eer,runtime_ms\n");
        for row in &self.rows {
            if let Some(m) = &row.metrics {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    row.criterion, row.k, row.seed, m.accuracy, m.ap, m.eer, row.runtime_ms
                ));
            }
        }
        out
    }

    /// Summary as a gnuplot-friendly block per criterion: `k mean std`
    /// columns for accuracy, separated by blank lines between criteria.
    pub fn gnuplot_curves(&self) -> String {
        let mut out = String::new();
        let mut current: Option<&str> = None;
        for row in &self.summary {
            if current != Some(row.criterion.as_str()) {
                if current.is_some() {
                    out.push_str("\n\n");
                }
                out.push_str(&format!("# {}\n", row.criterion));
                current = Some(row.criterion.as_str());
            }
            out.push_str(&format!(
                "{} {} {}\n",
                row.k, row.accuracy_mean, row.accuracy_std
            ));
        }
        out
    }
}

/// Work unit of the sweep: one tree build plus one evaluation per size.
struct Cell {
    criterion: String,
    seed: u64,
}

fn tree_for(
    name: &str,
    train: &crate::data::HistogramDataset,
    min_size: usize,
    seed: u64,
    cfg: &BenchConfig,
) -> Result<MergeTree, EngineError> {
    let t0 = train.t();
    if min_size >= t0 {
        // every requested size keeps all words, so no merges are needed
        return Ok(MergeTree {
            initial_size: t0,
            merges: Vec::new(),
        });
    }
    if name == BASELINE_NAME {
        return build_random_tree(t0, min_size, seed);
    }
    let kind: CriterionKind = name.parse().expect("criterion names come from CriterionKind");
    let engine_cfg = EngineConfig {
        criterion: kind,
        min_size,
        record_losses: false,
        cache_policy: cfg.cache_policy,
        criteria: cfg.criteria_config.clone(),
    };
    build_merge_tree(train, &engine_cfg)
}

/// Runs one cell: builds the tree once, then scores every cut size. The
/// build time is amortized evenly over the sizes.
fn run_cell(cell: &Cell, cfg: &BenchConfig) -> Vec<BenchRow> {
    let fail_all = |message: String, runtime_ms: f64| -> Vec<BenchRow> {
        cfg.sizes
            .iter()
            .map(|&k| BenchRow {
                criterion: cell.criterion.clone(),
                k,
                seed: cell.seed,
                metrics: None,
                runtime_ms,
                error: Some(message.clone()),
            })
            .collect()
    };

    let started = Instant::now();
    let train_cfg = SynthConfig {
        seed: cell.seed,
        ..cfg.synth.clone()
    };
    let test_cfg = SynthConfig {
        seed: cell.seed.wrapping_add(TEST_SEED_OFFSET),
        ..cfg.synth.clone()
    };
    let (train, test) = match (gen_synthetic(&train_cfg), gen_synthetic(&test_cfg)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => {
            return fail_all(e.to_string(), ms_since(started));
        }
    };

    let min_size = cfg.sizes.iter().copied().min().expect("sizes checked nonempty");
    let tree = match tree_for(&cell.criterion, &train, min_size, cell.seed, cfg) {
        Ok(tree) => tree,
        Err(e) => return fail_all(e.to_string(), ms_since(started)),
    };
    let build_share = ms_since(started) / cfg.sizes.len() as f64;

    cfg.sizes
        .iter()
        .map(|&k| {
            let cell_start = Instant::now();
            let outcome = tree
                .cut(k)
                .map_err(EvalError::from)
                .and_then(|map| evaluate(&train, &test, &map, &cfg.criteria_config.eval));
            let runtime_ms = build_share + ms_since(cell_start);
            match outcome {
                Ok(metrics) => BenchRow {
                    criterion: cell.criterion.clone(),
                    k,
                    seed: cell.seed,
                    metrics: Some(metrics),
                    runtime_ms,
                    error: None,
                },
                Err(e) => BenchRow {
                    criterion: cell.criterion.clone(),
                    k,
                    seed: cell.seed,
                    metrics: None,
                    runtime_ms,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

fn ms_since(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn sample_std(values: &[f64], mean: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

fn summarize(rows: &[BenchRow], cfg: &BenchConfig) -> Vec<SummaryRow> {
    let mut names: Vec<String> = cfg.criteria.iter().map(|c| c.name().to_string()).collect();
    if cfg.baseline {
        names.push(BASELINE_NAME.into());
    }
    let mut out = Vec::new();
    for name in &names {
        for &k in &cfg.sizes {
            let cells: Vec<&EvalMetrics> = rows
                .iter()
                .filter(|r| &r.criterion == name && r.k == k)
                .filter_map(|r| r.metrics.as_ref())
                .collect();
            let runs = cells.len();
            let mean_of = |f: fn(&EvalMetrics) -> f64| -> (f64, f64) {
                if runs == 0 {
                    return (f64::NAN, f64::NAN);
                }
                let values: Vec<f64> = cells.iter().map(|m| f(m)).collect();
                let mean = values.iter().sum::<f64>() / runs as f64;
                (mean, sample_std(&values, mean))
            };
            let (accuracy_mean, accuracy_std) = mean_of(|m| m.accuracy);
            let (ap_mean, ap_std) = mean_of(|m| m.ap);
            let (eer_mean, eer_std) = mean_of(|m| m.eer);
            out.push(SummaryRow {
                criterion: name.clone(),
                k,
                runs,
                accuracy_mean,
                accuracy_std,
                ap_mean,
                ap_std,
                eer_mean,
                eer_std,
            });
        }
    }
    out
}

/// Runs the full sweep. Cells run in parallel; row order is fixed by the
/// config (criteria in listed order, then the baseline, each over seeds,
/// each over sizes) regardless of worker count. Failed cells are recorded
/// and the sweep continues.
pub fn bench(cfg: &BenchConfig) -> Result<EvalReport, EvalError> {
    if cfg.sizes.is_empty() {
        return Err(EvalError::Shape("no codebook sizes requested".into()));
    }
    if cfg.seeds.is_empty() {
        return Err(EvalError::Shape("no seeds requested".into()));
    }
    if cfg.criteria.is_empty() && !cfg.baseline {
        return Err(EvalError::Shape("no criteria requested".into()));
    }
    cfg.synth.validate()?;

    let mut names: Vec<String> = cfg.criteria.iter().map(|c| c.name().to_string()).collect();
    if cfg.baseline {
        names.push(BASELINE_NAME.into());
    }
    let cells: Vec<Cell> = names
        .iter()
        .flat_map(|name| {
            cfg.seeds.iter().map(|&seed| Cell {
                criterion: name.clone(),
                seed,
            })
        })
        .collect();

    let rows: Vec<BenchRow> = cells
        .par_iter()
        .map(|cell| run_cell(cell, cfg))
        .collect::<Vec<Vec<BenchRow>>>()
        .into_iter()
        .flatten()
        .collect();

    let summary = summarize(&rows, cfg);
    Ok(EvalReport { rows, summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> BenchConfig {
        BenchConfig {
            synth: SynthConfig {
                n_per_class: 12,
                t_disc: 4,
                t_noise: 8,
                counts_per_sample: 30,
                ..SynthConfig::default()
            },
            criteria: vec![CriterionKind::Aib],
            sizes: vec![4, 8],
            seeds: vec![1, 2],
            baseline: true,
            ..BenchConfig::default()
        }
    }

    #[test]
    fn sweep_covers_every_cell_in_order() {
        let report = bench(&small_cfg()).unwrap();
        let key: Vec<(String, u64, usize)> = report
            .rows
            .iter()
            .map(|r| (r.criterion.clone(), r.seed, r.k))
            .collect();
        let mut expect = Vec::new();
        for name in ["aib", "random"] {
            for seed in [1u64, 2] {
                for k in [4usize, 8] {
                    expect.push((name.to_string(), seed, k));
                }
            }
        }
        assert_eq!(key, expect);
        for row in &report.rows {
            assert!(row.error.is_none(), "{:?}", row.error);
            assert!(row.runtime_ms >= 0.0);
        }
        assert_eq!(report.summary.len(), 4);
        for s in &report.summary {
            assert_eq!(s.runs, 2);
            assert!(s.accuracy_mean >= 0.0 && s.accuracy_mean <= 1.0);
        }
    }

    #[test]
    fn metrics_are_seed_stable() {
        let cfg = small_cfg();
        let a = bench(&cfg).unwrap();
        let b = bench(&cfg).unwrap();
        for (x, y) in a.rows.iter().zip(&b.rows) {
            assert_eq!(x.metrics.map(|m| (m.accuracy, m.ap, m.eer)),
                       y.metrics.map(|m| (m.accuracy, m.ap, m.eer)));
        }
    }

    #[test]
    fn full_size_cut_needs_no_merges() {
        let mut cfg = small_cfg();
        cfg.sizes = vec![12, 16]; // t0 = 12, both >= min keeps the tree empty
        let report = bench(&cfg).unwrap();
        let ok = report.rows.iter().filter(|r| r.k == 12).count();
        assert_eq!(ok, 4);
        for row in &report.rows {
            if row.k == 16 {
                // above the initial size: cut fails, recorded not fatal
                assert!(row.error.is_some());
            } else {
                assert!(row.metrics.is_some(), "{:?}", row.error);
            }
        }
    }

    #[test]
    fn failed_rows_stay_out_of_the_csv() {
        let mut cfg = small_cfg();
        cfg.sizes = vec![8, 40]; // 40 > t0 = 12 always fails
        let report = bench(&cfg).unwrap();
        let csv = report.to_csv();
        let lines: Vec<&str> = csv.trim_end().lines().collect();
        assert_eq!(lines[0], "criterion,k,seed,accuracy,ap,eer,runtime_ms");
        // 2 criteria x 2 seeds x 1 surviving size
        assert_eq!(lines.len(), 1 + 4);
        assert!(!csv.contains(",40,"));
        let summary_runs: Vec<usize> = report.summary.iter().map(|s| s.runs).collect();
        assert_eq!(summary_runs, vec![2, 0, 2, 0]);
    }

    #[test]
    fn gnuplot_blocks_are_grouped_by_criterion() {
        let report = bench(&small_cfg()).unwrap();
        let plot = report.gnuplot_curves();
        assert!(plot.starts_with("# aib\n"));
        assert!(plot.contains("\n\n# random\n"));
    }

    #[test]
    fn empty_requests_are_rejected() {
        let mut cfg = small_cfg();
        cfg.sizes.clear();
        assert!(matches!(bench(&cfg), Err(EvalError::Shape(_))));
        let mut cfg = small_cfg();
        cfg.seeds.clear();
        assert!(matches!(bench(&cfg), Err(EvalError::Shape(_))));
    }
}

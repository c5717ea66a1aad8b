//! Replicated simulation studies over a grid of settings.
//!
//! Each replicate simulates a series from the truth and either estimates
//! its parameters under the generating regime or runs the ER-versus-PR
//! test on it. Seeds split as
//! `master -> (regime, n, M, replicate) -> series`, then `-> particles`
//! for inference, so a series is shared by every particle count and any
//! replicate can be rerun alone.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use rghmm_core::inference::{em_fit, EmConfig};
use rghmm_core::model_selection::{bayes_factor_test, TestConfig};
use rghmm_core::numeric::mean_sd;
use rghmm_core::seed::{derive_rng, derive_seed, stream};
use rghmm_core::series::simulate_series;
use rghmm_core::{DynGraph, Regime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::records::ParamRecord;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Csv(#[from] csv::Error),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    /// Parameter estimation under the generating regime.
    Estimate,
    /// ER-versus-PR Bayes-factor test.
    Detect,
}

/// Optional overrides of the EM settings other than the particle count.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmOverrides {
    pub lines: Option<usize>,
    pub paths_per_segment: Option<usize>,
    pub noise_lines: Option<usize>,
    pub max_iters: Option<usize>,
    pub tol: Option<f64>,
}

impl EmOverrides {
    pub fn apply(&self, particles: usize) -> EmConfig {
        let d = EmConfig::default();
        EmConfig {
            particles,
            lines: self.lines.unwrap_or(d.lines),
            paths_per_segment: self.paths_per_segment.unwrap_or(d.paths_per_segment),
            noise_lines: self.noise_lines.unwrap_or(d.noise_lines),
            max_iters: self.max_iters.unwrap_or(d.max_iters),
            tol: self.tol.unwrap_or(d.tol),
            ..d
        }
    }
}

fn default_trials() -> usize {
    TestConfig::default().trials
}

/// Settings of one study. Series lengths come either from `m` directly or
/// from `scaled_duration`, the normalised time `γ t_M / N` of the last
/// observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentGrid {
    pub id: String,
    pub kind: ExperimentKind,
    pub regimes: Vec<Regime>,
    pub n: Vec<usize>,
    #[serde(default)]
    pub m: Vec<usize>,
    #[serde(default)]
    pub scaled_duration: Vec<f64>,
    pub kappa: f64,
    pub particles: Vec<usize>,
    pub replicates: usize,
    pub seed: u64,
    pub truth: ParamRecord,
    #[serde(default)]
    pub em: EmOverrides,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub forward_particles: Option<usize>,
}

/// Number of snapshots whose last normalised time `γ t_M / N` is closest
/// to `scaled`, with `t_m = m / κ`.
pub fn snapshots_for_scaled_time(scaled: f64, n: usize, kappa: f64, gamma: f64) -> usize {
    (scaled * n as f64 * kappa / gamma).round() as usize
}

/// Normalised time `γ t / N`.
pub fn scaled_time(t: f64, n: usize, gamma: f64) -> f64 {
    gamma * t / n as f64
}

/// One combination of grid settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub regime: Regime,
    pub n: usize,
    pub m: usize,
    pub particles: usize,
}

impl ExperimentGrid {
    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        let grid: Self = serde_json::from_str(text)?;
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::InvalidGrid(m.to_string()));
        if self.regimes.is_empty() || self.n.is_empty() || self.particles.is_empty() {
            return bad("regimes, n and particles must be non-empty");
        }
        if self.m.is_empty() == self.scaled_duration.is_empty() {
            return bad("give exactly one of m and scaled_duration");
        }
        if self.n.iter().any(|&n| n < 2) {
            return bad("n values must be at least 2");
        }
        if self.m.iter().any(|&m| m < 2) || self.scaled_duration.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return bad("series lengths must be at least 2 and scaled durations positive");
        }
        if self.particles.contains(&0) || self.replicates == 0 || self.trials == 0 {
            return bad("particles, replicates and trials must be positive");
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return bad("kappa must be positive");
        }
        self.truth
            .to_simulation_model()
            .map_err(|e| ExperimentError::InvalidGrid(format!("truth: {e}")))?;
        for c in self.cells() {
            if c.m < 2 {
                return Err(ExperimentError::InvalidGrid(format!("n = {} gives fewer than 2 snapshots", c.n)));
            }
        }
        Ok(())
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &regime in &self.regimes {
            for &n in &self.n {
                let lengths: Vec<usize> = if self.m.is_empty() {
                    self.scaled_duration
                        .iter()
                        .map(|&t| snapshots_for_scaled_time(t, n, self.kappa, self.truth.gamma))
                        .collect()
                } else {
                    self.m.clone()
                };
                for m in lengths {
                    for &particles in &self.particles {
                        out.push(Cell { regime, n, m, particles });
                    }
                }
            }
        }
        out
    }

    pub fn series_seed(&self, cell: &Cell, replicate: usize) -> u64 {
        let regime = match cell.regime {
            Regime::Er => 0,
            Regime::Pr => 1,
        };
        derive_seed(self.seed, &[regime, cell.n as u64, cell.m as u64, replicate as u64])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub experiment: String,
    pub kind: ExperimentKind,
    #[serde(flatten)]
    pub cell: Cell,
    pub replicate: usize,
    pub seed: u64,
    pub status: Status,
    pub error: Option<String>,
    pub estimate: Option<ParamRecord>,
    pub converged: Option<bool>,
    pub iterations: Option<usize>,
    pub loglik_er: Option<f64>,
    pub loglik_pr: Option<f64>,
    pub log_bf: Option<f64>,
    pub decision: Option<Regime>,
    pub correct: Option<bool>,
    pub wall_time_s: f64,
}

impl ReplicateRecord {
    fn blank(grid: &ExperimentGrid, cell: Cell, replicate: usize, seed: u64) -> Self {
        Self {
            experiment: grid.id.clone(),
            kind: grid.kind,
            cell,
            replicate,
            seed,
            status: Status::Ok,
            error: None,
            estimate: None,
            converged: None,
            iterations: None,
            loglik_er: None,
            loglik_pr: None,
            log_bf: None,
            decision: None,
            correct: None,
            wall_time_s: 0.0,
        }
    }
}

/// Runs one replicate; failures are recorded rather than returned.
pub fn run_replicate(grid: &ExperimentGrid, cell: Cell, replicate: usize) -> ReplicateRecord {
    let clock = Instant::now();
    let series_seed = grid.series_seed(&cell, replicate);
    let mut record = ReplicateRecord::blank(grid, cell, replicate, series_seed);
    if let Err(message) = fill_replicate(grid, cell, series_seed, &mut record) {
        record.status = Status::Failed;
        record.error = Some(message);
    }
    record.wall_time_s = clock.elapsed().as_secs_f64();
    record
}

fn fill_replicate(grid: &ExperimentGrid, cell: Cell, series_seed: u64, record: &mut ReplicateRecord) -> Result<(), String> {
    let truth = grid.truth.to_simulation_model().map_err(|e| e.to_string())?;
    let mut sim_rng = derive_rng(series_seed, &[stream::SIMULATION]);
    let init = DynGraph::empty(cell.n).map_err(|e| e.to_string())?;
    let series = simulate_series(cell.regime, init, &truth.process, &truth.noise, grid.kappa, cell.m, &mut sim_rng)
        .map_err(|e| e.to_string())?
        .series;
    let inference_seed = derive_seed(series_seed, &[cell.particles as u64]);
    let mut rng = derive_rng(inference_seed, &[stream::TRIAL]);
    let em = grid.em.apply(cell.particles);
    match grid.kind {
        ExperimentKind::Estimate => {
            let fit = em_fit(&series, cell.regime, &em, &mut rng).map_err(|e| e.to_string())?;
            record.estimate = Some(fit.params.into());
            record.converged = Some(fit.converged);
            record.iterations = Some(fit.iterations.len());
        }
        ExperimentKind::Detect => {
            let config = TestConfig {
                em,
                forward_particles: grid.forward_particles,
                trials: grid.trials,
            };
            let result = bayes_factor_test(&series, &config, &mut rng).map_err(|e| e.to_string())?;
            record.loglik_er = Some(result.loglik_er);
            record.loglik_pr = Some(result.loglik_pr);
            record.log_bf = Some(result.log_bf);
            record.decision = Some(result.decision);
            record.correct = Some(result.decision == cell.regime);
        }
    }
    Ok(())
}

/// Per-cell summary. Estimate columns hold `mean (sd)` over successful
/// replicates; the detection rate is the fraction of successful
/// replicates classified as their generating regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub experiment: String,
    pub kind: ExperimentKind,
    pub regime: Regime,
    pub n: usize,
    pub m: usize,
    pub particles: usize,
    pub replicates: usize,
    pub failed: usize,
    pub p_mean: Option<f64>,
    pub p_sd: Option<f64>,
    pub q_mean: Option<f64>,
    pub q_sd: Option<f64>,
    pub gamma_mean: Option<f64>,
    pub gamma_sd: Option<f64>,
    pub alpha_mean: Option<f64>,
    pub alpha_sd: Option<f64>,
    pub beta_mean: Option<f64>,
    pub beta_sd: Option<f64>,
    pub p: Option<String>,
    pub q: Option<String>,
    pub gamma: Option<String>,
    pub alpha: Option<String>,
    pub beta: Option<String>,
    pub detection_rate: Option<f64>,
    pub log_bf_mean: Option<f64>,
    pub log_bf_sd: Option<f64>,
}

fn table_entry(mean: f64, sd: f64) -> String {
    format!("{mean:.3} ({sd:.3})")
}

/// Summary rows recomputed from per-replicate records, ordered by cell.
pub fn summarize(records: &[ReplicateRecord]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(String, Cell), Vec<&ReplicateRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.experiment.clone(), r.cell)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((experiment, cell), mut rs)| {
            rs.sort_by_key(|r| r.replicate);
            let kind = rs[0].kind;
            let ok: Vec<&&ReplicateRecord> = rs.iter().filter(|r| r.status == Status::Ok).collect();
            let estimates: Vec<[f64; 5]> = ok.iter().filter_map(|r| r.estimate.map(ParamRecord::to_array)).collect();
            let column = |k: usize| -> Option<(f64, f64)> {
                (!estimates.is_empty()).then(|| mean_sd(&estimates.iter().map(|e| e[k]).collect::<Vec<_>>()))
            };
            let cols: Vec<Option<(f64, f64)>> = (0..5).map(column).collect();
            let bfs: Vec<f64> = ok.iter().filter_map(|r| r.log_bf).collect();
            let correct: Vec<bool> = ok.iter().filter_map(|r| r.correct).collect();
            let bf = (!bfs.is_empty()).then(|| mean_sd(&bfs));
            SummaryRow {
                experiment,
                kind,
                regime: cell.regime,
                n: cell.n,
                m: cell.m,
                particles: cell.particles,
                replicates: ok.len(),
                failed: rs.len() - ok.len(),
                p_mean: cols[0].map(|c| c.0),
                p_sd: cols[0].map(|c| c.1),
                q_mean: cols[1].map(|c| c.0),
                q_sd: cols[1].map(|c| c.1),
                gamma_mean: cols[2].map(|c| c.0),
                gamma_sd: cols[2].map(|c| c.1),
                alpha_mean: cols[3].map(|c| c.0),
                alpha_sd: cols[3].map(|c| c.1),
                beta_mean: cols[4].map(|c| c.0),
                beta_sd: cols[4].map(|c| c.1),
                p: cols[0].map(|c| table_entry(c.0, c.1)),
                q: cols[1].map(|c| table_entry(c.0, c.1)),
                gamma: cols[2].map(|c| table_entry(c.0, c.1)),
                alpha: cols[3].map(|c| table_entry(c.0, c.1)),
                beta: cols[4].map(|c| table_entry(c.0, c.1)),
                detection_rate: (!correct.is_empty())
                    .then(|| correct.iter().filter(|&&c| c).count() as f64 / correct.len() as f64),
                log_bf_mean: bf.map(|b| b.0),
                log_bf_sd: bf.map(|b| b.1),
            }
        })
        .collect()
}

pub fn summary_csv(rows: &[SummaryRow]) -> Result<String, ExperimentError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| ExperimentError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("CSV of UTF-8 fields"))
}

pub fn records_jsonl(records: &[ReplicateRecord]) -> Result<String, ExperimentError> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn parse_records_jsonl(text: &str) -> Result<Vec<ReplicateRecord>, ExperimentError> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}

pub const RECORDS_FILE: &str = "records.jsonl";
pub const PARTIAL_FILE: &str = "records.partial.jsonl";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const GRID_FILE: &str = "grid.json";

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub records: Vec<ReplicateRecord>,
    pub summary: Vec<SummaryRow>,
    pub dir: PathBuf,
}

/// Runs every replicate of every cell in parallel. Records are appended to
/// `records.partial.jsonl` as they finish; at the end they are written in
/// cell and replicate order to `records.jsonl`, with `summary.csv` and a
/// copy of the grid alongside.
pub fn run_experiment(grid: &ExperimentGrid, dir: &Path) -> Result<ExperimentOutput, ExperimentError> {
    grid.validate()?;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let grid_path = dir.join(GRID_FILE);
    fs::write(&grid_path, serde_json::to_string_pretty(grid)? + "\n").map_err(io_err(&grid_path))?;

    let partial_path = dir.join(PARTIAL_FILE);
    let sink = Mutex::new(BufWriter::new(File::create(&partial_path).map_err(io_err(&partial_path))?));
    let tasks: Vec<(Cell, usize)> = grid
        .cells()
        .into_iter()
        .flat_map(|c| (0..grid.replicates).map(move |r| (c, r)))
        .collect();
    let mut records: Vec<ReplicateRecord> = tasks
        .par_iter()
        .map(|&(cell, replicate)| -> Result<ReplicateRecord, ExperimentError> {
            let record = run_replicate(grid, cell, replicate);
            let line = serde_json::to_string(&record)?;
            let mut w = sink.lock().expect("sink lock");
            writeln!(w, "{line}").and_then(|_| w.flush()).map_err(io_err(&partial_path))?;
            Ok(record)
        })
        .collect::<Result<_, _>>()?;
    drop(sink);
    records.sort_by(|a, b| (a.cell, a.replicate).cmp(&(b.cell, b.replicate)));

    let records_path = dir.join(RECORDS_FILE);
    fs::write(&records_path, records_jsonl(&records)?).map_err(io_err(&records_path))?;
    let summary = summarize(&records);
    let summary_path = dir.join(SUMMARY_FILE);
    fs::write(&summary_path, summary_csv(&summary)?).map_err(io_err(&summary_path))?;
    fs::remove_file(&partial_path).map_err(io_err(&partial_path))?;
    Ok(ExperimentOutput {
        records,
        summary,
        dir: dir.to_path_buf(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> ExperimentGrid {
        ExperimentGrid::from_json(
            r#"{"id": "t", "kind": "estimate", "regimes": ["er"], "n": [15], "scaled_duration": [2.4],
                "kappa": 1.5, "particles": [100], "replicates": 1, "seed": 3,
                "truth": {"p": 0.9, "q": 0.1, "gamma": 2, "alpha": 0.01, "beta": 0.01}}"#,
        )
        .unwrap()
    }

    #[test]
    fn scaled_duration_sets_series_length() {
        assert_eq!(snapshots_for_scaled_time(2.4, 15, 1.5, 2.0), 27);
        assert_eq!(grid().cells()[0].m, 27);
        assert!((scaled_time(27.0 / 1.5, 15, 2.0) - 2.4).abs() < 1e-12);
    }

    #[test]
    fn rejects_inconsistent_grids() {
        let mut g = grid();
        g.m = vec![10];
        assert!(matches!(g.validate(), Err(ExperimentError::InvalidGrid(_))));
        let mut g = grid();
        g.replicates = 0;
        assert!(g.validate().is_err());
        assert!(ExperimentGrid::from_json(r#"{"id": "x"}"#).is_err());
    }

    #[test]
    fn single_replicate_summary_is_the_record() {
        let mut r = ReplicateRecord::blank(&grid(), grid().cells()[0], 0, 1);
        r.estimate = Some(ParamRecord {
            p: 0.8,
            q: 0.2,
            gamma: 1.5,
            alpha: 0.05,
            beta: 0.02,
        });
        let s = summarize(&[r]);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].p_mean, Some(0.8));
        assert_eq!(s[0].gamma_sd, Some(0.0));
        assert_eq!(s[0].p.as_deref(), Some("0.800 (0.000)"));
        assert_eq!(s[0].detection_rate, None);
    }

    #[test]
    fn failures_are_counted_not_averaged() {
        let g = grid();
        let cell = g.cells()[0];
        let mut ok = ReplicateRecord::blank(&g, cell, 0, 1);
        ok.log_bf = Some(2.0);
        ok.correct = Some(true);
        let mut bad = ReplicateRecord::blank(&g, cell, 1, 2);
        bad.status = Status::Failed;
        bad.error = Some("boom".into());
        let s = summarize(&[bad, ok]);
        assert_eq!((s[0].replicates, s[0].failed), (1, 1));
        assert_eq!(s[0].detection_rate, Some(1.0));
        assert_eq!(s[0].log_bf_mean, Some(2.0));
    }
}

//! Structured outputs of the CLI and the experiment runner.

use rghmm_core::inference::{EmConfig, EmFit, IterationRecord};
use rghmm_core::model_selection::TestResult;
use rghmm_core::params::{NoiseParams, ParamError, ProcessParams};
use rghmm_core::segmentation::Segment;
use rghmm_core::{ModelParams, Regime};
use serde::{Deserialize, Serialize};

/// `(p, q, γ, α, β)` as a flat record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamRecord {
    pub p: f64,
    pub q: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl From<ModelParams> for ParamRecord {
    fn from(m: ModelParams) -> Self {
        let [p, q, gamma, alpha, beta] = m.to_array();
        Self { p, q, gamma, alpha, beta }
    }
}

impl ParamRecord {
    pub fn to_array(self) -> [f64; 5] {
        [self.p, self.q, self.gamma, self.alpha, self.beta]
    }

    /// Parameters inside the estimation box.
    pub fn to_model(self) -> Result<ModelParams, ParamError> {
        ModelParams::new(self.p, self.q, self.gamma, self.alpha, self.beta)
    }

    /// Parameters for simulation: closed unit ranges, so noise-free and
    /// pure-growth settings are allowed.
    pub fn to_simulation_model(self) -> Result<ModelParams, ParamError> {
        Ok(ModelParams {
            process: ProcessParams::closed(self.p, self.q, self.gamma)?,
            noise: NoiseParams::unrestricted(self.alpha, self.beta)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub regime: Regime,
    pub input: String,
    pub seed: u64,
    pub snapshots: usize,
    pub vertices: usize,
    pub config: EmConfig,
    pub estimate: ParamRecord,
    pub converged: bool,
    pub iterations: Vec<IterationRecord>,
    pub wall_time_s: f64,
}

impl EstimateRecord {
    pub fn new(regime: Regime, input: String, seed: u64, shape: (usize, usize), config: EmConfig, fit: EmFit, wall_time_s: f64) -> Self {
        Self {
            regime,
            input,
            seed,
            snapshots: shape.0,
            vertices: shape.1,
            config,
            estimate: fit.params.into(),
            converged: fit.converged,
            iterations: fit.iterations,
            wall_time_s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub estimate_er: ParamRecord,
    pub estimate_pr: ParamRecord,
    pub loglik_er: f64,
    pub loglik_pr: f64,
    pub log_bf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRecord {
    pub input: String,
    pub seed: u64,
    pub snapshots: usize,
    pub vertices: usize,
    pub config: rghmm_core::model_selection::TestConfig,
    pub loglik_er: f64,
    pub loglik_pr: f64,
    pub log_bf: f64,
    pub log_bf_sd: f64,
    pub decision: Regime,
    pub trials: Vec<TrialRecord>,
    pub wall_time_s: f64,
}

impl TestRecord {
    pub fn new(
        input: String,
        seed: u64,
        shape: (usize, usize),
        config: rghmm_core::model_selection::TestConfig,
        result: TestResult,
        wall_time_s: f64,
    ) -> Self {
        Self {
            input,
            seed,
            snapshots: shape.0,
            vertices: shape.1,
            config,
            loglik_er: result.loglik_er,
            loglik_pr: result.loglik_pr,
            log_bf: result.log_bf,
            log_bf_sd: result.log_bf_sd,
            decision: result.decision,
            trials: result
                .trials
                .into_iter()
                .map(|t| TrialRecord {
                    estimate_er: t.fit_er.params.into(),
                    estimate_pr: t.fit_pr.params.into(),
                    loglik_er: t.loglik_er,
                    loglik_pr: t.loglik_pr,
                    log_bf: t.log_bf,
                })
                .collect(),
            wall_time_s,
        }
    }
}

/// A segment as 0-based inclusive indices with their times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub a: usize,
    pub b: usize,
    pub t_a: f64,
    pub t_b: f64,
}

impl SegmentRecord {
    pub fn new(seg: Segment, times: &[f64]) -> Self {
        Self {
            a: seg.start,
            b: seg.end,
            t_a: times[seg.start],
            t_b: times[seg.end],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentReport {
    pub input: String,
    pub metric: String,
    pub roi_start: f64,
    pub roi_end: f64,
    pub segments: Vec<SegmentRecord>,
}

//! Regime comparison by Bayes factors: particle estimates of the observed
//! data likelihood under each regime at its fitted parameters.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::GraphError;
use crate::inference::{em_fit, run_filter, EmConfig, EmFit, InferenceError};
use crate::kernel::{exact_interval_kernel, KernelError, StateSpace};
use crate::noise::obs_loglik;
use crate::numeric::{mean_sd, poisson_truncation};
use crate::params::{ModelParams, Regime};
use crate::percolation::LatentState;
use crate::seed::{derive_rng, derive_seed, stream};
use crate::series::NetworkSeries;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SelectionError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("the observations have zero probability under the model")]
    ZeroLikelihood,
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Running `ln Z_m` for `m = 1..=M` with `Z_1 = 1`.
pub fn forward_trace<R: Rng + ?Sized>(
    series: &NetworkSeries,
    params: &ModelParams,
    regime: Regime,
    particles: usize,
    rng: &mut R,
) -> Result<Vec<f64>, SelectionError> {
    let run = run_filter(series, params, regime, particles, rng.next_u64(), false)?;
    let mut trace = vec![0.0];
    let mut acc = 0.0;
    for inc in run.log_increments {
        acc += inc;
        trace.push(acc);
    }
    Ok(trace)
}

/// Particle estimate of `ln f(g*_{2:M} | g*_1)`.
pub fn forward_loglik<R: Rng + ?Sized>(
    series: &NetworkSeries,
    params: &ModelParams,
    regime: Regime,
    particles: usize,
    rng: &mut R,
) -> Result<f64, SelectionError> {
    Ok(*forward_trace(series, params, regime, particles, rng)?.last().expect("non-empty trace"))
}

/// Exact `ln f(g*_{2:M} | X(t_1) = initial)` by the forward recursion over
/// the enumerated state space, with each interval kernel truncated where
/// the Poisson tail falls below `tail_tol`. Requires `n <= 4`.
pub fn exact_forward_loglik(
    series: &NetworkSeries,
    params: &ModelParams,
    regime: Regime,
    initial: &LatentState,
    tail_tol: f64,
) -> Result<f64, SelectionError> {
    let space = StateSpace::new(series.n())?;
    let mut forward = vec![0.0; space.len()];
    forward[space.index_of(initial)] = 1.0;
    let graphs: Vec<_> = (0..space.len()).map(|i| space.graph(i)).collect();
    let mut total = 0.0;
    for m in 1..series.len() {
        let gap = series.gap(m);
        let r_max = poisson_truncation(params.process.gamma * gap, tail_tol);
        let kernel = exact_interval_kernel(series.n(), regime, &params.process, gap, r_max)?;
        let obs = series.snapshot(m);
        let mut next = vec![0.0; space.len()];
        for (j, slot) in next.iter_mut().enumerate() {
            let pred: f64 = (0..space.len()).map(|i| forward[i] * kernel[(i, j)]).sum();
            *slot = pred * obs_loglik(obs, &graphs[j], &params.noise)?.exp();
        }
        let z: f64 = next.iter().sum();
        if z <= 0.0 {
            return Err(SelectionError::ZeroLikelihood);
        }
        total += z.ln();
        forward = next.into_iter().map(|v| v / z).collect();
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub em: EmConfig,
    /// Particles for the likelihood pass; defaults to the EM count.
    pub forward_particles: Option<usize>,
    pub trials: usize,
}

impl Default for TestConfig {
    fn default() -> Self {
        Self {
            em: EmConfig::default(),
            forward_particles: None,
            trials: 10,
        }
    }
}

impl TestConfig {
    pub fn forward_particles(&self) -> usize {
        self.forward_particles.unwrap_or(self.em.particles)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub fit_er: EmFit,
    pub fit_pr: EmFit,
    pub loglik_er: f64,
    pub loglik_pr: f64,
    pub log_bf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    /// Mean over trials.
    pub loglik_er: f64,
    pub loglik_pr: f64,
    /// `loglik_er - loglik_pr`; positive favours ER.
    pub log_bf: f64,
    pub log_bf_sd: f64,
    pub decision: Regime,
    pub trials: Vec<TrialResult>,
}

fn fit_and_score(
    series: &NetworkSeries,
    regime: Regime,
    config: &TestConfig,
    base: u64,
    trial: usize,
    side: u64,
) -> Result<(EmFit, f64), SelectionError> {
    let mut rng = derive_rng(base, &[stream::TRIAL, trial as u64, side]);
    let fit = em_fit(series, regime, &config.em, &mut rng)?;
    let seed = derive_seed(base, &[stream::FORWARD, trial as u64, side]);
    let ll = run_filter(series, &fit.params, regime, config.forward_particles(), seed, false)?.log_likelihood();
    Ok((fit, ll))
}

fn validate(series: &NetworkSeries, config: &TestConfig) -> Result<(), SelectionError> {
    if config.trials == 0 {
        return Err(SelectionError::InvalidConfig("trials must be positive".into()));
    }
    if config.forward_particles() == 0 {
        return Err(SelectionError::InvalidConfig("forward particles must be positive".into()));
    }
    series.require_len(2).map_err(InferenceError::from)?;
    Ok(())
}

/// ER-versus-PR test averaged over `config.trials` independent fits.
pub fn bayes_factor_test<R: Rng + ?Sized>(
    series: &NetworkSeries,
    config: &TestConfig,
    rng: &mut R,
) -> Result<TestResult, SelectionError> {
    validate(series, config)?;
    let base = rng.next_u64();
    let mut trials = Vec::with_capacity(config.trials);
    for t in 0..config.trials {
        let (fit_er, loglik_er) = fit_and_score(series, Regime::Er, config, base, t, 0)?;
        let (fit_pr, loglik_pr) = fit_and_score(series, Regime::Pr, config, base, t, 1)?;
        trials.push(TrialResult {
            fit_er,
            fit_pr,
            loglik_er,
            loglik_pr,
            log_bf: loglik_er - loglik_pr,
        });
    }
    let er: Vec<f64> = trials.iter().map(|t| t.loglik_er).collect();
    let pr: Vec<f64> = trials.iter().map(|t| t.loglik_pr).collect();
    let bf: Vec<f64> = trials.iter().map(|t| t.log_bf).collect();
    let (log_bf, log_bf_sd) = mean_sd(&bf);
    Ok(TestResult {
        loglik_er: mean_sd(&er).0,
        loglik_pr: mean_sd(&pr).0,
        log_bf,
        log_bf_sd,
        decision: if log_bf > 0.0 { Regime::Er } else { Regime::Pr },
        trials,
    })
}

/// Per-trial log Bayes factors of `regime` against itself, each side fitted
/// and scored independently. Centred on zero up to Monte Carlo error.
pub fn self_test<R: Rng + ?Sized>(
    series: &NetworkSeries,
    regime: Regime,
    config: &TestConfig,
    rng: &mut R,
) -> Result<Vec<f64>, SelectionError> {
    validate(series, config)?;
    let base = rng.next_u64();
    (0..config.trials)
        .map(|t| {
            let (_, a) = fit_and_score(series, regime, config, base, t, 0)?;
            let (_, b) = fit_and_score(series, regime, config, base, t, 1)?;
            Ok(a - b)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::DynGraph;
    use crate::percolation::Direction;
    use crate::seed::rng_from_seed;
    use crate::series::simulate_series;

    fn model() -> ModelParams {
        ModelParams::new(0.7, 0.3, 2.0, 0.1, 0.05).unwrap()
    }

    #[test]
    fn single_snapshot_has_unit_likelihood() {
        let s = NetworkSeries::new(vec![1.0], vec![DynGraph::empty(4).unwrap()]).unwrap();
        let v = forward_loglik(&s, &model(), Regime::Er, 10, &mut rng_from_seed(1)).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn trace_is_non_increasing_and_finite() {
        let mut rng = rng_from_seed(2);
        let m = model();
        let s = simulate_series(Regime::Pr, DynGraph::empty(6).unwrap(), &m.process, &m.noise, 1.0, 8, &mut rng)
            .unwrap()
            .series;
        let trace = forward_trace(&s, &m, Regime::Pr, 500, &mut rng).unwrap();
        assert_eq!(trace.len(), 8);
        for w in trace.windows(2) {
            assert!(w[1].is_finite() && w[1] <= w[0]);
        }
    }

    #[test]
    fn exact_forward_on_single_interval() {
        // One interval: Σ_j P(t)[x0, j] f(g*_2 | g_j).
        let mut rng = rng_from_seed(3);
        let m = model();
        let s = simulate_series(Regime::Er, DynGraph::empty(3).unwrap(), &m.process, &m.noise, 1.0, 2, &mut rng)
            .unwrap()
            .series;
        let init = LatentState::new(Direction::Add, s.snapshot(0).clone());
        let v = exact_forward_loglik(&s, &m, Regime::Er, &init, 1e-14).unwrap();
        let space = StateSpace::new(3).unwrap();
        let k = exact_interval_kernel(3, Regime::Er, &m.process, 1.0, 40).unwrap();
        let i = space.index_of(&init);
        let direct: f64 = (0..16)
            .map(|j| k[(i, j)] * obs_loglik(s.snapshot(1), &space.graph(j), &m.noise).unwrap().exp())
            .sum();
        assert!((v - direct.ln()).abs() < 1e-12);
    }

    #[test]
    fn rejects_zero_trials() {
        let s = NetworkSeries::new(vec![1.0, 2.0], vec![DynGraph::empty(3).unwrap(); 2]).unwrap();
        let cfg = TestConfig {
            trials: 0,
            ..TestConfig::default()
        };
        assert!(matches!(
            bayes_factor_test(&s, &cfg, &mut rng_from_seed(4)),
            Err(SelectionError::InvalidConfig(_))
        ));
    }

    #[test]
    fn decision_follows_sign() {
        let mut rng = rng_from_seed(5);
        let m = model();
        let s = simulate_series(Regime::Er, DynGraph::empty(5).unwrap(), &m.process, &m.noise, 1.0, 6, &mut rng)
            .unwrap()
            .series;
        let cfg = TestConfig {
            em: EmConfig {
                particles: 200,
                noise_lines: 200,
                lines: 3,
                paths_per_segment: 3,
                max_iters: 2,
                ..EmConfig::default()
            },
            forward_particles: Some(300),
            trials: 2,
        };
        let r = bayes_factor_test(&s, &cfg, &mut rng).unwrap();
        assert_eq!(r.trials.len(), 2);
        assert_eq!(r.decision == Regime::Er, r.log_bf > 0.0);
        assert!((r.log_bf - (r.loglik_er - r.loglik_pr)).abs() < 1e-9);
    }
}

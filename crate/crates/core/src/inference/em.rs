//! EM estimation: particle smoothing for the observation-level expectation,
//! path sampling for the within-interval expectation, closed-form updates.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mcmc::{mcmc_path_sampler, McmcConfig};
use super::particle::{draw_ancestral_lines, line_confusion, run_filter};
use super::path::{path_stats, SamplePath};
use super::InferenceError;
use crate::noise::ConfusionCounts;
use crate::params::{ModelParams, NoiseParams, ProcessParams, Regime};
use crate::percolation::LatentState;
use crate::seed::{derive_rng, derive_seed, stream};
use crate::series::NetworkSeries;

/// Expected complete-data counts feeding the M-step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SufficientStats {
    pub transitions: f64,
    pub births: f64,
    pub from_delete: f64,
    pub deaths: f64,
    pub from_add: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

/// Sampled paths for one interval of one ancestral line.
#[derive(Debug, Clone)]
pub struct SegmentPaths {
    pub start: LatentState,
    pub paths: Vec<SamplePath>,
}

/// Averages path counts over the paths of each segment, sums over
/// segments, then averages over lines. Confusion totals are averaged over
/// the per-line totals in `confusion`.
pub fn accumulate_stats(
    lines: &[Vec<SegmentPaths>],
    confusion: &[ConfusionCounts],
) -> Result<SufficientStats, InferenceError> {
    let mut s = SufficientStats::default();
    for line in lines {
        for seg in line {
            if seg.paths.is_empty() {
                return Err(InferenceError::InvalidConfig("a segment has no sampled paths".into()));
            }
            let k = seg.paths.len() as f64;
            for p in &seg.paths {
                let st = path_stats(p, &seg.start)?;
                s.transitions += st.transitions as f64 / k;
                s.births += st.births as f64 / k;
                s.from_delete += st.from_delete as f64 / k;
                s.deaths += st.deaths as f64 / k;
                s.from_add += st.from_add as f64 / k;
            }
        }
    }
    if !lines.is_empty() {
        let h = lines.len() as f64;
        s.transitions /= h;
        s.births /= h;
        s.from_delete /= h;
        s.deaths /= h;
        s.from_add /= h;
    }
    if !confusion.is_empty() {
        let k = confusion.len() as f64;
        for cc in confusion {
            s.a += cc.a as f64 / k;
            s.b += cc.b as f64 / k;
            s.c += cc.c as f64 / k;
            s.d += cc.d as f64 / k;
        }
    }
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MStep {
    pub params: ModelParams,
    /// Parameters left at their previous value for lack of data.
    pub held: Vec<String>,
}

/// Closed-form maximiser, clamped to `[eps, 1-eps]` for `p, q`,
/// `[eps, 0.5-eps]` for the error rates and `[eps, inf)` for `gamma`.
pub fn m_step(stats: &SufficientStats, duration: f64, previous: &ModelParams, eps: f64) -> MStep {
    let mut held = Vec::new();
    let mut ratio = |name: &str, num: f64, den: f64, prev: f64| {
        if den > 0.0 {
            num / den
        } else {
            held.push(name.to_string());
            prev
        }
    };
    let p = ratio("p", stats.births, stats.from_delete, previous.process.p);
    let q = ratio("q", stats.deaths, stats.from_add, previous.process.q);
    let gamma = ratio("gamma", stats.transitions, duration, previous.process.gamma);
    let alpha = ratio("alpha", stats.c, stats.c + stats.d, previous.noise.alpha);
    let beta = ratio("beta", stats.b, stats.a + stats.b, previous.noise.beta);
    let unit = |x: f64| x.clamp(eps, 1.0 - eps);
    let half = |x: f64| x.clamp(eps, 0.5 - eps);
    MStep {
        params: ModelParams {
            process: ProcessParams {
                p: unit(p),
                q: unit(q),
                gamma: gamma.max(eps),
            },
            noise: NoiseParams {
                alpha: half(alpha),
                beta: half(beta),
            },
        },
        held,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    /// Particles per filter pass.
    pub particles: usize,
    /// Ancestral lines used for the process-parameter statistics.
    pub lines: usize,
    /// Sampled paths per interval of each line.
    pub paths_per_segment: usize,
    /// Ancestral lines used for the error-rate statistics.
    pub noise_lines: usize,
    pub max_iters: usize,
    /// Stop once the relative L2 change of the estimate drops below this.
    pub tol: f64,
    pub burn_in: Option<usize>,
    pub thin: usize,
    pub init: ModelParams,
    pub epsilon: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            particles: 50_000,
            lines: 10,
            paths_per_segment: 10,
            noise_lines: 40_000,
            max_iters: 20,
            tol: 0.10,
            burn_in: None,
            thin: 5,
            init: ModelParams {
                process: ProcessParams {
                    p: 0.5,
                    q: 0.5,
                    gamma: 0.5,
                },
                noise: NoiseParams {
                    alpha: 0.45,
                    beta: 0.45,
                },
            },
            epsilon: 1e-6,
        }
    }
}

impl EmConfig {
    fn validate(&self) -> Result<(), InferenceError> {
        let bad = |what: &str| Err(InferenceError::InvalidConfig(what.to_string()));
        if self.particles == 0 {
            return bad("particles must be positive");
        }
        if self.lines == 0 || self.paths_per_segment == 0 || self.noise_lines == 0 {
            return bad("line and path counts must be positive");
        }
        if self.thin == 0 {
            return bad("thin must be positive");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be positive");
        }
        if !(self.tol > 0.0) {
            return bad("tol must be positive");
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.25) {
            return bad("epsilon must lie in (0, 0.25)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub params: ModelParams,
    pub relative_change: f64,
    pub held: Vec<String>,
    pub stats: SufficientStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmFit {
    pub params: ModelParams,
    pub converged: bool,
    pub iterations: Vec<IterationRecord>,
}

/// One E-step and M-step from `current`, with all randomness derived from
/// `seed`.
pub fn em_iteration(
    series: &NetworkSeries,
    regime: Regime,
    config: &EmConfig,
    current: &ModelParams,
    seed: u64,
) -> Result<(SufficientStats, MStep), InferenceError> {
    let run = run_filter(series, current, regime, config.particles, derive_seed(seed, &[stream::FILTER]), true)?;
    let cloud = run.cloud.expect("history requested");
    let mut rng = derive_rng(seed, &[stream::LINES]);
    let lines = draw_ancestral_lines(&cloud, config.lines, &mut rng)?;
    let noise_lines = draw_ancestral_lines(&cloud, config.noise_lines, &mut rng)?;
    let confusion: Vec<ConfusionCounts> = noise_lines.iter().map(|l| line_confusion(&cloud, l)).collect();

    let mcmc = McmcConfig {
        samples: config.paths_per_segment,
        burn_in: config.burn_in,
        thin: config.thin,
    };
    let segments = series.len() - 1;
    let tasks: Vec<(usize, usize)> = (0..lines.len())
        .flat_map(|h| (0..segments).map(move |m| (h, m)))
        .collect();
    let sampled: Vec<SegmentPaths> = tasks
        .par_iter()
        .map(|&(h, m)| -> Result<SegmentPaths, InferenceError> {
            let line = &lines[h];
            let start = cloud.state(m, line[m]);
            let end = cloud.state(m + 1, line[m + 1]);
            let mut r = derive_rng(seed, &[stream::MCMC, h as u64, m as u64]);
            let paths = mcmc_path_sampler(&start, &end, series.gap(m + 1), &current.process, regime, &mcmc, &mut r)?;
            Ok(SegmentPaths { start, paths })
        })
        .collect::<Result<_, _>>()?;
    let mut grouped: Vec<Vec<SegmentPaths>> = Vec::with_capacity(lines.len());
    let mut it = sampled.into_iter();
    for _ in 0..lines.len() {
        grouped.push(it.by_ref().take(segments).collect());
    }
    let stats = accumulate_stats(&grouped, &confusion)?;
    let step = m_step(&stats, series.duration(), current, config.epsilon);
    Ok((stats, step))
}

/// Iterates EM from `config.init` until the relative change criterion or
/// `config.max_iters`.
pub fn em_fit<R: Rng + ?Sized>(
    series: &NetworkSeries,
    regime: Regime,
    config: &EmConfig,
    rng: &mut R,
) -> Result<EmFit, InferenceError> {
    config.validate()?;
    series.require_len(2)?;
    let base = rng.next_u64();
    let mut current = config.init;
    let mut iterations = Vec::new();
    let mut converged = false;
    for iteration in 0..config.max_iters {
        let seed = derive_seed(base, &[iteration as u64]);
        let (stats, step) = em_iteration(series, regime, config, &current, seed)?;
        let change = step.params.relative_change(&current);
        current = step.params;
        iterations.push(IterationRecord {
            iteration: iteration + 1,
            params: current,
            relative_change: change,
            held: step.held,
            stats,
        });
        if change < config.tol {
            converged = true;
            break;
        }
    }
    Ok(EmFit {
        params: current,
        converged,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{DynGraph, Edge};
    use crate::percolation::Direction;
    use crate::seed::rng_from_seed;
    use crate::series::simulate_series;

    fn start() -> LatentState {
        LatentState::new(Direction::Add, DynGraph::from_edges(4, [(0, 1)]).unwrap())
    }

    fn pair_path(len: usize) -> SamplePath {
        let e = Edge::new(2, 3).unwrap();
        SamplePath::from_toggles(&start().graph, &vec![e; len]).unwrap()
    }

    #[test]
    fn empty_paths_give_zero_transitions() {
        let lines = vec![vec![SegmentPaths {
            start: start(),
            paths: vec![SamplePath::empty()],
        }]];
        let s = accumulate_stats(&lines, &[]).unwrap();
        assert_eq!(s.transitions, 0.0);
    }

    #[test]
    fn path_average_is_arithmetic_mean() {
        let lines = vec![vec![SegmentPaths {
            start: start(),
            paths: vec![pair_path(2), pair_path(4)],
        }]];
        let s = accumulate_stats(&lines, &[]).unwrap();
        assert_eq!(s.transitions, 3.0);
    }

    #[test]
    fn single_path_gives_plug_in_counts() {
        let p = pair_path(2);
        let lines = vec![vec![SegmentPaths {
            start: start(),
            paths: vec![p.clone()],
        }]];
        let s = accumulate_stats(&lines, &[ConfusionCounts { a: 1, b: 2, c: 3, d: 4 }]).unwrap();
        let st = path_stats(&p, &start()).unwrap();
        assert_eq!(s.transitions, st.transitions as f64);
        assert_eq!(s.from_add, st.from_add as f64);
        assert_eq!(s.deaths, st.deaths as f64);
        assert_eq!((s.a, s.b, s.c, s.d), (1.0, 2.0, 3.0, 4.0));
    }

    #[test]
    fn m_step_ratios_and_clamps() {
        let prev = EmConfig::default().init;
        let stats = SufficientStats {
            transitions: 100.0,
            births: 5.0,
            from_delete: 5.0,
            deaths: 1.0,
            from_add: 4.0,
            a: 9.0,
            b: 1.0,
            c: 2.0,
            d: 8.0,
        };
        let out = m_step(&stats, 50.0, &prev, 1e-6);
        assert!(out.held.is_empty());
        assert!((out.params.noise.alpha - 0.2).abs() < 1e-15);
        assert!((out.params.noise.beta - 0.1).abs() < 1e-15);
        assert!((out.params.process.gamma - 2.0).abs() < 1e-15);
        assert_eq!(out.params.process.p, 1.0 - 1e-6);
        assert!((out.params.process.q - 0.25).abs() < 1e-15);
    }

    #[test]
    fn m_step_holds_on_zero_denominator() {
        let prev = EmConfig::default().init;
        let out = m_step(&SufficientStats::default(), 10.0, &prev, 1e-6);
        assert_eq!(out.held, vec!["p", "q", "alpha", "beta"]);
        assert_eq!(out.params.process.p, prev.process.p);
        assert_eq!(out.params.process.gamma, 1e-6);
    }

    #[test]
    fn em_requires_two_snapshots() {
        let s = NetworkSeries::new(vec![1.0], vec![DynGraph::empty(3).unwrap()]).unwrap();
        let r = em_fit(&s, Regime::Er, &EmConfig::default(), &mut rng_from_seed(1));
        assert!(matches!(r, Err(InferenceError::Series(_))));
    }

    #[test]
    fn small_fit_stays_in_the_parameter_box() {
        let mut rng = rng_from_seed(2);
        let truth = ModelParams::new(0.7, 0.3, 2.0, 0.03, 0.01).unwrap();
        let sim = simulate_series(Regime::Er, DynGraph::empty(6).unwrap(), &truth.process, &truth.noise, 0.6, 12, &mut rng)
            .unwrap();
        let cfg = EmConfig {
            particles: 300,
            noise_lines: 300,
            lines: 4,
            paths_per_segment: 4,
            max_iters: 3,
            ..EmConfig::default()
        };
        let fit = em_fit(&sim.series, Regime::Er, &cfg, &mut rng).unwrap();
        assert!(!fit.iterations.is_empty());
        let p = fit.params;
        assert!(p.process.p > 0.0 && p.process.p < 1.0);
        assert!(p.process.q > 0.0 && p.process.q < 1.0);
        assert!(p.process.gamma > 0.0);
        assert!(p.noise.alpha > 0.0 && p.noise.alpha < 0.5);
        assert!(p.noise.beta > 0.0 && p.noise.beta < 0.5);
        let again = em_fit(&sim.series, Regime::Er, &cfg, &mut rng_from_seed(9)).unwrap();
        let same = em_fit(&sim.series, Regime::Er, &cfg, &mut rng_from_seed(9)).unwrap();
        assert_eq!(again, same);
    }
}

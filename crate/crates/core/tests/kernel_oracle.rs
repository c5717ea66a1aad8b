mod common;

use common::{all_states, enumerate_paths, enumerated_interval_matrix, poisson_pmf};
use rghmm_core::kernel::{exact_embedded_kernel, exact_interval_kernel};
use rghmm_core::numeric::poisson_truncation;
use rghmm_core::percolation::simulate_interval;
use rghmm_core::seed::rng_from_seed;
use rghmm_core::{Direction, DynGraph, LatentState, ProcessParams, Regime};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn params() -> ProcessParams {
    ProcessParams::new(0.7, 0.3, 2.0).unwrap()
}

#[test]
fn one_step_kernel_matches_brute_force() {
    for n in 2..=4 {
        for regime in Regime::ALL {
            let k = exact_embedded_kernel(n, regime, &params()).unwrap();
            let states = all_states(n);
            for (i, s) in states.iter().enumerate() {
                let mut row = vec![0.0; states.len()];
                for p in enumerate_paths(s, 1, regime, &params()) {
                    row[states.iter().position(|x| *x == p.end).unwrap()] += p.prob;
                }
                for (j, v) in row.iter().enumerate() {
                    assert!((k[(i, j)] - v).abs() < 1e-14, "n={n} {regime:?} ({i},{j})");
                }
            }
        }
    }
}

#[test]
fn interval_kernel_matches_enumerated_paths() {
    let mean = 2.0 * 0.5;
    for regime in Regime::ALL {
        let k = exact_interval_kernel(3, regime, &params(), 0.5, 7).unwrap();
        let e = enumerated_interval_matrix(3, regime, &params(), mean, 7);
        for (i, row) in e.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert!((k[(i, j)] - v).abs() < 1e-13, "{regime:?} ({i},{j})");
            }
        }
    }
}

/// Rows of the interval kernel against simulated end-state frequencies,
/// every entry within three binomial standard deviations.
fn monte_carlo_rows(regime: Regime, starts: &[LatentState], runs: usize, seed: u64) {
    let (gamma, dt) = (2.0, 0.5);
    let pr = ProcessParams::new(0.7, 0.3, gamma).unwrap();
    let r_max = poisson_truncation(gamma * dt, 1e-15);
    let k = exact_interval_kernel(3, regime, &pr, dt, r_max).unwrap();
    let states = all_states(3);
    let mut rng = rng_from_seed(seed);
    for start in starts {
        let i = states.iter().position(|x| x == start).unwrap();
        let mut counts = vec![0usize; states.len()];
        for _ in 0..runs {
            let mut s = start.clone();
            simulate_interval(&mut s, dt, regime, &pr, &mut rng, false).unwrap();
            counts[s.direction.bit() as usize * 8 + s.graph.pair_mask() as usize] += 1;
        }
        for (j, &c) in counts.iter().enumerate() {
            let p = k[(i, j)];
            let sd = (p * (1.0 - p) / runs as f64).sqrt();
            let f = c as f64 / runs as f64;
            assert!((f - p).abs() <= 3.0 * sd + 1e-12, "{regime:?} row {i} col {j}: {f} vs {p}");
        }
    }
}

#[test]
fn er_interval_kernel_matches_simulation() {
    let starts = [
        LatentState::new(Direction::Add, DynGraph::empty(3).unwrap()),
        LatentState::new(Direction::Delete, DynGraph::from_edges(3, [(0, 1), (1, 2)]).unwrap()),
    ];
    monte_carlo_rows(Regime::Er, &starts, 1_000_000, 11);
}

#[test]
fn pr_interval_kernel_matches_simulation() {
    let starts = [
        LatentState::new(Direction::Add, DynGraph::from_edges(3, [(0, 1)]).unwrap()),
        LatentState::new(Direction::Delete, DynGraph::complete(3).unwrap()),
    ];
    monte_carlo_rows(Regime::Pr, &starts, 500_000, 12);
}

#[test]
fn jump_counts_are_poisson() {
    let (gamma, dt, runs) = (2.0, 1.5, 200_000usize);
    let pr = ProcessParams::new(0.7, 0.3, gamma).unwrap();
    let mut rng = rng_from_seed(13);
    let top = 8;
    let mut counts = vec![0usize; top + 1];
    for _ in 0..runs {
        let mut s = LatentState::new(Direction::Add, DynGraph::empty(5).unwrap());
        let out = simulate_interval(&mut s, dt, Regime::Pr, &pr, &mut rng, false).unwrap();
        counts[out.transitions.min(top)] += 1;
    }
    let mean = gamma * dt;
    let mut stat = 0.0;
    let mut head = 0.0;
    for (r, &c) in counts.iter().enumerate() {
        let p = if r < top {
            poisson_pmf(r, mean)
        } else {
            1.0 - head
        };
        head += p;
        let e = p * runs as f64;
        stat += (c as f64 - e).powi(2) / e;
    }
    let pval = 1.0 - ChiSquared::new(top as f64).unwrap().cdf(stat);
    assert!(pval > 0.01, "chi-square {stat}, p = {pval}");
}

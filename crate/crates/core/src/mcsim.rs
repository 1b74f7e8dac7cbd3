//! Monte Carlo estimates used to cross-check the exact pipelines.
//!
//! Every random stream is derived from `(seed, replica, cycle)`, so results do not
//! depend on thread count or scheduling order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::cell::{build_two_cell, ValidatedCell};
use crate::graph::AbsorbingWalkGraph;

/// Hard limit on jumps within one excursion.
pub const MAX_JUMPS_PER_CYCLE: u64 = 1_000_000_000;

/// Critical value of the Anderson-Darling statistic at level 0.01 for a fully specified law.
pub const AD_CRITICAL_001: f64 = 3.857;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("cycle {cycle} exceeded {MAX_JUMPS_PER_CYCLE} jumps")]
    CycleCapExceeded { cycle: u64 },
    #[error("invalid simulation setting: {0}")]
    InvalidConfig(&'static str),
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent generator for the given coordinates.
pub fn stream(seed: u64, replica: u64, cycle: u64) -> ChaCha8Rng {
    let mut r = replica.wrapping_mul(0xD1B5_4A32_D192_ED03);
    let mut s = seed ^ splitmix64(&mut r);
    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut s).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(cycle);
    rng
}

/// One excursion: its displacement in cells and its duration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RenewalSample {
    pub direction: i8,
    pub duration: f64,
}

/// Law of the pair `(W, tau)` driving a cumulative process.
pub trait CycleLaw: Sync {
    fn draw(&self, rng: &mut ChaCha8Rng, cycle: u64) -> Result<(f64, f64), SimError>;
}

/// Gillespie simulation of excursions from `0_*` on the two-cell graph.
#[derive(Clone, Debug)]
pub struct CycleSimulator {
    exit: Vec<f64>,
    /// Cumulative jump probabilities and targets per state.
    jumps: Vec<Vec<(f64, usize)>>,
    start: usize,
    minus: usize,
    plus: usize,
}

impl CycleSimulator {
    pub fn new(cell: &ValidatedCell<f64>) -> Self {
        let tc = build_two_cell(cell);
        Self::from_graph(&tc.graph, tc.minus, tc.plus)
    }

    /// Excursions on an arbitrary graph from its start state until `minus` or `plus` is hit.
    pub fn from_graph(g: &AbsorbingWalkGraph<f64>, minus: usize, plus: usize) -> Self {
        let mut exit = Vec::with_capacity(g.len());
        let mut jumps = Vec::with_capacity(g.len());
        for x in 0..g.len() {
            let total = g.exit_rate(x);
            let mut acc = 0.0;
            let cum = g
                .out_edges(x)
                .iter()
                .map(|&(y, r)| {
                    acc += r / total;
                    (acc, y)
                })
                .collect();
            exit.push(total);
            jumps.push(cum);
        }
        CycleSimulator { exit, jumps, start: g.start(), minus, plus }
    }

    pub fn run<R: Rng>(&self, rng: &mut R, cycle: u64) -> Result<RenewalSample, SimError> {
        let mut x = self.start;
        let mut t = 0.0;
        for _ in 0..MAX_JUMPS_PER_CYCLE {
            let e: f64 = rng.sample(Exp1);
            t += e / self.exit[x];
            let u: f64 = rng.gen();
            let cum = &self.jumps[x];
            x = cum.iter().find(|&&(c, _)| u < c).unwrap_or(cum.last().unwrap()).1;
            if x == self.plus {
                return Ok(RenewalSample { direction: 1, duration: t });
            }
            if x == self.minus {
                return Ok(RenewalSample { direction: -1, duration: t });
            }
        }
        Err(SimError::CycleCapExceeded { cycle })
    }
}

impl CycleLaw for CycleSimulator {
    fn draw(&self, rng: &mut ChaCha8Rng, cycle: u64) -> Result<(f64, f64), SimError> {
        self.run(rng, cycle).map(|s| (s.direction as f64, s.duration))
    }
}

/// Resamples recorded excursions uniformly.
pub struct EmpiricalCycles(pub Vec<RenewalSample>);

impl CycleLaw for EmpiricalCycles {
    fn draw(&self, rng: &mut ChaCha8Rng, _cycle: u64) -> Result<(f64, f64), SimError> {
        let s = self.0[rng.gen_range(0..self.0.len())];
        Ok((s.direction as f64, s.duration))
    }
}

/// Simulates `n_cycles` independent excursions; cycle `i` uses stream `(seed, 0, i)`.
pub fn simulate_cycles(cell: &ValidatedCell<f64>, n_cycles: u64, seed: u64) -> Result<Vec<RenewalSample>, SimError> {
    let sim = CycleSimulator::new(cell);
    (0..n_cycles).into_par_iter().map(|i| sim.run(&mut stream(seed, 0, i), i)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EstimateWithError {
    pub value: f64,
    pub std_error: f64,
    pub n_cycles: usize,
    pub seed: u64,
}

fn ratio_estimates(samples: &[RenewalSample], idx: impl Iterator<Item = usize> + Clone) -> (f64, f64) {
    let n = idx.clone().count() as f64;
    let (sw, st) = idx.clone().fold((0.0, 0.0), |(a, b), i| (a + samples[i].direction as f64, b + samples[i].duration));
    let v = sw / st;
    let (mw, mt) = (sw / n, st / n);
    let ss: f64 = idx
        .map(|i| {
            let d = samples[i].direction as f64 - v * samples[i].duration - (mw - v * mt);
            d * d
        })
        .sum();
    (v, ss / (n - 1.0) / mt)
}

/// Number of bootstrap resamples used for standard errors.
pub const BOOTSTRAP_RESAMPLES: u64 = 200;

/// Renewal-reward estimates of the velocity and diffusion coefficient, with bootstrap errors.
pub fn estimate_v_sigma(samples: &[RenewalSample], seed: u64) -> Result<(EstimateWithError, EstimateWithError), SimError> {
    let n = samples.len();
    if n < 2 {
        return Err(SimError::InvalidConfig("need at least two cycles"));
    }
    let (v, d) = ratio_estimates(samples, 0..n);
    let boot: Vec<(f64, f64)> = (0..BOOTSTRAP_RESAMPLES)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream(seed, b, u64::MAX);
            let idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            ratio_estimates(samples, idx.iter().copied())
        })
        .collect();
    let sd = |f: fn(&(f64, f64)) -> f64| {
        let m = boot.iter().map(f).sum::<f64>() / boot.len() as f64;
        (boot.iter().map(|x| (f(x) - m).powi(2)).sum::<f64>() / (boot.len() - 1) as f64).sqrt()
    };
    let est = |value, std_error| EstimateWithError { value, std_error, n_cycles: n, seed };
    Ok((est(v, sd(|x| x.0)), est(d, sd(|x| x.1))))
}

/// Increasing observation times.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeGrid(pub Vec<f64>);

impl TimeGrid {
    /// `n` equally spaced points ending at `t_max`.
    pub fn uniform(t_max: f64, n: usize) -> Self {
        TimeGrid((1..=n).map(|k| t_max * k as f64 / n as f64).collect())
    }
}

/// `Z_t = W_1 + ... + W_{N(t)}`, where `N(t)` counts the cycles completed by time `t`.
///
/// Row `r` holds replica `r` on the grid; replica `r` draws from stream `(seed, r, 0)`.
pub fn simulate_time_change<L: CycleLaw>(
    law: &L,
    grid: &TimeGrid,
    n_replicas: u64,
    seed: u64,
) -> Result<Vec<Vec<f64>>, SimError> {
    if grid.0.windows(2).any(|w| w[1] < w[0]) || grid.0.first().is_some_and(|&t| t < 0.0) {
        return Err(SimError::InvalidConfig("time grid must be non-negative and increasing"));
    }
    (0..n_replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(seed, r, 0);
            let mut cycle = 0u64;
            let mut z = 0.0;
            let (mut w, tau) = law.draw(&mut rng, cycle)?;
            let mut end = tau;
            let mut row = Vec::with_capacity(grid.0.len());
            for &t in &grid.0 {
                while end <= t {
                    z += w;
                    cycle += 1;
                    let (nw, nt) = law.draw(&mut rng, cycle)?;
                    w = nw;
                    end += nt;
                }
                row.push(z);
            }
            Ok(row)
        })
        .collect()
}

/// Anderson-Darling statistic of `sample` against the standard normal law.
pub fn anderson_darling_normal(sample: &[f64]) -> f64 {
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let mut y = sample.to_vec();
    y.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = y.len();
    let nf = n as f64;
    let lo = 1e-300;
    let s: f64 = (0..n)
        .map(|i| {
            let f = std.cdf(y[i]).clamp(lo, 1.0 - 1e-16);
            let g = std.cdf(y[n - 1 - i]).clamp(lo, 1.0 - 1e-16);
            (2.0 * i as f64 + 1.0) * (f.ln() + (1.0 - g).ln())
        })
        .sum();
    -nf - s / nf
}

/// Fixed-time central limit check of a cumulative process against known `v` and `sigma_sq`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CltReport {
    pub t: f64,
    pub n_replicas: u64,
    pub seed: u64,
    pub v_exact: f64,
    pub sigma_sq_exact: f64,
    pub mean_rate: f64,
    pub mean_rate_se: f64,
    pub mean_z_score: f64,
    pub variance: f64,
    pub variance_rel_err: f64,
    pub ad_statistic: f64,
    pub mean_ok: bool,
    pub variance_ok: bool,
    pub normal_ok: bool,
}

impl CltReport {
    pub fn passed(&self) -> bool {
        self.mean_ok && self.variance_ok && self.normal_ok
    }
}

/// Relative tolerance on the variance of `(Z_t - vt) / sqrt(t)`.
pub const CLT_VARIANCE_TOL: f64 = 0.05;

pub fn clt_check<L: CycleLaw>(
    law: &L,
    v: f64,
    sigma_sq: f64,
    t: f64,
    n_replicas: u64,
    seed: u64,
) -> Result<CltReport, SimError> {
    if n_replicas < 2 || !(t > 0.0) {
        return Err(SimError::InvalidConfig("need t > 0 and at least two replicas"));
    }
    let z: Vec<f64> = simulate_time_change(law, &TimeGrid(vec![t]), n_replicas, seed)?
        .into_iter()
        .map(|row| row[0])
        .collect();
    let n = z.len() as f64;
    let rates: Vec<f64> = z.iter().map(|&x| x / t).collect();
    let mean_rate = rates.iter().sum::<f64>() / n;
    let mean_rate_se = (rates.iter().map(|r| (r - mean_rate).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
    let centred: Vec<f64> = z.iter().map(|&x| (x - v * t) / t.sqrt()).collect();
    // shifted by the first value so that identical samples give exactly zero
    let shifted: Vec<f64> = centred.iter().map(|c| c - centred[0]).collect();
    let sm = shifted.iter().sum::<f64>() / n;
    let variance = shifted.iter().map(|c| (c - sm).powi(2)).sum::<f64>() / (n - 1.0);
    let (ad_statistic, variance_rel_err) = if sigma_sq > 0.0 {
        let sd = sigma_sq.sqrt();
        let ad = anderson_darling_normal(&centred.iter().map(|c| c / sd).collect::<Vec<_>>());
        (ad, (variance - sigma_sq).abs() / sigma_sq)
    } else {
        // degenerate limit: no normality test, the error is absolute
        (0.0, variance)
    };
    let gap = mean_rate - v;
    let mean_z_score = if mean_rate_se > 0.0 {
        gap / mean_rate_se
    } else if gap.abs() <= 1e-12 * v.abs().max(1.0) {
        0.0
    } else {
        gap.signum() * f64::INFINITY
    };
    Ok(CltReport {
        t,
        n_replicas,
        seed,
        v_exact: v,
        sigma_sq_exact: sigma_sq,
        mean_rate,
        mean_rate_se,
        mean_z_score,
        variance,
        variance_rel_err,
        ad_statistic,
        mean_ok: mean_z_score.abs() <= 3.0,
        variance_ok: variance_rel_err <= CLT_VARIANCE_TOL,
        normal_ok: ad_statistic < AD_CRITICAL_001,
    })
}

/// Runs [`clt_check`] and, if it fails, once more on a fresh derived seed.
pub fn clt_check_with_retry<L: CycleLaw>(
    law: &L,
    v: f64,
    sigma_sq: f64,
    t: f64,
    n_replicas: u64,
    seed: u64,
) -> Result<Vec<CltReport>, SimError> {
    let first = clt_check(law, v, sigma_sq, t, n_replicas, seed)?;
    if first.passed() {
        return Ok(vec![first]);
    }
    let mut s = seed;
    let retry_seed = splitmix64(&mut s);
    let second = clt_check(law, v, sigma_sq, t, n_replicas, retry_seed)?;
    Ok(vec![first, second])
}

/// Velocity from one long trajectory, with a standard error from `n_batches` equal time batches.
pub fn batch_means_velocity<L: CycleLaw>(law: &L, t_total: f64, n_batches: usize, seed: u64) -> Result<EstimateWithError, SimError> {
    if n_batches < 2 {
        return Err(SimError::InvalidConfig("need at least two batches"));
    }
    let row = simulate_time_change(law, &TimeGrid::uniform(t_total, n_batches), 1, seed)?.remove(0);
    let len = t_total / n_batches as f64;
    let mut prev = 0.0;
    let rates: Vec<f64> = row
        .iter()
        .map(|&z| {
            let r = (z - prev) / len;
            prev = z;
            r
        })
        .collect();
    let nb = n_batches as f64;
    let m = rates.iter().sum::<f64>() / nb;
    let var = rates.iter().map(|r| (r - m).powi(2)).sum::<f64>() / (nb - 1.0);
    Ok(EstimateWithError { value: m, std_error: (var / nb).sqrt(), n_cycles: 0, seed })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixed;

    impl CycleLaw for Fixed {
        fn draw(&self, _: &mut ChaCha8Rng, _: u64) -> Result<(f64, f64), SimError> {
            Ok((1.0, 0.5))
        }
    }

    #[test]
    fn deterministic_cycles_count_exactly() {
        let z = simulate_time_change(&Fixed, &TimeGrid(vec![0.4, 0.5, 2.2]), 3, 1).unwrap();
        for row in z {
            assert_eq!(row, vec![0.0, 1.0, 4.0]);
        }
    }

    #[test]
    fn streams_are_distinct_and_reproducible() {
        let a: u64 = stream(7, 0, 0).gen();
        let b: u64 = stream(7, 0, 1).gen();
        let c: u64 = stream(7, 1, 0).gen();
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, stream(7, 0, 0).gen::<u64>());
    }

    #[test]
    fn ad_statistic_small_for_normal_quantiles() {
        let std = Normal::new(0.0, 1.0).unwrap();
        let n = 500;
        let q: Vec<f64> = (0..n).map(|i| std.inverse_cdf((i as f64 + 0.5) / n as f64)).collect();
        assert!(anderson_darling_normal(&q) < 0.1);
        let shifted: Vec<f64> = q.iter().map(|x| x + 1.0).collect();
        assert!(anderson_darling_normal(&shifted) > AD_CRITICAL_001);
    }
}

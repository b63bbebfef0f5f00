//! Reference answers computed without any polynomial roots: dense linear
//! solves on the explicit transition matrix, power iteration, and seeded
//! Monte Carlo simulation of the raw (possibly lazy) chain.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{LeapError, Result};
use crate::params::LeapParams;

/// Largest barrier accepted by the dense solver.
pub const DENSE_CAP: usize = 20_000;
pub const POWER_TOL: f64 = 1e-13;
pub const POWER_MAX_ITER: usize = 10_000_000;
pub const GENERATOR: &str = "ChaCha8Rng (rand_chacha 0.9), seed_from_u64(seed), stream = worker index";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Mode {
    Absorbing,
    ReflectingTwoSided,
    /// States `0..=N` of the one-sided chain; up-moves past `N` are rejected.
    ReflectingOneSidedTruncated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    pub entries: DMatrix<f64>,
    pub mode: Mode,
}

impl TransitionMatrix {
    pub fn n(&self) -> usize {
        self.entries.nrows() - 1
    }

    pub fn max_row_sum_error(&self) -> f64 {
        self.entries.row_iter().map(|r| (r.sum() - 1.0).abs()).fold(0.0, f64::max)
    }
}

/// Explicit transition matrix of the lazy chain on `{0, ..., N}`.
pub fn build_transition_matrix(params: &LeapParams, n: usize, mode: Mode) -> Result<TransitionMatrix> {
    let profile = params.step_profile();
    let min = profile.k_p + profile.k_q;
    if n < min {
        return Err(LeapError::BarrierTooNarrow { n, min });
    }
    if n > DENSE_CAP {
        return Err(LeapError::DenseCapExceeded { n, cap: DENSE_CAP });
    }
    let mut m = DMatrix::<f64>::zeros(n + 1, n + 1);
    let (p, q, hold) = (params.raw_p(), params.raw_q(), params.hold());
    for i in 0..=n {
        if mode == Mode::Absorbing && (i == 0 || i == n) {
            m[(i, i)] = 1.0;
            continue;
        }
        m[(i, i)] += hold;
        for s in 1..=params.k() {
            let up = i + s;
            match mode {
                Mode::ReflectingOneSidedTruncated if up > n => m[(i, i)] += p[s - 1],
                _ => m[(i, up.min(n))] += p[s - 1],
            }
            m[(i, i.saturating_sub(s))] += q[s - 1];
        }
    }
    let tm = TransitionMatrix { entries: m, mode };
    debug_assert!(tm.max_row_sum_error() <= 1e-12);
    Ok(tm)
}

/// `u` from the upper-barrier column of `(I - Q)^-1 R` and `v` from
/// `(I - Q)^-1 1`, with barrier values appended.
pub fn solve_absorption(pm: &TransitionMatrix) -> Result<(Vec<f64>, Vec<f64>)> {
    if pm.mode != Mode::Absorbing {
        return Err(LeapError::InvalidInput("absorption needs an absorbing transition matrix".into()));
    }
    let n = pm.n();
    let interior = n - 1;
    let mut a = DMatrix::<f64>::identity(interior, interior);
    let mut rhs = DMatrix::<f64>::zeros(interior, 2);
    for r in 0..interior {
        for c in 0..interior {
            a[(r, c)] -= pm.entries[(r + 1, c + 1)];
        }
        rhs[(r, 0)] = pm.entries[(r + 1, n)];
        rhs[(r, 1)] = 1.0;
    }
    let sol = a.lu().solve(&rhs).ok_or(LeapError::SingularSystem)?;
    let mut u = vec![0.0];
    let mut v = vec![0.0];
    u.extend(sol.column(0).iter());
    v.extend(sol.column(1).iter());
    u.push(1.0);
    v.push(0.0);
    Ok((u, v))
}

/// Stationary vector by iterating `pi <- pi P` from the uniform law.
pub fn power_iteration_stationary(pm: &TransitionMatrix, tol: f64) -> Result<Vec<f64>> {
    if pm.mode == Mode::Absorbing {
        return Err(LeapError::InvalidInput("power iteration needs a reflecting transition matrix".into()));
    }
    let size = pm.entries.nrows();
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); size];
    for i in 0..size {
        for j in 0..size {
            let w = pm.entries[(i, j)];
            if w != 0.0 {
                cols[j].push((i, w));
            }
        }
    }
    let mut pi = DVector::from_element(size, 1.0 / size as f64);
    let mut next = DVector::zeros(size);
    let mut gap = f64::INFINITY;
    for _ in 0..POWER_MAX_ITER {
        for (j, col) in cols.iter().enumerate() {
            next[j] = col.iter().map(|&(i, w)| pi[i] * w).sum();
        }
        gap = (&next - &pi).amax();
        std::mem::swap(&mut pi, &mut next);
        if gap < tol {
            let s = pi.sum();
            return Ok(pi.iter().map(|x| x / s).collect());
        }
    }
    Err(LeapError::NoConvergence { iterations: POWER_MAX_ITER, gap })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    /// Absorbing: `[u_hat, v_hat]`. Reflecting: occupation frequency per state.
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_paths: u64,
    pub seed: u64,
    pub worker_count: usize,
    pub generator: String,
    pub horizon: u64,
    /// Absorbing paths still running at the horizon, excluded from the estimates.
    pub horizon_exceeded: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    pub i0: usize,
    pub n_paths: u64,
    pub horizon: Option<u64>,
    pub seed: u64,
    pub workers: usize,
}

/// Horizon scaled to the diffusive (zero drift) or ballistic time to cross `N`.
pub fn default_horizon(params: &LeapParams, n: usize) -> u64 {
    let d = params.drift();
    let nf = n as f64;
    let steps = if params.drift_sign().sign == std::cmp::Ordering::Equal {
        100.0 * nf * nf / d.sigma2
    } else {
        100.0 * nf / d.mu.abs()
    };
    (steps / (1.0 - params.hold())).ceil().min(1e12) as u64
}

/// Inverse-CDF table over the raw step law: `(cumulative, step)`.
fn step_table(params: &LeapParams) -> Vec<(f64, i64)> {
    let mut acc = 0.0;
    let mut t = Vec::new();
    for (j, &w) in params.raw_p().iter().enumerate() {
        acc += w;
        t.push((acc, j as i64 + 1));
    }
    for (j, &w) in params.raw_q().iter().enumerate() {
        acc += w;
        t.push((acc, -(j as i64) - 1));
    }
    t.push((f64::INFINITY, 0));
    t
}

#[inline]
fn draw(table: &[(f64, i64)], rng: &mut ChaCha8Rng) -> i64 {
    let u: f64 = rng.random();
    table.iter().find(|(c, _)| u < *c).map(|t| t.1).unwrap_or(0)
}

#[derive(Default, Clone)]
struct Tally {
    paths: u64,
    exceeded: u64,
    hits: f64,
    time: f64,
    time_sq: f64,
    occupation: Vec<f64>,
    occupation_sq: Vec<f64>,
}

fn run_worker(params: &LeapParams, n: usize, mode: Mode, cfg: &SimConfig, horizon: u64, w: usize) -> Tally {
    let start = cfg.n_paths * w as u64 / cfg.workers as u64;
    let end = cfg.n_paths * (w as u64 + 1) / cfg.workers as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(w as u64);
    let table = step_table(params);
    let mut t = Tally::default();
    let burn_in = horizon / 10;
    for _ in start..end {
        let mut x = cfg.i0 as i64;
        match mode {
            Mode::Absorbing => {
                let mut steps = 0u64;
                while x > 0 && x < n as i64 && steps < horizon {
                    x += draw(&table, &mut rng);
                    steps += 1;
                }
                if x > 0 && x < n as i64 {
                    t.exceeded += 1;
                    continue;
                }
                t.paths += 1;
                if x >= n as i64 {
                    t.hits += 1.0;
                }
                let s = steps as f64;
                t.time += s;
                t.time_sq += s * s;
            }
            Mode::ReflectingTwoSided | Mode::ReflectingOneSidedTruncated => {
                let mut counts: Vec<u64> = Vec::new();
                for step in 0..horizon {
                    let d = draw(&table, &mut rng);
                    let y = x + d;
                    x = if y < 0 {
                        0
                    } else if y > n as i64 {
                        if mode == Mode::ReflectingTwoSided {
                            n as i64
                        } else {
                            x
                        }
                    } else {
                        y
                    };
                    if step >= burn_in {
                        let xi = x as usize;
                        if counts.len() <= xi {
                            counts.resize(xi + 1, 0);
                        }
                        counts[xi] += 1;
                    }
                }
                let kept = (horizon - burn_in) as f64;
                if t.occupation.len() < counts.len() {
                    t.occupation.resize(counts.len(), 0.0);
                    t.occupation_sq.resize(counts.len(), 0.0);
                }
                for (i, c) in counts.iter().enumerate() {
                    let f = *c as f64 / kept;
                    t.occupation[i] += f;
                    t.occupation_sq[i] += f * f;
                }
                t.paths += 1;
            }
        }
    }
    t
}

fn merge(mut a: Tally, b: Tally) -> Tally {
    a.paths += b.paths;
    a.exceeded += b.exceeded;
    a.hits += b.hits;
    a.time += b.time;
    a.time_sq += b.time_sq;
    if a.occupation.len() < b.occupation.len() {
        a.occupation.resize(b.occupation.len(), 0.0);
        a.occupation_sq.resize(b.occupation.len(), 0.0);
    }
    for (i, (o, s)) in b.occupation.iter().zip(&b.occupation_sq).enumerate() {
        a.occupation[i] += o;
        a.occupation_sq[i] += s;
    }
    a
}

fn mean_and_se(sum: f64, sum_sq: f64, count: f64) -> (f64, f64) {
    let mean = sum / count;
    let var = if count > 1.0 { ((sum_sq - count * mean * mean) / (count - 1.0)).max(0.0) } else { 0.0 };
    (mean, (var / count).sqrt())
}

/// Seeded simulation of the raw chain. Paths are split into contiguous
/// blocks, one per worker, and worker results are merged in index order,
/// so the report depends only on `(seed, n_paths, workers)`.
pub fn simulate(params: &LeapParams, n: usize, mode: Mode, cfg: &SimConfig) -> Result<OracleReport> {
    let profile = params.step_profile();
    let min = profile.k_p + profile.k_q;
    if n < min {
        return Err(LeapError::BarrierTooNarrow { n, min });
    }
    if cfg.i0 > n {
        return Err(LeapError::StateOutOfRange { state: cfg.i0, n });
    }
    if cfg.workers == 0 || cfg.n_paths == 0 {
        return Err(LeapError::InvalidInput("simulation needs at least one worker and one path".into()));
    }
    let horizon = cfg.horizon.unwrap_or_else(|| default_horizon(params, n)).max(1);
    let tallies: Vec<Tally> = std::thread::scope(|s| {
        let handles: Vec<_> =
            (0..cfg.workers).map(|w| s.spawn(move || run_worker(params, n, mode, cfg, horizon, w))).collect();
        handles.into_iter().map(|h| h.join().expect("simulation worker panicked")).collect()
    });
    let total = tallies.into_iter().fold(Tally::default(), merge);
    let count = total.paths as f64;
    let (values, stderr) = match mode {
        Mode::Absorbing => {
            if total.paths == 0 {
                return Err(LeapError::ToleranceFailure("every path exceeded the horizon".into()));
            }
            let u = total.hits / count;
            let (v, v_se) = mean_and_se(total.time, total.time_sq, count);
            (vec![u, v], vec![(u * (1.0 - u) / count).sqrt(), v_se])
        }
        _ => total.occupation.iter().zip(&total.occupation_sq).map(|(s, sq)| mean_and_se(*s, *sq, count)).unzip(),
    };
    Ok(OracleReport {
        values,
        stderr,
        n_paths: cfg.n_paths,
        seed: cfg.seed,
        worker_count: cfg.workers,
        generator: GENERATOR.into(),
        horizon,
        horizon_exceeded: total.exceeded,
    })
}

//! Command-line front end.

use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::absorbing::{analyze, AbsorbingSolver};
use crate::error::{LeapError, Result};
use crate::oracle::{self, Mode, SimConfig, DENSE_CAP};
use crate::params::{LeapParams, Prob};
use crate::stationary::{self, classify, DEFAULT_TAIL_TOL};

#[derive(Debug, Parser)]
#[command(name = "randleap", version, about = "Absorption and stationary analysis of random leaps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// Polish roots in double-double arithmetic from the start.
    #[arg(long, global = true)]
    pub extended_precision: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Table,
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct ParamArgs {
    /// Up-step probabilities p_1..p_k, comma separated; accepts "12/38".
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub p: Vec<String>,
    /// Down-step probabilities q_1..q_k.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub q: Vec<String>,
    /// Probability of staying put.
    #[arg(long)]
    pub hold: Option<String>,
    /// JSON file with {"p": [...], "q": [...], "hold": h}, or any JSON output of this tool.
    #[arg(long, conflicts_with_all = ["p", "q", "hold"])]
    pub params: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimMode {
    Absorbing,
    Reflecting,
    OneSided,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Upper absorption probabilities u_i and expected absorption times v_i.
    Absorb {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long = "N")]
        n: usize,
    },
    /// Stationary distribution of the reflecting leap.
    Stationary {
        #[command(flatten)]
        params: ParamArgs,
        /// Upper barrier of the two-sided chain.
        #[arg(long = "N", required_unless_present = "one_sided", conflicts_with = "one_sided")]
        n: Option<usize>,
        /// Reflect at 0 only.
        #[arg(long)]
        one_sided: bool,
        /// Bound on the probability mass dropped by truncation.
        #[arg(long, default_value_t = DEFAULT_TAIL_TOL)]
        tail_tol: f64,
    },
    /// Transience or null recurrence of the unconstrained leap.
    Classify {
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Seeded Monte Carlo simulation.
    Simulate {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long = "N")]
        n: usize,
        /// Starting state (defaults to N/2).
        #[arg(long)]
        i0: Option<usize>,
        #[arg(long, value_enum, default_value_t = SimMode::Absorbing)]
        mode: SimMode,
        #[arg(long, default_value_t = 100_000)]
        paths: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        workers: usize,
        /// Step limit per path.
        #[arg(long)]
        horizon: Option<u64>,
    },
    /// Cross-check the determinant path against the dense solve and simulation.
    Verify {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long = "N")]
        n: usize,
        /// Starting state for the simulation check (defaults to N/2).
        #[arg(long)]
        i0: Option<usize>,
        #[arg(long, default_value_t = 100_000)]
        paths: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        workers: usize,
    },
    /// Time single u_i queries against the dense solve.
    Bench {
        #[command(flatten)]
        params: ParamArgs,
        /// Maximum step size of the built-in leap used when no params are given.
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long = "N-list", value_delimiter = ',', default_values_t = [100usize, 300, 1000, 100_000, 1_000_000])]
        n_list: Vec<usize>,
        /// Repetitions per timing; the median is reported.
        #[arg(long, default_value_t = 101)]
        reps: usize,
    },
    /// Reproduce the column-bet gambler's tables.
    Roulette {
        #[arg(long = "N-list", value_delimiter = ',', default_values_t = [5usize, 10, 15, 20, 25])]
        n_list: Vec<usize>,
        /// Compare against the printed tables and fail on any mismatch.
        #[arg(long)]
        check: bool,
    },
}

/// Column-bet leap: win 1 w.p. 12/38 or 2 w.p. 6/38, lose 1 w.p. 13/38 or 2 w.p. 7/38.
pub fn roulette_params() -> LeapParams {
    LeapParams::from_strs(&["12/38", "6/38"], &["13/38", "7/38"], "0").expect("valid roulette leap")
}

/// Printed values of `u_i` for `N = 5, 10, 15, 20, 25`, indexed by `i = 0..=N`.
/// The `i = 0` entries are the boundary values, which the printed tables omit.
pub const GOLDEN_U: [&[f64]; 5] = [
    &[0.0, 0.1978, 0.3541, 0.5445, 0.7252, 1.0000],
    &[0.0, 0.0829, 0.1490, 0.2272, 0.3098, 0.3996, 0.4968, 0.6010, 0.7170, 0.8297, 1.0000],
    &[
        0.0, 0.0447, 0.0803, 0.1223, 0.1668, 0.2152, 0.2674, 0.3239, 0.3850, 0.4510, 0.5224, 0.5997, 0.6826, 0.7749,
        0.8645, 1.0000,
    ],
    &[
        0.0, 0.0266, 0.0477, 0.0727, 0.0992, 0.1280, 0.1590, 0.1926, 0.2289, 0.2682, 0.3106, 0.3565, 0.4061, 0.4598,
        0.5178, 0.5805, 0.6484, 0.7212, 0.8023, 0.8810, 1.0000,
    ],
    &[
        0.0, 0.0166, 0.0269, 0.0455, 0.0620, 0.0800, 0.0995, 0.1205, 0.1432, 0.1677, 0.1943, 0.2230, 0.2540, 0.2876,
        0.3238, 0.3631, 0.4055, 0.4513, 0.5009, 0.5545, 0.6124, 0.6751, 0.7424, 0.8173, 0.8900, 1.0000,
    ],
];

/// Printed values of `v_i`, laid out as [`GOLDEN_U`].
pub const GOLDEN_V: [&[f64]; 5] = [
    &[0.0, 2.6764, 3.5075, 3.6019, 2.8784, 0.0],
    &[0.0, 5.3096, 8.2208, 10.8523, 12.5231, 13.3454, 13.1845, 12.0244, 9.5941, 6.4972, 0.0],
    &[
        0.0, 7.5377, 12.2248, 16.9560, 20.8465, 24.0806, 26.5333, 28.1613, 28.8924, 28.6540, 27.3721, 24.9425, 21.3471,
        16.2060, 10.4765, 0.0,
    ],
    &[
        0.0, 9.3944, 15.5612, 22.0422, 27.7819, 33.0273, 37.6511, 41.6276, 44.8972, 47.4045, 49.0870, 49.8782, 49.7053,
        48.4906, 46.1478, 42.5925, 37.6988, 31.4618, 23.3795, 14.7939, 0.0,
    ],
    &[
        0.0, 10.9165, 18.2963, 26.2118, 33.4674, 40.3618, 46.7655, 52.6672, 58.0180, 62.7755, 66.8909, 70.3123,
        72.9833, 74.8429, 75.8255, 75.8596, 74.8685, 72.7687, 69.4709, 64.8754, 58.8861, 51.3547, 42.2899, 31.0589,
        19.4157, 0.0,
    ],
];

pub const GOLDEN_N: [usize; 5] = [5, 10, 15, 20, 25];
pub const GOLDEN_TOL: f64 = 5e-5;

/// Half away from zero to four decimals.
pub fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GoldenMismatch {
    pub quantity: char,
    pub n: usize,
    pub i: usize,
    pub printed: f64,
    pub computed: f64,
}

/// Compares computed roulette tables against the printed ones.
pub fn roulette_mismatches(n: usize, u: &[f64], v: &[f64]) -> Vec<GoldenMismatch> {
    let Some(col) = GOLDEN_N.iter().position(|&g| g == n) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for (quantity, golden, got) in [('u', GOLDEN_U[col], u), ('v', GOLDEN_V[col], v)] {
        for (i, (&want, &x)) in golden.iter().zip(got).enumerate() {
            if (round4(x) - want).abs() > GOLDEN_TOL {
                out.push(GoldenMismatch { quantity, n, i, printed: want, computed: x });
            }
        }
    }
    out
}

fn load_params(args: &ParamArgs) -> Result<LeapParams> {
    if let Some(path) = &args.params {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LeapError::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
        let value: Value =
            serde_json::from_str(&text).map_err(|e| LeapError::InvalidInput(format!("params JSON: {e}")))?;
        let record = value.get("params").cloned().unwrap_or(value);
        return LeapParams::from_json(&record.to_string());
    }
    if args.p.is_empty() || args.q.is_empty() {
        return Err(LeapError::InvalidInput("give --p and --q, or --params".into()));
    }
    let parse = |v: &[String]| v.iter().map(|s| s.parse()).collect::<Result<Vec<Prob>>>();
    let hold: Prob = args.hold.as_deref().unwrap_or("0").parse()?;
    LeapParams::from_probs(&parse(&args.p)?, &parse(&args.q)?, &hold)
}

fn warn_near_critical(params: &LeapParams) {
    let s = params.drift_sign();
    let mu = params.drift().mu;
    if s.near_critical || (!s.exact && s.sign == std::cmp::Ordering::Equal && mu != 0.0) {
        eprintln!("warning: near-critical drift mu = {mu:e}; results may be ill-conditioned");
    }
}

fn fmt_table_value(x: f64) -> String {
    format!("{:.4}", round4(x))
}

fn render_rows(format: Format, header: &[&str], rows: &[Vec<f64>], first_is_index: bool) -> String {
    let mut s = String::new();
    match format {
        Format::Csv => {
            let _ = writeln!(s, "{}", header.join(","));
            for r in rows {
                let cells: Vec<String> = r
                    .iter()
                    .enumerate()
                    .map(|(c, x)| if c == 0 && first_is_index { format!("{}", *x as u64) } else { format!("{x:e}") })
                    .collect();
                let _ = writeln!(s, "{}", cells.join(","));
            }
        }
        _ => {
            let _ = writeln!(s, "{}", header.iter().map(|h| format!("{h:>12}")).collect::<String>());
            for r in rows {
                let cells: String = r
                    .iter()
                    .enumerate()
                    .map(|(c, x)| {
                        if c == 0 && first_is_index {
                            format!("{:>12}", *x as u64)
                        } else {
                            format!("{:>12}", fmt_table_value(*x))
                        }
                    })
                    .collect();
                let _ = writeln!(s, "{cells}");
            }
        }
    }
    s
}

fn to_json(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

/// Runs a parsed command, writing its report to `out`. Returns the exit code
/// for outcomes that are reports rather than errors (a failed check).
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<u8> {
    let ext = cli.extended_precision;
    let mut code = 0u8;
    let text = match &cli.command {
        Command::Absorb { params, n } => {
            let params = load_params(params)?;
            warn_near_critical(&params);
            let res = analyze(&params, *n, ext)?;
            match cli.format {
                Format::Json => to_json(&json!({
                    "params": params.to_record(),
                    "N": n,
                    "u": res.u,
                    "v": res.v,
                    "max_imag_residue": res.max_imag_residue,
                    "method": res.method,
                    "clamped": res.clamped,
                    "extended_precision": res.extended_precision,
                })),
                f => {
                    let rows: Vec<Vec<f64>> = (0..=*n).map(|i| vec![i as f64, res.u[i], res.v[i]]).collect();
                    render_rows(f, &["i", "u", "v"], &rows, true)
                }
            }
        }
        Command::Stationary { params, n, one_sided, tail_tol } => {
            let params = load_params(params)?;
            warn_near_critical(&params);
            let res = if *one_sided {
                stationary::stationary_one_sided(&params, *tail_tol, ext)?
            } else {
                stationary::stationary_two_sided(&params, n.expect("clap requires N"), ext)?
            };
            match cli.format {
                Format::Json => to_json(&json!({
                    "params": params.to_record(),
                    "N": n,
                    "one_sided": one_sided,
                    "tail_tol": tail_tol,
                    "pi": res.pi,
                    "residual": res.residual,
                    "tail_bound": res.tail_bound,
                    "support": res.support,
                    "max_imag_residue": res.max_imag_residue,
                })),
                f => {
                    let rows: Vec<Vec<f64>> = res.pi.iter().enumerate().map(|(i, x)| vec![i as f64, *x]).collect();
                    render_rows(f, &["i", "pi"], &rows, true)
                }
            }
        }
        Command::Classify { params } => {
            let params = load_params(params)?;
            warn_near_critical(&params);
            let c = classify(&params);
            let d = params.drift();
            match cli.format {
                Format::Json => to_json(&json!({
                    "params": params.to_record(),
                    "classification": c,
                    "sigma2": d.sigma2,
                })),
                Format::Csv => format!(
                    "verdict,mu,sigma2,has_stationary,exact,near_critical\n{:?},{:e},{:e},{},{},{}\n",
                    c.verdict, c.mu, d.sigma2, c.has_stationary, c.exact, c.near_critical
                ),
                Format::Table => format!(
                    "verdict         {:?}\nmu              {}\nsigma2          {}\nhas_stationary  {}\nexact_sign      {}\nnear_critical   {}\n",
                    c.verdict, c.mu, d.sigma2, c.has_stationary, c.exact, c.near_critical
                ),
            }
        }
        Command::Simulate { params, n, i0, mode, paths, seed, workers, horizon } => {
            let params = load_params(params)?;
            let mode = match mode {
                SimMode::Absorbing => Mode::Absorbing,
                SimMode::Reflecting => Mode::ReflectingTwoSided,
                SimMode::OneSided => Mode::ReflectingOneSidedTruncated,
            };
            let cfg = SimConfig {
                i0: i0.unwrap_or(n / 2),
                n_paths: *paths,
                horizon: *horizon,
                seed: *seed,
                workers: *workers,
            };
            let rep = oracle::simulate(&params, *n, mode, &cfg)?;
            if rep.horizon_exceeded > 0 {
                eprintln!(
                    "warning: {} paths exceeded the horizon of {} steps and were excluded; estimates may be biased",
                    rep.horizon_exceeded, rep.horizon
                );
            }
            match cli.format {
                Format::Json => to_json(&json!({ "params": params.to_record(), "N": n, "mode": mode, "report": rep })),
                f => {
                    let (header, rows): (&[&str], Vec<Vec<f64>>) = if mode == Mode::Absorbing {
                        let row = vec![rep.values[0], rep.stderr[0], rep.values[1], rep.stderr[1]];
                        (&["u", "u_stderr", "v", "v_stderr"], vec![row])
                    } else {
                        let rows = rep
                            .values
                            .iter()
                            .zip(&rep.stderr)
                            .enumerate()
                            .map(|(i, (v, se))| vec![i as f64, *v, *se])
                            .collect();
                        (&["i", "frequency", "stderr"], rows)
                    };
                    let mut s = render_rows(f, header, &rows, mode != Mode::Absorbing);
                    if f == Format::Table {
                        let _ = writeln!(
                            s,
                            "paths {} seed {} workers {} generator {}",
                            rep.n_paths, rep.seed, rep.worker_count, rep.generator
                        );
                    }
                    s
                }
            }
        }
        Command::Verify { params, n, i0, paths, seed, workers } => {
            let params = load_params(params)?;
            warn_near_critical(&params);
            let report = verify(&params, *n, i0.unwrap_or(n / 2), *paths, *seed, *workers, ext)?;
            if !report.pass {
                code = 3;
            }
            match cli.format {
                Format::Json => to_json(&serde_json::to_value(&report).expect("serializable")),
                Format::Csv => format!(
                    "max_du,max_dv_rel,mc_u_z,mc_v_z,pass\n{:e},{:e},{},{},{}\n",
                    report.max_du.unwrap_or(f64::NAN),
                    report.max_dv_rel.unwrap_or(f64::NAN),
                    report.mc_u_z,
                    report.mc_v_z,
                    report.pass
                ),
                Format::Table => format!(
                    "det vs dense   max|du| = {:e}  max|dv|/scale = {:e}\nMonte Carlo    u z = {:.3}  v z = {:.3}  ({} paths, seed {})\nnear critical  {}\nresult         {}\n",
                    report.max_du.unwrap_or(f64::NAN),
                    report.max_dv_rel.unwrap_or(f64::NAN),
                    report.mc_u_z,
                    report.mc_v_z,
                    report.simulation.n_paths,
                    report.simulation.seed,
                    report.near_critical,
                    if report.pass { "PASS" } else { "FAIL" }
                ),
            }
        }
        Command::Bench { params, k, n_list, reps } => {
            let params =
                if params.params.is_some() || !params.p.is_empty() { load_params(params)? } else { bench_params(*k)? };
            let rows = bench(&params, n_list, *reps, ext)?;
            match cli.format {
                Format::Json => to_json(&json!({ "params": params.to_record(), "rows": rows })),
                Format::Csv => {
                    let mut s = String::from("N,t_determinant_s,t_dense_s,dense_status\n");
                    for r in &rows {
                        let dense = r.t_dense.map(|t| format!("{t:e}")).unwrap_or_default();
                        let _ = writeln!(s, "{},{:e},{},{}", r.n, r.t_determinant, dense, r.dense_status);
                    }
                    s
                }
                Format::Table => {
                    let mut s = format!("{:>10} {:>14} {:>14}  dense\n", "N", "determinant", "dense solve");
                    for r in &rows {
                        let dense = r.t_dense.map(|t| format!("{t:.3e} s")).unwrap_or_else(|| "-".into());
                        let _ = writeln!(
                            s,
                            "{:>10} {:>14} {:>14}  {}",
                            r.n,
                            format!("{:.3e} s", r.t_determinant),
                            dense,
                            r.dense_status
                        );
                    }
                    s
                }
            }
        }
        Command::Roulette { n_list, check } => {
            let params = roulette_params();
            let mut tables = Vec::new();
            let mut mismatches = Vec::new();
            for &n in n_list {
                let res = analyze(&params, n, ext)?;
                mismatches.extend(roulette_mismatches(n, &res.u, &res.v));
                tables.push((n, res));
            }
            if *check {
                let uncovered: Vec<usize> = n_list.iter().copied().filter(|n| !GOLDEN_N.contains(n)).collect();
                if !uncovered.is_empty() {
                    return Err(LeapError::InvalidInput(format!("no printed table for N = {uncovered:?}")));
                }
                if !mismatches.is_empty() {
                    code = 3;
                    for m in &mismatches {
                        eprintln!(
                            "mismatch: {} at N = {}, i = {}: printed {:.4}, computed {:.4} ({:.10})",
                            m.quantity,
                            m.n,
                            m.i,
                            m.printed,
                            round4(m.computed),
                            m.computed
                        );
                    }
                }
            }
            render_roulette(cli.format, &tables, *check, &mismatches)
        }
    };
    out.write_all(text.as_bytes()).map_err(|e| LeapError::InvalidInput(format!("write failed: {e}")))?;
    Ok(code)
}

fn render_roulette(
    format: Format,
    tables: &[(usize, crate::absorbing::AbsorptionResult)],
    check: bool,
    mismatches: &[GoldenMismatch],
) -> String {
    match format {
        Format::Json => to_json(&json!({
            "params": roulette_params().to_record(),
            "tables": tables.iter().map(|(n, r)| json!({"N": n, "u": r.u, "v": r.v})).collect::<Vec<_>>(),
            "checked": check,
            "mismatches": mismatches,
        })),
        Format::Csv => {
            let mut s = String::from("N,i,u,v\n");
            for (n, r) in tables {
                for i in 0..=*n {
                    let _ = writeln!(s, "{n},{i},{:.4},{:.4}", round4(r.u[i]), round4(r.v[i]));
                }
            }
            s
        }
        Format::Table => {
            let max_n = tables.iter().map(|t| t.0).max().unwrap_or(0);
            let mut s = String::new();
            for (title, pick) in [("u_i", 0usize), ("v_i", 1)] {
                let _ = write!(s, "{title:>4}");
                for (n, _) in tables {
                    let _ = write!(s, "{:>10}", format!("N={n}"));
                }
                s.push('\n');
                for i in 1..=max_n {
                    let _ = write!(s, "{i:>4}");
                    for (n, r) in tables {
                        let cell = if i <= *n {
                            fmt_table_value(if pick == 0 { r.u[i] } else { r.v[i] })
                        } else {
                            String::new()
                        };
                        let _ = write!(s, "{cell:>10}");
                    }
                    s.push('\n');
                }
                s.push('\n');
            }
            if check {
                let _ = writeln!(
                    s,
                    "check: {} of {} printed values reproduced",
                    2 * tables.iter().map(|t| t.0 + 1).sum::<usize>() - mismatches.len(),
                    2 * tables.iter().map(|t| t.0 + 1).sum::<usize>()
                );
            }
            s
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub params: crate::params::ParamsRecord,
    pub n: usize,
    pub i0: usize,
    /// `None` when the dense solve is refused.
    pub max_du: Option<f64>,
    /// `max|dv| / max(1, max|v|)`.
    pub max_dv_rel: Option<f64>,
    pub mc_u_z: f64,
    pub mc_v_z: f64,
    pub near_critical: bool,
    pub simulation: oracle::OracleReport,
    pub pass: bool,
}

pub const VERIFY_TOL: f64 = 1e-8;
pub const VERIFY_Z: f64 = 4.0;

fn z_score(est: f64, target: f64, se: f64) -> f64 {
    let d = (est - target).abs();
    if d == 0.0 {
        0.0
    } else if se == 0.0 {
        f64::INFINITY
    } else {
        d / se
    }
}

pub fn verify(
    params: &LeapParams,
    n: usize,
    i0: usize,
    paths: u64,
    seed: u64,
    workers: usize,
    ext: bool,
) -> Result<VerifyReport> {
    let det = analyze(params, n, ext)?;
    let (max_du, max_dv_rel) = match oracle::build_transition_matrix(params, n, Mode::Absorbing) {
        Ok(pm) => {
            let (u, v) = oracle::solve_absorption(&pm)?;
            let du = det.u.iter().zip(&u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let scale = v.iter().fold(1.0f64, |a, x| a.max(x.abs()));
            let dv = det.v.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale;
            (Some(du), Some(dv))
        }
        Err(LeapError::DenseCapExceeded { .. }) => (None, None),
        Err(e) => return Err(e),
    };
    let sim =
        oracle::simulate(params, n, Mode::Absorbing, &SimConfig { i0, n_paths: paths, horizon: None, seed, workers })?;
    let mc_u_z = z_score(sim.values[0], det.u[i0], sim.stderr[0]);
    let mc_v_z = z_score(sim.values[1], det.v[i0], sim.stderr[1]);
    let dense_ok = max_du.is_none_or(|d| d <= VERIFY_TOL) && max_dv_rel.is_none_or(|d| d <= VERIFY_TOL);
    let s = params.drift_sign();
    Ok(VerifyReport {
        params: params.to_record(),
        n,
        i0,
        max_du,
        max_dv_rel,
        mc_u_z,
        mc_v_z,
        near_critical: s.near_critical,
        pass: dense_ok && mc_u_z <= VERIFY_Z && mc_v_z <= VERIFY_Z,
        simulation: sim,
    })
}

/// Built-in benchmark leap with steps up to `k` and negative drift.
pub fn bench_params(k: usize) -> Result<LeapParams> {
    if !(1..=8).contains(&k) {
        return Err(LeapError::InvalidInput(format!("bench k must lie in 1..=8, got {k}")));
    }
    if k == 2 {
        return Ok(roulette_params());
    }
    let w: Vec<f64> = (1..=k).map(|j| (k - j + 1) as f64).collect();
    let total: f64 = w.iter().sum::<f64>() * 2.1;
    let p: Vec<f64> = w.iter().map(|x| x / total).collect();
    let q: Vec<f64> = w.iter().map(|x| 1.1 * x / total).collect();
    LeapParams::new(&p, &q, 0.0)
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub n: usize,
    pub t_determinant: f64,
    pub t_dense: Option<f64>,
    pub dense_status: String,
}

/// Median wall time of a from-scratch determinant query for `u_i`.
pub fn time_u_query(params: &LeapParams, n: usize, i: usize, reps: usize, ext: bool) -> Result<Duration> {
    let mut samples = Vec::with_capacity(reps.max(1));
    for _ in 0..reps.max(1) {
        let t = Instant::now();
        let u = AbsorbingSolver::new(params, n, ext)?.u(i)?;
        std::hint::black_box(u);
        samples.push(t.elapsed());
    }
    samples.sort();
    Ok(samples[samples.len() / 2])
}

/// Dense solves above this size are skipped by default for runtime, not capacity.
pub const BENCH_DENSE_MAX: usize = 2_000;

pub fn bench(params: &LeapParams, n_list: &[usize], reps: usize, ext: bool) -> Result<Vec<BenchRow>> {
    if n_list.windows(2).any(|w| w[1] < w[0]) {
        return Err(LeapError::InvalidInput("N list must be ascending".into()));
    }
    let mut rows = Vec::new();
    for &n in n_list {
        let i = n / 2;
        let t_det = time_u_query(params, n, i, reps, ext)?;
        let (t_dense, status) = if n > DENSE_CAP {
            (None, format!("refused: N exceeds dense cap {DENSE_CAP}"))
        } else if n > BENCH_DENSE_MAX {
            (None, format!("skipped: N exceeds bench dense limit {BENCH_DENSE_MAX}"))
        } else {
            let t = Instant::now();
            let pm = oracle::build_transition_matrix(params, n, Mode::Absorbing)?;
            let (u, _) = oracle::solve_absorption(&pm)?;
            let elapsed = t.elapsed();
            let det_u = AbsorbingSolver::new(params, n, ext)?.u(i)?;
            if (det_u - u[i]).abs() > VERIFY_TOL {
                return Err(LeapError::ToleranceFailure(format!(
                    "determinant u_{i} = {det_u} but dense gives {} at N = {n}",
                    u[i]
                )));
            }
            (Some(elapsed.as_secs_f64()), "ok".to_string())
        };
        rows.push(BenchRow { n, t_determinant: t_det.as_secs_f64(), t_dense, dense_status: status });
    }
    Ok(rows)
}

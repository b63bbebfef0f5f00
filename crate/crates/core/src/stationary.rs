//! Recurrence classification of the unconstrained leap and stationary
//! distributions of the reflecting leaps.

use std::cmp::Ordering;

use num_complex::Complex64;
use serde::Serialize;

use crate::absorbing::TOL_IMAG;
use crate::charpoly::{located_reverse_roots, RootSet};
use crate::error::{LeapError, Result};
use crate::matrix::{
    det_complex, det_ratio, modified_accordion_product, omega_matrix, power_sum_shifted, Column, PowerSumSpec,
};
use crate::params::LeapParams;

pub const DEFAULT_TAIL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    TransientRight,
    TransientLeft,
    NullRecurrent,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub verdict: Verdict,
    pub mu: f64,
    pub has_stationary: bool,
    pub exact: bool,
    pub near_critical: bool,
}

pub fn classify(params: &LeapParams) -> Classification {
    let sign = params.drift_sign();
    let verdict = match sign.sign {
        Ordering::Greater => Verdict::TransientRight,
        Ordering::Less => Verdict::TransientLeft,
        Ordering::Equal => Verdict::NullRecurrent,
    };
    Classification {
        verdict,
        mu: params.drift().mu,
        has_stationary: false,
        exact: sign.exact,
        near_critical: sign.near_critical || (!sign.exact && sign.sign == Ordering::Equal && params.drift().mu != 0.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Support {
    TwoSided(usize),
    OneSidedTruncated(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryResult {
    pub pi: Vec<f64>,
    /// `max_j |(pi P)_j - pi_j|` over checked states.
    pub residual: f64,
    /// Bound on the probability mass beyond the retained states.
    pub tail_bound: f64,
    pub support: Support,
    pub max_imag_residue: f64,
}

fn require_irreducible(params: &LeapParams) -> Result<()> {
    let g = params.step_profile().gcd_support;
    if g != 1 {
        return Err(LeapError::NotIrreducible(g));
    }
    Ok(())
}

fn reverse_roots(params: &LeapParams, extended: bool) -> Result<RootSet> {
    Ok(located_reverse_roots(params, extended)?.roots)
}

/// One step of the reflecting law applied to a row vector: mass leaving
/// `[0, upper]` lands on the nearest end.
pub fn reflect_step(params: &LeapParams, pi: &[f64], upper: Option<usize>) -> Vec<f64> {
    let len = pi.len();
    let mut out = vec![0.0; len];
    let last = len - 1;
    for (i, &w) in pi.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for (j, (&pj, &qj)) in params.p().iter().zip(params.q()).enumerate() {
            let s = j + 1;
            let up = i + s;
            let target = match upper {
                Some(n) => up.min(n),
                None => up,
            };
            if target <= last {
                out[target] += w * pj;
            }
            out[i.saturating_sub(s)] += w * qj;
        }
    }
    out
}

fn residual(params: &LeapParams, pi: &[f64], upper: Option<usize>, checked: usize) -> f64 {
    let next = reflect_step(params, pi, upper);
    next.iter().zip(pi).take(checked).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

fn clamp_probability(x: f64, i: usize) -> Result<f64> {
    if !x.is_finite() {
        return Err(LeapError::IllConditioned(format!("non-finite pi_{i}")));
    }
    if x < 0.0 {
        if x < -1e-10 {
            return Err(LeapError::IllConditioned(format!("pi_{i} = {x:e} is negative")));
        }
        return Ok(0.0);
    }
    Ok(x)
}

/// Stationary distribution of the reflecting leap on `{0, ..., N}`.
pub fn stationary_two_sided(params: &LeapParams, n: usize, extended: bool) -> Result<StationaryResult> {
    require_irreducible(params)?;
    let attempt = |ext: bool| two_sided_with(params, n, ext);
    match attempt(extended) {
        Err(LeapError::IllConditioned(_) | LeapError::RootResidualTooLarge { .. }) if !extended => attempt(true),
        other => other,
    }
}

fn two_sided_with(params: &LeapParams, n: usize, extended: bool) -> Result<StationaryResult> {
    let roots = reverse_roots(params, extended)?;
    let dets: Vec<Complex64> = (0..=n)
        .map(|i| Ok(det_complex(&modified_accordion_product(i, &roots, n, params)?.entries)))
        .collect::<Result<_>>()?;
    let total: Complex64 = dets.iter().sum();
    let mut max_res = 0.0f64;
    let mut pi = Vec::with_capacity(n + 1);
    for (i, d) in dets.iter().enumerate() {
        let (x, res) = det_ratio(*d, total)?;
        max_res = max_res.max(res);
        pi.push(clamp_probability(x, i)?);
    }
    if !(max_res <= TOL_IMAG) {
        return Err(LeapError::IllConditioned(format!("imaginary residue {max_res:e} in stationary ratio")));
    }
    let s: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|x| *x /= s);
    let residual = residual(params, &pi, Some(n), n + 1);
    Ok(StationaryResult { pi, residual, tail_bound: 0.0, support: Support::TwoSided(n), max_imag_residue: max_res })
}

/// Stationary distribution of the leap reflected at 0 only, truncated where
/// the remaining mass is provably below `tail_tol`.
pub fn stationary_one_sided(params: &LeapParams, tail_tol: f64, extended: bool) -> Result<StationaryResult> {
    require_irreducible(params)?;
    let sign = params.drift_sign();
    if sign.sign != Ordering::Less {
        return Err(LeapError::NoStationaryDistribution {
            mu: params.drift().mu,
            near_critical: sign.near_critical || (!sign.exact && sign.sign == Ordering::Equal),
        });
    }
    if !(tail_tol > 0.0 && tail_tol < 1.0) {
        return Err(LeapError::InvalidInput(format!("tail tolerance {tail_tol} must lie in (0, 1)")));
    }
    one_sided_at_least(params, tail_tol, 0, extended)
}

/// One-sided law on at least `0..=min_states`, further if the tail demands it.
fn one_sided_at_least(
    params: &LeapParams,
    tail_tol: f64,
    min_states: usize,
    extended: bool,
) -> Result<StationaryResult> {
    let attempt = |ext: bool| one_sided_with(params, tail_tol, min_states, ext);
    match attempt(extended) {
        Err(LeapError::IllConditioned(_) | LeapError::RootResidualTooLarge { .. }) if !extended => attempt(true),
        other => other,
    }
}

/// Row `k_p` of `Omega_i` is the only one that depends on `i`; expanding
/// along it gives `det Omega_i = -sum_c Cof_c sum_{n>i} n^m y_c^n` once the
/// constant column is eliminated by `det Omega_i -> 0`.
struct OmegaExpansion {
    cofactors: Vec<Complex64>,
    columns: Vec<(Complex64, usize, i64)>,
    /// `|Cof_last - sum_c Cof_c S_c(inf)| / |Cof_last|`.
    limit_gap: f64,
}

fn omega_expansion(params: &LeapParams, roots: &RootSet) -> Result<OmegaExpansion> {
    let k_p = params.step_profile().k_p;
    let omega0 = omega_matrix(0, roots, params)?;
    let m = &omega0.entries;
    let dim = m.nrows();
    let row = k_p - 1;
    let cofactors: Vec<Complex64> = (0..dim)
        .map(|c| {
            let minor = m.clone().remove_row(row).remove_column(c);
            let sign = if (row + c).is_multiple_of(2) { 1.0 } else { -1.0 };
            det_complex(&minor) * sign
        })
        .collect();
    let (cols, _) = crate::matrix::psi_columns(roots, &params.step_profile())?;
    let columns: Vec<(Complex64, usize, i64)> = cols
        .into_iter()
        .map(|c| match c {
            Column::Root { z, m, shift } => (z, m, shift),
            _ => unreachable!("psi has root columns only"),
        })
        .collect();
    let mut limit = Complex64::new(0.0, 0.0);
    for (cof, &(z, mm, shift)) in cofactors.iter().zip(&columns) {
        limit += cof * power_sum_shifted(&PowerSumSpec { z, m: mm, a: 1, b: None }, shift)?;
    }
    let last = cofactors[dim - 1];
    let limit_gap = (last - limit).norm() / last.norm().max(f64::MIN_POSITIVE);
    Ok(OmegaExpansion { cofactors, columns, limit_gap })
}

impl OmegaExpansion {
    /// `sum_{i >= 0} det Omega_i`.
    fn total(&self) -> Result<Complex64> {
        let mut t = Complex64::new(0.0, 0.0);
        for (cof, &(z, m, shift)) in self.cofactors.iter().zip(&self.columns) {
            t -= cof * power_sum_shifted(&PowerSumSpec { z, m: m + 1, a: 1, b: None }, shift)?;
        }
        Ok(t)
    }

    /// Upper bound on `|sum_{i > M} det Omega_i|`.
    fn tail(&self, m_trunc: usize) -> Result<f64> {
        let mut t = 0.0;
        for (cof, &(z, m, shift)) in self.cofactors.iter().zip(&self.columns) {
            let spec = PowerSumSpec { z: Complex64::new(z.norm(), 0.0), m: m + 1, a: m_trunc as i64 + 1, b: None };
            t += cof.norm() * power_sum_shifted(&spec, shift)?.re;
        }
        Ok(t)
    }
}

fn one_sided_with(params: &LeapParams, tail_tol: f64, min_states: usize, extended: bool) -> Result<StationaryResult> {
    let roots = reverse_roots(params, extended)?;
    let exp = omega_expansion(params, &roots)?;
    if !(exp.limit_gap <= 1e-6) {
        return Err(LeapError::IllConditioned(format!(
            "one-sided determinants do not vanish at infinity (gap {:e})",
            exp.limit_gap
        )));
    }
    let total = exp.total()?;
    let scale = total.norm();
    let within = |m: usize| -> Result<bool> { Ok(exp.tail(m)? <= tail_tol * scale) };
    let profile = params.step_profile();
    let floor = profile.k_p + profile.k_q;
    let mut hi = floor.max(16);
    while !within(hi)? {
        hi = hi
            .checked_mul(2)
            .filter(|&h| h <= 1 << 26)
            .ok_or_else(|| LeapError::IllConditioned("one-sided tail does not decay within 2^26 states".into()))?;
    }
    let mut lo = floor;
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if within(mid)? {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let m_trunc = hi.max(min_states);
    let mut max_res = 0.0f64;
    let mut pi = Vec::with_capacity(m_trunc + 1);
    for i in 0..=m_trunc {
        let d = det_complex(&omega_matrix(i, &roots, params)?.entries);
        let (x, res) = det_ratio(d, total)?;
        max_res = max_res.max(res);
        pi.push(clamp_probability(x, i)?);
    }
    if !(max_res <= TOL_IMAG) {
        return Err(LeapError::IllConditioned(format!("imaginary residue {max_res:e} in stationary ratio")));
    }
    let checked = m_trunc + 1 - params.k();
    let residual = residual(params, &pi, None, checked);
    Ok(StationaryResult {
        pi,
        residual,
        tail_bound: exp.tail(m_trunc)? / scale,
        support: Support::OneSidedTruncated(m_trunc),
        max_imag_residue: max_res,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub n_list: Vec<usize>,
    /// `sup_i |pi^(N)_i - pi_i|` for each `N`.
    pub sup_deviation: Vec<f64>,
    pub monotone: bool,
    pub one_sided_states: usize,
}

/// Distance between two-sided and one-sided stationary laws as `N` grows.
/// The one-sided law is evaluated on every state the two-sided laws cover, so
/// truncation never shows up as deviation.
pub fn uniform_limit_check(params: &LeapParams, n_list: &[usize], tail_tol: f64) -> Result<ConvergenceReport> {
    stationary_one_sided(params, tail_tol, false)?;
    let widest = n_list.iter().copied().max().unwrap_or(0);
    let limit = one_sided_at_least(params, tail_tol, widest, false)?;
    let mut sup_deviation = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let finite = stationary_two_sided(params, n, false)?;
        let len = limit.pi.len().max(finite.pi.len());
        let dev = (0..len)
            .map(|i| {
                let a = finite.pi.get(i).copied().unwrap_or(0.0);
                let b = limit.pi.get(i).copied().unwrap_or(0.0);
                (a - b).abs()
            })
            .fold(0.0, f64::max);
        sup_deviation.push(dev);
    }
    let monotone = sup_deviation.windows(2).all(|w| w[1] < w[0]);
    Ok(ConvergenceReport { n_list: n_list.to_vec(), sup_deviation, monotone, one_sided_states: limit.pi.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leap(p: &[f64], q: &[f64]) -> LeapParams {
        LeapParams::new(p, q, 0.0).unwrap()
    }

    #[test]
    fn classification_examples() {
        let roulette = LeapParams::from_strs(&["12/38", "6/38"], &["13/38", "7/38"], "0").unwrap();
        assert_eq!(classify(&roulette).verdict, Verdict::TransientLeft);
        assert_eq!(classify(&leap(&[0.25, 0.25], &[0.25, 0.25])).verdict, Verdict::NullRecurrent);
        assert_eq!(classify(&roulette.mirrored()).verdict, Verdict::TransientRight);
        assert!(!classify(&roulette).has_stationary);
    }

    #[test]
    fn symmetric_walk_is_uniform() {
        let res = stationary_two_sided(&leap(&[0.5], &[0.5]), 7, false).unwrap();
        for x in &res.pi {
            assert!((x - 0.125).abs() < 1e-12);
        }
    }

    #[test]
    fn reflecting_walk_detailed_balance() {
        let res = stationary_two_sided(&leap(&[0.3], &[0.7]), 6, false).unwrap();
        let r: f64 = 3.0 / 7.0;
        let norm: f64 = (0..=6).map(|i| r.powi(i)).sum();
        for (i, x) in res.pi.iter().enumerate() {
            assert!((x - r.powi(i as i32) / norm).abs() < 1e-12);
        }
        assert!(res.residual < 1e-12);
    }

    #[test]
    fn two_sided_jump_is_stationary() {
        let res =
            stationary_two_sided(&leap(&[12.0 / 38.0, 6.0 / 38.0], &[13.0 / 38.0, 7.0 / 38.0]), 5, false).unwrap();
        assert!(res.residual < 1e-12, "{}", res.residual);
        assert!((res.pi.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn one_sided_walk_is_geometric() {
        let res = stationary_one_sided(&leap(&[0.4], &[0.6]), 1e-12, false).unwrap();
        for (i, x) in res.pi.iter().enumerate().take(61) {
            let want = (1.0 / 3.0) * (2.0f64 / 3.0).powi(i as i32);
            assert!((x - want).abs() < 1e-12, "i={i}: {x} vs {want}");
        }
        assert!(res.tail_bound <= 1e-12);
    }

    #[test]
    fn one_sided_refuses_nonnegative_drift() {
        let err = stationary_one_sided(&leap(&[0.5], &[0.5]), 1e-10, false).unwrap_err();
        assert!(matches!(err, LeapError::NoStationaryDistribution { .. }));
        let err = stationary_one_sided(&leap(&[0.6], &[0.4]), 1e-10, false).unwrap_err();
        assert!(matches!(err, LeapError::NoStationaryDistribution { .. }));
    }

    #[test]
    fn refuses_periodic_support() {
        let err = stationary_two_sided(&leap(&[0.0, 0.5], &[0.0, 0.5]), 6, false).unwrap_err();
        assert_eq!(err, LeapError::NotIrreducible(2));
    }

    #[test]
    fn two_sided_approaches_one_sided() {
        let rep = uniform_limit_check(&leap(&[0.4], &[0.6]), &[10, 20, 40], 1e-12).unwrap();
        assert!(rep.monotone, "{:?}", rep.sup_deviation);
    }
}

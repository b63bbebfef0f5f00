//! Upper absorption probabilities and expected absorption times of the
//! absorbing leap on `{0, ..., N}` as ratios of accordion determinants.

use std::cmp::Ordering;

use num_complex::Complex64;
use serde::Serialize;

use crate::charpoly::{spectral_roots, RootSet};
use crate::error::{LeapError, Result};
use crate::matrix::{accordion_product, det_complex, det_ratio, extended_accordion_product};
use crate::params::{LeapParams, StepProfile};

/// Largest imaginary part (relative) tolerated in a determinant ratio.
pub const TOL_IMAG: f64 = 1e-8;
/// Negative noise below this magnitude is clamped away.
pub const TOL_CLAMP: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Method {
    Determinant,
    WalkClosedForm,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbsorptionResult {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub max_imag_residue: f64,
    pub method: Method,
    /// Entries pulled back into range from rounding noise.
    pub clamped: usize,
    pub extended_precision: bool,
}

/// Precomputed roots and denominator for repeated single-state queries.
#[derive(Debug, Clone)]
pub struct AbsorbingSolver {
    params: LeapParams,
    profile: StepProfile,
    n: usize,
    roots: RootSet,
    den: Complex64,
    zero_drift: bool,
    pub extended: bool,
}

impl AbsorbingSolver {
    pub fn new(params: &LeapParams, n: usize, extended: bool) -> Result<Self> {
        let profile = params.step_profile();
        let min = profile.k_p + profile.k_q;
        if n < min {
            return Err(LeapError::BarrierTooNarrow { n, min });
        }
        let roots = spectral_roots(params, extended)?;
        let den = det_complex(&accordion_product(n, &roots, n, &profile)?.entries);
        if den == Complex64::new(0.0, 0.0) || !den.is_finite() {
            return Err(LeapError::IllConditioned(format!("accordion determinant is {den}")));
        }
        Ok(Self {
            params: params.clone(),
            profile,
            n,
            roots,
            den,
            zero_drift: params.drift_sign().sign == Ordering::Equal,
            extended,
        })
    }

    pub fn roots(&self) -> &RootSet {
        &self.roots
    }

    /// `(u_i, imaginary residue)` before clamping.
    pub fn u_raw(&self, i: usize) -> Result<(f64, f64)> {
        if i == 0 {
            return Ok((0.0, 0.0));
        }
        if i == self.n {
            return Ok((1.0, 0.0));
        }
        let num = det_complex(&accordion_product(i, &self.roots, self.n, &self.profile)?.entries);
        det_ratio(num, self.den)
    }

    /// `(v_i, imaginary residue)` for the chain without holding, before clamping.
    pub fn v_raw(&self, i: usize) -> Result<(f64, f64)> {
        if i == 0 || i == self.n {
            return Ok((0.0, 0.0));
        }
        let m =
            extended_accordion_product(i, &self.roots, self.n, &self.profile, &self.params.drift(), self.zero_drift)?;
        det_ratio(det_complex(&m.entries), self.den)
    }

    pub fn u(&self, i: usize) -> Result<f64> {
        let (u, res) = self.u_raw(i)?;
        check_imag(res)?;
        Ok(clamp_unit(u)?.0)
    }

    pub fn v(&self, i: usize) -> Result<f64> {
        let (v, res) = self.v_raw(i)?;
        check_imag(res)?;
        Ok(clamp_nonneg(v, v.abs().max(1.0))?.0 / (1.0 - self.params.hold()))
    }

    pub fn solve(&self) -> Result<AbsorptionResult> {
        let mut max_res = 0.0f64;
        let mut raw_u = Vec::with_capacity(self.n + 1);
        let mut raw_v = Vec::with_capacity(self.n + 1);
        for i in 0..=self.n {
            let (u, ru) = self.u_raw(i)?;
            let (v, rv) = self.v_raw(i)?;
            max_res = max_res.max(ru).max(rv);
            raw_u.push(u);
            raw_v.push(v);
        }
        check_imag(max_res)?;
        let mut clamped = 0;
        let mut u = Vec::with_capacity(raw_u.len());
        for x in raw_u {
            let (x, c) = clamp_unit(x)?;
            clamped += usize::from(c);
            u.push(x);
        }
        let scale = raw_v.iter().fold(1.0f64, |a, x| a.max(x.abs()));
        let lazy = 1.0 / (1.0 - self.params.hold());
        let mut v = Vec::with_capacity(raw_v.len());
        for x in raw_v {
            let (x, c) = clamp_nonneg(x, scale)?;
            clamped += usize::from(c);
            v.push(x * lazy);
        }
        Ok(AbsorptionResult {
            u,
            v,
            max_imag_residue: max_res,
            method: Method::Determinant,
            clamped,
            extended_precision: self.extended,
        })
    }
}

fn check_imag(res: f64) -> Result<()> {
    if res.is_finite() && res <= TOL_IMAG {
        Ok(())
    } else {
        Err(LeapError::IllConditioned(format!("imaginary residue {res:e} in determinant ratio")))
    }
}

fn clamp_unit(x: f64) -> Result<(f64, bool)> {
    if !x.is_finite() {
        return Err(LeapError::IllConditioned(format!("non-finite probability {x}")));
    }
    if x < 0.0 {
        if x < -TOL_CLAMP {
            return Err(LeapError::IllConditioned(format!("probability {x:e} below zero")));
        }
        return Ok((0.0, true));
    }
    if x > 1.0 {
        if x > 1.0 + TOL_CLAMP {
            return Err(LeapError::IllConditioned(format!("probability {x} above one")));
        }
        return Ok((1.0, true));
    }
    Ok((x, false))
}

fn clamp_nonneg(x: f64, scale: f64) -> Result<(f64, bool)> {
    if !x.is_finite() {
        return Err(LeapError::IllConditioned(format!("non-finite expected time {x}")));
    }
    if x < 0.0 {
        if x < -TOL_CLAMP * scale {
            return Err(LeapError::IllConditioned(format!("expected time {x:e} below zero")));
        }
        return Ok((0.0, true));
    }
    Ok((x, false))
}

/// Full determinant-path analysis, retrying with double-double root polishing
/// when plain precision is not accurate enough.
pub fn analyze(params: &LeapParams, n: usize, extended: bool) -> Result<AbsorptionResult> {
    let attempt = |ext: bool| AbsorbingSolver::new(params, n, ext)?.solve();
    match attempt(extended) {
        Err(LeapError::IllConditioned(_) | LeapError::RootResidualTooLarge { .. }) if !extended => attempt(true),
        other => other,
    }
}

pub fn absorption_probabilities(params: &LeapParams, n: usize) -> Result<Vec<f64>> {
    Ok(analyze(params, n, false)?.u)
}

pub fn expected_absorption_times(params: &LeapParams, n: usize) -> Result<Vec<f64>> {
    Ok(analyze(params, n, false)?.v)
}

/// Gambler's-ruin formulas for the nearest-neighbour walk stepping up with
/// probability `p`.
pub fn walk_closed_forms(p: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let nf = n as f64;
    if p == 0.5 {
        let u = (0..=n).map(|i| i as f64 / nf).collect();
        let v = (0..=n).map(|i| (i * (n - i)) as f64).collect();
        return (u, v);
    }
    let z = (1.0 - p) / p;
    let lz = z.ln();
    // (1 - z^i) / (1 - z^N), rewritten in powers of 1/z when z > 1
    let u: Vec<f64> = (0..=n)
        .map(|i| {
            let i_f = i as f64;
            if z < 1.0 {
                (i_f * lz).exp_m1() / (nf * lz).exp_m1()
            } else {
                ((i_f - nf) * lz).exp() * (-i_f * lz).exp_m1() / (-nf * lz).exp_m1()
            }
        })
        .collect();
    let v = u.iter().enumerate().map(|(i, ui)| (i as f64 - nf * ui) / (1.0 - 2.0 * p)).collect();
    (u, v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leap(p: &[f64], q: &[f64]) -> LeapParams {
        LeapParams::new(p, q, 0.0).unwrap()
    }

    #[test]
    fn walk_formulas() {
        let (u, v) = walk_closed_forms(0.5, 10);
        assert!((u[3] - 0.3).abs() < 1e-15);
        assert_eq!(v[3], 21.0);
        let (u, _) = walk_closed_forms(0.25, 4);
        assert!((u[1] - 0.025).abs() < 1e-15);
        assert_eq!((u[0], u[4]), (0.0, 1.0));
    }

    #[test]
    fn walk_determinants_match_closed_forms() {
        for p in [0.2, 0.5, 0.7] {
            let res = analyze(&leap(&[p], &[1.0 - p]), 12, false).unwrap();
            let (u, v) = walk_closed_forms(p, 12);
            for i in 0..=12 {
                assert!((res.u[i] - u[i]).abs() < 1e-12, "p={p} i={i}");
                assert!((res.v[i] - v[i]).abs() < 1e-10, "p={p} i={i}: {} vs {}", res.v[i], v[i]);
            }
        }
    }

    #[test]
    fn roulette_small_table() {
        let l = leap(&[12.0 / 38.0, 6.0 / 38.0], &[13.0 / 38.0, 7.0 / 38.0]);
        let res = analyze(&l, 5, false).unwrap();
        let want = [0.0, 0.1978, 0.3541, 0.5445, 0.7252, 1.0];
        for (a, b) in res.u.iter().zip(want) {
            assert!((a - b).abs() < 5e-5, "{a} vs {b}");
        }
        assert!((analyze(&l, 10, false).unwrap().v[5] - 13.3454).abs() < 5e-5);
    }

    #[test]
    fn symmetric_jump_is_balanced() {
        let res = analyze(&leap(&[0.25, 0.25], &[0.25, 0.25]), 8, false).unwrap();
        assert!((res.u[4] - 0.5).abs() < 1e-12);
        for i in 0..=8 {
            assert!((res.u[i] + res.u[8 - i] - 1.0).abs() < 1e-10);
            assert!((res.v[i] - res.v[8 - i]).abs() < 1e-10 * res.v[4]);
        }
    }

    #[test]
    fn hold_dilates_times_only() {
        let base = analyze(&leap(&[0.2, 0.3], &[0.3, 0.2]), 9, false).unwrap();
        let lazy = analyze(&LeapParams::new(&[0.1, 0.15], &[0.15, 0.1], 0.5).unwrap(), 9, false).unwrap();
        for i in 0..=9 {
            assert!((base.u[i] - lazy.u[i]).abs() < 1e-12);
            assert!((2.0 * base.v[i] - lazy.v[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn narrow_barrier_is_refused() {
        let err = analyze(&leap(&[0.2, 0.3], &[0.3, 0.2]), 3, false).unwrap_err();
        assert_eq!(err, LeapError::BarrierTooNarrow { n: 3, min: 4 });
    }
}

//! Structured matrices whose determinants give absorption and stationary
//! quantities, and the closed-form power sums that fill their summed rows.
//!
//! Every matrix here is a product of a row selector (identity picks and
//! summed blocks over a difference index `n`) with a matrix whose columns are
//! `n^m z^n` for each root `z` and multiplicity power `m`. Entries are
//! evaluated directly from the selector, so cost does not depend on `N`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::charpoly::RootSet;
use crate::error::{LeapError, Result};
use crate::params::{Drift, LeapParams, StepProfile};

/// Range length up to which power sums are accumulated term by term.
const DIRECT_MAX_TERMS: i64 = 64;
/// Distance from 1 inside which higher-power sums are accumulated term by term.
const NEAR_ONE: f64 = 1e-6;
const NEAR_ONE_MAX_TERMS: i64 = 1_000_000;

/// `sum_{n=a}^{b} n^m z^n`; `b = None` means the series to infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSumSpec {
    pub z: Complex64,
    pub m: usize,
    pub a: i64,
    pub b: Option<i64>,
}

pub fn power_sum(spec: &PowerSumSpec) -> Result<Complex64> {
    power_sum_shifted(spec, 0)
}

/// `sum_{n=a}^{b} n^m z^(n - shift)`.
pub fn power_sum_shifted(spec: &PowerSumSpec, shift: i64) -> Result<Complex64> {
    let PowerSumSpec { z, m, a, b } = *spec;
    let zero = Complex64::new(0.0, 0.0);
    match b {
        None if z.norm() >= 1.0 => return Err(LeapError::DivergentSum(z.norm())),
        Some(b) if b < a => return Ok(zero),
        _ => {}
    }
    if z == Complex64::new(1.0, 0.0) {
        return Ok(Complex64::new(faulhaber_range(m, a, b.unwrap()), 0.0));
    }
    if z == zero {
        let hit = a <= shift && b.is_none_or(|b| shift <= b);
        return Ok(if hit { Complex64::new(ipow(shift, m), 0.0) } else { zero });
    }
    if let Some(b) = b {
        let terms = b - a + 1;
        let near_one = m >= 1 && (z - 1.0).norm() < NEAR_ONE && terms <= NEAR_ONE_MAX_TERMS;
        if terms <= DIRECT_MAX_TERMS || near_one {
            return Ok(direct_sum(z, m, a, b, shift));
        }
    }
    Ok(recurrence_sum(z, m, a, b, shift))
}

fn ipow(n: i64, m: usize) -> f64 {
    (n as f64).powi(m as i32)
}

fn zpow(z: Complex64, e: i64) -> Complex64 {
    if e == 0 {
        return Complex64::new(1.0, 0.0);
    }
    match i32::try_from(e) {
        Ok(e) => z.powi(e),
        Err(_) => (z.ln() * e as f64).exp(),
    }
}

fn direct_sum(z: Complex64, m: usize, a: i64, b: i64, shift: i64) -> Complex64 {
    let mut term = zpow(z, a - shift);
    let mut acc = Complex64::new(0.0, 0.0);
    for n in a..=b {
        acc += term * ipow(n, m);
        term *= z;
    }
    acc
}

/// `exp(w) - 1` without cancellation for small `w`.
fn expm1_c(w: Complex64) -> Complex64 {
    let (s, c) = w.im.sin_cos();
    let half = (w.im * 0.5).sin();
    Complex64::new(w.re.exp_m1() * c - 2.0 * half * half, w.re.exp() * s)
}

/// `ln z` accurate for `z` near 1.
fn ln_c(z: Complex64) -> Complex64 {
    let t = (z.re - 1.0) * (z.re + 1.0) + z.im * z.im;
    Complex64::new(0.5 * t.ln_1p(), z.im.atan2(z.re))
}

/// Geometric sum `sum_{n=a}^{b} z^(n - shift)` for `z != 1`.
fn geometric(z: Complex64, a: i64, b: Option<i64>, shift: i64) -> Complex64 {
    let head = zpow(z, a - shift);
    let one_minus_z = Complex64::new(1.0 - z.re, -z.im);
    match b {
        None => head / one_minus_z,
        Some(b) => {
            let w = ln_c(z) * (b - a + 1) as f64;
            if w.norm() < 1.0 {
                // 1 - z^len as -expm1(len ln z): no cancellation near z = 1
                head * -expm1_c(w) / one_minus_z
            } else {
                // the shift keeps both endpoint powers in range
                (head - zpow(z, b + 1 - shift)) / one_minus_z
            }
        }
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, t| acc * (n - t) as f64 / (t + 1) as f64)
}

/// Recurrence on `T_t = sum n^t z^(n-S)` obtained from `(1 - z) T_m`.
fn recurrence_sum(z: Complex64, m: usize, a: i64, b: Option<i64>, shift: i64) -> Complex64 {
    let one_minus_z = Complex64::new(1.0 - z.re, -z.im);
    let head = zpow(z, a - shift);
    let tail = b.map(|b| zpow(z, b + 1 - shift));
    let mut t: Vec<Complex64> = Vec::with_capacity(m + 1);
    t.push(geometric(z, a, b, shift));
    for mm in 1..=m {
        let mut rhs = head * ipow(a, mm);
        if let (Some(b), Some(tail)) = (b, tail) {
            rhs -= tail * ipow(b, mm);
        }
        for (tt, t_val) in t.iter().enumerate() {
            let sign = if (mm - tt) % 2 == 0 { 1.0 } else { -1.0 };
            rhs -= (*t_val - head * ipow(a, tt)) * (binomial(mm, tt) * sign);
        }
        t.push(rhs / one_minus_z);
    }
    t[m]
}

/// `sum_{n=1}^{x} n^m` for `x >= 0`.
fn faulhaber(m: usize, x: i64) -> f64 {
    if x <= 0 {
        return 0.0;
    }
    let xf = x as f64;
    let mut s: Vec<f64> = Vec::with_capacity(m + 1);
    for mm in 0..=m {
        let mut v = (xf + 1.0).powi(mm as i32 + 1) - 1.0;
        for (tt, st) in s.iter().enumerate() {
            v -= binomial(mm + 1, tt) * st;
        }
        s.push(v / (mm + 1) as f64);
    }
    s[m]
}

fn faulhaber_range(m: usize, a: i64, b: i64) -> f64 {
    let nonpositive: f64 = (a..=b.min(0)).map(|n| ipow(n, m)).sum();
    nonpositive + faulhaber(m, b) - faulhaber(m, a.max(1) - 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MatrixKind {
    AZ,
    AStarZStar,
    ADaggerY,
    W,
    Omega,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructuredMatrix {
    pub entries: DMatrix<Complex64>,
    pub kind: MatrixKind,
    /// `sum_c shift_c ln|z_c|` over root columns; shared across a family.
    pub scale_log: f64,
}

/// A linear functional on sequences indexed by the difference index `n`.
#[derive(Debug, Clone, PartialEq)]
pub enum Row {
    Pick(i64),
    Sum(i64, Option<i64>),
    Weighted(Vec<(i64, f64)>),
}

/// Column of the right factor.
#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    /// `n^m z^(n - shift)`.
    Root { z: Complex64, m: usize, shift: i64 },
    /// `c0 + c1 n`.
    Affine { c0: f64, c1: f64 },
    /// Values given per row of the product, bypassing the row functional.
    Fixed(Vec<f64>),
}

impl Column {
    fn pick(&self, n: i64) -> Complex64 {
        match *self {
            Column::Root { z, m, shift } => zpow(z, n - shift) * ipow(n, m),
            Column::Affine { c0, c1 } => Complex64::new(c0 + c1 * n as f64, 0.0),
            Column::Fixed(_) => unreachable!("fixed columns are not evaluated per index"),
        }
    }

    fn apply(&self, row_idx: usize, row: &Row) -> Result<Complex64> {
        if let Column::Fixed(v) = self {
            return Ok(Complex64::new(v[row_idx], 0.0));
        }
        match row {
            Row::Pick(n) => Ok(self.pick(*n)),
            Row::Weighted(w) => Ok(w.iter().map(|&(n, c)| self.pick(n) * c).sum()),
            Row::Sum(a, b) => match *self {
                Column::Root { z, m, shift } => power_sum_shifted(&PowerSumSpec { z, m, a: *a, b: *b }, shift),
                Column::Affine { c0, c1 } => {
                    let b = b.ok_or(LeapError::DivergentSum(1.0))?;
                    if b < *a {
                        return Ok(Complex64::new(0.0, 0.0));
                    }
                    let count = (b - a + 1) as f64;
                    let sum_n = (*a + b) as f64 * count / 2.0;
                    Ok(Complex64::new(c0 * count + c1 * sum_n, 0.0))
                }
                Column::Fixed(_) => unreachable!(),
            },
        }
    }
}

/// Evaluates `rows x columns` into a dense matrix.
pub fn product(rows: &[Row], columns: &[Column]) -> Result<DMatrix<Complex64>> {
    let mut out = DMatrix::from_element(rows.len(), columns.len(), Complex64::new(0.0, 0.0));
    for (c, col) in columns.iter().enumerate() {
        for (r, row) in rows.iter().enumerate() {
            out[(r, c)] = col.apply(r, row)?;
        }
    }
    Ok(out)
}

/// Root columns over the index range `[lo, hi]`, each shifted so that no
/// entry exceeds its largest magnitude on that range.
pub fn root_columns(roots: &RootSet, lo: i64, hi: i64) -> (Vec<Column>, f64) {
    let mut scale_log = 0.0;
    let cols = roots
        .expanded()
        .map(|(z, m)| {
            let r = z.norm();
            let shift = if r > 1.0 {
                hi
            } else if r < 1.0 {
                lo
            } else {
                0
            };
            scale_log += shift as f64 * r.ln();
            Column::Root { z, m, shift }
        })
        .collect();
    (cols, scale_log)
}

fn check_barrier(n: usize, profile: &StepProfile) -> Result<()> {
    let min = profile.k_p + profile.k_q;
    if n < min {
        return Err(LeapError::BarrierTooNarrow { n, min });
    }
    Ok(())
}

fn check_state(i: usize, n: usize) -> Result<()> {
    if i > n {
        return Err(LeapError::StateOutOfRange { state: i, n });
    }
    Ok(())
}

/// Rows of the `i`th accordion matrix, indexed by `n = 2-k_q .. N+k_p-1`.
pub fn accordion_rows(i: usize, n: usize, profile: &StepProfile) -> Vec<Row> {
    let (k_p, k_q, n) = (profile.k_p as i64, profile.k_q as i64, n as i64);
    let mut rows: Vec<Row> = (2 - k_q..=0).map(Row::Pick).collect();
    rows.push(Row::Sum(1, Some(i as i64)));
    rows.extend((n + 1..=n + k_p - 1).map(Row::Pick));
    rows
}

fn forward_range(n: usize, profile: &StepProfile) -> (i64, i64) {
    (2 - profile.k_q as i64, (n + profile.k_p - 1) as i64)
}

pub fn accordion_product(i: usize, roots: &RootSet, n: usize, profile: &StepProfile) -> Result<StructuredMatrix> {
    check_barrier(n, profile)?;
    check_state(i, n)?;
    let (lo, hi) = forward_range(n, profile);
    let (cols, scale_log) = root_columns(roots, lo, hi);
    let entries = product(&accordion_rows(i, n, profile), &cols)?;
    Ok(StructuredMatrix { entries, kind: MatrixKind::AZ, scale_log })
}

/// Particular solution of the difference recurrence for expected times.
pub fn delta_column(drift: &Drift, zero_drift: bool) -> Column {
    if zero_drift {
        Column::Affine { c0: 0.0, c1: -2.0 / drift.sigma2 }
    } else {
        Column::Affine { c0: -1.0 / drift.mu, c1: 0.0 }
    }
}

/// `A*_i Z*`: the rows of `A_N` plus the summed row of `A_i`, against the
/// root columns and the particular-solution column.
pub fn extended_accordion_product(
    i: usize,
    roots: &RootSet,
    n: usize,
    profile: &StepProfile,
    drift: &Drift,
    zero_drift: bool,
) -> Result<StructuredMatrix> {
    check_barrier(n, profile)?;
    check_state(i, n)?;
    let (lo, hi) = forward_range(n, profile);
    let (mut cols, scale_log) = root_columns(roots, lo, hi);
    cols.push(delta_column(drift, zero_drift));
    let mut rows = accordion_rows(n, n, profile);
    rows.push(Row::Sum(1, Some(i as i64)));
    let entries = product(&rows, &cols)?;
    Ok(StructuredMatrix { entries, kind: MatrixKind::AStarZStar, scale_log })
}

/// Rows of the `i`th modified accordion matrix, indexed by `n = 2-k_p .. N+k_q-1`.
pub fn modified_accordion_rows(i: usize, n: usize, profile: &StepProfile) -> Vec<Row> {
    let (k_p, k_q, n, i) = (profile.k_p as i64, profile.k_q as i64, n as i64, i as i64);
    let mut rows: Vec<Row> = (2 - k_p..=0).map(Row::Pick).collect();
    rows.push(Row::Sum(1, Some(i)));
    if k_q >= 2 {
        rows.push(Row::Sum(i + 1, Some(n + 1)));
        rows.extend((n + 2..=n + k_q - 1).map(Row::Pick));
    }
    rows
}

/// Boundary weights `g_n = sum_{l=n}^{k_q} (l-n+1) q_l` at `n = 1..k_q`.
pub fn eta_row(params: &LeapParams) -> Row {
    let q = params.q();
    let k_q = params.step_profile().k_q;
    Row::Weighted(
        (1..=k_q)
            .map(|n| {
                let g: f64 = (n..=k_q).map(|l| (l - n + 1) as f64 * q[l - 1]).sum();
                (n as i64, g)
            })
            .collect(),
    )
}

/// `sum p_l - sum l q_l`.
pub fn boundary_scalar(params: &LeapParams) -> f64 {
    let p: f64 = params.p().iter().sum();
    let lq: f64 = params.q().iter().enumerate().map(|(j, q)| (j + 1) as f64 * q).sum();
    p - lq
}

/// Last column `(e_{k_p-1} - e_{k_p}, scalar)` over `dim` leading rows.
fn unit_difference_column(dim: usize, k_p: usize, scalar: f64) -> Column {
    let mut v = vec![0.0; dim + 1];
    if k_p >= 2 {
        v[k_p - 2] = 1.0;
    }
    v[k_p - 1] = -1.0;
    v[dim] = scalar;
    Column::Fixed(v)
}

fn require_irreducible(profile: &StepProfile) -> Result<()> {
    if profile.gcd_support != 1 {
        return Err(LeapError::NotIrreducible(profile.gcd_support));
    }
    Ok(())
}

/// `W_i` for the two-sided reflecting leap, from the reverse roots.
pub fn modified_accordion_product(
    i: usize,
    inv_roots: &RootSet,
    n: usize,
    params: &LeapParams,
) -> Result<StructuredMatrix> {
    let profile = params.step_profile();
    require_irreducible(&profile)?;
    check_barrier(n, &profile)?;
    check_state(i, n)?;
    let (lo, hi) = (2 - profile.k_p as i64, (n + profile.k_q - 1) as i64);
    let (mut cols, scale_log) = root_columns(inv_roots, lo, hi);
    cols.push(unit_difference_column(profile.r, profile.k_p, boundary_scalar(params)));
    let mut rows = modified_accordion_rows(i, n, &profile);
    rows.push(eta_row(params));
    let entries = product(&rows, &cols)?;
    Ok(StructuredMatrix { entries, kind: MatrixKind::W, scale_log })
}

/// Rows of the half-accordion matrix `H_i`.
pub fn half_accordion_rows(i: usize, profile: &StepProfile) -> Vec<Row> {
    let mut rows: Vec<Row> = (2 - profile.k_p as i64..=0).map(Row::Pick).collect();
    rows.push(Row::Sum(1, Some(i as i64)));
    rows
}

/// Root columns of `Psi`: the reverse roots strictly inside the unit circle.
pub fn psi_columns(inv_roots: &RootSet, profile: &StepProfile) -> Result<(Vec<Column>, f64)> {
    let inside = RootSet {
        roots: inv_roots.roots.iter().copied().filter(|r| r.value.norm() < 1.0).collect(),
        ..inv_roots.clone()
    };
    let count: usize = inside.roots.iter().map(|r| r.multiplicity).sum();
    if count != profile.k_p {
        return Err(LeapError::LocationCountMismatch {
            found: (count, inv_roots.total - count, 0),
            expected: (profile.k_p, 0, profile.k_q - 1),
        });
    }
    Ok(root_columns(&inside, 2 - profile.k_p as i64, i64::MAX))
}

/// `Omega_i` for the one-sided reflecting leap.
pub fn omega_matrix(i: usize, inv_roots: &RootSet, params: &LeapParams) -> Result<StructuredMatrix> {
    let profile = params.step_profile();
    require_irreducible(&profile)?;
    let sign = params.drift_sign();
    if sign.sign != std::cmp::Ordering::Less {
        return Err(LeapError::PositiveDrift(params.drift().mu));
    }
    let (mut cols, scale_log) = psi_columns(inv_roots, &profile)?;
    cols.push(unit_difference_column(profile.k_p, profile.k_p, boundary_scalar(params)));
    let mut rows = half_accordion_rows(i, &profile);
    rows.push(eta_row(params));
    let entries = product(&rows, &cols)?;
    Ok(StructuredMatrix { entries, kind: MatrixKind::Omega, scale_log })
}

/// Determinant by LU with partial pivoting; exactly zero when singular.
pub fn det_complex(m: &DMatrix<Complex64>) -> Complex64 {
    assert!(m.is_square(), "determinant of a non-square matrix");
    let n = m.nrows();
    let mut a = m.clone();
    let mut det = Complex64::new(1.0, 0.0);
    for col in 0..n {
        let (piv, best) = (col..n)
            .map(|r| (r, a[(r, col)].norm()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .expect("nonempty pivot column");
        if best == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if piv != col {
            a.swap_rows(piv, col);
            det = -det;
        }
        let d = a[(col, col)];
        det *= d;
        for r in col + 1..n {
            let f = a[(r, col)] / d;
            if f == Complex64::new(0.0, 0.0) {
                continue;
            }
            for c in col + 1..n {
                let v = a[(col, c)];
                a[(r, c)] -= f * v;
            }
        }
    }
    det
}

/// Real part of the determinant and `|Im|/(|det| + eps)`.
pub fn det_structured(m: &StructuredMatrix) -> (f64, f64) {
    let d = det_complex(&m.entries);
    (d.re, d.im.abs() / (d.norm() + f64::MIN_POSITIVE))
}

/// Real ratio of two determinants from one matrix family, with the discarded
/// imaginary part measured against `max(1, |ratio|)`: ratios are probabilities
/// or means, so noise on a tiny ratio is judged on the unit scale.
pub fn det_ratio(num: Complex64, den: Complex64) -> Result<(f64, f64)> {
    if den == Complex64::new(0.0, 0.0) || !den.is_finite() {
        return Err(LeapError::SingularSystem);
    }
    let q = num / den;
    if !q.is_finite() {
        return Err(LeapError::IllConditioned("non-finite determinant ratio".into()));
    }
    Ok((q.re, q.im.abs() / q.norm().max(1.0)))
}

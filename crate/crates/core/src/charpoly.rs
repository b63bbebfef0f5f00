//! Characteristic polynomials of a leap and their nonzero roots.
//!
//! The forward polynomial governs differences of absorption quantities; the
//! reverse polynomial (coefficients negated and reversed) governs stationary
//! distributions of reflecting chains. Roots come from the eigenvalues of the
//! companion matrix of the polynomial with its zero roots divided out,
//! followed by clustering into multiplicities and a Newton polish.

use std::cmp::Ordering;
use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::dd;
use crate::error::{LeapError, Result};
use crate::params::{DriftSign, LeapParams, StepProfile};

/// Relative residual bound certifying a root.
pub const TOL_RESIDUAL: f64 = 1e-9;
/// Distance from the unit circle below which a root counts as on it.
pub const TOL_CIRCLE: f64 = 1e-9;
/// Single-linkage radius (scaled by `max(1, |z|)`) for merging eigenvalues.
pub const TOL_CLUSTER: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PolyKind {
    Forward,
    Reverse,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolyCoeffs {
    pub coeffs: Vec<f64>,
    pub kind: PolyKind,
}

impl PolyCoeffs {
    pub fn eval(&self, z: Complex64) -> Complex64 {
        horner(&self.coeffs, z)
    }

    /// Coefficients with the zero roots and the vanishing leading terms
    /// removed, so that index 0 is the lowest nonzero coefficient.
    pub fn trimmed(&self, profile: &StepProfile) -> &[f64] {
        let k = profile.k;
        let (lo, hi) = match self.kind {
            PolyKind::Forward => (k - profile.k_q, k + profile.k_p - 1),
            PolyKind::Reverse => (k - profile.k_p, k + profile.k_q - 1),
        };
        &self.coeffs[lo..=hi]
    }
}

pub fn horner(coeffs: &[f64], z: Complex64) -> Complex64 {
    coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

/// Forward characteristic polynomial, degree `2k-1`.
pub fn char_poly(params: &LeapParams) -> PolyCoeffs {
    let (p, q, k) = (params.p(), params.q(), params.k());
    let coeffs = (0..2 * k)
        .map(|j| if j < k { -q[k - j - 1..].iter().sum::<f64>() } else { p[j - k..].iter().sum::<f64>() })
        .collect();
    PolyCoeffs { coeffs, kind: PolyKind::Forward }
}

/// Reverse characteristic polynomial: `psi(z) = z^(2k-1) chi(1/z)`.
pub fn reverse_char_poly(params: &LeapParams) -> PolyCoeffs {
    let (p, q, k) = (params.p(), params.q(), params.k());
    let coeffs = (0..2 * k)
        .map(|j| if j < k { -p[k - j - 1..].iter().sum::<f64>() } else { q[j - k..].iter().sum::<f64>() })
        .collect();
    PolyCoeffs { coeffs, kind: PolyKind::Reverse }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Root {
    pub value: Complex64,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RootSet {
    pub kind: PolyKind,
    pub roots: Vec<Root>,
    pub total: usize,
    pub inside: usize,
    pub on: usize,
    pub outside: usize,
    /// Largest certified residual, relative to the coefficient 1-norm.
    pub max_residual: f64,
}

impl RootSet {
    fn from_roots(kind: PolyKind, mut roots: Vec<Root>, max_residual: f64) -> Self {
        roots.sort_by(|a, b| root_order(a.value, b.value));
        let mut set = Self { kind, roots, total: 0, inside: 0, on: 0, outside: 0, max_residual };
        set.recount();
        set
    }

    fn recount(&mut self) {
        self.total = self.roots.iter().map(|r| r.multiplicity).sum();
        let count = |pred: &dyn Fn(f64) -> bool| {
            self.roots.iter().filter(|r| pred(r.value.norm())).map(|r| r.multiplicity).sum()
        };
        self.inside = count(&|m| m < 1.0 - TOL_CIRCLE);
        self.outside = count(&|m| m > 1.0 + TOL_CIRCLE);
        self.on = self.total - self.inside - self.outside;
    }

    /// Roots expanded by multiplicity, in listing order.
    pub fn expanded(&self) -> impl Iterator<Item = (Complex64, usize)> + '_ {
        self.roots.iter().flat_map(|r| (0..r.multiplicity).map(move |m| (r.value, m)))
    }

    /// Replaces the root nearest to 1 by exactly 1.
    fn snap_unit_root(&mut self) -> Result<()> {
        let one = Complex64::new(1.0, 0.0);
        let idx = self
            .roots
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1.value - one).norm().total_cmp(&(b.1.value - one).norm()))
            .map(|(i, _)| i)
            .ok_or_else(|| LeapError::IllConditioned("empty root set".into()))?;
        let dist = (self.roots[idx].value - one).norm();
        if dist > 1e-6 {
            return Err(LeapError::IllConditioned(format!("zero drift but nearest root is {dist:e} away from 1")));
        }
        self.roots[idx].value = one;
        let roots = std::mem::take(&mut self.roots);
        *self = Self::from_roots(self.kind, roots, self.max_residual);
        Ok(())
    }
}

fn arg_2pi(z: Complex64) -> f64 {
    let a = z.im.atan2(z.re);
    if a < 0.0 {
        a + TAU
    } else {
        a
    }
}

/// Ascending modulus, then argument in `[0, 2pi)`, then imaginary part.
pub fn root_order(a: Complex64, b: Complex64) -> Ordering {
    a.norm().total_cmp(&b.norm()).then_with(|| arg_2pi(a).total_cmp(&arg_2pi(b))).then_with(|| a.im.total_cmp(&b.im))
}

fn relative_residual(coeffs: &[f64], z: Complex64) -> f64 {
    let (v, _) = dd::horner_with_derivative(coeffs, z);
    let deg = coeffs.len() as i32 - 1;
    let norm1: f64 = coeffs.iter().map(|c| c.abs()).sum();
    v.norm() / z.norm().max(1.0).powi(deg) / norm1
}

/// Companion matrix of the monic version of `coeffs`, balanced by powers of two.
fn balanced_companion(coeffs: &[f64]) -> DMatrix<f64> {
    let r = coeffs.len() - 1;
    let lead = coeffs[r];
    let mut m = DMatrix::<f64>::zeros(r, r);
    for i in 1..r {
        m[(i, i - 1)] = 1.0;
    }
    for i in 0..r {
        m[(i, r - 1)] = -coeffs[i] / lead;
    }
    // Parlett-Reinsch balancing
    let radix = 2.0f64;
    let mut converged = false;
    let mut sweeps = 0;
    while !converged && sweeps < 100 {
        converged = true;
        sweeps += 1;
        for i in 0..r {
            let c: f64 = (0..r).filter(|&j| j != i).map(|j| m[(j, i)].abs()).sum();
            let rr: f64 = (0..r).filter(|&j| j != i).map(|j| m[(i, j)].abs()).sum();
            if c == 0.0 || rr == 0.0 {
                continue;
            }
            let mut f = 1.0;
            let s = c + rr;
            let (mut c2, mut r2) = (c, rr);
            while c2 < r2 / radix {
                f *= radix;
                c2 *= radix;
                r2 /= radix;
            }
            while c2 > r2 * radix {
                f /= radix;
                c2 /= radix;
                r2 *= radix;
            }
            if (c2 + r2) < 0.95 * s {
                converged = false;
                for j in 0..r {
                    m[(i, j)] /= f;
                    m[(j, i)] *= f;
                }
            }
        }
    }
    m
}

fn cluster(eigs: &[Complex64]) -> Vec<Root> {
    let n = eigs.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            let scale = eigs[i].norm().max(eigs[j].norm()).max(1.0);
            if (eigs[i] - eigs[j]).norm() <= TOL_CLUSTER * scale {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    let mut groups: Vec<(usize, Complex64, usize)> = Vec::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        match groups.iter_mut().find(|g| g.0 == root) {
            Some(g) => {
                g.1 += eigs[i];
                g.2 += 1;
            }
            None => groups.push((root, eigs[i], 1)),
        }
    }
    groups.into_iter().map(|(_, sum, m)| Root { value: sum / m as f64, multiplicity: m }).collect()
}

fn newton_polish(coeffs: &[f64], root: Root, extended: bool) -> Complex64 {
    let m = root.multiplicity as f64;
    let mut z = root.value;
    let iterations = if extended { 6 } else { 1 };
    for _ in 0..iterations {
        let (v, d) = if extended {
            dd::horner_with_derivative(coeffs, z)
        } else {
            let v = horner(coeffs, z);
            let dc: Vec<f64> = coeffs.iter().enumerate().skip(1).map(|(j, c)| j as f64 * c).collect();
            (v, horner(&dc, z))
        };
        if d.norm() == 0.0 || !d.is_finite() {
            break;
        }
        let cand = z - v / d * m;
        if !cand.is_finite() {
            break;
        }
        if relative_residual(coeffs, cand) <= relative_residual(coeffs, z) {
            let step = (cand - z).norm();
            z = cand;
            if step <= f64::EPSILON * z.norm() {
                break;
            }
        } else {
            break;
        }
    }
    z
}

/// Makes the root list closed under conjugation: near-real roots become
/// real and each upper-half-plane root gets an exact conjugate partner.
fn symmetrize(roots: Vec<Root>) -> Vec<Root> {
    let is_real = |z: Complex64| z.im.abs() <= TOL_CLUSTER * z.norm().max(1.0);
    let mut out: Vec<Root> = Vec::with_capacity(roots.len());
    let mut lower: Vec<Root> = roots.iter().copied().filter(|r| !is_real(r.value) && r.value.im < 0.0).collect();
    for r in &roots {
        if is_real(r.value) {
            out.push(Root { value: Complex64::new(r.value.re, 0.0), ..*r });
        } else if r.value.im > 0.0 {
            let partner = lower
                .iter()
                .enumerate()
                .filter(|(_, l)| l.multiplicity == r.multiplicity)
                .min_by(|a, b| (a.1.value - r.value.conj()).norm().total_cmp(&(b.1.value - r.value.conj()).norm()))
                .map(|(i, _)| i);
            match partner {
                Some(i) => {
                    lower.swap_remove(i);
                    out.push(*r);
                    out.push(Root { value: r.value.conj(), multiplicity: r.multiplicity });
                }
                None => out.push(*r),
            }
        }
    }
    out.extend(lower);
    out
}

/// Nonzero roots of a characteristic polynomial, with multiplicities.
pub fn nonzero_roots(poly: &PolyCoeffs, profile: &StepProfile) -> Result<RootSet> {
    match roots_with_precision(poly, profile, false) {
        Err(LeapError::RootResidualTooLarge { .. }) => roots_with_precision(poly, profile, true),
        other => other,
    }
}

/// As [`nonzero_roots`], choosing double-double polishing up front.
pub fn roots_with_precision(poly: &PolyCoeffs, profile: &StepProfile, extended: bool) -> Result<RootSet> {
    let t = poly.trimmed(profile);
    let degree = t.len() - 1;
    debug_assert_eq!(degree, profile.r);
    let eigs: Vec<Complex64> = if degree == 1 {
        vec![Complex64::new(-t[0] / t[1], 0.0)]
    } else {
        balanced_companion(t).complex_eigenvalues().iter().copied().collect()
    };
    let polished: Vec<Root> =
        cluster(&eigs).into_iter().map(|r| Root { value: newton_polish(t, r, extended), ..r }).collect();
    let roots = symmetrize(polished);
    let mut max_residual = 0.0f64;
    for r in &roots {
        let res = relative_residual(t, r.value);
        max_residual = max_residual.max(res);
    }
    if !(max_residual <= TOL_RESIDUAL) {
        return Err(LeapError::RootResidualTooLarge { residual: max_residual, tol: TOL_RESIDUAL });
    }
    let set = RootSet::from_roots(poly.kind, roots, max_residual);
    if set.total != degree {
        return Err(LeapError::IllConditioned(format!("found {} roots for a degree-{degree} polynomial", set.total)));
    }
    Ok(set)
}

/// Location counts of reverse-polynomial roots relative to the unit circle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocationReport {
    pub inside: usize,
    pub on: usize,
    pub outside: usize,
    pub expected: (usize, usize, usize),
    pub roots: RootSet,
}

/// Checks reverse-polynomial root locations against the counts implied by
/// the sign of the drift: `(k_p - [mu >= 0], [mu == 0], k_q - [mu <= 0])`.
pub fn root_location_counts(rootset: &RootSet, sign: DriftSign, profile: &StepProfile) -> Result<LocationReport> {
    let ge = usize::from(sign.sign != Ordering::Less);
    let le = usize::from(sign.sign != Ordering::Greater);
    let eq = usize::from(sign.sign == Ordering::Equal);
    let expected = (profile.k_p - ge, eq, profile.k_q - le);
    let mut roots = rootset.clone();
    if eq == 1 {
        roots.snap_unit_root()?;
    }
    let found = (roots.inside, roots.on, roots.outside);
    if found != expected {
        return Err(LeapError::LocationCountMismatch { found, expected });
    }
    Ok(LocationReport { inside: found.0, on: found.1, outside: found.2, expected, roots })
}

/// Reciprocals of forward roots, sorted by ascending modulus.
pub fn sorted_inverse_roots(rootset: &RootSet) -> RootSet {
    let roots = rootset.roots.iter().map(|r| Root { value: r.value.inv(), multiplicity: r.multiplicity }).collect();
    let kind = match rootset.kind {
        PolyKind::Forward => PolyKind::Reverse,
        PolyKind::Reverse => PolyKind::Forward,
    };
    RootSet::from_roots(kind, roots, rootset.max_residual)
}

/// Forward roots of a leap; the unit root is made exact at zero drift.
pub fn spectral_roots(params: &LeapParams, extended: bool) -> Result<RootSet> {
    let profile = params.step_profile();
    let poly = char_poly(params);
    let mut set = if extended { roots_with_precision(&poly, &profile, true)? } else { nonzero_roots(&poly, &profile)? };
    if params.drift_sign().sign == Ordering::Equal {
        set.snap_unit_root()?;
    }
    Ok(set)
}

/// Reverse-polynomial roots with their location law verified, retrying in
/// double-double when the counts disagree.
pub fn located_reverse_roots(params: &LeapParams, extended: bool) -> Result<LocationReport> {
    let profile = params.step_profile();
    let poly = reverse_char_poly(params);
    let attempt = |ext: bool| -> Result<LocationReport> {
        let set = if ext { roots_with_precision(&poly, &profile, true)? } else { nonzero_roots(&poly, &profile)? };
        root_location_counts(&set, params.drift_sign(), &profile)
    };
    match attempt(extended) {
        Err(LeapError::LocationCountMismatch { .. }) if !extended => attempt(true),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leap(p: &[f64], q: &[f64]) -> LeapParams {
        LeapParams::new(p, q, 0.0).unwrap()
    }

    fn roots_of(p: &[f64], q: &[f64]) -> RootSet {
        let l = leap(p, q);
        nonzero_roots(&char_poly(&l), &l.step_profile()).unwrap()
    }

    #[test]
    fn coefficient_examples() {
        assert_eq!(char_poly(&leap(&[0.25], &[0.75])).coeffs, vec![-0.75, 0.25]);
        let (p1, p2, q1, q2) = (0.1, 0.2, 0.3, 0.4);
        let c = char_poly(&leap(&[p1, p2], &[q1, q2])).coeffs;
        let want = [-q2, -(q1 + q2), p1 + p2, p2];
        for (a, b) in c.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(char_poly(&leap(&[0.5, 0.0], &[0.5, 0.0])).coeffs, vec![-0.0, -0.5, 0.5, 0.0]);
    }

    #[test]
    fn reverse_examples() {
        assert_eq!(reverse_char_poly(&leap(&[0.25], &[0.75])).coeffs, vec![-0.25, 0.75]);
        assert_eq!(reverse_char_poly(&leap(&[0.5], &[0.5])).coeffs, vec![-0.5, 0.5]);
        let l = leap(&[12.0 / 38.0, 6.0 / 38.0], &[13.0 / 38.0, 7.0 / 38.0]);
        let c = char_poly(&l).coeffs;
        let g = reverse_char_poly(&l).coeffs;
        let n = c.len();
        for j in 0..n {
            assert_eq!(g[j], -c[n - j - 1]);
        }
        // direct reading of the reverse definition for k = 2
        let (p1, p2, q1, q2) = (12.0 / 38.0, 6.0 / 38.0, 13.0 / 38.0, 7.0 / 38.0);
        let want = [-p2, -(p1 + p2), q1 + q2, q2];
        for (a, b) in g.iter().zip(want) {
            assert!((a - b).abs() < 1e-16);
        }
    }

    #[test]
    fn walk_roots() {
        let r = roots_of(&[0.25], &[0.75]);
        assert_eq!(r.total, 1);
        assert!((r.roots[0].value - Complex64::new(3.0, 0.0)).norm() < 1e-14);
        let r = roots_of(&[0.5], &[0.5]);
        assert!((r.roots[0].value.re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn roulette_roots_satisfy_vieta() {
        let (p1, p2, q1, q2) = (12.0 / 38.0, 6.0 / 38.0, 13.0 / 38.0, 7.0 / 38.0);
        let l = leap(&[p1, p2], &[q1, q2]);
        let r = nonzero_roots(&char_poly(&l), &l.step_profile()).unwrap();
        assert_eq!(r.total, 3);
        let zs: Vec<Complex64> = r.expanded().map(|(z, _)| z).collect();
        for z in &zs {
            assert!(char_poly(&l).eval(*z).norm() < 1e-10);
        }
        // monic cubic z^3 + a z^2 + b z + c with a = (p1+p2)/p2, c = -q2/p2
        let sum: Complex64 = zs.iter().sum();
        let prod: Complex64 = zs.iter().product();
        assert!((sum.re + (p1 + p2) / p2).abs() < 1e-12 && sum.im.abs() < 1e-12);
        assert!((prod.re - q2 / p2).abs() < 1e-12 && prod.im.abs() < 1e-12);
    }

    #[test]
    fn repeated_roots_are_clustered() {
        // chi = 0.5 (z - 1)(z + 1)^2
        let r = roots_of(&[0.0, 0.5], &[0.0, 0.5]);
        assert_eq!(r.total, 3);
        assert_eq!(r.roots.len(), 2);
        let double = r.roots.iter().find(|x| x.multiplicity == 2).unwrap();
        assert!((double.value + 1.0).norm() < 1e-7);
    }

    #[test]
    fn zero_roots_are_trimmed() {
        let r = roots_of(&[0.3, 0.0, 0.2], &[0.5, 0.0, 0.0]);
        assert_eq!(r.total, 3);
        assert!(r.roots.iter().all(|x| x.value.norm() > 1e-3));
    }

    #[test]
    fn inverse_order_and_ties() {
        let mk = |v: &[Complex64]| {
            RootSet::from_roots(
                PolyKind::Forward,
                v.iter().map(|&value| Root { value, multiplicity: 1 }).collect(),
                0.0,
            )
        };
        let inv = sorted_inverse_roots(&mk(&[Complex64::new(3.0, 0.0)]));
        assert!((inv.roots[0].value.re - 1.0 / 3.0).abs() < 1e-16);
        let inv = sorted_inverse_roots(&mk(&[Complex64::new(2.0, 0.0), Complex64::new(0.5, 0.0)]));
        assert_eq!(inv.roots[0].value.re, 0.5);
        assert_eq!(inv.roots[1].value.re, 2.0);
        let z = Complex64::new(0.3, 0.4);
        let inv = sorted_inverse_roots(&mk(&[z.conj().inv(), z.inv()]));
        assert!(inv.roots[0].value.im > 0.0);
        assert_eq!(inv.roots[1].value, inv.roots[0].value.conj());
    }

    #[test]
    fn location_examples() {
        let check = |p: &[f64], q: &[f64]| {
            let l = leap(p, q);
            located_reverse_roots(&l, false).unwrap()
        };
        let rep = check(&[0.4], &[0.6]);
        assert_eq!((rep.inside, rep.on, rep.outside), (1, 0, 0));
        assert!((rep.roots.roots[0].value.re - 2.0 / 3.0).abs() < 1e-14);
        let rep = check(&[0.5], &[0.5]);
        assert_eq!((rep.inside, rep.on, rep.outside), (0, 1, 0));
        assert_eq!(rep.roots.roots[0].value, Complex64::new(1.0, 0.0));
        let rep = check(&[12.0 / 38.0, 6.0 / 38.0], &[13.0 / 38.0, 7.0 / 38.0]);
        assert_eq!((rep.inside, rep.on, rep.outside), (2, 0, 1));
    }

    #[test]
    fn reverse_roots_are_reciprocals() {
        let l = leap(&[0.1, 0.15, 0.05], &[0.3, 0.2, 0.2]);
        let prof = l.step_profile();
        let fwd = sorted_inverse_roots(&nonzero_roots(&char_poly(&l), &prof).unwrap());
        let rev = nonzero_roots(&reverse_char_poly(&l), &prof).unwrap();
        assert_eq!(fwd.total, rev.total);
        for (a, b) in fwd.roots.iter().zip(&rev.roots) {
            assert!((a.value - b.value).norm() < 1e-10 * a.value.norm().max(1.0));
        }
    }
}

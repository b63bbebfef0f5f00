//! Double-double arithmetic used to re-polish polynomial roots when plain
//! `f64` evaluation cannot certify them.

use std::ops::{Add, Neg};

use num_complex::Complex64;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub fn new(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    pub fn mul_f64(self, b: f64) -> Dd {
        let (p, e) = two_prod(self.hi, b);
        let e = e + self.lo * b;
        let (hi, lo) = two_sum(p, e);
        Dd { hi, lo }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

impl Add for Dd {
    type Output = Dd;

    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let e = e + self.lo + o.lo;
        let (hi, lo) = two_sum(s, e);
        Dd { hi, lo }
    }
}

impl Neg for Dd {
    type Output = Dd;

    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct DdComplex {
    re: Dd,
    im: Dd,
}

impl DdComplex {
    fn mul_c64(self, z: Complex64) -> Self {
        Self { re: self.re.mul_f64(z.re) + -self.im.mul_f64(z.im), im: self.re.mul_f64(z.im) + self.im.mul_f64(z.re) }
    }

    fn add_f64(self, c: f64) -> Self {
        Self { re: self.re + Dd::new(c), im: self.im }
    }

    fn to_c64(self) -> Complex64 {
        Complex64::new(self.re.to_f64(), self.im.to_f64())
    }
}

/// Evaluates `sum coeffs[j] z^j` and its derivative in double-double.
pub fn horner_with_derivative(coeffs: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let mut val = DdComplex::default();
    let mut der = DdComplex::default();
    for &c in coeffs.iter().rev() {
        der = der.mul_c64(z);
        der.re = der.re + val.re;
        der.im = der.im + val.im;
        val = val.mul_c64(z).add_f64(c);
    }
    (val.to_c64(), der.to_c64())
}

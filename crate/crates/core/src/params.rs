//! Random leap parameterizations: validation, step support and step moments.
//!
//! A leap moves right by `j` with probability `p[j-1]`, left by `j` with
//! probability `q[j-1]`, and optionally stays put with probability `hold`.
//! All spectral computations work on the conditional step law with the hold
//! mass removed; see [`LeapParams::p`] and [`LeapParams::q`].

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{LeapError, Result};

/// Allowed deviation of the total probability mass from one.
pub const SUM_TOL: f64 = 1e-12;

/// Below this magnitude a floating-point drift is classified as zero.
pub const ZERO_DRIFT_TOL: f64 = 1e-14;

/// Below this magnitude a nonzero drift triggers a near-critical warning.
pub const NEAR_CRITICAL_TOL: f64 = 1e-9;

/// A probability as given by the user: a float, or an exact decimal/rational.
#[derive(Debug, Clone, PartialEq)]
pub struct Prob {
    pub value: f64,
    pub exact: Option<BigRational>,
}

impl Prob {
    pub fn float(value: f64) -> Self {
        Self { value, exact: None }
    }
}

impl From<f64> for Prob {
    fn from(value: f64) -> Self {
        Self::float(value)
    }
}

impl FromStr for Prob {
    type Err = LeapError;

    /// Parses `"0.25"`, `"1e-3"`, `"12/38"` or `"0.5/3"` exactly.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let exact = match s.split_once('/') {
            Some((num, den)) => {
                let num = parse_decimal(num)?;
                let den = parse_decimal(den)?;
                if den.is_zero() {
                    return Err(LeapError::InvalidInput(format!("zero denominator in {s:?}")));
                }
                num / den
            }
            None => parse_decimal(s)?,
        };
        let value = exact.to_f64().ok_or_else(|| LeapError::InvalidInput(format!("{s:?} is not representable")))?;
        Ok(Self { value, exact: Some(exact) })
    }
}

fn parse_decimal(s: &str) -> Result<BigRational> {
    let bad = || LeapError::InvalidInput(format!("not a decimal number: {s:?}"));
    let s = s.trim();
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => (&s[..pos], s[pos + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (negative, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    let digits: BigInt = format!("{int_part}{frac_part}0").parse().map_err(|_| bad())?;
    let scale = exponent - frac_part.len() as i32 - 1;
    let ten = BigInt::from(10);
    let mut r = BigRational::from_integer(digits);
    if scale >= 0 {
        r *= BigRational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        r /= BigRational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Ok(if negative { -r } else { r })
}

fn fmt_rational(r: &BigRational) -> String {
    if r.denom() == &BigInt::from(1) {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// One entry of the canonical JSON record: a number or an exact string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProbValue {
    Number(f64),
    Text(String),
}

impl ProbValue {
    fn to_prob(&self) -> Result<Prob> {
        match self {
            ProbValue::Number(v) => Ok(Prob::float(*v)),
            ProbValue::Text(s) => s.parse(),
        }
    }
}

fn default_hold() -> ProbValue {
    ProbValue::Number(0.0)
}

/// Canonical serialized form: `{"p": [...], "q": [...], "hold": 0.0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsRecord {
    pub p: Vec<ProbValue>,
    pub q: Vec<ProbValue>,
    #[serde(default = "default_hold")]
    pub hold: ProbValue,
}

#[derive(Debug, Clone, PartialEq)]
struct ExactSteps {
    p: Vec<BigRational>,
    q: Vec<BigRational>,
    hold: BigRational,
}

/// A validated random leap.
#[derive(Debug, Clone, PartialEq)]
pub struct LeapParams {
    raw_p: Vec<f64>,
    raw_q: Vec<f64>,
    hold: f64,
    p: Vec<f64>,
    q: Vec<f64>,
    exact: Option<ExactSteps>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StepProfile {
    pub k: usize,
    pub k_p: usize,
    pub k_q: usize,
    pub r: usize,
    pub gcd_support: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Drift {
    pub mu: f64,
    pub sigma2: f64,
}

/// Sign of the drift together with how it was decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DriftSign {
    pub sign: Ordering,
    /// Decided in exact rational arithmetic.
    pub exact: bool,
    /// Floating-point drift that is tiny (but possibly nonzero).
    pub near_critical: bool,
}

/// Validates raw step probabilities. See [`LeapParams::new`].
pub fn validate(raw_p: &[f64], raw_q: &[f64], hold: f64) -> Result<LeapParams> {
    LeapParams::new(raw_p, raw_q, hold)
}

impl LeapParams {
    pub fn new(raw_p: &[f64], raw_q: &[f64], hold: f64) -> Result<Self> {
        Self::build(raw_p.to_vec(), raw_q.to_vec(), hold, None)
    }

    /// Builds from user-facing probabilities; exact arithmetic is retained
    /// only when every entry was given exactly.
    pub fn from_probs(p: &[Prob], q: &[Prob], hold: &Prob) -> Result<Self> {
        let exact = match (
            p.iter().map(|x| x.exact.clone()).collect::<Option<Vec<_>>>(),
            q.iter().map(|x| x.exact.clone()).collect::<Option<Vec<_>>>(),
            hold.exact.clone(),
        ) {
            (Some(p), Some(q), Some(hold)) => Some(ExactSteps { p, q, hold }),
            _ => None,
        };
        let vp: Vec<f64> = p.iter().map(|x| x.value).collect();
        let vq: Vec<f64> = q.iter().map(|x| x.value).collect();
        Self::build(vp, vq, hold.value, exact)
    }

    pub fn from_strs(p: &[&str], q: &[&str], hold: &str) -> Result<Self> {
        let p = p.iter().map(|s| s.parse()).collect::<Result<Vec<Prob>>>()?;
        let q = q.iter().map(|s| s.parse()).collect::<Result<Vec<Prob>>>()?;
        Self::from_probs(&p, &q, &hold.parse()?)
    }

    pub fn from_record(rec: &ParamsRecord) -> Result<Self> {
        let p = rec.p.iter().map(ProbValue::to_prob).collect::<Result<Vec<_>>>()?;
        let q = rec.q.iter().map(ProbValue::to_prob).collect::<Result<Vec<_>>>()?;
        Self::from_probs(&p, &q, &rec.hold.to_prob()?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rec: ParamsRecord =
            serde_json::from_str(text).map_err(|e| LeapError::InvalidInput(format!("params JSON: {e}")))?;
        Self::from_record(&rec)
    }

    pub fn to_record(&self) -> ParamsRecord {
        match &self.exact {
            Some(ex) => ParamsRecord {
                p: ex.p.iter().map(|r| ProbValue::Text(fmt_rational(r))).collect(),
                q: ex.q.iter().map(|r| ProbValue::Text(fmt_rational(r))).collect(),
                hold: ProbValue::Text(fmt_rational(&ex.hold)),
            },
            None => ParamsRecord {
                p: self.raw_p.iter().copied().map(ProbValue::Number).collect(),
                q: self.raw_q.iter().copied().map(ProbValue::Number).collect(),
                hold: ProbValue::Number(self.hold),
            },
        }
    }

    fn build(raw_p: Vec<f64>, raw_q: Vec<f64>, hold: f64, exact: Option<ExactSteps>) -> Result<Self> {
        if raw_p.is_empty() || raw_p.len() != raw_q.len() {
            return Err(LeapError::InvalidInput(format!(
                "p and q must be nonempty and of equal length (got {} and {})",
                raw_p.len(),
                raw_q.len()
            )));
        }
        for (side, v) in [('p', &raw_p), ('q', &raw_q)] {
            for (index, &value) in v.iter().enumerate() {
                if !(value >= 0.0) || !value.is_finite() {
                    return Err(LeapError::NegativeEntry { side, index, value });
                }
            }
        }
        if !(hold >= 0.0) {
            return Err(LeapError::NegativeEntry { side: 'h', index: 0, value: hold });
        }
        if hold >= 1.0 {
            return Err(LeapError::HoldTooLarge(hold));
        }
        let sp: f64 = raw_p.iter().sum();
        let sq: f64 = raw_q.iter().sum();
        let total = sp + sq + hold;
        if (total - 1.0).abs() > SUM_TOL {
            return Err(LeapError::NotAProbability { sum: total, tol: SUM_TOL });
        }
        if sp <= 0.0 || sq <= 0.0 {
            return Err(LeapError::MonotoneDrift);
        }
        let moving = sp + sq;
        let p = raw_p.iter().map(|x| x / moving).collect();
        let q = raw_q.iter().map(|x| x / moving).collect();
        Ok(Self { raw_p, raw_q, hold, p, q, exact })
    }

    /// Maximum step size `k` (length of the probability vectors).
    pub fn k(&self) -> usize {
        self.p.len()
    }

    /// Rightward step law with the hold mass removed.
    pub fn p(&self) -> &[f64] {
        &self.p
    }

    /// Leftward step law with the hold mass removed.
    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn raw_p(&self) -> &[f64] {
        &self.raw_p
    }

    pub fn raw_q(&self) -> &[f64] {
        &self.raw_q
    }

    pub fn hold(&self) -> f64 {
        self.hold
    }

    pub fn is_exact(&self) -> bool {
        self.exact.is_some()
    }

    /// The chain with left and right swapped.
    pub fn mirrored(&self) -> Self {
        Self {
            raw_p: self.raw_q.clone(),
            raw_q: self.raw_p.clone(),
            hold: self.hold,
            p: self.q.clone(),
            q: self.p.clone(),
            exact: self.exact.as_ref().map(|e| ExactSteps { p: e.q.clone(), q: e.p.clone(), hold: e.hold.clone() }),
        }
    }

    pub fn step_profile(&self) -> StepProfile {
        step_profile(self)
    }

    pub fn drift(&self) -> Drift {
        drift_moments(self)
    }

    pub fn drift_sign(&self) -> DriftSign {
        let mu = self.drift().mu;
        if let Some(ex) = &self.exact {
            let mut acc = BigRational::zero();
            for (j, (pj, qj)) in ex.p.iter().zip(&ex.q).enumerate() {
                acc += (pj - qj) * BigRational::from_integer(BigInt::from(j + 1));
            }
            let sign = if acc.is_zero() {
                Ordering::Equal
            } else if acc.is_positive() {
                Ordering::Greater
            } else {
                Ordering::Less
            };
            let near_critical = sign != Ordering::Equal && mu.abs() < NEAR_CRITICAL_TOL;
            return DriftSign { sign, exact: true, near_critical };
        }
        let sign =
            if mu.abs() <= ZERO_DRIFT_TOL { Ordering::Equal } else { mu.partial_cmp(&0.0).unwrap_or(Ordering::Equal) };
        DriftSign { sign, exact: false, near_critical: mu != 0.0 && mu.abs() < NEAR_CRITICAL_TOL }
    }
}

impl fmt::Display for LeapParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p={:?} q={:?}", self.raw_p, self.raw_q)?;
        if self.hold > 0.0 {
            write!(f, " hold={}", self.hold)?;
        }
        Ok(())
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

pub fn step_profile(params: &LeapParams) -> StepProfile {
    let last_positive = |v: &[f64]| v.iter().rposition(|&x| x > 0.0).map(|i| i + 1).unwrap_or(0);
    let k_p = last_positive(&params.p);
    let k_q = last_positive(&params.q);
    let gcd_support = params
        .p
        .iter()
        .zip(&params.q)
        .enumerate()
        .filter(|(_, (a, b))| **a + **b > 0.0)
        .fold(0, |g, (j, _)| gcd(g, j as u64 + 1));
    StepProfile { k: params.k(), k_p, k_q, r: k_p + k_q - 1, gcd_support }
}

pub fn drift_moments(params: &LeapParams) -> Drift {
    let mut mu = 0.0;
    let mut second = 0.0;
    for (j, (pj, qj)) in params.p.iter().zip(&params.q).enumerate() {
        let j = (j + 1) as f64;
        mu += j * (pj - qj);
        second += j * j * (pj + qj);
    }
    Drift { mu, sigma2: second - mu * mu }
}

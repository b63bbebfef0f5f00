#![allow(dead_code)]

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use randleap::params::LeapParams;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Normalizes nonnegative weights into a leap, zeroing entries where `keep`
/// is false but never emptying either side.
pub fn leap_from_weights(w: &[f64], keep: &[bool], hold: f64) -> LeapParams {
    let k = w.len() / 2;
    let mut v: Vec<f64> = w.iter().zip(keep).map(|(x, &k)| if k { *x } else { 0.0 }).collect();
    for side in [0..k, k..2 * k] {
        if v[side.clone()].iter().all(|x| *x == 0.0) {
            let j = side.start + side.len() - 1;
            v[j] = w[j].max(0.05);
        }
    }
    let total: f64 = v.iter().sum::<f64>() / (1.0 - hold);
    let p: Vec<f64> = v[..k].iter().map(|x| x / total).collect();
    let q: Vec<f64> = v[k..].iter().map(|x| x / total).collect();
    // absorb rounding so the mass is one to within a few ulps
    let resid = 1.0 - hold - p.iter().sum::<f64>() - q.iter().sum::<f64>();
    let mut q = q;
    let j = q.iter().rposition(|x| *x > 0.0).unwrap();
    q[j] += resid;
    LeapParams::new(&p, &q, hold).unwrap()
}

/// Flat Dirichlet weights over the `2k` step probabilities, each entry
/// zeroed with probability 0.3.
pub fn random_leap(rng: &mut ChaCha8Rng, k: usize) -> LeapParams {
    let w: Vec<f64> = (0..2 * k).map(|_| -(1.0 - rng.random::<f64>()).ln() + 1e-3).collect();
    let keep: Vec<bool> = (0..2 * k).map(|_| rng.random::<f64>() >= 0.3).collect();
    leap_from_weights(&w, &keep, 0.0)
}

/// Random leap conditioned on `gcd = 1`.
pub fn random_aperiodic_leap(rng: &mut ChaCha8Rng, k: usize) -> LeapParams {
    loop {
        let l = random_leap(rng, k);
        if l.step_profile().gcd_support == 1 {
            return l;
        }
    }
}

/// Symmetric leap (`p = q`), hence exactly zero drift.
pub fn random_symmetric_leap(rng: &mut ChaCha8Rng, k: usize) -> LeapParams {
    let mut half: Vec<f64> = (0..k)
        .map(|_| if rng.random::<f64>() < 0.3 { 0.0 } else { -(1.0 - rng.random::<f64>()).ln() + 1e-3 })
        .collect();
    if half.iter().all(|x| *x == 0.0) {
        half[k - 1] = 1.0;
    }
    let total: f64 = 2.0 * half.iter().sum::<f64>();
    let p: Vec<f64> = half.iter().map(|x| x / total).collect();
    LeapParams::new(&p, &p, 0.0).unwrap()
}

pub fn leap_strategy(max_k: usize) -> impl Strategy<Value = LeapParams> {
    (1..=max_k)
        .prop_flat_map(|k| {
            (
                proptest::collection::vec(0.001f64..1.0, 2 * k),
                proptest::collection::vec(proptest::bool::weighted(0.75), 2 * k),
                prop_oneof![3 => Just(0.0), 1 => 0.0f64..0.6],
            )
        })
        .prop_map(|(w, keep, hold)| leap_from_weights(&w, &keep, hold))
}

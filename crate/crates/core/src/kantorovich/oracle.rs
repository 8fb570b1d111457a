//! Brute-force estimators used to cross-check the cone solver.
//!
//! These never call into [`super::cone`]: they evaluate the seminorm
//! directly on random directions and polish the best one by a
//! shrinking-step random walk. All of them return lower bounds.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{dnorm, MaxDNorm, SeminormSpec};
use crate::matrix::{gaussian_vector, vinner, CMatrix, CVector};

#[derive(Clone, Debug)]
pub struct OracleResult {
    pub value: f64,
    pub best: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
}

fn polish<F: Fn(&[f64]) -> f64>(f: F, mut best: Vec<f64>, mut val: f64, rng: &mut ChaCha8Rng, steps: usize) -> (Vec<f64>, f64) {
    let n = best.len();
    let mut sigma = 0.3;
    let mut fails = 0;
    for _ in 0..steps {
        let scale = best.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        let cand: Vec<f64> = best
            .iter()
            .map(|v| v + sigma * scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let cv = f(&cand);
        if cv > val {
            best = cand;
            val = cv;
            fails = 0;
        } else {
            fails += 1;
            if fails > 4 * n.max(2) {
                sigma *= 0.5;
                fails = 0;
                if sigma < 1e-10 {
                    break;
                }
            }
        }
    }
    (best, val)
}

/// `sup { c . x / L(x) }` over random directions `x` in coordinate space.
pub fn mk_oracle(sn: &SeminormSpec, c: &DVector<f64>, samples: usize, seed: u64) -> OracleResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = sn.dim();
    let ratio = |x: &[f64]| -> f64 {
        let l = sn.value(x);
        let num: f64 = x.iter().zip(c.iter()).map(|(a, b)| a * b).sum();
        if l <= 1e-12 * x.iter().map(|v| v.abs()).fold(0.0, f64::max) {
            0.0
        } else {
            num.abs() / l
        }
    };
    let mut best = vec![0.0; n];
    let mut val = 0.0;
    for _ in 0..samples {
        let x: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let v = ratio(&x);
        if v > val {
            val = v;
            best = x;
        }
    }
    let (best, val) = polish(ratio, best, val, &mut rng, 20_000);
    OracleResult {
        value: val,
        best,
        samples,
        seed,
    }
}

/// `sup { |<v, zeta>| / (|zeta| + |D zeta|) }` over random `zeta`.
pub fn dual_dnorm_oracle(v: &CVector, d: &CMatrix, samples: usize, seed: u64) -> OracleResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = v.len();
    let ratio = |x: &[f64]| -> f64 {
        let z = super::from_real(x);
        let den = dnorm(d, &z);
        if den <= 0.0 {
            0.0
        } else {
            vinner(&z, v).norm() / den
        }
    };
    let mut best = vec![0.0; 2 * n];
    let mut val = 0.0;
    for _ in 0..samples {
        let z = gaussian_vector(n, &mut rng);
        let x: Vec<f64> = super::to_real(&z).iter().copied().collect();
        let r = ratio(&x);
        if r > val {
            val = r;
            best = x;
        }
    }
    let (best, val) = polish(ratio, best, val, &mut rng, 20_000);
    OracleResult {
        value: val,
        best,
        samples,
        seed,
    }
}

/// `sup { |<v, zeta>| / N(zeta) }` over random `zeta` for a max-form norm.
pub fn max_dnorm_dual_oracle(nd: &MaxDNorm, v: &CVector, samples: usize, seed: u64) -> OracleResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = v.len();
    let ratio = |x: &[f64]| -> f64 {
        let z = super::from_real(x);
        let den = nd.value(&z);
        if den <= 0.0 {
            0.0
        } else {
            vinner(&z, v).norm() / den
        }
    };
    let mut best = vec![0.0; 2 * n];
    let mut val = 0.0;
    for _ in 0..samples {
        let z = gaussian_vector(n, &mut rng);
        let x: Vec<f64> = super::to_real(&z).iter().copied().collect();
        let r = ratio(&x);
        if r > val {
            val = r;
            best = x;
        }
    }
    let (best, val) = polish(ratio, best, val, &mut rng, 20_000);
    OracleResult {
        value: val,
        best,
        samples,
        seed,
    }
}

/// Seeds used for the oracle runs in reports.
pub fn oracle_seed(base: u64, k: u64) -> u64 {
    base.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k)
}

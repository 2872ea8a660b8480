//! Seeded low-discrepancy sampling of chart domains.
//!
//! Latin-hypercube stratification: each axis is cut into `n` strata, the
//! strata are permuted independently per axis, and one uniform draw is taken
//! inside each stratum. Identical (box, n, seed) inputs give identical
//! samples.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::ChartDomain;

pub fn sample_box(domain: &ChartDomain, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let m = domain.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut strata: Vec<Vec<usize>> = Vec::with_capacity(m);
    for _ in 0..m {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        strata.push(order);
    }
    (0..n)
        .map(|k| {
            (0..m)
                .map(|axis| {
                    let (lo, hi) = domain.interval(axis);
                    let width = (hi - lo) / n as f64;
                    let stratum = strata[axis][k] as f64;
                    lo + width * (stratum + rng.random::<f64>())
                })
                .collect()
        })
        .collect()
}

/// Uniform momentum covectors in [-1, 1]^m, seeded.
pub fn sample_momenta(m: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    (0..n)
        .map(|_| (0..m).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}

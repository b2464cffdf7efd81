//! Seed derivation and complex Gaussian sampling.
//!
//! Every random draw in the crate goes through an explicit seed so that
//! parallel callers can derive independent streams without sharing state.

use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rand_distr::{Distribution, StandardNormal};

use crate::C64;

pub type Rng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn splitmix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed of stream `index` from a master seed.
pub fn mix(master: u64, index: u64) -> u64 {
    splitmix(master ^ splitmix(index.wrapping_add(1).wrapping_mul(GOLDEN)))
}

pub fn rng(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Uniform sample in [0, 1) with 53 bits of precision.
pub fn uniform<R: RngCore>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// One draw of CN(0, 1).
pub fn complex_normal<R: RngCore>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * core::f64::consts::FRAC_1_SQRT_2
}

/// `rows x cols` matrix of i.i.d. CN(0, 1) entries, filled row by row.
pub fn complex_normal_matrix<R: RngCore>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<C64> {
    let mut m = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = complex_normal(rng);
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mix_separates_neighbouring_streams() {
        let a = mix(7, 0);
        let b = mix(7, 1);
        assert_ne!(a, b);
        assert_ne!(mix(8, 0), a);
        assert_eq!(mix(7, 1), b);
    }

    #[test]
    fn complex_normal_has_unit_power() {
        let mut r = rng(3);
        let n = 20_000;
        let p: f64 = (0..n).map(|_| complex_normal(&mut r).norm_sqr()).sum::<f64>() / n as f64;
        assert!((p - 1.0).abs() < 0.03, "{p}");
    }

    #[test]
    fn uniform_stays_in_unit_interval() {
        let mut r = rng(11);
        for _ in 0..1000 {
            let u = uniform(&mut r);
            assert!((0.0..1.0).contains(&u));
        }
    }
}

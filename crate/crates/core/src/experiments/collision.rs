//! Output collisions of one-bit quantized MIMO: distinct symbol blocks that
//! produce identical quantizer outputs.

use std::collections::HashMap;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::comms::{complex_gaussian, make_constellation, rayleigh_channel, ConstellationName};
use crate::quadrature::integrate;
use crate::rng::substream;
use crate::{CMatrix, CVector, Error, Result};

/// Largest number of symbol blocks [`empirical_collision`] enumerates.
pub const MAX_BLOCKS: usize = 4096;

pub(crate) fn check_enumerable(order: usize, n: usize) -> Result<usize> {
    let mut blocks: usize = 1;
    for _ in 0..n {
        blocks = blocks.saturating_mul(order);
        if blocks > MAX_BLOCKS {
            return Err(Error::Config(format!("{order}^{n} symbol blocks exceed the enumeration limit {MAX_BLOCKS}")));
        }
    }
    Ok(blocks)
}

/// `L^N (L^N - 1) / 2^(2K + 1)`: expected number of colliding block pairs
/// when the `2K` output signs are uniform and independent.
pub fn collision_probability(order: u64, n: u32, k: u32) -> Result<f64> {
    let mut blocks: u64 = 1;
    for _ in 0..n {
        blocks = blocks
            .checked_mul(order)
            .filter(|&b| b < 1u64 << 60)
            .ok_or_else(|| Error::invalid(format!("{order}^{n} overflows the 2^60 guard")))?;
    }
    let b = blocks as f64;
    Ok(b * (b - 1.0) * 0.5 * 0.25f64.powi(k as i32))
}

/// Noiseless one-bit output `sgn Re(Hs) + j sgn Im(Hs)` with zero mapped to -1.
pub fn one_bit_sign_output(h: &CMatrix, s: &CVector) -> CVector {
    let sg = |x: f64| if x > 0.0 { 1.0 } else { -1.0 };
    (h * s).map(|z| Complex64::new(sg(z.re), sg(z.im)))
}

/// `Pr(s + v > 0)` for real `v ~ N(0, n0/2)`.
pub fn sign_flip_probability(s: f64, n0: f64) -> f64 {
    if n0 <= 0.0 {
        return if s > 0.0 { 1.0 } else { 0.0 };
    }
    let sd = (n0 / 2.0).sqrt();
    let pdf = |x: f64| (-(x * x) / (2.0 * sd * sd)).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt());
    integrate(pdf, -s, f64::INFINITY, 1e-14)
}

fn sign_key(r: &CVector) -> u128 {
    let mut key = 0u128;
    for (k, z) in r.iter().enumerate() {
        if z.re > 0.0 {
            key |= 1 << (2 * k);
        }
        if z.im > 0.0 {
            key |= 1 << (2 * k + 1);
        }
    }
    key
}

/// Number of colliding unordered block pairs for one channel draw.
fn colliding_pairs(h: &CMatrix, alphabet: &[Complex64], n0: f64, rng: &mut impl rand::Rng) -> u64 {
    let (k, n) = h.shape();
    let order = alphabet.len();
    let blocks = order.pow(n as u32);
    let mut counts: HashMap<u128, u64> = HashMap::with_capacity(blocks);
    let mut s = CVector::zeros(n);
    for idx in 0..blocks {
        let mut rem = idx;
        for j in 0..n {
            s[j] = alphabet[rem % order];
            rem /= order;
        }
        let mut r = h * &s;
        if n0 > 0.0 {
            for i in 0..k {
                r[i] += complex_gaussian(rng, n0);
            }
        }
        *counts.entry(sign_key(&r)).or_insert(0) += 1;
    }
    counts.values().map(|&c| c * (c.saturating_sub(1)) / 2).sum()
}

/// Monte-Carlo mean (and 95% CI half-width) of the number of distinct block
/// pairs with identical one-bit outputs, over `trials` Rayleigh draws of the
/// `K x N` channel with independent noise per block.
pub fn empirical_collision(order: usize, n: usize, k: usize, n0: f64, trials: u64, seed: u64) -> Result<(f64, f64)> {
    check_enumerable(order, n)?;
    if k == 0 || k > 64 {
        return Err(Error::invalid(format!("K must be in 1..=64, got {k}")));
    }
    if trials == 0 {
        return Err(Error::invalid("trials must be >= 1"));
    }
    let alphabet = make_constellation(ConstellationName::from_order(order)?).points;
    let cell = crate::rng::cell_id(&format!("collision|L={order}|N={n}|K={k}|n0={n0:e}"));
    let per_trial: Vec<u64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = substream(seed, cell, t);
            let h = rayleigh_channel(k, n, &mut rng);
            colliding_pairs(&h, &alphabet, n0, &mut rng)
        })
        .collect();
    Ok(super::runner::mean_ci(per_trial.iter().map(|&c| c as f64)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn formula_values() {
        assert_eq!(collision_probability(2, 1, 1).unwrap(), 0.25);
        assert_eq!(collision_probability(2, 2, 2).unwrap(), 12.0 / 32.0);
        assert_eq!(collision_probability(4, 3, 2000).unwrap(), 0.0);
        assert!(collision_probability(2, 61, 1).is_err());
    }

    #[test]
    fn worked_example() {
        let i2 = CMatrix::identity(2, 2);
        let mut h = CMatrix::zeros(4, 2);
        h.view_mut((0, 0), (2, 2)).copy_from(&i2);
        h.view_mut((2, 0), (2, 2)).copy_from(&i2);
        let s1 = CVector::from_vec(vec![c(-1.0, 3.0), c(3.0, -1.0)]);
        let s2 = CVector::from_vec(vec![c(-3.0, 1.0), c(1.0, -3.0)]);
        let expect = CVector::from_vec(vec![c(-1.0, 1.0), c(1.0, -1.0), c(-1.0, 1.0), c(1.0, -1.0)]);
        assert_eq!(one_bit_sign_output(&h, &s1), expect);
        assert_eq!(one_bit_sign_output(&h, &s2), expect);
    }

    #[test]
    fn closer_symbols_flip_more_often() {
        for n0 in [0.1, 1.0, 10.0] {
            assert!(sign_flip_probability(-1.0, n0) > sign_flip_probability(-3.0, n0));
        }
    }

    #[test]
    fn noiseless_qpsk_rarely_collides_at_moderate_k() {
        let (m, _) = empirical_collision(4, 2, 16, 0.0, 50, 1).unwrap();
        assert!(m < 0.05, "{m}");
    }
}

//! Reproducible low-discrepancy direction sets on `S^{n−1}`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::vecops::{norm, Vector};

const PRIMES: [u64; 24] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
];

fn radical_inverse(mut k: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while k > 0 {
        out += f * (k % base) as f64;
        k /= base;
        f *= inv;
    }
    out
}

/// `count` unit vectors in `R^n`. The circle gets equally spaced angles with
/// a seeded offset; higher dimensions map a seeded, randomly shifted Halton
/// sequence through the inverse normal CDF and normalize.
pub fn directions(n: usize, count: usize, seed: u64) -> Vec<Vector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if n == 1 {
        return (0..count)
            .map(|k| vec![if k % 2 == 0 { 1.0 } else { -1.0 }])
            .collect();
    }
    if n == 2 {
        let offset: f64 = rng.random();
        return (0..count)
            .map(|k| {
                let a = std::f64::consts::TAU * (k as f64 + offset) / count as f64;
                vec![a.cos(), a.sin()]
            })
            .collect();
    }
    assert!(
        n <= PRIMES.len(),
        "direction sets support up to {} dimensions",
        PRIMES.len()
    );
    let shifts: Vec<f64> = (0..n).map(|_| rng.random()).collect();
    let normal = Normal::standard();
    let mut out = Vec::with_capacity(count);
    let mut k = 1u64;
    while out.len() < count {
        let v: Vector = (0..n)
            .map(|j| {
                let u = (radical_inverse(k, PRIMES[j]) + shifts[j]).fract();
                normal.inverse_cdf(u.clamp(1e-12, 1.0 - 1e-12))
            })
            .collect();
        k += 1;
        let len = norm(&v);
        if len > 1e-9 {
            out.push(v.iter().map(|c| c / len).collect());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_and_reproducible() {
        for n in [2, 3, 5] {
            let a = directions(n, 257, 9);
            assert_eq!(a.len(), 257);
            assert!(a
                .iter()
                .all(|d| (norm(d) - 1.0).abs() < 1e-12 && d.len() == n));
            assert_eq!(a, directions(n, 257, 9));
            assert_ne!(a, directions(n, 257, 10));
        }
    }

    #[test]
    fn roughly_balanced() {
        let d = directions(3, 4096, 1);
        for j in 0..3 {
            let mean: f64 = d.iter().map(|v| v[j]).sum::<f64>() / d.len() as f64;
            assert!(mean.abs() < 0.02, "coordinate {j} mean {mean}");
        }
    }

    #[test]
    fn radical_inverse_base_two() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(3, 2), 0.75);
        assert_eq!(radical_inverse(6, 2), 0.375);
    }
}

//! Deterministic random streams.
//!
//! Every random quantity in the crate is drawn from a counter-based ChaCha8
//! stream keyed by `(seed, stream id)`, so trial-level parallelism cannot
//! perturb results: stream `k` yields the same bytes no matter which thread
//! consumes it. Normal variates use an explicit Box-Muller transform to keep
//! the uniform-to-normal mapping pinned down rather than inherited from a
//! distribution crate.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; mixes experiment seed and trial coordinates into a
/// fresh 64-bit seed.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a per-trial seed from an experiment seed and up to two indices
/// (typically grid position and trial number). Enlarging a grid never
/// changes the seed of an existing cell.
pub fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    splitmix64(seed ^ splitmix64(a.wrapping_mul(0x9e37_79b9).wrapping_add(b)))
}

/// A seeded ChaCha8 stream.
pub fn stream(seed: u64, stream_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// Gaussian source over a ChaCha stream.
///
/// Uniforms come from the top 53 bits of `next_u64`; pairs of normals from
/// Box-Muller. The spare variate is cached so consecutive draws consume the
/// stream at a fixed, schedule-independent rate.
pub struct NormalSource {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl NormalSource {
    pub fn new(rng: ChaCha8Rng) -> Self {
        Self { rng, spare: None }
    }

    pub fn from_seed(seed: u64, stream_id: u64) -> Self {
        Self::new(stream(seed, stream_id))
    }

    /// Uniform in [0, 1).
    pub fn uniform01(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in (0, 1] (safe to pass through `ln`).
    pub fn uniform01_open_left(&mut self) -> f64 {
        1.0 - self.uniform01()
    }

    /// A single standard normal.
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform01_open_left();
        let u2 = self.uniform01();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }

    /// A random sign with equal probability.
    pub fn sign(&mut self) -> f64 {
        if self.rng.next_u64() & 1 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible() {
        let mut a = NormalSource::from_seed(7, 3);
        let mut b = NormalSource::from_seed(7, 3);
        for _ in 0..100 {
            assert_eq!(a.standard_normal().to_bits(), b.standard_normal().to_bits());
        }
    }

    #[test]
    fn distinct_streams_differ() {
        let mut a = NormalSource::from_seed(7, 0);
        let mut b = NormalSource::from_seed(7, 1);
        let same = (0..32).filter(|_| a.uniform01() == b.uniform01()).count();
        assert!(same < 4);
    }

    #[test]
    fn derive_seed_spreads_indices() {
        let s0 = derive_seed(42, 0, 0);
        let s1 = derive_seed(42, 0, 1);
        let s2 = derive_seed(42, 1, 0);
        assert_ne!(s0, s1);
        assert_ne!(s0, s2);
        assert_ne!(s1, s2);
    }

    #[test]
    fn normal_moments_roughly_standard() {
        let mut src = NormalSource::from_seed(11, 0);
        let n = 200_000;
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..n {
            let z = src.standard_normal();
            sum += z;
            sq += z * z;
        }
        let mean = sum / n as f64;
        let var = sq / n as f64 - mean * mean;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }
}

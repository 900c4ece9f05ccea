//! Counter-based pseudo-random generation.
//!
//! Seeds are derived from `(root, round, index)` triples by chaining the
//! SplitMix64 finalizer. A stream is the SplitMix64 sequence
//! `mix(seed + (i + 1) * GOLDEN)`, so element `i` depends only on `(seed, i)`.
//! Gaussian draws use Box-Muller on consecutive counter pairs with the
//! `libm` implementations of `log`, `cos` and `sin`, which are the same on
//! every platform. The transform is part of the replay contract; changing it
//! invalidates every stored seed history.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::numeric::Vector;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Domain tags keep independent consumers of one root seed apart.
pub mod domain {
    pub const PERTURBATION: u64 = 0x5045_5254_5552_4221;
    pub const CLIENT_SAMPLING: u64 = 0x434C_4945_4E54_5321;
    pub const BATCH: u64 = 0x4241_5443_4845_5321;
    pub const SPSA: u64 = 0x5350_5341_5345_4544;
    pub const INIT: u64 = 0x494E_4954_5041_5241;
    pub const DATA: u64 = 0x4441_5441_5345_5421;
    pub const PARTITION: u64 = 0x5041_5254_4954_494F;
    pub const DIAGNOSTIC: u64 = 0x4449_4147_4E4F_5354;
    pub const LATENCY: u64 = 0x4C41_5445_4E43_5921;
}

/// SplitMix64 output function.
#[inline]
pub fn mix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Identifies one perturbation direction of one round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub root_seed: u64,
    pub round: u64,
    /// 1-based, in `[1, P]`.
    pub perturbation_index: u32,
}

impl SeedSpec {
    pub fn new(root_seed: u64, round: u64, perturbation_index: u32) -> Self {
        SeedSpec {
            root_seed,
            round,
            perturbation_index,
        }
    }
}

/// Hashes a tagged triple into a 64-bit seed.
pub fn derive_tagged(root: u64, tag: u64, a: u64, b: u64) -> u64 {
    let h = mix64(root ^ tag);
    let h = mix64(h ^ a.wrapping_mul(0xD6E8_FEB8_6659_FD93));
    mix64(h ^ b.wrapping_mul(0xA076_1D64_78BD_642F))
}

/// Stream seed `s_p^t` for a perturbation direction.
pub fn derive_seed(spec: SeedSpec) -> u64 {
    derive_tagged(
        spec.root_seed,
        domain::PERTURBATION,
        spec.round,
        u64::from(spec.perturbation_index),
    )
}

/// The `P` seeds of round `t`, ordered by `p = 1..=P`.
pub fn round_seeds(root: u64, round: u64, perturbations: usize) -> Vec<u64> {
    (1..=perturbations as u32)
        .map(|p| derive_seed(SeedSpec::new(root, round, p)))
        .collect()
}

/// Random-access counter stream.
#[derive(Debug, Clone, Copy)]
pub struct CounterStream {
    seed: u64,
}

impl CounterStream {
    pub fn new(seed: u64) -> Self {
        CounterStream { seed }
    }

    pub fn word(&self, i: u64) -> u64 {
        mix64(self.seed.wrapping_add(i.wrapping_add(1).wrapping_mul(GOLDEN)))
    }

    /// Uniform in `(0, 1]`.
    pub fn unit_open_closed(&self, i: u64) -> f64 {
        ((self.word(i) >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[0, 1)`.
    pub fn unit(&self, i: u64) -> f64 {
        (self.word(i) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal draw number `i` (Box-Muller, pair `i / 2`).
    pub fn gaussian(&self, i: u64) -> f64 {
        let pair = i / 2;
        let u1 = self.unit_open_closed(2 * pair);
        let u2 = self.unit(2 * pair + 1);
        let r = (-2.0 * libm::log(u1)).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        if i % 2 == 0 {
            r * libm::cos(angle)
        } else {
            r * libm::sin(angle)
        }
    }
}

/// `dim` i.i.d. standard normals from `seed`. Prefix-stable: the first `k`
/// entries do not depend on `dim`.
pub fn gaussian_vector(seed: u64, dim: usize) -> Vector {
    let stream = CounterStream::new(seed);
    let mut out = Vec::with_capacity(dim);
    let mut i = 0u64;
    while (i as usize) < dim {
        let pair = i / 2;
        let u1 = stream.unit_open_closed(2 * pair);
        let u2 = stream.unit(2 * pair + 1);
        let r = (-2.0 * libm::log(u1)).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        out.push(r * libm::cos(angle));
        if out.len() < dim {
            out.push(r * libm::sin(angle));
        }
        i += 2;
    }
    Vector::new(out)
}

/// General-purpose seeded generator for sampling decisions (client subsets,
/// batches, partitions). Never shared or global.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

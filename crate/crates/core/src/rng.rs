//! Seeded random streams.
//!
//! Every random draw in the crate comes from ChaCha8 seeded with
//! `ChaCha8Rng::seed_from_u64(seed)` and then switched onto a numbered stream with
//! `set_stream(stream)`. Streams with different ids are independent, so per-state
//! shot generation and chunked Monte Carlo can run in any order (or in parallel)
//! and still produce the same values.
//!
//! Stream ids in use:
//!
//! | id                         | consumer                              |
//! |----------------------------|---------------------------------------|
//! | `state`                    | shots of one prepared state           |
//! | `INIT_STREAM`              | MLP weight initialisation             |
//! | `SHUFFLE_STREAM`           | mini-batch shuffling during training  |
//! | `UNIFORM_LABEL_STREAM`     | random label fixtures                 |

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const INIT_STREAM: u64 = 1 << 32;
pub const SHUFFLE_STREAM: u64 = (1 << 32) + 1;
pub const UNIFORM_LABEL_STREAM: u64 = (1 << 32) + 2;

pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One pair of independent standard normals via the Box–Muller transform.
///
/// `u1` is drawn from (0, 1] so the logarithm is always finite.
pub fn standard_normal_pair<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen::<f64>();
    let radius = (-2.0 * u1.ln()).sqrt();
    let angle = std::f64::consts::TAU * u2;
    (radius * angle.cos(), radius * angle.sin())
}

/// Derive the seed for a named pipeline stage from a top-level experiment seed.
///
/// SplitMix64 finaliser over `seed + stage`, so neighbouring stages get unrelated seeds.
pub fn stage_seed(seed: u64, stage: u64) -> u64 {
    let mut z = seed.wrapping_add(stage.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

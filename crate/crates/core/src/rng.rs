//! Deterministic randomness: a counter-based generator split into named
//! streams, so every stochastic operation can be replayed bit-exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Root of all randomness for a run. Streams derived from the same seed and
/// stream id are identical across runs and platforms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Streams {
    seed: u64,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Streams { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent stream `id` of this seed.
    pub fn stream(&self, id: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(id);
        rng
    }

    /// Nested substream, for per-trial forks inside a tagged operation.
    pub fn substream(&self, tag: u64, trial: u64) -> ChaCha8Rng {
        self.stream(tag.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(trial))
    }
}

/// Samples an index proportionally to `weights` (assumed non-negative, not
/// all zero). Cumulative scan keeps the draw reproducible.
pub fn sample_weighted<R: Rng>(rng: &mut R, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    debug_assert!(total > 0.0);
    let u: f64 = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    // Rounding pushed u past the last bucket boundary.
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

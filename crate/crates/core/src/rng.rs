//! Keyed random streams.
//!
//! Every particle draws from its own ChaCha8 stream whose 256-bit key is a
//! function of `(seed, label, context)` only. ChaCha is counter based, so a
//! stream can be parked as `(key, word position)` and resumed later without
//! keeping the generator buffer alive. Results therefore do not depend on the
//! order in which particles or replicas are processed.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::real::{lit, Real};
use crate::state::ParticleId;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replica `index` derived from a base seed.
pub fn replica_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index.wrapping_mul(GOLDEN) ^ 0x5245_504C_4943_4100))
}

/// 256-bit stream key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey([u64; 4]);

impl StreamKey {
    pub fn new(seed: u64, context: u64) -> Self {
        let mut lanes = [0u64; 4];
        for (j, lane) in lanes.iter_mut().enumerate() {
            let j = j as u64;
            *lane = splitmix64(seed.wrapping_add(j.wrapping_mul(GOLDEN)))
                ^ splitmix64(context ^ (j << 56) ^ 0xC0_47E7);
        }
        StreamKey(lanes)
    }

    /// Key of child `index`; folding this over a label gives the label's key.
    pub fn child(&self, index: u32) -> Self {
        let mut lanes = self.0;
        let salt = (u64::from(index) + 1).wrapping_mul(GOLDEN);
        for (j, lane) in lanes.iter_mut().enumerate() {
            *lane = splitmix64(*lane ^ splitmix64(salt ^ ((j as u64) << 60)));
        }
        StreamKey(lanes)
    }

    pub fn descend(&self, path: &[u32]) -> Self {
        path.iter().fold(*self, |key, &i| key.child(i))
    }

    fn seed_bytes(&self) -> [u8; 32] {
        let mut bytes = [0u8; 32];
        for (chunk, lane) in bytes.chunks_exact_mut(8).zip(self.0) {
            chunk.copy_from_slice(&lane.to_le_bytes());
        }
        bytes
    }

    pub fn stream(&self) -> RandomStream {
        RandomStream { rng: ChaCha8Rng::from_seed(self.seed_bytes()), key: *self }
    }

    /// Resumes the stream at a previously recorded word position.
    pub fn stream_at(&self, word_pos: u128) -> RandomStream {
        let mut s = self.stream();
        s.rng.set_word_pos(word_pos);
        s
    }
}

/// Deterministic stream keyed by `(seed, id, context)`.
pub fn stream_for(seed: u64, id: &ParticleId, context: u64) -> RandomStream {
    StreamKey::new(seed, context).descend(id.path()).stream()
}

/// A random stream owned by exactly one particle or Monte Carlo path.
#[derive(Debug, Clone)]
pub struct RandomStream {
    rng: ChaCha8Rng,
    key: StreamKey,
}

impl RandomStream {
    pub fn key(&self) -> StreamKey {
        self.key
    }

    pub fn word_pos(&self) -> u128 {
        self.rng.get_word_pos()
    }

    /// Uniform draw on the open interval (0, 1).
    #[inline]
    pub fn uniform<R: Real>(&mut self) -> R {
        let bits = self.rng.next_u64() >> 11;
        lit((bits as f64 + 0.5) * (1.0 / (1u64 << 53) as f64))
    }

    #[inline]
    pub fn normal<R: Real>(&mut self) -> R {
        let z: f64 = self.rng.sample(StandardNormal);
        lit(z)
    }

    /// Exponential draw with the given rate (mean `1 / rate`).
    #[inline]
    pub fn exponential<R: Real>(&mut self, rate: R) -> R {
        let u: R = self.uniform();
        -u.ln() / rate
    }

    /// Bernoulli trial with success probability `p`.
    #[inline]
    pub fn bernoulli<R: Real>(&mut self, p: R) -> bool {
        self.uniform::<R>() < p
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

//! Seeded random streams for reproducible generation.
//!
//! Every stochastic quantity draws from its own ChaCha12 stream so that
//! adding or removing one variable never perturbs the draws of another, and
//! replications are reproducible byte-for-byte: stream id = `rep * STRIDE +
//! variable`. ChaCha output is platform independent.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Stream slots reserved per replication.
pub const STREAM_STRIDE: u64 = 32;

/// Named per-variable stream offsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamId {
    Covariate = 0,
    Confounder = 1,
    Auxiliary = 2,
    Domain = 3,
    Treatment = 4,
    ShortTermNoise = 5,
    LongTermNoise = 6,
    Counterfactual = 7,
    Shuffle = 8,
    Corruption = 9,
}

/// ChaCha12 stream for `(seed, rep, variable)`.
pub fn stream(seed: u64, rep: u64, id: StreamId) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(rep.wrapping_mul(STREAM_STRIDE).wrapping_add(id as u64));
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let mut a = stream(7, 0, StreamId::Covariate);
        let mut b = stream(7, 0, StreamId::Covariate);
        let mut c = stream(7, 0, StreamId::Confounder);
        let xa: f64 = a.random();
        let xb: f64 = b.random();
        let xc: f64 = c.random();
        assert_eq!(xa, xb);
        assert_ne!(xa, xc);
    }

    #[test]
    fn reps_do_not_overlap() {
        let mut a = stream(7, 1, StreamId::Covariate);
        let mut b = stream(7, 2, StreamId::Covariate);
        let xa: f64 = a.random();
        let xb: f64 = b.random();
        assert_ne!(xa, xb);
    }
}

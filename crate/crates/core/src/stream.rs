//! Counter-keyed random streams.
//!
//! Every random quantity in a simulation is addressed by
//! `(seed, domain, trial, link)`. Each address is hashed into an independent
//! SplitMix64 state, so a draw never depends on how trials are partitioned
//! across workers or in which order they run.

use rand::SeedableRng;
use rand_xoshiro::SplitMix64;

/// What a stream is used for. Distinct domains never share draws even for
/// equal `(seed, trial, link)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Domain {
    Topology = 1,
    LinkSnr = 2,
    ComplexGain = 3,
    Noise = 4,
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The random stream of one trial (one quasi-static channel period).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialStream {
    seed: u64,
    trial: u64,
}

impl TrialStream {
    pub fn new(seed: u64, trial: u64) -> Self {
        Self { seed, trial }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn trial(&self) -> u64 {
        self.trial
    }

    /// Generator for one `(domain, link)` slot of this trial.
    #[inline]
    pub fn rng(&self, domain: Domain, link: u64) -> SplitMix64 {
        let mut key = mix64(
            self.seed
                .wrapping_add(GOLDEN_GAMMA.wrapping_mul(domain as u64)),
        );
        key = mix64(key ^ self.trial.wrapping_mul(GOLDEN_GAMMA));
        key = mix64(key ^ link.wrapping_add(1).wrapping_mul(0xD1B5_4A32_D192_ED03));
        SplitMix64::seed_from_u64(key)
    }
}

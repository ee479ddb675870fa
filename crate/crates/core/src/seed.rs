//! Deterministic seed substreams.
//!
//! Every random decision in the toolkit draws from an RNG keyed by a
//! *path* — a master seed plus a list of integer coordinates naming the
//! consumer (e.g. `[POWER_SIM, 3, CHOICE, network, wave, agent]`). Streams
//! for different paths are statistically independent, and because no RNG is
//! ever shared across tasks, results are identical however the work is
//! scheduled (sequential, rayon, any thread count).

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Path tags for top-level stages. Kept in one place so substreams can
/// never collide by accident.
pub mod tag {
    /// Agent bias draw (`b_j`).
    pub const BIAS: u64 = 0x01;
    /// Agent choice draws (one uniform per trial).
    pub const CHOICE: u64 = 0x02;
    /// Per-recipient resampling draws.
    pub const RESAMPLE: u64 = 0x03;
    /// Per-recipient tie-break coin for presented signals.
    pub const TIE: u64 = 0x04;
    /// Posterior sampler chains.
    pub const MCMC: u64 = 0x05;
    /// One simulated experiment inside a power analysis.
    pub const POWER_SIM: u64 = 0x06;
    /// In-loop posterior fits during a simulated experiment.
    pub const FIT: u64 = 0x07;
}

/// SplitMix64 step: the standard 64-bit finalizer-based generator used
/// here purely as a mixing function.
#[inline]
fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a 64-bit subseed from a master seed and a path of coordinates.
///
/// The fold alternates mixing and absorbing so that paths of different
/// lengths and prefixes land in unrelated streams.
pub fn derive(master: u64, path: &[u64]) -> u64 {
    let mut state = splitmix64(master ^ 0xA076_1D64_78BD_642F);
    for &coord in path {
        state = splitmix64(state ^ splitmix64(coord.wrapping_add(0x2545_F491_4F6C_DD1D)));
    }
    state
}

/// A ChaCha8 RNG seeded from `derive(master, path)`.
///
/// ChaCha8 gives high-quality, platform-independent streams; the derived
/// 64-bit seed is expanded through `seed_from_u64`.
pub fn rng_for(master: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(master, path))
}

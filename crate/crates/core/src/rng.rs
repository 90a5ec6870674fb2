//! Seeded random substreams.
//!
//! Every random draw in a simulation comes from a ChaCha8 stream keyed by
//! the master seed, with the stream id derived from (trial, link, purpose).
//! Streams never overlap, so trials can run in any order or in parallel
//! and still reproduce bit-for-bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a substream is used for. Part of the stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    /// Initial state and innovations of the fading process.
    Channel = 1,
    /// Pilot measurement noise at the UE.
    PilotNoise = 2,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stream id for a (trial, link, purpose) triple.
pub fn stream_id(trial: u64, link: u64, purpose: Purpose) -> u64 {
    let a = splitmix64(trial);
    let b = splitmix64(a ^ link.rotate_left(21));
    splitmix64(b ^ (purpose as u64).rotate_left(47))
}

/// Independent generator for one link of one trial.
pub fn substream(master_seed: u64, trial: u64, link: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream_id(trial, link, purpose));
    rng
}

//! Counter-based random streams.
//!
//! Every random draw comes from `ChaCha8Rng::seed_from_u64(master)` moved to
//! a 64-bit stream id
//!
//! ```text
//! bits 63..56  domain   (sweep, calibration, hold-out)
//! bits 55..48  purpose  (noise, phases)
//! bits 47..16  trial index
//! bits 15..0   path index
//! ```
//!
//! so a trial's randomness never depends on which thread ran it or in what
//! order. Noise and phases for a trial are the same at every SNR and for the
//! single-target benchmark runs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Domain {
    Sweep = 1,
    Calibration = 2,
    Holdout = 3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    Noise = 1,
    Phase = 2,
}

pub fn stream_id(domain: Domain, purpose: Purpose, trial: u32, path: u16) -> u64 {
    (domain as u64) << 56 | (purpose as u64) << 48 | (trial as u64) << 16 | path as u64
}

pub fn stream(master: u64, domain: Domain, purpose: Purpose, trial: u32, path: u16) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream_id(domain, purpose, trial, path));
    rng
}

//! Seed derivation for independent, reproducible streams.

/// SplitMix64 finalizer.
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix a parent seed with a stream index into a child seed.
pub fn mix_seed(parent: u64, index: u64) -> u64 {
    splitmix(splitmix(parent) ^ index.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

/// Named sub-streams used inside one replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Population = 1,
    Stage1 = 2,
    Stage1Fit = 3,
    Stage2 = 4,
    FinalFit = 5,
    Baseline = 6,
}

pub fn stream_seed(parent: u64, stream: Stream) -> u64 {
    mix_seed(parent, 0xA5A5_0000 + stream as u64)
}

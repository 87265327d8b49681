//! Deterministic random substreams.
//!
//! Every random quantity in the crate is drawn from a ChaCha8 stream selected
//! by a purpose tag plus a tuple of indices (trial, episode, group, ...). The
//! stream for a given tuple does not depend on how many other streams were
//! consumed before it, so Monte-Carlo trials can run in any order or in
//! parallel and still reproduce bit-for-bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a substream is used for. Distinct purposes never share a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum StreamTag {
    UserTracks = 1,
    UavPlacement = 2,
    Channel = 3,
    InitialPlacement = 4,
    Statistics = 5,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds the tag and indices into a 64-bit stream id.
pub fn stream_id(tag: StreamTag, indices: &[u64]) -> u64 {
    let mut h = splitmix64(tag as u64);
    for &i in indices {
        h = splitmix64(h ^ i.wrapping_mul(0xd605_bbb5_8c8a_bbd5));
    }
    h
}

/// A generator for one `(seed, tag, indices)` substream.
pub fn substream(seed: u64, tag: StreamTag, indices: &[u64]) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(tag, indices));
    rng
}

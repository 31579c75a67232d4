//! Reproducible random-number streams.
//!
//! Every replica, path block or probe draws from its own xoshiro256++
//! stream. Stream `r` of a seed is the base generator advanced by `r`
//! jumps of 2^128 steps, so streams never overlap.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type StreamRng = Xoshiro256PlusPlus;

/// Stream `stream_id` derived from `seed`.
pub fn stream_rng(seed: u64, stream_id: u64) -> StreamRng {
    let mut rng = StreamRng::seed_from_u64(seed);
    for _ in 0..stream_id {
        rng.jump();
    }
    rng
}

/// Streams `0..count` of `seed`, generated by successive jumps.
pub fn stream_rngs(seed: u64, count: usize) -> Vec<StreamRng> {
    let mut rng = StreamRng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        out.push(rng.clone());
        rng.jump();
    }
    out
}

/// Unbiased index in `0..n` from 32 random bits (Lemire's method);
/// `None` means the draw fell in the rejection zone and must be redrawn.
#[inline(always)]
pub fn bounded_u32(bits: u32, n: u32) -> Option<u32> {
    let m = bits as u64 * n as u64;
    let low = m as u32;
    if low < n {
        let threshold = n.wrapping_neg() % n;
        if low < threshold {
            return None;
        }
    }
    Some((m >> 32) as u32)
}

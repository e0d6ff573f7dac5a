//! Portable random streams.
//!
//! Every stream is ChaCha20 with the 64-bit seed written little-endian into
//! the first eight key bytes (the rest zero) and a 64-bit stream id. Integer
//! ranges are drawn by rejection sampling on `next_u64`, so the sequence of
//! values depends only on the ChaCha20 keystream and not on any library's
//! range-sampling algorithm.

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

pub fn stream(seed: u64, stream_id: u64) -> ChaCha20Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    let mut rng = ChaCha20Rng::from_seed(key);
    rng.set_stream(stream_id);
    rng
}

/// Uniform integer in `0..n`. `n` must be positive.
pub fn below<R: RngCore + ?Sized>(rng: &mut R, n: u64) -> u64 {
    assert!(n > 0, "empty range");
    // 2^64 mod n; values under it would bias the remainder
    let threshold = n.wrapping_neg() % n;
    loop {
        let x = rng.next_u64();
        if x >= threshold {
            return x % n;
        }
    }
}

/// Uniform integer in `lo..=hi`.
pub fn between<R: RngCore + ?Sized>(rng: &mut R, lo: u64, hi: u64) -> u64 {
    assert!(lo <= hi, "empty range");
    match (hi - lo).checked_add(1) {
        Some(span) => lo + below(rng, span),
        None => rng.next_u64(),
    }
}

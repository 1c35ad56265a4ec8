//! Seeded random streams.
//!
//! Every parallel batch job splits its work into fixed-size chunks and gives
//! chunk `i` the stream `stream(seed, i)`. Results then depend only on the
//! seed and chunk size, never on the number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Samples per chunk for the batch estimators.
pub const CHUNK: usize = 4096;

pub fn stream(seed: u64, index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Split `n` items into `(chunk_index, start, len)` triples of at most [`CHUNK`] items.
pub fn chunks(n: usize) -> Vec<(u64, usize, usize)> {
    (0..n.div_ceil(CHUNK))
        .map(|i| {
            let start = i * CHUNK;
            (i as u64, start, CHUNK.min(n - start))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = stream(7, 3).random();
        let b: u64 = stream(7, 3).random();
        let c: u64 = stream(7, 4).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn chunks_cover_range() {
        let cs = chunks(2 * CHUNK + 5);
        assert_eq!(cs.len(), 3);
        assert_eq!(cs.iter().map(|c| c.2).sum::<usize>(), 2 * CHUNK + 5);
        assert!(chunks(0).is_empty());
    }
}

//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature these dispatch to rayon; without it they run
//! the same closures in order. All helpers preserve input order so results do
//! not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic per-task generator: stream `stream` of the ChaCha generator
/// seeded with `seed`.
pub fn fork_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stable 64-bit seed derived from a string (first 8 bytes of its SHA-256).
pub fn seed_from_str(s: &str) -> u64 {
    use sha2::{Digest, Sha256};
    let d = Sha256::digest(s.as_bytes());
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

#[cfg(feature = "parallel")]
mod imp {
    use rayon::prelude::*;

    pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).into_par_iter().map(f).collect()
    }

    pub fn map_slice<A, T, F>(items: &[A], f: F) -> Vec<T>
    where
        A: Sync,
        T: Send,
        F: Fn(&A) -> T + Sync + Send,
    {
        items.par_iter().map(f).collect()
    }

    pub fn position_first<A, F>(items: &[A], pred: F) -> Option<usize>
    where
        A: Sync,
        F: Fn(&A) -> bool + Sync + Send,
    {
        // Short lists are cheaper to scan than to split.
        if items.len() < 64 {
            return items.iter().position(pred);
        }
        items.par_iter().position_first(pred)
    }
}

#[cfg(not(feature = "parallel"))]
mod imp {
    pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
    where
        F: Fn(usize) -> T,
    {
        (0..n).map(f).collect()
    }

    pub fn map_slice<A, T, F>(items: &[A], f: F) -> Vec<T>
    where
        F: Fn(&A) -> T,
    {
        items.iter().map(f).collect()
    }

    pub fn position_first<A, F>(items: &[A], pred: F) -> Option<usize>
    where
        F: Fn(&A) -> bool,
    {
        items.iter().position(pred)
    }
}

pub use imp::{map_range, map_slice, position_first};

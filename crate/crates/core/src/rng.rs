//! Named, versioned, splittable seed streams.
//!
//! A [`SeedStream`] is a 64-bit key. Child streams are derived by mixing the
//! parent key with a label and an index, so that independent consumers (one
//! per placed object, one per chain step, ...) never share draws. Skipping a
//! consumer therefore never shifts the draws of the ones after it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Bumped whenever the derivation below changes; recorded in manifests.
pub const RNG_VERSION: u32 = 1;

pub type Rng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SeedStream(pub u64);

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over the label bytes; only used to turn stream names into keys.
fn label_key(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        SeedStream(seed)
    }

    /// Derives the child stream `(self, label, index)`.
    pub fn child(self, label: &str, index: u64) -> SeedStream {
        let a = splitmix64(self.0 ^ u64::from(RNG_VERSION).rotate_left(56));
        let b = splitmix64(a ^ label_key(label));
        SeedStream(splitmix64(b ^ splitmix64(index)))
    }

    pub fn rng(self) -> Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    pub fn key(self) -> u64 {
        self.0
    }
}

/// Stable key for arbitrary bytes, used to seed draws from op parameters.
pub fn content_key(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    splitmix64(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn same_key_same_draws() {
        let a: Vec<u64> = {
            let mut r = SeedStream(42).child("place", 3).rng();
            (0..8).map(|_| r.random()).collect()
        };
        let b: Vec<u64> = {
            let mut r = SeedStream(42).child("place", 3).rng();
            (0..8).map(|_| r.random()).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn children_are_distinct() {
        let root = SeedStream(7);
        let keys = [
            root.child("place", 0),
            root.child("place", 1),
            root.child("camera", 0),
            SeedStream(8).child("place", 0),
        ];
        for i in 0..keys.len() {
            for j in i + 1..keys.len() {
                assert_ne!(keys[i], keys[j]);
            }
        }
    }

    #[test]
    fn derivation_is_frozen() {
        // Changing this value requires bumping RNG_VERSION.
        assert_eq!(SeedStream(1).child("chain", 2).key(), 616796336474625731);
    }
}

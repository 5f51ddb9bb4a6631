use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Deterministic rng keyed by a seed plus string parts. Used wherever
/// repeated calls with the same key must see the same random stream
/// (oracle proposals, evaluator noise).
pub(crate) fn keyed_rng(seed: u64, parts: &[&str]) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part.as_bytes());
    }
    ChaCha8Rng::from_seed(hasher.finalize().into())
}

/// Counter-keyed seed derivation, so experiment configs sharing a master
/// seed also share their per-game seeds (paired comparisons across models).
pub(crate) fn derive_seed(master: u64, counter: u64) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(counter.to_le_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

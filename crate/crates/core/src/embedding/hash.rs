//! Feature-hashing text embedder.
//!
//! Each lowercase alphanumeric token is hashed with a seeded 64-bit FNV-1a
//! followed by a splitmix64 finalizer. The low bits pick a component, the top
//! bit picks a sign, and the accumulated vector is L2-normalized.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for b in seed.to_le_bytes().iter().chain(bytes) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable 64-bit token hash.
pub fn token_hash(token: &str, seed: u64) -> u64 {
    splitmix64(fnv1a(seed, token.as_bytes()))
}

/// Lowercased runs of alphanumeric characters.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

/// Deterministic embedding of `text`; blank text maps to the zero vector.
///
/// Panics if `dim` is zero.
pub fn hash_embed(text: &str, dim: usize, seed: u64) -> Vec<f32> {
    assert!(dim > 0, "embedding dimension must be positive");
    let mut acc = vec![0f64; dim];
    let mut first = None;
    for token in tokenize(text) {
        let h = token_hash(&token, seed);
        let idx = (h % dim as u64) as usize;
        let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
        acc[idx] += sign;
        first.get_or_insert((idx, sign));
    }
    let Some((idx, sign)) = first else {
        return vec![0.0; dim];
    };
    let mut norm = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        // every token cancelled; keep the first token's signed bucket
        acc[idx] = sign;
        norm = 1.0;
    }
    acc.iter().map(|v| (v / norm) as f32).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn deterministic_and_seed_sensitive() {
        let a = hash_embed("feature node. atom: carbon", 32, 7);
        assert_eq!(a, hash_embed("feature node. atom: carbon", 32, 7));
        assert_ne!(a, hash_embed("feature node. atom: carbon", 32, 8));
        assert_eq!(a, hash_embed("FEATURE  node. ATOM: Carbon", 32, 7));
    }

    #[test]
    fn blank_text_is_zero() {
        assert_eq!(hash_embed("", 16, 0), vec![0.0; 16]);
        assert_eq!(hash_embed("  ;;. ", 16, 0), vec![0.0; 16]);
    }

    #[test]
    fn tokenizer_splits_on_punctuation() {
        let toks: Vec<String> = tokenize("Feature node. Atom: C-12, x_y").collect();
        assert_eq!(toks, ["feature", "node", "atom", "c", "12", "x", "y"]);
    }

    proptest! {
        #[test]
        fn nonempty_text_has_unit_norm(text in "[a-z]{1,6}( [a-z0-9]{1,6}){0,8}", dim in 1usize..64, seed: u64) {
            let v = hash_embed(&text, dim, seed);
            prop_assert_eq!(v.len(), dim);
            let norm = v.iter().map(|x| f64::from(*x).powi(2)).sum::<f64>().sqrt();
            prop_assert!((norm - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn cancelling_tokens_are_never_zero() {
        for dim in [1, 2, 5, 384] {
            let v = hash_embed("carbon oxygen nitrogen hydrogen", dim, 3);
            let norm: f64 = v.iter().map(|x| f64::from(*x).powi(2)).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-6);
        }
    }
}

//! Feature-hashing text embedding used by the offline mock provider.

/// Dimension of mock embeddings.
pub const MOCK_EMBEDDING_DIM: usize = 64;

const WORD_WEIGHT: f64 = 1.0;
const TRIGRAM_WEIGHT: f64 = 0.35;

fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in seed.to_le_bytes().iter().chain(bytes) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    // final avalanche so low bits depend on every input byte
    h ^= h >> 33;
    h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
    h ^= h >> 33;
    h
}

fn add_feature(v: &mut [f64], seed: u64, feature: &str, weight: f64) {
    let h = fnv1a(seed, feature.as_bytes());
    let idx = (h % v.len() as u64) as usize;
    let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
    v[idx] += sign * weight;
}

/// Signed feature hashing of lowercase word unigrams and word-boundary
/// character trigrams, L2-normalized.
///
/// Returns the zero vector only when `text` contains no characters at all.
pub fn hashing_embedding(text: &str, seed: u64, dim: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    let lowered = text.to_lowercase();
    let mut words: Vec<&str> = lowered.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()).collect();
    if words.is_empty() {
        // punctuation-only input still gets a stable vector
        words = lowered.split_whitespace().collect();
    }
    for word in &words {
        add_feature(&mut v, seed, &format!("w:{word}"), WORD_WEIGHT);
        let padded: Vec<char> = format!("^{word}$").chars().collect();
        for tri in padded.windows(3) {
            add_feature(&mut v, seed, &format!("t:{}", tri.iter().collect::<String>()), TRIGRAM_WEIGHT);
        }
    }
    normalize(v).unwrap_or_else(|| vec![0.0; dim])
}

/// Scale to unit length; `None` for zero or non-finite vectors.
pub fn normalize(mut v: Vec<f64>) -> Option<Vec<f64>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Some(v)
}

/// Cosine similarity; equals the dot product for unit vectors.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norm(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    #[test]
    fn deterministic_and_unit_length() {
        let a = hashing_embedding("abc", 7, 64);
        assert_eq!(a, hashing_embedding("abc", 7, 64));
        assert_ne!(a, hashing_embedding("abc", 8, 64));
        for text in ["abc", "solar power", "?!", "a", "Privacy leak in smart speakers"] {
            let v = hashing_embedding(text, 7, 64);
            assert_eq!(v.len(), 64);
            assert!((norm(&v) - 1.0).abs() < 1e-6, "{text}");
        }
    }

    #[test]
    fn related_phrases_are_closer() {
        let sp = hashing_embedding("solar power", 7, 64);
        let se = hashing_embedding("solar energy", 7, 64);
        let pl = hashing_embedding("privacy leak", 7, 64);
        assert!(cosine(&sp, &se) > cosine(&sp, &pl));
    }
}

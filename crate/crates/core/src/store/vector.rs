use std::collections::BTreeMap;

use crate::gateway::cosine;
use crate::model::CardId;

pub const NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum VectorError {
    #[error("vector has length {got}, index dimension is {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("vector norm {0} is not 1")]
    NotUnit(f64),
}

/// Exact in-memory index of unit vectors keyed by card id.
#[derive(Debug, Clone, Default)]
pub struct VectorIndex {
    dimension: Option<usize>,
    entries: BTreeMap<CardId, Vec<f64>>,
}

impl VectorIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn dimension(&self) -> Option<usize> {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &CardId) -> Option<&[f64]> {
        self.entries.get(id).map(Vec::as_slice)
    }

    pub fn check(&self, v: &[f64]) -> Result<(), VectorError> {
        if let Some(d) = self.dimension {
            if v.len() != d {
                return Err(VectorError::Dimension { expected: d, got: v.len() });
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(VectorError::NotUnit(norm));
        }
        Ok(())
    }

    pub fn insert(&mut self, id: CardId, v: Vec<f64>) -> Result<(), VectorError> {
        self.check(&v)?;
        self.dimension.get_or_insert(v.len());
        self.entries.insert(id, v);
        Ok(())
    }

    pub fn remove(&mut self, id: &CardId) {
        self.entries.remove(id);
    }

    /// The `k` best candidates by cosine similarity, ties broken by id
    /// ascending. Candidates without a vector are skipped.
    pub fn top_k<'a>(&self, query: &[f64], k: usize, candidates: impl IntoIterator<Item = &'a CardId>) -> Vec<(CardId, f64)> {
        let mut scored: Vec<(CardId, f64)> = candidates
            .into_iter()
            .filter_map(|id| self.entries.get(id).map(|v| (id.clone(), cosine(query, v))))
            .collect();
        let by_rank = |a: &(CardId, f64), b: &(CardId, f64)| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0));
        if k == 0 {
            return Vec::new();
        }
        if scored.len() > k {
            scored.select_nth_unstable_by(k - 1, by_rank);
            scored.truncate(k);
        }
        scored.sort_by(by_rank);
        scored
    }
}

pub(crate) fn encode(v: &[f64]) -> Vec<u8> {
    v.iter().flat_map(|x| x.to_le_bytes()).collect()
}

pub(crate) fn decode(bytes: &[u8]) -> Option<Vec<f64>> {
    if bytes.len() % 8 != 0 {
        return None;
    }
    Some(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::normalize;

    fn id(s: &str) -> CardId {
        CardId(s.into())
    }

    #[test]
    fn rejects_bad_vectors() {
        let mut ix = VectorIndex::new();
        assert!(matches!(ix.insert(id("a"), vec![3.0, 4.0]), Err(VectorError::NotUnit(_))));
        ix.insert(id("a"), vec![0.6, 0.8]).unwrap();
        assert_eq!(ix.insert(id("b"), vec![1.0, 0.0, 0.0]), Err(VectorError::Dimension { expected: 2, got: 3 }));
    }

    #[test]
    fn ties_break_by_id() {
        let mut ix = VectorIndex::new();
        for name in ["c", "a", "b"] {
            ix.insert(id(name), vec![1.0, 0.0]).unwrap();
        }
        ix.insert(id("d"), normalize(vec![1.0, 1.0]).unwrap()).unwrap();
        let ids: Vec<CardId> = ix.entries.keys().cloned().collect();
        let top = ix.top_k(&[1.0, 0.0], 3, &ids);
        assert_eq!(top.iter().map(|(i, _)| i.as_str()).collect::<Vec<_>>(), vec!["a", "b", "c"]);
        assert_eq!(ix.top_k(&[1.0, 0.0], 10, &ids).len(), 4);
    }

    #[test]
    fn blob_round_trip() {
        let v = vec![0.1, -2.5, f64::MIN_POSITIVE];
        assert_eq!(decode(&encode(&v)).unwrap(), v);
        assert!(decode(&[1, 2, 3]).is_none());
    }
}

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::{ChainError, ChainRecord};
use crate::catalog::AssetCatalog;
use crate::rng::Rng;
use crate::scene::SceneState;
use crate::text::join_clauses;

/// One group of consecutive steps, 1-based and inclusive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub first_step: usize,
    pub last_step: usize,
    /// Decomposed instructions of the member steps, joined.
    #[serde(default)]
    pub instruction: String,
    /// Index of the frame kept for this chunk (equal to `last_step`).
    pub final_frame: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkPlan {
    pub k: usize,
    /// Last step of every chunk; strictly increasing and ending at L.
    pub boundaries: Vec<usize>,
    pub chunks: Vec<Chunk>,
}

impl ChunkPlan {
    pub fn from_boundaries(boundaries: Vec<usize>) -> ChunkPlan {
        let mut chunks = Vec::with_capacity(boundaries.len());
        let mut first = 1;
        for &b in &boundaries {
            chunks.push(Chunk { first_step: first, last_step: b, instruction: String::new(), final_frame: b });
            first = b + 1;
        }
        ChunkPlan { k: boundaries.len(), boundaries, chunks }
    }

    /// Fills chunk texts from per-step texts (index 0 is step 1).
    pub fn with_instructions<S: AsRef<str>>(mut self, steps: &[S]) -> ChunkPlan {
        for c in &mut self.chunks {
            c.instruction = join_clauses(&steps[c.first_step - 1..c.last_step]);
        }
        self
    }

    /// Frames dropped from the training sequence (never frame 0).
    pub fn omitted_frames(&self, len: usize) -> Vec<usize> {
        (1..=len).filter(|i| !self.boundaries.contains(i)).collect()
    }
}

/// Splits `len` steps into `k` chunks at `k - 1` interior cut points drawn
/// uniformly without replacement.
pub fn plan_chunks(len: usize, k: usize, rng: &mut Rng) -> Result<ChunkPlan, ChainError> {
    if k < 1 || k > len {
        return Err(ChainError::BadK { k, len });
    }
    let mut cuts: Vec<usize> = if len > 1 { sample(rng, len - 1, k - 1).into_iter().map(|i| i + 1).collect() } else { Vec::new() };
    cuts.sort_unstable();
    cuts.push(len);
    Ok(ChunkPlan::from_boundaries(cuts))
}

/// Per-chunk explicit instructions paired with the exact scene after the
/// chunk, using the record's stored plan for `k` (or an even split when none
/// was stored).
pub fn decompose_symbolically(
    record: &ChainRecord,
    k: usize,
    catalog: &AssetCatalog,
) -> Result<Vec<(String, SceneState)>, ChainError> {
    let len = record.len();
    if k < 1 || k > len {
        return Err(ChainError::BadK { k, len });
    }
    let plan = match record.chunk_plans.get(&k) {
        Some(p) => p.clone(),
        None => {
            let bounds = (1..=k).map(|i| i * len / k).collect();
            ChunkPlan::from_boundaries(bounds).with_instructions(&record.step_instructions)
        }
    };
    let states = record.replay(catalog)?;
    Ok(plan.chunks.iter().map(|c| (c.instruction.clone(), states[c.last_step].clone())).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedStream;

    #[test]
    fn extremes() {
        let mut rng = SeedStream(1).rng();
        let one = plan_chunks(5, 1, &mut rng).unwrap();
        assert_eq!(one.boundaries, vec![5]);
        assert_eq!(one.omitted_frames(5), vec![1, 2, 3, 4]);
        let all = plan_chunks(5, 5, &mut rng).unwrap();
        assert_eq!(all.boundaries, vec![1, 2, 3, 4, 5]);
        assert!(all.omitted_frames(5).is_empty());
        assert!(plan_chunks(5, 0, &mut rng).is_err());
        assert!(plan_chunks(5, 6, &mut rng).is_err());
    }

    #[test]
    fn partition_holds_exhaustively() {
        let mut rng = SeedStream(2).rng();
        for len in 1..=17 {
            for k in 1..=len {
                let p = plan_chunks(len, k, &mut rng).unwrap();
                assert_eq!(p.chunks.len(), k);
                let steps: Vec<usize> = p.chunks.iter().flat_map(|c| c.first_step..=c.last_step).collect();
                assert_eq!(steps, (1..=len).collect::<Vec<_>>());
                assert!(p.boundaries.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }
}

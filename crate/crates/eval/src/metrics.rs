use editforge_core::render::Image;
use serde::{Deserialize, Serialize};

pub const DEFAULT_GRID: usize = 16;
/// Edit directions shorter than this are treated as no edit at all.
pub const MIN_DIRECTION_NORM: f64 = 1e-9;

/// Grid-pooled colour layout: per-cell mean RGB, centred per channel and
/// scaled to unit length. Constant images embed to the zero vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding(pub Vec<f64>);

impl Embedding {
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|v| *v == 0.0)
    }
}

fn cell_range(cell: usize, grid: usize, len: usize) -> std::ops::Range<usize> {
    let lo = cell * len / grid;
    let hi = ((cell + 1) * len / grid).max(lo + 1).min(len);
    lo.min(len - 1)..hi
}

pub fn embed(image: &Image) -> Embedding {
    embed_with_grid(image, DEFAULT_GRID)
}

pub fn embed_with_grid(image: &Image, grid: usize) -> Embedding {
    let (w, h) = (image.width as usize, image.height as usize);
    if w == 0 || h == 0 || grid == 0 {
        return Embedding(vec![0.0; grid * grid * 3]);
    }
    let mut v = Vec::with_capacity(grid * grid * 3);
    for gy in 0..grid {
        for gx in 0..grid {
            let mut sum = [0.0; 3];
            let mut n = 0.0;
            for y in cell_range(gy, grid, h) {
                for x in cell_range(gx, grid, w) {
                    let p = image.get(x as u32, y as u32);
                    for c in 0..3 {
                        sum[c] += p[c] as f64 / 255.0;
                    }
                    n += 1.0;
                }
            }
            v.extend(sum.iter().map(|s| s / n));
        }
    }
    let cells = (grid * grid) as f64;
    for c in 0..3 {
        let mean = v.iter().skip(c).step_by(3).sum::<f64>() / cells;
        v.iter_mut().skip(c).step_by(3).for_each(|x| *x -= mean);
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    // Rounding leaves residue around 1e-17 for flat images.
    if norm < 1e-12 {
        return Embedding(vec![0.0; v.len()]);
    }
    Embedding(v.into_iter().map(|x| x / norm).collect())
}

fn cos(a: &[f64], b: &[f64]) -> Option<f64> {
    let (na, nb) = (a.iter().map(|x| x * x).sum::<f64>().sqrt(), b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if na < MIN_DIRECTION_NORM || nb < MIN_DIRECTION_NORM {
        return None;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Some((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Cosine of two embeddings. Identical embeddings score 1 even when zero;
/// a zero embedding against anything else scores 0.
pub fn image_similarity(generated: &Embedding, target: &Embedding) -> f64 {
    if generated == target {
        return 1.0;
    }
    cos(&generated.0, &target.0).unwrap_or(0.0)
}

/// Cosine between the generated and the intended edit direction, both taken
/// from the source; `None` when either direction is (numerically) zero.
pub fn direction_similarity(source: &Embedding, target: &Embedding, generated: &Embedding) -> Option<f64> {
    let dg: Vec<f64> = generated.0.iter().zip(&source.0).map(|(g, s)| g - s).collect();
    let dt: Vec<f64> = target.0.iter().zip(&source.0).map(|(t, s)| t - s).collect();
    cos(&dg, &dt)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Similarity {
    pub i_sim: f64,
    pub d_sim: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("images differ in size: {0:?}")]
pub struct SizeMismatch(pub Vec<(u32, u32)>);

pub fn similarity_metrics(source: &Image, target: &Image, generated: &Image) -> Result<Similarity, SizeMismatch> {
    let sizes = [source, target, generated].map(|i| (i.width, i.height));
    if sizes.iter().any(|s| *s != sizes[0]) {
        return Err(SizeMismatch(sizes.to_vec()));
    }
    let (s, t, g) = (embed(source), embed(target), embed(generated));
    Ok(Similarity { i_sim: image_similarity(&g, &t), d_sim: direction_similarity(&s, &t, &g) })
}

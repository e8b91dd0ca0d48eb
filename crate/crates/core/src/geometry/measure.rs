use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BoundingBox, GeometryError, Region};

/// Minimum draws before declaring a region too thin, per requested point.
const DRAWS_PER_POINT: usize = 2000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeEstimate {
    pub value: f64,
    pub stderr: f64,
}

/// Per-piece bounding boxes, weighted by box volume. Pieces with empty
/// closure are skipped.
struct Envelope {
    boxes: Vec<(usize, BoundingBox)>,
    cumulative: Vec<f64>,
    total: f64,
}

impl Envelope {
    fn of(region: &Region) -> Result<Self, GeometryError> {
        let mut boxes = Vec::new();
        for (i, p) in region.pieces().iter().enumerate() {
            if let Some(bb) = p.bounding_box()? {
                if bb.volume() > 0.0 {
                    boxes.push((i, bb));
                }
            }
        }
        let mut cumulative = Vec::with_capacity(boxes.len());
        let mut total = 0.0;
        for (_, bb) in &boxes {
            total += bb.volume();
            cumulative.push(total);
        }
        Ok(Envelope {
            boxes,
            cumulative,
            total,
        })
    }

    /// One proposal: a point drawn uniformly from a box chosen by volume,
    /// together with the index of the piece that box belongs to.
    fn propose<R: Rng>(&self, rng: &mut R) -> (usize, Vec<f64>) {
        let u = rng.random::<f64>() * self.total;
        let slot = self
            .cumulative
            .partition_point(|c| *c <= u)
            .min(self.boxes.len() - 1);
        let (piece, bb) = &self.boxes[slot];
        let x = bb
            .lower
            .iter()
            .zip(&bb.upper)
            .map(|(lo, up)| lo + rng.random::<f64>() * (up - lo))
            .collect();
        (*piece, x)
    }
}

/// `n` points uniformly distributed over the region, each strictly inside
/// one of its pieces.
pub fn sample_uniform(region: &Region, n: usize, seed: u64) -> Result<Vec<Vec<f64>>, GeometryError> {
    if n == 0 {
        return Ok(Vec::new());
    }
    let env = Envelope::of(region)?;
    if env.boxes.is_empty() {
        return Err(GeometryError::EmptyRegion);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cap = DRAWS_PER_POINT * (n + 10);
    let mut out = Vec::with_capacity(n);
    let mut drawn = 0;
    while out.len() < n {
        if drawn >= cap {
            return Err(GeometryError::ThinRegion {
                accepted: out.len(),
                drawn,
            });
        }
        drawn += 1;
        let (piece, x) = env.propose(&mut rng);
        if region.pieces()[piece].contains(&x) {
            out.push(x);
        }
    }
    Ok(out)
}

/// Hit-or-miss volume estimate over the union of per-piece bounding boxes.
pub fn mc_volume(region: &Region, n: usize, seed: u64) -> Result<VolumeEstimate, GeometryError> {
    let env = Envelope::of(region)?;
    if env.boxes.is_empty() || n == 0 {
        return Ok(VolumeEstimate {
            value: 0.0,
            stderr: 0.0,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hits = (0..n)
        .filter(|_| {
            let (piece, x) = env.propose(&mut rng);
            region.pieces()[piece].contains(&x)
        })
        .count();
    let p = hits as f64 / n as f64;
    Ok(VolumeEstimate {
        value: env.total * p,
        stderr: env.total * (p * (1.0 - p) / n as f64).sqrt(),
    })
}

/// Symmetric sampled Hausdorff distance: `n` uniform points per side, each
/// measured exactly against the closure of the other region. Both sides draw
/// with the same seed, so swapping the arguments gives the same value.
pub fn hausdorff_distance(p: &Region, q: &Region, n: usize, seed: u64) -> Result<f64, GeometryError> {
    if p.dim() != q.dim() {
        return Err(GeometryError::DimensionMismatch {
            expected: p.dim(),
            found: q.dim(),
        });
    }
    if p.is_empty()? || q.is_empty()? {
        return Err(GeometryError::UndefinedDistance);
    }
    let sp = sample_uniform(p, n, seed)?;
    let sq = sample_uniform(q, n, seed)?;
    let forward = sp.iter().map(|x| q.distance_to(x)).fold(0.0, f64::max);
    let backward = sq.iter().map(|y| p.distance_to(y)).fold(0.0, f64::max);
    Ok(forward.max(backward))
}

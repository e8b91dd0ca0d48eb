use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{BoundingBox, GeometryError, Polytope};

/// Rows beyond `2·dim + PRUNE_SLACK` trigger redundancy pruning on pieces
/// produced by set operations.
const PRUNE_SLACK: usize = 4;

/// Finite union of pairwise interior-disjoint open polytopes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRegion")]
pub struct Region {
    dim: usize,
    pieces: Vec<Polytope>,
}

#[derive(Deserialize)]
struct RawRegion {
    #[serde(default)]
    dim: Option<usize>,
    pieces: Vec<Polytope>,
}

impl TryFrom<RawRegion> for Region {
    type Error = GeometryError;

    fn try_from(raw: RawRegion) -> Result<Self, Self::Error> {
        let dim = match (raw.dim, raw.pieces.first()) {
            (Some(d), _) => d,
            (None, Some(p)) => p.dim(),
            (None, None) => return Err(GeometryError::Malformed("empty region without dim".into())),
        };
        Region::from_pieces(dim, raw.pieces)
    }
}

impl Region {
    pub fn empty(dim: usize) -> Self {
        Region { dim, pieces: Vec::new() }
    }

    pub fn from_polytope(p: Polytope) -> Self {
        Region {
            dim: p.dim(),
            pieces: vec![p],
        }
    }

    /// Wraps pieces the caller guarantees to be interior-disjoint.
    pub fn from_pieces(dim: usize, pieces: Vec<Polytope>) -> Result<Self, GeometryError> {
        if let Some(p) = pieces.iter().find(|p| p.dim() != dim) {
            return Err(GeometryError::DimensionMismatch {
                expected: dim,
                found: p.dim(),
            });
        }
        Ok(Region { dim, pieces })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pieces(&self) -> &[Polytope] {
        &self.pieces
    }

    pub fn into_pieces(self) -> Vec<Polytope> {
        self.pieces
    }

    fn check_dim(&self, other: usize) -> Result<(), GeometryError> {
        if self.dim != other {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim,
                found: other,
            });
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.pieces.iter().any(|p| p.contains(x))
    }

    pub fn contains_closed(&self, x: &[f64], tol: f64) -> bool {
        self.pieces.iter().any(|p| p.contains_closed(x, tol))
    }

    pub fn is_empty(&self) -> Result<bool, GeometryError> {
        for p in &self.pieces {
            if !p.is_empty()? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Drops pieces with empty interior.
    pub fn without_empty_pieces(&self) -> Result<Region, GeometryError> {
        let mut pieces = Vec::with_capacity(self.pieces.len());
        for p in &self.pieces {
            if !p.is_empty()? {
                pieces.push(p.clone());
            }
        }
        Ok(Region { dim: self.dim, pieces })
    }

    pub fn bounding_box(&self) -> Result<Option<BoundingBox>, GeometryError> {
        let mut acc: Option<BoundingBox> = None;
        for p in &self.pieces {
            if let Some(bb) = p.bounding_box()? {
                acc = Some(match acc {
                    Some(a) => a.union(&bb),
                    None => bb,
                });
            }
        }
        Ok(acc)
    }

    /// Union with a region assumed interior-disjoint from `self`.
    pub fn disjoint_union(&self, other: &Region) -> Result<Region, GeometryError> {
        self.check_dim(other.dim)?;
        let mut pieces = self.pieces.clone();
        pieces.extend(other.pieces.iter().cloned());
        Ok(Region { dim: self.dim, pieces })
    }

    pub fn intersect_polytope(&self, q: &Polytope) -> Result<Region, GeometryError> {
        self.check_dim(q.dim())?;
        let mut pieces = Vec::new();
        for p in &self.pieces {
            let r = p.intersect(q)?;
            if !r.is_empty()? {
                pieces.push(tidy(r)?);
            }
        }
        Ok(Region { dim: self.dim, pieces })
    }

    pub fn intersect(&self, other: &Region) -> Result<Region, GeometryError> {
        self.check_dim(other.dim)?;
        let mut pieces = Vec::new();
        for q in &other.pieces {
            pieces.extend(self.intersect_polytope(q)?.pieces);
        }
        Ok(Region { dim: self.dim, pieces })
    }

    /// `self \ other`, by peeling each halfspace of every `other` piece.
    pub fn set_difference(&self, other: &Region) -> Result<Region, GeometryError> {
        self.check_dim(other.dim)?;
        let mut current = self.pieces.clone();
        for q in &other.pieces {
            let mut next = Vec::new();
            for p in &current {
                next.extend(polytope_minus(p, q)?);
            }
            current = next;
            if current.is_empty() {
                break;
            }
        }
        Ok(Region {
            dim: self.dim,
            pieces: current,
        })
    }

    pub fn affine_preimage(&self, a: &DMatrix<f64>, b: &DVector<f64>) -> Result<Region, GeometryError> {
        let pieces = self
            .pieces
            .iter()
            .map(|p| p.affine_preimage(a, b))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Region { dim: a.ncols(), pieces })
    }

    pub fn affine_image(&self, a: &DMatrix<f64>, b: &DVector<f64>) -> Result<Region, GeometryError> {
        let pieces = self
            .pieces
            .iter()
            .map(|p| p.affine_image(a, b))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Region { dim: self.dim, pieces })
    }

    /// Euclidean distance from `y` to the closure of the region.
    pub fn distance_to(&self, y: &[f64]) -> f64 {
        self.pieces
            .iter()
            .map(|p| p.distance_to(y))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Pieces covering `p \ q`, pairwise interior-disjoint.
fn polytope_minus(p: &Polytope, q: &Polytope) -> Result<Vec<Polytope>, GeometryError> {
    if p.intersect(q)?.is_empty()? {
        return Ok(vec![p.clone()]);
    }
    let mut out = Vec::new();
    let mut remaining = p.clone();
    for i in 0..q.num_halfspaces() {
        let (h, k) = q.row(i);
        let neg: Vec<f64> = h.iter().map(|v| -v).collect();
        let outside = remaining.with_halfspace(&neg, -k)?;
        if !outside.is_empty()? {
            out.push(tidy(outside)?);
        }
        remaining = remaining.with_halfspace(&h, k)?;
        if remaining.is_empty()? {
            break;
        }
    }
    Ok(out)
}

fn tidy(p: Polytope) -> Result<Polytope, GeometryError> {
    if p.num_halfspaces() > 2 * p.dim() + PRUNE_SLACK {
        p.prune_redundant()
    } else {
        Ok(p)
    }
}

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::lp::{self, LpSolution};
use super::{BoundingBox, GeometryError, EMPTY_TOL};

/// Radius cap for the Chebyshev LP so unbounded polytopes stay bounded.
const RADIUS_CAP: f64 = 1e3;
/// Condition-number ceiling above which an affine map counts as singular.
const MAX_CONDITION: f64 = 1e12;

/// Open convex polytope `{x : H x < K}` in H-representation.
///
/// Rows are stored exactly as given. Geometric queries (Chebyshev radius,
/// distances) normalize rows internally, so scaling a row never changes an
/// answer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPolytope", into = "RawPolytope")]
pub struct Polytope {
    h: DMatrix<f64>,
    k: DVector<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawPolytope {
    #[serde(rename = "H")]
    h: Vec<Vec<f64>>,
    #[serde(rename = "K")]
    k: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dim: Option<usize>,
}

impl TryFrom<RawPolytope> for Polytope {
    type Error = GeometryError;

    fn try_from(raw: RawPolytope) -> Result<Self, Self::Error> {
        let dim = match (raw.h.first(), raw.dim) {
            (Some(row), _) => row.len(),
            (None, Some(d)) => d,
            (None, None) => return Err(GeometryError::Malformed("empty H without dim".into())),
        };
        Polytope::from_rows(dim, raw.h.into_iter().zip(raw.k).collect())
    }
}

impl From<Polytope> for RawPolytope {
    fn from(p: Polytope) -> Self {
        let h = (0..p.h.nrows())
            .map(|i| p.h.row(i).iter().copied().collect())
            .collect();
        let dim = if p.h.nrows() == 0 { Some(p.dim()) } else { None };
        RawPolytope {
            h,
            k: p.k.iter().copied().collect(),
            dim,
        }
    }
}

impl Polytope {
    pub fn new(h: DMatrix<f64>, k: DVector<f64>) -> Result<Self, GeometryError> {
        if h.nrows() != k.len() {
            return Err(GeometryError::DimensionMismatch {
                expected: h.nrows(),
                found: k.len(),
            });
        }
        if h.iter().chain(k.iter()).any(|v| !v.is_finite()) {
            return Err(GeometryError::Malformed("non-finite halfspace entry".into()));
        }
        Ok(Polytope { h, k })
    }

    /// Builds from `(normal, offset)` rows; every normal must have length `dim`.
    pub fn from_rows(dim: usize, rows: Vec<(Vec<f64>, f64)>) -> Result<Self, GeometryError> {
        let m = rows.len();
        let mut h = DMatrix::zeros(m, dim);
        let mut k = DVector::zeros(m);
        for (i, (normal, offset)) in rows.into_iter().enumerate() {
            if normal.len() != dim {
                return Err(GeometryError::DimensionMismatch {
                    expected: dim,
                    found: normal.len(),
                });
            }
            for (j, v) in normal.into_iter().enumerate() {
                h[(i, j)] = v;
            }
            k[i] = offset;
        }
        Polytope::new(h, k)
    }

    /// The whole space `R^dim` (no halfspaces).
    pub fn universe(dim: usize) -> Self {
        Polytope {
            h: DMatrix::zeros(0, dim),
            k: DVector::zeros(0),
        }
    }

    /// Open axis-aligned box `lower < x < upper`.
    pub fn boxed(lower: &[f64], upper: &[f64]) -> Result<Self, GeometryError> {
        if lower.len() != upper.len() {
            return Err(GeometryError::DimensionMismatch {
                expected: lower.len(),
                found: upper.len(),
            });
        }
        let dim = lower.len();
        let mut rows = Vec::with_capacity(2 * dim);
        for i in 0..dim {
            let mut up = vec![0.0; dim];
            up[i] = 1.0;
            rows.push((up, upper[i]));
            let mut lo = vec![0.0; dim];
            lo[i] = -1.0;
            rows.push((lo, -lower[i]));
        }
        Polytope::from_rows(dim, rows)
    }

    /// Single open halfspace `normal · x < offset`.
    pub fn halfspace(normal: &[f64], offset: f64) -> Result<Self, GeometryError> {
        Polytope::from_rows(normal.len(), vec![(normal.to_vec(), offset)])
    }

    pub fn dim(&self) -> usize {
        self.h.ncols()
    }

    pub fn num_halfspaces(&self) -> usize {
        self.h.nrows()
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn k(&self) -> &DVector<f64> {
        &self.k
    }

    pub fn row(&self, i: usize) -> (Vec<f64>, f64) {
        (self.h.row(i).iter().copied().collect(), self.k[i])
    }

    fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        (0..self.dim()).map(|j| self.h[(i, j)] * x[j]).sum()
    }

    fn row_norm(&self, i: usize) -> f64 {
        self.h.row(i).norm()
    }

    /// Strict membership `H x < K`.
    pub fn contains(&self, x: &[f64]) -> bool {
        (0..self.h.nrows()).all(|i| self.row_dot(i, x) < self.k[i])
    }

    /// Membership in the closure, with `tol` slack on every row.
    pub fn contains_closed(&self, x: &[f64], tol: f64) -> bool {
        (0..self.h.nrows()).all(|i| self.row_dot(i, x) <= self.k[i] + tol * (1.0 + self.row_norm(i)))
    }

    /// Smallest normalized slack `min_i (k_i - h_i x) / |h_i|`; positive inside.
    pub fn margin(&self, x: &[f64]) -> f64 {
        (0..self.h.nrows())
            .filter_map(|i| {
                let n = self.row_norm(i);
                (n > 0.0).then(|| (self.k[i] - self.row_dot(i, x)) / n)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest inscribed ball `(center, radius)`, or `None` when the open set
    /// is empty (radius not above [`EMPTY_TOL`]). The radius is capped for
    /// unbounded polytopes.
    pub fn chebyshev_ball(&self) -> Result<Option<(DVector<f64>, f64)>, GeometryError> {
        let n = self.dim();
        let mut a = Vec::with_capacity((self.h.nrows() + 1) * (n + 1));
        let mut b = Vec::with_capacity(self.h.nrows() + 1);
        for i in 0..self.h.nrows() {
            let norm = self.row_norm(i);
            if norm == 0.0 {
                if self.k[i] <= 0.0 {
                    return Ok(None);
                }
                continue;
            }
            a.extend(self.h.row(i).iter().map(|v| v / norm));
            a.push(1.0);
            b.push(self.k[i] / norm);
        }
        a.extend(std::iter::repeat_n(0.0, n));
        a.push(1.0);
        b.push(RADIUS_CAP);
        let mut c = vec![0.0; n + 1];
        c[n] = 1.0;
        match lp::maximize(&c, &a, &b)? {
            LpSolution::Optimal { x, value } if value > EMPTY_TOL => {
                Ok(Some((DVector::from_column_slice(&x[..n]), value)))
            }
            LpSolution::Optimal { .. } | LpSolution::Infeasible => Ok(None),
            LpSolution::Unbounded => Err(GeometryError::NumericalFailure(
                "Chebyshev LP reported unbounded despite radius cap".into(),
            )),
        }
    }

    pub fn is_empty(&self) -> Result<bool, GeometryError> {
        Ok(self.chebyshev_ball()?.is_none())
    }

    fn check_dim(&self, other: usize) -> Result<(), GeometryError> {
        if self.dim() != other {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim(),
                found: other,
            });
        }
        Ok(())
    }

    /// Stacks the halfspaces of both operands.
    pub fn intersect(&self, other: &Polytope) -> Result<Polytope, GeometryError> {
        self.check_dim(other.dim())?;
        let m = self.h.nrows() + other.h.nrows();
        let n = self.dim();
        let mut h = DMatrix::zeros(m, n);
        h.rows_mut(0, self.h.nrows()).copy_from(&self.h);
        h.rows_mut(self.h.nrows(), other.h.nrows()).copy_from(&other.h);
        let mut k = DVector::zeros(m);
        k.rows_mut(0, self.k.len()).copy_from(&self.k);
        k.rows_mut(self.k.len(), other.k.len()).copy_from(&other.k);
        Ok(Polytope { h, k })
    }

    pub fn with_halfspace(&self, normal: &[f64], offset: f64) -> Result<Polytope, GeometryError> {
        self.intersect(&Polytope::halfspace(normal, offset)?)
    }

    /// Drops duplicate and LP-redundant rows. Membership is unchanged.
    pub fn prune_redundant(&self) -> Result<Polytope, GeometryError> {
        let n = self.dim();
        // normalized rows, zero rows with positive offset are vacuous
        let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
        for i in 0..self.h.nrows() {
            let norm = self.row_norm(i);
            if norm == 0.0 {
                if self.k[i] > 0.0 {
                    continue;
                }
                return Ok(self.clone());
            }
            let normal: Vec<f64> = self.h.row(i).iter().map(|v| v / norm).collect();
            let offset = self.k[i] / norm;
            let dup = rows.iter_mut().find(|(r, _)| {
                r.iter().zip(&normal).all(|(a, b)| (a - b).abs() < 1e-12)
            });
            match dup {
                Some(existing) => existing.1 = existing.1.min(offset),
                None => rows.push((normal, offset)),
            }
        }
        let mut keep = vec![true; rows.len()];
        for i in 0..rows.len() {
            let mut a = Vec::new();
            let mut b = Vec::new();
            for (j, (r, o)) in rows.iter().enumerate() {
                if j != i && keep[j] {
                    a.extend_from_slice(r);
                    b.push(*o);
                }
            }
            match lp::maximize(&rows[i].0, &a, &b)? {
                LpSolution::Optimal { value, .. } if value <= rows[i].1 + 1e-10 => keep[i] = false,
                LpSolution::Infeasible => return Ok(self.clone()),
                _ => {}
            }
        }
        let kept = rows
            .into_iter()
            .zip(keep)
            .filter_map(|(r, k)| k.then_some(r))
            .collect();
        Polytope::from_rows(n, kept)
    }

    /// Image `{A x + b : x in P}` for nonsingular `A`.
    pub fn affine_image(&self, a: &DMatrix<f64>, b: &DVector<f64>) -> Result<Polytope, GeometryError> {
        self.check_dim(a.ncols())?;
        self.check_dim(a.nrows())?;
        self.check_dim(b.len())?;
        let inv = checked_inverse(a)?;
        let h = &self.h * &inv;
        let k = &self.k + &h * b;
        Polytope::new(h, k)
    }

    /// Preimage `{x : A x + b in P}`; `A` may be singular.
    pub fn affine_preimage(&self, a: &DMatrix<f64>, b: &DVector<f64>) -> Result<Polytope, GeometryError> {
        self.check_dim(a.nrows())?;
        self.check_dim(b.len())?;
        let h = &self.h * a;
        let k = &self.k - &self.h * b;
        Polytope::new(h, k)
    }

    /// Axis-aligned bounding box of the closure; `None` when the closure is
    /// infeasible.
    pub fn bounding_box(&self) -> Result<Option<BoundingBox>, GeometryError> {
        let n = self.dim();
        let a: Vec<f64> = (0..self.h.nrows())
            .flat_map(|i| self.h.row(i).iter().copied().collect::<Vec<_>>())
            .collect();
        let b: Vec<f64> = self.k.iter().copied().collect();
        let mut lower = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for j in 0..n {
            for (sign, slot) in [(1.0, &mut upper[j]), (-1.0, &mut lower[j])] {
                let mut c = vec![0.0; n];
                c[j] = sign;
                match lp::maximize(&c, &a, &b)? {
                    LpSolution::Optimal { value, .. } => *slot = sign * value,
                    LpSolution::Infeasible => return Ok(None),
                    LpSolution::Unbounded => return Err(GeometryError::Unbounded),
                }
            }
        }
        Ok(Some(BoundingBox::new(lower, upper)?))
    }

    /// Euclidean distance from `y` to the closure of the polytope: exact
    /// over the polygon's edges in 2-D, otherwise by Dykstra's alternating
    /// projections onto the halfspaces.
    pub fn distance_to(&self, y: &[f64]) -> f64 {
        if self.contains_closed(y, 0.0) {
            return 0.0;
        }
        if self.dim() == 2 {
            let v = self.vertices_2d();
            if v.len() >= 3 {
                return (0..v.len())
                    .map(|i| segment_distance(y, &v[i], &v[(i + 1) % v.len()]))
                    .fold(f64::INFINITY, f64::min);
            }
        }
        self.dykstra_distance(y)
    }

    fn dykstra_distance(&self, y: &[f64]) -> f64 {
        let n = self.dim();
        let m = self.h.nrows();
        let normals: Vec<(Vec<f64>, f64)> = (0..m)
            .filter_map(|i| {
                let norm = self.row_norm(i);
                (norm > 0.0).then(|| {
                    (
                        self.h.row(i).iter().map(|v| v / norm).collect(),
                        self.k[i] / norm,
                    )
                })
            })
            .collect();
        let mut x = y.to_vec();
        let mut corrections = vec![vec![0.0; n]; normals.len()];
        let mut z = vec![0.0; n];
        for _ in 0..5000 {
            let mut change = 0.0;
            for (idx, (normal, offset)) in normals.iter().enumerate() {
                for j in 0..n {
                    z[j] = x[j] + corrections[idx][j];
                }
                let excess: f64 = normal.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>() - offset;
                let shift = excess.max(0.0);
                for j in 0..n {
                    let new = z[j] - shift * normal[j];
                    corrections[idx][j] = z[j] - new;
                    change += (new - x[j]).abs();
                    x[j] = new;
                }
            }
            if change < 1e-13 {
                break;
            }
        }
        x.iter()
            .zip(y)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Vertices of a bounded 2-D polytope's closure in counter-clockwise
    /// order; empty for other dimensions or degenerate input.
    pub fn vertices_2d(&self) -> Vec<[f64; 2]> {
        if self.dim() != 2 {
            return Vec::new();
        }
        let m = self.h.nrows();
        let mut pts: Vec<[f64; 2]> = Vec::new();
        for i in 0..m {
            for j in (i + 1)..m {
                let (a1, b1, c1) = (self.h[(i, 0)], self.h[(i, 1)], self.k[i]);
                let (a2, b2, c2) = (self.h[(j, 0)], self.h[(j, 1)], self.k[j]);
                let det = a1 * b2 - a2 * b1;
                if det.abs() < 1e-12 {
                    continue;
                }
                let p = [(c1 * b2 - c2 * b1) / det, (a1 * c2 - a2 * c1) / det];
                if self.contains_closed(&p, 1e-9)
                    && !pts.iter().any(|q| (q[0] - p[0]).abs() < 1e-9 && (q[1] - p[1]).abs() < 1e-9)
                {
                    pts.push(p);
                }
            }
        }
        if pts.len() < 3 {
            return pts;
        }
        let cx = pts.iter().map(|p| p[0]).sum::<f64>() / pts.len() as f64;
        let cy = pts.iter().map(|p| p[1]).sum::<f64>() / pts.len() as f64;
        pts.sort_by(|p, q| {
            let ap = (p[1] - cy).atan2(p[0] - cx);
            let aq = (q[1] - cy).atan2(q[0] - cx);
            ap.total_cmp(&aq)
        });
        pts
    }
}

fn segment_distance(y: &[f64], a: &[f64; 2], b: &[f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((y[0] - a[0]) * dx + (y[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    ((y[0] - a[0] - t * dx).powi(2) + (y[1] - a[1] - t * dy).powi(2)).sqrt()
}

/// Inverse of `a`, refusing matrices whose condition number exceeds the
/// singularity threshold.
pub fn checked_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>, GeometryError> {
    if !a.is_square() {
        return Err(GeometryError::DimensionMismatch {
            expected: a.nrows(),
            found: a.ncols(),
        });
    }
    let sv = a.clone().svd(false, false).singular_values;
    let max = sv.max();
    let min = sv.min();
    if !(min > 0.0) || !(max / min).is_finite() || max / min > MAX_CONDITION {
        return Err(GeometryError::SingularMatrix {
            condition: if min > 0.0 { max / min } else { f64::INFINITY },
        });
    }
    a.clone().try_inverse().ok_or(GeometryError::SingularMatrix {
        condition: f64::INFINITY,
    })
}

//! Dense two-phase simplex for the small linear programs behind polytope
//! queries (emptiness, Chebyshev centers, bounding boxes, redundancy).
//!
//! Problems are tiny (a few dozen rows) so a full tableau is used. Entering
//! and leaving variables follow Bland's rule, which rules out cycling; the
//! pivot cap only guards against numerical trouble.

use super::GeometryError;

const PIVOT_EPS: f64 = 1e-11;
const PHASE_ONE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum LpSolution {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

/// Maximizes `c·x` subject to `A x <= b` with every `x_j` free.
///
/// `a` is row-major with `c.len()` columns and `b.len()` rows.
pub fn maximize(c: &[f64], a: &[f64], b: &[f64]) -> Result<LpSolution, GeometryError> {
    let n = c.len();
    let m = b.len();
    if a.len() != n * m {
        return Err(GeometryError::DimensionMismatch {
            expected: n * m,
            found: a.len(),
        });
    }
    let mut t = Tableau::build(n, a, b);
    t.run_phase_one()?;
    if t.objective_value() < -PHASE_ONE_EPS * (1.0 + max_abs(b)) {
        return Ok(LpSolution::Infeasible);
    }
    t.drive_out_artificials();
    t.set_phase_two_objective(c);
    match t.pivot_to_optimum()? {
        Step::Unbounded => Ok(LpSolution::Unbounded),
        Step::Optimal => {
            let x = t.primal(n);
            let value = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
            Ok(LpSolution::Optimal { x, value })
        }
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

enum Step {
    Optimal,
    Unbounded,
}

struct Tableau {
    rows: usize,
    cols: usize,
    /// rows x (cols + 1), last column is the right-hand side.
    data: Vec<f64>,
    /// reduced costs `z_j - c_j`, plus objective value in the last slot.
    reduced: Vec<f64>,
    cost: Vec<f64>,
    basis: Vec<usize>,
    first_artificial: usize,
    allow_artificial: bool,
}

impl Tableau {
    fn build(n: usize, a: &[f64], b: &[f64]) -> Self {
        let m = b.len();
        let n_art = b.iter().filter(|bi| **bi < 0.0).count();
        let cols = 2 * n + m + n_art;
        let width = cols + 1;
        let mut data = vec![0.0; m * width];
        let mut basis = vec![0; m];
        let first_artificial = 2 * n + m;
        let mut next_art = first_artificial;
        for i in 0..m {
            let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
            let row = &mut data[i * width..(i + 1) * width];
            for j in 0..n {
                row[j] = sign * a[i * n + j];
                row[n + j] = -sign * a[i * n + j];
            }
            row[2 * n + i] = sign;
            row[cols] = sign * b[i];
            if b[i] < 0.0 {
                row[next_art] = 1.0;
                basis[i] = next_art;
                next_art += 1;
            } else {
                basis[i] = 2 * n + i;
            }
        }
        let mut cost = vec![0.0; cols];
        for c in cost.iter_mut().skip(first_artificial) {
            *c = -1.0;
        }
        let mut t = Tableau {
            rows: m,
            cols,
            data,
            reduced: vec![0.0; width],
            cost,
            basis,
            first_artificial,
            allow_artificial: true,
        };
        t.recompute_reduced();
        t
    }

    fn width(&self) -> usize {
        self.cols + 1
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width() + j]
    }

    fn recompute_reduced(&mut self) {
        let w = self.width();
        for j in 0..w {
            let mut z = 0.0;
            for i in 0..self.rows {
                z += self.cost[self.basis[i]] * self.data[i * w + j];
            }
            self.reduced[j] = if j < self.cols { z - self.cost[j] } else { z };
        }
    }

    fn objective_value(&self) -> f64 {
        self.reduced[self.cols]
    }

    fn run_phase_one(&mut self) -> Result<(), GeometryError> {
        // Phase one is bounded below by zero, so it can never be unbounded.
        self.pivot_to_optimum().map(|_| ())
    }

    fn pivot_to_optimum(&mut self) -> Result<Step, GeometryError> {
        let cap = 10_000 + 50 * (self.rows + self.cols);
        for _ in 0..cap {
            let entering = (0..self.cols)
                .filter(|&j| self.allow_artificial || j < self.first_artificial)
                .find(|&j| self.reduced[j] < -PIVOT_EPS);
            let Some(col) = entering else {
                return Ok(Step::Optimal);
            };
            let mut leaving: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let aij = self.at(i, col);
                if aij > PIVOT_EPS {
                    let ratio = self.at(i, self.cols) / aij;
                    leaving = match leaving {
                        None => Some((i, ratio)),
                        Some((r, best)) => {
                            if ratio < best - 1e-12
                                || (ratio <= best + 1e-12 && self.basis[i] < self.basis[r])
                            {
                                Some((i, ratio))
                            } else {
                                Some((r, best))
                            }
                        }
                    };
                }
            }
            match leaving {
                None => return Ok(Step::Unbounded),
                Some((row, _)) => self.pivot(row, col),
            }
        }
        Err(GeometryError::NumericalFailure(
            "simplex pivot cap exceeded".to_string(),
        ))
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let w = self.width();
        let p = self.data[row * w + col];
        for j in 0..w {
            self.data[row * w + j] /= p;
        }
        for i in 0..self.rows {
            if i == row {
                continue;
            }
            let f = self.data[i * w + col];
            if f != 0.0 {
                for j in 0..w {
                    self.data[i * w + j] -= f * self.data[row * w + j];
                }
            }
        }
        let f = self.reduced[col];
        if f != 0.0 {
            for j in 0..w {
                self.reduced[j] -= f * self.data[row * w + j];
            }
        }
        self.basis[row] = col;
    }

    fn drive_out_artificials(&mut self) {
        for i in 0..self.rows {
            if self.basis[i] < self.first_artificial {
                continue;
            }
            let replacement = (0..self.first_artificial).find(|&j| self.at(i, j).abs() > 1e-9);
            if let Some(j) = replacement {
                self.pivot(i, j);
            }
        }
        self.allow_artificial = false;
    }

    fn set_phase_two_objective(&mut self, c: &[f64]) {
        let n = c.len();
        self.cost.iter_mut().for_each(|x| *x = 0.0);
        for j in 0..n {
            self.cost[j] = c[j];
            self.cost[n + j] = -c[j];
        }
        self.recompute_reduced();
    }

    fn primal(&self, n: usize) -> Vec<f64> {
        let mut vals = vec![0.0; self.cols];
        for i in 0..self.rows {
            vals[self.basis[i]] = self.at(i, self.cols);
        }
        (0..n).map(|j| vals[j] - vals[n + j]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn optimum(sol: LpSolution) -> (Vec<f64>, f64) {
        match sol {
            LpSolution::Optimal { x, value } => (x, value),
            other => panic!("expected optimum, got {other:?}"),
        }
    }

    #[test]
    fn box_maximum() {
        // max x + y on the unit square
        let a = [1.0, 0.0, 0.0, 1.0, -1.0, 0.0, 0.0, -1.0];
        let b = [1.0, 1.0, 0.0, 0.0];
        let (x, v) = optimum(maximize(&[1.0, 1.0], &a, &b).unwrap());
        assert!((v - 2.0).abs() < 1e-9);
        assert!((x[0] - 1.0).abs() < 1e-9 && (x[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn negative_rhs_needs_phase_one() {
        // x >= 2, x <= 3: minimize x
        let a = [-1.0, 1.0];
        let b = [-2.0, 3.0];
        let (x, v) = optimum(maximize(&[-1.0], &a, &b).unwrap());
        assert!((x[0] - 2.0).abs() < 1e-9);
        assert!((v + 2.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let a = [1.0, -1.0];
        assert_eq!(
            maximize(&[1.0], &a, &[0.0, -1.0]).unwrap(),
            LpSolution::Infeasible
        );
        assert_eq!(
            maximize(&[1.0], &[-1.0], &[0.0]).unwrap(),
            LpSolution::Unbounded
        );
    }

    #[test]
    fn degenerate_vertex_terminates() {
        // Many constraints through the same optimal vertex.
        let mut a = Vec::new();
        let mut b = Vec::new();
        for k in 0..12 {
            let th = k as f64 * 0.1;
            a.extend_from_slice(&[th.cos(), th.sin()]);
            b.push(0.0);
        }
        a.extend_from_slice(&[-1.0, 0.0, 0.0, -1.0]);
        b.extend_from_slice(&[1.0, 1.0]);
        let sol = maximize(&[1.0, 1.0], &a, &b).unwrap();
        assert!(matches!(sol, LpSolution::Optimal { .. }));
    }
}

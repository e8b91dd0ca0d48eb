use serde::{Deserialize, Serialize};

use super::LogicError;
use crate::geometry::{GeometryError, Polytope, Region};

/// Named open halfspace `h·x < k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawAtom")]
pub struct Atom {
    pub name: String,
    pub h: Vec<f64>,
    pub k: f64,
}

#[derive(Deserialize)]
struct RawAtom {
    name: String,
    h: Vec<f64>,
    k: f64,
}

impl TryFrom<RawAtom> for Atom {
    type Error = GeometryError;

    fn try_from(raw: RawAtom) -> Result<Self, Self::Error> {
        if raw.h.is_empty() || raw.h.iter().all(|v| *v == 0.0) {
            return Err(GeometryError::Malformed(format!("atom '{}' has a zero normal", raw.name)));
        }
        if raw.h.iter().any(|v| !v.is_finite()) || !raw.k.is_finite() {
            return Err(GeometryError::Malformed(format!("atom '{}' is not finite", raw.name)));
        }
        Ok(Atom {
            name: raw.name,
            h: raw.h,
            k: raw.k,
        })
    }
}

impl Atom {
    /// Panics on a zero or non-finite normal; use serde for untrusted input.
    pub fn new(name: &str, h: Vec<f64>, k: f64) -> Self {
        Atom::try_from(RawAtom {
            name: name.to_string(),
            h,
            k,
        })
        .expect("well-formed atom")
    }

    pub fn holds(&self, x: &[f64]) -> bool {
        self.h.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() < self.k
    }

    pub fn inside(&self) -> Result<Polytope, GeometryError> {
        Polytope::halfspace(&self.h, self.k)
    }

    pub fn outside(&self) -> Result<Polytope, GeometryError> {
        let neg: Vec<f64> = self.h.iter().map(|v| -v).collect();
        Polytope::halfspace(&neg, -self.k)
    }

    /// The two atoms of the case study: `x(1) < 0.3` and `x(2) > 0.6`.
    pub fn case_study() -> Vec<Atom> {
        vec![
            Atom::new("p1", vec![1.0, 0.0], 0.3),
            Atom::new("p2", vec![0.0, -1.0], -0.6),
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Truth {
    True,
    False,
    Mixed,
}

/// Three-valued truth of each atom over the region.
pub fn eval_atoms(region: &Region, atoms: &[Atom]) -> Result<Vec<Truth>, LogicError> {
    atoms
        .iter()
        .map(|a| {
            let meets_inside = !region.intersect_polytope(&a.inside()?)?.is_empty()?;
            let meets_outside = !region.intersect_polytope(&a.outside()?)?.is_empty()?;
            Ok(match (meets_inside, meets_outside) {
                (true, true) => Truth::Mixed,
                (false, _) => Truth::False,
                (true, false) => Truth::True,
            })
        })
        .collect()
}

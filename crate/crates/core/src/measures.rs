//! Finitely supported probability measures on ℝ^d and couplings between them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on `|Σw − 1|` for a measure.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;
/// Tolerance on plan row/column sums.
pub const PLAN_MARGINAL_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("measure has no atoms")]
    EmptyMeasure,
    #[error("weights sum to {sum}, expected 1")]
    WeightSumMismatch { sum: f64 },
    #[error("atom {index} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("atom {index} has invalid weight {weight}")]
    InvalidWeight { index: usize, weight: f64 },
    #[error("atom {index} has a non-finite coordinate")]
    NonFinitePoint { index: usize },
    #[error("plan shape {rows}x{cols} does not match measures {n}x{m}")]
    PlanShape {
        rows: usize,
        cols: usize,
        n: usize,
        m: usize,
    },
    #[error("plan entry ({i},{j}) = {value} is negative or not finite")]
    PlanEntry { i: usize, j: usize, value: f64 },
    #[error("plan {side} marginal {index} is {found}, expected {expected}")]
    PlanMarginal {
        side: &'static str,
        index: usize,
        found: f64,
        expected: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    #[serde(rename = "x")]
    pub point: Vec<f64>,
    #[serde(rename = "w")]
    pub weight: f64,
}

/// A finitely supported probability measure.
///
/// Points are pairwise distinct (exact equality) and weights are positive
/// and sum to one within [`WEIGHT_SUM_TOL`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure", into = "RawMeasure")]
pub struct DiscreteMeasure {
    dim: usize,
    atoms: Vec<Atom>,
}

#[derive(Serialize, Deserialize)]
struct RawMeasure {
    dim: usize,
    atoms: Vec<Atom>,
}

impl TryFrom<RawMeasure> for DiscreteMeasure {
    type Error = MeasureError;

    fn try_from(raw: RawMeasure) -> Result<Self, Self::Error> {
        validate_measure(
            raw.atoms.into_iter().map(|a| (a.point, a.weight)).collect(),
            raw.dim,
        )
    }
}

impl From<DiscreteMeasure> for RawMeasure {
    fn from(m: DiscreteMeasure) -> Self {
        RawMeasure {
            dim: m.dim,
            atoms: m.atoms,
        }
    }
}

/// Validates raw `(point, weight)` pairs into a measure.
///
/// Atoms sharing exactly equal coordinates are merged by summing weights,
/// keeping the position of the first occurrence. Zero-weight atoms are
/// dropped after merging.
pub fn validate_measure(
    raw: Vec<(Vec<f64>, f64)>,
    dim: usize,
) -> Result<DiscreteMeasure, MeasureError> {
    if raw.is_empty() {
        return Err(MeasureError::EmptyMeasure);
    }
    let mut atoms: Vec<Atom> = Vec::with_capacity(raw.len());
    for (index, (point, weight)) in raw.into_iter().enumerate() {
        if point.len() != dim || dim == 0 {
            return Err(MeasureError::DimensionMismatch {
                index,
                expected: dim,
                found: point.len(),
            });
        }
        if point.iter().any(|c| !c.is_finite()) {
            return Err(MeasureError::NonFinitePoint { index });
        }
        if !(weight >= 0.0) || !weight.is_finite() {
            return Err(MeasureError::InvalidWeight { index, weight });
        }
        match atoms.iter_mut().find(|a| a.point == point) {
            Some(existing) => existing.weight += weight,
            None => atoms.push(Atom { point, weight }),
        }
    }
    let sum: f64 = atoms.iter().map(|a| a.weight).sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(MeasureError::WeightSumMismatch { sum });
    }
    atoms.retain(|a| a.weight > 0.0);
    Ok(DiscreteMeasure { dim, atoms })
}

impl DiscreteMeasure {
    /// The Dirac mass at `point`.
    pub fn dirac(point: Vec<f64>) -> Self {
        let dim = point.len();
        DiscreteMeasure {
            dim,
            atoms: vec![Atom { point, weight: 1.0 }],
        }
    }

    /// Uniform measure on the given points (duplicates merged).
    pub fn uniform(points: Vec<Vec<f64>>) -> Result<Self, MeasureError> {
        let dim = points.first().map(Vec::len).unwrap_or(0);
        let w = 1.0 / points.len().max(1) as f64;
        validate_measure(points.into_iter().map(|p| (p, w)).collect(), dim)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.atoms[i].point
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.atoms[i].weight
    }

    pub fn weights(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.weight).collect()
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.atoms.iter().map(|a| a.point.as_slice())
    }

    /// Index of the atom at exactly `point`, if any.
    pub fn index_of(&self, point: &[f64]) -> Option<usize> {
        self.atoms.iter().position(|a| a.point == point)
    }

    /// Tolerant comparison: atoms closer than `tol` are identified and their
    /// weights compared within `tol`.
    pub fn approx_eq(&self, other: &DiscreteMeasure, tol: f64) -> bool {
        if self.dim != other.dim {
            return false;
        }
        let mass_near = |m: &DiscreteMeasure, p: &[f64]| -> f64 {
            m.atoms
                .iter()
                .filter(|a| crate::dist(&a.point, p) <= tol)
                .map(|a| a.weight)
                .sum()
        };
        self.atoms
            .iter()
            .chain(other.atoms.iter())
            .all(|a| (mass_near(self, &a.point) - mass_near(other, &a.point)).abs() <= tol)
    }

    /// Largest distance between a point of `self` and a point of `other`.
    pub fn cross_diameter(&self, other: &DiscreteMeasure) -> f64 {
        self.points()
            .flat_map(|x| other.points().map(move |y| crate::dist(x, y)))
            .fold(0.0, f64::max)
    }
}

/// A transport plan between two measures.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coupling {
    source: DiscreteMeasure,
    target: DiscreteMeasure,
    plan: Vec<Vec<f64>>,
}

/// Builds a coupling after checking shape, sign and marginal constraints.
pub fn make_coupling(
    source: DiscreteMeasure,
    target: DiscreteMeasure,
    plan: Vec<Vec<f64>>,
) -> Result<Coupling, MeasureError> {
    let (n, m) = (source.len(), target.len());
    if plan.len() != n || plan.iter().any(|r| r.len() != m) {
        return Err(MeasureError::PlanShape {
            rows: plan.len(),
            cols: plan.first().map(Vec::len).unwrap_or(0),
            n,
            m,
        });
    }
    for (i, row) in plan.iter().enumerate() {
        for (j, &value) in row.iter().enumerate() {
            if !(value >= 0.0) || !value.is_finite() {
                return Err(MeasureError::PlanEntry { i, j, value });
            }
        }
    }
    for (i, row) in plan.iter().enumerate() {
        let found: f64 = row.iter().sum();
        if (found - source.weight(i)).abs() > PLAN_MARGINAL_TOL {
            return Err(MeasureError::PlanMarginal {
                side: "row",
                index: i,
                found,
                expected: source.weight(i),
            });
        }
    }
    for j in 0..m {
        let found: f64 = plan.iter().map(|r| r[j]).sum();
        if (found - target.weight(j)).abs() > PLAN_MARGINAL_TOL {
            return Err(MeasureError::PlanMarginal {
                side: "column",
                index: j,
                found,
                expected: target.weight(j),
            });
        }
    }
    Ok(Coupling {
        source,
        target,
        plan,
    })
}

impl Coupling {
    /// The product coupling `m0 ⊗ m1`.
    pub fn product(source: DiscreteMeasure, target: DiscreteMeasure) -> Self {
        let plan = source
            .atoms()
            .iter()
            .map(|a| target.atoms().iter().map(|b| a.weight * b.weight).collect())
            .collect();
        Coupling {
            source,
            target,
            plan,
        }
    }

    pub fn source(&self) -> &DiscreteMeasure {
        &self.source
    }

    pub fn target(&self) -> &DiscreteMeasure {
        &self.target
    }

    pub fn plan(&self) -> &[Vec<f64>] {
        &self.plan
    }

    pub fn mass(&self, i: usize, j: usize) -> f64 {
        self.plan[i][j]
    }

    /// Cells `(i, j, mass)` with strictly positive mass, row-major.
    pub fn support(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.plan.iter().enumerate().flat_map(|(i, row)| {
            row.iter()
                .enumerate()
                .filter(|(_, &w)| w > 0.0)
                .map(move |(j, &w)| (i, j, w))
        })
    }

    /// Σ mass · ℓ(|x_i − y_j|) for an arbitrary per-distance cost.
    pub fn expected_cost(&self, cost: impl Fn(f64) -> f64) -> f64 {
        self.support()
            .map(|(i, j, w)| w * cost(crate::dist(self.source.point(i), self.target.point(j))))
            .sum()
    }
}

/// Marginals reconstructed from the plan's row and column sums.
pub fn marginals(c: &Coupling) -> (DiscreteMeasure, DiscreteMeasure) {
    let rows = c
        .source
        .atoms()
        .iter()
        .zip(&c.plan)
        .map(|(a, row)| Atom {
            point: a.point.clone(),
            weight: row.iter().sum(),
        })
        .collect();
    let cols = c
        .target
        .atoms()
        .iter()
        .enumerate()
        .map(|(j, a)| Atom {
            point: a.point.clone(),
            weight: c.plan.iter().map(|r| r[j]).sum(),
        })
        .collect();
    (
        DiscreteMeasure {
            dim: c.source.dim,
            atoms: rows,
        },
        DiscreteMeasure {
            dim: c.target.dim,
            atoms: cols,
        },
    )
}

/// Seeded random measure: points uniform in `[-box_radius, box_radius]^dim`,
/// weights uniform on the simplex.
pub fn random_measure(seed: u64, n_atoms: usize, dim: usize, box_radius: f64) -> DiscreteMeasure {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_measure_with(&mut rng, n_atoms, dim, box_radius)
}

/// As [`random_measure`], drawing from a caller-owned generator.
pub fn random_measure_with<R: Rng + ?Sized>(
    rng: &mut R,
    n_atoms: usize,
    dim: usize,
    box_radius: f64,
) -> DiscreteMeasure {
    assert!(n_atoms >= 1 && dim >= 1 && box_radius > 0.0);
    let points: Vec<Vec<f64>> = (0..n_atoms)
        .map(|_| {
            (0..dim)
                .map(|_| rng.random_range(-box_radius..=box_radius))
                .collect()
        })
        .collect();
    // Normalised exponential spacings are uniform on the simplex.
    let raw: Vec<f64> = (0..n_atoms)
        .map(|_| -(1.0 - rng.random::<f64>()).ln())
        .collect();
    let total: f64 = raw.iter().sum();
    let mut weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let head: f64 = weights[..n_atoms - 1].iter().sum();
    weights[n_atoms - 1] = 1.0 - head;
    let atoms = points
        .into_iter()
        .zip(weights)
        .map(|(point, weight)| Atom { point, weight })
        .collect();
    DiscreteMeasure { dim, atoms }
}

/// Seeded uniform-weight measure with `n_atoms` distinct random points.
pub fn random_uniform_measure<R: Rng + ?Sized>(
    rng: &mut R,
    n_atoms: usize,
    dim: usize,
    box_radius: f64,
) -> DiscreteMeasure {
    let points = (0..n_atoms)
        .map(|_| {
            (0..dim)
                .map(|_| rng.random_range(-box_radius..=box_radius))
                .collect()
        })
        .collect();
    DiscreteMeasure::uniform(points).expect("uniform weights sum to one")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: f64) -> Vec<f64> {
        vec![x]
    }

    #[test]
    fn single_atom_is_dirac() {
        let m = validate_measure(vec![(pt(0.0), 1.0)], 1).unwrap();
        assert_eq!(m, DiscreteMeasure::dirac(pt(0.0)));
    }

    #[test]
    fn duplicates_are_merged() {
        let m = validate_measure(vec![(pt(0.0), 0.5), (pt(0.0), 0.5)], 1).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.weight(0), 1.0);
    }

    #[test]
    fn weight_sum_rejected() {
        let err = validate_measure(vec![(pt(0.0), 0.5), (pt(1.0), 0.49)], 1).unwrap_err();
        assert!(matches!(err, MeasureError::WeightSumMismatch { .. }));
    }

    #[test]
    fn empty_and_dimension_errors() {
        assert_eq!(validate_measure(vec![], 1), Err(MeasureError::EmptyMeasure));
        let err = validate_measure(vec![(vec![0.0, 1.0], 1.0)], 1).unwrap_err();
        assert!(matches!(err, MeasureError::DimensionMismatch { .. }));
        let err = validate_measure(vec![(pt(0.0), -0.5), (pt(1.0), 1.5)], 1).unwrap_err();
        assert!(matches!(err, MeasureError::InvalidWeight { .. }));
    }

    #[test]
    fn marginals_examples() {
        let half = validate_measure(vec![(pt(0.0), 0.5), (pt(1.0), 0.5)], 1).unwrap();
        let c = make_coupling(
            half.clone(),
            half.clone(),
            vec![vec![0.5, 0.0], vec![0.0, 0.5]],
        )
        .unwrap();
        assert_eq!(marginals(&c), (half.clone(), half.clone()));

        let two = DiscreteMeasure::dirac(pt(2.0));
        let c = make_coupling(half.clone(), two.clone(), vec![vec![0.5], vec![0.5]]).unwrap();
        assert_eq!(marginals(&c), (half.clone(), two));

        let c = Coupling::product(half.clone(), half.clone());
        assert_eq!(marginals(&c), (half.clone(), half));
    }

    #[test]
    fn bad_plan_rejected() {
        let half = validate_measure(vec![(pt(0.0), 0.5), (pt(1.0), 0.5)], 1).unwrap();
        let err =
            make_coupling(half.clone(), half, vec![vec![0.5, 0.5], vec![0.0, 0.0]]).unwrap_err();
        assert!(matches!(err, MeasureError::PlanMarginal { .. }));
    }

    #[test]
    fn random_measure_postconditions() {
        let m = random_measure(7, 1, 1, 1.0);
        assert_eq!(m.len(), 1);
        assert_eq!(m.weight(0), 1.0);

        assert_eq!(random_measure(11, 5, 3, 2.0), random_measure(11, 5, 3, 2.0));

        let m = random_measure(3, 5, 3, 2.0);
        assert_eq!(m.len(), 5);
        assert!(m
            .points()
            .all(|p| p.len() == 3 && p.iter().all(|c| c.abs() <= 2.0)));
        assert!((m.weights().iter().sum::<f64>() - 1.0).abs() <= WEIGHT_SUM_TOL);
        assert!(m.weights().iter().all(|&w| w > 0.0 && w <= 1.0));
    }

    #[test]
    fn json_format() {
        let m: DiscreteMeasure =
            serde_json::from_str(r#"{"dim":1,"atoms":[{"x":[0.0],"w":0.5},{"x":[1.0],"w":0.5}]}"#)
                .unwrap();
        assert_eq!(m.len(), 2);
        let back = serde_json::to_string(&m).unwrap();
        assert_eq!(
            back,
            r#"{"dim":1,"atoms":[{"x":[0.0],"w":0.5},{"x":[1.0],"w":0.5}]}"#
        );
        assert!(serde_json::from_str::<DiscreteMeasure>(
            r#"{"dim":1,"atoms":[{"x":[0.0],"w":0.5}]}"#
        )
        .is_err());
    }
}

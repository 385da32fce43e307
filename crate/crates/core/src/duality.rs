//! Infimal convolution `f^ℓ(x) = min_y ℓ(|y − x|) + f(y)` over a finite grid
//! and the discrete control identity built on it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::costs::{Assumption, CostFunction};
use crate::dist;
use crate::ensembles::{oracle_min_path, EnsembleError, Objective};
use crate::exec::{self, ExecMode};
use crate::measures::DiscreteMeasure;
use crate::paths::{linear_path, NIndex};

/// Oracle spot-check resolution used by [`verify_control_identity`].
pub const ORACLE_PIECES: usize = 4;
pub const ORACLE_SPEEDS: [f64; 5] = [0.0, 0.5, 1.0, 2.0, 4.0];
pub const ORACLE_TOL: f64 = 1e-9;

const HEADER: &str = "discrete skeleton: P0 is atomic, so the absolute-continuity \
hypothesis does not hold; terminal positions are restricted to the grid of f and the \
identity checked is the atomwise infimal convolution";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DualityError {
    #[error("grid function needs at least one point")]
    Empty,
    #[error("{points} points but {values} values")]
    LengthMismatch { points: usize, values: usize },
    #[error("grid point {0} repeats an earlier point")]
    DuplicatePoint(usize),
    #[error("grid point {0} has the wrong dimension")]
    DimensionMismatch(usize),
    #[error("grid entry {0} is not finite")]
    NonFinite(usize),
    #[error("cost `{cost}` does not declare {missing:?}, required for i = {index}")]
    HypothesisNotDeclared {
        cost: String,
        index: u8,
        missing: Vec<Assumption>,
    },
    #[error(transparent)]
    Oracle(#[from] EnsembleError),
}

/// A function known on finitely many distinct points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid", into = "RawGrid")]
pub struct GridFunction {
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawGrid {
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
}

impl TryFrom<RawGrid> for GridFunction {
    type Error = DualityError;

    fn try_from(r: RawGrid) -> Result<Self, DualityError> {
        GridFunction::new(r.points, r.values)
    }
}

impl From<GridFunction> for RawGrid {
    fn from(g: GridFunction) -> Self {
        RawGrid {
            points: g.points,
            values: g.values,
        }
    }
}

impl GridFunction {
    pub fn new(points: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self, DualityError> {
        if points.is_empty() {
            return Err(DualityError::Empty);
        }
        if points.len() != values.len() {
            return Err(DualityError::LengthMismatch {
                points: points.len(),
                values: values.len(),
            });
        }
        let d = points[0].len();
        for (k, (p, v)) in points.iter().zip(&values).enumerate() {
            if p.len() != d {
                return Err(DualityError::DimensionMismatch(k));
            }
            if !v.is_finite() || p.iter().any(|c| !c.is_finite()) {
                return Err(DualityError::NonFinite(k));
            }
            if points[..k].contains(p) {
                return Err(DualityError::DuplicatePoint(k));
            }
        }
        Ok(GridFunction { points, values })
    }

    /// Tabulates `f` on `points`.
    pub fn from_fn(points: Vec<Vec<f64>>, f: impl Fn(&[f64]) -> f64) -> Result<Self, DualityError> {
        let values = points.iter().map(|p| f(p)).collect();
        Self::new(points, values)
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `f + c`.
    pub fn shifted(&self, c: f64) -> Self {
        GridFunction {
            points: self.points.clone(),
            values: self.values.iter().map(|v| v + c).collect(),
        }
    }
}

/// Minimizer index and value of `ℓ(|y − x|) + f(y)`; the first grid point
/// wins ties.
fn argmin_at(f: &GridFunction, cost: &CostFunction, x: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, (y, v)) in f.points.iter().zip(&f.values).enumerate() {
        let s = cost.eval(dist(x, y)) + v;
        if s < best.1 {
            best = (k, s);
        }
    }
    best
}

/// `f^ℓ` at every query point, with the infimum taken over the grid of `f`.
pub fn inf_conv(
    f: &GridFunction,
    cost: &CostFunction,
    queries: &[Vec<f64>],
    mode: ExecMode,
) -> Vec<f64> {
    exec::map_slice(mode, queries, |x| argmin_at(f, cost, x).1)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleCheck {
    pub atom: usize,
    pub grid_index: usize,
    pub distance: f64,
    pub oracle_value: f64,
    pub lower_bound: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControlIdentityReport {
    pub header: String,
    pub index: u8,
    /// `f^ℓ` at each atom of `P₀`.
    pub fl_values: Vec<f64>,
    /// Grid point selected as terminal position for each atom.
    pub selected: Vec<usize>,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub oracle_checks: Vec<OracleCheck>,
}

impl ControlIdentityReport {
    pub fn passed(&self) -> bool {
        self.margin == 0.0 && self.oracle_checks.iter().all(|c| c.passed)
    }
}

/// Assumptions a cost must declare for the identity with index `i`.
pub fn required_assumptions(i: NIndex) -> Vec<Assumption> {
    match i {
        NIndex::One => vec![Assumption::A1i, Assumption::A2iii],
        NIndex::Two => vec![
            Assumption::A1i,
            Assumption::A1iii,
            Assumption::A2i,
            Assumption::A2iii,
        ],
    }
}

/// Checks `min E[∫Lᵢ + f(X(1))] = ∫ f^ℓ dP₀` atom by atom.
///
/// The left side sends each atom `x` along the linear path to the grid point
/// minimizing `∫Lᵢ + f`, whose cost is `ℓ(|y − x|)`; the right side sums the
/// infimal convolution. For every selected pair the oracle confirms that no
/// step path on its grid moves `x` to `y` for less than `ℓ(|y − x|)`.
pub fn verify_control_identity(
    m0: &DiscreteMeasure,
    f: &GridFunction,
    cost: &CostFunction,
    i: NIndex,
    mode: ExecMode,
) -> Result<ControlIdentityReport, DualityError> {
    let index = match i {
        NIndex::One => 1,
        NIndex::Two => 2,
    };
    let missing: Vec<Assumption> = required_assumptions(i)
        .into_iter()
        .filter(|a| !cost.declares(*a))
        .collect();
    if !missing.is_empty() {
        return Err(DualityError::HypothesisNotDeclared {
            cost: cost.name().to_string(),
            index,
            missing,
        });
    }
    if m0.dim() != f.dim() {
        return Err(DualityError::DimensionMismatch(0));
    }

    let atoms: Vec<Vec<f64>> = m0.points().map(<[f64]>::to_vec).collect();
    let fl_values = inf_conv(f, cost, &atoms, mode);

    let mut lhs = 0.0;
    let mut selected = Vec::with_capacity(atoms.len());
    for (a, x) in atoms.iter().enumerate() {
        let mut best = (0, f64::INFINITY);
        for (k, (y, v)) in f.points.iter().zip(&f.values).enumerate() {
            let path_cost = linear_path(x, y)
                .cost_li(cost, i)
                .expect("linear paths live on [0,1]");
            let s = path_cost + v;
            if s < best.1 {
                best = (k, s);
            }
        }
        selected.push(best.0);
        lhs += m0.weight(a) * best.1;
    }
    let rhs = fl_values
        .iter()
        .enumerate()
        .map(|(a, v)| m0.weight(a) * v)
        .sum::<f64>();

    let objective = match i {
        NIndex::One => Objective::L1,
        NIndex::Two => Objective::L2,
    };
    let mut oracle_checks = Vec::new();
    for (a, &k) in selected.iter().enumerate() {
        let distance = dist(&atoms[a], &f.points[k]);
        if distance == 0.0 {
            continue;
        }
        let r = oracle_min_path(
            0.0,
            distance,
            cost,
            objective,
            ORACLE_PIECES,
            &ORACLE_SPEEDS,
            None,
            mode,
        )?;
        let lower_bound = cost.eval(distance);
        oracle_checks.push(OracleCheck {
            atom: a,
            grid_index: k,
            distance,
            oracle_value: r.value,
            lower_bound,
            passed: r.value >= lower_bound - ORACLE_TOL,
        });
    }

    Ok(ControlIdentityReport {
        header: HEADER.to_string(),
        index,
        fl_values,
        selected,
        lhs,
        rhs,
        margin: lhs - rhs,
        oracle_checks,
    })
}

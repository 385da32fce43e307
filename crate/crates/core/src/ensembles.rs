//! Weighted path families realizing couplings, and the path-space
//! functionals evaluated on them.
//!
//! A random path `X(·)` (optionally paired with a speed bound `M`) is
//! realized as a finite weighted family; expectations are exact weighted
//! sums. The optimal builders turn a static plan into an ensemble whose
//! path-space cost equals the static value, and [`oracle_min_path`] searches
//! all step paths on a grid to certify that nothing cheaper exists there.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::costs::CostFunction;
use crate::exec::{self, ExecMode};
use crate::measures::{
    make_coupling, validate_measure, Coupling, DiscreteMeasure, MeasureError, PLAN_MARGINAL_TOL,
};
use crate::mk_solver::{max_arc_length, solve_mk, MkSolution, SolverError};
use crate::paths::{random_path_between, stop_and_go, IntervalSet, NIndex, PathError, SteppedPath};
use crate::{dist, norm};

/// Tolerance on ensemble weights summing to one and on `‖X′‖∞ ≤ M`.
pub const WEIGHT_TOL: f64 = 1e-12;

/// Largest oracle instance: pieces and distinct grid speeds.
pub const ORACLE_MAX_PIECES: usize = 8;
pub const ORACLE_MAX_SPEEDS: usize = 6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnsembleError {
    #[error("ensemble has no members")]
    Empty,
    #[error("member weights sum to {0}, expected 1")]
    WeightSum(f64),
    #[error("member {0} has a weight outside (0,1]")]
    BadWeight(usize),
    #[error("member {index} moves at speed {speed} above its bound {bound}")]
    BoundViolated {
        index: usize,
        speed: f64,
        bound: f64,
    },
    #[error("member {0} carries no speed bound")]
    MissingBound(usize),
    #[error("cell ({i},{j}) needs speed bound {needed} but has {bound}")]
    InfeasibleBound {
        i: usize,
        j: usize,
        needed: f64,
        bound: f64,
    },
    #[error("members live in different dimensions")]
    DimensionMismatch,
    #[error("cell index ({i},{j}) out of range")]
    BadCell { i: usize, j: usize },
    #[error("no step path on the grid satisfies the endpoint and cap constraints")]
    NoFeasiblePath,
    #[error("oracle supports at most {ORACLE_MAX_PIECES} pieces and {ORACLE_MAX_SPEEDS} speeds")]
    OracleTooLarge,
    #[error("speed grid entries must be finite and non-negative")]
    BadSpeedGrid,
    #[error("bound radius must be positive, got {0}")]
    BadRadius(f64),
    #[error(transparent)]
    Path(#[from] PathError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub weight: f64,
    pub path: SteppedPath,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
}

/// A finite weighted family of paths, optionally with speed bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEnsemble", into = "RawEnsemble")]
pub struct TransportEnsemble {
    members: Vec<Member>,
}

#[derive(Serialize, Deserialize)]
struct RawEnsemble {
    members: Vec<Member>,
}

impl TryFrom<RawEnsemble> for TransportEnsemble {
    type Error = EnsembleError;

    fn try_from(r: RawEnsemble) -> Result<Self, EnsembleError> {
        TransportEnsemble::new(r.members)
    }
}

impl From<TransportEnsemble> for RawEnsemble {
    fn from(e: TransportEnsemble) -> Self {
        RawEnsemble { members: e.members }
    }
}

impl TransportEnsemble {
    pub fn new(members: Vec<Member>) -> Result<Self, EnsembleError> {
        let first = members.first().ok_or(EnsembleError::Empty)?;
        let d = first.path.dim();
        let mut sum = 0.0;
        for (index, m) in members.iter().enumerate() {
            if !(m.weight > 0.0 && m.weight <= 1.0 + WEIGHT_TOL) {
                return Err(EnsembleError::BadWeight(index));
            }
            if m.path.dim() != d {
                return Err(EnsembleError::DimensionMismatch);
            }
            if let Some(bound) = m.bound {
                let speed = m.path.sup_norm();
                if !(bound >= 0.0) || speed > bound + WEIGHT_TOL * bound.max(1.0) {
                    return Err(EnsembleError::BoundViolated {
                        index,
                        speed,
                        bound,
                    });
                }
            }
            sum += m.weight;
        }
        if (sum - 1.0).abs() > WEIGHT_TOL {
            return Err(EnsembleError::WeightSum(sum));
        }
        Ok(TransportEnsemble { members })
    }

    /// A single path carrying all the mass.
    pub fn single(path: SteppedPath, bound: Option<f64>) -> Result<Self, EnsembleError> {
        Self::new(vec![Member {
            weight: 1.0,
            path,
            bound,
        }])
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Laws of `(X(0), X(1))` (end points computed as start + displacement).
pub fn endpoint_marginals(
    e: &TransportEnsemble,
) -> Result<(DiscreteMeasure, DiscreteMeasure), EnsembleError> {
    let d = e.members[0].path.dim();
    let starts = e
        .members
        .iter()
        .map(|m| (m.path.start().to_vec(), m.weight))
        .collect();
    let ends = e.members.iter().map(|m| (m.path.end(), m.weight)).collect();
    Ok((validate_measure(starts, d)?, validate_measure(ends, d)?))
}

/// `E[∫₀¹ Lᵢ(t, X′) dt]`.
pub fn eval_tilde(
    e: &TransportEnsemble,
    cost: &CostFunction,
    i: NIndex,
) -> Result<f64, EnsembleError> {
    let mut total = 0.0;
    for m in &e.members {
        total += m.weight * m.path.cost_li(cost, i)?;
    }
    Ok(total)
}

/// `E[∫₀¹ ℓ(|X′(t)|) dt]` over a bounded ensemble; every member must carry
/// its bound `M` with `‖X′‖∞ ≤ M`.
pub fn eval_bounded(e: &TransportEnsemble, cost: &CostFunction) -> Result<f64, EnsembleError> {
    let mut total = 0.0;
    for (index, m) in e.members.iter().enumerate() {
        let bound = m.bound.ok_or(EnsembleError::MissingBound(index))?;
        let speed = m.path.sup_norm();
        if speed > bound + WEIGHT_TOL * bound.max(1.0) {
            return Err(EnsembleError::BoundViolated {
                index,
                speed,
                bound,
            });
        }
        total += m.weight * m.path.cost_plain(cost);
    }
    Ok(total)
}

/// `E[∫₀¹ ℓ(|X′(t)|) dt]` without any bound requirement.
pub fn eval_plain(e: &TransportEnsemble, cost: &CostFunction) -> f64 {
    e.members
        .iter()
        .map(|m| m.weight * m.path.cost_plain(cost))
        .sum()
}

/// One atom of the joint law of `(X₀, X₁, M)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundedCell {
    pub i: usize,
    pub j: usize,
    pub mass: f64,
    pub bound: f64,
}

/// A finitely supported triple `(X₀, X₁, M)` with `|X₁ − X₀| ≤ M`.
///
/// A plan cell may appear several times with different bounds, which is how
/// a non-degenerate law of `M` given `(X₀, X₁)` is represented.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundedCouplingTriple {
    source: DiscreteMeasure,
    target: DiscreteMeasure,
    cells: Vec<BoundedCell>,
}

impl BoundedCouplingTriple {
    pub fn new(
        source: DiscreteMeasure,
        target: DiscreteMeasure,
        cells: Vec<BoundedCell>,
    ) -> Result<Self, EnsembleError> {
        let (n, m) = (source.len(), target.len());
        let mut rows = vec![0.0; n];
        let mut cols = vec![0.0; m];
        for c in &cells {
            if c.i >= n || c.j >= m {
                return Err(EnsembleError::BadCell { i: c.i, j: c.j });
            }
            let needed = dist(source.point(c.i), target.point(c.j));
            if !(c.mass > 0.0) || !(c.bound >= 0.0) || needed > c.bound * (1.0 + 1e-12) + 1e-15 {
                return Err(EnsembleError::InfeasibleBound {
                    i: c.i,
                    j: c.j,
                    needed,
                    bound: c.bound,
                });
            }
            rows[c.i] += c.mass;
            cols[c.j] += c.mass;
        }
        let check = |found: &[f64], mu: &DiscreteMeasure, side: &'static str| {
            for (index, (&f, w)) in found.iter().zip(mu.weights()).enumerate() {
                if (f - w).abs() > PLAN_MARGINAL_TOL {
                    return Err(MeasureError::PlanMarginal {
                        side,
                        index,
                        found: f,
                        expected: w,
                    });
                }
            }
            Ok(())
        };
        check(&rows, &source, "row")?;
        check(&cols, &target, "column")?;
        Ok(BoundedCouplingTriple {
            source,
            target,
            cells,
        })
    }

    /// Deterministic bound `M ≡ r` on every positive-mass cell of `c`.
    pub fn uniform(c: &Coupling, r: f64) -> Result<Self, EnsembleError> {
        let cells = c
            .support()
            .map(|(i, j, mass)| BoundedCell {
                i,
                j,
                mass,
                bound: r,
            })
            .collect();
        Self::new(c.source().clone(), c.target().clone(), cells)
    }

    pub fn source(&self) -> &DiscreteMeasure {
        &self.source
    }

    pub fn target(&self) -> &DiscreteMeasure {
        &self.target
    }

    pub fn cells(&self) -> &[BoundedCell] {
        &self.cells
    }

    pub fn displacement(&self, cell: &BoundedCell) -> f64 {
        dist(self.source.point(cell.i), self.target.point(cell.j))
    }

    /// The `(X₀, X₁)` marginal of the triple as a plan.
    pub fn coupling(&self) -> Result<Coupling, MeasureError> {
        let mut plan = vec![vec![0.0; self.target.len()]; self.source.len()];
        for c in &self.cells {
            plan[c.i][c.j] += c.mass;
        }
        make_coupling(self.source.clone(), self.target.clone(), plan)
    }
}

/// `E[ℓ(M)M⁻¹|X₁ − X₀|; M > 0]`.
pub fn eval_tv(t: &BoundedCouplingTriple, cost: &CostFunction) -> f64 {
    t.cells
        .iter()
        .filter(|c| c.bound > 0.0)
        .map(|c| c.mass * cost.eval(c.bound) / c.bound * t.displacement(c))
        .sum()
}

/// The triple `(X(0), X(1), M)` induced by a bounded ensemble.
pub fn induced_triple(e: &TransportEnsemble) -> Result<BoundedCouplingTriple, EnsembleError> {
    let (source, target) = endpoint_marginals(e)?;
    let mut cells = Vec::with_capacity(e.len());
    for (index, m) in e.members.iter().enumerate() {
        let bound = m.bound.ok_or(EnsembleError::MissingBound(index))?;
        let i = source.index_of(m.path.start()).expect("start is an atom");
        let j = target.index_of(&m.path.end()).expect("end is an atom");
        cells.push(BoundedCell {
            i,
            j,
            mass: m.weight,
            bound,
        });
    }
    BoundedCouplingTriple::new(source, target, cells)
}

/// Stop-and-go ensemble over an optimal plan: one member per positive-mass
/// cell, moving on the set produced by `set_gen(i, j)`.
pub fn build_opt_tilde<F>(
    sol: &MkSolution,
    mut set_gen: F,
) -> Result<TransportEnsemble, EnsembleError>
where
    F: FnMut(usize, usize) -> IntervalSet,
{
    let c = &sol.plan;
    let mut members = Vec::new();
    for (i, j, mass) in c.support() {
        let (x, y) = (c.source().point(i), c.target().point(j));
        let path = if x == y {
            SteppedPath::constant(x.to_vec())
        } else {
            stop_and_go(x, y, &set_gen(i, j))?
        };
        members.push(Member {
            weight: mass,
            path,
            bound: None,
        });
    }
    TransportEnsemble::new(members)
}

/// Bounded optimal ensemble: each cell moves at speed exactly `M` on
/// `[0, |Δ|/M]` and rests afterwards.
pub fn build_opt_bounded(t: &BoundedCouplingTriple) -> Result<TransportEnsemble, EnsembleError> {
    let mut members = Vec::with_capacity(t.cells.len());
    for c in &t.cells {
        let (x, y) = (t.source.point(c.i), t.target.point(c.j));
        let delta = dist(x, y);
        let path = if delta == 0.0 {
            SteppedPath::constant(x.to_vec())
        } else {
            if !(c.bound > 0.0) {
                return Err(EnsembleError::InfeasibleBound {
                    i: c.i,
                    j: c.j,
                    needed: delta,
                    bound: c.bound,
                });
            }
            let active = delta / c.bound;
            if active > 1.0 + 1e-12 {
                return Err(EnsembleError::InfeasibleBound {
                    i: c.i,
                    j: c.j,
                    needed: delta,
                    bound: c.bound,
                });
            }
            stop_and_go(x, y, &IntervalSet::prefix(active.min(1.0))?)?
        };
        members.push(Member {
            weight: c.mass,
            path,
            bound: Some(c.bound),
        });
    }
    TransportEnsemble::new(members)
}

/// Objective minimized by [`oracle_min_path`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Objective {
    /// `∫ ℓ(|X′|)`.
    #[serde(rename = "plain")]
    Plain,
    /// `∫ L₁(t, X′)`.
    #[serde(rename = "L1")]
    L1,
    /// `∫ L₂(t, X′)`.
    #[serde(rename = "L2")]
    L2,
    /// `∫ (1/N₁) ℓ(N₁|X′|)`.
    #[serde(rename = "rescaled1")]
    Rescaled1,
    /// `∫ (1/N₂) ℓ(N₂|X′|)`.
    #[serde(rename = "rescaled2")]
    Rescaled2,
}

impl std::str::FromStr for Objective {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "plain" => Ok(Objective::Plain),
            "L1" | "l1" => Ok(Objective::L1),
            "L2" | "l2" => Ok(Objective::L2),
            "rescaled1" => Ok(Objective::Rescaled1),
            "rescaled2" => Ok(Objective::Rescaled2),
            other => Err(format!("unknown objective `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub value: f64,
    /// Signed velocities of the minimizing path, one per piece.
    pub velocities: Vec<f64>,
    /// Number of grid assignments meeting the endpoint and cap constraints.
    pub feasible: u64,
}

/// Exhaustive minimum of `objective` over all `k`-piece step paths from `x`
/// to `y` on the line, each piece of duration `1/k` with signed speed
/// `g·|y − x|`, `g ∈ ±speed_grid`. Paths moving faster than `cap` are
/// excluded.
///
/// Restricting to collinear motion loses nothing: every objective depends
/// on `X′` only through the speed profile `|X′(t)|` and the displacement, and
/// any speed profile with `‖X′‖₁ ≥ |y − x|` is realized on the line by moving
/// forward until `(‖X′‖₁ + |y − x|)/2` is covered and backward afterwards.
/// This keeps `|X′|`, `‖X′‖∞` and `‖X′‖₁` (hence `N₁`, `N₂`) unchanged.
#[allow(clippy::too_many_arguments)]
pub fn oracle_min_path(
    x: f64,
    y: f64,
    cost: &CostFunction,
    objective: Objective,
    k: usize,
    speed_grid: &[f64],
    cap: Option<f64>,
    mode: ExecMode,
) -> Result<OracleResult, EnsembleError> {
    if k == 0
        || k > ORACLE_MAX_PIECES
        || speed_grid.is_empty()
        || speed_grid.len() > ORACLE_MAX_SPEEDS
    {
        return Err(EnsembleError::OracleTooLarge);
    }
    if speed_grid.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
        return Err(EnsembleError::BadSpeedGrid);
    }
    let delta = (y - x).abs();
    if delta == 0.0 {
        return Ok(OracleResult {
            value: 0.0,
            velocities: vec![0.0; k],
            feasible: 1,
        });
    }
    let dir = (y - x).signum();
    let mut signed: Vec<f64> = speed_grid
        .iter()
        .flat_map(|&g| if g > 0.0 { vec![-g, g] } else { vec![0.0] })
        .collect();
    signed.sort_by(f64::total_cmp);
    signed.dedup();
    let base = signed.len() as u64;
    let free = k - 1;
    let total = base.pow(free as u32);
    let h = 1.0 / k as f64;
    let kf = k as f64;
    let cap = cap.map(|c| c * (1.0 + 1e-12));

    let eval = |g: &[f64]| -> Option<f64> {
        let speeds: Vec<f64> = g.iter().map(|gi| gi.abs() * delta).collect();
        let sup = speeds.iter().copied().fold(0.0, f64::max);
        if cap.is_some_and(|c| sup > c) {
            return None;
        }
        let sum_l =
            |scale: f64| -> f64 { h * speeds.iter().map(|u| cost.eval(u * scale)).sum::<f64>() };
        Some(match objective {
            Objective::Plain => sum_l(1.0),
            Objective::L1 | Objective::Rescaled1 | Objective::L2 | Objective::Rescaled2 => {
                let n = match objective {
                    Objective::L1 | Objective::Rescaled1 => sup / delta,
                    _ => sup / (h * speeds.iter().sum::<f64>()),
                };
                match objective {
                    Objective::L1 | Objective::L2 => n * sum_l(1.0 / n),
                    _ => sum_l(n) / n,
                }
            }
        })
    };

    let chunk_results = exec::map_slice(mode, &exec::chunks(total, 4096), |&(lo, hi)| {
        let mut best: Option<(f64, u64, Vec<f64>)> = None;
        let mut feasible = 0u64;
        let mut g = vec![0.0; k];
        for idx in lo..hi {
            let mut rest = idx;
            let mut acc = 0.0;
            for slot in g.iter_mut().take(free) {
                *slot = signed[(rest % base) as usize];
                rest /= base;
                acc += *slot;
            }
            let need = kf - acc;
            let Some(&last) = signed.iter().find(|s| (*s - need).abs() <= 1e-9 * kf) else {
                continue;
            };
            g[free] = last;
            let Some(v) = eval(&g) else { continue };
            feasible += 1;
            if best.as_ref().is_none_or(|(b, _, _)| v < *b) {
                best = Some((v, idx, g.clone()));
            }
        }
        (best, feasible)
    });

    let mut best: Option<(f64, u64, Vec<f64>)> = None;
    let mut feasible = 0;
    for (cand, n) in chunk_results {
        feasible += n;
        if let Some(c) = cand {
            if best.as_ref().is_none_or(|b| c.0 < b.0) {
                best = Some(c);
            }
        }
    }
    let (value, _, g) = best.ok_or(EnsembleError::NoFeasiblePath)?;
    Ok(OracleResult {
        value,
        velocities: g.iter().map(|gi| dir * gi * delta).collect(),
        feasible,
    })
}

/// Value and optimal ensemble of the bounded-velocity problem with the
/// deterministic bound `M ≡ r`.
#[derive(Debug, Clone, Serialize)]
pub struct BoundedSolution {
    pub value: f64,
    /// Optimal `E|X₁ − X₀|` among plans moving at most `r`.
    pub mean_displacement: f64,
    pub triple: BoundedCouplingTriple,
    pub ensemble: TransportEnsemble,
}

/// Solves `V(m0, m1; {δ_r}) = (ℓ(r)/r) · min E|X₁ − X₀|` over plans with
/// `|X₁ − X₀| ≤ r`.
pub fn solve_bounded(
    m0: &DiscreteMeasure,
    m1: &DiscreteMeasure,
    cost: &CostFunction,
    r: f64,
) -> Result<BoundedSolution, EnsembleError> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(EnsembleError::BadRadius(r));
    }
    let forbid = max_arc_length(m0, m1, r);
    let sol = solve_mk(m0, m1, &CostFunction::linear(), Some(&forbid))?;
    // Arcs within the relative slack are clamped onto the bound.
    let cells = sol
        .plan
        .support()
        .map(|(i, j, mass)| {
            let d = dist(m0.point(i), m1.point(j));
            BoundedCell {
                i,
                j,
                mass,
                bound: r.max(d),
            }
        })
        .collect();
    let triple = BoundedCouplingTriple::new(m0.clone(), m1.clone(), cells)?;
    let ensemble = build_opt_bounded(&triple)?;
    Ok(BoundedSolution {
        value: cost.eval(r) / r * sol.value,
        mean_displacement: sol.value,
        triple,
        ensemble,
    })
}

/// Random feasible triple over the support of `c`: each positive cell is
/// split into up to `max_levels` sub-cells with independent bounds
/// `M ∈ [|Δ|, 3|Δ|]` (the first level sits exactly at `|Δ|`).
pub fn random_triple<R: Rng + ?Sized>(
    rng: &mut R,
    c: &Coupling,
    max_levels: usize,
) -> Result<BoundedCouplingTriple, EnsembleError> {
    let mut cells = Vec::new();
    for (i, j, mass) in c.support() {
        let delta = dist(c.source().point(i), c.target().point(j));
        let levels = rng.random_range(1..=max_levels.max(1));
        let mut raw: Vec<f64> = (0..levels).map(|_| rng.random_range(0.1..1.0)).collect();
        let s: f64 = raw.iter().sum();
        raw.iter_mut().for_each(|w| *w *= mass / s);
        for (l, w) in raw.into_iter().enumerate() {
            let bound = if l == 0 {
                delta
            } else if delta == 0.0 {
                rng.random_range(0.0..2.0)
            } else {
                delta * rng.random_range(1.0..3.0)
            };
            cells.push(BoundedCell {
                i,
                j,
                mass: w,
                bound,
            });
        }
    }
    BoundedCouplingTriple::new(c.source().clone(), c.target().clone(), cells)
}

/// Random admissible bounded ensemble over the support of `c`, together
/// with the triple it induces. Paths have `pieces` random pieces and bounds
/// `M ∈ [‖X′‖∞, 2‖X′‖∞]`.
pub fn random_admissible<R: Rng + ?Sized>(
    rng: &mut R,
    c: &Coupling,
    pieces: usize,
) -> Result<(TransportEnsemble, BoundedCouplingTriple), EnsembleError> {
    let mut members = Vec::new();
    let mut cells = Vec::new();
    for (i, j, mass) in c.support() {
        let (x, y) = (c.source().point(i), c.target().point(j));
        let path = random_path_between(rng, x, y, pieces, 2.0 + dist(x, y));
        let bound = path.sup_norm() * rng.random_range(1.0..2.0);
        cells.push(BoundedCell { i, j, mass, bound });
        members.push(Member {
            weight: mass,
            path,
            bound: Some(bound),
        });
    }
    Ok((
        TransportEnsemble::new(members)?,
        BoundedCouplingTriple::new(c.source().clone(), c.target().clone(), cells)?,
    ))
}

/// `‖X′‖₁ = |X(1) − X(0)|` and every piece moves at speed `0` or
/// `N₁·|X(1) − X(0)|`, within relative tolerance `tol`.
pub fn has_optimal_structure(p: &SteppedPath, tol: f64) -> bool {
    let disp = norm(&p.displacement());
    let scale = disp.max(1.0);
    if (p.l1_norm() - disp).abs() > tol * scale {
        return false;
    }
    let top = p.n1() * disp;
    p.pieces().iter().filter(|q| q.duration > 0.0).all(|q| {
        let s = norm(&q.velocity);
        s == 0.0 || (s - top).abs() <= tol * top.max(1.0)
    })
}

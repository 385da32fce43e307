//! Absolutely continuous paths with piecewise-constant velocity.
//!
//! A [`SteppedPath`] starts at a point and follows a finite list of
//! `(duration, velocity)` pieces on `[0, horizon]`. Every construction used
//! by the optimal ensembles (stop-and-go, linear, fast, detour) lands in this
//! class, and all path functionals are exact finite sums over the pieces.
//!
//! Displacement is computed as `Σ duration·velocity` rather than as
//! `end − start`, so that a single-piece path has `N₁ = N₂ = 1` exactly.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::costs::CostFunction;
use crate::norm;

/// Tolerance on `Σ durations = horizon`.
pub const HORIZON_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PathError {
    #[error("the modified Lagrangians are defined on horizon 1, path has horizon {0}")]
    BadHorizon(f64),
    #[error("x ≠ y but the active set has zero measure")]
    DegenerateSet,
    #[error("detour needs dimension at least 2, got {0}")]
    DimensionTooSmall(usize),
    #[error("detour endpoints coincide")]
    CoincidentPoints,
    #[error("piece {0} has a negative or non-finite duration")]
    BadDuration(usize),
    #[error("piece {0} has a non-finite velocity or wrong dimension")]
    BadVelocity(usize),
    #[error("durations sum to {sum}, declared horizon is {horizon}")]
    HorizonMismatch { sum: f64, horizon: f64 },
    #[error("path has no pieces")]
    Empty,
    #[error("interval ({a}, {b}) is empty, unsorted, overlapping or outside [0,1]")]
    BadInterval { a: f64, b: f64 },
    #[error("point dimensions differ")]
    DimensionMismatch,
}

/// Which modified Lagrangian `Lᵢ` (equivalently which `Nᵢ`) to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NIndex {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
}

impl NIndex {
    pub fn from_int(i: u8) -> Option<Self> {
        match i {
            1 => Some(NIndex::One),
            2 => Some(NIndex::Two),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    #[serde(rename = "dt")]
    pub duration: f64,
    #[serde(rename = "v")]
    pub velocity: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPath", into = "RawPath")]
pub struct SteppedPath {
    start: Vec<f64>,
    horizon: f64,
    pieces: Vec<Piece>,
}

#[derive(Serialize, Deserialize)]
struct RawPath {
    start: Vec<f64>,
    #[serde(default = "one")]
    horizon: f64,
    pieces: Vec<Piece>,
}

fn one() -> f64 {
    1.0
}

impl TryFrom<RawPath> for SteppedPath {
    type Error = PathError;

    fn try_from(r: RawPath) -> Result<Self, PathError> {
        SteppedPath::with_horizon(r.start, r.horizon, r.pieces)
    }
}

impl From<SteppedPath> for RawPath {
    fn from(p: SteppedPath) -> Self {
        RawPath {
            start: p.start,
            horizon: p.horizon,
            pieces: p.pieces,
        }
    }
}

impl SteppedPath {
    /// Path whose horizon is the sum of the given durations.
    pub fn new(start: Vec<f64>, pieces: Vec<Piece>) -> Result<Self, PathError> {
        let sum = pieces.iter().map(|p| p.duration).sum();
        Self::with_horizon(start, sum, pieces)
    }

    pub fn with_horizon(
        start: Vec<f64>,
        horizon: f64,
        pieces: Vec<Piece>,
    ) -> Result<Self, PathError> {
        if pieces.is_empty() {
            return Err(PathError::Empty);
        }
        let d = start.len();
        if d == 0 || start.iter().any(|c| !c.is_finite()) {
            return Err(PathError::DimensionMismatch);
        }
        for (k, p) in pieces.iter().enumerate() {
            if !(p.duration >= 0.0) || !p.duration.is_finite() {
                return Err(PathError::BadDuration(k));
            }
            if p.velocity.len() != d || p.velocity.iter().any(|c| !c.is_finite()) {
                return Err(PathError::BadVelocity(k));
            }
        }
        let sum: f64 = pieces.iter().map(|p| p.duration).sum();
        if !(horizon > 0.0) || (sum - horizon).abs() > HORIZON_TOL * horizon.max(1.0) {
            return Err(PathError::HorizonMismatch { sum, horizon });
        }
        Ok(SteppedPath {
            start,
            horizon,
            pieces,
        })
    }

    /// The path resting at `x` on `[0,1]`.
    pub fn constant(x: Vec<f64>) -> Self {
        let d = x.len();
        SteppedPath {
            start: x,
            horizon: 1.0,
            pieces: vec![Piece {
                duration: 1.0,
                velocity: vec![0.0; d],
            }],
        }
    }

    pub fn start(&self) -> &[f64] {
        &self.start
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn dim(&self) -> usize {
        self.start.len()
    }

    /// `∫₀ᵀ X′(t) dt`.
    pub fn displacement(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.dim()];
        for p in &self.pieces {
            for (acc, v) in d.iter_mut().zip(&p.velocity) {
                *acc += p.duration * v;
            }
        }
        d
    }

    pub fn end(&self) -> Vec<f64> {
        self.start
            .iter()
            .zip(self.displacement())
            .map(|(s, d)| s + d)
            .collect()
    }

    /// Position at time `t`, clamped to `[0, horizon]`.
    pub fn position(&self, t: f64) -> Vec<f64> {
        let mut x = self.start.clone();
        let mut clock = 0.0;
        for p in &self.pieces {
            let dt = (t - clock).clamp(0.0, p.duration);
            for (xi, v) in x.iter_mut().zip(&p.velocity) {
                *xi += dt * v;
            }
            clock += p.duration;
            if t <= clock {
                break;
            }
        }
        x
    }

    /// Essential supremum of `|X′|`; zero-duration pieces are ignored.
    pub fn sup_norm(&self) -> f64 {
        self.pieces
            .iter()
            .filter(|p| p.duration > 0.0)
            .map(|p| norm(&p.velocity))
            .fold(0.0, f64::max)
    }

    /// `∫₀ᵀ |X′(t)| dt`, the path length.
    pub fn l1_norm(&self) -> f64 {
        self.pieces
            .iter()
            .map(|p| p.duration * norm(&p.velocity))
            .sum()
    }

    /// `N₁ = T‖X′‖∞ / |∫X′|`, or 1 when the displacement vanishes.
    pub fn n1(&self) -> f64 {
        let disp = norm(&self.displacement());
        if disp != 0.0 {
            self.horizon * self.sup_norm() / disp
        } else {
            1.0
        }
    }

    /// `N₂ = T‖X′‖∞ / ‖X′‖₁`, or 1 for the resting path.
    pub fn n2(&self) -> f64 {
        let l1 = self.l1_norm();
        if l1 > 0.0 {
            self.horizon * self.sup_norm() / l1
        } else {
            1.0
        }
    }

    pub fn n_index(&self, i: NIndex) -> f64 {
        match i {
            NIndex::One => self.n1(),
            NIndex::Two => self.n2(),
        }
    }

    /// A path that moves (positive length) yet returns to its start. `N₁`
    /// takes the conventional value 1 on such paths, which makes `L₁`
    /// blind to the loop; reports flag them.
    pub fn is_closed_loop(&self) -> bool {
        self.l1_norm() > 0.0 && norm(&self.displacement()) == 0.0
    }

    /// `∫₀ᵀ ℓ(|X′(t)|) dt`.
    pub fn cost_plain(&self, cost: &CostFunction) -> f64 {
        self.pieces
            .iter()
            .map(|p| p.duration * cost.eval(norm(&p.velocity)))
            .sum()
    }

    /// `∫₀¹ Lᵢ(t, X′) dt = Nᵢ ∫₀¹ ℓ(|X′(t)|/Nᵢ) dt`.
    pub fn cost_li(&self, cost: &CostFunction, i: NIndex) -> Result<f64, PathError> {
        self.require_unit_horizon()?;
        let n = self.n_index(i);
        Ok(n * self
            .pieces
            .iter()
            .map(|p| p.duration * cost.eval(norm(&p.velocity) / n))
            .sum::<f64>())
    }

    /// `∫₀¹ (1/Nᵢ) ℓ(Nᵢ |X′(t)|) dt`, the rescaled objective that recovers
    /// `T` for convex costs.
    pub fn cost_rescaled(&self, cost: &CostFunction, i: NIndex) -> Result<f64, PathError> {
        self.require_unit_horizon()?;
        let n = self.n_index(i);
        Ok(self
            .pieces
            .iter()
            .map(|p| p.duration * cost.eval(n * norm(&p.velocity)))
            .sum::<f64>()
            / n)
    }

    fn require_unit_horizon(&self) -> Result<(), PathError> {
        if (self.horizon - 1.0).abs() > HORIZON_TOL {
            return Err(PathError::BadHorizon(self.horizon));
        }
        Ok(())
    }

    /// `φ ↦ φ(·/T)`: durations scaled by `T`, velocities by `1/T`.
    pub fn stretch(&self, t: f64) -> Result<SteppedPath, PathError> {
        self.require_unit_horizon()?;
        if !(t >= 1.0) || !t.is_finite() {
            return Err(PathError::BadHorizon(t));
        }
        Ok(SteppedPath {
            start: self.start.clone(),
            horizon: t,
            pieces: self
                .pieces
                .iter()
                .map(|p| Piece {
                    duration: p.duration * t,
                    velocity: p.velocity.iter().map(|v| v / t).collect(),
                })
                .collect(),
        })
    }

    /// Inverse of [`stretch`](Self::stretch): `φ ↦ φ(T·)` back onto `[0,1]`.
    pub fn compress(&self) -> Result<SteppedPath, PathError> {
        let t = self.horizon;
        if !(t >= 1.0) {
            return Err(PathError::BadHorizon(t));
        }
        Ok(SteppedPath {
            start: self.start.clone(),
            horizon: 1.0,
            pieces: self
                .pieces
                .iter()
                .map(|p| Piece {
                    duration: p.duration / t,
                    velocity: p.velocity.iter().map(|v| v * t).collect(),
                })
                .collect(),
        })
    }
}

/// A finite union of disjoint subintervals of `[0,1]`, sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct IntervalSet {
    intervals: Vec<(f64, f64)>,
}

impl TryFrom<Vec<(f64, f64)>> for IntervalSet {
    type Error = PathError;

    fn try_from(v: Vec<(f64, f64)>) -> Result<Self, PathError> {
        IntervalSet::new(v)
    }
}

impl From<IntervalSet> for Vec<(f64, f64)> {
    fn from(s: IntervalSet) -> Self {
        s.intervals
    }
}

impl IntervalSet {
    /// Validates sorted, pairwise disjoint intervals `a < b` inside `[0,1]`.
    /// Touching endpoints are allowed.
    pub fn new(intervals: Vec<(f64, f64)>) -> Result<Self, PathError> {
        let mut last = 0.0;
        for &(a, b) in &intervals {
            if !(a >= last && a < b && b <= 1.0) {
                return Err(PathError::BadInterval { a, b });
            }
            last = b;
        }
        Ok(IntervalSet { intervals })
    }

    pub fn empty() -> Self {
        IntervalSet { intervals: vec![] }
    }

    pub fn full() -> Self {
        IntervalSet {
            intervals: vec![(0.0, 1.0)],
        }
    }

    /// `[0, len]`, empty when `len` is zero.
    pub fn prefix(len: f64) -> Result<Self, PathError> {
        if len == 0.0 {
            return Ok(Self::empty());
        }
        Self::new(vec![(0.0, len)])
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    /// Lebesgue measure `|A|`.
    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).sum()
    }

    /// `|A ∩ [0,t]|`.
    pub fn measure_until(&self, t: f64) -> f64 {
        self.intervals
            .iter()
            .map(|&(a, b)| (b.min(t) - a).max(0.0))
            .sum()
    }

    /// Random union of up to `max_pieces` intervals with total length at
    /// least `min_measure`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, max_pieces: usize, min_measure: f64) -> Self {
        assert!(max_pieces >= 1 && min_measure > 0.0 && min_measure <= 1.0);
        loop {
            let k = rng.random_range(1..=max_pieces);
            let mut cuts: Vec<f64> = (0..2 * k).map(|_| rng.random::<f64>()).collect();
            cuts.sort_by(f64::total_cmp);
            let intervals: Vec<(f64, f64)> = cuts
                .chunks(2)
                .map(|c| (c[0], c[1]))
                .filter(|(a, b)| a < b)
                .collect();
            if let Ok(set) = IntervalSet::new(intervals) {
                if set.measure() >= min_measure {
                    return set;
                }
            }
        }
    }
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn scale(v: &[f64], s: f64) -> Vec<f64> {
    v.iter().map(|x| x * s).collect()
}

/// `X(t; x, y, A) = x + (|A∩[0,t]|/|A|)(y − x)`: moves at velocity
/// `(y − x)/|A|` on `A` and rests elsewhere.
pub fn stop_and_go(x: &[f64], y: &[f64], a: &IntervalSet) -> Result<SteppedPath, PathError> {
    if x.len() != y.len() {
        return Err(PathError::DimensionMismatch);
    }
    if x == y {
        return Ok(SteppedPath::constant(x.to_vec()));
    }
    let len = a.measure();
    if !(len > 0.0) {
        return Err(PathError::DegenerateSet);
    }
    let v = scale(&sub(y, x), 1.0 / len);
    let zero = vec![0.0; x.len()];
    let mut pieces = Vec::with_capacity(2 * a.intervals().len() + 1);
    let mut clock = 0.0;
    for &(lo, hi) in a.intervals() {
        if lo > clock {
            pieces.push(Piece {
                duration: lo - clock,
                velocity: zero.clone(),
            });
        }
        pieces.push(Piece {
            duration: hi - lo,
            velocity: v.clone(),
        });
        clock = hi;
    }
    if clock < 1.0 {
        pieces.push(Piece {
            duration: 1.0 - clock,
            velocity: zero,
        });
    }
    SteppedPath::with_horizon(x.to_vec(), 1.0, pieces)
}

/// `X(t) = x + t(y − x)`.
pub fn linear_path(x: &[f64], y: &[f64]) -> SteppedPath {
    assert_eq!(x.len(), y.len());
    SteppedPath {
        start: x.to_vec(),
        horizon: 1.0,
        pieces: vec![Piece {
            duration: 1.0,
            velocity: sub(y, x),
        }],
    }
}

/// `Yₙ`: velocity `n(y − x)` on `[0, 1/n]`, rest afterwards.
pub fn fast_path(x: &[f64], y: &[f64], n: u32) -> SteppedPath {
    assert!(n >= 1);
    assert_eq!(x.len(), y.len());
    if n == 1 {
        return linear_path(x, y);
    }
    let h = 1.0 / n as f64;
    SteppedPath {
        start: x.to_vec(),
        horizon: 1.0,
        pieces: vec![
            Piece {
                duration: h,
                velocity: scale(&sub(y, x), n as f64),
            },
            Piece {
                duration: 1.0 - h,
                velocity: vec![0.0; x.len()],
            },
        ],
    }
}

/// Apex `Y` with `|Y − x0| = |Y − x1| = C = 1 + |x1 − x0|/2`, placed above
/// the midpoint along the first coordinate direction not parallel to the
/// segment.
pub fn detour_apex(x0: &[f64], x1: &[f64]) -> Result<Vec<f64>, PathError> {
    let d = x0.len();
    if d != x1.len() {
        return Err(PathError::DimensionMismatch);
    }
    if d < 2 {
        return Err(PathError::DimensionTooSmall(d));
    }
    let delta = sub(x1, x0);
    let len = norm(&delta);
    if len == 0.0 {
        return Err(PathError::CoincidentPoints);
    }
    let unit = scale(&delta, 1.0 / len);
    let dir = (0..d)
        .map(|k| {
            let dot = unit[k];
            let mut e: Vec<f64> = unit.iter().map(|u| -dot * u).collect();
            e[k] += 1.0;
            e
        })
        .find(|e| norm(e) > 0.5)
        .expect("some basis vector is far from the segment direction");
    let dir = scale(&dir, 1.0 / norm(&dir));
    let c = 1.0 + len / 2.0;
    let height = (c * c - len * len / 4.0).sqrt();
    Ok(x0
        .iter()
        .zip(x1)
        .zip(&dir)
        .map(|((a, b), e)| 0.5 * (a + b) + height * e)
        .collect())
}

/// Two constant-speed legs `x0 → Y → x1`, each of duration ½ and speed `2C`.
pub fn detour_path(x0: &[f64], x1: &[f64]) -> Result<SteppedPath, PathError> {
    let apex = detour_apex(x0, x1)?;
    SteppedPath::with_horizon(
        x0.to_vec(),
        1.0,
        vec![
            Piece {
                duration: 0.5,
                velocity: scale(&sub(&apex, x0), 2.0),
            },
            Piece {
                duration: 0.5,
                velocity: scale(&sub(x1, &apex), 2.0),
            },
        ],
    )
}

/// Random path on `[0,1]` from `x` to `y` with `k` pieces. The raw random
/// velocities are shifted by a constant so the displacement is `y − x`.
pub fn random_path_between<R: Rng + ?Sized>(
    rng: &mut R,
    x: &[f64],
    y: &[f64],
    k: usize,
    speed: f64,
) -> SteppedPath {
    assert!(k >= 1);
    let d = x.len();
    let mut cuts: Vec<f64> = (0..k - 1).map(|_| rng.random::<f64>()).collect();
    cuts.push(0.0);
    cuts.push(1.0);
    cuts.sort_by(f64::total_cmp);
    let durations: Vec<f64> = cuts.windows(2).map(|w| w[1] - w[0]).collect();
    let raw: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..d).map(|_| rng.random_range(-speed..=speed)).collect())
        .collect();
    let mut drift = sub(y, x);
    for (dt, v) in durations.iter().zip(&raw) {
        for (a, b) in drift.iter_mut().zip(v) {
            *a -= dt * b;
        }
    }
    let pieces = durations
        .into_iter()
        .zip(raw)
        .filter(|(dt, _)| *dt > 0.0)
        .map(|(duration, v)| Piece {
            duration,
            velocity: v.iter().zip(&drift).map(|(a, b)| a + b).collect(),
        })
        .collect::<Vec<_>>();
    let total: f64 = pieces.iter().map(|p| p.duration).sum();
    SteppedPath::with_horizon(x.to_vec(), total, pieces).expect("valid random path")
}

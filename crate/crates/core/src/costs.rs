//! Radial ground costs `ℓ: [0,∞) → [0,∞)` with `ℓ(0) = 0`.
//!
//! Each cost carries the assumption flags it is known to satisfy. The
//! assumptions are analytic statements; [`check_a1`] and [`check_a2`] can
//! only gather sampled evidence or exhibit counterexamples.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CostError {
    #[error("unknown cost `{0}`")]
    UnknownCost(String),
    #[error("bad parameters for cost `{name}`: {reason}")]
    BadParam { name: String, reason: String },
    #[error("ℓ(u)/u increases on the tail between u={lo} and u={hi}")]
    NonMonotoneSlope { lo: f64, hi: f64 },
    #[error("tail points must be increasing and at least 10")]
    BadTail,
}

/// The sublinearity (A1) and monotonicity/growth (A2) conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Assumption {
    /// `ℓ(ru) ≥ rℓ(u)` for `r ∈ (0,1)`, `u > 0`.
    A1i,
    /// The inequality of A1i is never an equality.
    A1ii,
    /// `ℓ(u) > 0` for `u > 0`.
    A1iii,
    /// Non-decreasing.
    A2i,
    /// Strictly increasing.
    A2ii,
    /// Continuous and unbounded.
    A2iii,
}

impl Assumption {
    pub const ALL: [Assumption; 6] = [
        Assumption::A1i,
        Assumption::A1ii,
        Assumption::A1iii,
        Assumption::A2i,
        Assumption::A2ii,
        Assumption::A2iii,
    ];
}

#[derive(Clone)]
enum Kind {
    Power(f64),
    RemarkIii,
    AffineExp(f64),
    Linear,
    Square,
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

/// A radial cost function with metadata.
#[derive(Clone)]
pub struct CostFunction {
    kind: Kind,
    name: String,
    analytic_c_ell: Option<f64>,
    r0: Option<f64>,
    flags: BTreeSet<Assumption>,
}

impl fmt::Debug for CostFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CostFunction")
            .field("name", &self.name)
            .field("analytic_c_ell", &self.analytic_c_ell)
            .field("r0", &self.r0)
            .field("flags", &self.flags)
            .finish()
    }
}

fn flags(list: &[Assumption]) -> BTreeSet<Assumption> {
    list.iter().copied().collect()
}

impl CostFunction {
    /// `u ↦ u^p` for any `p > 0`; flags follow from convexity/concavity of
    /// the power.
    pub fn power(p: f64) -> Result<Self, CostError> {
        use Assumption::*;
        if !(p > 0.0) || !p.is_finite() {
            return Err(CostError::BadParam {
                name: "power".into(),
                reason: format!("exponent must be positive, got {p}"),
            });
        }
        let (c_ell, set) = if p < 1.0 {
            (Some(0.0), flags(&[A1i, A1ii, A1iii, A2i, A2ii, A2iii]))
        } else if p == 1.0 {
            (Some(1.0), flags(&[A1i, A1iii, A2i, A2ii, A2iii]))
        } else {
            (None, flags(&[A1iii, A2i, A2ii, A2iii]))
        };
        Ok(CostFunction {
            kind: Kind::Power(p),
            name: format!("power:{p}"),
            analytic_c_ell: c_ell,
            r0: None,
            flags: set,
        })
    }

    /// `2u·e^{−u}` on `[0,1)`, `u·e^{−u}` on `[1,∞)`: discontinuous at 1 and
    /// strictly decreasing from there on.
    pub fn remark_iii() -> Self {
        use Assumption::*;
        CostFunction {
            kind: Kind::RemarkIii,
            name: "remark_iii".into(),
            analytic_c_ell: Some(0.0),
            r0: Some(1.0),
            flags: flags(&[A1i, A1ii, A1iii]),
        }
    }

    /// `a·u + 1 − e^{−u}`, concave with slope at infinity `a`.
    pub fn affine_exp(a: f64) -> Result<Self, CostError> {
        use Assumption::*;
        if !(a >= 0.0) || !a.is_finite() {
            return Err(CostError::BadParam {
                name: "affine_exp".into(),
                reason: format!("slope must be non-negative, got {a}"),
            });
        }
        let mut set = flags(&[A1i, A1ii, A1iii, A2i, A2ii]);
        if a > 0.0 {
            set.insert(A2iii);
        }
        Ok(CostFunction {
            kind: Kind::AffineExp(a),
            name: format!("affine_exp:{a}"),
            analytic_c_ell: Some(a),
            r0: None,
            flags: set,
        })
    }

    pub fn linear() -> Self {
        use Assumption::*;
        CostFunction {
            kind: Kind::Linear,
            name: "linear".into(),
            analytic_c_ell: Some(1.0),
            r0: None,
            flags: flags(&[A1i, A1iii, A2i, A2ii, A2iii]),
        }
    }

    /// `u ↦ u²`, the strictly convex counterexample to A1i.
    pub fn square() -> Self {
        use Assumption::*;
        CostFunction {
            kind: Kind::Square,
            name: "square".into(),
            analytic_c_ell: None,
            r0: None,
            flags: flags(&[A1iii, A2i, A2ii, A2iii]),
        }
    }

    /// A user-supplied cost. Nothing is declared about it.
    pub fn custom<F>(name: impl Into<String>, f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        CostFunction {
            kind: Kind::Custom(Arc::new(f)),
            name: name.into(),
            analytic_c_ell: None,
            r0: None,
            flags: BTreeSet::new(),
        }
    }

    pub fn with_flags(mut self, set: impl IntoIterator<Item = Assumption>) -> Self {
        self.flags = set.into_iter().collect();
        self
    }

    pub fn with_c_ell(mut self, c: f64) -> Self {
        self.analytic_c_ell = Some(c);
        self
    }

    pub fn with_r0(mut self, r0: f64) -> Self {
        self.r0 = Some(r0);
        self
    }

    /// `c·ℓ` for `c > 0`. Assumption flags are scale invariant.
    pub fn scaled(&self, c: f64) -> Self {
        assert!(c > 0.0);
        let inner = self.clone();
        CostFunction {
            kind: Kind::Custom(Arc::new(move |u| c * inner.eval(u))),
            name: format!("{}*{c}", self.name),
            analytic_c_ell: self.analytic_c_ell.map(|s| c * s),
            r0: self.r0,
            flags: self.flags.clone(),
        }
    }

    pub fn eval(&self, u: f64) -> f64 {
        match &self.kind {
            Kind::Power(p) => {
                if u == 0.0 {
                    0.0
                } else if *p == 1.0 {
                    u
                } else if *p == 0.5 {
                    u.sqrt()
                } else {
                    u.powf(*p)
                }
            }
            Kind::RemarkIii => {
                if u < 1.0 {
                    2.0 * u * (-u).exp()
                } else {
                    u * (-u).exp()
                }
            }
            Kind::AffineExp(a) => a * u - (-u).exp_m1(),
            Kind::Linear => u,
            Kind::Square => u * u,
            Kind::Custom(f) => f(u),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn analytic_c_ell(&self) -> Option<f64> {
        self.analytic_c_ell
    }

    /// Threshold beyond which the cost is strictly decreasing, if any.
    pub fn r0(&self) -> Option<f64> {
        self.r0
    }

    pub fn declared(&self) -> &BTreeSet<Assumption> {
        &self.flags
    }

    pub fn declares(&self, a: Assumption) -> bool {
        self.flags.contains(&a)
    }

    /// Power exponent, when this is a pure power cost (linear counts as 1).
    pub fn power_exponent(&self) -> Option<f64> {
        match self.kind {
            Kind::Power(p) => Some(p),
            Kind::Linear => Some(1.0),
            _ => None,
        }
    }
}

/// Builtin constructor by name: `power(p)` with `p ∈ (0,1]`, `remark_iii`,
/// `affine_exp(a)` with `a ≥ 0`, `linear`, and the convex reference `square`.
pub fn builtin(name: &str, params: &[f64]) -> Result<CostFunction, CostError> {
    let want = |n: usize| -> Result<(), CostError> {
        if params.len() == n {
            Ok(())
        } else {
            Err(CostError::BadParam {
                name: name.into(),
                reason: format!("expected {n} parameter(s), got {}", params.len()),
            })
        }
    };
    match name {
        "power" => {
            want(1)?;
            let p = params[0];
            if !(p > 0.0 && p <= 1.0) {
                return Err(CostError::BadParam {
                    name: name.into(),
                    reason: format!("exponent must lie in (0,1], got {p}"),
                });
            }
            CostFunction::power(p)
        }
        "remark_iii" => want(0).map(|_| CostFunction::remark_iii()),
        "affine_exp" => {
            want(1)?;
            CostFunction::affine_exp(params[0])
        }
        "linear" => want(0).map(|_| CostFunction::linear()),
        "square" => want(0).map(|_| CostFunction::square()),
        other => Err(CostError::UnknownCost(other.into())),
    }
}

/// Serializable cost description, e.g. `{"name":"power","params":[0.5]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostSpec {
    pub name: String,
    #[serde(default)]
    pub params: Vec<f64>,
}

impl CostSpec {
    pub fn build(&self) -> Result<CostFunction, CostError> {
        builtin(&self.name, &self.params)
    }
}

/// Parses the CLI form `name[:p1[,p2…]]`, e.g. `power:0.5`.
impl FromStr for CostSpec {
    type Err = CostError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, rest) = match s.split_once(':') {
            Some((n, r)) => (n, Some(r)),
            None => (s, None),
        };
        let params = match rest {
            None => Vec::new(),
            Some(r) => r
                .split(',')
                .map(|t| {
                    t.trim().parse::<f64>().map_err(|_| CostError::BadParam {
                        name: name.into(),
                        reason: format!("cannot parse `{t}`"),
                    })
                })
                .collect::<Result<_, _>>()?,
        };
        Ok(CostSpec {
            name: name.trim().to_string(),
            params,
        })
    }
}

impl fmt::Display for CostSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)?;
        for (k, p) in self.params.iter().enumerate() {
            write!(f, "{}{p}", if k == 0 { ':' } else { ',' })?;
        }
        Ok(())
    }
}

/// A sampled point where a check failed (or, for A1ii, where equality hit).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub r: Option<f64>,
    pub u: f64,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub assumption: Assumption,
    pub passed: bool,
    pub samples: usize,
    pub witnesses: Vec<Witness>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub checks: Vec<AssumptionCheck>,
}

impl AssumptionReport {
    pub fn verdict(&self, a: Assumption) -> Option<bool> {
        self.checks
            .iter()
            .find(|c| c.assumption == a)
            .map(|c| c.passed)
    }

    pub fn check(&self, a: Assumption) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.assumption == a)
    }

    pub fn merge(mut self, other: AssumptionReport) -> Self {
        self.checks.extend(other.checks);
        self
    }
}

const MAX_WITNESSES: usize = 8;
const EQ_TOL: f64 = 1e-12;

/// Sampled check of A1i (`ℓ(ru) ≥ rℓ(u)`), A1ii (never equal) and A1iii
/// (`ℓ(u) > 0`) on the product of `r_grid` and `u_grid`.
///
/// Values that underflow to zero are reported as A1iii witnesses; for
/// `remark_iii` this happens beyond `u ≈ 745`.
pub fn check_a1(cost: &CostFunction, r_grid: &[f64], u_grid: &[f64]) -> AssumptionReport {
    let mut viol = Vec::new();
    let mut eq_hits = Vec::new();
    let mut pairs = 0;
    for &u in u_grid.iter().filter(|&&u| u > 0.0) {
        let lu = cost.eval(u);
        for &r in r_grid.iter().filter(|&&r| r > 0.0 && r < 1.0) {
            pairs += 1;
            let lhs = cost.eval(r * u);
            let rhs = r * lu;
            let tol = EQ_TOL * rhs.abs().max(1.0);
            let w = Witness {
                r: Some(r),
                u,
                lhs,
                rhs,
            };
            if lhs < rhs - tol {
                viol.push(w);
            } else if (lhs - rhs).abs() <= tol {
                eq_hits.push(w);
            }
        }
    }
    let nonpos: Vec<Witness> = u_grid
        .iter()
        .filter(|&&u| u > 0.0)
        .filter_map(|&u| {
            let v = cost.eval(u);
            (v <= 0.0).then_some(Witness {
                r: None,
                u,
                lhs: v,
                rhs: 0.0,
            })
        })
        .collect();
    let pos_count = u_grid.iter().filter(|&&u| u > 0.0).count();
    let cap = |mut v: Vec<Witness>| {
        v.truncate(MAX_WITNESSES);
        v
    };
    AssumptionReport {
        checks: vec![
            AssumptionCheck {
                assumption: Assumption::A1i,
                passed: viol.is_empty(),
                samples: pairs,
                witnesses: cap(viol.clone()),
            },
            AssumptionCheck {
                assumption: Assumption::A1ii,
                passed: viol.is_empty() && eq_hits.is_empty(),
                samples: pairs,
                witnesses: cap(if viol.is_empty() { eq_hits } else { viol }),
            },
            AssumptionCheck {
                assumption: Assumption::A1iii,
                passed: nonpos.is_empty(),
                samples: pos_count,
                witnesses: cap(nonpos),
            },
        ],
    }
}

/// Sampled check of A2 over consecutive pairs of the (sorted) grid. The
/// divergence heuristic for A2iii requires ℓ to be strictly increasing on
/// the three largest grid points and to exceed `divergence_threshold` at
/// the last one.
pub fn check_a2(
    cost: &CostFunction,
    u_grid: &[f64],
    divergence_threshold: f64,
) -> AssumptionReport {
    let mut grid: Vec<f64> = u_grid.iter().copied().filter(|u| *u > 0.0).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let vals: Vec<f64> = grid.iter().map(|&u| cost.eval(u)).collect();
    let mut dec = Vec::new();
    let mut flat = Vec::new();
    for k in 1..grid.len() {
        let w = Witness {
            r: None,
            u: grid[k],
            lhs: vals[k],
            rhs: vals[k - 1],
        };
        if vals[k] < vals[k - 1] {
            dec.push(w);
        } else if vals[k] == vals[k - 1] {
            flat.push(w);
        }
    }
    let tail_ok = grid.len() >= 3 && {
        let n = vals.len();
        vals[n - 3] < vals[n - 2] && vals[n - 2] < vals[n - 1] && vals[n - 1] > divergence_threshold
    };
    let tail_witness = if tail_ok || grid.is_empty() {
        vec![]
    } else {
        vec![Witness {
            r: None,
            u: *grid.last().unwrap(),
            lhs: *vals.last().unwrap(),
            rhs: divergence_threshold,
        }]
    };
    let samples = grid.len().saturating_sub(1);
    let strict_fail: Vec<Witness> = dec.iter().chain(flat.iter()).cloned().collect();
    dec.truncate(MAX_WITNESSES);
    let mut strict_fail = strict_fail;
    strict_fail.truncate(MAX_WITNESSES);
    AssumptionReport {
        checks: vec![
            AssumptionCheck {
                assumption: Assumption::A2i,
                passed: dec.is_empty(),
                samples,
                witnesses: dec,
            },
            AssumptionCheck {
                assumption: Assumption::A2ii,
                passed: strict_fail.is_empty(),
                samples,
                witnesses: strict_fail,
            },
            AssumptionCheck {
                assumption: Assumption::A2iii,
                passed: tail_ok,
                samples: grid.len().min(3),
                witnesses: tail_witness,
            },
        ],
    }
}

/// Sampled midpoint convexity on all pairs of `u_grid`.
pub fn check_convex(cost: &CostFunction, u_grid: &[f64]) -> Option<Witness> {
    for (k, &a) in u_grid.iter().enumerate() {
        for &b in &u_grid[k + 1..] {
            let mid = cost.eval(0.5 * (a + b));
            let chord = 0.5 * (cost.eval(a) + cost.eval(b));
            if mid > chord + EQ_TOL * chord.abs().max(1.0) {
                return Some(Witness {
                    r: Some(0.5),
                    u: 0.5 * (a + b),
                    lhs: mid,
                    rhs: chord,
                });
            }
        }
    }
    None
}

/// `n` log-spaced points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Default sampling grids used when a cost's declared flags are audited
/// before running a verification suite.
pub fn default_a1_report(cost: &CostFunction) -> AssumptionReport {
    let r: Vec<f64> = log_grid(1e-3, 0.999, 50);
    let u = log_grid(1e-3, 1e3, 50);
    check_a1(cost, &r, &u)
}

pub fn default_a2_report(cost: &CostFunction) -> AssumptionReport {
    check_a2(cost, &log_grid(1e-3, 1e6, 200), 10.0)
}

/// Slope at infinity `C_ℓ = lim ℓ(u)/u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeEstimate {
    /// The analytic value when known, otherwise the tail estimate.
    pub value: f64,
    pub analytic: Option<f64>,
    /// `ℓ(u_max)/u_max`, when a tail was given.
    pub estimate: Option<f64>,
    /// `[ℓ(u_max)/u_max, ℓ(u_min)/u_min]`; contains `C_ℓ` from above when
    /// `ℓ(u)/u` is non-increasing, which A1i guarantees.
    pub bracket: Option<(f64, f64)>,
}

/// Returns the analytic `C_ℓ` when declared, and a tail estimate with its
/// monotone bracket whenever tail points are supplied.
pub fn c_ell(cost: &CostFunction, tail_points: &[f64]) -> Result<SlopeEstimate, CostError> {
    let tail_ok = !tail_points.is_empty()
        && tail_points[0] >= 10.0
        && tail_points.windows(2).all(|w| w[1] > w[0]);
    let (estimate, bracket) = if tail_ok {
        let ratios: Vec<f64> = tail_points.iter().map(|&u| cost.eval(u) / u).collect();
        for (k, w) in ratios.windows(2).enumerate() {
            if w[1] > w[0] * (1.0 + EQ_TOL) + EQ_TOL {
                return Err(CostError::NonMonotoneSlope {
                    lo: tail_points[k],
                    hi: tail_points[k + 1],
                });
            }
        }
        let lo = *ratios.last().unwrap();
        (Some(lo), Some((lo, ratios[0])))
    } else {
        if cost.analytic_c_ell.is_none() || !tail_points.is_empty() {
            return Err(CostError::BadTail);
        }
        (None, None)
    };
    let value = cost
        .analytic_c_ell
        .or(estimate)
        .expect("either analytic or estimated");
    Ok(SlopeEstimate {
        value,
        analytic: cost.analytic_c_ell,
        estimate,
        bracket,
    })
}

/// Smallest sampled `u` with `ℓ(u)/u = C_ℓ` (within `tol`), the finiteness
/// flag tied to attainment of the unbounded-velocity infimum.
pub fn slope_attained_at(cost: &CostFunction, c: f64, grid: &[f64], tol: f64) -> Option<f64> {
    grid.iter()
        .copied()
        .filter(|&u| u > 0.0)
        .find(|&u| (cost.eval(u) / u - c).abs() <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_values() {
        let p = builtin("power", &[0.5]).unwrap();
        assert_eq!(p.eval(4.0), 2.0);
        assert_eq!(p.eval(0.0), 0.0);
        let r = builtin("remark_iii", &[]).unwrap();
        assert!((r.eval(2.0) - 0.270_670_566_473_225_4).abs() < 1e-15);
        assert_eq!(r.eval(0.0), 0.0);
        assert_eq!(
            builtin("affine_exp", &[0.3]).unwrap().analytic_c_ell(),
            Some(0.3)
        );
        assert_eq!(builtin("linear", &[]).unwrap().eval(3.5), 3.5);
        assert_eq!(
            builtin("power", &[1.0]).unwrap().analytic_c_ell(),
            Some(1.0)
        );
        assert_eq!(
            builtin("power", &[0.2]).unwrap().analytic_c_ell(),
            Some(0.0)
        );
    }

    #[test]
    fn builtin_errors() {
        assert_eq!(
            builtin("cubic", &[]).unwrap_err(),
            CostError::UnknownCost("cubic".into())
        );
        assert!(matches!(
            builtin("power", &[1.5]),
            Err(CostError::BadParam { .. })
        ));
        assert!(matches!(
            builtin("power", &[0.0]),
            Err(CostError::BadParam { .. })
        ));
        assert!(matches!(
            builtin("affine_exp", &[-1.0]),
            Err(CostError::BadParam { .. })
        ));
        assert!(matches!(
            builtin("linear", &[1.0]),
            Err(CostError::BadParam { .. })
        ));
    }

    #[test]
    fn remark_iii_discontinuity() {
        let r = CostFunction::remark_iii();
        let left = r.eval(1.0 - 1e-12);
        assert!((left - 2.0 * (-1.0f64).exp()).abs() < 1e-11);
        assert_eq!(r.eval(1.0), (-1.0f64).exp());
    }

    #[test]
    fn a1_examples() {
        let rep = check_a1(&builtin("power", &[0.5]).unwrap(), &[0.25], &[1.0]);
        assert_eq!(rep.verdict(Assumption::A1i), Some(true));

        let sq = CostFunction::square();
        let rep = check_a1(&sq, &[0.5], &[1.0]);
        assert_eq!(rep.verdict(Assumption::A1i), Some(false));
        let w = &rep.check(Assumption::A1i).unwrap().witnesses[0];
        assert_eq!((w.lhs, w.rhs), (0.25, 0.5));

        let rep = check_a1(&CostFunction::linear(), &[0.3, 0.7], &[0.5, 2.0]);
        assert_eq!(rep.verdict(Assumption::A1i), Some(true));
        assert_eq!(rep.verdict(Assumption::A1ii), Some(false));
        assert_eq!(rep.verdict(Assumption::A1iii), Some(true));
    }

    #[test]
    fn a2_examples() {
        let grid: Vec<f64> = (1..=100).map(|k| k as f64 * 0.1).collect();
        let rep = check_a2(&builtin("power", &[0.5]).unwrap(), &grid, 1.0);
        assert_eq!(rep.verdict(Assumption::A2i), Some(true));
        assert_eq!(rep.verdict(Assumption::A2ii), Some(true));

        let rep = check_a2(&CostFunction::remark_iii(), &[0.5, 1.0, 2.0, 4.0], 1.0);
        assert_eq!(rep.verdict(Assumption::A2i), Some(false));
        assert_eq!(rep.verdict(Assumption::A2iii), Some(false));

        let rep = default_a2_report(&CostFunction::linear());
        assert!(Assumption::ALL[3..]
            .iter()
            .all(|&a| rep.verdict(a) == Some(true)));
    }

    #[test]
    fn c_ell_examples() {
        let s = c_ell(&builtin("affine_exp", &[2.0]).unwrap(), &[]).unwrap();
        assert_eq!(s.value, 2.0);

        let s = c_ell(&builtin("power", &[0.5]).unwrap(), &[1e2, 1e4, 1e6]).unwrap();
        assert_eq!(s.value, 0.0);
        assert!((s.estimate.unwrap() - 1e-3).abs() < 1e-18);
        let (lo, hi) = s.bracket.unwrap();
        assert!((lo - 1e-3).abs() < 1e-18 && (hi - 1e-1).abs() < 1e-16);

        assert_eq!(c_ell(&CostFunction::linear(), &[]).unwrap().value, 1.0);

        let sq = CostFunction::square();
        assert!(matches!(
            c_ell(&sq, &[10.0, 100.0]),
            Err(CostError::NonMonotoneSlope { .. })
        ));
        assert_eq!(c_ell(&sq, &[]), Err(CostError::BadTail));
        let custom = CostFunction::custom("sqrt", f64::sqrt);
        let s = c_ell(&custom, &[16.0, 100.0]).unwrap();
        assert_eq!(s.value, 0.1);
    }

    #[test]
    fn spec_parsing() {
        let s: CostSpec = "power:0.5".parse().unwrap();
        assert_eq!(
            s,
            CostSpec {
                name: "power".into(),
                params: vec![0.5]
            }
        );
        assert_eq!(s.to_string(), "power:0.5");
        let s: CostSpec = "remark_iii".parse().unwrap();
        assert!(s.params.is_empty());
        let j: CostSpec = serde_json::from_str(r#"{"name":"affine_exp","params":[0.3]}"#).unwrap();
        assert_eq!(j.build().unwrap().analytic_c_ell(), Some(0.3));
    }

    #[test]
    fn attainment_flag() {
        let lin = CostFunction::linear();
        assert_eq!(slope_attained_at(&lin, 1.0, &[0.5, 1.0], 1e-12), Some(0.5));
        let p = CostFunction::power(0.5).unwrap();
        assert_eq!(
            slope_attained_at(&p, 0.0, &log_grid(1.0, 1e6, 20), 1e-12),
            None
        );
    }
}

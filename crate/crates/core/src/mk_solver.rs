//! Exact discrete Monge–Kantorovich solver.
//!
//! The transportation LP is solved as a min-cost flow on the bipartite graph
//! `S → sources → sinks → T` by successive shortest paths with Johnson
//! potentials. Ties in Dijkstra are broken by smallest node index, so the
//! returned plan is a deterministic function of the input.

use itertools::Itertools;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::costs::CostFunction;
use crate::measures::{make_coupling, Coupling, DiscreteMeasure, MeasureError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("no feasible plan: {unrouted} mass cannot be routed through allowed arcs")]
    Infeasible { unrouted: f64 },
    #[error("source has dimension {source_dim}, target has {target_dim}")]
    DimensionMismatch {
        source_dim: usize,
        target_dim: usize,
    },
    #[error("brute force supports at most {max} atoms, got {n}")]
    TooLarge { n: usize, max: usize },
    #[error("brute force needs equal uniform weights on both sides")]
    UnequalWeights,
    #[error("power exponent must be positive, got {0}")]
    BadExponent(f64),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Lp,
    BruteForce,
}

#[derive(Debug, Clone, Serialize)]
pub struct MkSolution {
    pub value: f64,
    pub plan: Coupling,
    pub method: Method,
}

/// Largest instance the permutation oracle accepts.
pub const BRUTE_FORCE_MAX: usize = 8;

// Residual amounts below this are treated as exhausted.
const FLOW_EPS: f64 = 1e-15;

/// Dense cost matrix `c[i][j] = ℓ(|x_i − y_j|)`.
pub fn cost_matrix(
    m0: &DiscreteMeasure,
    m1: &DiscreteMeasure,
    cost: &CostFunction,
) -> Vec<Vec<f64>> {
    m0.points()
        .map(|x| m1.points().map(|y| cost.eval(crate::dist(x, y))).collect())
        .collect()
}

/// Solves `T(m0, m1)` for the radial cost `ℓ`, optionally excluding arcs for
/// which `forbidden(i, j)` is true.
pub fn solve_mk(
    m0: &DiscreteMeasure,
    m1: &DiscreteMeasure,
    cost: &CostFunction,
    forbidden: Option<&dyn Fn(usize, usize) -> bool>,
) -> Result<MkSolution, SolverError> {
    check_dims(m0, m1)?;
    let c = cost_matrix(m0, m1, cost);
    let allowed: Vec<Vec<bool>> = (0..m0.len())
        .map(|i| {
            (0..m1.len())
                .map(|j| forbidden.is_none_or(|f| !f(i, j)))
                .collect()
        })
        .collect();
    let plan = transport_lp(&m0.weights(), &m1.weights(), &c, &allowed)?;
    let value = plan_value(&plan, &c);
    let plan = make_coupling(m0.clone(), m1.clone(), plan)?;
    Ok(MkSolution {
        value,
        plan,
        method: Method::Lp,
    })
}

/// Forbidden-arc predicate excluding every pair farther apart than `r`
/// (plus a `1e-12` relative slack).
pub fn max_arc_length<'a>(
    m0: &'a DiscreteMeasure,
    m1: &'a DiscreteMeasure,
    r: f64,
) -> impl Fn(usize, usize) -> bool + 'a {
    move |i, j| crate::dist(m0.point(i), m1.point(j)) > r * (1.0 + 1e-12)
}

/// `T_p(m0, m1)` with cost `|u|^p`, any `p > 0`.
pub fn t_p(m0: &DiscreteMeasure, m1: &DiscreteMeasure, p: f64) -> Result<f64, SolverError> {
    let cost = CostFunction::power(p).map_err(|_| SolverError::BadExponent(p))?;
    Ok(solve_mk(m0, m1, &cost, None)?.value)
}

/// Exhaustive minimum over the `n!` permutation plans of two uniform
/// `n`-atom measures.
pub fn brute_force_mk(
    m0: &DiscreteMeasure,
    m1: &DiscreteMeasure,
    cost: &CostFunction,
) -> Result<MkSolution, SolverError> {
    check_dims(m0, m1)?;
    let n = m0.len();
    if n > BRUTE_FORCE_MAX || m1.len() > BRUTE_FORCE_MAX {
        return Err(SolverError::TooLarge {
            n: n.max(m1.len()),
            max: BRUTE_FORCE_MAX,
        });
    }
    let w = 1.0 / n as f64;
    let uniform = |m: &DiscreteMeasure| m.weights().iter().all(|&x| (x - w).abs() <= 1e-12);
    if m1.len() != n || !uniform(m0) || !uniform(m1) {
        return Err(SolverError::UnequalWeights);
    }
    let c = cost_matrix(m0, m1, cost);
    let mut best: Option<(f64, Vec<usize>)> = None;
    for perm in (0..n).permutations(n) {
        let total: f64 = perm.iter().enumerate().map(|(i, &j)| c[i][j]).sum();
        if best.as_ref().is_none_or(|(b, _)| total < *b) {
            best = Some((total, perm));
        }
    }
    let (_, perm) = best.expect("n >= 1");
    let mut plan = vec![vec![0.0; n]; n];
    for (i, &j) in perm.iter().enumerate() {
        plan[i][j] = w;
    }
    let value = plan_value(&plan, &c);
    Ok(MkSolution {
        value,
        plan: make_coupling(m0.clone(), m1.clone(), plan)?,
        method: Method::BruteForce,
    })
}

fn check_dims(m0: &DiscreteMeasure, m1: &DiscreteMeasure) -> Result<(), SolverError> {
    if m0.dim() != m1.dim() {
        return Err(SolverError::DimensionMismatch {
            source_dim: m0.dim(),
            target_dim: m1.dim(),
        });
    }
    Ok(())
}

pub(crate) fn plan_value(plan: &[Vec<f64>], c: &[Vec<f64>]) -> f64 {
    plan.iter()
        .zip(c)
        .flat_map(|(p, c)| p.iter().zip(c).map(|(w, c)| w * c))
        .sum()
}

/// Min-cost transportation by successive shortest paths.
///
/// Node layout: `0` super source, `1..=n` sources, `n+1..=n+m` sinks,
/// `n+m+1` super sink. Forward source→sink arcs are uncapacitated.
pub(crate) fn transport_lp(
    supply: &[f64],
    demand: &[f64],
    c: &[Vec<f64>],
    allowed: &[Vec<bool>],
) -> Result<Vec<Vec<f64>>, SolverError> {
    let (n, m) = (supply.len(), demand.len());
    let nodes = n + m + 2;
    let (s, t) = (0, n + m + 1);
    let src = |i: usize| 1 + i;
    let snk = |j: usize| 1 + n + j;

    let mut flow = vec![vec![0.0; m]; n];
    let mut sent = vec![0.0; n];
    let mut recv = vec![0.0; m];
    let mut pot = vec![0.0; nodes];
    let target = supply.iter().sum::<f64>().min(demand.iter().sum::<f64>());
    let mut routed = 0.0;

    let max_iter = 4 * (n + 1) * (m + 1) + 16;
    for _ in 0..max_iter {
        if target - routed <= 1e-14 {
            break;
        }
        // Dense Dijkstra on reduced costs.
        let mut dist = vec![f64::INFINITY; nodes];
        let mut prev = vec![usize::MAX; nodes];
        let mut done = vec![false; nodes];
        dist[s] = 0.0;
        loop {
            let mut u = usize::MAX;
            for v in 0..nodes {
                if !done[v] && dist[v].is_finite() && (u == usize::MAX || dist[v] < dist[u]) {
                    u = v;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            let du = dist[u];
            let relax = |v: usize, w: f64, dist: &mut Vec<f64>, prev: &mut Vec<usize>| {
                let rc = (w + pot[u] - pot[v]).max(0.0);
                if du + rc < dist[v] {
                    dist[v] = du + rc;
                    prev[v] = u;
                }
            };
            if u == s {
                for i in 0..n {
                    if supply[i] - sent[i] > FLOW_EPS {
                        relax(src(i), 0.0, &mut dist, &mut prev);
                    }
                }
            } else if u <= n {
                let i = u - 1;
                for j in 0..m {
                    if allowed[i][j] {
                        relax(snk(j), c[i][j], &mut dist, &mut prev);
                    }
                }
            } else if u < t {
                let j = u - 1 - n;
                for i in 0..n {
                    if flow[i][j] > FLOW_EPS {
                        relax(src(i), -c[i][j], &mut dist, &mut prev);
                    }
                }
                if demand[j] - recv[j] > FLOW_EPS {
                    relax(t, 0.0, &mut dist, &mut prev);
                }
            }
        }
        if !dist[t].is_finite() {
            break;
        }
        for v in 0..nodes {
            pot[v] += dist[v].min(dist[t]);
        }
        // Bottleneck along the path.
        let mut amount = target - routed;
        let mut v = t;
        while v != s {
            let u = prev[v];
            if u == s {
                amount = amount.min(supply[v - 1] - sent[v - 1]);
            } else if v == t {
                let j = u - 1 - n;
                amount = amount.min(demand[j] - recv[j]);
            } else if u > n {
                // Backward arc sink → source cancels flow.
                amount = amount.min(flow[v - 1][u - 1 - n]);
            }
            v = u;
        }
        let mut v = t;
        while v != s {
            let u = prev[v];
            if u == s {
                sent[v - 1] += amount;
            } else if v == t {
                recv[u - 1 - n] += amount;
            } else if u <= n {
                flow[u - 1][v - 1 - n] += amount;
            } else {
                let (i, j) = (v - 1, u - 1 - n);
                flow[i][j] -= amount;
                if flow[i][j] < FLOW_EPS {
                    flow[i][j] = 0.0;
                }
            }
            v = u;
        }
        routed += amount;
    }
    if target - routed > 1e-12 {
        return Err(SolverError::Infeasible {
            unrouted: target - routed,
        });
    }
    Ok(flow)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::validate_measure;

    fn m1d(pts: &[(f64, f64)]) -> DiscreteMeasure {
        validate_measure(pts.iter().map(|&(x, w)| (vec![x], w)).collect(), 1).unwrap()
    }

    fn sqrt_cost() -> CostFunction {
        CostFunction::power(0.5).unwrap()
    }

    #[test]
    fn equal_marginals_cost_nothing() {
        let m = m1d(&[(0.0, 0.5), (1.0, 0.5)]);
        let sol = solve_mk(&m, &m, &sqrt_cost(), None).unwrap();
        assert_eq!(sol.value, 0.0);
        assert_eq!(sol.plan.plan(), &[vec![0.5, 0.0], vec![0.0, 0.5]]);
    }

    #[test]
    fn uncrossed_pairing_wins() {
        // 0→1, 3→2 costs 1; the crossed pairing costs √2.
        let a = m1d(&[(0.0, 0.5), (3.0, 0.5)]);
        let b = m1d(&[(1.0, 0.5), (2.0, 0.5)]);
        let sol = solve_mk(&a, &b, &sqrt_cost(), None).unwrap();
        assert!((sol.value - 1.0).abs() < 1e-15);
        assert_eq!(sol.plan.plan(), &[vec![0.5, 0.0], vec![0.0, 0.5]]);
        let bf = brute_force_mk(&a, &b, &sqrt_cost()).unwrap();
        assert!((bf.value - 1.0).abs() < 1e-15);
        assert_eq!(bf.method, Method::BruteForce);
    }

    #[test]
    fn forced_split() {
        let a = m1d(&[(0.0, 1.0)]);
        let b = m1d(&[(1.0, 0.5), (-1.0, 0.5)]);
        let sol = solve_mk(&a, &b, &sqrt_cost(), None).unwrap();
        assert!((sol.value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn t_p_examples() {
        let d0 = m1d(&[(0.0, 1.0)]);
        assert_eq!(t_p(&d0, &m1d(&[(1.0, 1.0)]), 1.0).unwrap(), 1.0);
        assert_eq!(
            t_p(&d0, &m1d(&[(1.0, 0.5), (-1.0, 0.5)]), 1.0).unwrap(),
            1.0
        );
        let a = m1d(&[(0.0, 0.5), (3.0, 0.5)]);
        let b = m1d(&[(1.0, 0.5), (2.0, 0.5)]);
        assert!((t_p(&a, &b, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((t_p(&a, &b, 2.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn brute_force_identity_and_errors() {
        let m = DiscreteMeasure::uniform(vec![vec![0.0], vec![1.0], vec![5.0]]).unwrap();
        assert_eq!(brute_force_mk(&m, &m, &sqrt_cost()).unwrap().value, 0.0);
        let big = DiscreteMeasure::uniform((0..9).map(|k| vec![k as f64]).collect()).unwrap();
        assert!(matches!(
            brute_force_mk(&big, &big, &sqrt_cost()),
            Err(SolverError::TooLarge { .. })
        ));
        let skew = m1d(&[(0.0, 0.3), (1.0, 0.7)]);
        assert_eq!(
            brute_force_mk(&skew, &skew, &sqrt_cost()).unwrap_err(),
            SolverError::UnequalWeights
        );
    }

    #[test]
    fn forbidden_arcs() {
        let a = m1d(&[(0.0, 0.5), (3.0, 0.5)]);
        let b = m1d(&[(1.0, 0.5), (2.0, 0.5)]);
        // Forbid the cheap pairing's first arc: forced onto the crossed plan.
        let sol = solve_mk(&a, &b, &sqrt_cost(), Some(&|i, j| i == 0 && j == 0)).unwrap();
        assert!((sol.value - 2f64.sqrt()).abs() < 1e-15);
        let err = solve_mk(&a, &b, &sqrt_cost(), Some(&|i, _| i == 0)).unwrap_err();
        assert!(matches!(err, SolverError::Infeasible { .. }));
        let r = max_arc_length(&a, &b, 0.5);
        assert!(matches!(
            solve_mk(&a, &b, &sqrt_cost(), Some(&r)),
            Err(SolverError::Infeasible { .. })
        ));
    }

    #[test]
    fn dimension_mismatch() {
        let a = DiscreteMeasure::dirac(vec![0.0]);
        let b = DiscreteMeasure::dirac(vec![0.0, 1.0]);
        assert!(matches!(
            solve_mk(&a, &b, &sqrt_cost(), None),
            Err(SolverError::DimensionMismatch { .. })
        ));
    }
}

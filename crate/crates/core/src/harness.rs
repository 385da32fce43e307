//! Seeded verification suites, reports and plot data.
//!
//! Each suite draws independent trials from a ChaCha stream keyed by
//! `(seed, trial)`, so trials can run in any order and the report is
//! assembled in trial-index order. Identical configurations give
//! byte-identical JSON.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::costs::{
    c_ell, check_convex, default_a1_report, default_a2_report, log_grid, slope_attained_at,
    Assumption, AssumptionReport, CostFunction, CostSpec,
};
use crate::duality::{inf_conv, verify_control_identity, GridFunction};
use crate::ensembles::{
    build_opt_bounded, build_opt_tilde, eval_bounded, eval_tilde, eval_tv, has_optimal_structure,
    oracle_min_path, random_admissible, random_triple, solve_bounded, Objective, TransportEnsemble,
};
use crate::exec::{self, ExecMode};
use crate::measures::{random_measure_with, DiscreteMeasure};
use crate::mk_solver::{solve_mk, t_p};
use crate::paths::{detour_path, fast_path, random_path_between, IntervalSet, NIndex};
use crate::{dist, norm};

pub const FORMAT_VERSION: u32 = 1;
/// Default tolerance for equalities and non-strict inequalities.
pub const DEFAULT_TOL: f64 = 1e-9;
/// A strict inequality must hold with at least this margin.
pub const STRICT_MARGIN: f64 = 1e-6;

/// Box half-width for random atoms.
const BOX: f64 = 2.0;
/// Oracle resolution for per-cell spot checks.
const ORACLE_K: usize = 4;
const ORACLE_SPEEDS: [f64; 5] = [0.0, 0.5, 1.0, 2.0, 4.0];
/// Speed caps swept by the unbounded-velocity suite.
const CAPS: [f64; 5] = [1.0, 10.0, 100.0, 1e3, 1e4];
/// Multiples of the diameter swept by the fixed-bound suite.
const RADII: [f64; 7] = [1.0, 1.25, 1.5, 2.0, 3.0, 5.0, 10.0];
const FAST_N: u32 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Theorem {
    #[serde(rename = "thm2_1")]
    Thm2_1,
    #[serde(rename = "thm2_2")]
    Thm2_2,
    #[serde(rename = "prop2_3")]
    Prop2_3,
    #[serde(rename = "cor2_4")]
    Cor2_4,
    #[serde(rename = "thm2_6")]
    Thm2_6,
    #[serde(rename = "cor2_7")]
    Cor2_7,
    #[serde(rename = "cor2_8")]
    Cor2_8,
    #[serde(rename = "eq1_6")]
    Eq1_6,
    #[serde(rename = "eq1_9_0416")]
    Eq1_9_0416,
    #[serde(rename = "eq1_11_0508")]
    Eq1_11_0508,
}

impl Theorem {
    pub const ALL: [Theorem; 10] = [
        Theorem::Thm2_1,
        Theorem::Thm2_2,
        Theorem::Prop2_3,
        Theorem::Cor2_4,
        Theorem::Thm2_6,
        Theorem::Cor2_7,
        Theorem::Cor2_8,
        Theorem::Eq1_6,
        Theorem::Eq1_9_0416,
        Theorem::Eq1_11_0508,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Theorem::Thm2_1 => "thm2_1",
            Theorem::Thm2_2 => "thm2_2",
            Theorem::Prop2_3 => "prop2_3",
            Theorem::Cor2_4 => "cor2_4",
            Theorem::Thm2_6 => "thm2_6",
            Theorem::Cor2_7 => "cor2_7",
            Theorem::Cor2_8 => "cor2_8",
            Theorem::Eq1_6 => "eq1_6",
            Theorem::Eq1_9_0416 => "eq1_9_0416",
            Theorem::Eq1_11_0508 => "eq1_11_0508",
        }
    }

    /// Sampled assumptions the cost must pass before the suite runs.
    pub fn required(self) -> &'static [Assumption] {
        use Assumption::*;
        match self {
            Theorem::Thm2_1
            | Theorem::Thm2_6
            | Theorem::Cor2_7
            | Theorem::Cor2_8
            | Theorem::Eq1_6 => &[A1i],
            Theorem::Thm2_2 => &[A1i, A1iii, A2i],
            Theorem::Cor2_4 => &[A1i, A2iii],
            Theorem::Prop2_3 | Theorem::Eq1_9_0416 | Theorem::Eq1_11_0508 => &[],
        }
    }
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Theorem {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, HarnessError> {
        let key = s.trim().replace('.', "_");
        Theorem::ALL
            .into_iter()
            .find(|t| t.as_str() == key)
            .ok_or_else(|| HarnessError::ConfigInvalid(format!("unknown theorem `{s}`")))
    }
}

fn default_trials() -> usize {
    20
}
fn default_atoms() -> usize {
    4
}
fn default_dim() -> usize {
    2
}
fn default_tol() -> f64 {
    DEFAULT_TOL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub theorem: Theorem,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_atoms")]
    pub n_atoms: usize,
    #[serde(default = "default_dim")]
    pub dim: usize,
    pub cost: CostSpec,
    #[serde(default = "default_tol")]
    pub tolerance: f64,
}

impl VerifyConfig {
    pub fn new(theorem: Theorem, cost: CostSpec) -> Self {
        VerifyConfig {
            theorem,
            seed: 0,
            trials: default_trials(),
            n_atoms: default_atoms(),
            dim: default_dim(),
            cost,
            tolerance: DEFAULT_TOL,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::ConfigInvalid(m.to_string()));
        if self.trials == 0 || self.trials > 100_000 {
            return bad("trials must be in 1..=100000");
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return bad("tolerance must be positive");
        }
        if self.n_atoms == 0 || self.n_atoms > 12 {
            return bad("n_atoms must be in 1..=12");
        }
        if self.dim == 0 || self.dim > 8 {
            return bad("dim must be in 1..=8");
        }
        if self.theorem == Theorem::Prop2_3 && self.dim < 2 {
            return bad("prop2_3 needs dim >= 2 for the detour");
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cost `{cost}` fails {failed:?} needed by {theorem}: {reason}")]
    AssumptionRefused {
        theorem: Theorem,
        cost: String,
        failed: Vec<Assumption>,
        reason: String,
    },
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("trial {index} failed: {message}")]
    Trial { index: usize, message: String },
    #[error("unknown plot kind `{0}`")]
    UnknownKind(String),
    #[error("plot kind `{kind}` needs a {needs} report")]
    KindMismatch { kind: String, needs: &'static str },
    #[error("report has no trials")]
    EmptyReport,
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginKind {
    /// Passes when `value ≥ −tolerance`.
    NonStrict,
    /// Passes when `value > STRICT_MARGIN`.
    Strict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Margin {
    pub name: String,
    pub value: f64,
    pub kind: MarginKind,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub index: usize,
    pub inputs_digest: String,
    pub values: BTreeMap<String, f64>,
    pub margins: Vec<Margin>,
    pub checks: Vec<Check>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub trials: usize,
    pub passed: usize,
    pub min_margin: f64,
    pub max_margin: f64,
    pub all_passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub kind: String,
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub format_version: u32,
    pub config: VerifyConfig,
    pub cost_name: String,
    pub assumptions: AssumptionReport,
    pub records: Vec<TrialRecord>,
    pub summary: Summary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series: Option<Series>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.summary.all_passed
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

/// Accumulates one trial's values and margins.
struct Rec {
    index: usize,
    tol: f64,
    digest: String,
    values: BTreeMap<String, f64>,
    margins: Vec<Margin>,
    checks: Vec<Check>,
    flags: Vec<String>,
}

impl Rec {
    fn new(index: usize, tol: f64, inputs: serde_json::Value) -> Self {
        let bytes = serde_json::to_vec(&inputs).expect("inputs serialize");
        let digest = Sha256::digest(&bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect();
        Rec {
            index,
            tol,
            digest,
            values: BTreeMap::new(),
            margins: Vec::new(),
            checks: Vec::new(),
            flags: Vec::new(),
        }
    }

    fn value(&mut self, name: impl Into<String>, v: f64) {
        self.values.insert(name.into(), v);
    }

    /// `a ≥ b` within tolerance.
    fn ge(&mut self, name: impl Into<String>, a: f64, b: f64) {
        let value = a - b;
        self.margins.push(Margin {
            name: name.into(),
            value,
            kind: MarginKind::NonStrict,
            passed: value >= -self.tol,
        });
    }

    /// `a > b` by at least [`STRICT_MARGIN`].
    fn gt(&mut self, name: impl Into<String>, a: f64, b: f64) {
        let value = a - b;
        self.margins.push(Margin {
            name: name.into(),
            value,
            kind: MarginKind::Strict,
            passed: value > STRICT_MARGIN,
        });
    }

    /// `a = b`, recorded as both one-sided margins.
    fn eq(&mut self, name: &str, a: f64, b: f64) {
        self.ge(format!("{name}:lo"), a, b);
        self.ge(format!("{name}:hi"), b, a);
    }

    fn check(&mut self, name: impl Into<String>, passed: bool) {
        self.checks.push(Check {
            name: name.into(),
            passed,
        });
    }

    fn finish(self) -> TrialRecord {
        let passed = self.margins.iter().all(|m| m.passed) && self.checks.iter().all(|c| c.passed);
        TrialRecord {
            index: self.index,
            inputs_digest: self.digest,
            values: self.values,
            margins: self.margins,
            checks: self.checks,
            flags: self.flags,
            passed,
        }
    }
}

struct Ctx<'a> {
    cfg: &'a VerifyConfig,
    cost: &'a CostFunction,
    assumptions: &'a AssumptionReport,
    mode: ExecMode,
}

type TrialResult = Result<TrialRecord, String>;

fn trial_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Runs the configured suite after auditing the cost's assumptions.
pub fn verify(cfg: &VerifyConfig) -> Result<Report, HarnessError> {
    verify_with(cfg, ExecMode::default())
}

pub fn verify_with(cfg: &VerifyConfig, mode: ExecMode) -> Result<Report, HarnessError> {
    cfg.validate()?;
    let cost = cfg
        .cost
        .build()
        .map_err(|e| HarnessError::ConfigInvalid(e.to_string()))?;
    let assumptions = default_a1_report(&cost).merge(default_a2_report(&cost));
    audit(cfg.theorem, &cost, &assumptions)?;

    let ctx = Ctx {
        cfg,
        cost: &cost,
        assumptions: &assumptions,
        mode,
    };
    let suite: fn(&Ctx, usize, &mut ChaCha8Rng) -> TrialResult = match cfg.theorem {
        Theorem::Thm2_1 => trial_thm2_1,
        Theorem::Thm2_2 => trial_thm2_2,
        Theorem::Prop2_3 => trial_prop2_3,
        Theorem::Cor2_4 => trial_cor2_4,
        Theorem::Thm2_6 => trial_thm2_6,
        Theorem::Cor2_7 => trial_cor2_7,
        Theorem::Cor2_8 => trial_cor2_8,
        Theorem::Eq1_6 => trial_eq1_6,
        Theorem::Eq1_9_0416 => trial_eq1_9,
        Theorem::Eq1_11_0508 => trial_eq1_11,
    };
    let results = exec::map_range(mode, cfg.trials, |t| {
        let mut rng = trial_rng(cfg.seed, t);
        suite(&ctx, t, &mut rng)
    });
    let mut records = Vec::with_capacity(results.len());
    for (index, r) in results.into_iter().enumerate() {
        records.push(r.map_err(|message| HarnessError::Trial { index, message })?);
    }
    let series = series_for(&ctx).map_err(|message| HarnessError::Trial { index: 0, message })?;
    let summary = summarize(&records);
    Ok(Report {
        format_version: FORMAT_VERSION,
        config: cfg.clone(),
        cost_name: cost.name().to_string(),
        assumptions,
        records,
        summary,
        series,
    })
}

fn refuse(
    theorem: Theorem,
    cost: &CostFunction,
    failed: Vec<Assumption>,
    reason: &str,
) -> HarnessError {
    HarnessError::AssumptionRefused {
        theorem,
        cost: cost.name().to_string(),
        failed,
        reason: reason.to_string(),
    }
}

fn audit(
    theorem: Theorem,
    cost: &CostFunction,
    report: &AssumptionReport,
) -> Result<(), HarnessError> {
    let failed: Vec<Assumption> = theorem
        .required()
        .iter()
        .copied()
        .filter(|a| report.verdict(*a) != Some(true))
        .collect();
    if !failed.is_empty() {
        return Err(refuse(theorem, cost, failed, "sampled check failed"));
    }
    match theorem {
        Theorem::Prop2_3 => {
            let r0 = cost
                .r0()
                .ok_or_else(|| refuse(theorem, cost, vec![], "cost declares no r0"))?;
            let grid = log_grid(r0, r0 * 50.0, 200);
            if grid.windows(2).any(|w| cost.eval(w[1]) >= cost.eval(w[0])) {
                return Err(refuse(
                    theorem,
                    cost,
                    vec![],
                    "not strictly decreasing beyond r0",
                ));
            }
        }
        Theorem::Eq1_9_0416 => {
            if check_convex(cost, &log_grid(1e-3, 1e3, 200)).is_some() {
                return Err(refuse(theorem, cost, vec![], "cost is not convex"));
            }
        }
        Theorem::Cor2_7 => {
            c_ell(cost, &[])
                .map_err(|_| refuse(theorem, cost, vec![], "no analytic slope at infinity"))?;
        }
        _ => {}
    }
    Ok(())
}

fn summarize(records: &[TrialRecord]) -> Summary {
    let margins = records
        .iter()
        .flat_map(|r| r.margins.iter().map(|m| m.value));
    let (min_margin, max_margin) = margins
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    let passed = records.iter().filter(|r| r.passed).count();
    Summary {
        trials: records.len(),
        passed,
        min_margin,
        max_margin,
        all_passed: passed == records.len(),
    }
}

fn measure_pair(ctx: &Ctx, rng: &mut ChaCha8Rng) -> (DiscreteMeasure, DiscreteMeasure) {
    let n = ctx.cfg.n_atoms;
    let d = ctx.cfg.dim;
    (
        random_measure_with(rng, n, d, BOX),
        random_measure_with(rng, n, d, BOX),
    )
}

fn random_point(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-BOX..=BOX)).collect()
}

fn s<E: fmt::Display>(e: E) -> String {
    e.to_string()
}

fn pair_inputs(
    cfg: &VerifyConfig,
    t: usize,
    m0: &DiscreteMeasure,
    m1: &DiscreteMeasure,
) -> serde_json::Value {
    json!({ "theorem": cfg.theorem, "cost": cfg.cost, "trial": t, "m0": m0, "m1": m1 })
}

/// Oracle lower-bound spot check for every moving cell of a plan.
fn oracle_cells(
    ctx: &Ctx,
    rec: &mut Rec,
    displacements: impl Iterator<Item = f64>,
    objective: Objective,
) -> Result<(), String> {
    for (k, delta) in displacements.filter(|d| *d > 0.0).enumerate() {
        let r = oracle_min_path(
            0.0,
            delta,
            ctx.cost,
            objective,
            ORACLE_K,
            &ORACLE_SPEEDS,
            None,
            ctx.mode,
        )
        .map_err(s)?;
        rec.ge(format!("oracle[{k}]"), r.value, ctx.cost.eval(delta));
    }
    Ok(())
}

fn optimal_tilde(
    ctx: &Ctx,
    rng: &mut ChaCha8Rng,
    m0: &DiscreteMeasure,
    m1: &DiscreteMeasure,
) -> Result<(f64, TransportEnsemble, Vec<f64>), String> {
    let sol = solve_mk(m0, m1, ctx.cost, None).map_err(s)?;
    let e = build_opt_tilde(&sol, |_, _| IntervalSet::random(rng, 3, 0.05)).map_err(s)?;
    let deltas = sol
        .plan
        .support()
        .map(|(i, j, _)| dist(m0.point(i), m1.point(j)))
        .collect();
    Ok((sol.value, e, deltas))
}

fn trial_thm2_1(ctx: &Ctx, t: usize, rng: &mut ChaCha8Rng) -> TrialResult {
    let (m0, m1) = measure_pair(ctx, rng);
    let mut rec = Rec::new(t, ctx.cfg.tolerance, pair_inputs(ctx.cfg, t, &m0, &m1));
    let (value, e, deltas) = optimal_tilde(ctx, rng, &m0, &m1)?;
    let v1 = eval_tilde(&e, ctx.cost, NIndex::One).map_err(s)?;
    rec.value("T", value);
    rec.value("V1", v1);
    rec.eq("V1=T", v1, value);
    rec.check(
        "optimal_structure",
        e.members()
            .iter()
            .all(|m| has_optimal_structure(&m.path, 1e-9)),
    );
    oracle_cells(ctx, &mut rec, deltas.into_iter(), Objective::L1)?;
    Ok(rec.finish())
}

fn trial_thm2_2(ctx: &Ctx, t: usize, rng: &mut ChaCha8Rng) -> TrialResult {
    let (m0, m1) = measure_pair(ctx, rng);
    let mut rec = Rec::new(t, ctx.cfg.tolerance, pair_inputs(ctx.cfg, t, &m0, &m1));
    let (value, e, _) = optimal_tilde(ctx, rng, &m0, &m1)?;
    let v1 = eval_tilde(&e, ctx.cost, NIndex::One).map_err(s)?;
    let v2 = eval_tilde(&e, ctx.cost, NIndex::Two).map_err(s)?;
    rec.value("T", value);
    rec.value("V1", v1);
    rec.value("V2", v2);
    rec.eq("V1=V2", v1, v2);
    for (k, m) in e.members().iter().enumerate() {
        rec.eq(&format!("n1=n2[{k}]"), m.path.n1(), m.path.n2());
    }
    for k in 0..5 {
        let x = random_point(rng, ctx.cfg.dim);
        let y = random_point(rng, ctx.cfg.dim);
        let pieces = rng.random_range(1..=6);
        let p = random_path_between(rng, &x, &y, pieces, 3.0);
        let l1 = p.cost_li(ctx.cost, NIndex::One).map_err(s)?;
        let l2 = p.cost_li(ctx.cost, NIndex::Two).map_err(s)?;
        rec.ge(format!("L1>=L2[{k}]"), l1, l2);
    }
    Ok(rec.finish())
}

fn trial_prop2_3(ctx: &Ctx, t: usize, rng: &mut ChaCha8Rng) -> TrialResult {
    let r0 = ctx.cost.r0().expect("audited");
    let d = ctx.cfg.dim;
    let (x, y) = if t == 0 {
        let mut y = vec![0.0; d];
        y[0] = 2.0 * r0;
        (vec![0.0; d], y)
    } else {
        let x = random_point(rng, d);
        let mut dir: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = norm(&dir).max(1e-3);
        dir.iter_mut().for_each(|c| *c /= n);
        let len = r0 * rng.random_range(1.05..3.0);
        let y = x.iter().zip(&dir).map(|(a, b)| a + len * b).collect();
        (x, y)
    };
    let m0 = DiscreteMeasure::dirac(x.clone());
    let m1 = DiscreteMeasure::dirac(y.clone());
    let mut rec = Rec::new(t, ctx.cfg.tolerance, pair_inputs(ctx.cfg, t, &m0, &m1));
    let value = solve_mk(&m0, &m1, ctx.cost, None).map_err(s)?.value;
    let detour = TransportEnsemble::single(detour_path(&x, &y).map_err(s)?, None).map_err(s)?;
    let v2 = eval_tilde(&detour, ctx.cost, NIndex::Two).map_err(s)?;
    rec.value("T", value);
    rec.value("V2_upper", v2);
    rec.value("gap", value - v2);
    rec.gt("T>V2", value, v2);
    Ok(rec.finish())
}

fn trial_cor2_4(ctx: &Ctx, t: usize, rng: &mut ChaCha8Rng) -> TrialResult {
    let d = ctx.cfg.dim;
    let m0 = random_measure_with(rng, ctx.cfg.n_atoms, d, BOX);
    let points: Vec<Vec<f64>> = (0..ctx.cfg.n_atoms + 3)
        .map(|_| random_point(rng, d))
        .collect();
    let values = (0..points.len())
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let f = GridFunction::new(points, values).map_err(s)?;
    let mut rec = Rec::new(
        t,
        ctx.cfg.tolerance,
        json!({ "theorem": ctx.cfg.theorem, "cost": ctx.cfg.cost, "trial": t, "m0": m0, "f": f }),
    );
    let second = [Assumption::A1iii, Assumption::A2i]
        .iter()
        .all(|a| ctx.assumptions.verdict(*a) == Some(true));
    for i in [NIndex::One, NIndex::Two] {
        if i == NIndex::Two && !second {
            continue;
        }
        let r = verify_control_identity(&m0, &f, ctx.cost, i, ctx.mode).map_err(s)?;
        let tag = r.index;
        rec.value(format!("lhs{tag}"), r.lhs);
        rec.value(format!("rhs{tag}"), r.rhs);
        rec.check(format!("lhs=rhs exactly (i={tag})"), r.margin == 0.0);
        for (k, c) in r.oracle_checks.iter().enumerate() {
            rec.ge(format!("oracle{tag}[{k}]"), c.oracle_value, c.lower_bound);
        }
    }
    let fl = inf_conv(&f, ctx.cost, f.points(), ctx.mode);
    for (k, (a, b)) in fl.iter().zip(f.values()).enumerate() {
        rec.ge(format!("f>=fl[{k}]"), *b, *a);
    }
    Ok(rec.finish())
}

fn trial_thm2_6(ctx: &Ctx, t: usize, rng: &mut ChaCha8Rng) -> TrialResult {
    let (m0, m1) = measure_pair(ctx, rng);
    let mut rec = Rec::new(t, ctx.cfg.tolerance, pair_inputs(ctx.cfg, t, &m0, &m1));
    let plan = solve_mk(&m0, &m1, ctx.cost, None).map_err(s)?.plan;
    let triple = random_triple(rng, &plan, 3).map_err(s)?;
    let e = build_opt_bounded(&triple).map_err(s)?;
    let v = eval_bounded(&e, ctx.cost).map_err(s)?;
    let tv = eval_tv(&triple, ctx.cost);
    rec.value("V", v);
    rec.value("TV", tv);
    rec.eq("V=TV", v, tv);
    rec.check(
        "optimal_structure",
        e.members()
            .iter()
            .all(|m| has_optimal_structure(&m.path, 1e-9)),
    );
    for k in 0..4 {
        let (adm, induced) = random_admissible(rng, &plan, 4).map_err(s)?;
        rec.ge(
            format!("admissible[{k}]"),
            eval_bounded(&adm, ctx.cost).map_err(s)?,
            eval_tv(&induced, ctx.cost),
        );
    }
    Ok(rec.finish())
}

/// `(R, V(·;{δ_max(R, diam)}))` along [`CAPS`].
fn cap_sweep(
    ctx: &Ctx,
    m0: &DiscreteMeasure,
    m1: &DiscreteMeasure,
) -> Result<Vec<(f64, f64)>, String> {
    let diam = m0.cross_diameter(m1);
    CAPS.iter()
        .map(|&r| {
            let bound = r.max(diam);
            Ok((r, solve_bounded(m0, m1, ctx.cost, bound).map_err(s)?.value))
        })
        .collect()
}

fn trial_cor2_7(ctx: &Ctx, t: usize, rng: &mut ChaCha8Rng) -> TrialResult {
    let (m0, m1) = measure_pair(ctx, rng);
    let mut rec = Rec::new(t, ctx.cfg.tolerance, pair_inputs(ctx.cfg, t, &m0, &m1));
    let c = c_ell(ctx.cost, &[]).map_err(s)?.value;
    let t1 = t_p(&m0, &m1, 1.0).map_err(s)?;
    let diam = m0.cross_diameter(&m1);
    rec.value("C_ell", c);
    rec.value("T1", t1);
    let sweep = cap_sweep(ctx, &m0, &m1)?;
    for (k, &(r, v)) in sweep.iter().enumerate() {
        let bound = r.max(diam);
        rec.value(format!("V[R={r}]"), v);
        rec.ge(format!("V>=C*T1[R={r}]"), v, c * t1);
        rec.ge(
            format!("gap<=bound[R={r}]"),
            (ctx.cost.eval(bound) / bound - c) * t1,
            v - c * t1,
        );
        if k > 0 {
            rec.ge(format!("nonincreasing[R={r}]"), sweep[k - 1].1, v);
        }
    }
    rec.value("final_gap", sweep.last().unwrap().1 - c * t1);

    let plan = solve_mk(&m0, &m1, &CostFunction::linear(), None)
        .map_err(s)?
        .plan;
    if let Some(delta) = plan
        .support()
        .map(|(i, j, _)| dist(m0.point(i), m1.point(j)))
        .find(|d| *d > 0.0)
    {
        for &r in &CAPS[..3] {
            let cap = r.max(delta);
            let o = oracle_min_path(
                0.0,
                delta,
                ctx.cost,
                Objective::Plain,
                ORACLE_K,
                &ORACLE_SPEEDS,
                Some(cap),
                ctx.mode,
            )
            .map_err(s)?;
            rec.ge(format!("oracle>=C*delta[R={r}]"), o.value, c * delta);
            rec.ge(
                format!("oracle>=capped[R={r}]"),
                o.value,
                ctx.cost.eval(cap) / cap * delta,
            );
        }
    }
    match slope_attained_at(ctx.cost, c, &log_grid(1e-3, 1e6, 200), 1e-12) {
        Some(u) => rec.flags.push(format!("slope attained at u={u}")),
        None => rec
            .flags
            .push("slope not attained on the sampled grid".into()),
    }
    Ok(rec.finish())
}

/// `(r, V(·;{δ_r}))` along multiples of the diameter.
fn radius_sweep(
    ctx: &Ctx,
    m0: &DiscreteMeasure,
    m1: &DiscreteMeasure,
) -> Result<Vec<(f64, f64)>, String> {
    let diam = m0.cross_diameter(m1);
    RADII
        .iter()
        .map(|&k| {
            let r = k * diam;
            Ok((r, solve_bounded(m0, m1, ctx.cost, r).map_err(s)?.value))
        })
        .collect()
}

fn trial_cor2_8(ctx: &Ctx, t: usize, rng: &mut ChaCha8Rng) -> TrialResult {
    let (m0, m1) = measure_pair(ctx, rng);
    let mut rec = Rec::new(t, ctx.cfg.tolerance, pair_inputs(ctx.cfg, t, &m0, &m1));
    let t1 = t_p(&m0, &m1, 1.0).map_err(s)?;
    rec.value("T1", t1);
    let sweep = radius_sweep(ctx, &m0, &m1)?;
    for (k, &(r, v)) in sweep.iter().enumerate() {
        rec.value(format!("V[r={r}]"), v);
        rec.eq(&format!("V=formula[r={r}]"), v, ctx.cost.eval(r) / r * t1);
        if k > 0 {
            rec.ge(format!("nonincreasing[r={r}]"), sweep[k - 1].1, v);
        }
    }
    Ok(rec.finish())
}

fn fast_costs(cost: &CostFunction, x: &[f64], y: &[f64]) -> Vec<(f64, f64)> {
    (1..=FAST_N)
        .map(|n| (n as f64, fast_path(x, y, n).cost_plain(cost)))
        .collect()
}

fn trial_eq1_6(ctx: &Ctx, t: usize, rng: &mut ChaCha8Rng) -> TrialResult {
    let x = random_point(rng, ctx.cfg.dim);
    let y = random_point(rng, ctx.cfg.dim);
    let mut rec = Rec::new(
        t,
        ctx.cfg.tolerance,
        json!({ "theorem": ctx.cfg.theorem, "cost": ctx.cfg.cost, "trial": t, "x": x, "y": y }),
    );
    let delta = dist(&x, &y);
    let base = ctx.cost.eval(delta);
    let costs = fast_costs(ctx.cost, &x, &y);
    for (k, &(n, c)) in costs.iter().enumerate() {
        rec.ge(format!("cost<=l(delta)[n={n}]"), base, c);
        if k > 0 {
            rec.ge(format!("nonincreasing[n={n}]"), costs[k - 1].1, c);
        }
        if let Some(p) = ctx.cost.power_exponent() {
            rec.eq(&format!("formula[n={n}]"), c, n.powf(p - 1.0) * base);
        }
    }
    rec.value("delta", delta);
    rec.value(format!("cost[n={FAST_N}]"), costs.last().unwrap().1);
    Ok(rec.finish())
}

fn trial_eq1_9(ctx: &Ctx, t: usize, rng: &mut ChaCha8Rng) -> TrialResult {
    let delta = rng.random_range(0.2..3.0);
    let mut rec = Rec::new(
        t,
        ctx.cfg.tolerance,
        json!({ "theorem": ctx.cfg.theorem, "cost": ctx.cfg.cost, "trial": t, "delta": delta }),
    );
    let target = ctx.cost.eval(delta);
    rec.value("l(delta)", target);
    for obj in [Objective::Plain, Objective::Rescaled1, Objective::Rescaled2] {
        let o = oracle_min_path(
            0.0,
            delta,
            ctx.cost,
            obj,
            ORACLE_K,
            &ORACLE_SPEEDS,
            None,
            ctx.mode,
        )
        .map_err(s)?;
        let name = format!("{obj:?}");
        rec.value(format!("oracle[{name}]"), o.value);
        rec.eq(&format!("oracle=l(delta)[{name}]"), o.value, target);
    }
    for n in [1.0, 1.5, 2.0, 4.0] {
        for u in [0.25 * delta, delta, 2.0 * delta] {
            rec.ge(
                format!("rescaled>=plain[N={n},u={u}]"),
                ctx.cost.eval(n * u) / n,
                ctx.cost.eval(u),
            );
        }
    }
    Ok(rec.finish())
}

fn trial_eq1_11(ctx: &Ctx, t: usize, rng: &mut ChaCha8Rng) -> TrialResult {
    let x = random_point(rng, ctx.cfg.dim);
    let y = random_point(rng, ctx.cfg.dim);
    let pieces = rng.random_range(1..=6);
    let p = random_path_between(rng, &x, &y, pieces, 3.0);
    let mut rec = Rec::new(
        t,
        ctx.cfg.tolerance,
        json!({ "theorem": ctx.cfg.theorem, "cost": ctx.cfg.cost, "trial": t, "path": p }),
    );
    let stretched = p.stretch(p.n1()).map_err(s)?;
    let lhs = stretched.cost_plain(ctx.cost);
    let rhs = p.cost_li(ctx.cost, NIndex::One).map_err(s)?;
    rec.value("stretched", lhs);
    rec.value("L1", rhs);
    rec.eq("time_change", lhs, rhs);
    let back = stretched.compress().map_err(s)?;
    let drift = back
        .pieces()
        .iter()
        .zip(p.pieces())
        .flat_map(|(a, b)| {
            std::iter::once((a.duration - b.duration).abs()).chain(
                a.velocity
                    .iter()
                    .zip(&b.velocity)
                    .map(|(u, v)| (u - v).abs()),
            )
        })
        .fold(0.0, f64::max);
    rec.value("roundtrip_drift", drift);
    rec.check("roundtrip_shape", back.pieces().len() == p.pieces().len());
    rec.ge("roundtrip", 0.0, drift);
    Ok(rec.finish())
}

/// Series attached to reports whose suite has a natural plot.
fn series_for(ctx: &Ctx) -> Result<Option<Series>, String> {
    let d = ctx.cfg.dim;
    let mk = |kind: &str, x: &str, y: &str, points| Series {
        kind: kind.into(),
        x_label: x.into(),
        y_label: y.into(),
        points,
    };
    Ok(match ctx.cfg.theorem {
        Theorem::Eq1_6 => {
            let mut y = vec![0.0; d];
            y[0] = 1.0;
            Some(mk(
                "eq1_6",
                "n",
                "cost_plain",
                fast_costs(ctx.cost, &vec![0.0; d], &y),
            ))
        }
        Theorem::Cor2_7 => {
            let mut rng = trial_rng(ctx.cfg.seed, 0);
            let (m0, m1) = measure_pair(ctx, &mut rng);
            Some(mk("cor2_7", "R", "value", cap_sweep(ctx, &m0, &m1)?))
        }
        Theorem::Cor2_8 => {
            let mut rng = trial_rng(ctx.cfg.seed, 0);
            let (m0, m1) = measure_pair(ctx, &mut rng);
            Some(mk("cor2_8", "r", "value", radius_sweep(ctx, &m0, &m1)?))
        }
        _ => None,
    })
}

/// CSV plot data. `kind` is either the report's series kind (`eq1_6`,
/// `cor2_7`, `cor2_8`) or `margins`, which works for every report.
pub fn emit_plot_data(report: &Report, kind: &str) -> Result<String, HarnessError> {
    if report.records.is_empty() {
        return Err(HarnessError::EmptyReport);
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    match kind {
        "margins" => {
            w.write_record(["trial", "margin", "value", "kind", "passed"])?;
            for r in &report.records {
                for m in &r.margins {
                    let k = match m.kind {
                        MarginKind::NonStrict => "non_strict",
                        MarginKind::Strict => "strict",
                    };
                    w.write_record([
                        r.index.to_string(),
                        m.name.clone(),
                        m.value.to_string(),
                        k.to_string(),
                        m.passed.to_string(),
                    ])?;
                }
            }
        }
        "eq1_6" | "cor2_7" | "cor2_8" => {
            let series = report
                .series
                .as_ref()
                .filter(|s| s.kind == kind)
                .ok_or_else(|| HarnessError::KindMismatch {
                    kind: kind.to_string(),
                    needs: match kind {
                        "eq1_6" => "eq1_6",
                        "cor2_7" => "cor2_7",
                        _ => "cor2_8",
                    },
                })?;
            w.write_record([&series.x_label, &series.y_label])?;
            for (x, y) in &series.points {
                w.write_record([x.to_string(), y.to_string()])?;
            }
        }
        other => return Err(HarnessError::UnknownKind(other.to_string())),
    }
    let bytes = w
        .into_inner()
        .map_err(|e| HarnessError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

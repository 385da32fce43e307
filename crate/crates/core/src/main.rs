use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;

use nonconvex_ot::costs::CostSpec;
use nonconvex_ot::duality::{verify_control_identity, GridFunction};
use nonconvex_ot::ensembles::{
    build_opt_tilde, eval_bounded, eval_plain, eval_tilde, eval_tv, induced_triple,
    oracle_min_path, solve_bounded, Objective, TransportEnsemble,
};
use nonconvex_ot::harness::{emit_plot_data, verify, HarnessError, Report, Theorem, VerifyConfig};
use nonconvex_ot::measures::DiscreteMeasure;
use nonconvex_ot::mk_solver::{brute_force_mk, max_arc_length, solve_mk};
use nonconvex_ot::paths::{IntervalSet, NIndex, SteppedPath};
use nonconvex_ot::{CostFunction, ExecMode};

#[derive(Parser)]
#[command(
    name = "ncot",
    version,
    about = "Optimal transport with non-convex radial costs"
)]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Tolerance for verification margins.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Emit JSON (default for everything but `plot`).
    #[arg(long, global = true, conflicts_with = "csv")]
    json: bool,
    /// Emit CSV where supported.
    #[arg(long, global = true)]
    csv: bool,
    /// Write output to a file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Run without the thread pool.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the discrete transport problem.
    SolveMk(SolveMkArgs),
    /// Evaluate a path-space functional on an ensemble or a single path.
    Eval(EvalArgs),
    /// Build an optimal ensemble.
    BuildOptimal(BuildArgs),
    /// Exhaustive step-path search on a speed grid.
    Oracle(OracleArgs),
    /// Infimal convolution and the terminal-cost identity.
    Dual(DualArgs),
    /// Run a verification suite.
    Verify(VerifyArgs),
    /// Emit plot data from a report.
    Plot(PlotArgs),
}

#[derive(Args)]
struct SolveMkArgs {
    #[arg(long)]
    p0: PathBuf,
    #[arg(long)]
    p1: PathBuf,
    #[arg(long, default_value = "power:0.5")]
    cost: CostSpec,
    /// Forbid arcs longer than this.
    #[arg(long)]
    max_arc: Option<f64>,
    /// Use the permutation oracle (equal weights, n ≤ 8).
    #[arg(long)]
    brute_force: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum EvalObjective {
    Plain,
    #[value(name = "L1")]
    L1,
    #[value(name = "L2")]
    L2,
    #[value(name = "TV")]
    Tv,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, value_enum)]
    objective: EvalObjective,
    #[arg(long, default_value = "power:0.5")]
    cost: CostSpec,
    #[arg(long, conflicts_with = "path", required_unless_present = "path")]
    ensemble: Option<PathBuf>,
    #[arg(long)]
    path: Option<PathBuf>,
    /// Speed bound attached to `--path`.
    #[arg(long, requires = "path")]
    bound: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BuildTheorem {
    #[value(name = "2.1")]
    Tilde,
    #[value(name = "2.6")]
    Bounded,
}

#[derive(Args)]
struct BuildArgs {
    #[arg(long, value_enum)]
    theorem: BuildTheorem,
    #[arg(long)]
    p0: PathBuf,
    #[arg(long)]
    p1: PathBuf,
    #[arg(long, default_value = "power:0.5")]
    cost: CostSpec,
    /// Moving set for the stop-and-go paths: `full`, `prefix:<len>` or
    /// `random`.
    #[arg(long, default_value = "full")]
    set: String,
    /// Deterministic speed bound for the bounded construction.
    #[arg(long)]
    bound: Option<f64>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, allow_hyphen_values = true)]
    x: f64,
    #[arg(long, allow_hyphen_values = true)]
    y: f64,
    #[arg(long, default_value = "power:0.5")]
    cost: CostSpec,
    /// plain, L1, L2, rescaled1 or rescaled2.
    #[arg(long, default_value = "plain")]
    objective: Objective,
    #[arg(long, default_value_t = 4)]
    k: usize,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,4")]
    speeds: Vec<f64>,
    #[arg(long)]
    cap: Option<f64>,
}

#[derive(Args)]
struct DualArgs {
    /// Grid function JSON, or a bare list of values when `--grid` is given.
    #[arg(long)]
    f: PathBuf,
    /// List of grid points.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long)]
    p0: PathBuf,
    #[arg(long, default_value = "power:0.5")]
    cost: CostSpec,
    #[arg(long, default_value_t = 1)]
    index: u8,
}

#[derive(Args)]
struct VerifyArgs {
    /// JSON config; other flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    theorem: Option<Theorem>,
    #[arg(long)]
    cost: Option<CostSpec>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    n_atoms: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
}

#[derive(Args)]
struct PlotArgs {
    /// eq1_6, cor2_7, cor2_8 or margins.
    #[arg(long)]
    kind: String,
    /// Report produced by `verify`; when absent the matching suite is run.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value = "power:0.5")]
    cost: CostSpec,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn build_cost(spec: &CostSpec) -> Result<CostFunction> {
    Ok(spec.build()?)
}

struct Out {
    path: Option<PathBuf>,
}

impl Out {
    fn write(&self, text: &str) -> Result<()> {
        match &self.path {
            Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
            None => {
                println!("{}", text.trim_end());
                Ok(())
            }
        }
    }

    fn json<T: Serialize>(&self, value: &T) -> Result<()> {
        self.write(&serde_json::to_string_pretty(value)?)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let out = Out {
        path: cli.out.clone(),
    };
    let mode = if cli.sequential {
        ExecMode::Sequential
    } else {
        ExecMode::default()
    };
    match cli.cmd {
        Cmd::SolveMk(a) => {
            let m0: DiscreteMeasure = read_json(&a.p0)?;
            let m1: DiscreteMeasure = read_json(&a.p1)?;
            let cost = build_cost(&a.cost)?;
            let sol = if a.brute_force {
                if a.max_arc.is_some() {
                    bail!("--max-arc is not supported with --brute-force");
                }
                brute_force_mk(&m0, &m1, &cost)?
            } else {
                match a.max_arc {
                    Some(r) => solve_mk(&m0, &m1, &cost, Some(&max_arc_length(&m0, &m1, r)))?,
                    None => solve_mk(&m0, &m1, &cost, None)?,
                }
            };
            out.json(&sol)?;
        }
        Cmd::Eval(a) => {
            let cost = build_cost(&a.cost)?;
            let e = match (&a.ensemble, &a.path) {
                (Some(p), _) => read_json::<TransportEnsemble>(p)?,
                (None, Some(p)) => {
                    TransportEnsemble::single(read_json::<SteppedPath>(p)?, a.bound)?
                }
                (None, None) => unreachable!("clap requires one"),
            };
            let (name, value) = match a.objective {
                EvalObjective::L1 => ("L1", eval_tilde(&e, &cost, NIndex::One)?),
                EvalObjective::L2 => ("L2", eval_tilde(&e, &cost, NIndex::Two)?),
                EvalObjective::Plain => {
                    if e.members().iter().all(|m| m.bound.is_some()) {
                        ("plain", eval_bounded(&e, &cost)?)
                    } else {
                        ("plain", eval_plain(&e, &cost))
                    }
                }
                EvalObjective::Tv => ("TV", eval_tv(&induced_triple(&e)?, &cost)),
            };
            out.json(&json!({ "objective": name, "cost": a.cost.to_string(), "value": value }))?;
        }
        Cmd::BuildOptimal(a) => {
            let m0: DiscreteMeasure = read_json(&a.p0)?;
            let m1: DiscreteMeasure = read_json(&a.p1)?;
            let cost = build_cost(&a.cost)?;
            match a.theorem {
                BuildTheorem::Tilde => {
                    let sol = solve_mk(&m0, &m1, &cost, None)?;
                    let mut rng = ChaCha8Rng::seed_from_u64(cli.seed);
                    let fixed = parse_set(&a.set)?;
                    let e = build_opt_tilde(&sol, |_, _| match &fixed {
                        Some(s) => s.clone(),
                        None => IntervalSet::random(&mut rng, 3, 0.05),
                    })?;
                    let value = eval_tilde(&e, &cost, NIndex::One)?;
                    out.json(
                        &json!({ "transport_cost": sol.value, "value": value, "ensemble": e }),
                    )?;
                }
                BuildTheorem::Bounded => {
                    let r = a.bound.ok_or_else(|| {
                        anyhow!("--bound is required for the bounded construction")
                    })?;
                    let b = solve_bounded(&m0, &m1, &cost, r)?;
                    out.json(&json!({
                        "value": b.value,
                        "mean_displacement": b.mean_displacement,
                        "ensemble": b.ensemble,
                    }))?;
                }
            }
        }
        Cmd::Oracle(a) => {
            let cost = build_cost(&a.cost)?;
            let r = oracle_min_path(a.x, a.y, &cost, a.objective, a.k, &a.speeds, a.cap, mode)?;
            out.json(&r)?;
        }
        Cmd::Dual(a) => {
            let f: GridFunction = match &a.grid {
                Some(g) => GridFunction::new(read_json(g)?, read_json(&a.f)?)?,
                None => read_json(&a.f)?,
            };
            let m0: DiscreteMeasure = read_json(&a.p0)?;
            let cost = build_cost(&a.cost)?;
            let i = NIndex::from_int(a.index).ok_or_else(|| anyhow!("--index must be 1 or 2"))?;
            let r = verify_control_identity(&m0, &f, &cost, i, mode)?;
            out.json(&r)?;
            if !r.passed() {
                return Ok(ExitCode::from(1));
            }
        }
        Cmd::Verify(a) => {
            let mut cfg = match &a.config {
                Some(p) => read_json::<VerifyConfig>(p)?,
                None => {
                    let theorem = a
                        .theorem
                        .ok_or_else(|| anyhow!("either --config or --theorem is required"))?;
                    let cost = a
                        .cost
                        .clone()
                        .unwrap_or_else(|| "power:0.5".parse().unwrap());
                    let mut c = VerifyConfig::new(theorem, cost);
                    c.seed = cli.seed;
                    c
                }
            };
            if let Some(t) = a.theorem {
                cfg.theorem = t;
            }
            if let Some(c) = a.cost {
                cfg.cost = c;
            }
            if let Some(n) = a.trials {
                cfg.trials = n;
            }
            if let Some(n) = a.n_atoms {
                cfg.n_atoms = n;
            }
            if let Some(d) = a.dim {
                cfg.dim = d;
            }
            if let Some(t) = cli.tol {
                cfg.tolerance = t;
            }
            let report = match nonconvex_ot::harness::verify_with(&cfg, mode) {
                Ok(r) => r,
                Err(
                    e @ (HarnessError::AssumptionRefused { .. } | HarnessError::ConfigInvalid(_)),
                ) => {
                    eprintln!("refused: {e}");
                    return Ok(ExitCode::from(2));
                }
                Err(e) => return Err(e.into()),
            };
            if cli.csv {
                out.write(&emit_plot_data(&report, "margins")?)?;
            } else {
                out.write(&report.to_json())?;
            }
            eprintln!(
                "{}: {}/{} trials passed, margins in [{:e}, {:e}]",
                cfg.theorem,
                report.summary.passed,
                report.summary.trials,
                report.summary.min_margin,
                report.summary.max_margin
            );
            if !report.passed() {
                return Ok(ExitCode::from(1));
            }
        }
        Cmd::Plot(a) => {
            let report: Report = match &a.report {
                Some(p) => read_json(p)?,
                None => {
                    let theorem: Theorem = a
                        .kind
                        .parse()
                        .map_err(|_| anyhow!("--report is required for kind `{}`", a.kind))?;
                    let mut cfg = VerifyConfig::new(theorem, a.cost.clone());
                    cfg.seed = cli.seed;
                    cfg.trials = 1;
                    cfg.dim = 1;
                    if let Some(t) = cli.tol {
                        cfg.tolerance = t;
                    }
                    verify(&cfg)?
                }
            };
            if cli.json {
                out.json(&report.series)?;
            } else {
                out.write(&emit_plot_data(&report, &a.kind)?)?;
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn parse_set(s: &str) -> Result<Option<IntervalSet>> {
    match s.split_once(':') {
        None if s == "full" => Ok(Some(IntervalSet::full())),
        None if s == "random" => Ok(None),
        Some(("prefix", len)) => Ok(Some(IntervalSet::prefix(len.parse()?)?)),
        _ => bail!("unknown set `{s}`; use full, prefix:<len> or random"),
    }
}

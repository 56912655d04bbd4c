use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use stormlet::beliefs::check_pomdp_reachability;
use stormlet::explore::{orchard_model, orchard_parametric, simulate, OrchardConfig, OrchardVariant, Policy, SimulationOptions};
use stormlet::format::sig;
use stormlet::lp::{encode_reachability_lp, export_lp, solve_lp};
use stormlet::model::{apply_scheduler, export_dot, read_model, validate, write_model, Scheduler};
use stormlet::prism::{build_from_prism, parse_prism, BuildOptions};
use stormlet::props::{evaluate_state_formula, Operator};
use stormlet::rational::{parse_decimal, Rational};
use stormlet::reduce::{bisimulation_quotient, BisimulationOptions};
use stormlet::uncertain::{grid_csv, sample_grid, GridSpec, UncertaintyMode};
use stormlet::{
    check_property, parse_property, CheckOptions, CheckResult, Direction, Environment, Error, ExplicitModel, Method,
    PropertyAst, ResultValues,
};

/// Explicit-state probabilistic model checking of MDPs and their relatives.
#[derive(Parser)]
#[command(name = "stormlet", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct EnvArgs {
    /// vi, gauss-seidel, pi or ovi
    #[arg(long, default_value = "vi")]
    method: Method,
    #[arg(long, default_value_t = 1e-6)]
    precision: f64,
    /// Stop on relative instead of absolute difference.
    #[arg(long)]
    relative: bool,
    #[arg(long, default_value_t = 1_000_000)]
    max_iters: usize,
}

impl EnvArgs {
    fn env(&self) -> Environment {
        Environment {
            method: self.method,
            precision: self.precision,
            relative: self.relative,
            max_iterations: self.max_iters,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build an Orchard game model.
    Orchard {
        /// Number of fruit types (1-4) or a comma-separated list of names.
        #[arg(long, default_value = "4")]
        fruits: String,
        #[arg(long, default_value_t = 4)]
        per_tree: u32,
        #[arg(long, default_value_t = 5)]
        raven: u32,
        /// Per-state labels describing trees and raven.
        #[arg(long)]
        diagnostic_labels: bool,
        /// Add the allCherriesPicked label.
        #[arg(long)]
        cherry_label: bool,
        /// mdp, interval:EPS, parametric, pomdp or pomdp-steal:K
        #[arg(long, default_value = "mdp")]
        variant: String,
        #[arg(long, default_value_t = 1_000_000)]
        max_size: usize,
        /// Parametric only: evaluate one point, e.g. p=1/4,q=1/4.
        #[arg(long)]
        at: Option<String>,
        /// Parametric only: grid bounds and number of steps per parameter.
        #[arg(long, default_value = "0.05")]
        grid_lo: String,
        #[arg(long, default_value = "0.45")]
        grid_hi: String,
        #[arg(long, default_value_t = 8)]
        grid_steps: u32,
        #[command(flatten)]
        env: EnvArgs,
        /// Model JSON (grid CSV for the parametric variant).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse, instantiate and build a PRISM model.
    ParsePrism {
        file: PathBuf,
        /// Constant values, e.g. NUM_FRUIT=4,DISTANCE_RAVEN=5.
        #[arg(long = "const")]
        constants: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a property on every state; prints the initial-state value.
    Check {
        model: PathBuf,
        #[arg(long)]
        prop: String,
        #[command(flatten)]
        env: EnvArgs,
        #[arg(long)]
        scheduler_out: Option<PathBuf>,
        #[arg(long)]
        values_out: Option<PathBuf>,
    },
    /// Check a reachability probability on an interval model.
    CheckInterval {
        model: PathBuf,
        #[arg(long)]
        prop: String,
        /// robust or cooperative
        #[arg(long)]
        mode: UncertaintyMode,
        #[command(flatten)]
        env: EnvArgs,
        #[arg(long)]
        values_out: Option<PathBuf>,
    },
    /// Bound a maximal reachability probability on a POMDP via beliefs.
    CheckPomdp {
        model: PathBuf,
        #[arg(long)]
        prop: String,
        #[arg(long, default_value_t = 100_000)]
        belief_cap: usize,
        #[command(flatten)]
        env: EnvArgs,
    },
    /// Strong bisimulation quotient.
    Bisim {
        model: PathBuf,
        /// Labels to preserve, comma-separated ("init" is always kept).
        #[arg(long)]
        keep_labels: Option<String>,
        /// Also preserve all reward structures.
        #[arg(long)]
        keep_rewards: bool,
        /// Distinguish choices by action name.
        #[arg(long)]
        keep_actions: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Block index per original state, as JSON.
        #[arg(long)]
        partition_out: Option<PathBuf>,
    },
    /// Write the maximal-reachability LP in CPLEX LP format.
    ExportLp {
        model: PathBuf,
        #[arg(long)]
        prop: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the maximal-reachability LP with the built-in simplex.
    SolveLp {
        model: PathBuf,
        #[arg(long)]
        prop: String,
        #[arg(long)]
        values_out: Option<PathBuf>,
    },
    /// Induced chain of a model under a scheduler.
    ApplyScheduler {
        model: PathBuf,
        #[arg(long)]
        scheduler: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Random runs under a scheduler (uniformly random choices without one).
    Simulate {
        model: PathBuf,
        #[arg(long)]
        scheduler: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        runs: usize,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        /// Traces as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Graphviz rendering, optionally annotated with a result and scheduler.
    ExportDot {
        model: PathBuf,
        #[arg(long)]
        prop: Option<String>,
        #[arg(long)]
        scheduler: Option<PathBuf>,
        #[command(flatten)]
        env: EnvArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summary and validation report.
    Info { model: PathBuf },
}

/// An error with the process exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

const INPUT: u8 = 2;
const CHECKING: u8 = 3;

fn input(e: impl Into<anyhow::Error>) -> Failure {
    Failure { code: INPUT, error: e.into() }
}

fn checking(e: impl Into<anyhow::Error>) -> Failure {
    Failure { code: CHECKING, error: e.into() }
}

/// Library errors while checking: malformed inputs are still input errors.
fn classify(e: Error) -> Failure {
    match e {
        Error::Parse { .. } | Error::Semantic(_) | Error::Format { .. } | Error::Model(_) | Error::Config(_) => input(e),
        _ => checking(e),
    }
}

type Outcome<T = ()> = std::result::Result<T, Failure>;

fn read_text(path: &Path) -> Outcome<String> {
    fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(input)
}

fn write_text(path: &Path, text: &str) -> Outcome {
    fs::write(path, text)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(input)
}

fn load_model(path: &Path) -> Outcome<ExplicitModel> {
    read_model(&read_text(path)?)
        .with_context(|| format!("in {}", path.display()))
        .map_err(input)
}

fn load_scheduler(path: &Path) -> Outcome<Scheduler> {
    serde_json::from_str(&read_text(path)?)
        .with_context(|| format!("bad scheduler file {}", path.display()))
        .map_err(input)
}

fn property(text: &str) -> Outcome<PropertyAst> {
    parse_property(text).map_err(classify)
}

fn parse_rational(text: &str) -> anyhow::Result<Rational> {
    let parsed = match text.split_once('/') {
        Some((n, d)) => parse_decimal(n).zip(parse_decimal(d)).filter(|(_, d)| *d != Rational::from_integer(0.into())).map(|(n, d)| n / d),
        None => parse_decimal(text),
    };
    parsed.with_context(|| format!("not a number: \"{text}\""))
}

/// `K=V,K=V` with rational values.
fn bindings(text: &str) -> anyhow::Result<BTreeMap<String, Rational>> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|kv| {
            let (k, v) = kv.split_once('=').with_context(|| format!("expected NAME=VALUE, got \"{kv}\""))?;
            Ok((k.trim().to_string(), parse_rational(v.trim())?))
        })
        .collect()
}

fn values_json(values: &ResultValues) -> Value {
    let num = |x: f64| if x.is_finite() { json!(x) } else { json!(sig(x, 16)) };
    match values {
        ResultValues::Scalar(v) => Value::Array(v.iter().map(|&x| num(x)).collect()),
        ResultValues::Interval(v) => Value::Array(v.iter().map(|&(l, u)| json!([num(l), num(u)])).collect()),
    }
}

fn variant(text: &str) -> anyhow::Result<OrchardVariant> {
    let (name, arg) = text.split_once(':').unwrap_or((text, ""));
    Ok(match (name, arg.is_empty()) {
        ("mdp", true) => OrchardVariant::Mdp,
        ("parametric", true) => OrchardVariant::Parametric,
        ("pomdp", true) => OrchardVariant::Pomdp,
        ("interval", false) => OrchardVariant::Interval(arg.parse().with_context(|| format!("bad interval width \"{arg}\""))?),
        ("pomdp-steal", false) => OrchardVariant::PomdpSteal(arg.parse().with_context(|| format!("bad steal count \"{arg}\""))?),
        _ => anyhow::bail!("unknown variant \"{text}\" (expected mdp, interval:EPS, parametric, pomdp or pomdp-steal:K)"),
    })
}

fn fruit_types(text: &str) -> anyhow::Result<Vec<String>> {
    let all = OrchardConfig::full().fruit_types;
    if let Ok(n) = text.parse::<usize>() {
        anyhow::ensure!((1..=all.len()).contains(&n), "--fruits takes 1 to {} types", all.len());
        return Ok(all[..n].to_vec());
    }
    Ok(text.split(',').map(|s| s.trim().to_uppercase()).collect())
}

/// Goal set of a `P... [F φ]` property, for the LP and belief commands.
fn reach_goal(model: &ExplicitModel, prop: &PropertyAst) -> Outcome<stormlet::BitVector> {
    if prop.operator != Operator::Probability || prop.reward_bound.is_some() {
        return Err(checking(anyhow::anyhow!("expected an unbounded reachability probability, got \"{prop}\"")));
    }
    if prop.direction == Some(Direction::Min) {
        return Err(checking(Error::Unsupported("minimal probabilities here; use Pmax".into())));
    }
    evaluate_state_formula(model, &prop.formula).map_err(classify)
}

fn report(model: &ExplicitModel, prop: &PropertyAst, r: &CheckResult) {
    let s = model.initial_state();
    println!("Result (for initial states): {}", r.values.describe(s));
    if let Some(holds) = prop.holds(r.at(s)) {
        println!("Property holds: {holds}");
    }
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Orchard {
            fruits,
            per_tree,
            raven,
            diagnostic_labels,
            cherry_label,
            variant: v,
            max_size,
            at,
            grid_lo,
            grid_hi,
            grid_steps,
            env,
            out,
        } => {
            let config = OrchardConfig {
                fruit_types: fruit_types(&fruits).map_err(input)?,
                num_fruits: per_tree,
                raven_distance: raven,
                diagnostic_labels,
                cherry_label,
                variant: variant(&v).map_err(input)?,
                max_size,
            };
            if config.variant == OrchardVariant::Parametric {
                let pm = orchard_parametric(&config).map_err(input)?;
                println!("parametric model with {} states, parameters p, q", pm.num_states());
                let env = env.env();
                let grid = match at {
                    Some(point) => GridSpec {
                        axes: bindings(&point).map_err(input)?.into_iter().map(|(k, v)| (k, vec![v])).collect(),
                    },
                    None => {
                        let lo = parse_rational(&grid_lo).map_err(input)?;
                        let hi = parse_rational(&grid_hi).map_err(input)?;
                        GridSpec::uniform(&["p", "q"], lo, hi, grid_steps)
                    }
                };
                let rows = sample_grid(&pm, "PlayersWon", Direction::Max, &grid, &env).map_err(classify)?;
                if let [row] = rows.as_slice() {
                    match &row.value {
                        Ok(x) => println!("Result (for initial states): {}", sig(*x, 16)),
                        Err(e) => return Err(input(anyhow::anyhow!("invalid parameter point: {e}"))),
                    }
                }
                if let Some(path) = out {
                    write_text(&path, &grid_csv(&rows))?;
                }
                return Ok(());
            }
            let model = orchard_model(&config).map_err(input)?;
            println!("{}", model.summary());
            if let Some(path) = out {
                write_text(&path, &write_model(&model))?;
            }
        }
        Command::ParsePrism { file, constants, out } => {
            let program = parse_prism(&read_text(&file)?)
                .with_context(|| format!("in {}", file.display()))
                .map_err(input)?;
            let consts = bindings(constants.as_deref().unwrap_or("")).map_err(input)?;
            let program = program.instantiate_constants(&consts).map_err(input)?;
            let model = build_from_prism(&program, &BuildOptions::default()).map_err(input)?;
            println!("Model with {} states and {} transitions", model.num_states(), model.num_transitions());
            if let Some(path) = out {
                write_text(&path, &write_model(&model))?;
            }
        }
        Command::Check { model, prop, env, scheduler_out, values_out } => {
            let m = load_model(&model)?;
            let p = property(&prop)?;
            let options = CheckOptions {
                env: env.env(),
                extract_scheduler: scheduler_out.is_some(),
                uncertainty: None,
            };
            let r = check_property(&m, &p, &options).map_err(classify)?;
            report(&m, &p, &r);
            if let Some(path) = values_out {
                write_text(&path, &values_json(&r.values).to_string())?;
            }
            if let Some(path) = scheduler_out {
                let sched = r
                    .scheduler
                    .as_ref()
                    .ok_or_else(|| checking(anyhow::anyhow!("no scheduler is extracted for this property")))?;
                write_text(&path, &serde_json::to_string(sched).expect("scheduler serializes"))?;
            }
        }
        Command::CheckInterval { model, prop, mode, env, values_out } => {
            let m = load_model(&model)?;
            let p = property(&prop)?;
            let options = CheckOptions {
                env: env.env(),
                extract_scheduler: false,
                uncertainty: Some(mode),
            };
            let r = check_property(&m, &p, &options).map_err(classify)?;
            report(&m, &p, &r);
            if let Some(path) = values_out {
                write_text(&path, &values_json(&r.values).to_string())?;
            }
        }
        Command::CheckPomdp { model, prop, belief_cap, env } => {
            let m = load_model(&model)?;
            let p = property(&prop)?;
            let goal = reach_goal(&m, &p)?;
            let r = check_pomdp_reachability(&m, &goal, Direction::Max, &env.env(), belief_cap).map_err(classify)?;
            println!("Explored {} beliefs ({} on the frontier)", r.beliefs, r.frontier);
            if let Some(notice) = &r.notice {
                eprintln!("note: {notice}");
            }
            println!("Result in [{}, {}]", sig(r.lower, 16), sig(r.upper, 16));
        }
        Command::Bisim { model, keep_labels, keep_rewards, keep_actions, out, partition_out } => {
            let m = load_model(&model)?;
            let options = BisimulationOptions {
                labels: keep_labels
                    .as_deref()
                    .unwrap_or("")
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from)
                    .collect(),
                rewards: keep_rewards,
                action_labels: keep_actions,
            };
            let (q, partition) = bisimulation_quotient(&m, &options).map_err(classify)?;
            println!(
                "Quotient with {} states and {} transitions (from {} states and {} transitions)",
                q.num_states(),
                q.num_transitions(),
                m.num_states(),
                m.num_transitions()
            );
            if let Some(path) = out {
                write_text(&path, &write_model(&q))?;
            }
            if let Some(path) = partition_out {
                write_text(&path, &partition.to_json())?;
            }
        }
        Command::ExportLp { model, prop, out } => {
            let m = load_model(&model)?;
            let goal = reach_goal(&m, &property(&prop)?)?;
            let lp = encode_reachability_lp(&m, &goal).map_err(classify)?;
            let text = export_lp(&lp);
            match out {
                Some(path) => {
                    write_text(&path, &text)?;
                    println!("LP with {} variables and {} constraints", lp.num_vars, lp.constraints.len());
                }
                None => print!("{text}"),
            }
        }
        Command::SolveLp { model, prop, values_out } => {
            let m = load_model(&model)?;
            let goal = reach_goal(&m, &property(&prop)?)?;
            let lp = encode_reachability_lp(&m, &goal).map_err(classify)?;
            let x = solve_lp(&lp).map_err(classify)?;
            println!("Result (for initial states): {}", sig(x[m.initial_state()], 16));
            if let Some(path) = values_out {
                write_text(&path, &values_json(&ResultValues::Scalar(x)).to_string())?;
            }
        }
        Command::ApplyScheduler { model, scheduler, out } => {
            let m = load_model(&model)?;
            let sched = load_scheduler(&scheduler)?;
            let induced = apply_scheduler(&m, &sched).map_err(classify)?;
            println!("{}", induced.summary());
            if let Some(path) = out {
                write_text(&path, &write_model(&induced))?;
            }
        }
        Command::Simulate { model, scheduler, seed, runs, steps, out } => {
            let m = load_model(&model)?;
            let policy = match scheduler {
                Some(path) => Policy::Scheduler(load_scheduler(&path)?),
                None => Policy::UniformRandom,
            };
            let options = SimulationOptions { seed, max_steps: steps, runs };
            let traces = simulate(&m, &policy, &options).map_err(classify)?;
            println!("{} runs", traces.len());
            for (name, bv) in &m.labels {
                let hits = traces.iter().filter(|t| bv.get(t.last_state())).count();
                if hits > 0 && name != "init" {
                    println!("  ended in {name}: {hits} ({})", sig(hits as f64 / traces.len() as f64, 16));
                }
            }
            if let Some(path) = out {
                write_text(&path, &serde_json::to_string(&traces).expect("traces serialize"))?;
            }
        }
        Command::ExportDot { model, prop, scheduler, env, out } => {
            let m = load_model(&model)?;
            let result = match prop {
                Some(text) => {
                    let options = CheckOptions { env: env.env(), ..CheckOptions::default() };
                    Some(check_property(&m, &property(&text)?, &options).map_err(classify)?)
                }
                None => None,
            };
            let sched = scheduler.as_deref().map(load_scheduler).transpose()?;
            if let Some(s) = &sched {
                s.check(&m).map_err(classify)?;
            }
            let dot = export_dot(&m, result.as_ref(), sched.as_ref());
            match out {
                Some(path) => write_text(&path, &dot)?,
                None => print!("{dot}"),
            }
        }
        Command::Info { model } => {
            let m = load_model(&model)?;
            println!("{}", m.summary());
            let violations = validate(&m);
            if violations.is_empty() {
                println!("valid");
            } else {
                for v in &violations {
                    println!("{v}");
                }
                return Err(input(anyhow::anyhow!("{} validation problem(s)", violations.len())));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, error }) => {
            eprintln!("error: {error:#}");
            ExitCode::from(code)
        }
    }
}

//! `memdp`: command-line front end for almost-sure and limit-sure analysis,
//! strategy synthesis, the gap solver and simulation.

mod dot;

use std::collections::BTreeSet;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use memdp::examples::{by_name, FAMILIES};
use memdp::limit_sure::synthesize_ls_strategy_from;
use memdp::numeric::{fmt_rat, parse_rat};
use memdp::quantitative::{build_gap_constraints, GapBudget};
use memdp::strategy::StrategyAutomaton;
use memdp::{
    as_objective, encode_objective, evaluate_exact, ls_objective, simulate, solve_gap, synthesize_as_strategy, EnvSet,
    GapAnswer, Memdp, ModelError, Objective, QuantError, Rat, Region, StrategyError,
};
use serde_json::{json, Map, Value};
use thiserror::Error;

#[derive(Parser)]
#[command(name = "memdp", version, about = "Analysis of multiple-environment MDPs")]
struct Cli {
    /// Memory cap for synthesized strategies.
    #[arg(long, global = true, env = "MEMDP_MEM_CAP", default_value_t = memdp::strategy::DEFAULT_MEMORY_CAP)]
    mem_cap: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Dot,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    As,
    Ls,
}

#[derive(Args)]
struct Query {
    /// Model file in JSON.
    model: PathBuf,
    /// Comma-separated environments (default: all).
    #[arg(long, value_delimiter = ',')]
    envs: Vec<String>,
    /// Reachability objective on these states instead of the priorities.
    #[arg(long, value_delimiter = ',', conflicts_with = "safe")]
    reach: Vec<String>,
    /// Safety objective on these states instead of the priorities.
    #[arg(long, value_delimiter = ',')]
    safe: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Almost-sure winning region.
    CheckAs {
        #[command(flatten)]
        query: Query,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Limit-sure winning region.
    CheckLs {
        #[command(flatten)]
        query: Query,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Winning strategy as an explicit Moore machine.
    Synthesize {
        #[command(flatten)]
        query: Query,
        #[arg(long, value_enum, default_value = "as")]
        mode: Mode,
        /// Error bound for limit-sure strategies.
        #[arg(long, default_value = "1/10")]
        eps: String,
        /// Start state (default: the whole region).
        #[arg(long)]
        from: Option<String>,
        /// Evaluate the strategy exactly from every start state.
        #[arg(long)]
        certify: bool,
    },
    /// Bounded-memory search for a strategy with value at least alpha - eps.
    Gap {
        #[command(flatten)]
        query: Query,
        #[arg(long)]
        alpha: String,
        #[arg(long, default_value = "1/100")]
        eps: String,
        /// Largest number of memory states tried.
        #[arg(long, default_value_t = 1)]
        mem: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 16)]
        restarts: usize,
        #[arg(long, default_value_t = 400)]
        iterations: usize,
        /// Also write the constraint system (reachability objectives only) as SMT-LIB.
        #[arg(long)]
        smt: Option<PathBuf>,
    },
    /// Monte-Carlo runs of a synthesized strategy in one environment.
    Simulate {
        #[command(flatten)]
        query: Query,
        /// Environment to run in.
        #[arg(long)]
        env: String,
        #[arg(long, value_enum, default_value = "as")]
        mode: Mode,
        #[arg(long, default_value = "1/10")]
        eps: String,
        #[arg(long, default_value_t = 1000)]
        runs: u64,
        #[arg(long, default_value_t = 500)]
        horizon: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Start state (default: the model's initial state).
        #[arg(long)]
        from: Option<String>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Prints one of the built-in example models.
    GenExample {
        /// One of fig3, fig4, fig5, missing-card, duplicate-card, pennies, one-shot.
        family: String,
        #[arg(long, default_value_t = 3)]
        cards: usize,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Model(String),
    #[error("{0}")]
    Budget(String),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Analysis(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Model(_) => 2,
            CliError::Budget(_) => 3,
            CliError::Usage(_) | CliError::Analysis(_) => 1,
        }
    }

    fn tag(&self) -> &'static str {
        match self {
            CliError::Model(_) => "model",
            CliError::Budget(_) => "budget",
            CliError::Usage(_) => "usage",
            CliError::Analysis(_) => "analysis",
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Model(e.to_string())
    }
}

impl From<StrategyError> for CliError {
    fn from(e: StrategyError) -> Self {
        match e {
            StrategyError::MemoryBudgetExceeded { .. } => CliError::Budget(e.to_string()),
            _ => CliError::Analysis(e.to_string()),
        }
    }
}

impl From<QuantError> for CliError {
    fn from(e: QuantError) -> Self {
        match e {
            QuantError::Strategy(s) => s.into(),
            other => CliError::Analysis(other.to_string()),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

struct Loaded {
    model: Memdp,
    k: EnvSet,
    objective: Objective,
}

fn load(q: &Query) -> Result<Loaded> {
    let text = std::fs::read_to_string(&q.model)
        .map_err(|e| CliError::Model(format!("cannot read {}: {e}", q.model.display())))?;
    let model = Memdp::from_json_str(&text)?;
    let k = if q.envs.is_empty() {
        model.all_envs()
    } else {
        let mut k = EnvSet::EMPTY;
        for name in &q.envs {
            k.insert(model.env_id(name).ok_or_else(|| ModelError::UnknownEnvironment(name.clone()))?);
        }
        k
    };
    let states = |names: &[String]| -> Result<BTreeSet<usize>> {
        names
            .iter()
            .map(|n| model.state_id(n).ok_or_else(|| ModelError::UnknownState(n.clone()).into()))
            .collect()
    };
    let objective = if !q.reach.is_empty() {
        Objective::Reach(states(&q.reach)?)
    } else if !q.safe.is_empty() {
        Objective::Safe(states(&q.safe)?)
    } else {
        Objective::Parity
    };
    Ok(Loaded { model, k, objective })
}

fn rational(s: &str, what: &str, allow_one: bool) -> Result<Rat> {
    let r = parse_rat(s).ok_or_else(|| CliError::Usage(format!("{what}: cannot parse {s:?}")))?;
    let one = Rat::from_integer(1.into());
    let ok = r > Rat::from_integer(0.into()) && (r < one || (allow_one && r == one));
    if !ok {
        return Err(CliError::Usage(format!("{what} must lie in (0, 1{}", if allow_one { "]" } else { ")" })));
    }
    Ok(r)
}

fn env_names(m: &Memdp, k: EnvSet) -> Value {
    json!(k.iter().map(|e| m.env_name(e)).collect::<Vec<_>>())
}

fn region_json(command: &str, l: &Loaded, r: &Region) -> Value {
    let m = &l.model;
    let mut states = Map::new();
    for q in 0..m.num_states() {
        states.insert(m.state_name(q).to_string(), json!(r.contains(q)));
    }
    json!({
        "command": command,
        "objective": r.objective,
        "environments": env_names(m, l.k),
        "region": r.names(m),
        "states": states,
    })
}

fn only(format: Format, allowed: &[Format]) -> Result<()> {
    if allowed.contains(&format) {
        Ok(())
    } else {
        Err(CliError::Usage(format!("format {} is not available for this command", format!("{format:?}").to_lowercase())))
    }
}

fn strategy_for(
    l: &Loaded,
    mode: Mode,
    eps: &str,
    starts: &[usize],
    cap: usize,
) -> Result<(Memdp, StrategyAutomaton)> {
    let enc = encode_objective(&l.model, &l.objective);
    let sigma = match mode {
        Mode::As => {
            let region = Region {
                states: starts.iter().copied().collect(),
                context: l.k,
                objective: l.objective.tag(),
            };
            synthesize_as_strategy(&enc, l.k, &region, cap)?
        }
        Mode::Ls => {
            let eps = rational(eps, "eps", false)?;
            synthesize_ls_strategy_from(&enc, l.k, &eps, starts, cap)?
        }
    };
    Ok((enc, sigma))
}

fn start_states(l: &Loaded, mode: Mode, from: &Option<String>) -> Result<Vec<usize>> {
    match from {
        Some(name) => Ok(vec![l
            .model
            .state_id(name)
            .ok_or_else(|| ModelError::UnknownState(name.clone()))?]),
        None => {
            let r = match mode {
                Mode::As => as_objective(&l.model, l.k, &l.objective),
                Mode::Ls => ls_objective(&l.model, l.k, &l.objective),
            };
            Ok(r.states.into_iter().collect())
        }
    }
}

fn run(cli: Cli) -> Result<String> {
    let cap = cli.mem_cap;
    match cli.command {
        Command::CheckAs { query, format } => {
            only(format, &[Format::Json, Format::Dot])?;
            let l = load(&query)?;
            let r = as_objective(&l.model, l.k, &l.objective);
            Ok(match format {
                Format::Dot => dot::render(&l.model, l.k, Some(&r)),
                _ => pretty(&region_json("check-as", &l, &r)),
            })
        }
        Command::CheckLs { query, format } => {
            only(format, &[Format::Json, Format::Dot])?;
            let l = load(&query)?;
            let r = ls_objective(&l.model, l.k, &l.objective);
            Ok(match format {
                Format::Dot => dot::render(&l.model, l.k, Some(&r)),
                _ => pretty(&region_json("check-ls", &l, &r)),
            })
        }
        Command::Synthesize {
            query,
            mode,
            eps,
            from,
            certify,
        } => {
            let l = load(&query)?;
            let starts = start_states(&l, mode, &from)?;
            let (enc, sigma) = strategy_for(&l, mode, &eps, &starts, cap)?;
            let m = &l.model;
            let mut out = json!({
                "command": "synthesize",
                "mode": if mode == Mode::As { "almost-sure" } else { "limit-sure" },
                "objective": l.objective.tag(),
                "environments": env_names(m, l.k),
                "start_states": starts.iter().map(|&q| m.state_name(q)).collect::<Vec<_>>(),
                "memory_states": sigma.num_memory(),
                "strategy": sigma.to_json(&enc),
            });
            if mode == Mode::Ls {
                out["eps"] = json!(eps);
            }
            if certify {
                let mut values = Map::new();
                for &q in &starts {
                    let v = evaluate_exact(&enc, l.k, &sigma, q)?;
                    let per: Map<String, Value> = v
                        .per_env
                        .iter()
                        .map(|x| (m.env_name(x.env).to_string(), json!(fmt_rat(&x.value))))
                        .collect();
                    values.insert(m.state_name(q).to_string(), Value::Object(per));
                }
                out["values"] = Value::Object(values);
            }
            Ok(pretty(&out))
        }
        Command::Gap {
            query,
            alpha,
            eps,
            mem,
            seed,
            restarts,
            iterations,
            smt,
        } => {
            let l = load(&query)?;
            let alpha = rational(&alpha, "alpha", true)?;
            let eps = rational(&eps, "eps", true)?;
            if mem == 0 {
                return Err(CliError::Usage("mem must be at least 1".into()));
            }
            let m = l.model.sub_envs(l.k);
            if let Some(path) = smt {
                let target = match &l.objective {
                    Objective::Reach(t) => t.clone(),
                    _ => return Err(CliError::Usage("--smt needs a --reach objective".into())),
                };
                let enc = encode_objective(&m, &l.objective);
                let sys = build_gap_constraints(&enc, &vec![target; enc.num_envs()], mem, &alpha, &eps, None, None);
                std::fs::write(&path, sys.to_smtlib())
                    .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))?;
            }
            let budget = GapBudget {
                restarts,
                iterations,
                seed,
                ..GapBudget::default()
            };
            let ans = solve_gap(&m, &l.objective, &alpha, &eps, mem, &budget);
            let enc = encode_objective(&m, &l.objective);
            let out = match ans {
                GapAnswer::Yes {
                    strategy,
                    values,
                    memory,
                } => json!({
                    "command": "gap",
                    "answer": "yes",
                    "alpha": fmt_rat(&alpha),
                    "eps": fmt_rat(&eps),
                    "memory": memory,
                    "values": values.iter().enumerate().map(|(e, v)| (m.env_name(e).to_string(), json!(fmt_rat(v)))).collect::<Map<_, _>>(),
                    "strategy": strategy.to_json(&enc),
                }),
                GapAnswer::NoWithinBudget {
                    mem_cap, candidates, ..
                } => json!({
                    "command": "gap",
                    "answer": "no-within-budget",
                    "alpha": fmt_rat(&alpha),
                    "eps": fmt_rat(&eps),
                    "mem_cap": mem_cap,
                    "candidates": candidates,
                    "restarts": restarts,
                    "iterations": iterations,
                    "seed": seed,
                }),
            };
            Ok(pretty(&out))
        }
        Command::Simulate {
            query,
            env,
            mode,
            eps,
            runs,
            horizon,
            seed,
            from,
            format,
        } => {
            only(format, &[Format::Json, Format::Csv])?;
            if horizon == 0 {
                return Err(CliError::Usage("horizon must be at least 1".into()));
            }
            let l = load(&query)?;
            let e = l.model.env_id(&env).ok_or_else(|| ModelError::UnknownEnvironment(env.clone()))?;
            if !l.k.contains(e) {
                return Err(CliError::Usage(format!("environment {env} is not among --envs")));
            }
            let q0 = match &from {
                Some(name) => l.model.state_id(name).ok_or_else(|| ModelError::UnknownState(name.clone()))?,
                None => l.model.initial(),
            };
            let (enc, sigma) = strategy_for(&l, mode, &eps, &[q0], cap)?;
            let stats = simulate(&enc, e, &sigma, q0, runs, horizon, seed)?;
            Ok(match format {
                Format::Csv => stats.to_csv(&enc),
                _ => pretty(&json!({
                    "command": "simulate",
                    "environment": env,
                    "start": l.model.state_name(q0),
                    "runs": stats.runs,
                    "wins": stats.wins,
                    "losses": stats.losses,
                    "undecided": stats.undecided,
                    "win_fraction": stats.win_fraction(),
                    "undecided_fraction": stats.undecided_fraction(),
                    "seed": seed,
                    "horizon": horizon,
                })),
            })
        }
        Command::GenExample { family, cards, format } => {
            only(format, &[Format::Json, Format::Dot])?;
            if family.ends_with("card") && cards < 2 {
                return Err(CliError::Usage("card families need --cards >= 2".into()));
            }
            let m = by_name(&family, cards).ok_or_else(|| {
                CliError::Usage(format!("unknown family {family:?}; expected one of {}", FAMILIES.join(", ")))
            })?;
            Ok(match format {
                Format::Dot => dot::render(&m, m.all_envs(), None),
                _ => pretty(&m.to_json()),
            })
        }
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            match stdout.write_all(out.as_bytes()).and_then(|_| stdout.flush()) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("{}", json!({"error": "io", "message": e.to_string()}));
                    ExitCode::FAILURE
                }
            }
        }
        Err(e) => {
            eprintln!("{}", json!({"error": e.tag(), "message": e.to_string()}));
            ExitCode::from(e.exit_code())
        }
    }
}

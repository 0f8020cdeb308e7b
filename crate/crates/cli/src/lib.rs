//! The `ssg` command-line tool.
//!
//! Exit codes: 0 on success or convergence, 2 when a solver stopped at its
//! iteration or trial limit (bounds are still printed), 1 on any error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use ssg_core::bench::{bench_game, BenchRow, SolverConfig};
use ssg_core::builtins::{builtin_from_spec, BUILTIN_NAMES};
use ssg_core::format::{parse_model, parse_rational, serialize_model};
use ssg_core::generate::{random_game, GeneratorParams};
use ssg_core::model::{validate_game, StochasticGame};
use ssg_core::oracle::{check_bounds, solve_exact, strategy_pair_count, DEFAULT_BUDGET};
use ssg_core::report::{fmt_sig, Method, SolveReport, StopReason};
use ssg_core::{Execution, SuccessorPolicy};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_LIMIT: i32 = 2;

const MAX_DEFLATE_EVERY: u64 = 1_000_000;

#[derive(Parser, Debug)]
#[command(name = "ssg", version, about = "Guaranteed-precision reachability values for simple stochastic games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse a model and report every violated well-formedness condition.
    Validate {
        /// Model file or builtin (`name` or `name:p1,p2`).
        model: String,
    },
    /// Solve a model and print the bounds at the initial state.
    Solve(SolveArgs),
    /// Write a seeded random game.
    Gen(GenArgs),
    /// Write a builtin game in the text format.
    Builtin {
        name: String,
        /// Parameters, e.g. `3/10 6/10` for fig3.
        params: Vec<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run models × methods repeatedly and print a CSV table.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Successor {
    Transition,
    Gap,
}

#[derive(Args, Debug)]
struct SolveArgs {
    model: String,
    #[arg(long, default_value = "bvi", value_parser = parse_method)]
    method: Method,
    /// Precision ε (δ for `vi`).
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,
    #[arg(long, default_value_t = 1)]
    deflate_every: u64,
    /// Iteration limit (trial limit for `brtdp`).
    #[arg(long)]
    max_iters: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the per-iteration (or per-trial) CSV trace here.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Verify the final bounds against the exact oracle.
    #[arg(long)]
    oracle_check: bool,
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    oracle_budget: u128,
    /// Stop only when every state has converged, not just the initial one.
    #[arg(long)]
    all_states: bool,
    #[arg(long, value_enum, default_value = "transition")]
    successor: Successor,
    /// Keep simulating through states whose bounds already agree.
    #[arg(long)]
    no_converged_stop: bool,
    /// Use the data-parallel Bellman sweep.
    #[arg(long)]
    parallel: bool,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long)]
    states: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    max_actions: usize,
    #[arg(long, default_value_t = 3)]
    max_branching: usize,
    #[arg(long, default_value_t = 0.5)]
    minimizer_fraction: f64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(required = true)]
    models: Vec<String>,
    /// Comma-separated methods.
    #[arg(long, default_value = "bvi,brtdp", value_delimiter = ',', value_parser = parse_method)]
    methods: Vec<Method>,
    #[arg(long, default_value_t = 20)]
    reps: usize,
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,
    #[arg(long, default_value_t = 1)]
    deflate_every: u64,
    #[arg(long)]
    max_iters: Option<u64>,
    /// Base seed; BRTDP repetition `i` uses `seed + i`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Run repetitions one after another instead of in parallel.
    #[arg(long)]
    sequential: bool,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse()
}

/// Loads a model from a file, or from a builtin spec when no such file exists.
pub fn load_model(spec: &str) -> Result<StochasticGame> {
    let path = Path::new(spec);
    if path.is_file() {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {spec}"))?;
        return parse_model(&text).with_context(|| spec.to_string());
    }
    let name = spec.split(':').next().unwrap_or(spec);
    if BUILTIN_NAMES.contains(&name) {
        return Ok(builtin_from_spec(spec)?);
    }
    bail!("cannot read model `{spec}`: no such file and no builtin of that name")
}

fn write_output(path: Option<&Path>, text: &str, out: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) if p.as_os_str() != "-" => fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        _ => out.write_all(text.as_bytes()).context("cannot write to standard output"),
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        bail!("--epsilon must be a positive number, got {epsilon}");
    }
    Ok(())
}

fn check_deflate_every(n: u64) -> Result<()> {
    if !(1..=MAX_DEFLATE_EVERY).contains(&n) {
        bail!("--deflate-every must lie in 1..={MAX_DEFLATE_EVERY}, got {n}");
    }
    Ok(())
}

fn describe(game: &StochasticGame) -> String {
    let actions: usize = game.states().map(|s| game.actions(s).len()).sum();
    format!("{} states, {} actions, {} transitions", game.len(), actions, game.transition_count())
}

fn cmd_validate(model: &str, out: &mut dyn Write) -> Result<i32> {
    let game = load_model(model)?;
    let report = validate_game(&game);
    if !report.is_empty() {
        bail!("{report}");
    }
    writeln!(out, "{model}: valid ({})", describe(&game))?;
    Ok(EXIT_OK)
}

fn solver_config(args: &SolveArgs) -> SolverConfig {
    let mut c = SolverConfig::new(args.method);
    c.epsilon = args.epsilon;
    c.deflate_every = args.deflate_every;
    if let Some(k) = args.max_iters {
        c.max_iters = k;
    }
    c.seed = args.seed;
    c.successor = match args.successor {
        Successor::Transition => SuccessorPolicy::Transition,
        Successor::Gap => SuccessorPolicy::GapWeighted,
    };
    c.stop_at_converged = !args.no_converged_stop;
    c.all_states = args.all_states;
    c.trace = args.trace.is_some();
    c.exec = if args.parallel { Execution::best_available() } else { Execution::Sequential };
    c
}

fn cmd_solve(args: &SolveArgs, out: &mut dyn Write) -> Result<i32> {
    check_epsilon(args.epsilon)?;
    check_deflate_every(args.deflate_every)?;
    let game = load_model(&args.model)?;
    let oracle = if args.oracle_check {
        let pairs = strategy_pair_count(&game);
        if pairs > args.oracle_budget {
            bail!(
                "refusing --oracle-check: the game needs {pairs} strategy pairs, the oracle budget is {}",
                args.oracle_budget
            );
        }
        Some(solve_exact(&game, args.oracle_budget)?)
    } else {
        None
    };

    let report = solver_config(args).run(&game);
    if let (Some(path), Some(trace)) = (&args.trace, &report.trace) {
        fs::write(path, trace.to_csv()).with_context(|| format!("cannot write {}", path.display()))?;
    }
    print_report(&game, &args.model, &report, out)?;

    if let Some(v) = &oracle {
        let s0 = game.initial();
        let exact = &v[s0];
        let violations = check_bounds(&report.bounds, v, 1e-9);
        writeln!(out, "oracle: V(s0) = {exact} ≈ {}", fmt_sig(v.to_f64()[s0]))?;
        if !violations.is_empty() {
            for x in &violations {
                writeln!(
                    out,
                    "oracle violation at {}: L={} V={} U={}",
                    game.name(x.state),
                    fmt_sig(x.lower),
                    fmt_sig(x.value),
                    fmt_sig(x.upper)
                )?;
            }
            writeln!(out, "{}", report.summary_line())?;
            bail!("oracle check failed at {} state(s)", violations.len());
        }
        writeln!(out, "oracle: bounds verified at every state")?;
    }
    writeln!(out, "{}", report.summary_line())?;
    Ok(match report.stop {
        StopReason::Converged | StopReason::DeltaReached => EXIT_OK,
        StopReason::IterationLimit => EXIT_LIMIT,
    })
}

fn print_report(game: &StochasticGame, model: &str, r: &SolveReport, out: &mut dyn Write) -> Result<()> {
    writeln!(out, "model: {model} ({})", describe(game))?;
    writeln!(out, "initial state: {}", game.name(game.initial()))?;
    let status = match r.stop {
        StopReason::Converged => format!("converged after {} {}", r.iterations, unit(r.method)),
        StopReason::DeltaReached => {
            format!("change below {} after {} iterations (no error guarantee)", fmt_sig(r.epsilon), r.iterations)
        }
        StopReason::IterationLimit => format!("limit reached after {} {}, not converged", r.iterations, unit(r.method)),
    };
    writeln!(out, "method: {}  status: {status}", r.method)?;
    writeln!(out, "L(s0) = {}", fmt_sig(r.lower()))?;
    writeln!(out, "U(s0) = {}", fmt_sig(r.upper()))?;
    writeln!(out, "gap   = {}", fmt_sig(r.gap()))?;
    Ok(())
}

fn unit(m: Method) -> &'static str {
    if m == Method::Brtdp {
        "trials"
    } else {
        "iterations"
    }
}

fn cmd_gen(args: &GenArgs, out: &mut dyn Write) -> Result<i32> {
    if args.states == 0 || args.max_actions == 0 || args.max_branching == 0 {
        bail!("--states, --max-actions and --max-branching must be positive");
    }
    if !(0.0..=1.0).contains(&args.minimizer_fraction) {
        bail!("--minimizer-fraction must lie in [0,1]");
    }
    let params = GeneratorParams {
        state_count: args.states,
        max_actions: args.max_actions,
        max_branching: args.max_branching,
        minimizer_fraction: args.minimizer_fraction,
        seed: args.seed,
        ..GeneratorParams::default()
    };
    write_output(args.output.as_deref(), &serialize_model(&random_game(&params)), out)?;
    Ok(EXIT_OK)
}

fn cmd_builtin(name: &str, params: &[String], output: Option<&Path>, out: &mut dyn Write) -> Result<i32> {
    let spec = if params.is_empty() { name.to_string() } else { format!("{name}:{}", params.join(",")) };
    for p in params {
        parse_rational(p).map_err(anyhow::Error::msg).with_context(|| format!("parameter of {name}"))?;
    }
    let base = spec.split(':').next().unwrap_or(&spec);
    if !BUILTIN_NAMES.contains(&base) {
        bail!("unknown builtin `{base}` (available: {})", BUILTIN_NAMES.join(", "));
    }
    let game = builtin_from_spec(&spec)?;
    write_output(output, &serialize_model(&game), out)?;
    Ok(EXIT_OK)
}

fn cmd_bench(args: &BenchArgs, out: &mut dyn Write) -> Result<i32> {
    check_epsilon(args.epsilon)?;
    check_deflate_every(args.deflate_every)?;
    if args.reps == 0 {
        bail!("--reps must be at least 1");
    }
    let exec = if args.sequential { Execution::Sequential } else { Execution::best_available() };
    let mut csv = String::from(BenchRow::CSV_HEADER);
    csv.push('\n');
    for model in &args.models {
        let game = load_model(model);
        for &method in &args.methods {
            let row = match &game {
                Ok(g) => {
                    let mut c = SolverConfig::new(method);
                    c.epsilon = args.epsilon;
                    c.deflate_every = args.deflate_every;
                    c.seed = args.seed;
                    if let Some(k) = args.max_iters {
                        c.max_iters = k;
                    }
                    bench_game(model, g, &c, args.reps, exec)
                }
                Err(e) => BenchRow::failed(model, method, args.reps, &format!("{e:#}")),
            };
            csv.push_str(&row.to_csv());
            csv.push('\n');
        }
    }
    write_output(args.output.as_deref(), &csv, out)?;
    Ok(EXIT_OK)
}

/// Runs the tool on `args` (including the program name) and returns the exit
/// code. Normal output goes to `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    let result = match &cli.command {
        Command::Validate { model } => cmd_validate(model, out),
        Command::Solve(args) => cmd_solve(args, out),
        Command::Gen(args) => cmd_gen(args, out),
        Command::Builtin { name, params, output } => cmd_builtin(name, params, output.as_deref(), out),
        Command::Bench(args) => cmd_bench(args, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            EXIT_ERROR
        }
    }
}

mod json;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::thread;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use lpmodel_core::analysis::gain;
use lpmodel_core::attacks::{
    build_liquidation_attack, build_liquidation_attack_with, build_overutilization_attack,
    build_undercollateralized_loan_attack, build_underutilization_attack, AttackOutcome, Verdict,
};
use lpmodel_core::invariants::{check_trace, generate_trace, FuzzConfig, InvariantId, Status};
use lpmodel_core::rational::{format_exact, format_truncated, parse_rational};
use lpmodel_core::scenario::{parse_scenario, render_state_report, run_scenario, ReportOptions, Scenario};
use lpmodel_core::semantics::{apply_trace, TraceMode};
use lpmodel_core::strategies::Relation;
use lpmodel_core::{AddressId, BlockchainState, ProtocolParams, Rational, TokenId};

#[derive(Parser)]
#[command(name = "lpmodel", version, about = "Exact lending pool model: replay, check, gains, attacks, fuzzing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum AttackKind {
    Undercoll,
    Liq,
    Underutil,
    Overutil,
}

#[derive(Subcommand)]
enum Command {
    /// Replay a scenario, printing the state after every step.
    Run {
        file: PathBuf,
        /// Decimals shown; values are truncated toward zero.
        #[arg(long, default_value_t = 2)]
        precision: usize,
        /// Print exact rationals.
        #[arg(long)]
        exact: bool,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Check every invariant along the trace and the scenario's expectations.
    Check { file: PathBuf },
    /// Gain of a user over the trace.
    Gain {
        file: PathBuf,
        #[arg(long)]
        user: String,
        /// Compare the whole trace with its last K transactions alone.
        #[arg(long, value_name = "K")]
        vs_suffix: Option<usize>,
    },
    /// Build and execute an attack from the state reached by the scenario.
    Attack {
        kind: AttackKind,
        file: PathBuf,
        #[command(flatten)]
        args: Box<AttackArgs>,
    },
    /// Generate random traces and check every invariant.
    Fuzz {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Consecutive seeds to run, starting at --seed.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        #[arg(long, default_value_t = 25)]
        steps: usize,
        #[arg(long, default_value_t = 3)]
        users: usize,
        #[arg(long, default_value_t = 2)]
        tokens: usize,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Print each generated trace.
        #[arg(long)]
        print_trace: bool,
    },
}

#[derive(clap::Args)]
struct AttackArgs {
    #[arg(long)]
    adversary: String,
    #[arg(long)]
    victim: Option<String>,
    /// Token of the utilization attacks.
    #[arg(long)]
    token: Option<String>,
    /// Collateral token.
    #[arg(long)]
    t1: Option<String>,
    /// Loan or debt token.
    #[arg(long)]
    t2: Option<String>,
    /// Collateral deposited by the undercollateralized loan attack.
    #[arg(long, value_parser = rational)]
    v1: Option<Rational>,
    /// Amount of the utilization attacks.
    #[arg(long, value_parser = rational)]
    v: Option<Rational>,
    /// Debt repaid by the liquidation attack.
    #[arg(long, value_parser = rational)]
    vl: Option<Rational>,
    /// Price manipulation; searched for when omitted in the liquidation attack.
    #[arg(long, value_parser = rational)]
    delta: Option<Rational>,
}

fn rational(text: &str) -> Result<Rational, String> {
    parse_rational(text).map_err(|e| e.to_string())
}

fn load(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_scenario(&text).with_context(|| format!("parsing {}", path.display()))
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// `Ok(false)` when a check, expectation or attack claim failed.
fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { file, precision, exact, format } => run(&file, precision, exact, format),
        Command::Check { file } => check(&file),
        Command::Gain { file, user, vs_suffix } => gain_cmd(&file, &user, vs_suffix),
        Command::Attack { kind, file, args } => attack(kind, &file, &args),
        Command::Fuzz { seed, seeds, steps, users, tokens, jobs, print_trace } => {
            let config = FuzzConfig { seed, steps, users, tokens, ..FuzzConfig::default() };
            fuzz(&config, seeds, jobs, print_trace)
        }
    }
}

fn run(file: &Path, precision: usize, exact: bool, format: Format) -> Result<bool> {
    let scenario = load(file)?;
    let outcome = run_scenario(&scenario)?;
    match format {
        Format::Json => {
            for (step, state) in outcome.states.iter().enumerate() {
                let tx = step.checked_sub(1).map(|i| scenario.trace[i].to_string());
                let line = json!({ "step": step, "tx": tx, "state": json::state(&outcome.params, state) });
                println!("{line}");
            }
            let checks: Vec<_> = outcome.checks.iter().map(json::check).collect();
            println!("{}", json!({ "expectations": checks, "passed": outcome.all_passed() }));
        }
        Format::Text => {
            for (step, state) in outcome.states.iter().enumerate() {
                let title = match step {
                    0 => "initial".to_string(),
                    n => format!("step {n}: {}", scenario.trace[n - 1]),
                };
                let options = ReportOptions { precision, exact, title };
                print!("{}", render_state_report(&outcome.params, state, &options));
                println!();
            }
            print_checks(&outcome.checks, precision, exact);
        }
    }
    Ok(outcome.all_passed())
}

fn print_checks(checks: &[lpmodel_core::scenario::ExpectationCheck], precision: usize, exact: bool) {
    for c in checks {
        let actual = if exact { c.actual.display_exact() } else { c.actual.display(precision) };
        let mark = if c.passed() { "ok" } else { "FAILED" };
        println!("expect step {} {}: {actual} {mark}", c.expectation.step, c.expectation.quantity);
    }
}

fn check(file: &Path) -> Result<bool> {
    let scenario = load(file)?;
    let params = scenario.params.protocol()?;
    let initial = scenario.initial_state()?;
    let report = check_trace(&params, &initial, &scenario.trace)?;
    for invariant in InvariantId::ALL {
        let skipped = report
            .entries
            .iter()
            .filter(|e| e.invariant == invariant && e.status == Status::NotApplicable)
            .count();
        println!(
            "{:<28} pass {:>4}  fail {:>4}  n/a {:>4}",
            invariant.name(),
            report.count(invariant, true),
            report.count(invariant, false),
            skipped
        );
    }
    for failure in report.failures() {
        if let Status::Fail(witness) = &failure.status {
            println!("FAIL step {} {}: {witness}", failure.step + 1, failure.invariant);
        }
    }
    let outcome = run_scenario(&scenario)?;
    print_checks(&outcome.checks, 2, true);
    Ok(report.is_clean() && outcome.all_passed())
}

fn gain_cmd(file: &Path, user: &str, vs_suffix: Option<usize>) -> Result<bool> {
    let scenario = load(file)?;
    let params = scenario.params.protocol()?;
    let initial = scenario.initial_state()?;
    let user = AddressId::new(user);
    let report = gain(&params, &initial, &user, &scenario.trace)?;
    println!("gain {user} = {}", format_exact(&report.definitional_gain));
    for (token, delta) in &report.breakdown {
        println!("  {token}: {}", format_exact(delta));
    }
    if !report.skipped.is_empty() {
        let steps: Vec<_> = report.skipped.iter().map(|i| (i + 1).to_string()).collect();
        println!("  skipped steps: {}", steps.join(", "));
    }
    if let Some(k) = vs_suffix {
        if k > scenario.trace.len() {
            bail!("--vs-suffix {k} exceeds the trace length {}", scenario.trace.len());
        }
        let suffix = &scenario.trace[scenario.trace.len() - k..];
        let alone = gain(&params, &initial, &user, suffix)?;
        let diff = &report.definitional_gain - &alone.definitional_gain;
        println!("gain {user} over the last {k} = {}", format_exact(&alone.definitional_gain));
        println!("difference = {} ({})", format_exact(&diff), Relation::of_sign(&diff));
    }
    Ok(true)
}

fn required<'a, T>(value: &'a Option<T>, flag: &str) -> Result<&'a T> {
    value.as_ref().with_context(|| format!("--{flag} is required for this attack"))
}

fn reached_state(scenario: &Scenario, params: &ProtocolParams) -> Result<BlockchainState> {
    let initial = scenario.initial_state()?;
    Ok(apply_trace(params, &initial, &scenario.trace, TraceMode::Strict)?.final_state)
}

fn attack(kind: AttackKind, file: &Path, args: &AttackArgs) -> Result<bool> {
    let scenario = load(file)?;
    let params = scenario.params.protocol()?;
    let state = reached_state(&scenario, &params)?;
    let adversary = AddressId::new(&args.adversary);
    let victim = || required(&args.victim, "victim").map(AddressId::new);
    let token = |v: &Option<String>, flag| required(v, flag).map(TokenId::new);
    let outcome = match kind {
        AttackKind::Undercoll => build_undercollateralized_loan_attack(
            &params,
            &state,
            &adversary,
            required(&args.v1, "v1")?,
            &token(&args.t1, "t1")?,
            &token(&args.t2, "t2")?,
            required(&args.delta, "delta")?,
        )?,
        AttackKind::Liq => {
            let (victim, t1, t2) = (victim()?, token(&args.t1, "t1")?, token(&args.t2, "t2")?);
            let vl = required(&args.vl, "vl")?;
            match &args.delta {
                Some(delta) => build_liquidation_attack_with(&params, &state, &adversary, &victim, &t1, &t2, vl, delta)?,
                None => build_liquidation_attack(&params, &state, &adversary, &victim, &t1, &t2, vl, None)?,
            }
        }
        AttackKind::Underutil => build_underutilization_attack(
            &params,
            &state,
            &adversary,
            &victim()?,
            &token(&args.token, "token")?,
            required(&args.v, "v")?,
        )?,
        AttackKind::Overutil => build_overutilization_attack(
            &params,
            &state,
            &adversary,
            &victim()?,
            &token(&args.token, "token")?,
            required(&args.v, "v")?,
        )?,
    };
    print_attack(&outcome);
    Ok(outcome.verdict == Verdict::Succeeded)
}

fn print_attack(outcome: &AttackOutcome) {
    let trace: Vec<_> = outcome.trace.iter().map(ToString::to_string).collect();
    println!("trace: {}", trace.join(" . "));
    if let Some(failure) = &outcome.failure {
        println!("disabled: {failure}");
    }
    let show = |label: &str, v: &Option<Rational>| {
        if let Some(v) = v {
            println!("{label} = {} ({})", format_exact(v), format_truncated(v, 4));
        }
    };
    if outcome.enabled {
        show("adversary gain", &Some(outcome.adversary_gain.clone()));
        show("adversary baseline", &outcome.adversary_baseline);
        show("victim gain", &outcome.victim_gain);
        show("victim baseline", &outcome.victim_baseline);
        show("liquidation step gain", &outcome.liquidation_gain);
        show("adversary net position", &Some(outcome.adversary_net_position.clone()));
    }
    println!("verdict: {:?}", outcome.verdict);
}

struct SeedResult {
    seed: u64,
    steps: usize,
    failures: Vec<String>,
    trace: Vec<String>,
}

fn fuzz_seed(config: &FuzzConfig) -> Result<SeedResult> {
    let generated = generate_trace(config)?;
    let report = check_trace(&config.params, &generated.initial, &generated.trace)?;
    let failures = report
        .failures()
        .map(|f| match &f.status {
            Status::Fail(w) => format!("step {} ({}) {}: {w}", f.step + 1, generated.trace[f.step], f.invariant),
            _ => unreachable!(),
        })
        .collect();
    Ok(SeedResult {
        seed: config.seed,
        steps: generated.trace.len(),
        failures,
        trace: generated.trace.iter().map(ToString::to_string).collect(),
    })
}

fn fuzz(base: &FuzzConfig, seeds: u64, jobs: usize, print_trace: bool) -> Result<bool> {
    base.validate()?;
    let all: Vec<u64> = (base.seed..base.seed.saturating_add(seeds)).collect();
    let chunk = all.len().div_ceil(jobs.max(1)).max(1);
    let results: Vec<Result<SeedResult>> = thread::scope(|scope| {
        let handles: Vec<_> = all
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    part.iter()
                        .map(|&seed| fuzz_seed(&FuzzConfig { seed, ..base.clone() }))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("fuzz worker panicked")).collect()
    });
    let mut clean = true;
    let mut total = 0;
    for result in results {
        let result = result?;
        total += result.steps;
        let status = if result.failures.is_empty() { "ok" } else { "FAILED" };
        println!("seed {}: {} steps {status}", result.seed, result.steps);
        if print_trace {
            for tx in &result.trace {
                println!("  {tx}");
            }
        }
        for f in &result.failures {
            println!("  {f}");
        }
        clean &= result.failures.is_empty();
    }
    println!("{total} steps over {seeds} seeds: {}", if clean { "no invariant failures" } else { "invariant failures" });
    Ok(clean)
}

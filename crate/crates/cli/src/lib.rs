//! Command-line front door: analyze and instrument programs, run scenario
//! manifests, execute the attack corpus, and reproduce the brute-force
//! experiment.

pub mod attack;
pub mod bruteforce;

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use randlab_core::builtins::BuiltinSet;
use randlab_core::dataflow;
use randlab_core::instrument;
use randlab_core::minilang;
use randlab_core::runtime::{self, PipelineOptions, Scenario};
use randlab_core::tcs::{self, TrustedSpec};

/// Exit code for failed expectations; usage errors exit 2 (clap default).
pub const EXIT_EXPECTATION_FAILED: i32 = 1;

#[derive(Parser)]
#[command(
    name = "randlab",
    about = "Randomization-based input-injection prevention laboratory",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Run the bidirectional dataflow analysis and print the report.
    Analyze(AnalyzeArgs),
    /// Insert randomization wrappers and print the instrumented program.
    Instrument(InstrumentArgs),
    /// Execute a scenario manifest end to end and print the trace.
    Run(RunArgs),
    /// Run an attack corpus directory; one pass/fail line per case.
    Attack(AttackArgs),
    /// Simulate brute-force attacks against the randomized namespace.
    Bruteforce(BruteforceArgs),
    /// Propose a trusted-command spec from the program's sink usage.
    SuggestSpec(SuggestArgs),
    /// Consolidated report: corpus results plus brute-force distributions.
    Report(ReportArgs),
}

#[derive(Args)]
pub struct AnalyzeArgs {
    /// Program source (.mpl).
    pub program: PathBuf,
    /// Trusted command specification (.tcs).
    #[arg(long)]
    pub spec: PathBuf,
}

#[derive(Args)]
pub struct InstrumentArgs {
    pub program: PathBuf,
    #[arg(long)]
    pub spec: PathBuf,
    /// Write the instrumented program here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct RunArgs {
    /// Scenario manifest (.toml).
    pub scenario: PathBuf,
    /// Override the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Run the unprotected baseline (no instrumentation, no randomization).
    #[arg(long)]
    pub baseline: bool,
}

#[derive(Args)]
pub struct AttackArgs {
    /// Directory of attack case files.
    pub corpus: PathBuf,
}

#[derive(Args)]
pub struct BruteforceArgs {
    /// static, dynamic or both.
    #[arg(long, default_value = "both")]
    pub mode: String,
    /// Output alphabet size n.
    #[arg(short = 'n', long, default_value_t = 10)]
    pub alphabet: usize,
    /// Command length L in bytes.
    #[arg(short = 'L', long, default_value_t = 2)]
    pub length: usize,
    /// Expansion factor k.
    #[arg(short = 'k', long, default_value_t = 1)]
    pub expansion: usize,
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

#[derive(Args)]
pub struct SuggestArgs {
    pub program: PathBuf,
    /// Sink names to consider (defaults to the built-in sink set).
    #[arg(long)]
    pub sinks: Vec<String>,
}

#[derive(Args)]
pub struct ReportArgs {
    pub corpus: PathBuf,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
}

fn load_program(path: &Path, builtins: &BuiltinSet) -> Result<minilang::Program> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading program {}", path.display()))?;
    let program = minilang::parse_with(&text, &path.display().to_string(), builtins)
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    Ok(program)
}

/// Runs a subcommand; returns the process exit code.
pub fn execute(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Analyze(args) => {
            let builtins = BuiltinSet::default();
            let program = load_program(&args.program, &builtins)?;
            let spec = TrustedSpec::load(&args.spec)?;
            let analysis = dataflow::analyze(&program, &spec, &builtins);
            print!("{}", dataflow::render_report(&analysis));
            for report in analysis.unresolved() {
                eprintln!(
                    "warning: completely dynamic command at {}.arg{} ({}:{})",
                    report.sink, report.index, report.call.0, report.call.1
                );
            }
            Ok(0)
        }
        Command::Instrument(args) => {
            let builtins = BuiltinSet::default();
            let program = load_program(&args.program, &builtins)?;
            let spec = TrustedSpec::load(&args.spec)?;
            let analysis = dataflow::analyze(&program, &spec, &builtins);
            let instrumented = instrument::instrument(&program, &spec, &analysis, &builtins);
            let text = instrumented.canonical_text();
            match &args.out {
                Some(path) => std::fs::write(path, text)
                    .with_context(|| format!("writing {}", path.display()))?,
                None => print!("{text}"),
            }
            Ok(0)
        }
        Command::Run(args) => {
            let mut scenario = Scenario::load(&args.scenario)?;
            if let Some(seed) = args.seed {
                scenario.seed = seed;
            }
            let opts = if args.baseline {
                PipelineOptions {
                    instrument: false,
                    randomize: false,
                }
            } else {
                PipelineOptions::default()
            };
            let out = runtime::run(&scenario, opts)?;
            print!("{}", out.trace.render());
            if let Some(expect) = &scenario.expect {
                let failures = runtime::check_expectations(&out.trace, expect);
                if !failures.is_empty() {
                    for f in &failures {
                        eprintln!("expectation failed: {f}");
                    }
                    return Ok(EXIT_EXPECTATION_FAILED);
                }
            }
            Ok(0)
        }
        Command::Attack(args) => {
            let results = attack::run_corpus(&args.corpus)?;
            print!("{}", attack::render_results(&results));
            if results.iter().all(|r| r.passed) {
                Ok(0)
            } else {
                Ok(EXIT_EXPECTATION_FAILED)
            }
        }
        Command::Bruteforce(args) => {
            let modes: Vec<bruteforce::Mode> = match args.mode.as_str() {
                "static" => vec![bruteforce::Mode::Static],
                "dynamic" => vec![bruteforce::Mode::Dynamic],
                "both" => vec![bruteforce::Mode::Static, bruteforce::Mode::Dynamic],
                other => anyhow::bail!("unknown mode `{other}` (static|dynamic|both)"),
            };
            let mut means = Vec::new();
            for mode in modes {
                let cfg = bruteforce::BruteForceConfig {
                    mode,
                    expansion: args.expansion,
                    alphabet: args.alphabet,
                    length: args.length,
                    trials: args.trials,
                };
                let stats = bruteforce::simulate(&cfg, args.seed)?;
                print!("{}", bruteforce::render_stats(&stats));
                means.push((mode, stats.mean));
            }
            if let [(_, s), (_, d)] = means.as_slice() {
                println!("dynamic/static mean ratio: {:.3}", d / s);
            }
            Ok(0)
        }
        Command::SuggestSpec(args) => {
            let builtins = BuiltinSet::default();
            let program = load_program(&args.program, &builtins)?;
            let sinks = if args.sinks.is_empty() {
                tcs::default_sink_names(&builtins)
            } else {
                args.sinks.iter().cloned().collect()
            };
            let outcome = tcs::suggest_spec(&program, &builtins, &sinks);
            print!("{}", outcome.spec.serialize());
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            Ok(0)
        }
        Command::Report(args) => {
            let results = attack::run_corpus(&args.corpus)?;
            println!("== attack corpus ==");
            print!("{}", attack::render_results(&results));
            println!("== brute force (n=10, L=2, k=1) ==");
            let mut means = Vec::new();
            for mode in [bruteforce::Mode::Static, bruteforce::Mode::Dynamic] {
                let cfg = bruteforce::BruteForceConfig {
                    mode,
                    expansion: 1,
                    alphabet: 10,
                    length: 2,
                    trials: args.trials,
                };
                let stats = bruteforce::simulate(&cfg, args.seed)?;
                print!("{}", bruteforce::render_stats(&stats));
                means.push(stats.mean);
            }
            if let [s, d] = means.as_slice() {
                println!("dynamic/static mean ratio: {:.3}", d / s);
            }
            if results.iter().all(|r| r.passed) {
                Ok(0)
            } else {
                Ok(EXIT_EXPECTATION_FAILED)
            }
        }
    }
}

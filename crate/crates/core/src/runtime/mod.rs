//! Scenario runtime: executes instrumented programs against fixtures,
//! routing sources to scenario inputs and sinks to the randomized
//! subsystems.

pub mod interp;
pub mod scenario;
pub mod trace;
pub mod value;

use crate::builtins::BuiltinSet;
use crate::dataflow;
use crate::instrument;
use crate::minilang::{self, Program};

pub use interp::{Interp, RunOptions, RuntimeError};
pub use scenario::{Expectations, Scenario, ScenarioError};
pub use trace::{Event, ExecutionTrace, SinkTaint};
pub use value::{Mark, Taint, Value};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Parse(#[from] minilang::ParseError),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

/// Everything a full pipeline run produces.
pub struct RunOutput {
    pub analysis: dataflow::Analysis,
    pub instrumented: Program,
    pub trace: ExecutionTrace,
}

/// Pipeline options: whether to instrument before running and whether the
/// subsystems randomize (off = unprotected baseline / oracle run).
#[derive(Debug, Clone, Copy)]
pub struct PipelineOptions {
    pub instrument: bool,
    pub randomize: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            instrument: true,
            randomize: true,
        }
    }
}

/// Parses, analyzes, instruments and executes a scenario.
pub fn run(scenario: &Scenario, opts: PipelineOptions) -> Result<RunOutput, RunError> {
    let builtins = BuiltinSet::default();
    let program = minilang::parse(
        &scenario.program_text,
        &scenario.program_path.display().to_string(),
    )?;
    let analysis = dataflow::analyze(&program, &scenario.spec, &builtins);
    let instrumented = if opts.instrument {
        instrument::instrument(&program, &scenario.spec, &analysis, &builtins)
    } else {
        program.clone()
    };

    let mut interp = Interp::new(
        &instrumented,
        scenario,
        &builtins,
        RunOptions {
            randomize: opts.randomize,
        },
    )?;
    interp.run()?;
    let trace = std::mem::take(&mut interp.trace);
    Ok(RunOutput {
        analysis,
        instrumented,
        trace,
    })
}

/// Taint-oracle run: instrumented program, randomization off. The trace's
/// `sink_taints` carry, per dispatch, the dynamic taint partition and the
/// statically marked byte runs for agreement checks.
pub fn run_with_taint_oracle(scenario: &Scenario) -> Result<RunOutput, RunError> {
    run(
        scenario,
        PipelineOptions {
            instrument: true,
            randomize: false,
        },
    )
}

/// Checks a trace against scenario expectations; returns one line per
/// failed expectation.
pub fn check_expectations(trace: &ExecutionTrace, expect: &Expectations) -> Vec<String> {
    let mut failures = Vec::new();

    let executed: Vec<String> = trace
        .shell_outcomes()
        .iter()
        .filter(|(s, _)| *s == crate::shell::ExecStatus::Executed)
        .map(|(_, n)| n.clone())
        .collect();
    if !expect.shell_executed.is_empty() && executed != expect.shell_executed {
        failures.push(format!(
            "shell executed {executed:?}, expected {:?}",
            expect.shell_executed
        ));
    }
    let refused: Vec<String> = trace
        .shell_outcomes()
        .iter()
        .filter(|(s, _)| *s != crate::shell::ExecStatus::Executed)
        .map(|(_, n)| n.clone())
        .collect();
    if !expect.shell_blocked.is_empty() && refused != expect.shell_blocked {
        failures.push(format!(
            "shell refused {refused:?}, expected {:?}",
            expect.shell_blocked
        ));
    }

    if !expect.sql_verdicts.is_empty() {
        let verdicts: Vec<String> = trace
            .sql_verdicts()
            .iter()
            .map(|v| match v {
                crate::sql::VerdictStatus::Executed => "executed".to_owned(),
                crate::sql::VerdictStatus::SyntaxError => "syntax_error".to_owned(),
                crate::sql::VerdictStatus::UnknownTermError => "unknown_term_error".to_owned(),
            })
            .collect();
        if verdicts != expect.sql_verdicts {
            failures.push(format!(
                "sql verdicts {verdicts:?}, expected {:?}",
                expect.sql_verdicts
            ));
        }
    }

    let resolutions = trace.xml_resolutions();
    if let Some(want) = expect.xml_resolved {
        let got = resolutions.iter().filter(|(_, ok)| *ok).count();
        if got != want {
            failures.push(format!("xml resolved {got}, expected {want}"));
        }
    }
    if let Some(want) = expect.xml_denied {
        let got = resolutions.iter().filter(|(_, ok)| !*ok).count();
        if got != want {
            failures.push(format!("xml denied {got}, expected {want}"));
        }
    }

    let rendered = trace.render();
    for needle in &expect.effects_include {
        if !rendered.contains(needle) {
            failures.push(format!("trace missing expected `{needle}`"));
        }
    }
    for needle in &expect.effects_exclude {
        if rendered.contains(needle) {
            failures.push(format!("trace contains forbidden `{needle}`"));
        }
    }

    if !expect.allow_leaks && trace.leaked_records > 0 {
        failures.push(format!("{} leaked records", trace.leaked_records));
    }

    failures
}

//! Attack corpus runner: each case is a TOML file binding a scenario to an
//! explicit expected verdict.
//!
//! ```toml
//! category = "shell"            # shell | sql | xxe
//! scenario = "../scenarios/fetch.toml"
//! expected = "blocked"          # or "executed" for benign controls
//! inputs = ["http://x ; rm ./*"]   # optional input override
//!
//! [expect]                      # optional fine-grained expectations
//! shell_executed = ["wget"]
//! shell_blocked = ["rm"]
//! ```

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use randlab_core::runtime::{self, Expectations, PipelineOptions, Scenario};
use randlab_core::shell::ExecStatus;
use randlab_core::sql::VerdictStatus;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AttackCaseFile {
    category: String,
    scenario: PathBuf,
    expected: String,
    #[serde(default)]
    inputs: Option<Vec<String>>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    expect: Option<Expectations>,
}

#[derive(Debug)]
pub struct CaseResult {
    pub name: String,
    pub category: String,
    pub expected: String,
    pub passed: bool,
    pub details: Vec<String>,
}

pub fn run_case(path: &Path) -> Result<CaseResult> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading case {}", path.display()))?;
    let case: AttackCaseFile =
        toml::from_str(&text).with_context(|| format!("parsing case {}", path.display()))?;
    if !matches!(case.category.as_str(), "shell" | "sql" | "xxe") {
        bail!("{}: unknown category `{}`", path.display(), case.category);
    }
    if !matches!(case.expected.as_str(), "blocked" | "executed") {
        bail!("{}: unknown expected `{}`", path.display(), case.expected);
    }

    let base = path.parent().unwrap_or(Path::new("."));
    let mut scenario = Scenario::load(&base.join(&case.scenario))?;
    if let Some(inputs) = &case.inputs {
        scenario.inputs = inputs.iter().map(|s| s.clone().into_bytes()).collect();
    }
    if let Some(seed) = case.seed {
        scenario.seed = seed;
    }

    let out = runtime::run(&scenario, PipelineOptions::default())?;
    let mut details = Vec::new();

    // Coarse verdict: did anything get refused?
    let shell_refusals = out
        .trace
        .shell_outcomes()
        .iter()
        .filter(|(s, _)| *s != ExecStatus::Executed)
        .count();
    let sql_refusals = out
        .trace
        .sql_verdicts()
        .iter()
        .filter(|v| **v != VerdictStatus::Executed)
        .count();
    let xml_refusals = out
        .trace
        .xml_resolutions()
        .iter()
        .filter(|(_, ok)| !ok)
        .count();
    let refusals = shell_refusals + sql_refusals + xml_refusals;
    match case.expected.as_str() {
        "blocked" if refusals == 0 => {
            details.push("expected a refusal, everything went through".to_owned());
        }
        "executed" if refusals > 0 => {
            details.push(format!("expected clean execution, {refusals} refusal(s)"));
        }
        _ => {}
    }

    // Fine-grained expectations: the case's own, else the scenario's.
    let expectations = case.expect.as_ref().or(scenario.expect.as_ref());
    if let Some(expect) = expectations {
        details.extend(runtime::check_expectations(&out.trace, expect));
    } else if out.trace.leaked_records > 0 {
        details.push(format!("{} leaked records", out.trace.leaked_records));
    }

    Ok(CaseResult {
        name: path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("case")
            .to_owned(),
        category: case.category,
        expected: case.expected,
        passed: details.is_empty(),
        details,
    })
}

/// Runs every `*.toml` case under `dir`, sorted by name.
pub fn run_corpus(dir: &Path) -> Result<Vec<CaseResult>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading corpus directory {}", dir.display()))?
        .flatten()
        .map(|e| e.path())
        .filter(|p| p.extension().map(|e| e == "toml").unwrap_or(false))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("{}: no .toml cases found", dir.display());
    }
    paths.iter().map(|p| run_case(p)).collect()
}

pub fn render_results(results: &[CaseResult]) -> String {
    let mut out = String::new();
    for r in results {
        out.push_str(&format!(
            "{} [{}] expected={} {}\n",
            if r.passed { "PASS" } else { "FAIL" },
            r.category,
            r.expected,
            r.name
        ));
        for d in &r.details {
            out.push_str(&format!("       {d}\n"));
        }
    }
    let passed = results.iter().filter(|r| r.passed).count();
    out.push_str(&format!("{passed}/{} cases passed\n", results.len()));
    out
}

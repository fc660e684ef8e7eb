//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line through the harness. Tolerances and thresholds are pinned
//! in the assertions.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::time::Instant;

use randlab_cli::bruteforce::{simulate, BruteForceConfig, Mode};
use randlab_core::builtins::BuiltinSet;
use randlab_core::dataflow::{self, ProgramIndex};
use randlab_core::minilang::{parse, Expr};
use randlab_core::pad::{RecordStore, Scheme};
use randlab_core::prng::Prng;
use randlab_core::progen;
use randlab_core::runtime::{self, Event, PipelineOptions, RunOutput, Scenario};
use randlab_core::shell::{ExecStatus, ShellEnv};
use randlab_core::sql::{self, VerdictStatus};
use randlab_core::tcs::TrustedSpec;

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .parent()
        .and_then(Path::parent)
        .expect("workspace root")
        .to_path_buf()
}

fn load_scenario(name: &str) -> Scenario {
    let path = workspace_root().join("scenarios").join(name);
    Scenario::load(&path).unwrap_or_else(|e| panic!("loading {name}: {e}"))
}

fn run_protected(name: &str) -> RunOutput {
    runtime::run(&load_scenario(name), PipelineOptions::default())
        .unwrap_or_else(|e| panic!("running {name}: {e}"))
}

fn run_baseline(name: &str) -> RunOutput {
    runtime::run(
        &load_scenario(name),
        PipelineOptions {
            instrument: false,
            randomize: false,
        },
    )
    .unwrap_or_else(|e| panic!("running baseline {name}: {e}"))
}

fn sql_received(out: &RunOutput) -> Vec<String> {
    out.trace
        .events
        .iter()
        .filter_map(|e| match e {
            Event::SqlQuery { received, .. } => Some(received.clone()),
            _ => None,
        })
        .collect()
}

#[test]
fn criterion_01_roundtrip_injectivity_length() {
    let start = Instant::now();
    let mut prng = Prng::seeded(0xACCE);
    for k in [1usize, 2, 4, 8] {
        let scheme = Scheme::printable(k);
        let mut store = RecordStore::seeded(k as u64);
        let mut outputs = HashSet::new();
        for i in 0..10_000u32 {
            // Distinct originals: random printable bytes plus a counter tag.
            let len = 1 + (prng.next_u64() % 60) as usize;
            let mut original: Vec<u8> = (0..len)
                .map(|_| 0x20 + (prng.next_u64() % 95) as u8)
                .collect();
            original.extend_from_slice(format!("#{i}").as_bytes());

            let record = store.randomize(&original, &scheme).unwrap();
            assert_eq!(
                record.randomized.len(),
                k * original.len(),
                "length law k={k}"
            );
            let found = store.derandomize(&record.randomized).expect("live record");
            assert_eq!(found.original, original, "roundtrip k={k}");
            assert!(
                outputs.insert(record.randomized.clone()),
                "duplicate randomized output k={k}"
            );
        }
        assert_eq!(outputs.len(), 10_000);
    }
    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 10.0,
        "criterion 1 took {elapsed:?}, budget is 10s"
    );
}

#[test]
fn criterion_02_editor_analysis_fidelity() {
    let root = workspace_root();
    let source = std::fs::read_to_string(root.join("fixtures/programs/editor_patch.mpl")).unwrap();
    let program = parse(&source, "editor_patch.mpl").unwrap();
    let spec = TrustedSpec::load(&root.join("fixtures/specs/editor.tcs")).unwrap();
    let builtins = BuiltinSet::default();
    let analysis = dataflow::analyze(&program, &spec, &builtins);

    // Exactly one target: the hard-coded editor path literal.
    assert_eq!(analysis.ins_out.len(), 1, "{:?}", analysis.ins_out);
    let target = analysis.ins_out.iter().next().unwrap();
    assert_eq!(target.var, "editor_program");
    let index = ProgramIndex::build(&program, &builtins);
    match index.find_expr(target.stmt, target.expr) {
        Some(Expr::StrLit { text, .. }) => assert_eq!(text, "/bin/ed"),
        other => panic!("target is not the editor literal: {other:?}"),
    }
    assert!(analysis.ins_out.iter().all(|t| t.var != "TMPOUTNAME"));
    assert!(analysis.unresolved().is_empty());

    // Bit-for-bit agreement with the dynamic taint oracle on the sink
    // argument partition.
    let out = runtime::run_with_taint_oracle(&load_scenario("editor_patch.toml")).unwrap();
    assert_eq!(out.trace.sink_taints.len(), 1);
    let taint = &out.trace.sink_taints[0];
    assert_eq!(taint.trusted_positions(), taint.marked_positions());
    let trusted_prefix = taint.trusted_positions().iter().take_while(|t| **t).count();
    assert_eq!(trusted_prefix, "/bin/ed".len());
}

#[test]
fn criterion_03_placement_keeps_file_behavior() {
    let protected = run_protected("multi_use.toml");
    let baseline = run_baseline("multi_use.toml");
    assert_eq!(
        protected.trace.non_sink_builtin_lines(),
        baseline.trace.non_sink_builtin_lines(),
        "non-sink builtin traces must match"
    );
    let lines = protected.trace.non_sink_builtin_lines();
    assert!(
        lines.iter().any(|l| l.contains("fopen(ls.log)")),
        "{lines:?}"
    );
    assert!(
        lines.iter().any(|l| l.contains("unlink(ls.log)")),
        "{lines:?}"
    );
    // The sink received a randomized command (a record was created and the
    // executed name still resolves to ls).
    assert!(protected.trace.records_created >= 1);
    assert_eq!(
        protected.trace.shell_outcomes(),
        vec![(ExecStatus::Executed, "ls".to_owned())]
    );
    // The wrap sits on the command composition, not the shared definition.
    let text = protected.instrumented.canonical_text();
    assert!(text.contains("cmdline = rand(bin)"), "{text}");
    assert!(text.contains("logname = bin + \".log\";"), "{text}");
}

#[test]
fn criterion_04_shell_scenario_blocks_injection() {
    let benign = run_protected("fetch_benign.toml");
    assert_eq!(
        benign.trace.shell_outcomes(),
        vec![(ExecStatus::Executed, "wget".to_owned())]
    );

    let attacked = run_protected("fetch_attack.toml");
    let outcomes = attacked.trace.shell_outcomes();
    assert_eq!(outcomes.len(), 2, "{}", attacked.trace.render());
    assert_eq!(outcomes[0], (ExecStatus::Executed, "wget".to_owned()));
    assert_eq!(outcomes[1].0, ExecStatus::NotFound);
    assert_eq!(outcomes[1].1, "rm");
    assert!(
        !attacked.trace.render().contains("FILES-REMOVED"),
        "blocked command caused side effects"
    );
}

#[test]
fn criterion_05_sql_scenarios_and_dialect_attacks() {
    // Benign lookup executes and the engine sees exactly the baseline bytes.
    let protected = run_protected("sql_login_benign.toml");
    assert_eq!(
        protected.trace.sql_verdicts(),
        vec![VerdictStatus::Executed]
    );
    let baseline = run_baseline("sql_login_benign.toml");
    assert_eq!(sql_received(&protected), sql_received(&baseline));

    // The classic injection comes back as unknown terms.
    let attacked = run_protected("sql_login_attack.toml");
    assert_eq!(
        attacked.trace.sql_verdicts(),
        vec![VerdictStatus::UnknownTermError]
    );

    // Dialect-comment, #-operator, sub-query and string-bug attacks are all
    // blocked while their benign twins execute byte-identically.
    for (benign, attack) in [
        ("sql_dialect_benign.toml", "sql_dialect_attack.toml"),
        ("sql_xor_benign.toml", "sql_xor_attack.toml"),
        ("sql_subquery_benign.toml", "sql_subquery_attack.toml"),
        ("sql_string_benign.toml", "sql_string_attack.toml"),
    ] {
        let ok = run_protected(benign);
        assert_eq!(
            ok.trace.sql_verdicts(),
            vec![VerdictStatus::Executed],
            "{benign}: {}",
            ok.trace.render()
        );
        assert_eq!(
            sql_received(&ok),
            sql_received(&run_baseline(benign)),
            "{benign} received text differs from baseline"
        );
        let bad = run_protected(attack);
        assert_eq!(
            bad.trace.sql_verdicts(),
            vec![VerdictStatus::UnknownTermError],
            "{attack}: {}",
            bad.trace.render()
        );
    }

    // Escape-string constant round-trips content-exactly.
    let escape = run_protected("sql_escape.toml");
    assert_eq!(escape.trace.sql_verdicts(), vec![VerdictStatus::Executed]);
    let received = sql_received(&escape);
    assert!(
        received[0].contains("E'it''s'"),
        "escape string mangled: {received:?}"
    );
    assert_eq!(received, sql_received(&run_baseline("sql_escape.toml")));
}

#[test]
fn criterion_06_table_name_translation() {
    // Function level: a single randomized table name derandomizes; two
    // terms pass through unchanged.
    let mut store = RecordStore::seeded(61);
    let record = store.randomize(b"users", &Scheme::word_safe(2)).unwrap();
    assert_eq!(sql::tbl_derand(&record.randomized, &store), b"users");
    let mut two = record.randomized.clone();
    two.extend_from_slice(b"; drop");
    assert_eq!(sql::tbl_derand(&two, &store), two);

    // End to end: a translated handle executes; an injected fragment in
    // table position is rejected.
    let ok = run_protected("sql_table_translate.toml");
    assert_eq!(
        ok.trace.sql_verdicts(),
        vec![VerdictStatus::Executed],
        "{}",
        ok.trace.render()
    );
    let bad = run_protected("sql_table_inject.toml");
    assert_eq!(
        bad.trace.sql_verdicts(),
        vec![VerdictStatus::UnknownTermError],
        "{}",
        bad.trace.render()
    );
}

#[test]
fn criterion_07_xxe_namespace() {
    let trusted = run_protected("xml_trusted.toml");
    let resolutions = trusted.trace.xml_resolutions();
    assert_eq!(resolutions.len(), 2);
    assert!(resolutions.iter().all(|(_, ok)| *ok), "{resolutions:?}");

    // Mixed corpus: the trusted document's entities resolve, the uploaded
    // document's password-file entity is denied and its content never
    // appears.
    let mixed = run_protected("xml_attack.toml");
    let resolutions = mixed.trace.xml_resolutions();
    let resolved: Vec<&String> = resolutions
        .iter()
        .filter(|(_, ok)| *ok)
        .map(|(n, _)| n)
        .collect();
    let denied: Vec<&String> = resolutions
        .iter()
        .filter(|(_, ok)| !ok)
        .map(|(n, _)| n)
        .collect();
    assert_eq!(resolved.len(), 2, "{resolutions:?}");
    assert_eq!(denied, vec!["xxe"]);
    assert!(!mixed.trace.render().contains("root:x:0:0"));
}

#[test]
fn criterion_08_bruteforce_distributions() {
    let start = Instant::now();
    let trials = 10_000;
    let static_stats = simulate(
        &BruteForceConfig {
            mode: Mode::Static,
            expansion: 1,
            alphabet: 10,
            length: 2,
            trials,
        },
        0xBF,
    )
    .unwrap();
    let dynamic_stats = simulate(
        &BruteForceConfig {
            mode: Mode::Dynamic,
            expansion: 1,
            alphabet: 10,
            length: 2,
            trials,
        },
        0xBF,
    )
    .unwrap();

    assert_eq!(static_stats.space, 90);
    let static_expected = (static_stats.space as f64 + 1.0) / 2.0;
    let static_err = (static_stats.mean - static_expected).abs() / static_expected;
    assert!(
        static_err < 0.05,
        "static mean {} expected {static_expected} (err {static_err:.3})",
        static_stats.mean
    );

    let dynamic_expected = dynamic_stats.space as f64;
    let dynamic_err = (dynamic_stats.mean - dynamic_expected).abs() / dynamic_expected;
    assert!(
        dynamic_err < 0.05,
        "dynamic mean {} expected {dynamic_expected} (err {dynamic_err:.3})",
        dynamic_stats.mean
    );

    let ratio = dynamic_stats.mean / static_stats.mean;
    assert!(
        (ratio - 2.0).abs() <= 0.15,
        "dynamic/static ratio {ratio:.3} outside 2.0 +/- 0.15"
    );

    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 30.0,
        "criterion 8 took {elapsed:?}, budget is 30s"
    );
}

#[test]
fn criterion_09_oracle_equivalence_sweep() {
    let mut misses = 0usize;
    let mut false_positives = 0usize;
    let mut dispatches = 0usize;
    let mut multi_function = 0usize;
    let mut with_globals = 0usize;
    let mut with_indirect = 0usize;
    for seed in 0..200u64 {
        let generated = progen::generate(seed);
        let spec =
            TrustedSpec::parse(&generated.spec_text, Path::new("."), "generated.tcs").unwrap();
        let inputs: Vec<&str> = generated.inputs.iter().map(String::as_str).collect();
        let scenario = Scenario::inline(&generated.source, spec, seed)
            .with_inputs(&inputs)
            .with_shell_fixture(&generated.shell_fixture);
        if generated.source.matches("fn ").count() >= 4 {
            multi_function += 1;
        }
        if generated.source.contains("global ") {
            with_globals += 1;
        }
        if generated.source.contains("fn pass") {
            with_indirect += 1;
        }
        let out = runtime::run_with_taint_oracle(&scenario)
            .unwrap_or_else(|e| panic!("seed {seed}: {e}\n{}", generated.source));
        for taint in &out.trace.sink_taints {
            dispatches += 1;
            let trusted = taint.trusted_positions();
            let marked = taint.marked_positions();
            for (t, m) in trusted.iter().zip(&marked) {
                if *t && !m {
                    misses += 1;
                }
                if !t && *m {
                    false_positives += 1;
                }
            }
        }
    }
    assert!(
        dispatches >= 200,
        "sweep produced only {dispatches} dispatches"
    );
    // The corpus genuinely exercises cross-function chains, globals and
    // indirect calls.
    assert!(
        multi_function >= 100,
        "only {multi_function} multi-function programs"
    );
    assert!(
        with_globals >= 50,
        "only {with_globals} programs with globals"
    );
    assert!(
        with_indirect >= 50,
        "only {with_indirect} programs with indirect calls"
    );
    assert_eq!(misses, 0, "static analysis missed trusted bytes");
    assert_eq!(false_positives, 0, "static analysis over-marked bytes");
}

#[test]
fn criterion_10_record_hygiene_and_replay() {
    // Every bundled scenario exits with zero leaked records.
    let dir = workspace_root().join("scenarios");
    let mut checked = 0;
    let mut entries: Vec<PathBuf> = std::fs::read_dir(&dir)
        .unwrap()
        .flatten()
        .map(|e| e.path())
        .filter(|p| p.extension().map(|e| e == "toml").unwrap_or(false))
        .collect();
    entries.sort();
    for path in entries {
        let scenario = Scenario::load(&path).unwrap();
        let out = runtime::run(&scenario, PipelineOptions::default())
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(
            out.trace.leaked_records,
            0,
            "{} leaked records:\n{}",
            path.display(),
            out.trace.render()
        );
        checked += 1;
    }
    assert!(checked >= 10, "only {checked} scenarios checked");

    // Replaying a consumed randomized command is rejected.
    let mut env = ShellEnv::new(RecordStore::seeded(64));
    env.load_fixture("binary /bin/wget\n").unwrap();
    let record = env.store.randomize(b"wget", &Scheme::printable(1)).unwrap();
    let observed = record.randomized.clone();
    assert_eq!(
        env.spawn_and_execute(&observed).status,
        ExecStatus::Executed
    );
    let replay = env.spawn_and_execute(&observed);
    assert_eq!(replay.status, ExecStatus::Blocked, "{replay:?}");
}

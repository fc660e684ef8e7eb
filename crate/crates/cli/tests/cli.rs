//! End-to-end checks of the command-line surface: subcommands, file
//! handling and exit codes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .parent()
        .and_then(Path::parent)
        .unwrap()
        .to_path_buf()
}

fn randlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_randlab"))
        .current_dir(workspace_root())
        .args(args)
        .output()
        .expect("spawn randlab")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn analyze_prints_the_report_sections() {
    let out = randlab(&[
        "analyze",
        "fixtures/programs/editor_patch.mpl",
        "--spec",
        "fixtures/specs/editor.tcs",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    for section in [
        "== call graph ==",
        "== trusted trees ==",
        "== ins_out ==",
        "== unresolved ==",
    ] {
        assert!(text.contains(section), "missing {section}");
    }
    assert!(text.contains("editor_program"));
}

#[test]
fn analyze_warns_on_fully_dynamic_commands() {
    let dir = std::env::temp_dir().join(format!("randlab_cli_{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(dir.join("dyn.mpl"), "fn main(){ system(input()); }\n").unwrap();
    std::fs::write(dir.join("dyn.tcs"), "const:wget\n").unwrap();
    let out = randlab(&[
        "analyze",
        dir.join("dyn.mpl").to_str().unwrap(),
        "--spec",
        dir.join("dyn.tcs").to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("completely dynamic command"), "{err}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn instrument_writes_reparsable_output() {
    let dir = std::env::temp_dir().join(format!("randlab_ins_{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let out_path = dir.join("instrumented.mpl");
    let out = randlab(&[
        "instrument",
        "fixtures/programs/fetch.mpl",
        "--spec",
        "fixtures/specs/fetch.tcs",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&out_path).unwrap();
    assert!(text.contains("rand("), "{text}");
    randlab_core::minilang::parse(&text, "instrumented.mpl").expect("reparses");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn run_scenario_exit_codes() {
    let ok = randlab(&["run", "scenarios/fetch_attack.toml"]);
    assert_eq!(ok.status.code(), Some(0), "{}", stdout(&ok));
    assert!(stdout(&ok).contains("shell NotFound rm"));

    let missing = randlab(&["run", "scenarios/does_not_exist.toml"]);
    assert_eq!(missing.status.code(), Some(2));

    // A manifest whose program file is missing is also a usage error.
    let dir = std::env::temp_dir().join(format!("randlab_run_{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(
        dir.join("broken.toml"),
        "program = \"gone.mpl\"\nspec = \"gone.tcs\"\n",
    )
    .unwrap();
    let broken = randlab(&["run", dir.join("broken.toml").to_str().unwrap()]);
    assert_eq!(broken.status.code(), Some(2));
    std::fs::remove_dir_all(&dir).ok();

    let usage = randlab(&["run"]);
    assert_eq!(usage.status.code(), Some(2));

    let unknown = randlab(&["frobnicate"]);
    assert_eq!(unknown.status.code(), Some(2));
}

#[test]
fn run_seed_determinism() {
    let a = randlab(&["run", "scenarios/fetch_attack.toml", "--seed", "123"]);
    let b = randlab(&["run", "scenarios/fetch_attack.toml", "--seed", "123"]);
    assert_eq!(stdout(&a), stdout(&b));
}

#[test]
fn attack_corpus_all_pass() {
    let out = randlab(&["attack", "corpus"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let text = stdout(&out);
    assert!(text.contains("17/17 cases passed"), "{text}");
    // Every attack family has a blocked case and a benign twin.
    for family in [
        "a1_dialect_comment",
        "a1_hash_xor",
        "a2_subquery",
        "a3_string_bug",
        "xxe",
    ] {
        assert!(
            text.lines()
                .any(|l| l.contains(family) && l.contains("expected=blocked")),
            "missing blocked case for {family}"
        );
        assert!(
            text.lines()
                .any(|l| l.contains(family) && l.contains("expected=executed"))
                || text
                    .lines()
                    .any(|l| l.starts_with("PASS") && l.contains("benign") && l.contains(family)),
            "missing benign twin for {family}"
        );
    }
}

#[test]
fn bruteforce_reports_ratio() {
    let out = randlab(&[
        "bruteforce",
        "--mode",
        "both",
        "-n",
        "10",
        "-L",
        "2",
        "--trials",
        "2000",
        "--seed",
        "5",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("mode=Static space=90"), "{text}");
    assert!(text.contains("mode=Dynamic space=90"), "{text}");
    assert!(text.contains("dynamic/static mean ratio"), "{text}");
}

#[test]
fn bruteforce_rejects_oversized_space() {
    let out = randlab(&[
        "bruteforce",
        "--mode",
        "static",
        "-n",
        "94",
        "-k",
        "8",
        "-L",
        "8",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("overflows"));
}

#[test]
fn suggest_spec_roundtrips_into_analysis() {
    let out = randlab(&["suggest-spec", "fixtures/programs/fetch.mpl"]);
    assert!(out.status.success());
    let suggested = stdout(&out);
    assert!(suggested.contains("const:wget"), "{suggested}");

    // Feeding the suggestion back makes the analyzer instrument the literal
    // it proposed.
    let spec =
        randlab_core::tcs::TrustedSpec::parse(&suggested, Path::new("."), "suggested.tcs").unwrap();
    let source =
        std::fs::read_to_string(workspace_root().join("fixtures/programs/fetch.mpl")).unwrap();
    let program = randlab_core::minilang::parse(&source, "fetch.mpl").unwrap();
    let builtins = randlab_core::builtins::BuiltinSet::default();
    let analysis = randlab_core::dataflow::analyze(&program, &spec, &builtins);
    assert_eq!(analysis.ins_out.len(), 1);
}

#[test]
fn report_is_deterministic_under_fixed_seed() {
    let a = randlab(&["report", "corpus", "--seed", "11", "--trials", "2000"]);
    let b = randlab(&["report", "corpus", "--seed", "11", "--trials", "2000"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(stdout(&a), stdout(&b));
    assert!(stdout(&a).contains("== attack corpus =="));
    assert!(stdout(&a).contains("== brute force"));
}

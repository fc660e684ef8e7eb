//! Cross-module integration over the bundled fixture corpus: parsing,
//! printing, analysis and instrumentation through the public API only.

use std::path::{Path, PathBuf};

use randlab_core::builtins::BuiltinSet;
use randlab_core::dataflow;
use randlab_core::instrument;
use randlab_core::minilang::parse;
use randlab_core::tcs::TrustedSpec;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .parent()
        .and_then(Path::parent)
        .unwrap()
        .join("fixtures")
}

fn corpus_programs() -> Vec<(String, String)> {
    let dir = fixtures().join("programs");
    let mut out = Vec::new();
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)
        .unwrap()
        .flatten()
        .map(|e| e.path())
        .filter(|p| p.extension().map(|e| e == "mpl").unwrap_or(false))
        .collect();
    paths.sort();
    for path in paths {
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        out.push((name, std::fs::read_to_string(&path).unwrap()));
    }
    out
}

#[test]
fn editor_fixture_has_expected_shape() {
    let source = std::fs::read_to_string(fixtures().join("programs/editor_patch.mpl")).unwrap();
    let program = parse(&source, "editor_patch.mpl").unwrap();
    assert_eq!(program.functions.len(), 4);
    assert_eq!(program.globals.len(), 1);
    assert_eq!(program.globals[0].name, "TMPOUTNAME");
    assert!(program.function("make_tempfile").is_some());
}

#[test]
fn every_corpus_program_roundtrips_through_the_printer() {
    let programs = corpus_programs();
    assert!(programs.len() >= 10);
    for (name, source) in programs {
        let program = parse(&source, &name).unwrap_or_else(|e| panic!("{name}: {e}"));
        let printed = program.canonical_text();
        let again = parse(&printed, &name).unwrap_or_else(|e| panic!("{name} reprint: {e}"));
        assert!(
            program.structurally_eq(&again),
            "{name} changed across print/parse"
        );
    }
}

#[test]
fn instrumented_corpus_programs_stay_parseable_and_stable() {
    let builtins = BuiltinSet::default();
    let spec = TrustedSpec::parse(
        "const:wget\nconst:ls\nconst:/bin/ed\nconst:select\n",
        Path::new("."),
        "all.tcs",
    )
    .unwrap();
    for (name, source) in corpus_programs() {
        let program = parse(&source, &name).unwrap();
        let analysis = dataflow::analyze(&program, &spec, &builtins);
        let once = instrument::instrument(&program, &spec, &analysis, &builtins);
        let reparsed = parse(&once.canonical_text(), &name)
            .unwrap_or_else(|e| panic!("{name} instrumented output: {e}"));
        let again_analysis = dataflow::analyze(&reparsed, &spec, &builtins);
        let twice = instrument::instrument(&reparsed, &spec, &again_analysis, &builtins);
        assert!(
            reparsed.structurally_eq(&twice),
            "{name}: instrumentation not idempotent"
        );
    }
}

#[test]
fn analysis_report_matches_the_golden_file() {
    let source = std::fs::read_to_string(fixtures().join("programs/editor_patch.mpl")).unwrap();
    let program = parse(&source, "fixtures/programs/editor_patch.mpl").unwrap();
    let spec = TrustedSpec::load(&fixtures().join("specs/editor.tcs")).unwrap();
    let builtins = BuiltinSet::default();
    let report = dataflow::render_report(&dataflow::analyze(&program, &spec, &builtins));
    let golden = std::fs::read_to_string(fixtures().join("golden/editor_report.txt")).unwrap();
    assert_eq!(
        report, golden,
        "analysis report drifted from the golden file"
    );
}

#[test]
fn analysis_report_snapshot_for_the_editor_program() {
    let source = std::fs::read_to_string(fixtures().join("programs/editor_patch.mpl")).unwrap();
    let program = parse(&source, "editor_patch.mpl").unwrap();
    let spec = TrustedSpec::load(&fixtures().join("specs/editor.tcs")).unwrap();
    let builtins = BuiltinSet::default();
    let report = dataflow::render_report(&dataflow::analyze(&program, &spec, &builtins));

    // Key structural lines, in the stable report order.
    let expectations = [
        "main -> make_tempfile",
        "main -> popen",
        "src \"/bin/ed\"",
        "var editor_program",
        "sink popen()",
        "src dir_name()",
        "fn  make_tempfile()",
        "== ins_out ==",
        "main editor_program",
        "== unresolved ==\n(none)",
    ];
    let mut cursor = 0;
    for needle in expectations {
        match report[cursor..].find(needle) {
            Some(offset) => cursor += offset,
            None => panic!("report missing `{needle}` after byte {cursor}:\n{report}"),
        }
    }
}

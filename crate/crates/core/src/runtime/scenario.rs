//! Scenario manifests: a program, its trusted-command spec, the inputs it
//! will read, and the fixtures behind every subsystem, all in one TOML file.
//!
//! ```toml
//! program = "programs/fetch.mpl"
//! spec = "specs/fetch.tcs"
//! seed = 42
//! inputs = ["http://example.com"]
//!
//! [env]
//! TMPDIR = "/tmp"
//!
//! [shell]
//! fixture = "shell/basic.shellfx"
//! expansion = 1
//!
//! [sql]
//! tables = ["users"]
//! columns = ["id", "name"]
//!
//! [[xml.docs]]
//! path = "feed.xml"
//! file = "xml/feed.xml"
//! trusted = true
//!
//! [[xml.resources]]
//! uri = "data/a.txt"
//! content = "alpha"
//! ```
//!
//! Relative paths resolve against the manifest's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::tcs::{SpecError, TrustedSpec};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Toml {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("{0}")]
    Invalid(String),
}

fn default_expansion() -> usize {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShellSection {
    pub fixture: Option<PathBuf>,
    #[serde(default = "default_expansion")]
    pub expansion: usize,
}

impl Default for ShellSection {
    fn default() -> Self {
        ShellSection {
            fixture: None,
            expansion: 1,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SqlSection {
    #[serde(default)]
    pub tables: Vec<String>,
    #[serde(default)]
    pub columns: Vec<String>,
    #[serde(default)]
    pub extra_vocab: Vec<String>,
    #[serde(default = "default_expansion")]
    pub expansion: usize,
    /// Pre-randomize table names into the translator namespace; scenarios
    /// exercising `tbl_derand` turn this on.
    #[serde(default)]
    pub translate_tables: bool,
}

impl Default for SqlSection {
    fn default() -> Self {
        SqlSection {
            tables: Vec::new(),
            columns: Vec::new(),
            extra_vocab: Vec::new(),
            expansion: 1,
            translate_tables: false,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XmlDocEntry {
    pub path: String,
    pub file: PathBuf,
    #[serde(default)]
    pub trusted: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XmlResourceEntry {
    pub uri: String,
    pub content: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XmlSection {
    #[serde(default)]
    pub docs: Vec<XmlDocEntry>,
    #[serde(default)]
    pub resources: Vec<XmlResourceEntry>,
    #[serde(default = "default_expansion")]
    pub expansion: usize,
}

impl Default for XmlSection {
    fn default() -> Self {
        XmlSection {
            docs: Vec::new(),
            resources: Vec::new(),
            expansion: 1,
        }
    }
}

/// Expected outcomes, used by the scenario runner and the attack corpus.
#[derive(Debug, Deserialize, Default, Clone)]
#[serde(deny_unknown_fields)]
pub struct Expectations {
    /// Shell command names expected to execute, in dispatch order.
    #[serde(default)]
    pub shell_executed: Vec<String>,
    /// Shell command names expected to be refused, in dispatch order.
    #[serde(default)]
    pub shell_blocked: Vec<String>,
    /// Query verdicts in dispatch order: "executed", "unknown_term_error",
    /// "syntax_error".
    #[serde(default)]
    pub sql_verdicts: Vec<String>,
    /// Count of XML entities expected to resolve / be denied.
    pub xml_resolved: Option<usize>,
    pub xml_denied: Option<usize>,
    /// Substrings that must appear in effect events.
    #[serde(default)]
    pub effects_include: Vec<String>,
    /// Substrings that must not appear anywhere in the trace.
    #[serde(default)]
    pub effects_exclude: Vec<String>,
    /// Leaked records allowed (misuse demonstrations only).
    #[serde(default)]
    pub allow_leaks: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    program: PathBuf,
    spec: PathBuf,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    inputs: Vec<String>,
    #[serde(default)]
    env: BTreeMap<String, String>,
    #[serde(default)]
    config: BTreeMap<String, BTreeMap<String, String>>,
    #[serde(default)]
    shell: ShellSection,
    #[serde(default)]
    sql: SqlSection,
    #[serde(default)]
    xml: XmlSection,
    #[serde(default)]
    expect: Option<Expectations>,
}

/// A fully resolved scenario: program text, spec, fixtures, expectations.
#[derive(Debug)]
pub struct Scenario {
    pub name: String,
    pub program_path: PathBuf,
    pub program_text: String,
    pub spec: TrustedSpec,
    pub seed: u64,
    pub inputs: Vec<Vec<u8>>,
    pub env: BTreeMap<String, String>,
    pub config: BTreeMap<String, BTreeMap<String, String>>,
    pub shell_fixture: String,
    pub shell_expansion: usize,
    pub sql_tables: Vec<String>,
    pub sql_columns: Vec<String>,
    pub sql_extra_vocab: Vec<String>,
    pub sql_expansion: usize,
    pub sql_translate_tables: bool,
    pub xml_docs: Vec<(String, String, bool)>, // (path, content, trusted)
    pub xml_resources: Vec<(String, Vec<u8>)>,
    pub xml_expansion: usize,
    pub expect: Option<Expectations>,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let file: ScenarioFile = toml::from_str(&text).map_err(|source| ScenarioError::Toml {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));

        let read = |p: &Path| -> Result<String, ScenarioError> {
            let resolved = base.join(p);
            std::fs::read_to_string(&resolved).map_err(|source| ScenarioError::Io {
                path: resolved.clone(),
                source,
            })
        };

        let program_text = read(&file.program)?;
        let spec = TrustedSpec::load(&base.join(&file.spec))?;
        let shell_fixture = match &file.shell.fixture {
            Some(p) => read(p)?,
            None => String::new(),
        };
        let mut xml_docs = Vec::new();
        for doc in &file.xml.docs {
            xml_docs.push((doc.path.clone(), read(&doc.file)?, doc.trusted));
        }

        Ok(Scenario {
            name: path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("scenario")
                .to_owned(),
            program_path: base.join(&file.program),
            program_text,
            spec,
            seed: file.seed.unwrap_or(1),
            inputs: file.inputs.iter().map(|s| s.clone().into_bytes()).collect(),
            env: file.env,
            config: file.config,
            shell_fixture,
            shell_expansion: file.shell.expansion,
            sql_tables: file.sql.tables,
            sql_columns: file.sql.columns,
            sql_extra_vocab: file.sql.extra_vocab,
            sql_expansion: file.sql.expansion,
            sql_translate_tables: file.sql.translate_tables,
            xml_docs,
            xml_resources: file
                .xml
                .resources
                .iter()
                .map(|r| (r.uri.clone(), r.content.clone().into_bytes()))
                .collect(),
            xml_expansion: file.xml.expansion,
            expect: file.expect,
        })
    }

    /// In-memory constructor for tests and generated programs.
    pub fn inline(program_text: &str, spec: TrustedSpec, seed: u64) -> Scenario {
        Scenario {
            name: "inline".to_owned(),
            program_path: PathBuf::from("inline.mpl"),
            program_text: program_text.to_owned(),
            spec,
            seed,
            inputs: Vec::new(),
            env: BTreeMap::new(),
            config: BTreeMap::new(),
            shell_fixture: String::new(),
            shell_expansion: 1,
            sql_tables: Vec::new(),
            sql_columns: Vec::new(),
            sql_extra_vocab: Vec::new(),
            sql_expansion: 1,
            sql_translate_tables: false,
            xml_docs: Vec::new(),
            xml_resources: Vec::new(),
            xml_expansion: 2,
            expect: None,
        }
    }

    pub fn with_inputs(mut self, inputs: &[&str]) -> Scenario {
        self.inputs = inputs.iter().map(|s| s.as_bytes().to_vec()).collect();
        self
    }

    pub fn with_shell_fixture(mut self, fixture: &str) -> Scenario {
        self.shell_fixture = fixture.to_owned();
        self
    }
}

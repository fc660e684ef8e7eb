//! Trusted command specification: which sources of data count as intended
//! commands.
//!
//! A spec is a line-oriented file with one directive per line and `#`
//! comments:
//!
//! ```text
//! const:/bin/ed          # a hard-coded command string
//! config:app.conf        # a configuration file whose values are trusted
//! dir:bin                # a folder whose files are trusted commands
//! api:getenv             # a builtin whose return values are trusted
//! ```
//!
//! `config:` and `dir:` paths are resolved relative to the spec file and
//! expanded when the spec is loaded; runtime additions to a trusted folder
//! are not trusted (snapshot semantics).

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::builtins::{BuiltinSet, SinkKind};
use crate::minilang::Program;

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("cannot read {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}: unknown directive `{directive}`")]
    UnknownDirective {
        file: String,
        line: usize,
        directive: String,
    },
    #[error("{file}:{line}: {message}")]
    BadValue {
        file: String,
        line: usize,
        message: String,
    },
    #[error("{file}: specification defines no trusted sources")]
    Empty { file: String },
}

/// One trusted source definition.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum SourceDef {
    ConstCommand(String),
    ConfigFile(String),
    TrustedFolder(String),
    TrustedApi(String),
}

#[derive(Debug, Clone, Default)]
pub struct TrustedSpec {
    pub defs: Vec<SourceDef>,
    /// Command basenames derived from const entries, config values and
    /// trusted-folder listings at load time.
    pub command_names: BTreeSet<String>,
    config_paths: BTreeSet<String>,
    trusted_apis: BTreeSet<String>,
}

/// Basename of a command token: the part after the last `/`.
pub fn command_basename(token: &str) -> &str {
    token.rsplit('/').next().unwrap_or(token)
}

fn first_token(text: &str) -> Option<&str> {
    text.split_ascii_whitespace().next()
}

impl TrustedSpec {
    /// Loads and expands a spec file.
    pub fn load(path: &Path) -> Result<TrustedSpec, SpecError> {
        let text = std::fs::read_to_string(path).map_err(|source| SpecError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let file = path.display().to_string();
        TrustedSpec::parse(&text, base, &file)
    }

    /// Parses spec text; relative `config:`/`dir:` paths resolve under
    /// `base`.
    pub fn parse(text: &str, base: &Path, file: &str) -> Result<TrustedSpec, SpecError> {
        let mut spec = TrustedSpec::default();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (directive, value) =
                line.split_once(':')
                    .ok_or_else(|| SpecError::UnknownDirective {
                        file: file.to_owned(),
                        line: line_no,
                        directive: line.to_owned(),
                    })?;
            let value = value.trim();
            if value.is_empty() {
                return Err(SpecError::BadValue {
                    file: file.to_owned(),
                    line: line_no,
                    message: format!("`{directive}:` needs a value"),
                });
            }
            match directive {
                "const" => {
                    if let Some(tok) = first_token(value) {
                        spec.command_names.insert(command_basename(tok).to_owned());
                    }
                    spec.defs.push(SourceDef::ConstCommand(value.to_owned()));
                }
                "config" => {
                    let resolved = base.join(value);
                    let text =
                        std::fs::read_to_string(&resolved).map_err(|source| SpecError::Io {
                            path: resolved.clone(),
                            source,
                        })?;
                    for cfg_line in text.lines() {
                        let cfg = cfg_line.split('#').next().unwrap_or("").trim();
                        if let Some((_, v)) = cfg.split_once('=') {
                            if let Some(tok) = first_token(v.trim()) {
                                spec.command_names.insert(command_basename(tok).to_owned());
                            }
                        }
                    }
                    spec.config_paths.insert(value.to_owned());
                    spec.defs.push(SourceDef::ConfigFile(value.to_owned()));
                }
                "dir" => {
                    let resolved = base.join(value);
                    let entries = std::fs::read_dir(&resolved).map_err(|source| SpecError::Io {
                        path: resolved.clone(),
                        source,
                    })?;
                    for entry in entries.flatten() {
                        if let Some(name) = entry.file_name().to_str() {
                            spec.command_names.insert(name.to_owned());
                        }
                    }
                    spec.defs.push(SourceDef::TrustedFolder(value.to_owned()));
                }
                "api" => {
                    spec.trusted_apis.insert(value.to_owned());
                    spec.defs.push(SourceDef::TrustedApi(value.to_owned()));
                }
                other => {
                    return Err(SpecError::UnknownDirective {
                        file: file.to_owned(),
                        line: line_no,
                        directive: other.to_owned(),
                    })
                }
            }
        }
        if spec.defs.is_empty() {
            return Err(SpecError::Empty {
                file: file.to_owned(),
            });
        }
        Ok(spec)
    }

    /// An empty spec for analyses that intentionally start with no trusted
    /// sources (spec suggestion). `load`/`parse` never produce this.
    pub fn empty_for_suggestion() -> TrustedSpec {
        TrustedSpec::default()
    }

    /// Serializes to the spec file format; `parse` is a left inverse.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for def in &self.defs {
            match def {
                SourceDef::ConstCommand(v) => writeln!(out, "const:{v}").unwrap(),
                SourceDef::ConfigFile(v) => writeln!(out, "config:{v}").unwrap(),
                SourceDef::TrustedFolder(v) => writeln!(out, "dir:{v}").unwrap(),
                SourceDef::TrustedApi(v) => writeln!(out, "api:{v}").unwrap(),
            }
        }
        out
    }

    pub fn is_trusted_api(&self, name: &str) -> bool {
        self.trusted_apis.contains(name)
    }

    pub fn is_trusted_config(&self, path: &str) -> bool {
        self.config_paths.contains(path)
    }

    pub fn add_const(&mut self, value: &str) {
        if let Some(tok) = first_token(value) {
            self.command_names.insert(command_basename(tok).to_owned());
        }
        self.defs.push(SourceDef::ConstCommand(value.to_owned()));
    }

    /// Classifies a string literal: a constant is a trusted source iff it
    /// contains a known command name — a whitespace token whose basename is
    /// a spec-derived command name, or a word-run in the sink-command
    /// vocabulary. Constants with no command content are untrusted.
    ///
    /// Word runs are taken without quote structure: a query fragment often
    /// carries an unbalanced quote, so its keywords must still be seen.
    pub fn literal_is_trusted(&self, text: &str, vocabulary: &BTreeSet<String>) -> bool {
        for token in text.split_ascii_whitespace() {
            if self
                .command_names
                .contains(command_basename(token.trim_matches(|c: char| c == '"')))
            {
                return true;
            }
        }
        for run in text
            .split(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .filter(|r| !r.is_empty())
        {
            if vocabulary.contains(&run.to_lowercase()) {
                return true;
            }
        }
        false
    }
}

/// Shared trust rule for input-API returns: the API is spec-trusted, or it
/// is a config read whose path literal names a trusted config file.
pub fn api_return_is_trusted(
    spec: &TrustedSpec,
    api_name: &str,
    first_literal_arg: Option<&str>,
) -> bool {
    if spec.is_trusted_api(api_name) {
        return true;
    }
    api_name == "read_config"
        && first_literal_arg
            .map(|p| spec.is_trusted_config(p))
            .unwrap_or(false)
}

/// A spec-integrity violation: untrusted data flowing into a trusted
/// configuration file.
#[derive(Debug, Clone)]
pub struct Violation {
    pub location: crate::minilang::Loc,
    pub config_path: String,
    pub message: String,
}

/// Flags every write into a trusted config path whose written value can
/// carry untrusted data. A spec whose trusted sources are attacker-writable
/// must be redefined before instrumentation means anything.
pub fn check_spec_integrity(
    spec: &TrustedSpec,
    program: &Program,
    builtins: &BuiltinSet,
    vocabulary: &BTreeSet<String>,
) -> Vec<Violation> {
    crate::dataflow::config_write_violations(program, spec, builtins, vocabulary)
}

/// Outcome of spec suggestion: proposed const entries plus warnings about
/// sinks whose command-name position is completely dynamic.
#[derive(Debug)]
pub struct SuggestOutcome {
    pub spec: TrustedSpec,
    pub warnings: Vec<String>,
}

/// Proposes `const:` entries for every literal that reaches the command-name
/// (first-token) position of a sink argument.
pub fn suggest_spec(
    program: &Program,
    builtins: &BuiltinSet,
    sink_names: &BTreeSet<String>,
) -> SuggestOutcome {
    let origins = crate::dataflow::command_name_origins(program, builtins, sink_names);
    let mut spec = TrustedSpec::default();
    let mut warnings = Vec::new();
    let mut seen = BTreeSet::new();
    for origin in origins {
        match origin {
            crate::dataflow::CommandOrigin::Literal { text, .. } => {
                if let Some(tok) = first_token(&text) {
                    if seen.insert(tok.to_owned()) {
                        spec.add_const(tok);
                    }
                }
            }
            crate::dataflow::CommandOrigin::Dynamic { sink, loc } => {
                warnings.push(format!(
                    "{loc}: completely dynamic command passed to `{sink}`; nothing to trust"
                ));
            }
        }
    }
    SuggestOutcome { spec, warnings }
}

/// Default sink names for suggestion runs.
pub fn default_sink_names(builtins: &BuiltinSet) -> BTreeSet<String> {
    builtins
        .sink_names()
        .iter()
        .map(|s| s.to_string())
        .collect()
}

/// The sink-command vocabulary used for literal classification: the query
/// engine keywords. Shell command names come from the spec itself.
pub fn default_vocabulary() -> BTreeSet<String> {
    crate::sql::default_vocabulary()
}

/// Convenience: kind lookup that treats unknown names as shell sinks.
pub fn sink_kind_or_shell(builtins: &BuiltinSet, name: &str) -> SinkKind {
    builtins.sink_kind(name).unwrap_or(SinkKind::Shell)
}

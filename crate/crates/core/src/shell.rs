//! Simulated shell with a randomized command namespace.
//!
//! The shell knows two kinds of commands: internal ones implemented inside
//! the shell process, and external ones looked up as binaries on a
//! filesystem view. Both namespaces are randomized: a command name executes
//! only when it matches a live randomization record whose original names an
//! existing command. Injected names carry no record, so lookup fails with
//! the ordinary command-not-found path and no side effects. Arguments after
//! the command name pass through untouched.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use thiserror::Error;

use crate::pad::RecordStore;

#[derive(Debug, Error)]
pub enum ShellError {
    #[error("{line}: bad fixture entry: {message}")]
    BadFixture { line: usize, message: String },
    #[error("internal and external command names overlap: {0}")]
    NamespaceOverlap(String),
}

/// Declared behavior of an external binary, so tests can assert that blocked
/// commands caused none of it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Effect {
    Log(String),
    Write(String),
    Read(String),
}

#[derive(Debug, Clone)]
pub struct BinaryFixture {
    pub path: String,
    pub effects: Vec<Effect>,
}

impl BinaryFixture {
    pub fn basename(&self) -> &str {
        self.path.rsplit('/').next().unwrap_or(&self.path)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecStatus {
    Executed,
    NotFound,
    Blocked,
}

#[derive(Debug, Clone)]
pub struct ExecOutcome {
    pub status: ExecStatus,
    pub command_name: String,
    pub argv: Vec<String>,
    pub detail: String,
}

/// The shell environment: command namespaces, the record store backing the
/// randomized view, and the observable side effects applied so far.
pub struct ShellEnv {
    internal_commands: BTreeSet<String>,
    external_binaries: BTreeMap<String, BinaryFixture>,
    pub store: RecordStore,
    spent: HashSet<Vec<u8>>,
    pub effects_log: Vec<String>,
    pub files: BTreeSet<String>,
}

impl ShellEnv {
    pub fn new(store: RecordStore) -> Self {
        ShellEnv {
            internal_commands: BTreeSet::new(),
            external_binaries: BTreeMap::new(),
            store,
            spent: HashSet::new(),
            effects_log: Vec::new(),
            files: BTreeSet::new(),
        }
    }

    pub fn add_internal(&mut self, name: &str) -> Result<(), ShellError> {
        if self
            .external_binaries
            .values()
            .any(|b| b.basename() == name)
        {
            return Err(ShellError::NamespaceOverlap(name.to_owned()));
        }
        self.internal_commands.insert(name.to_owned());
        Ok(())
    }

    pub fn add_binary(&mut self, fixture: BinaryFixture) -> Result<(), ShellError> {
        if self.internal_commands.contains(fixture.basename()) {
            return Err(ShellError::NamespaceOverlap(fixture.basename().to_owned()));
        }
        self.external_binaries.insert(fixture.path.clone(), fixture);
        Ok(())
    }

    /// Loads a line-oriented fixture: `internal NAME` and
    /// `binary PATH [log:TEXT] [write:FILE] [read:FILE]`, `#` comments.
    pub fn load_fixture(&mut self, text: &str) -> Result<(), ShellError> {
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_ascii_whitespace();
            match parts.next() {
                Some("internal") => {
                    let name = parts.next().ok_or_else(|| ShellError::BadFixture {
                        line: line_no,
                        message: "internal needs a name".into(),
                    })?;
                    self.add_internal(name)?;
                }
                Some("binary") => {
                    let path = parts.next().ok_or_else(|| ShellError::BadFixture {
                        line: line_no,
                        message: "binary needs a path".into(),
                    })?;
                    let mut effects = Vec::new();
                    for part in parts {
                        let effect = match part.split_once(':') {
                            Some(("log", v)) => Effect::Log(v.to_owned()),
                            Some(("write", v)) => Effect::Write(v.to_owned()),
                            Some(("read", v)) => Effect::Read(v.to_owned()),
                            _ => {
                                return Err(ShellError::BadFixture {
                                    line: line_no,
                                    message: format!("unknown effect `{part}`"),
                                })
                            }
                        };
                        effects.push(effect);
                    }
                    self.add_binary(BinaryFixture {
                        path: path.to_owned(),
                        effects,
                    })?;
                }
                Some(other) => {
                    return Err(ShellError::BadFixture {
                        line: line_no,
                        message: format!("unknown entry `{other}`"),
                    })
                }
                None => {}
            }
        }
        Ok(())
    }

    pub fn internal_commands(&self) -> &BTreeSet<String> {
        &self.internal_commands
    }

    pub fn binaries(&self) -> impl Iterator<Item = &BinaryFixture> {
        self.external_binaries.values()
    }

    fn find_binary(&self, name: &str) -> Option<&BinaryFixture> {
        if name.contains('/') {
            self.external_binaries.get(name)
        } else {
            self.external_binaries
                .values()
                .find(|b| b.basename() == name)
        }
    }

    /// Dispatches one simple command line: the first whitespace token is the
    /// command name, checked against the randomized namespace; everything
    /// after it is passed through as arguments.
    pub fn spawn_and_execute(&mut self, line: &[u8]) -> ExecOutcome {
        let text = String::from_utf8_lossy(line).into_owned();
        let mut tokens = text.split_ascii_whitespace();
        let Some(first) = tokens.next() else {
            return ExecOutcome {
                status: ExecStatus::NotFound,
                command_name: String::new(),
                argv: Vec::new(),
                detail: "empty command".into(),
            };
        };
        let argv: Vec<String> = tokens.map(str::to_owned).collect();

        let record = self.store.derandomize(first.as_bytes()).cloned();
        let Some(record) = record else {
            let detail = if self.spent.contains(first.as_bytes()) {
                // A previously valid randomized command replayed after its
                // pad was discarded.
                return ExecOutcome {
                    status: ExecStatus::Blocked,
                    command_name: first.to_owned(),
                    argv,
                    detail: "randomization record already consumed".into(),
                };
            } else {
                format!("{first}: command not found")
            };
            return ExecOutcome {
                status: ExecStatus::NotFound,
                command_name: first.to_owned(),
                argv,
                detail,
            };
        };

        // The execution API invocation spends the pad either way.
        self.store.consume(&record.randomized);
        self.spent.insert(record.randomized.clone());

        let original = String::from_utf8_lossy(&record.original).trim().to_owned();
        // The derandomized string may carry its own arguments ("wget -q"):
        // its first token is the command name, the rest prepend the argv.
        let mut orig_tokens = original.split_ascii_whitespace();
        let Some(name) = orig_tokens.next() else {
            return ExecOutcome {
                status: ExecStatus::NotFound,
                command_name: String::new(),
                argv,
                detail: "record held no command name".into(),
            };
        };
        let mut full_argv: Vec<String> = orig_tokens.map(str::to_owned).collect();
        full_argv.extend(argv);

        if self.internal_commands.contains(name) {
            self.effects_log
                .push(format!("internal {name} {}", full_argv.join(" ")));
            return ExecOutcome {
                status: ExecStatus::Executed,
                command_name: name.to_owned(),
                argv: full_argv,
                detail: "internal command".into(),
            };
        }

        match self.find_binary(name) {
            Some(binary) => {
                let bin_name = binary.basename().to_owned();
                let effects = binary.effects.clone();
                for effect in effects {
                    match effect {
                        Effect::Log(msg) => self.effects_log.push(format!("{bin_name}: {msg}")),
                        Effect::Write(file) => {
                            self.files.insert(file.clone());
                            self.effects_log.push(format!("{bin_name}: write {file}"));
                        }
                        Effect::Read(file) => {
                            self.effects_log.push(format!("{bin_name}: read {file}"));
                        }
                    }
                }
                ExecOutcome {
                    status: ExecStatus::Executed,
                    command_name: bin_name,
                    argv: full_argv,
                    detail: "external binary".into(),
                }
            }
            None => ExecOutcome {
                status: ExecStatus::NotFound,
                command_name: name.to_owned(),
                argv: full_argv,
                detail: format!("{name}: no such binary in the filesystem view"),
            },
        }
    }

    /// Splits a compound line and dispatches each simple command.
    pub fn execute_compound(&mut self, line: &[u8]) -> Vec<ExecOutcome> {
        split_compound(line)
            .iter()
            .map(|simple| self.spawn_and_execute(simple))
            .collect()
    }

    /// The unprotected baseline: command names matched directly against the
    /// plain namespaces, no records involved.
    pub fn spawn_and_execute_plain(&mut self, line: &[u8]) -> ExecOutcome {
        let text = String::from_utf8_lossy(line).into_owned();
        let mut tokens = text.split_ascii_whitespace();
        let Some(name) = tokens.next() else {
            return ExecOutcome {
                status: ExecStatus::NotFound,
                command_name: String::new(),
                argv: Vec::new(),
                detail: "empty command".into(),
            };
        };
        let argv: Vec<String> = tokens.map(str::to_owned).collect();
        if self.internal_commands.contains(name) {
            self.effects_log
                .push(format!("internal {name} {}", argv.join(" ")));
            return ExecOutcome {
                status: ExecStatus::Executed,
                command_name: name.to_owned(),
                argv,
                detail: "internal command".into(),
            };
        }
        match self.find_binary(name) {
            Some(binary) => {
                let bin_name = binary.basename().to_owned();
                let effects = binary.effects.clone();
                for effect in effects {
                    match effect {
                        Effect::Log(msg) => self.effects_log.push(format!("{bin_name}: {msg}")),
                        Effect::Write(file) => {
                            self.files.insert(file.clone());
                            self.effects_log.push(format!("{bin_name}: write {file}"));
                        }
                        Effect::Read(file) => {
                            self.effects_log.push(format!("{bin_name}: read {file}"));
                        }
                    }
                }
                ExecOutcome {
                    status: ExecStatus::Executed,
                    command_name: bin_name,
                    argv,
                    detail: "external binary".into(),
                }
            }
            None => ExecOutcome {
                status: ExecStatus::NotFound,
                command_name: name.to_owned(),
                argv,
                detail: format!("{name}: command not found"),
            },
        }
    }
}

/// Randomizes the command-name tokens of a composed fragment: the first
/// whitespace-delimited token of the fragment and of every `;`/newline
/// segment inside it gets its own fresh pad and record, while separators,
/// whitespace and arguments pass through verbatim. Line structure therefore
/// survives, and each simple command is validated against its own pad.
pub fn randomize_command_names(
    fragment: &[u8],
    store: &mut RecordStore,
    scheme: &crate::pad::Scheme,
) -> Result<(Vec<u8>, Vec<crate::pad::Record>), crate::pad::PadError> {
    let mut out = Vec::with_capacity(fragment.len() * scheme.expansion());
    let mut records = Vec::new();
    let mut at_command_start = true;
    let mut i = 0;
    while i < fragment.len() {
        let b = fragment[i];
        if b == b';' || b == b'\n' {
            at_command_start = true;
            out.push(b);
            i += 1;
        } else if b.is_ascii_whitespace() {
            out.push(b);
            i += 1;
        } else if at_command_start {
            let start = i;
            while i < fragment.len()
                && !fragment[i].is_ascii_whitespace()
                && fragment[i] != b';'
                && fragment[i] != b'\n'
            {
                i += 1;
            }
            let record = store.randomize(&fragment[start..i], scheme)?;
            out.extend_from_slice(&record.randomized);
            records.push(record);
            at_command_start = false;
        } else {
            out.push(b);
            i += 1;
        }
    }
    Ok((out, records))
}

/// Splits on `;` and newline, dropping empty segments. These are the only
/// separators the simulated shell understands.
pub fn split_compound(line: &[u8]) -> Vec<Vec<u8>> {
    line.split(|b| *b == b';' || *b == b'\n')
        .map(|seg| {
            let start = seg.iter().position(|b| !b.is_ascii_whitespace());
            let end = seg.iter().rposition(|b| !b.is_ascii_whitespace());
            match (start, end) {
                (Some(s), Some(e)) => seg[s..=e].to_vec(),
                _ => Vec::new(),
            }
        })
        .filter(|seg| !seg.is_empty())
        .collect()
}

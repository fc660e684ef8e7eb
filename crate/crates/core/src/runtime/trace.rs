//! Execution traces: the ordered record of everything observable a run did.

use std::fmt;

use crate::builtins::SinkKind;
use crate::pad::TableId;
use crate::shell::ExecStatus;
use crate::sql::VerdictStatus;

use super::value::Taint;

#[derive(Debug, Clone)]
pub enum Event {
    /// Non-sink builtin with observable effect (fopen, unlink, log, ...).
    Builtin {
        name: String,
        args: Vec<String>,
    },
    RecordCreated {
        subsystem: SinkKind,
        table: TableId,
        original: String,
    },
    RecordConsumed {
        subsystem: SinkKind,
        original: String,
    },
    ShellCommand {
        status: ExecStatus,
        command: String,
        detail: String,
    },
    SqlQuery {
        status: VerdictStatus,
        received: String,
        offending: Vec<String>,
    },
    XmlEntity {
        doc: String,
        entity: String,
        resolved: bool,
    },
    /// Declared side effect of a simulated external binary.
    ShellEffect(String),
    Note(String),
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::Builtin { name, args } => write!(f, "builtin {name}({})", args.join(", ")),
            Event::RecordCreated {
                subsystem,
                table,
                original,
            } => write!(f, "record+ {subsystem:?} {table} \"{original}\""),
            Event::RecordConsumed {
                subsystem,
                original,
            } => write!(f, "record- {subsystem:?} \"{original}\""),
            Event::ShellCommand {
                status,
                command,
                detail,
            } => write!(f, "shell {status:?} {command} ({detail})"),
            Event::SqlQuery {
                status,
                received,
                offending,
            } => {
                if offending.is_empty() {
                    write!(f, "sql {status:?} \"{received}\"")
                } else {
                    write!(f, "sql {status:?} \"{received}\" offending={offending:?}")
                }
            }
            Event::XmlEntity {
                doc,
                entity,
                resolved,
            } => write!(
                f,
                "xml {doc} &{entity}; {}",
                if *resolved { "resolved" } else { "denied" }
            ),
            Event::ShellEffect(line) => write!(f, "effect {line}"),
            Event::Note(text) => write!(f, "note {text}"),
        }
    }
}

/// Taint partition of one sink argument at dispatch time: byte-run lengths
/// with their dynamic taint and static mark.
#[derive(Debug, Clone)]
pub struct SinkTaint {
    pub sink: String,
    pub kind: SinkKind,
    pub runs: Vec<(usize, Taint, bool)>,
}

impl SinkTaint {
    /// Byte positions the dynamic taint calls trusted.
    pub fn trusted_positions(&self) -> Vec<bool> {
        let mut out = Vec::new();
        for (len, taint, _) in &self.runs {
            out.extend(std::iter::repeat_n(*taint == Taint::Trusted, *len));
        }
        out
    }

    /// Byte positions the instrumentation marked for randomization.
    pub fn marked_positions(&self) -> Vec<bool> {
        let mut out = Vec::new();
        for (len, _, marked) in &self.runs {
            out.extend(std::iter::repeat_n(*marked, *len));
        }
        out
    }
}

#[derive(Debug, Default)]
pub struct ExecutionTrace {
    pub events: Vec<Event>,
    /// Live records remaining after teardown; anything nonzero is a leak.
    pub leaked_records: usize,
    pub records_created: usize,
    pub records_consumed: usize,
    /// Per-dispatch taint partitions (oracle data).
    pub sink_taints: Vec<SinkTaint>,
}

impl ExecutionTrace {
    pub fn push(&mut self, event: Event) {
        self.events.push(event);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&e.to_string());
            out.push('\n');
        }
        out.push_str(&format!(
            "records: created={} consumed={} leaked={}\n",
            self.records_created, self.records_consumed, self.leaked_records
        ));
        out
    }

    /// Observable non-sink behavior — builtin calls and subsystem side
    /// effects — that must not change when instrumentation is added.
    pub fn non_sink_builtin_lines(&self) -> Vec<String> {
        self.events
            .iter()
            .filter_map(|e| match e {
                Event::Builtin { .. } | Event::ShellEffect(_) => Some(e.to_string()),
                _ => None,
            })
            .collect()
    }

    pub fn shell_outcomes(&self) -> Vec<(ExecStatus, String)> {
        self.events
            .iter()
            .filter_map(|e| match e {
                Event::ShellCommand {
                    status, command, ..
                } => Some((*status, command.clone())),
                _ => None,
            })
            .collect()
    }

    pub fn sql_verdicts(&self) -> Vec<VerdictStatus> {
        self.events
            .iter()
            .filter_map(|e| match e {
                Event::SqlQuery { status, .. } => Some(*status),
                _ => None,
            })
            .collect()
    }

    pub fn xml_resolutions(&self) -> Vec<(String, bool)> {
        self.events
            .iter()
            .filter_map(|e| match e {
                Event::XmlEntity {
                    entity, resolved, ..
                } => Some((entity.clone(), *resolved)),
                _ => None,
            })
            .collect()
    }
}

//! Builtin function registry for the mini language.
//!
//! Sink and source sets are configuration, not hard-coded language
//! structure: the analysis and the runtime both consult a [`BuiltinSet`]
//! to decide which calls execute commands, which ones read external data,
//! and which ones are plain side effects.

use std::collections::HashMap;

/// Which command subsystem a sink hands its composed string to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SinkKind {
    Shell,
    Sql,
    Xml,
}

/// Role of a builtin, as far as analysis is concerned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinRole {
    /// Hands its argument to a command subsystem.
    Sink(SinkKind),
    /// Returns data read from outside the program (stdin, environment,
    /// configuration, ...). Trust is decided by the trusted-command spec.
    InputApi,
    /// Observable side effect that is not a command sink (file I/O, logging).
    Effect,
    /// Randomization wrapper inserted by the instrumenter.
    RandWrapper,
    /// Table-name translation wrapper inserted by the instrumenter.
    TblDerandWrapper,
}

#[derive(Debug, Clone)]
pub struct BuiltinSet {
    roles: HashMap<String, BuiltinRole>,
}

impl Default for BuiltinSet {
    fn default() -> Self {
        let mut set = BuiltinSet {
            roles: HashMap::new(),
        };
        set.add_sink("system", SinkKind::Shell);
        set.add_sink("popen", SinkKind::Shell);
        set.add_sink("exec", SinkKind::Shell);
        set.add_sink("sql_query", SinkKind::Sql);
        set.add_sink("xml_parse_file", SinkKind::Xml);
        for api in ["input", "getenv", "read_config", "dir_name", "pget_line"] {
            set.add_input_api(api);
        }
        for eff in ["fopen", "unlink", "log", "write_config"] {
            set.add_effect(eff);
        }
        set.roles
            .insert("rand".to_owned(), BuiltinRole::RandWrapper);
        set.roles
            .insert("tbl_derand".to_owned(), BuiltinRole::TblDerandWrapper);
        set
    }
}

impl BuiltinSet {
    pub fn add_sink(&mut self, name: &str, kind: SinkKind) {
        self.roles.insert(name.to_owned(), BuiltinRole::Sink(kind));
    }

    pub fn add_input_api(&mut self, name: &str) {
        self.roles.insert(name.to_owned(), BuiltinRole::InputApi);
    }

    pub fn add_effect(&mut self, name: &str) {
        self.roles.insert(name.to_owned(), BuiltinRole::Effect);
    }

    pub fn contains(&self, name: &str) -> bool {
        self.roles.contains_key(name)
    }

    pub fn role(&self, name: &str) -> Option<BuiltinRole> {
        self.roles.get(name).copied()
    }

    pub fn sink_kind(&self, name: &str) -> Option<SinkKind> {
        match self.roles.get(name) {
            Some(BuiltinRole::Sink(kind)) => Some(*kind),
            _ => None,
        }
    }

    pub fn is_sink(&self, name: &str) -> bool {
        self.sink_kind(name).is_some()
    }

    pub fn is_input_api(&self, name: &str) -> bool {
        matches!(self.roles.get(name), Some(BuiltinRole::InputApi))
    }

    pub fn sink_names(&self) -> Vec<&str> {
        let mut names: Vec<&str> = self
            .roles
            .iter()
            .filter(|(_, role)| matches!(role, BuiltinRole::Sink(_)))
            .map(|(name, _)| name.as_str())
            .collect();
        names.sort_unstable();
        names
    }
}

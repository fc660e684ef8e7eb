//! The scenario interpreter.
//!
//! Executes a (usually instrumented) program against scenario fixtures,
//! wiring input builtins to the scenario and sink builtins to the three
//! randomized subsystems. `rand(e)` stamps the evaluated value with a fresh
//! unit id; actual randomization happens lazily at the sink dispatch that
//! consumes the value, under that sink's pad policy: fresh pad per unit for
//! the shell and resource namespaces, one shared pad per query epoch.
//!
//! With randomization disabled the same interpreter becomes the unprotected
//! baseline and the dynamic-taint oracle: values still carry byte-granular
//! taint and wrapper marks, and every sink dispatch records its argument
//! partition.

use std::collections::{BTreeMap, HashMap, VecDeque};

use thiserror::Error;

use crate::builtins::{BuiltinRole, BuiltinSet, SinkKind};
use crate::minilang::{Expr, Program, Stmt};
use crate::pad::{PadError, RecordStore, Scheme};
use crate::shell::ShellEnv;
use crate::sql::{self, MinimalEngine};
use crate::tcs::TrustedSpec;
use crate::xml;

use super::scenario::Scenario;
use super::trace::{Event, ExecutionTrace, SinkTaint};
use super::value::{display_bytes, Mark, Taint, Value};

const MAX_CALL_DEPTH: usize = 128;
const MAX_LOOP_ITERATIONS: usize = 10_000;

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error("input queue exhausted")]
    InputExhausted,
    #[error("call to undefined function `{0}`")]
    UndefinedFunction(String),
    #[error("indirect call through `{var}` resolved to `{value}`, which is not a function")]
    BadIndirectCall { var: String, value: String },
    #[error("call depth limit exceeded in `{0}`")]
    CallDepth(String),
    #[error("loop iteration limit exceeded at {0}")]
    LoopLimit(String),
    #[error("wrong argument count calling `{func}`: expected {expected}, got {got}")]
    Arity {
        func: String,
        expected: usize,
        got: usize,
    },
    #[error("unknown XML document `{0}` (no scenario fixture)")]
    MissingDoc(String),
    #[error(transparent)]
    Pad(#[from] PadError),
    #[error(transparent)]
    Xml(#[from] crate::xml::XmlError),
}

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    /// Randomize at dispatch; false gives the unprotected baseline.
    pub randomize: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { randomize: true }
    }
}

enum Flow {
    Normal,
    Returned(Value),
}

pub struct Interp<'a> {
    program: &'a Program,
    spec: &'a TrustedSpec,
    builtins: &'a BuiltinSet,
    vocabulary: std::collections::BTreeSet<String>,
    opts: RunOptions,

    globals: HashMap<String, Value>,
    inputs: VecDeque<Vec<u8>>,
    env: BTreeMap<String, String>,
    config: BTreeMap<String, BTreeMap<String, String>>,

    shell: ShellEnv,
    shell_scheme: Scheme,
    sql_store: RecordStore,
    sql_translator: RecordStore,
    sql_scheme: Scheme,
    engine: MinimalEngine,
    resolver: xml::ResourceResolver,
    xml_docs: BTreeMap<String, (String, bool)>,
    trusted_docs: std::collections::BTreeSet<String>,

    pub trace: ExecutionTrace,
    pub files: std::collections::BTreeSet<String>,
    rand_units: u64,
    dispatched_units: std::collections::HashSet<u64>,
}

impl<'a> Interp<'a> {
    pub fn new(
        program: &'a Program,
        scenario: &'a Scenario,
        builtins: &'a BuiltinSet,
        opts: RunOptions,
    ) -> Result<Interp<'a>, RuntimeError> {
        let mut shell = ShellEnv::new(RecordStore::seeded(scenario.seed));
        shell
            .load_fixture(&scenario.shell_fixture)
            .map_err(|e| RuntimeError::Pad(PadError::InvalidScheme(e.to_string())))?;

        let mut engine = MinimalEngine::new(
            scenario
                .sql_tables
                .iter()
                .chain(&scenario.sql_columns)
                .cloned(),
        );
        engine = engine.with_vocabulary(scenario.sql_extra_vocab.iter().cloned());

        let sql_scheme = Scheme::word_safe(scenario.sql_expansion);
        let mut sql_translator = RecordStore::seeded(scenario.seed.wrapping_add(2));
        if scenario.sql_translate_tables {
            for table in &scenario.sql_tables {
                sql_translator.randomize(table.as_bytes(), &sql_scheme)?;
            }
        }

        let mut resolver = xml::ResourceResolver::new(
            RecordStore::seeded(scenario.seed.wrapping_add(3)),
            Scheme::printable(scenario.xml_expansion),
        );
        for (uri, content) in &scenario.xml_resources {
            resolver.add_resource(uri, content);
        }
        let mut xml_docs = BTreeMap::new();
        let mut trusted_docs = std::collections::BTreeSet::new();
        for (path, content, trusted) in &scenario.xml_docs {
            xml_docs.insert(path.clone(), (content.clone(), *trusted));
            if *trusted {
                trusted_docs.insert(path.clone());
            }
        }

        Ok(Interp {
            program,
            spec: &scenario.spec,
            builtins,
            vocabulary: crate::tcs::default_vocabulary(),
            opts,
            globals: HashMap::new(),
            inputs: scenario.inputs.iter().cloned().collect(),
            env: scenario.env.clone(),
            config: scenario.config.clone(),
            shell,
            shell_scheme: Scheme::printable(scenario.shell_expansion),
            sql_store: RecordStore::seeded(scenario.seed.wrapping_add(1)),
            sql_translator,
            sql_scheme,
            engine,
            resolver,
            xml_docs,
            trusted_docs,
            trace: ExecutionTrace::default(),
            files: std::collections::BTreeSet::new(),
            rand_units: 0,
            dispatched_units: std::collections::HashSet::new(),
        })
    }

    pub fn shell_env(&self) -> &ShellEnv {
        &self.shell
    }

    pub fn run(&mut self) -> Result<(), RuntimeError> {
        let entry = self
            .program
            .function(&self.program.entry)
            .ok_or_else(|| RuntimeError::UndefinedFunction(self.program.entry.clone()))?;
        let body = entry.body.clone();
        self.exec_body(&body, &mut HashMap::new(), 0)?;
        self.teardown();
        Ok(())
    }

    fn teardown(&mut self) {
        // The table-name namespace closes with the scenario.
        let translator_keys: Vec<Vec<u8>> = self
            .sql_translator
            .live_records()
            .map(|r| r.randomized.clone())
            .collect();
        for key in translator_keys {
            self.sql_translator.consume(&key);
            self.trace.records_consumed += 1;
        }
        let leaked = self.shell.store.live_count()
            + self.sql_store.live_count()
            + self.resolver.store.live_count();
        // A randomization wrapper whose value never reached a sink is a
        // misuse; surface it like a leaked record.
        let unsinked = self.rand_units as usize - self.dispatched_units.len();
        if unsinked > 0 {
            self.trace.push(Event::Note(format!(
                "{unsinked} randomized value(s) never reached a sink"
            )));
        }
        self.trace.leaked_records = leaked + unsinked;
    }

    fn exec_body(
        &mut self,
        stmts: &[Stmt],
        locals: &mut HashMap<String, Value>,
        depth: usize,
    ) -> Result<Flow, RuntimeError> {
        for stmt in stmts {
            match stmt {
                Stmt::Assign { lhs, expr, .. } => {
                    let value = self.eval(expr, locals, depth)?;
                    if self.program.is_global(lhs) {
                        self.globals.insert(lhs.clone(), value);
                    } else {
                        locals.insert(lhs.clone(), value);
                    }
                }
                Stmt::Call { call, .. } => {
                    self.eval(call, locals, depth)?;
                }
                Stmt::Return { expr, .. } => {
                    let value = match expr {
                        Some(e) => self.eval(e, locals, depth)?,
                        None => Value::empty(),
                    };
                    return Ok(Flow::Returned(value));
                }
                Stmt::If {
                    cond,
                    then_body,
                    else_body,
                    ..
                } => {
                    let taken = self.eval(cond, locals, depth)?.is_truthy();
                    let body = if taken { then_body } else { else_body };
                    if let Flow::Returned(v) = self.exec_body(body, locals, depth)? {
                        return Ok(Flow::Returned(v));
                    }
                }
                Stmt::While { cond, body, loc } => {
                    let mut iterations = 0;
                    while self.eval(cond, locals, depth)?.is_truthy() {
                        iterations += 1;
                        if iterations > MAX_LOOP_ITERATIONS {
                            return Err(RuntimeError::LoopLimit(loc.to_string()));
                        }
                        if let Flow::Returned(v) = self.exec_body(body, locals, depth)? {
                            return Ok(Flow::Returned(v));
                        }
                    }
                }
            }
        }
        Ok(Flow::Normal)
    }

    fn eval(
        &mut self,
        expr: &Expr,
        locals: &mut HashMap<String, Value>,
        depth: usize,
    ) -> Result<Value, RuntimeError> {
        match expr {
            Expr::StrLit { text, .. } => {
                let taint = if self.spec.literal_is_trusted(text, &self.vocabulary) {
                    Taint::Trusted
                } else {
                    Taint::Untrusted
                };
                Ok(Value::literal(text.clone().into_bytes(), taint))
            }
            Expr::Var { name, .. } => {
                if self.program.is_global(name) {
                    Ok(self.globals.get(name).cloned().unwrap_or_default())
                } else {
                    Ok(locals.get(name).cloned().unwrap_or_default())
                }
            }
            Expr::Concat { lhs, rhs, .. } => {
                let l = self.eval(lhs, locals, depth)?;
                let r = self.eval(rhs, locals, depth)?;
                Ok(l.concat(r))
            }
            Expr::Format { template, args, .. } => {
                let taint = if self.spec.literal_is_trusted(template, &self.vocabulary) {
                    Taint::Trusted
                } else {
                    Taint::Untrusted
                };
                let mut out = Value::empty();
                let mut rest = template.as_str();
                let mut arg_iter = args.iter();
                while let Some(pos) = rest.find("%s") {
                    if pos > 0 {
                        out = out.concat(Value::literal(&rest.as_bytes()[..pos], taint));
                    }
                    if let Some(arg) = arg_iter.next() {
                        let v = self.eval(arg, locals, depth)?;
                        out = out.concat(v);
                    }
                    rest = &rest[pos + 2..];
                }
                if !rest.is_empty() {
                    out = out.concat(Value::literal(rest.as_bytes().to_vec(), taint));
                }
                Ok(out)
            }
            Expr::Call { callee, args, .. } => {
                if let Some(role) = self.builtins.role(callee) {
                    self.call_builtin(callee, role, args, locals, depth)
                } else {
                    self.call_function(callee, args, locals, depth)
                }
            }
            Expr::IndirectCall { var, args, .. } => {
                let target = self.eval(
                    &Expr::Var {
                        name: var.clone(),
                        loc: expr.loc().clone(),
                    },
                    locals,
                    depth,
                )?;
                let name = target.text();
                if self.program.function(&name).is_none() {
                    return Err(RuntimeError::BadIndirectCall {
                        var: var.clone(),
                        value: name,
                    });
                }
                self.call_function(&name, args, locals, depth)
            }
        }
    }

    fn call_function(
        &mut self,
        name: &str,
        args: &[Expr],
        locals: &mut HashMap<String, Value>,
        depth: usize,
    ) -> Result<Value, RuntimeError> {
        if depth >= MAX_CALL_DEPTH {
            return Err(RuntimeError::CallDepth(name.to_owned()));
        }
        let func = self
            .program
            .function(name)
            .ok_or_else(|| RuntimeError::UndefinedFunction(name.to_owned()))?;
        if func.params.len() != args.len() {
            return Err(RuntimeError::Arity {
                func: name.to_owned(),
                expected: func.params.len(),
                got: args.len(),
            });
        }
        let mut callee_locals = HashMap::new();
        for (param, arg) in func.params.iter().zip(args) {
            let value = self.eval(arg, locals, depth)?;
            callee_locals.insert(param.clone(), value);
        }
        let body = func.body.clone();
        match self.exec_body(&body, &mut callee_locals, depth + 1)? {
            Flow::Returned(v) => Ok(v),
            Flow::Normal => Ok(Value::empty()),
        }
    }

    fn call_builtin(
        &mut self,
        name: &str,
        role: BuiltinRole,
        args: &[Expr],
        locals: &mut HashMap<String, Value>,
        depth: usize,
    ) -> Result<Value, RuntimeError> {
        match role {
            BuiltinRole::RandWrapper => {
                let value = match args.first() {
                    Some(a) => self.eval(a, locals, depth)?,
                    None => Value::empty(),
                };
                self.rand_units += 1;
                Ok(value.marked(Mark::Rand(self.rand_units)))
            }
            BuiltinRole::TblDerandWrapper => {
                let value = match args.first() {
                    Some(a) => self.eval(a, locals, depth)?,
                    None => Value::empty(),
                };
                self.rand_units += 1;
                Ok(value.marked(Mark::TblDerand(self.rand_units)))
            }
            BuiltinRole::InputApi => {
                let mut arg_values = Vec::new();
                for a in args {
                    arg_values.push(self.eval(a, locals, depth)?);
                }
                self.input_api(name, &arg_values, args)
            }
            BuiltinRole::Effect => {
                let mut arg_values = Vec::new();
                for a in args {
                    arg_values.push(self.eval(a, locals, depth)?);
                }
                self.effect(name, &arg_values);
                Ok(Value::empty())
            }
            BuiltinRole::Sink(kind) => {
                let mut arg_values = Vec::new();
                for a in args {
                    arg_values.push(self.eval(a, locals, depth)?);
                }
                self.dispatch(name, kind, &arg_values)
            }
        }
    }

    fn input_api(
        &mut self,
        name: &str,
        arg_values: &[Value],
        arg_exprs: &[Expr],
    ) -> Result<Value, RuntimeError> {
        let first_literal = match arg_exprs.first() {
            Some(Expr::StrLit { text, .. }) => Some(text.as_str()),
            _ => None,
        };
        let taint = if crate::tcs::api_return_is_trusted(self.spec, name, first_literal) {
            Taint::Trusted
        } else {
            Taint::Untrusted
        };
        let bytes = match name {
            "input" | "pget_line" => {
                let raw = self
                    .inputs
                    .pop_front()
                    .ok_or(RuntimeError::InputExhausted)?;
                self.expand_input_placeholder(raw)
            }
            "getenv" => {
                let key = arg_values.first().map(Value::text).unwrap_or_default();
                self.env.get(&key).cloned().unwrap_or_default().into_bytes()
            }
            "dir_name" => self
                .env
                .get("TMPDIR")
                .cloned()
                .unwrap_or_else(|| "/tmp".to_owned())
                .into_bytes(),
            "read_config" => {
                let path = arg_values.first().map(Value::text).unwrap_or_default();
                let key = arg_values.get(1).map(Value::text).unwrap_or_default();
                self.config
                    .get(&path)
                    .and_then(|section| section.get(&key))
                    .cloned()
                    .unwrap_or_default()
                    .into_bytes()
            }
            other => {
                // Custom input APIs read from the shared queue.
                let _ = other;
                self.inputs
                    .pop_front()
                    .ok_or(RuntimeError::InputExhausted)?
            }
        };
        Ok(Value::literal(bytes, taint))
    }

    /// `@table:NAME` in an input stands for the translator-randomized form
    /// of NAME: the handle the outside world would hold after the
    /// application published randomized table names.
    fn expand_input_placeholder(&self, raw: Vec<u8>) -> Vec<u8> {
        if let Some(name) = raw.strip_prefix(b"@table:") {
            if let Some(record) = self
                .sql_translator
                .live_records()
                .find(|r| r.original == name)
            {
                return record.randomized.clone();
            }
        }
        raw
    }

    fn effect(&mut self, name: &str, arg_values: &[Value]) {
        let args: Vec<String> = arg_values.iter().map(Value::text).collect();
        match name {
            "fopen" => {
                if let Some(file) = args.first() {
                    self.files.insert(file.clone());
                }
            }
            "unlink" => {
                if let Some(file) = args.first() {
                    self.files.remove(file);
                }
            }
            _ => {}
        }
        self.trace.push(Event::Builtin {
            name: name.to_owned(),
            args,
        });
    }

    fn dispatch(
        &mut self,
        sink: &str,
        kind: SinkKind,
        args: &[Value],
    ) -> Result<Value, RuntimeError> {
        let arg = args.first().cloned().unwrap_or_default();
        for segment in &arg.segments {
            match segment.mark {
                Mark::Rand(unit) | Mark::TblDerand(unit) => {
                    self.dispatched_units.insert(unit);
                }
                Mark::None => {}
            }
        }
        self.trace.sink_taints.push(SinkTaint {
            sink: sink.to_owned(),
            kind,
            runs: arg.partition(),
        });
        match kind {
            SinkKind::Shell => self.dispatch_shell(&arg),
            SinkKind::Sql => self.dispatch_sql(&arg),
            SinkKind::Xml => self.dispatch_xml(&arg),
        }
    }

    fn dispatch_shell(&mut self, arg: &Value) -> Result<Value, RuntimeError> {
        let line: Vec<u8> = if self.opts.randomize {
            let mut composed = Vec::new();
            for (mark, bytes, _) in arg.units() {
                match mark {
                    Mark::Rand(_) => {
                        let (randomized, records) = crate::shell::randomize_command_names(
                            &bytes,
                            &mut self.shell.store,
                            &self.shell_scheme,
                        )?;
                        self.trace.records_created += records.len();
                        for record in &records {
                            self.trace.push(Event::RecordCreated {
                                subsystem: SinkKind::Shell,
                                table: record.table_id(),
                                original: display_bytes(&record.original),
                            });
                        }
                        composed.extend_from_slice(&randomized);
                    }
                    _ => composed.extend_from_slice(&bytes),
                }
            }
            composed
        } else {
            arg.bytes()
        };

        let mut statuses = Vec::new();
        for simple in crate::shell::split_compound(&line) {
            let before = self.shell.store.live_count();
            let effects_before = self.shell.effects_log.len();
            let outcome = if self.opts.randomize {
                self.shell.spawn_and_execute(&simple)
            } else {
                self.shell.spawn_and_execute_plain(&simple)
            };
            let new_effects: Vec<String> = self.shell.effects_log[effects_before..].to_vec();
            for effect in new_effects {
                self.trace.push(Event::ShellEffect(effect));
            }
            let consumed_now = before.saturating_sub(self.shell.store.live_count());
            if consumed_now > 0 {
                self.trace.records_consumed += consumed_now;
                self.trace.push(Event::RecordConsumed {
                    subsystem: SinkKind::Shell,
                    original: outcome.command_name.clone(),
                });
            }
            statuses.push(outcome.status);
            self.trace.push(Event::ShellCommand {
                status: outcome.status,
                command: outcome.command_name,
                detail: outcome.detail,
            });
        }
        Ok(Value::literal(
            format!("{statuses:?}").into_bytes(),
            Taint::Untrusted,
        ))
    }

    fn dispatch_sql(&mut self, arg: &Value) -> Result<Value, RuntimeError> {
        let verdict = if self.opts.randomize {
            let epoch_table = self.sql_store.draw_table(&self.sql_scheme)?;
            let mut composed = Vec::new();
            for (mark, bytes, _) in arg.units() {
                match mark {
                    Mark::Rand(_) => {
                        let before = self.sql_store.live_count();
                        let fragment =
                            sql::randomize_fragment(&bytes, &mut self.sql_store, &epoch_table)?;
                        let created = self.sql_store.live_count().saturating_sub(before);
                        self.trace.records_created += created;
                        composed.extend_from_slice(&fragment);
                    }
                    Mark::TblDerand(_) => {
                        // Translate a randomized table name into the current
                        // epoch; anything else passes through untouched.
                        let translated = sql::tbl_derand(&bytes, &self.sql_translator);
                        if translated != bytes {
                            self.trace.push(Event::Note(format!(
                                "tbl_derand translated \"{}\"",
                                display_bytes(&translated)
                            )));
                            let before = self.sql_store.live_count();
                            let fragment = sql::randomize_fragment(
                                &translated,
                                &mut self.sql_store,
                                &epoch_table,
                            )?;
                            self.trace.records_created +=
                                self.sql_store.live_count().saturating_sub(before);
                            composed.extend_from_slice(&fragment);
                        } else {
                            composed.extend_from_slice(&bytes);
                        }
                    }
                    Mark::None => composed.extend_from_slice(&bytes),
                }
            }
            let before = self.sql_store.live_count();
            let verdict =
                sql::sink_hook(&composed, &mut self.sql_store, &epoch_table, &self.engine);
            self.trace.records_consumed += before.saturating_sub(self.sql_store.live_count());
            verdict
        } else {
            sql::plain_verdict(&arg.bytes(), &self.engine)
        };

        self.trace.push(Event::SqlQuery {
            status: verdict.status,
            received: display_bytes(&verdict.received),
            offending: verdict.offending_terms.clone(),
        });
        Ok(Value::literal(
            format!("{:?}", verdict.status).into_bytes(),
            Taint::Untrusted,
        ))
    }

    fn dispatch_xml(&mut self, arg: &Value) -> Result<Value, RuntimeError> {
        let path = arg.text();
        let (content, _) = self
            .xml_docs
            .get(&path)
            .cloned()
            .ok_or_else(|| RuntimeError::MissingDoc(path.clone()))?;
        let doc = xml::parse_doc(&path, &content)?;
        let trusted = self.trusted_docs.contains(&path);

        let mut output = Value::empty();
        if !self.opts.randomize {
            // Unprotected baseline: everything readable resolves.
            for (name, result) in doc
                .references
                .iter()
                .map(|n| {
                    let uri = doc
                        .entities
                        .iter()
                        .find(|e| &e.name == n)
                        .map(|e| e.resource_uri.clone())
                        .unwrap_or_default();
                    (n.clone(), xml::resolve_raw(&uri, &self.resolver))
                })
                .collect::<Vec<_>>()
            {
                let resolved = result.is_ok();
                if let Ok(bytes) = result {
                    output = output.concat(Value::literal(bytes, Taint::Untrusted));
                }
                self.trace.push(Event::XmlEntity {
                    doc: path.clone(),
                    entity: name,
                    resolved,
                });
            }
            return Ok(output);
        }

        let effective = if trusted {
            let loaded = xml::load_trusted_xml(&doc, &mut self.resolver)?;
            self.trace.records_created += loaded.entities.len();
            for entity in &loaded.entities {
                let table = self
                    .resolver
                    .store
                    .derandomize(entity.resource_uri.as_bytes())
                    .map(|r| r.table_id())
                    .unwrap_or(crate::pad::TableId(0));
                self.trace.push(Event::RecordCreated {
                    subsystem: SinkKind::Xml,
                    table,
                    original: entity.name.clone(),
                });
            }
            loaded
        } else {
            doc
        };

        for (name, result) in xml::resolve_references(&effective, &self.resolver) {
            let resolved = result.is_ok();
            if let Ok(bytes) = result {
                output = output.concat(Value::literal(bytes, Taint::Untrusted));
            }
            self.trace.push(Event::XmlEntity {
                doc: path.clone(),
                entity: name,
                resolved,
            });
        }

        // The document's namespace closes with the dispatch.
        let keys: Vec<Vec<u8>> = self
            .resolver
            .store
            .live_records()
            .map(|r| r.randomized.clone())
            .collect();
        for key in keys {
            self.resolver.store.consume(&key);
            self.trace.records_consumed += 1;
        }
        Ok(output)
    }
}

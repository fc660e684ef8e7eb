//! Query randomization at the database boundary.
//!
//! Trusted query fragments are randomized term by term at composition time
//! (one shared pad per sink epoch, one record per term). At the sink the
//! composed query is scanned again and the pad is reverse-applied to every
//! word and number token: randomized trusted terms come back to their
//! originals while injected terms — never randomized — are scrambled by the
//! same pass and fail term validation. Quoted strings, specials and
//! whitespace are never touched, so string values survive byte-for-byte and
//! no keyword list or SQL grammar is needed anywhere.

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::pad::{PadError, RecordStore, Table};
use crate::scan::{scan, Token, TokenClass};

/// Engine keywords for the bundled minimal validator. Adapters for richer
/// engines can extend or replace this set.
pub fn default_vocabulary() -> BTreeSet<String> {
    [
        "select", "insert", "update", "delete", "from", "where", "and", "or", "union", "drop",
        "table", "into", "values", "set", "like", "in",
    ]
    .into_iter()
    .map(str::to_owned)
    .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerdictStatus {
    Executed,
    SyntaxError,
    UnknownTermError,
}

/// What the engine did with the query after reverse-randomization.
#[derive(Debug, Clone)]
pub struct QueryVerdict {
    pub status: VerdictStatus,
    pub offending_terms: Vec<String>,
    /// The exact bytes handed to the engine (after the reverse pass).
    pub received: Vec<u8>,
}

impl QueryVerdict {
    pub fn executed(&self) -> bool {
        self.status == VerdictStatus::Executed
    }
}

/// The narrow boundary standing in for a real database engine: term
/// vocabulary, schema names, and final evaluation of a term-validated query.
pub trait EngineAdapter {
    fn vocabulary(&self) -> &BTreeSet<String>;
    /// Table and column names, case-preserved.
    fn schema(&self) -> &BTreeSet<String>;
    /// Called only after every term validated; decides the final verdict.
    fn evaluate(&self, query: &[u8]) -> VerdictStatus;
}

/// Vocabulary-and-schema validator with no result sets: enough to decide
/// whether a query would execute.
#[derive(Debug, Clone)]
pub struct MinimalEngine {
    vocabulary: BTreeSet<String>,
    schema: BTreeSet<String>,
}

impl MinimalEngine {
    pub fn new(schema: impl IntoIterator<Item = String>) -> Self {
        MinimalEngine {
            vocabulary: default_vocabulary(),
            schema: schema.into_iter().collect(),
        }
    }

    pub fn with_vocabulary(mut self, extra: impl IntoIterator<Item = String>) -> Self {
        self.vocabulary
            .extend(extra.into_iter().map(|w| w.to_lowercase()));
        self
    }
}

impl EngineAdapter for MinimalEngine {
    fn vocabulary(&self) -> &BTreeSet<String> {
        &self.vocabulary
    }

    fn schema(&self) -> &BTreeSet<String> {
        &self.schema
    }

    fn evaluate(&self, query: &[u8]) -> VerdictStatus {
        let unterminated = scan(query).iter().any(|t| t.unterminated);
        if unterminated {
            VerdictStatus::SyntaxError
        } else {
            VerdictStatus::Executed
        }
    }
}

/// Randomizes every word and number token of a trusted fragment under the
/// shared epoch pad, one record per distinct term. Quoted strings, specials
/// and whitespace pass through unchanged.
pub fn randomize_fragment(
    fragment: &[u8],
    store: &mut RecordStore,
    table: &Arc<Table>,
) -> Result<Vec<u8>, PadError> {
    let mut out = Vec::with_capacity(fragment.len() * table.expansion());
    for token in scan(fragment) {
        match token.class {
            TokenClass::Word | TokenClass::Number => {
                let record = store.randomize_with_table(&token.text, table)?;
                out.extend_from_slice(&record.randomized);
            }
            _ => out.extend_from_slice(&token.text),
        }
    }
    Ok(out)
}

/// The sink-side reverse pass plus validation.
///
/// Every word/number token of the composed query gets `reverse_apply`d under
/// the epoch pad; the rebuilt query is then term-validated against the
/// engine's vocabulary, schema and literals, and finally evaluated. All
/// records created under the epoch pad are consumed regardless of verdict,
/// so replaying this epoch's randomized terms later finds nothing.
pub fn sink_hook(
    final_query: &[u8],
    store: &mut RecordStore,
    epoch_table: &Arc<Table>,
    engine: &dyn EngineAdapter,
) -> QueryVerdict {
    let mut received = Vec::with_capacity(final_query.len());
    for token in scan(final_query) {
        match token.class {
            TokenClass::Word | TokenClass::Number => {
                received.extend_from_slice(&epoch_table.reverse_apply(&token.text));
            }
            _ => received.extend_from_slice(&token.text),
        }
    }

    let epoch_id = epoch_table.id();
    let stale: Vec<Vec<u8>> = store
        .live_records()
        .filter(|r| r.table_id() == epoch_id)
        .map(|r| r.randomized.clone())
        .collect();
    for key in stale {
        store.consume(&key);
    }

    let offending = invalid_terms(&received, engine);
    if !offending.is_empty() {
        return QueryVerdict {
            status: VerdictStatus::UnknownTermError,
            offending_terms: offending,
            received,
        };
    }
    let status = engine.evaluate(&received);
    QueryVerdict {
        status,
        offending_terms: Vec::new(),
        received,
    }
}

/// The unprotected baseline: validation and evaluation without any reverse
/// pass. Shows what an engine would do with the raw composed query.
pub fn plain_verdict(query: &[u8], engine: &dyn EngineAdapter) -> QueryVerdict {
    let offending = invalid_terms(query, engine);
    if !offending.is_empty() {
        return QueryVerdict {
            status: VerdictStatus::UnknownTermError,
            offending_terms: offending,
            received: query.to_vec(),
        };
    }
    QueryVerdict {
        status: engine.evaluate(query),
        offending_terms: Vec::new(),
        received: query.to_vec(),
    }
}

/// Words outside vocabulary, schema and literals. Numbers are always valid.
fn invalid_terms(query: &[u8], engine: &dyn EngineAdapter) -> Vec<String> {
    let mut offending = Vec::new();
    for token in scan(query) {
        if token.class != TokenClass::Word {
            continue;
        }
        let text = String::from_utf8_lossy(&token.text).into_owned();
        let known =
            engine.vocabulary().contains(&text.to_lowercase()) || engine.schema().contains(&text);
        if !known {
            offending.push(text);
        }
    }
    offending
}

/// Table-name translation for unquoted variables in table position: if the
/// fragment is exactly one word and that word is a live randomized string,
/// return its original; anything else — multiple terms, no record, empty —
/// passes through unchanged so injections aimed at the wrapped variable
/// still meet the reverse pass un-randomized.
pub fn tbl_derand(fragment: &[u8], store: &RecordStore) -> Vec<u8> {
    let tokens: Vec<Token> = scan(fragment)
        .into_iter()
        .filter(|t| t.class != TokenClass::Whitespace)
        .collect();
    if tokens.len() != 1 || tokens[0].class != TokenClass::Word {
        return fragment.to_vec();
    }
    match store.derandomize(&tokens[0].text) {
        Some(record) => record.original.clone(),
        None => fragment.to_vec(),
    }
}

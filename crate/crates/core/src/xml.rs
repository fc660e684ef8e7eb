//! External-entity randomization for a minimal XML subset.
//!
//! Documents may declare external entities (`<!ENTITY name SYSTEM "uri">`)
//! and reference them as `&name;`. When a trusted document is loaded its
//! entity URIs are randomized into the resolver's namespace; resolution then
//! succeeds only for randomized URIs. An untrusted document's entities are
//! left as written, so their resolution fails and nothing is read.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::pad::{PadError, RecordStore, Scheme};

#[derive(Debug, Error)]
pub enum XmlError {
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: duplicate entity `{name}`")]
    DuplicateEntity { path: String, name: String },
    #[error(transparent)]
    Pad(#[from] PadError),
}

#[derive(Debug, Error)]
#[error("access denied for resource `{uri}`")]
pub struct AccessError {
    pub uri: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalEntity {
    pub name: String,
    pub resource_uri: String,
}

#[derive(Debug, Clone)]
pub struct XmlDoc {
    pub path: String,
    pub entities: Vec<ExternalEntity>,
    /// Entity names referenced from the body, in order of appearance.
    pub references: Vec<String>,
    pub body: String,
}

/// Parses the DTD-entity subset: ENTITY SYSTEM declarations and `&name;`
/// references. Anything else passes through as body text.
pub fn parse_doc(path: &str, text: &str) -> Result<XmlDoc, XmlError> {
    let mut entities: Vec<ExternalEntity> = Vec::new();
    let mut names = BTreeSet::new();

    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let mut rest = line;
        while let Some(start) = rest.find("<!ENTITY") {
            let decl = &rest[start + "<!ENTITY".len()..];
            let mut parts = decl.split_ascii_whitespace();
            let name = parts.next().ok_or_else(|| XmlError::Malformed {
                path: path.to_owned(),
                line: line_no,
                message: "entity declaration needs a name".into(),
            })?;
            match parts.next() {
                Some("SYSTEM") => {}
                other => {
                    return Err(XmlError::Malformed {
                        path: path.to_owned(),
                        line: line_no,
                        message: format!("expected SYSTEM, found {other:?}"),
                    })
                }
            }
            let after_system = decl
                .find("SYSTEM")
                .map(|i| &decl[i + "SYSTEM".len()..])
                .unwrap_or("");
            let uri_start = after_system.find('"').ok_or_else(|| XmlError::Malformed {
                path: path.to_owned(),
                line: line_no,
                message: "entity URI must be quoted".into(),
            })?;
            let uri_rest = &after_system[uri_start + 1..];
            let uri_end = uri_rest.find('"').ok_or_else(|| XmlError::Malformed {
                path: path.to_owned(),
                line: line_no,
                message: "unterminated entity URI".into(),
            })?;
            let uri = &uri_rest[..uri_end];
            if !names.insert(name.to_owned()) {
                return Err(XmlError::DuplicateEntity {
                    path: path.to_owned(),
                    name: name.to_owned(),
                });
            }
            entities.push(ExternalEntity {
                name: name.to_owned(),
                resource_uri: uri.to_owned(),
            });
            rest = &uri_rest[uri_end..];
        }
    }

    // Body references: &name; outside declarations.
    let mut references = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'&' {
            if let Some(end) = text[i + 1..].find(';') {
                let name = &text[i + 1..i + 1 + end];
                if !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                    references.push(name.to_owned());
                    i += end + 2;
                    continue;
                }
            }
        }
        i += 1;
    }

    Ok(XmlDoc {
        path: path.to_owned(),
        entities,
        references,
        body: text.to_owned(),
    })
}

/// Resolves entity URIs against a randomized namespace backed by a record
/// store, plus the fixture contents readable at the original URIs.
pub struct ResourceResolver {
    pub store: RecordStore,
    scheme: Scheme,
    resources: BTreeMap<String, Vec<u8>>,
}

impl ResourceResolver {
    pub fn new(store: RecordStore, scheme: Scheme) -> Self {
        ResourceResolver {
            store,
            scheme,
            resources: BTreeMap::new(),
        }
    }

    pub fn add_resource(&mut self, uri: &str, content: &[u8]) {
        self.resources.insert(uri.to_owned(), content.to_vec());
    }

    /// Content behind a URI, without namespace checks. Fixture plumbing.
    pub fn raw_resource(&self, uri: &str) -> Option<&[u8]> {
        self.resources.get(uri).map(Vec::as_slice)
    }
}

/// Loads a trusted document: every entity URI is replaced by its
/// randomization and a matching record goes live in the resolver store.
pub fn load_trusted_xml(doc: &XmlDoc, resolver: &mut ResourceResolver) -> Result<XmlDoc, XmlError> {
    let mut out = doc.clone();
    for entity in &mut out.entities {
        let record = resolver
            .store
            .randomize(entity.resource_uri.as_bytes(), &resolver.scheme.clone())?;
        entity.resource_uri = String::from_utf8_lossy(&record.randomized).into_owned();
    }
    Ok(out)
}

/// Resolution through the randomized namespace: only URIs with a live
/// record pointing at a readable resource return content.
pub fn resolve_entity(uri: &str, resolver: &ResourceResolver) -> Result<Vec<u8>, AccessError> {
    if uri.is_empty() {
        return Err(AccessError { uri: String::new() });
    }
    let record = resolver
        .store
        .derandomize(uri.as_bytes())
        .ok_or_else(|| AccessError {
            uri: uri.to_owned(),
        })?;
    let original = String::from_utf8_lossy(&record.original).into_owned();
    resolver
        .resources
        .get(&original)
        .cloned()
        .ok_or(AccessError {
            uri: uri.to_owned(),
        })
}

/// The unprotected baseline: URIs read straight from the resource map.
pub fn resolve_raw(uri: &str, resolver: &ResourceResolver) -> Result<Vec<u8>, AccessError> {
    resolver
        .raw_resource(uri)
        .map(<[u8]>::to_vec)
        .ok_or_else(|| AccessError {
            uri: uri.to_owned(),
        })
}

/// Resolves every reference of a (possibly randomized) document in order.
pub fn resolve_references(
    doc: &XmlDoc,
    resolver: &ResourceResolver,
) -> Vec<(String, Result<Vec<u8>, AccessError>)> {
    doc.references
        .iter()
        .map(|name| {
            let uri = doc
                .entities
                .iter()
                .find(|e| &e.name == name)
                .map(|e| e.resource_uri.as_str())
                .unwrap_or("");
            (name.clone(), resolve_entity(uri, resolver))
        })
        .collect()
}

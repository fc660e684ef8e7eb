//! Interpreter values: byte ropes with per-segment taint and wrapper marks.
//!
//! Every value is a sequence of segments. Concatenation and formatting keep
//! segment boundaries, so taint stays byte-granular without per-byte labels:
//! the language has no operation that splits a string. `rand` and
//! `tbl_derand` wrappers stamp segments with a unit id; at sink dispatch,
//! consecutive segments of one unit are randomized together.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Taint {
    Trusted,
    Untrusted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mark {
    None,
    /// Stamped by `rand`, with the invocation's unit id.
    Rand(u64),
    /// Stamped by `tbl_derand`.
    TblDerand(u64),
}

#[derive(Debug, Clone)]
pub struct Segment {
    pub bytes: Vec<u8>,
    pub taint: Taint,
    pub mark: Mark,
}

#[derive(Debug, Clone, Default)]
pub struct Value {
    pub segments: Vec<Segment>,
}

impl Value {
    pub fn literal(bytes: impl Into<Vec<u8>>, taint: Taint) -> Value {
        let bytes = bytes.into();
        if bytes.is_empty() {
            return Value::default();
        }
        Value {
            segments: vec![Segment {
                bytes,
                taint,
                mark: Mark::None,
            }],
        }
    }

    pub fn empty() -> Value {
        Value::default()
    }

    pub fn concat(mut self, other: Value) -> Value {
        self.segments.extend(other.segments);
        self
    }

    pub fn bytes(&self) -> Vec<u8> {
        self.segments
            .iter()
            .flat_map(|s| s.bytes.iter().copied())
            .collect()
    }

    pub fn text(&self) -> String {
        String::from_utf8_lossy(&self.bytes()).into_owned()
    }

    pub fn is_truthy(&self) -> bool {
        self.segments.iter().any(|s| !s.bytes.is_empty())
    }

    pub fn marked(mut self, mark: Mark) -> Value {
        for s in &mut self.segments {
            s.mark = mark;
        }
        self
    }

    /// Groups consecutive segments by mark, preserving order: the dispatch
    /// units a sink randomizes or passes through.
    pub fn units(&self) -> Vec<(Mark, Vec<u8>, Taint)> {
        let mut out: Vec<(Mark, Vec<u8>, Taint)> = Vec::new();
        for seg in &self.segments {
            match out.last_mut() {
                Some((mark, bytes, taint)) if *mark == seg.mark => {
                    bytes.extend_from_slice(&seg.bytes);
                    if *taint != seg.taint {
                        *taint = Taint::Untrusted;
                    }
                }
                _ => out.push((seg.mark, seg.bytes.clone(), seg.taint)),
            }
        }
        out.retain(|(_, bytes, _)| !bytes.is_empty());
        out
    }

    /// Byte-level partition for oracle comparisons: (taint, marked) runs.
    pub fn partition(&self) -> Vec<(usize, Taint, bool)> {
        self.segments
            .iter()
            .filter(|s| !s.bytes.is_empty())
            .map(|s| (s.bytes.len(), s.taint, s.mark != Mark::None))
            .collect()
    }
}

/// Printable rendering of possibly binary bytes for traces.
pub fn display_bytes(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len());
    for &b in bytes {
        if (0x20..=0x7e).contains(&b) {
            out.push(b as char);
        } else {
            out.push_str(&format!("\\x{b:02x}"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn concat_preserves_segments_and_taint() {
        let v = Value::literal(b"a".to_vec(), Taint::Trusted)
            .concat(Value::literal(b"b".to_vec(), Taint::Untrusted));
        assert_eq!(v.bytes(), b"ab");
        assert_eq!(v.segments.len(), 2);
        assert_eq!(v.segments[0].taint, Taint::Trusted);
        assert_eq!(v.segments[1].taint, Taint::Untrusted);
    }

    #[test]
    fn units_group_consecutive_marks() {
        let v = Value::literal(b"wget ".to_vec(), Taint::Trusted)
            .marked(Mark::Rand(1))
            .concat(Value::literal(b"http://x".to_vec(), Taint::Untrusted));
        let units = v.units();
        assert_eq!(units.len(), 2);
        assert_eq!(units[0].0, Mark::Rand(1));
        assert_eq!(units[0].1, b"wget ");
        assert_eq!(units[1].0, Mark::None);
    }

    #[test]
    fn two_rand_calls_stay_separate_units() {
        let v = Value::literal(b"a".to_vec(), Taint::Trusted)
            .marked(Mark::Rand(1))
            .concat(Value::literal(b"b".to_vec(), Taint::Trusted).marked(Mark::Rand(2)));
        assert_eq!(v.units().len(), 2);
    }

    #[test]
    fn truthiness_is_non_empty() {
        assert!(!Value::empty().is_truthy());
        assert!(!Value::literal(b"".to_vec(), Taint::Trusted).is_truthy());
        assert!(Value::literal(b"x".to_vec(), Taint::Trusted).is_truthy());
    }
}

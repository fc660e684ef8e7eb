//! Substitution-pad randomization primitives.
//!
//! A [`Table`] is a one-time substitution pad: an injective mapping from
//! input bytes to fixed-width output byte strings drawn from a restricted
//! alphabet. Randomizing a string applies the pad byte by byte; the pairing
//! of the randomized string with its pad is kept as a [`Record`] inside a
//! [`RecordStore`], and that record is the only way to recover the original.
//! Tables are drawn fresh per input, so a leaked mapping is useless for the
//! next command.
//!
//! Expansion factors of 1, 2, 4 or 8 output bytes per input byte are
//! supported; wider expansions enlarge the search space an attacker must
//! cover to forge a valid randomized command.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::{Arc, OnceLock};

use thiserror::Error;

use crate::prng::Prng;

/// Bytes never allowed in an output alphabet: quote characters and shell
/// metacharacters. Keeping these out of randomized text guarantees that a
/// randomized fragment can never terminate a string literal or introduce a
/// command separator downstream.
pub const FORBIDDEN_OUTPUT_BYTES: &[u8] = b"'\"`;|&$<> \n";

const EXPANSIONS: &[usize] = &[1, 2, 4, 8];

#[derive(Debug, Error)]
pub enum PadError {
    #[error("invalid scheme: {0}")]
    InvalidScheme(String),
    #[error("alphabet of {alphabet} symbols cannot host an injective 1-to-{expansion} mapping over {needed} inputs")]
    AlphabetTooSmall {
        alphabet: usize,
        expansion: usize,
        needed: usize,
    },
    #[error("randomization collided with live records {retries} times; alphabet or expansion too small for this workload")]
    CollisionExhausted { retries: usize },
    #[error("bad mapping override: {0}")]
    BadOverride(String),
    #[error("cannot randomize an empty input")]
    EmptyInput,
}

/// Expansion factor and output alphabet for a family of tables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scheme {
    expansion: usize,
    alphabet: Vec<u8>,
}

impl Scheme {
    /// Validates the scheme invariants: expansion in {1,2,4,8}; alphabet
    /// non-empty, duplicate-free, printable, and free of quote/metacharacter
    /// bytes.
    pub fn new(expansion: usize, alphabet: Vec<u8>) -> Result<Self, PadError> {
        if !EXPANSIONS.contains(&expansion) {
            return Err(PadError::InvalidScheme(format!(
                "expansion must be one of 1, 2, 4, 8 (got {expansion})"
            )));
        }
        if alphabet.is_empty() {
            return Err(PadError::InvalidScheme("alphabet is empty".into()));
        }
        let mut seen = HashSet::new();
        for &b in &alphabet {
            if !(0x21..=0x7e).contains(&b) {
                return Err(PadError::InvalidScheme(format!(
                    "alphabet byte 0x{b:02x} is not printable"
                )));
            }
            if FORBIDDEN_OUTPUT_BYTES.contains(&b) {
                return Err(PadError::InvalidScheme(format!(
                    "alphabet byte {:?} is a quote or shell metacharacter",
                    b as char
                )));
            }
            if !seen.insert(b) {
                return Err(PadError::InvalidScheme(format!(
                    "alphabet byte {:?} repeated",
                    b as char
                )));
            }
        }
        Ok(Scheme {
            expansion,
            alphabet,
        })
    }

    /// All printable ASCII minus quotes and shell metacharacters (85 symbols).
    /// Suitable for shell command names and resource paths.
    pub fn printable(expansion: usize) -> Self {
        let alphabet = (0x21u8..=0x7e)
            .filter(|b| !FORBIDDEN_OUTPUT_BYTES.contains(b))
            .collect();
        Scheme::new(expansion, alphabet).expect("printable alphabet is valid")
    }

    /// Letters, digits and underscore (63 symbols). Output randomized under
    /// this scheme always scans as a single word/number run, which is what
    /// the query scanner needs for group-aligned reverse application.
    pub fn word_safe(expansion: usize) -> Self {
        let alphabet = (b'0'..=b'9')
            .chain(b'A'..=b'Z')
            .chain(b'a'..=b'z')
            .chain(std::iter::once(b'_'))
            .collect();
        Scheme::new(expansion, alphabet).expect("word alphabet is valid")
    }

    pub fn expansion(&self) -> usize {
        self.expansion
    }

    pub fn alphabet(&self) -> &[u8] {
        &self.alphabet
    }
}

/// Identifier for one generated table. Fresh tables get fresh ids, which is
/// how tests pin down "a new pad per command" freshness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TableId(pub u64);

impl fmt::Display for TableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

/// One substitution pad: a total mapping from every input byte to an
/// output string of `expansion` bytes.
///
/// For expansion 1 the mapping restricted to the alphabet is a derangement
/// (a fixpoint-free bijection), so reverse-applying a pad to a word that was
/// never randomized always changes it. Bytes outside the alphabet still map
/// into the alphabet (totality) but are not part of the invertible core; the
/// record store, not byte-level inversion, recovers such strings. For
/// expansion 2, 4 and 8 the mapping is injective over all 256 inputs.
#[derive(Debug)]
pub struct Table {
    scheme: Scheme,
    id: TableId,
    outputs: Vec<u8>, // 256 * expansion bytes, row per input byte
    // Built on first reverse application; forward-only tables never pay.
    inverse: OnceLock<HashMap<Vec<u8>, u8>>,
}

impl Table {
    /// Deterministic standalone constructor; the table id is derived from
    /// the seed.
    pub fn from_seed(scheme: &Scheme, seed: u64) -> Result<Arc<Table>, PadError> {
        let mut prng = Prng::seeded(seed);
        let id = TableId(seed ^ 0x7461_626c_6500_0000);
        Table::generate(scheme, &mut prng, id, &[])
    }

    /// Like [`Table::from_seed`] but with pinned byte mappings, used by
    /// fixtures that need a specific pad (input byte -> output string).
    pub fn from_seed_with_overrides(
        scheme: &Scheme,
        seed: u64,
        overrides: &[(u8, &[u8])],
    ) -> Result<Arc<Table>, PadError> {
        let mut prng = Prng::seeded(seed);
        let id = TableId(seed ^ 0x7461_626c_6500_0000);
        Table::generate(scheme, &mut prng, id, overrides)
    }

    fn generate(
        scheme: &Scheme,
        prng: &mut Prng,
        id: TableId,
        overrides: &[(u8, &[u8])],
    ) -> Result<Arc<Table>, PadError> {
        let k = scheme.expansion;
        for (input, output) in overrides {
            if output.len() != k {
                return Err(PadError::BadOverride(format!(
                    "output for 0x{input:02x} has length {}, expected {k}",
                    output.len()
                )));
            }
            if !output.iter().all(|b| scheme.alphabet.contains(b)) {
                return Err(PadError::BadOverride(format!(
                    "output for 0x{input:02x} uses bytes outside the alphabet"
                )));
            }
            if k == 1 && output[0] == *input {
                return Err(PadError::BadOverride(format!(
                    "identity mapping pinned for 0x{input:02x}"
                )));
            }
        }

        let outputs = if k == 1 {
            Table::generate_single(scheme, prng, overrides)?
        } else {
            Table::generate_wide(scheme, prng, overrides)?
        };

        Ok(Arc::new(Table {
            scheme: scheme.clone(),
            id,
            outputs,
            inverse: OnceLock::new(),
        }))
    }

    fn inverse(&self) -> &HashMap<Vec<u8>, u8> {
        self.inverse.get_or_init(|| {
            let k = self.scheme.expansion;
            let mut inverse = HashMap::new();
            if k == 1 {
                // Only the alphabet core is invertible.
                for &b in &self.scheme.alphabet {
                    inverse.insert(vec![self.outputs[b as usize]], b);
                }
            } else {
                for b in 0..=255u8 {
                    let row = self.outputs[b as usize * k..(b as usize + 1) * k].to_vec();
                    inverse.insert(row, b);
                }
            }
            inverse
        })
    }

    /// Expansion 1: derangement over the alphabet, overflow images for
    /// non-alphabet bytes.
    fn generate_single(
        scheme: &Scheme,
        prng: &mut Prng,
        overrides: &[(u8, &[u8])],
    ) -> Result<Vec<u8>, PadError> {
        let alpha = &scheme.alphabet;
        if alpha.len() < 2 {
            return Err(PadError::AlphabetTooSmall {
                alphabet: alpha.len(),
                expansion: 1,
                needed: 2,
            });
        }
        let pinned: HashMap<u8, u8> = overrides
            .iter()
            .filter(|(input, _)| alpha.contains(input))
            .map(|(input, output)| (*input, output[0]))
            .collect();
        let pinned_outputs: HashSet<u8> = pinned.values().copied().collect();
        if pinned_outputs.len() != pinned.len() {
            return Err(PadError::BadOverride("pinned outputs repeat".into()));
        }

        let free_inputs: Vec<u8> = alpha
            .iter()
            .copied()
            .filter(|b| !pinned.contains_key(b))
            .collect();
        let free_outputs: Vec<u8> = alpha
            .iter()
            .copied()
            .filter(|b| !pinned_outputs.contains(b))
            .collect();

        // Rejection-sample a fixpoint-free completion. The no-fixpoint
        // probability is ~1/e per attempt, so a bound of 256 tries never
        // fires in practice.
        let mut assignment = free_outputs.clone();
        let mut ok = false;
        for _ in 0..256 {
            prng.shuffle(&mut assignment);
            if free_inputs
                .iter()
                .zip(&assignment)
                .all(|(input, output)| input != output)
            {
                ok = true;
                break;
            }
        }
        if !ok {
            return Err(PadError::AlphabetTooSmall {
                alphabet: alpha.len(),
                expansion: 1,
                needed: alpha.len() + 1,
            });
        }

        let mut map = [0u8; 256];
        for (&input, &output) in &pinned {
            map[input as usize] = output;
        }
        for (&input, &output) in free_inputs.iter().zip(&assignment) {
            map[input as usize] = output;
        }
        // Overflow region: total over all bytes, images inside the alphabet.
        let in_alpha: HashSet<u8> = alpha.iter().copied().collect();
        for b in 0..=255u8 {
            if !in_alpha.contains(&b) {
                if let Some(pin) = overrides.iter().find(|(input, _)| *input == b) {
                    map[b as usize] = pin.1[0];
                } else {
                    map[b as usize] = *prng.pick(alpha);
                }
            }
        }
        Ok(map.to_vec())
    }

    /// Expansion >= 2: 256 pairwise-distinct output strings.
    fn generate_wide(
        scheme: &Scheme,
        prng: &mut Prng,
        overrides: &[(u8, &[u8])],
    ) -> Result<Vec<u8>, PadError> {
        let k = scheme.expansion;
        let space = (scheme.alphabet.len() as u128).pow(k as u32);
        if space < 256 {
            return Err(PadError::AlphabetTooSmall {
                alphabet: scheme.alphabet.len(),
                expansion: k,
                needed: 256,
            });
        }
        // Output strings fold into a u64 key for cheap duplicate checks;
        // alphabet bytes are 7-bit so the 257-base fold is collision-free
        // for every expansion up to 8.
        let mut used: HashSet<u64> = HashSet::with_capacity(512);
        let pack = |bytes: &[u8]| -> u64 {
            let mut key: u64 = 1;
            for &b in bytes {
                key = key.wrapping_mul(257).wrapping_add(u64::from(b) + 1);
            }
            key
        };
        let mut out = vec![0u8; 256 * k];
        let mut filled = [false; 256];
        for (input, output) in overrides {
            if !used.insert(pack(output)) {
                return Err(PadError::BadOverride("pinned outputs repeat".into()));
            }
            out[*input as usize * k..(*input as usize + 1) * k].copy_from_slice(output);
            filled[*input as usize] = true;
        }
        let mut candidate = vec![0u8; k];
        for b in 0..256usize {
            if filled[b] {
                continue;
            }
            loop {
                for slot in candidate.iter_mut() {
                    *slot = *prng.pick(&scheme.alphabet);
                }
                if used.insert(pack(&candidate)) {
                    out[b * k..(b + 1) * k].copy_from_slice(&candidate);
                    break;
                }
            }
        }
        Ok(out)
    }

    pub fn id(&self) -> TableId {
        self.id
    }

    pub fn scheme(&self) -> &Scheme {
        &self.scheme
    }

    pub fn expansion(&self) -> usize {
        self.scheme.expansion
    }

    /// Output string for one input byte.
    pub fn image(&self, b: u8) -> &[u8] {
        let k = self.scheme.expansion;
        &self.outputs[b as usize * k..(b as usize + 1) * k]
    }

    /// Forward substitution: |output| = expansion * |input|.
    pub fn apply(&self, input: &[u8]) -> Vec<u8> {
        let mut out = Vec::with_capacity(input.len() * self.scheme.expansion);
        for &b in input {
            out.extend_from_slice(self.image(b));
        }
        out
    }

    /// Reverse substitution (Randomized -> Original), the inversion pass run
    /// over every recognized term at a sink.
    ///
    /// Each expansion-width group that the table could have emitted is
    /// replaced by its source byte. Groups the table never emits — and whole
    /// words whose length is not a multiple of the expansion — are foreign:
    /// they are scrambled by forward-substituting each byte under this same
    /// table. A word that was not randomized therefore never survives this
    /// pass unchanged.
    pub fn reverse_apply(&self, word: &[u8]) -> Vec<u8> {
        let k = self.scheme.expansion;
        if word.is_empty() {
            return Vec::new();
        }
        if !word.len().is_multiple_of(k) {
            return self.apply(word);
        }
        let inverse = self.inverse();
        let mut out = Vec::with_capacity(word.len() / k);
        for group in word.chunks(k) {
            match inverse.get(group) {
                Some(&src) => out.push(src),
                None => out.extend_from_slice(&self.apply(group)),
            }
        }
        out
    }
}

/// A randomized string paired with the pad that produced it.
#[derive(Debug, Clone)]
pub struct Record {
    pub randomized: Vec<u8>,
    pub original: Vec<u8>,
    pub table: Arc<Table>,
}

impl Record {
    pub fn table_id(&self) -> TableId {
        self.table.id()
    }
}

/// Default bound on collision retries when drawing fresh tables.
pub const DEFAULT_RETRY_LIMIT: usize = 64;

/// Live randomization records, keyed by randomized string.
///
/// A store is a unit of serialization: callers hold `&mut` for every
/// mutating operation, and independent stores never share state. The live
/// set keeps `randomized` strings unique: a fresh randomization that would
/// collide with a live record is retried under a new table, up to
/// `retry_limit` times.
pub struct RecordStore {
    live: HashMap<Vec<u8>, Record>,
    retry_limit: usize,
    prng: Prng,
    next_table: u64,
}

impl RecordStore {
    /// Deterministic store for tests and reproducible scenarios.
    pub fn seeded(seed: u64) -> Self {
        RecordStore {
            live: HashMap::new(),
            retry_limit: DEFAULT_RETRY_LIMIT,
            prng: Prng::seeded(seed),
            next_table: 1,
        }
    }

    /// Entropy-seeded store for ordinary use.
    pub fn from_entropy() -> Self {
        RecordStore {
            live: HashMap::new(),
            retry_limit: DEFAULT_RETRY_LIMIT,
            prng: Prng::from_entropy(),
            next_table: 1,
        }
    }

    pub fn set_retry_limit(&mut self, limit: usize) {
        self.retry_limit = limit.max(1);
    }

    /// Draws a fresh table without creating a record. Used by callers that
    /// randomize several terms under one shared pad.
    pub fn draw_table(&mut self, scheme: &Scheme) -> Result<Arc<Table>, PadError> {
        self.draw_table_with_overrides(scheme, &[])
    }

    pub fn draw_table_with_overrides(
        &mut self,
        scheme: &Scheme,
        overrides: &[(u8, &[u8])],
    ) -> Result<Arc<Table>, PadError> {
        let id = TableId(self.next_table);
        self.next_table += 1;
        Table::generate(scheme, &mut self.prng, id, overrides)
    }

    /// Randomizes `input` under a fresh table drawn per call, retrying with
    /// another fresh table while the candidate collides with a live record.
    pub fn randomize(&mut self, input: &[u8], scheme: &Scheme) -> Result<Record, PadError> {
        if input.is_empty() {
            return Err(PadError::EmptyInput);
        }
        for _ in 0..self.retry_limit {
            let table = self.draw_table(scheme)?;
            let randomized = table.apply(input);
            if self.live.contains_key(&randomized) {
                continue;
            }
            let record = Record {
                randomized: randomized.clone(),
                original: input.to_vec(),
                table,
            };
            self.live.insert(randomized, record.clone());
            return Ok(record);
        }
        Err(PadError::CollisionExhausted {
            retries: self.retry_limit,
        })
    }

    /// Randomizes `input` under a caller-chosen table. Re-randomizing the
    /// same input under the same table yields the existing record; a clash
    /// with a record from a different table or input is a collision error
    /// (the caller picked the table, so no retry is possible here).
    pub fn randomize_with_table(
        &mut self,
        input: &[u8],
        table: &Arc<Table>,
    ) -> Result<Record, PadError> {
        if input.is_empty() {
            return Err(PadError::EmptyInput);
        }
        let randomized = table.apply(input);
        if let Some(existing) = self.live.get(&randomized) {
            if existing.original == input && existing.table_id() == table.id() {
                return Ok(existing.clone());
            }
            return Err(PadError::CollisionExhausted { retries: 0 });
        }
        let record = Record {
            randomized: randomized.clone(),
            original: input.to_vec(),
            table: Arc::clone(table),
        };
        self.live.insert(randomized, record.clone());
        Ok(record)
    }

    /// Exact-match lookup among live records. Does not consume.
    pub fn derandomize(&self, randomized: &[u8]) -> Option<&Record> {
        self.live.get(randomized)
    }

    /// Removes the record for `randomized` from the live set. Returns the
    /// record if one was live; repeated consumption is a no-op.
    pub fn consume(&mut self, randomized: &[u8]) -> Option<Record> {
        self.live.remove(randomized)
    }

    pub fn live_count(&self) -> usize {
        self.live.len()
    }

    pub fn live_records(&self) -> impl Iterator<Item = &Record> {
        self.live.values()
    }
}

impl fmt::Debug for RecordStore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RecordStore")
            .field("live", &self.live.len())
            .field("retry_limit", &self.retry_limit)
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_scheme(bytes: &[u8]) -> Scheme {
        Scheme::new(1, bytes.to_vec()).unwrap()
    }

    #[test]
    fn scheme_rejects_bad_expansion_and_alphabet() {
        assert!(Scheme::new(3, vec![b'a', b'b']).is_err());
        assert!(Scheme::new(1, vec![]).is_err());
        assert!(Scheme::new(1, vec![b'a', b'a']).is_err());
        assert!(Scheme::new(1, vec![b'a', b';']).is_err());
        assert!(Scheme::new(1, vec![b'a', b'\'']).is_err());
        assert!(Scheme::new(1, vec![b'a', 0x07]).is_err());
    }

    #[test]
    fn printable_alphabet_excludes_quotes_and_metacharacters() {
        let scheme = Scheme::printable(1);
        assert_eq!(scheme.alphabet().len(), 85);
        for b in FORBIDDEN_OUTPUT_BYTES {
            assert!(!scheme.alphabet().contains(b));
        }
    }

    #[test]
    fn single_expansion_has_no_fixpoints() {
        for seed in 0..20 {
            let table = Table::from_seed(&Scheme::printable(1), seed).unwrap();
            for b in 0..=255u8 {
                assert_ne!(table.image(b), &[b], "fixpoint at 0x{b:02x} seed {seed}");
            }
        }
    }

    #[test]
    fn figure_pad_maps_wget_to_qjpc() {
        // The motivating pad: w->q, g->j, e->p, t->c, plus r->o, m->s.
        let table = Table::from_seed_with_overrides(
            &Scheme::printable(1),
            9,
            &[
                (b'w', b"q"),
                (b'g', b"j"),
                (b'e', b"p"),
                (b't', b"c"),
                (b'r', b"o"),
                (b'm', b"s"),
            ],
        )
        .unwrap();
        assert_eq!(table.apply(b"wget"), b"qjpc");
        assert_eq!(table.apply(b"rm"), b"os");
    }

    #[test]
    fn ls_pad_maps_to_mt() {
        let table = Table::from_seed_with_overrides(
            &Scheme::printable(1),
            3,
            &[(b'l', b"m"), (b's', b"t")],
        )
        .unwrap();
        assert_eq!(table.apply(b"ls"), b"mt");
    }

    #[test]
    fn wide_expansion_injective_over_all_inputs() {
        let table = Table::from_seed(&Scheme::word_safe(2), 42).unwrap();
        let mut seen = HashSet::new();
        for b in 0..=255u8 {
            assert_eq!(table.image(b).len(), 2);
            assert!(seen.insert(table.image(b).to_vec()), "duplicate image");
        }
        assert_eq!(seen.len(), 256);
    }

    #[test]
    fn wide_expansion_needs_room() {
        // 2 symbols at expansion 2 give only 4 distinct strings.
        let scheme = Scheme::new(2, vec![b'a', b'b']).unwrap();
        match Table::from_seed(&scheme, 1) {
            Err(PadError::AlphabetTooSmall { .. }) => {}
            other => panic!("expected AlphabetTooSmall, got {other:?}"),
        }
    }

    #[test]
    fn roundtrip_through_store() {
        let mut store = RecordStore::seeded(11);
        let scheme = Scheme::printable(1);
        let record = store.randomize(b"wget ", &scheme).unwrap();
        assert_eq!(record.randomized.len(), 5);
        let found = store.derandomize(&record.randomized).unwrap();
        assert_eq!(found.original, b"wget ");
        // Lookup does not consume.
        assert!(store.derandomize(&record.randomized).is_some());
    }

    #[test]
    fn unknown_string_has_no_record() {
        let store = RecordStore::seeded(1);
        assert!(store.derandomize(b"rm").is_none());
    }

    #[test]
    fn collision_retries_until_distinct() {
        // Two-symbol alphabet: the only derangement is the swap, so
        // randomizing the same word twice must collide and exhaust retries.
        let scheme = tiny_scheme(b"ab");
        let mut store = RecordStore::seeded(5);
        let first = store.randomize(b"ab", &scheme).unwrap();
        assert_eq!(first.randomized, b"ba");
        match store.randomize(b"ab", &scheme) {
            Err(PadError::CollisionExhausted { .. }) => {}
            other => panic!("expected exhaustion, got {other:?}"),
        }
        // After consuming the first record the image is free again.
        store.consume(&first.randomized);
        let again = store.randomize(b"ab", &scheme).unwrap();
        assert_eq!(again.randomized, b"ba");
    }

    #[test]
    fn collision_forces_fresh_image() {
        // Three symbols: "ab" has two possible derangement images; holding
        // one live forces the retry loop to produce the other.
        let scheme = tiny_scheme(b"abc");
        for seed in 0..32 {
            let mut store = RecordStore::seeded(seed);
            let first = store.randomize(b"ab", &scheme).unwrap();
            let second = store.randomize(b"ab", &scheme).unwrap();
            assert_ne!(first.randomized, second.randomized);
        }
    }

    #[test]
    fn consume_is_idempotent_and_blocks_replay() {
        let mut store = RecordStore::seeded(3);
        let scheme = Scheme::printable(1);
        let record = store.randomize(b"cd", &scheme).unwrap();
        assert!(store.consume(&record.randomized).is_some());
        assert!(store.consume(&record.randomized).is_none());
        assert!(store.derandomize(&record.randomized).is_none());
    }

    #[test]
    fn fresh_tables_per_randomization() {
        let mut store = RecordStore::seeded(8);
        let scheme = Scheme::printable(1);
        let a = store.randomize(b"one", &scheme).unwrap();
        let b = store.randomize(b"two", &scheme).unwrap();
        assert_ne!(a.table_id(), b.table_id());
    }

    #[test]
    fn shared_table_reuses_record_for_same_term() {
        let mut store = RecordStore::seeded(21);
        let scheme = Scheme::word_safe(1);
        let table = store.draw_table(&scheme).unwrap();
        let a = store.randomize_with_table(b"select", &table).unwrap();
        let b = store.randomize_with_table(b"select", &table).unwrap();
        assert_eq!(a.randomized, b.randomized);
        assert_eq!(store.live_count(), 1);
    }

    #[test]
    fn reverse_apply_inverts_forward() {
        for k in [1usize, 2, 4, 8] {
            let table = Table::from_seed(&Scheme::word_safe(k), 17).unwrap();
            let word = b"select";
            assert_eq!(table.reverse_apply(&table.apply(word)), word.to_vec());
        }
    }

    #[test]
    fn reverse_apply_scrambles_foreign_words() {
        for k in [1usize, 2, 4, 8] {
            let table = Table::from_seed(&Scheme::word_safe(k), 23).unwrap();
            let scrambled = table.reverse_apply(b"DROP");
            assert_ne!(scrambled, b"DROP".to_vec(), "expansion {k}");
        }
    }

    #[test]
    fn reverse_apply_scrambles_misaligned_words() {
        let table = Table::from_seed(&Scheme::word_safe(2), 29).unwrap();
        // Five bytes cannot be a 2-expansion image.
        let scrambled = table.reverse_apply(b"abcde");
        assert_ne!(scrambled, b"abcde".to_vec());
        assert_eq!(scrambled.len(), 10);
    }

    #[test]
    fn length_law() {
        for k in [1usize, 2, 4, 8] {
            let mut store = RecordStore::seeded(k as u64);
            let scheme = Scheme::printable(k);
            let record = store.randomize(b"payload", &scheme).unwrap();
            assert_eq!(record.randomized.len(), k * 7);
        }
    }

    #[test]
    fn pair_image_space_matches_injective_count() {
        // Distinct images of a two-byte command over an n-symbol alphabet:
        // the candidate space an attacker must search is every ordered pair
        // of distinct symbols, n*(n-1) of them. Enumerate for small n and
        // check every actually generated image falls inside that space.
        for n in 3usize..=6 {
            let alphabet: Vec<u8> = (0..n as u8).map(|i| b'a' + i).collect();
            let scheme = tiny_scheme(&alphabet);
            let mut space = HashSet::new();
            for &a in &alphabet {
                for &b in &alphabet {
                    if a != b {
                        space.insert(vec![a, b]);
                    }
                }
            }
            assert_eq!(space.len(), n * (n - 1));
            for seed in 0..200u64 {
                let table = Table::from_seed(&scheme, seed).unwrap();
                let image = table.apply(b"ab");
                assert!(space.contains(&image), "image outside candidate space");
            }
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn printable_string() -> impl Strategy<Value = Vec<u8>> {
            proptest::collection::vec(0x20u8..=0x7e, 1..=64)
        }

        proptest! {
            #[test]
            fn roundtrip_for_every_expansion(
                input in printable_string(),
                seed in 0u64..1000,
            ) {
                for k in [1usize, 2, 4, 8] {
                    let mut store = RecordStore::seeded(seed);
                    let record = store.randomize(&input, &Scheme::printable(k)).unwrap();
                    prop_assert_eq!(record.randomized.len(), k * input.len());
                    let found = store.derandomize(&record.randomized).unwrap();
                    prop_assert_eq!(&found.original, &input);
                }
            }

            #[test]
            fn single_expansion_never_fixes_a_word(
                input in printable_string(),
                seed in 0u64..1000,
            ) {
                let mut store = RecordStore::seeded(seed);
                let record = store.randomize(&input, &Scheme::printable(1)).unwrap();
                prop_assert_ne!(record.randomized, input);
            }

            #[test]
            fn reverse_apply_inverts_any_forward_image(
                input in printable_string(),
                seed in 0u64..1000,
            ) {
                for k in [1usize, 2, 4] {
                    let table = Table::from_seed(&Scheme::word_safe(k), seed).unwrap();
                    // Words are alphabet bytes, the invertible core.
                    let word: Vec<u8> = input
                        .iter()
                        .map(|b| b'a' + (b % 26))
                        .collect();
                    prop_assert_eq!(table.reverse_apply(&table.apply(&word)), word);
                }
            }
        }
    }

    #[test]
    fn empty_input_rejected() {
        let mut store = RecordStore::seeded(2);
        match store.randomize(b"", &Scheme::printable(1)) {
            Err(PadError::EmptyInput) => {}
            other => panic!("expected EmptyInput, got {other:?}"),
        }
    }
}

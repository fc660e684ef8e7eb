//! Grammar-agnostic query scanner.
//!
//! The scanner has no notion of SQL keywords or dialects; it only knows
//! byte-shape patterns. Exactly five token classes exist:
//!
//! - `word`: a maximal run of `[A-Za-z0-9_]` containing at least one
//!   non-digit byte;
//! - `number`: a maximal all-digit run;
//! - `quoted_string`: `'...'` including the quotes, with `''` and `\'`
//!   treated as escaped quotes;
//! - `whitespace`: a run of space, tab, CR, LF;
//! - `special`: anything else, one byte at a time except for the sequences
//!   `/*!`, `/*`, `*/` and `--`, which are single tokens. Specials carry no
//!   comment semantics: nothing after them is ever swallowed.
//!
//! Concatenating all token texts reproduces the input byte for byte.

/// Token class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenClass {
    Word,
    Number,
    QuotedString,
    Special,
    Whitespace,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub class: TokenClass,
    pub text: Vec<u8>,
    pub start: usize,
    pub end: usize,
    /// Set on a quoted_string token whose closing quote was missing.
    pub unterminated: bool,
}

impl Token {
    fn new(class: TokenClass, text: &[u8], start: usize) -> Self {
        Token {
            class,
            end: start + text.len(),
            text: text.to_vec(),
            start,
            unterminated: false,
        }
    }
}

fn is_word_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

fn is_space_byte(b: u8) -> bool {
    matches!(b, b' ' | b'\t' | b'\r' | b'\n')
}

const MULTI_SPECIALS: &[&[u8]] = &[b"/*!", b"/*", b"*/", b"--"];

/// Tokenizes `input` losslessly.
pub fn scan(input: &[u8]) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < input.len() {
        let b = input[i];
        if is_space_byte(b) {
            let start = i;
            while i < input.len() && is_space_byte(input[i]) {
                i += 1;
            }
            tokens.push(Token::new(TokenClass::Whitespace, &input[start..i], start));
        } else if is_word_byte(b) {
            let start = i;
            let mut all_digits = true;
            while i < input.len() && is_word_byte(input[i]) {
                all_digits &= input[i].is_ascii_digit();
                i += 1;
            }
            let class = if all_digits {
                TokenClass::Number
            } else {
                TokenClass::Word
            };
            tokens.push(Token::new(class, &input[start..i], start));
        } else if b == b'\'' {
            let start = i;
            i += 1;
            let mut closed = false;
            while i < input.len() {
                match input[i] {
                    b'\\' if i + 1 < input.len() => i += 2,
                    b'\'' if input.get(i + 1) == Some(&b'\'') => i += 2,
                    b'\'' => {
                        i += 1;
                        closed = true;
                        break;
                    }
                    _ => i += 1,
                }
            }
            let mut token = Token::new(TokenClass::QuotedString, &input[start..i], start);
            token.unterminated = !closed;
            tokens.push(token);
        } else {
            let multi = MULTI_SPECIALS
                .iter()
                .find(|seq| input[i..].starts_with(seq));
            let len = multi.map_or(1, |seq| seq.len());
            tokens.push(Token::new(TokenClass::Special, &input[i..i + len], i));
            i += len;
        }
    }
    tokens
}

/// Word tokens only, handy for vocabulary checks.
pub fn words(input: &[u8]) -> Vec<Vec<u8>> {
    scan(input)
        .into_iter()
        .filter(|t| t.class == TokenClass::Word)
        .map(|t| t.text)
        .collect()
}

//! Recursive-descent parser for the mini language.
//!
//! Call expressions are resolved after the whole file is read: a call
//! through a name that is a defined function or a known builtin is direct;
//! any other callee is an indirect call through a variable.

use std::collections::HashSet;
use std::sync::Arc;

use thiserror::Error;

use super::ast::*;
use crate::builtins::BuiltinSet;

#[derive(Debug, Error)]
#[error("{loc}: {message}")]
pub struct ParseError {
    pub message: String,
    pub loc: Loc,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Semi,
    Plus,
    Eq,
    Eof,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: u32,
    col: u32,
    file: Arc<str>,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str, file: Arc<str>) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
            line: 1,
            col: 1,
            file,
        }
    }

    fn loc(&self) -> Loc {
        Loc::new(&self.file, self.line, self.col)
    }

    fn bump(&mut self) -> Option<u8> {
        let b = *self.src.get(self.pos)?;
        self.pos += 1;
        if b == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(b)
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn skip_trivia(&mut self) {
        loop {
            match self.peek() {
                Some(b) if b.is_ascii_whitespace() => {
                    self.bump();
                }
                Some(b'/') if self.src.get(self.pos + 1) == Some(&b'/') => {
                    while let Some(b) = self.peek() {
                        if b == b'\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                _ => break,
            }
        }
    }

    fn next_token(&mut self) -> Result<(Tok, Loc), ParseError> {
        self.skip_trivia();
        let loc = self.loc();
        let Some(b) = self.peek() else {
            return Ok((Tok::Eof, loc));
        };
        let tok = match b {
            b'(' => {
                self.bump();
                Tok::LParen
            }
            b')' => {
                self.bump();
                Tok::RParen
            }
            b'{' => {
                self.bump();
                Tok::LBrace
            }
            b'}' => {
                self.bump();
                Tok::RBrace
            }
            b',' => {
                self.bump();
                Tok::Comma
            }
            b';' => {
                self.bump();
                Tok::Semi
            }
            b'+' => {
                self.bump();
                Tok::Plus
            }
            b'=' => {
                self.bump();
                Tok::Eq
            }
            b'"' => {
                self.bump();
                let mut text = String::new();
                loop {
                    match self.bump() {
                        Some(b'"') => break,
                        Some(b'\\') => match self.bump() {
                            Some(b'"') => text.push('"'),
                            Some(b'\\') => text.push('\\'),
                            Some(b'n') => text.push('\n'),
                            Some(b't') => text.push('\t'),
                            other => {
                                return Err(ParseError {
                                    message: format!(
                                        "unknown escape {:?}",
                                        other.map(|c| c as char)
                                    ),
                                    loc: self.loc(),
                                })
                            }
                        },
                        Some(b'\n') | None => {
                            return Err(ParseError {
                                message: "unterminated string literal".into(),
                                loc,
                            })
                        }
                        Some(other) => text.push(other as char),
                    }
                }
                Tok::Str(text)
            }
            b if b.is_ascii_alphabetic() || b == b'_' => {
                let mut name = String::new();
                while let Some(c) = self.peek() {
                    if c.is_ascii_alphanumeric() || c == b'_' {
                        name.push(c as char);
                        self.bump();
                    } else {
                        break;
                    }
                }
                Tok::Ident(name)
            }
            other => {
                return Err(ParseError {
                    message: format!("unexpected character {:?}", other as char),
                    loc,
                })
            }
        };
        Ok((tok, loc))
    }
}

struct Parser {
    tokens: Vec<(Tok, Loc)>,
    pos: usize,
    known_callees: HashSet<String>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].0
    }

    fn peek_loc(&self) -> Loc {
        self.tokens[self.pos].1.clone()
    }

    fn next(&mut self) -> (Tok, Loc) {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<Loc, ParseError> {
        let (tok, loc) = self.next();
        if tok == want {
            Ok(loc)
        } else {
            Err(ParseError {
                message: format!("expected {what}, found {tok:?}"),
                loc,
            })
        }
    }

    fn expect_ident(&mut self, what: &str) -> Result<(String, Loc), ParseError> {
        let (tok, loc) = self.next();
        match tok {
            Tok::Ident(name) => Ok((name, loc)),
            other => Err(ParseError {
                message: format!("expected {what}, found {other:?}"),
                loc,
            }),
        }
    }

    fn parse_program(&mut self) -> Result<Program, ParseError> {
        let mut functions: Vec<FunctionDef> = Vec::new();
        let mut globals = Vec::new();
        loop {
            match self.peek() {
                Tok::Eof => break,
                Tok::Ident(kw) if kw == "global" => {
                    let (_, loc) = self.next();
                    let (name, _) = self.expect_ident("global name")?;
                    self.expect(Tok::Semi, "';'")?;
                    globals.push(GlobalDecl { name, loc });
                }
                Tok::Ident(kw) if kw == "fn" => {
                    let f = self.parse_function()?;
                    if functions.iter().any(|g| g.name == f.name) {
                        return Err(ParseError {
                            message: format!("duplicate function `{}`", f.name),
                            loc: f.loc,
                        });
                    }
                    functions.push(f);
                }
                _ => {
                    return Err(ParseError {
                        message: "expected `fn` or `global` at top level".into(),
                        loc: self.peek_loc(),
                    })
                }
            }
        }
        if functions.iter().all(|f| f.name != "main") {
            return Err(ParseError {
                message: "program must define a `main` function".into(),
                loc: Loc::new(&self.tokens[0].1.file, 1, 1),
            });
        }
        Ok(Program {
            functions,
            globals,
            entry: "main".to_owned(),
        })
    }

    fn parse_function(&mut self) -> Result<FunctionDef, ParseError> {
        let (_, loc) = self.next(); // `fn`
        let (name, _) = self.expect_ident("function name")?;
        self.expect(Tok::LParen, "'('")?;
        let mut params = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                let (p, ploc) = self.expect_ident("parameter name")?;
                if params.contains(&p) {
                    return Err(ParseError {
                        message: format!("duplicate parameter `{p}`"),
                        loc: ploc,
                    });
                }
                params.push(p);
                if *self.peek() == Tok::Comma {
                    self.next();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, "')'")?;
        self.expect(Tok::LBrace, "'{'")?;
        let body = self.parse_block_body()?;
        Ok(FunctionDef {
            name,
            params,
            body,
            is_builtin: false,
            loc,
        })
    }

    fn parse_block_body(&mut self) -> Result<Vec<Stmt>, ParseError> {
        let mut stmts = Vec::new();
        while *self.peek() != Tok::RBrace {
            if *self.peek() == Tok::Eof {
                return Err(ParseError {
                    message: "unexpected end of input inside block".into(),
                    loc: self.peek_loc(),
                });
            }
            stmts.push(self.parse_stmt()?);
        }
        self.next(); // `}`
        Ok(stmts)
    }

    fn parse_stmt(&mut self) -> Result<Stmt, ParseError> {
        let loc = self.peek_loc();
        match self.peek().clone() {
            Tok::Ident(kw) if kw == "return" => {
                self.next();
                let expr = if *self.peek() == Tok::Semi {
                    None
                } else {
                    Some(self.parse_expr()?)
                };
                self.expect(Tok::Semi, "';'")?;
                Ok(Stmt::Return { expr, loc })
            }
            Tok::Ident(kw) if kw == "if" => {
                self.next();
                self.expect(Tok::LParen, "'('")?;
                let cond = self.parse_expr()?;
                self.expect(Tok::RParen, "')'")?;
                self.expect(Tok::LBrace, "'{'")?;
                let then_body = self.parse_block_body()?;
                let else_body = if matches!(self.peek(), Tok::Ident(k) if k == "else") {
                    self.next();
                    self.expect(Tok::LBrace, "'{'")?;
                    self.parse_block_body()?
                } else {
                    Vec::new()
                };
                Ok(Stmt::If {
                    cond,
                    then_body,
                    else_body,
                    loc,
                })
            }
            Tok::Ident(kw) if kw == "while" => {
                self.next();
                self.expect(Tok::LParen, "'('")?;
                let cond = self.parse_expr()?;
                self.expect(Tok::RParen, "')'")?;
                self.expect(Tok::LBrace, "'{'")?;
                let body = self.parse_block_body()?;
                Ok(Stmt::While { cond, body, loc })
            }
            Tok::Ident(_) => {
                // Either `name = expr;` or a call statement.
                let (name, name_loc) = self.expect_ident("statement")?;
                match self.peek() {
                    Tok::Eq => {
                        self.next();
                        let expr = self.parse_expr()?;
                        self.expect(Tok::Semi, "';'")?;
                        Ok(Stmt::Assign {
                            lhs: name,
                            expr,
                            loc,
                        })
                    }
                    Tok::LParen => {
                        let call = self.parse_call_after_name(name, name_loc)?;
                        self.expect(Tok::Semi, "';'")?;
                        Ok(Stmt::Call { call, loc })
                    }
                    _ => Err(ParseError {
                        message: "expected `=` or `(` after name".into(),
                        loc: self.peek_loc(),
                    }),
                }
            }
            other => Err(ParseError {
                message: format!("expected statement, found {other:?}"),
                loc,
            }),
        }
    }

    fn parse_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.parse_term()?;
        while *self.peek() == Tok::Plus {
            let (_, loc) = self.next();
            let rhs = self.parse_term()?;
            lhs = Expr::Concat {
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
                loc,
            };
        }
        Ok(lhs)
    }

    fn parse_term(&mut self) -> Result<Expr, ParseError> {
        let loc = self.peek_loc();
        match self.next().0 {
            Tok::Str(text) => Ok(Expr::StrLit { text, loc }),
            Tok::Ident(name) if name == "format" => {
                self.expect(Tok::LParen, "'('")?;
                let (template, tloc) = match self.next() {
                    (Tok::Str(t), l) => (t, l),
                    (other, l) => {
                        return Err(ParseError {
                            message: format!("format template must be a string, found {other:?}"),
                            loc: l,
                        })
                    }
                };
                let mut args = Vec::new();
                while *self.peek() == Tok::Comma {
                    self.next();
                    args.push(self.parse_expr()?);
                }
                self.expect(Tok::RParen, "')'")?;
                match placeholder_count(&template) {
                    Some(n) if n == args.len() => Ok(Expr::Format {
                        template,
                        args,
                        loc,
                    }),
                    Some(n) => Err(ParseError {
                        message: format!(
                            "format template has {n} placeholder(s) but {} argument(s)",
                            args.len()
                        ),
                        loc: tloc,
                    }),
                    None => Err(ParseError {
                        message: "format templates may use `%s` placeholders only".into(),
                        loc: tloc,
                    }),
                }
            }
            Tok::Ident(name) => {
                if *self.peek() == Tok::LParen {
                    self.parse_call_after_name(name, loc)
                } else {
                    Ok(Expr::Var { name, loc })
                }
            }
            other => Err(ParseError {
                message: format!("expected expression, found {other:?}"),
                loc,
            }),
        }
    }

    fn parse_call_after_name(&mut self, name: String, loc: Loc) -> Result<Expr, ParseError> {
        self.expect(Tok::LParen, "'('")?;
        let mut args = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                args.push(self.parse_expr()?);
                if *self.peek() == Tok::Comma {
                    self.next();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, "')'")?;
        if self.known_callees.contains(&name) {
            Ok(Expr::Call {
                callee: name,
                args,
                loc,
            })
        } else {
            Ok(Expr::IndirectCall {
                var: name,
                args,
                loc,
            })
        }
    }
}

/// Parses `source` with the default builtin set; the file name is used in
/// source locations and diagnostics only.
pub fn parse(source: &str, file: &str) -> Result<Program, ParseError> {
    parse_with(source, file, &BuiltinSet::default())
}

pub fn parse_with(source: &str, file: &str, builtins: &BuiltinSet) -> Result<Program, ParseError> {
    let file: Arc<str> = Arc::from(file);
    let mut lexer = Lexer::new(source, Arc::clone(&file));
    let mut tokens = Vec::new();
    loop {
        let (tok, loc) = lexer.next_token()?;
        let done = tok == Tok::Eof;
        tokens.push((tok, loc));
        if done {
            break;
        }
    }

    // First pass: collect function names so call sites resolve to direct
    // calls; anything else becomes an indirect call through a variable.
    let mut known_callees: HashSet<String> = tokens
        .windows(2)
        .filter_map(|w| match (&w[0].0, &w[1].0) {
            (Tok::Ident(kw), Tok::Ident(name)) if kw == "fn" => Some(name.clone()),
            _ => None,
        })
        .collect();
    for (tok, _) in &tokens {
        if let Tok::Ident(name) = tok {
            if builtins.contains(name) {
                known_callees.insert(name.clone());
            }
        }
    }

    let mut parser = Parser {
        tokens,
        pos: 0,
        known_callees,
    };
    parser.parse_program()
}

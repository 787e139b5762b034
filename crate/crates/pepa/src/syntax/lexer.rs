//! Tokeniser for the model text format. Tracks line/column positions so
//! parse errors can point at the offending input.

use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Ident(String),
    Number(f64),
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Lt,
    Gt,
    Comma,
    Semicolon,
    Plus,
    Dot,
    Equals,
    Star,
    ParPar, // `||`
    Eof,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Ident(s) => write!(f, "`{s}`"),
            TokenKind::Number(n) => write!(f, "`{n}`"),
            TokenKind::LBrace => write!(f, "`{{`"),
            TokenKind::RBrace => write!(f, "`}}`"),
            TokenKind::LParen => write!(f, "`(`"),
            TokenKind::RParen => write!(f, "`)`"),
            TokenKind::LBracket => write!(f, "`[`"),
            TokenKind::RBracket => write!(f, "`]`"),
            TokenKind::Lt => write!(f, "`<`"),
            TokenKind::Gt => write!(f, "`>`"),
            TokenKind::Comma => write!(f, "`,`"),
            TokenKind::Semicolon => write!(f, "`;`"),
            TokenKind::Plus => write!(f, "`+`"),
            TokenKind::Dot => write!(f, "`.`"),
            TokenKind::Equals => write!(f, "`=`"),
            TokenKind::Star => write!(f, "`*`"),
            TokenKind::ParPar => write!(f, "`||`"),
            TokenKind::Eof => write!(f, "end of input"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub pos: Pos,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LexError {
    #[error("{pos}: unexpected character `{ch}`")]
    UnexpectedChar { pos: Pos, ch: char },
    #[error("{pos}: malformed number `{text}`")]
    BadNumber { pos: Pos, text: String },
}

pub fn tokenize(input: &str) -> Result<Vec<Token>, LexError> {
    let mut tokens = Vec::new();
    let mut chars = input.chars().peekable();
    let mut line = 1u32;
    let mut col = 1u32;

    macro_rules! bump {
        () => {{
            let c = chars.next();
            if let Some(c) = c {
                if c == '\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
            }
            c
        }};
    }

    loop {
        let pos = Pos { line, col };
        let Some(&c) = chars.peek() else {
            tokens.push(Token { kind: TokenKind::Eof, pos });
            return Ok(tokens);
        };
        if c.is_whitespace() {
            bump!();
            continue;
        }
        if c == '/' {
            // `//` line comment; a lone `/` is not part of the grammar.
            bump!();
            if chars.peek() == Some(&'/') {
                while let Some(&n) = chars.peek() {
                    if n == '\n' {
                        break;
                    }
                    bump!();
                }
                continue;
            }
            return Err(LexError::UnexpectedChar { pos, ch: '/' });
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let mut ident = String::new();
            while let Some(&n) = chars.peek() {
                if n.is_ascii_alphanumeric() || n == '_' {
                    ident.push(n);
                    bump!();
                } else {
                    break;
                }
            }
            tokens.push(Token {
                kind: TokenKind::Ident(ident),
                pos,
            });
            continue;
        }
        if c.is_ascii_digit() {
            let mut text = String::new();
            while let Some(&n) = chars.peek() {
                if n.is_ascii_digit() || n == '.' {
                    text.push(n);
                    bump!();
                } else if n == 'e' || n == 'E' {
                    text.push(n);
                    bump!();
                    if let Some(&s) = chars.peek() {
                        if s == '+' || s == '-' {
                            text.push(s);
                            bump!();
                        }
                    }
                } else {
                    break;
                }
            }
            let value: f64 = text
                .parse()
                .map_err(|_| LexError::BadNumber { pos, text: text.clone() })?;
            tokens.push(Token {
                kind: TokenKind::Number(value),
                pos,
            });
            continue;
        }
        let kind = match c {
            '{' => TokenKind::LBrace,
            '}' => TokenKind::RBrace,
            '(' => TokenKind::LParen,
            ')' => TokenKind::RParen,
            '[' => TokenKind::LBracket,
            ']' => TokenKind::RBracket,
            '<' => TokenKind::Lt,
            '>' => TokenKind::Gt,
            ',' => TokenKind::Comma,
            ';' => TokenKind::Semicolon,
            '+' => TokenKind::Plus,
            '.' => TokenKind::Dot,
            '=' => TokenKind::Equals,
            '*' => TokenKind::Star,
            '|' => {
                bump!();
                if chars.peek() == Some(&'|') {
                    bump!();
                    tokens.push(Token {
                        kind: TokenKind::ParPar,
                        pos,
                    });
                    continue;
                }
                return Err(LexError::UnexpectedChar { pos, ch: '|' });
            }
            other => return Err(LexError::UnexpectedChar { pos, ch: other }),
        };
        bump!();
        tokens.push(Token { kind, pos });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positions_track_lines_and_columns() {
        let toks = tokenize("a =\n (b, 1.5e-2).c;").unwrap();
        assert_eq!(toks[0].pos, Pos { line: 1, col: 1 });
        assert_eq!(toks[2].pos, Pos { line: 2, col: 2 }); // `(`
        let num = toks.iter().find(|t| matches!(t.kind, TokenKind::Number(_))).unwrap();
        assert_eq!(num.kind, TokenKind::Number(0.015));
    }

    #[test]
    fn comments_are_skipped() {
        let toks = tokenize("x // comment\n y").unwrap();
        let idents: Vec<_> = toks
            .iter()
            .filter_map(|t| match &t.kind {
                TokenKind::Ident(s) => Some(s.as_str()),
                _ => None,
            })
            .collect();
        assert_eq!(idents, ["x", "y"]);
    }

    #[test]
    fn stray_character_is_reported() {
        let err = tokenize("a ? b").unwrap_err();
        assert!(matches!(err, LexError::UnexpectedChar { ch: '?', .. }));
    }
}

//! Tokenizer for the guarded-command language.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{GclError, Pos};

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    /// Decimal literal, kept as text so it can be read exactly.
    Real(String),
    Str(String),
    LBracket,
    RBracket,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Semi,
    Colon,
    Comma,
    Prime,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Plus,
    Minus,
    Star,
    Slash,
    Bang,
    Amp,
    Bar,
    Implies,
    Iff,
    Question,
    Arrow,
    DotDot,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => alloc::format!("identifier `{s}`"),
            Tok::Int(v) => alloc::format!("number `{v}`"),
            Tok::Real(s) => alloc::format!("number `{s}`"),
            Tok::Str(s) => alloc::format!("string \"{s}\""),
            Tok::Eof => "end of input".to_string(),
            other => alloc::format!("`{}`", other.symbol()),
        }
    }

    fn symbol(&self) -> &'static str {
        match self {
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::Semi => ";",
            Tok::Colon => ":",
            Tok::Comma => ",",
            Tok::Prime => "'",
            Tok::Eq => "=",
            Tok::Ne => "!=",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Slash => "/",
            Tok::Bang => "!",
            Tok::Amp => "&",
            Tok::Bar => "|",
            Tok::Implies => "=>",
            Tok::Iff => "<=>",
            Tok::Question => "?",
            Tok::Arrow => "->",
            Tok::DotDot => "..",
            _ => "",
        }
    }
}

/// Splits `src` into tokens; the last token is always [`Tok::Eof`].
/// Line comments start with `//`.
pub fn tokenize(src: &str) -> Result<Vec<(Tok, Pos)>, GclError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let (mut i, mut line, mut line_start) = (0usize, 1usize, 0usize);
    while i < bytes.len() {
        let c = bytes[i];
        let pos = Pos {
            line,
            col: src[line_start..i].chars().count() + 1,
        };
        if c == b'\n' {
            line += 1;
            i += 1;
            line_start = i;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c == b'/' && bytes.get(i + 1) == Some(&b'/') {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((Tok::Ident(src[start..i].to_string()), pos));
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let mut real = false;
            if i + 1 < bytes.len() && bytes[i] == b'.' && bytes[i + 1].is_ascii_digit() {
                real = true;
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    real = true;
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let tok = if real {
                Tok::Real(text.to_string())
            } else {
                Tok::Int(text.parse().map_err(|_| GclError::Syntax {
                    pos,
                    msg: alloc::format!("integer literal `{text}` is too large"),
                })?)
            };
            out.push((tok, pos));
            continue;
        }
        if c == b'"' {
            let start = i + 1;
            i += 1;
            while i < bytes.len() && bytes[i] != b'"' && bytes[i] != b'\n' {
                i += 1;
            }
            if i >= bytes.len() || bytes[i] != b'"' {
                return Err(GclError::Syntax {
                    pos,
                    msg: "unterminated string".to_string(),
                });
            }
            out.push((Tok::Str(src[start..i].to_string()), pos));
            i += 1;
            continue;
        }
        let next = bytes.get(i + 1).copied();
        let (tok, len) = match (c, next) {
            (b'<', Some(b'=')) if bytes.get(i + 2) == Some(&b'>') => (Tok::Iff, 3),
            (b'<', Some(b'=')) => (Tok::Le, 2),
            (b'>', Some(b'=')) => (Tok::Ge, 2),
            (b'!', Some(b'=')) => (Tok::Ne, 2),
            (b'=', Some(b'>')) => (Tok::Implies, 2),
            (b'-', Some(b'>')) => (Tok::Arrow, 2),
            (b'.', Some(b'.')) => (Tok::DotDot, 2),
            (b'<', _) => (Tok::Lt, 1),
            (b'>', _) => (Tok::Gt, 1),
            (b'!', _) => (Tok::Bang, 1),
            (b'=', _) => (Tok::Eq, 1),
            (b'-', _) => (Tok::Minus, 1),
            (b'[', _) => (Tok::LBracket, 1),
            (b']', _) => (Tok::RBracket, 1),
            (b'(', _) => (Tok::LParen, 1),
            (b')', _) => (Tok::RParen, 1),
            (b'{', _) => (Tok::LBrace, 1),
            (b'}', _) => (Tok::RBrace, 1),
            (b';', _) => (Tok::Semi, 1),
            (b':', _) => (Tok::Colon, 1),
            (b',', _) => (Tok::Comma, 1),
            (b'\'', _) => (Tok::Prime, 1),
            (b'+', _) => (Tok::Plus, 1),
            (b'*', _) => (Tok::Star, 1),
            (b'/', _) => (Tok::Slash, 1),
            (b'&', _) => (Tok::Amp, 1),
            (b'|', _) => (Tok::Bar, 1),
            (b'?', _) => (Tok::Question, 1),
            _ => {
                let ch = src[i..].chars().next().unwrap_or('?');
                return Err(GclError::Syntax {
                    pos,
                    msg: alloc::format!("unexpected character `{ch}`"),
                });
            }
        };
        out.push((tok, pos));
        i += len;
    }
    let pos = Pos {
        line,
        col: src[line_start..].chars().count() + 1,
    };
    out.push((Tok::Eof, pos));
    Ok(out)
}

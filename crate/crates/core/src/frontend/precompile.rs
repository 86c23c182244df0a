//! Source normalization ahead of lexing.
//!
//! Removes comments and whitespace, merges units, escapes non-ASCII
//! identifier characters as `_uXXXX_`, and folds multi-part function names
//! such as `add(a)and(b)to(c)` into `add_ARG_and_ARG_to(a,b,c)`.

use super::FrontendError;

pub const ARG_MARKER: &str = "_ARG_";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SourceUnit {
    pub path: String,
    pub content: String,
}

impl SourceUnit {
    pub fn new(path: impl Into<String>, content: impl Into<String>) -> Self {
        SourceUnit { path: path.into(), content: content.into() }
    }
}

#[derive(Clone, Debug)]
pub struct PrecompileConfig {
    /// Reject `_ARG_` inside identifiers that are not normalized call names.
    pub reject_reserved_marker: bool,
}

impl Default for PrecompileConfig {
    fn default() -> Self {
        PrecompileConfig { reject_reserved_marker: true }
    }
}

pub fn precompile(units: &[SourceUnit], config: &PrecompileConfig) -> Result<String, FrontendError> {
    let mut merged = String::new();
    for unit in units {
        merged.push_str(&strip_unit(unit)?);
    }
    let tokens = split(&merged);
    if config.reject_reserved_marker {
        check_reserved(&tokens)?;
    }
    let mut out = String::with_capacity(merged.len());
    let mut pos = 0;
    normalize(&tokens, &mut pos, &mut out, false);
    Ok(out)
}

/// Comment and whitespace removal plus identifier escaping for one unit.
fn strip_unit(unit: &SourceUnit) -> Result<String, FrontendError> {
    let src = unit.content.as_str();
    let mut out = String::with_capacity(src.len());
    let mut it = src.char_indices().peekable();
    while let Some((off, c)) = it.next() {
        match c {
            '"' => {
                out.push('"');
                let mut closed = false;
                while let Some((_, d)) = it.next() {
                    out.push(d);
                    if d == '\\' {
                        if let Some((_, e)) = it.next() {
                            out.push(e);
                        }
                    } else if d == '"' {
                        closed = true;
                        break;
                    }
                }
                if !closed {
                    return Err(FrontendError::UnterminatedString { unit: unit.path.clone(), offset: off });
                }
            }
            '/' if matches!(it.peek(), Some((_, '/'))) => {
                for (_, d) in it.by_ref() {
                    if d == '\n' {
                        break;
                    }
                }
            }
            '/' if matches!(it.peek(), Some((_, '*'))) => {
                it.next();
                let mut closed = false;
                let mut prev = '\0';
                for (_, d) in it.by_ref() {
                    if prev == '*' && d == '/' {
                        closed = true;
                        break;
                    }
                    prev = d;
                }
                if !closed {
                    return Err(FrontendError::UnterminatedComment { unit: unit.path.clone(), offset: off });
                }
            }
            c if c.is_whitespace() => {}
            '→' => out.push_str("-->"),
            c if !c.is_ascii() && c.is_alphanumeric() => {
                out.push_str(&format!("_u{:X}_", c as u32));
            }
            c => out.push(c),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
enum Piece<'a> {
    Ident(&'a str),
    Open,
    Close,
    Other(&'a str),
}

fn split(text: &str) -> Vec<Piece<'_>> {
    let bytes = text.as_bytes();
    let mut pieces = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            pieces.push(Piece::Ident(&text[start..i]));
        } else if c == b'"' {
            let start = i;
            i += 1;
            while i < bytes.len() && bytes[i] != b'"' {
                if bytes[i] == b'\\' {
                    i += 1;
                }
                i += 1;
            }
            i = (i + 1).min(bytes.len());
            pieces.push(Piece::Other(&text[start..i]));
        } else if c == b'(' {
            pieces.push(Piece::Open);
            i += 1;
        } else if c == b')' {
            pieces.push(Piece::Close);
            i += 1;
        } else {
            let start = i;
            // numbers stay glued so `a1` style tokens are not split oddly
            if c.is_ascii_digit() {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
            } else {
                i += text[i..].chars().next().map_or(1, char::len_utf8);
            }
            pieces.push(Piece::Other(&text[start..i]));
        }
    }
    pieces
}

fn check_reserved(pieces: &[Piece<'_>]) -> Result<(), FrontendError> {
    for (i, p) in pieces.iter().enumerate() {
        if let Piece::Ident(name) = p {
            if name.contains(ARG_MARKER) && pieces.get(i + 1) != Some(&Piece::Open) {
                return Err(FrontendError::ReservedMarker { identifier: name.to_string() });
            }
        }
    }
    Ok(())
}

/// Copies pieces into `out`, folding multi-part calls. Stops after the
/// matching `)` when `in_group` is set.
fn normalize(pieces: &[Piece<'_>], pos: &mut usize, out: &mut String, in_group: bool) -> bool {
    while *pos < pieces.len() {
        match &pieces[*pos] {
            Piece::Close => {
                *pos += 1;
                if in_group {
                    return true;
                }
                out.push(')');
            }
            Piece::Open => {
                *pos += 1;
                out.push('(');
                if normalize(pieces, pos, out, true) {
                    out.push(')');
                }
            }
            Piece::Other(s) => {
                out.push_str(s);
                *pos += 1;
            }
            Piece::Ident(name) => {
                *pos += 1;
                if pieces.get(*pos) != Some(&Piece::Open) {
                    out.push_str(name);
                    continue;
                }
                let mut names = vec![name.to_string()];
                let mut groups = Vec::new();
                loop {
                    // at an Open
                    *pos += 1;
                    let mut g = String::new();
                    if !normalize(pieces, pos, &mut g, true) {
                        // unbalanced: emit verbatim and let the parser report it
                        out.push_str(&names.join(ARG_MARKER));
                        out.push('(');
                        out.push_str(&groups.join(")("));
                        out.push_str(&g);
                        return false;
                    }
                    groups.push(g);
                    match pieces.get(*pos) {
                        Some(Piece::Ident(next)) => {
                            names.push(next.to_string());
                            *pos += 1;
                            if pieces.get(*pos) != Some(&Piece::Open) {
                                break;
                            }
                        }
                        _ => break,
                    }
                }
                out.push_str(&names.join(ARG_MARKER));
                out.push('(');
                let args: Vec<&str> = groups.iter().map(String::as_str).filter(|g| !g.is_empty()).collect();
                out.push_str(&args.join(","));
                out.push(')');
            }
        }
    }
    false
}

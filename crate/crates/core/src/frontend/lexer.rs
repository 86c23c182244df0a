use super::FrontendError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TokenKind {
    Identifier,
    Number,
    StringLiteral,
    Operator,
    Keyword,
    Punctuation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub offset: usize,
}

pub const KEYWORDS: &[&str] = &["new", "return", "exp", "out", "system", "while", "if", "elseif", "else"];

const OPERATORS: &[&str] = &[
    "-->", "=>", "==", ">=", "<=", "<<", ">", "<", "=", "+", "-", "*", "/", "^", "$", "#", "@", ".",
];

const PUNCTUATION: &[char] = &[',', ';', ':', '(', ')', '{', '}'];

pub fn tokenize(text: &str) -> Result<Vec<Token>, FrontendError> {
    let mut tokens = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    'outer: while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            let word = &text[start..i];
            let kind = if KEYWORDS.contains(&word) { TokenKind::Keyword } else { TokenKind::Identifier };
            tokens.push(Token { kind, text: word.to_string(), offset: start });
            continue;
        }
        if c.is_ascii_digit() {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i + 1 < bytes.len() && bytes[i] == b'.' && bytes[i + 1].is_ascii_digit() {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            let lit = &text[start..i];
            let ok = lit.parse::<f64>().map(f64::is_finite).unwrap_or(false);
            if !ok {
                return Err(FrontendError::Syntax { offset: start, message: format!("bad number `{lit}`") });
            }
            tokens.push(Token { kind: TokenKind::Number, text: lit.to_string(), offset: start });
            continue;
        }
        if c == b'"' {
            i += 1;
            let mut s = String::new();
            let mut chars = text[i..].char_indices();
            while let Some((j, ch)) = chars.next() {
                match ch {
                    '"' => {
                        i += j + 1;
                        tokens.push(Token { kind: TokenKind::StringLiteral, text: s, offset: start });
                        continue 'outer;
                    }
                    '\\' => match chars.next() {
                        Some((_, 'n')) => s.push('\n'),
                        Some((_, 't')) => s.push('\t'),
                        Some((_, other)) => s.push(other),
                        None => break,
                    },
                    other => s.push(other),
                }
            }
            return Err(FrontendError::Syntax { offset: start, message: "unterminated string".into() });
        }
        for op in OPERATORS {
            if text[i..].starts_with(op) {
                i += op.len();
                tokens.push(Token { kind: TokenKind::Operator, text: op.to_string(), offset: start });
                continue 'outer;
            }
        }
        let ch = text[i..].chars().next().unwrap();
        if PUNCTUATION.contains(&ch) {
            i += 1;
            tokens.push(Token { kind: TokenKind::Punctuation, text: ch.to_string(), offset: start });
            continue;
        }
        return Err(FrontendError::Syntax { offset: start, message: format!("unexpected character `{ch}`") });
    }
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_arrow_is_one_token() {
        let t = tokenize("x-->0;").unwrap();
        let texts: Vec<_> = t.iter().map(|t| t.text.as_str()).collect();
        assert_eq!(texts, ["x", "-->", "0", ";"]);
    }

    #[test]
    fn numbers_and_keywords() {
        let t = tokenize("new:a=0.5;").unwrap();
        assert_eq!(t[0].kind, TokenKind::Keyword);
        assert_eq!(t[4].kind, TokenKind::Number);
        assert_eq!(t[4].text, "0.5");
    }

    #[test]
    fn member_access_after_number() {
        let t = tokenize("m.x").unwrap();
        assert_eq!(t.len(), 3);
    }
}

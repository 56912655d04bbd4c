use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Int(i64),
    /// Decimal literal kept as text for exact conversion.
    Real(String),
    Str(String),
    Sym(&'static str),
    Eof,
}

#[derive(Clone, Debug)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub column: usize,
}

// Longest first so that "->" wins over "-".
const SYMBOLS: &[&str] = &[
    "->", "..", "<=", ">=", "!=", "=>", "<=>", "[", "]", "(", ")", "{", "}", ";", ":", ",", "+", "-", "*", "/",
    "=", "<", ">", "&", "|", "!", "'", "?",
];

pub(crate) fn tokenize(text: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let advance = |i: &mut usize, line: &mut usize, col: &mut usize, n: usize| {
        for k in 0..n {
            if chars[*i + k] == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
        }
        *i += n;
    };
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, 1);
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
                col += 1;
            }
            continue;
        }
        let (l0, c0) = (line, col);
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            let mut n = 0;
            while start + n < chars.len() && (chars[start + n].is_ascii_alphanumeric() || chars[start + n] == '_') {
                n += 1;
            }
            let word: String = chars[start..start + n].iter().collect();
            advance(&mut i, &mut line, &mut col, n);
            out.push(Token { tok: Tok::Ident(word), line: l0, column: c0 });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            let mut n = 0;
            while start + n < chars.len() && chars[start + n].is_ascii_digit() {
                n += 1;
            }
            // "0..4" is a range, not a decimal.
            let mut real = false;
            if chars.get(start + n) == Some(&'.') && chars.get(start + n + 1) != Some(&'.') {
                real = true;
                n += 1;
                while start + n < chars.len() && chars[start + n].is_ascii_digit() {
                    n += 1;
                }
            }
            if matches!(chars.get(start + n), Some('e' | 'E'))
                && chars.get(start + n + 1).is_some_and(|d| d.is_ascii_digit() || *d == '-' || *d == '+')
            {
                real = true;
                n += 2;
                while start + n < chars.len() && chars[start + n].is_ascii_digit() {
                    n += 1;
                }
            }
            let text: String = chars[start..start + n].iter().collect();
            advance(&mut i, &mut line, &mut col, n);
            let tok = if real {
                Tok::Real(text)
            } else {
                Tok::Int(text.parse().map_err(|_| Error::parse(l0, c0, format!("integer literal {text} too large")))?)
            };
            out.push(Token { tok, line: l0, column: c0 });
            continue;
        }
        if c == '"' {
            let start = i + 1;
            let mut n = 0;
            while start + n < chars.len() && chars[start + n] != '"' && chars[start + n] != '\n' {
                n += 1;
            }
            if chars.get(start + n) != Some(&'"') {
                return Err(Error::parse(l0, c0, "unterminated string literal"));
            }
            let s: String = chars[start..start + n].iter().collect();
            advance(&mut i, &mut line, &mut col, n + 2);
            out.push(Token { tok: Tok::Str(s), line: l0, column: c0 });
            continue;
        }
        let rest: String = chars[i..(i + 3).min(chars.len())].iter().collect();
        match SYMBOLS.iter().filter(|s| rest.starts_with(**s)).max_by_key(|s| s.len()) {
            Some(s) => {
                advance(&mut i, &mut line, &mut col, s.len());
                out.push(Token { tok: Tok::Sym(s), line: l0, column: c0 });
            }
            None => return Err(Error::parse(l0, c0, format!("unexpected character '{c}'"))),
        }
    }
    out.push(Token { tok: Tok::Eof, line, column: col });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_and_decimals() {
        let toks: Vec<Tok> = tokenize("[0..4] 0.5 1e-3 x'=x-1 // c").unwrap().into_iter().map(|t| t.tok).collect();
        assert_eq!(
            toks,
            vec![
                Tok::Sym("["),
                Tok::Int(0),
                Tok::Sym(".."),
                Tok::Int(4),
                Tok::Sym("]"),
                Tok::Real("0.5".into()),
                Tok::Real("1e-3".into()),
                Tok::Ident("x".into()),
                Tok::Sym("'"),
                Tok::Sym("="),
                Tok::Ident("x".into()),
                Tok::Sym("-"),
                Tok::Int(1),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn positions_are_one_based() {
        let err = tokenize("mdp\n  #").unwrap_err().to_string();
        assert!(err.contains("2:3"), "{err}");
    }
}

use crate::diag::{Diagnostic, SourceSpan};

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Real(f64),
    Str(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Semi,
    Colon,
    Comma,
    Prime,
    /// `=?` (whitespace allowed between the two characters)
    QueryEq,
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
    And,
    Or,
    Not,
    /// `->`
    Arrow,
    /// `=>`
    Implies,
    DotDot,
    Question,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(i) => format!("`{i}`"),
            Tok::Real(r) => format!("`{r}`"),
            Tok::Str(s) => format!("\"{s}\""),
            Tok::Eof => "end of input".into(),
            other => format!("`{}`", other.symbol()),
        }
    }

    fn symbol(&self) -> &'static str {
        match self {
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::Semi => ";",
            Tok::Colon => ":",
            Tok::Comma => ",",
            Tok::Prime => "'",
            Tok::QueryEq => "=?",
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
            Tok::And => "&",
            Tok::Or => "|",
            Tok::Not => "!",
            Tok::Arrow => "->",
            Tok::Implies => "=>",
            Tok::DotDot => "..",
            Tok::Question => "?",
            _ => "",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub span: SourceSpan,
}

pub fn tokenize(text: &str) -> Result<Vec<Token>, Diagnostic> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);

    let advance = |i: &mut usize, line: &mut usize, col: &mut usize, n: usize| {
        for _ in 0..n {
            if chars[*i] == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
            *i += 1;
        }
    };

    while i < chars.len() {
        let c = chars[i];
        let next = chars.get(i + 1).copied();
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, 1);
            continue;
        }
        if c == '/' && next == Some('/') {
            while i < chars.len() && chars[i] != '\n' {
                advance(&mut i, &mut line, &mut col, 1);
            }
            continue;
        }
        let (start_line, start_col) = (line, col);
        let span = |len: usize| SourceSpan::new(start_line, start_col, len);

        if c.is_ascii_alphabetic() || c == '_' {
            let mut j = i;
            while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                j += 1;
            }
            let word: String = chars[i..j].iter().collect();
            out.push(Token {
                tok: Tok::Ident(word),
                span: span(j - i),
            });
            let n = j - i;
            advance(&mut i, &mut line, &mut col, n);
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && next.is_some_and(|d| d.is_ascii_digit())) {
            let mut j = i;
            let mut real = false;
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            if j < chars.len() && chars[j] == '.' && chars.get(j + 1) != Some(&'.') {
                real = true;
                j += 1;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
            }
            if j < chars.len() && (chars[j] == 'e' || chars[j] == 'E') {
                let mut k = j + 1;
                if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                    k += 1;
                }
                if k < chars.len() && chars[k].is_ascii_digit() {
                    real = true;
                    j = k;
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                }
            }
            let lit: String = chars[i..j].iter().collect();
            let tok = if real {
                Tok::Real(lit.parse().map_err(|_| {
                    Diagnostic::error(span(j - i), format!("malformed number `{lit}`"))
                })?)
            } else {
                Tok::Int(lit.parse().map_err(|_| {
                    Diagnostic::error(span(j - i), format!("integer `{lit}` out of range"))
                })?)
            };
            out.push(Token {
                tok,
                span: span(j - i),
            });
            let n = j - i;
            advance(&mut i, &mut line, &mut col, n);
            continue;
        }
        if c == '"' {
            let mut j = i + 1;
            while j < chars.len() && chars[j] != '"' && chars[j] != '\n' {
                j += 1;
            }
            if j >= chars.len() || chars[j] != '"' {
                return Err(Diagnostic::error(
                    span(j - i),
                    "unterminated string literal",
                ));
            }
            let s: String = chars[i + 1..j].iter().collect();
            out.push(Token {
                tok: Tok::Str(s),
                span: span(j + 1 - i),
            });
            let n = j + 1 - i;
            advance(&mut i, &mut line, &mut col, n);
            continue;
        }
        if c == '=' {
            // `=?` may be written with whitespace in between
            let mut j = i + 1;
            while j < chars.len() && (chars[j] == ' ' || chars[j] == '\t') {
                j += 1;
            }
            if chars.get(j) == Some(&'?') {
                out.push(Token {
                    tok: Tok::QueryEq,
                    span: span(j + 1 - i),
                });
                let n = j + 1 - i;
                advance(&mut i, &mut line, &mut col, n);
                continue;
            }
        }
        let two = match (c, next) {
            ('!', Some('=')) => Some(Tok::Ne),
            ('<', Some('=')) => Some(Tok::Le),
            ('>', Some('=')) => Some(Tok::Ge),
            ('-', Some('>')) => Some(Tok::Arrow),
            ('=', Some('>')) => Some(Tok::Implies),
            ('.', Some('.')) => Some(Tok::DotDot),
            _ => None,
        };
        if let Some(tok) = two {
            out.push(Token { tok, span: span(2) });
            advance(&mut i, &mut line, &mut col, 2);
            continue;
        }
        let one = match c {
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '[' => Tok::LBracket,
            ']' => Tok::RBracket,
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            ';' => Tok::Semi,
            ':' => Tok::Colon,
            ',' => Tok::Comma,
            '\'' => Tok::Prime,
            '=' => Tok::Eq,
            '<' => Tok::Lt,
            '>' => Tok::Gt,
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '&' => Tok::And,
            '|' => Tok::Or,
            '!' => Tok::Not,
            '?' => Tok::Question,
            other => {
                return Err(Diagnostic::error(
                    span(1),
                    format!("unexpected character `{other}`"),
                ));
            }
        };
        out.push(Token {
            tok: one,
            span: span(1),
        });
        advance(&mut i, &mut line, &mut col, 1);
    }
    out.push(Token {
        tok: Tok::Eof,
        span: SourceSpan::new(line, col, 0),
    });
    Ok(out)
}

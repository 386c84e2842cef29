use super::ParseError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    LParen,
    RParen,
    Comma,
    Dot,
    Colon,
    Arrow,
    Plus,
    Minus,
    Star,
    Amp,
    Bar,
    Bang,
    Backslash,
    Cmp(&'static str),
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Int(n) => format!("integer `{n}`"),
            Tok::Eof => "end of input".into(),
            other => format!("`{}`", other.symbol()),
        }
    }

    pub fn symbol(&self) -> &'static str {
        match self {
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::Comma => ",",
            Tok::Dot => ".",
            Tok::Colon => ":",
            Tok::Arrow => "->",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Amp => "&",
            Tok::Bar => "|",
            Tok::Bang => "!",
            Tok::Backslash => "\\",
            Tok::Cmp(op) => op,
            Tok::Ident(_) | Tok::Int(_) | Tok::Eof => "",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
    /// Whitespace or a comment directly precedes the token.
    pub spaced: bool,
}

pub fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

pub fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '\''
}

pub fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let mut spaced = true;
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            spaced = true;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            spaced = true;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            spaced = true;
            continue;
        }
        let (start_line, start_col) = (line, col);
        let peek = chars.get(i + 1).copied();
        let (tok, len) = if is_ident_start(c) {
            let mut j = i;
            while j < chars.len() && is_ident_char(chars[j]) {
                j += 1;
            }
            (Tok::Ident(chars[i..j].iter().collect()), j - i)
        } else if c.is_ascii_digit() {
            let mut j = i;
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            let text: String = chars[i..j].iter().collect();
            let n = text.parse::<i64>().map_err(|_| ParseError {
                line,
                col,
                message: format!("integer literal `{text}` out of range"),
                expected: vec![],
            })?;
            (Tok::Int(n), j - i)
        } else {
            match (c, peek) {
                ('-', Some('>')) => (Tok::Arrow, 2),
                ('>', Some('=')) => (Tok::Cmp(">="), 2),
                ('<', Some('=')) => (Tok::Cmp("<="), 2),
                ('=', Some('<')) => (Tok::Cmp("=<"), 2),
                ('\\', Some('=')) => (Tok::Cmp("\\="), 2),
                ('>', _) => (Tok::Cmp(">"), 1),
                ('<', _) => (Tok::Cmp("<"), 1),
                ('=', _) => (Tok::Cmp("="), 1),
                ('(', _) => (Tok::LParen, 1),
                (')', _) => (Tok::RParen, 1),
                (',', _) => (Tok::Comma, 1),
                ('.', _) => (Tok::Dot, 1),
                (':', _) => (Tok::Colon, 1),
                ('+', _) => (Tok::Plus, 1),
                ('-', _) => (Tok::Minus, 1),
                ('*', _) => (Tok::Star, 1),
                ('&', _) => (Tok::Amp, 1),
                ('|', _) => (Tok::Bar, 1),
                ('!', _) => (Tok::Bang, 1),
                ('\\', _) => (Tok::Backslash, 1),
                _ => {
                    return Err(ParseError {
                        line,
                        col,
                        message: format!("unexpected character `{c}`"),
                        expected: vec![],
                    })
                }
            }
        };
        out.push(Token {
            tok,
            line: start_line,
            col: start_col,
            spaced,
        });
        i += len;
        col += len;
        spaced = false;
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
        spaced: true,
    });
    Ok(out)
}

use super::{ParseError, ParseErrorKind, Pos, Sidecar};

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Bit(u8),
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Comma,
    Dot,
    Question,
    Bang,
    Bar,
    Eq,
    StarEq,
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Bit(b) => format!("`{b}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Question => "`?`".into(),
            Tok::Bang => "`!`".into(),
            Tok::Bar => "`|`".into(),
            Tok::Eq => "`=`".into(),
            Tok::StarEq => "`*=`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

/// Splits source into tokens; `//:` lines are returned separately.
pub(crate) fn tokenize(source: &str) -> Result<(Vec<Token>, Vec<Sidecar>), ParseError> {
    let mut tokens = Vec::new();
    let mut sidecars = Vec::new();
    let chars: Vec<char> = source.chars().collect();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);

    while i < chars.len() {
        let c = chars[i];
        let pos = Pos::new(line, col);
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            let start = i;
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            if let Some(rest) = text.strip_prefix("//:") {
                sidecars.push(Sidecar {
                    text: rest.trim().to_string(),
                    pos,
                });
            }
            col += i - start;
            continue;
        }
        if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - start;
            tokens.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                pos,
            });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            col += i - start;
            let tok = match text.as_str() {
                "0" => Tok::Bit(0),
                "1" => Tok::Bit(1),
                _ => {
                    return Err(ParseError::new(
                        ParseErrorKind::Lexical,
                        pos,
                        format!("invalid literal `{text}`; only 0 and 1 are allowed"),
                    ))
                }
            };
            tokens.push(Token { tok, pos });
            continue;
        }
        let (tok, width) = match c {
            '(' => (Tok::LParen, 1),
            ')' => (Tok::RParen, 1),
            '[' => (Tok::LBracket, 1),
            ']' => (Tok::RBracket, 1),
            '{' => (Tok::LBrace, 1),
            '}' => (Tok::RBrace, 1),
            ',' => (Tok::Comma, 1),
            '.' => (Tok::Dot, 1),
            '?' => (Tok::Question, 1),
            '!' => (Tok::Bang, 1),
            '|' => (Tok::Bar, 1),
            '=' => (Tok::Eq, 1),
            '*' if chars.get(i + 1) == Some(&'=') => (Tok::StarEq, 2),
            _ => {
                return Err(ParseError::new(
                    ParseErrorKind::Lexical,
                    pos,
                    format!("unexpected character `{c}`"),
                ))
            }
        };
        tokens.push(Token { tok, pos });
        i += width;
        col += width;
    }
    tokens.push(Token {
        tok: Tok::Eof,
        pos: Pos::new(line, col),
    });
    Ok((tokens, sidecars))
}

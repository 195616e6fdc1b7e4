use std::fmt;

use super::ParseError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Var(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Comma,
    Colon,
    Semi,
    Amp,
    Pipe,
    Arrow,
    Diamond,
    Square,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Var(s) => write!(f, "`?{s}`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::LBracket => f.write_str("`[`"),
            Tok::RBracket => f.write_str("`]`"),
            Tok::LBrace => f.write_str("`{`"),
            Tok::RBrace => f.write_str("`}`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Colon => f.write_str("`:`"),
            Tok::Semi => f.write_str("`;`"),
            Tok::Amp => f.write_str("`&`"),
            Tok::Pipe => f.write_str("`|`"),
            Tok::Arrow => f.write_str("`->`"),
            Tok::Diamond => f.write_str("`<>`"),
            Tok::Square => f.write_str("`[]`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Pos {
    pub line: usize,
    pub column: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

fn advance(n: usize, i: &mut usize, column: &mut usize) {
    *i += n;
    *column += n;
}

pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let (mut i, mut line, mut column) = (0usize, 1usize, 1usize);

    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, column };
        match c {
            '\n' => {
                i += 1;
                line += 1;
                column = 1;
            }
            c if c.is_whitespace() => advance(1, &mut i, &mut column),
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '(' | ')' | '{' | '}' | ',' | ':' | ';' | '&' | '|' | ']' => {
                let tok = match c {
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    '{' => Tok::LBrace,
                    '}' => Tok::RBrace,
                    ',' => Tok::Comma,
                    ':' => Tok::Colon,
                    ';' => Tok::Semi,
                    '&' => Tok::Amp,
                    '|' => Tok::Pipe,
                    _ => Tok::RBracket,
                };
                out.push(Token { tok, pos });
                advance(1, &mut i, &mut column);
            }
            '[' => {
                if chars.get(i + 1) == Some(&']') {
                    out.push(Token { tok: Tok::Square, pos });
                    advance(2, &mut i, &mut column);
                } else {
                    out.push(Token { tok: Tok::LBracket, pos });
                    advance(1, &mut i, &mut column);
                }
            }
            '-' if chars.get(i + 1) == Some(&'>') => {
                out.push(Token { tok: Tok::Arrow, pos });
                advance(2, &mut i, &mut column);
            }
            '<' if chars.get(i + 1) == Some(&'>') => {
                out.push(Token { tok: Tok::Diamond, pos });
                advance(2, &mut i, &mut column);
            }
            '?' => {
                let start = i + 1;
                let mut j = start;
                if j < chars.len() && is_ident_start(chars[j]) {
                    while j < chars.len() && is_ident_char(chars[j]) {
                        j += 1;
                    }
                    out.push(Token {
                        tok: Tok::Var(chars[start..j].iter().collect()),
                        pos,
                    });
                    advance(j - i, &mut i, &mut column);
                } else {
                    return Err(ParseError::at(pos, "expected a variable name after `?`", vec![]));
                }
            }
            c if is_ident_start(c) || c.is_ascii_digit() => {
                let start = i;
                let mut j = i;
                while j < chars.len() && is_ident_char(chars[j]) {
                    j += 1;
                }
                out.push(Token {
                    tok: Tok::Ident(chars[start..j].iter().collect()),
                    pos,
                });
                advance(j - i, &mut i, &mut column);
            }
            other => {
                return Err(ParseError::at(pos, format!("unexpected character `{other}`"), vec![]));
            }
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        pos: Pos { line, column },
    });
    Ok(out)
}

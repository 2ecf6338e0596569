//! Tokenizer and recursive-descent parser for property strings.
//!
//! Binding strength, tightest first: the unary operators `not`, `X`, `F`,
//! `G`; then `and`; `or`; `U` (right associative); `=>` (right
//! associative). `and` and `or` associate to the left.

use std::fmt;

use thiserror::Error;

use super::formula::Formula;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("unknown character {ch:?} at byte {offset}")]
    UnknownCharacter { ch: char, offset: usize },
    #[error("syntax error at byte {offset}: found {found}, expected one of: {}", .expected.join(", "))]
    Syntax {
        offset: usize,
        found: String,
        expected: Vec<&'static str>,
    },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::UnknownCharacter { offset, .. } | ParseError::Syntax { offset, .. } => {
                *offset
            }
        }
    }
}

const KEYWORDS: [&str; 5] = ["not", "and", "or", "true", "false"];

pub(crate) fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(&word)
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token {
    Ident(String),
    Not,
    And,
    Or,
    Implies,
    Until,
    Next,
    Eventually,
    Always,
    True,
    False,
    LParen,
    RParen,
    Eof,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Ident(name) => write!(f, "identifier `{name}`"),
            Token::Not => f.write_str("`not`"),
            Token::And => f.write_str("`and`"),
            Token::Or => f.write_str("`or`"),
            Token::Implies => f.write_str("`=>`"),
            Token::Until => f.write_str("`U`"),
            Token::Next => f.write_str("`X`"),
            Token::Eventually => f.write_str("`F`"),
            Token::Always => f.write_str("`G`"),
            Token::True => f.write_str("`true`"),
            Token::False => f.write_str("`false`"),
            Token::LParen => f.write_str("`(`"),
            Token::RParen => f.write_str("`)`"),
            Token::Eof => f.write_str("end of input"),
        }
    }
}

fn tokenize(text: &str) -> Result<Vec<(Token, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'(' => {
                tokens.push((Token::LParen, start));
                i += 1;
            }
            b')' => {
                tokens.push((Token::RParen, start));
                i += 1;
            }
            b'=' if bytes.get(i + 1) == Some(&b'>') => {
                tokens.push((Token::Implies, start));
                i += 2;
            }
            b'U' => {
                tokens.push((Token::Until, start));
                i += 1;
            }
            b'X' => {
                tokens.push((Token::Next, start));
                i += 1;
            }
            b'F' => {
                tokens.push((Token::Eventually, start));
                i += 1;
            }
            b'G' => {
                tokens.push((Token::Always, start));
                i += 1;
            }
            b'a'..=b'z' | b'_' => {
                while i < bytes.len()
                    && (bytes[i].is_ascii_lowercase()
                        || bytes[i].is_ascii_digit()
                        || bytes[i] == b'_')
                {
                    i += 1;
                }
                let word = &text[start..i];
                let token = match word {
                    "not" => Token::Not,
                    "and" => Token::And,
                    "or" => Token::Or,
                    "true" => Token::True,
                    "false" => Token::False,
                    _ => Token::Ident(word.to_string()),
                };
                tokens.push((token, start));
            }
            _ => {
                let ch = text[start..].chars().next().unwrap_or('\u{fffd}');
                return Err(ParseError::UnknownCharacter { ch, offset: start });
            }
        }
    }
    tokens.push((Token::Eof, text.len()));
    Ok(tokens)
}

const PRIMARY_START: [&str; 8] = ["identifier", "true", "false", "(", "not", "X", "F", "G"];

struct Parser {
    tokens: Vec<(Token, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos].0
    }

    fn advance(&mut self) -> Token {
        let token = self.tokens[self.pos].0.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        token
    }

    fn error(&self, expected: &[&'static str]) -> ParseError {
        let (token, offset) = &self.tokens[self.pos];
        ParseError::Syntax {
            offset: *offset,
            found: token.to_string(),
            expected: expected.to_vec(),
        }
    }

    fn implication(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.until()?;
        if *self.peek() == Token::Implies {
            self.advance();
            let rhs = self.implication()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn until(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.disjunction()?;
        if *self.peek() == Token::Until {
            self.advance();
            let rhs = self.until()?;
            return Ok(Formula::until(lhs, rhs));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.conjunction()?;
        while *self.peek() == Token::Or {
            self.advance();
            let rhs = self.conjunction()?;
            lhs = Formula::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.unary()?;
        while *self.peek() == Token::And {
            self.advance();
            let rhs = self.unary()?;
            lhs = Formula::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        match self.peek() {
            Token::Not => {
                self.advance();
                Ok(Formula::not(self.unary()?))
            }
            Token::Next => {
                self.advance();
                Ok(Formula::next(self.unary()?))
            }
            Token::Eventually => {
                self.advance();
                Ok(Formula::eventually(self.unary()?))
            }
            Token::Always => {
                self.advance();
                Ok(Formula::always(self.unary()?))
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Formula, ParseError> {
        match self.peek().clone() {
            Token::Ident(name) => {
                self.advance();
                Ok(Formula::Atom(name.into()))
            }
            Token::True => {
                self.advance();
                Ok(Formula::True)
            }
            Token::False => {
                self.advance();
                Ok(Formula::False)
            }
            Token::LParen => {
                self.advance();
                let inner = self.implication()?;
                if *self.peek() != Token::RParen {
                    return Err(self.error(&[")", "and", "or", "U", "=>"]));
                }
                self.advance();
                Ok(inner)
            }
            _ => Err(self.error(&PRIMARY_START)),
        }
    }
}

/// Parses a property string into a formula tree.
pub fn parse(text: &str) -> Result<Formula, ParseError> {
    let tokens = tokenize(text)?;
    let mut parser = Parser { tokens, pos: 0 };
    let formula = parser.implication()?;
    if *parser.peek() != Token::Eof {
        return Err(parser.error(&["end of input", "and", "or", "U", "=>"]));
    }
    Ok(formula)
}

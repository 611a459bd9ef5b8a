//! Recursive-descent parser for the expression language.
//!
//! Grammar (documented in the repository README):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?
//! atom   := number | ident | ident '(' expr ')' | '(' expr ')'
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so
//! `-2^2 = -(2^2)` while `2^-3` is accepted directly.

use super::{Expr, Func};

/// Syntax error with the byte offset it occurred at.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("parse error at byte offset {offset}: expected {expected}, found {found}")]
pub struct ParseError {
    pub offset: usize,
    pub expected: String,
    pub found: String,
}

impl ParseError {
    fn new(offset: usize, expected: impl Into<String>, found: impl Into<String>) -> Self {
        ParseError {
            offset,
            expected: expected.into(),
            found: found.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Eof,
}

impl Token {
    fn describe(&self) -> String {
        match self {
            Token::Number(n) => format!("number `{n}`"),
            Token::Ident(s) => format!("identifier `{s}`"),
            Token::Plus => "`+`".into(),
            Token::Minus => "`-`".into(),
            Token::Star => "`*`".into(),
            Token::Slash => "`/`".into(),
            Token::Caret => "`^`".into(),
            Token::LParen => "`(`".into(),
            Token::RParen => "`)`".into(),
            Token::Eof => "end of input".into(),
        }
    }
}

struct Lexer<'a> {
    input: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn peek_char(&self) -> Option<char> {
        self.input[self.pos..].chars().next()
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek_char() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    /// Next token plus the byte offset it starts at.
    fn next(&mut self) -> Result<(usize, Token), ParseError> {
        self.skip_ws();
        let start = self.pos;
        let c = match self.peek_char() {
            None => return Ok((start, Token::Eof)),
            Some(c) => c,
        };
        let simple = match c {
            '+' => Some(Token::Plus),
            '-' => Some(Token::Minus),
            '*' => Some(Token::Star),
            '/' => Some(Token::Slash),
            '^' => Some(Token::Caret),
            '(' => Some(Token::LParen),
            ')' => Some(Token::RParen),
            _ => None,
        };
        if let Some(tok) = simple {
            self.pos += 1;
            return Ok((start, tok));
        }
        if c.is_ascii_digit() || c == '.' {
            return self.lex_number(start);
        }
        if c.is_ascii_alphabetic() || c == '_' {
            while let Some(c) = self.peek_char() {
                if c.is_ascii_alphanumeric() || c == '_' {
                    self.pos += 1;
                } else {
                    break;
                }
            }
            return Ok((start, Token::Ident(self.input[start..self.pos].to_string())));
        }
        Err(ParseError::new(start, "a token", format!("`{c}`")))
    }

    fn lex_number(&mut self, start: usize) -> Result<(usize, Token), ParseError> {
        let bytes = self.input.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos < bytes.len() && bytes[self.pos] == b'.' {
            self.pos += 1;
            while self.pos < bytes.len() && bytes[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
        }
        // exponent, only when it is followed by digits
        if self.pos < bytes.len() && (bytes[self.pos] == b'e' || bytes[self.pos] == b'E') {
            let mut probe = self.pos + 1;
            if probe < bytes.len() && (bytes[probe] == b'+' || bytes[probe] == b'-') {
                probe += 1;
            }
            if probe < bytes.len() && bytes[probe].is_ascii_digit() {
                self.pos = probe;
                while self.pos < bytes.len() && bytes[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            }
        }
        let text = &self.input[start..self.pos];
        text.parse::<f64>()
            .map(|n| (start, Token::Number(n)))
            .map_err(|_| ParseError::new(start, "a number", format!("`{text}`")))
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    current: (usize, Token),
    vars: &'a [&'a str],
}

impl<'a> Parser<'a> {
    fn advance(&mut self) -> Result<(), ParseError> {
        self.current = self.lexer.next()?;
        Ok(())
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.term()?;
        loop {
            match self.current.1 {
                Token::Plus => {
                    self.advance()?;
                    left = Expr::Add(Box::new(left), Box::new(self.term()?));
                }
                Token::Minus => {
                    self.advance()?;
                    left = Expr::Sub(Box::new(left), Box::new(self.term()?));
                }
                _ => return Ok(left),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut left = self.unary()?;
        loop {
            match self.current.1 {
                Token::Star => {
                    self.advance()?;
                    left = Expr::Mul(Box::new(left), Box::new(self.unary()?));
                }
                Token::Slash => {
                    self.advance()?;
                    left = Expr::Div(Box::new(left), Box::new(self.unary()?));
                }
                _ => return Ok(left),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.current.1 == Token::Minus {
            self.advance()?;
            let inner = self.unary()?;
            // fold a negated literal into the constant itself
            if let Expr::Const(c) = inner {
                return Ok(Expr::Const(-c));
            }
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.current.1 == Token::Caret {
            self.advance()?;
            let exponent = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let (offset, tok) = self.current.clone();
        match tok {
            Token::Number(n) => {
                self.advance()?;
                Ok(Expr::Const(n))
            }
            Token::Ident(name) => {
                self.advance()?;
                if self.current.1 == Token::LParen {
                    let func = Func::from_name(&name).ok_or_else(|| {
                        ParseError::new(
                            offset,
                            "a function name (sin, cos, exp, ln, sqrt, abs, sign)",
                            format!("`{name}`"),
                        )
                    })?;
                    self.advance()?;
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    Ok(Expr::Apply(func, Box::new(arg)))
                } else {
                    if !self.vars.contains(&name.as_str()) {
                        return Err(ParseError::new(
                            offset,
                            format!("one of the declared variables {:?}", self.vars),
                            format!("`{name}`"),
                        ));
                    }
                    Ok(Expr::Var(name))
                }
            }
            Token::LParen => {
                self.advance()?;
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            other => Err(ParseError::new(
                offset,
                "a number, variable, function call, or `(`",
                other.describe(),
            )),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        if self.current.1 == Token::RParen {
            self.advance()
        } else {
            Err(ParseError::new(
                self.current.0,
                "`)`",
                self.current.1.describe(),
            ))
        }
    }
}

/// Parses `text` over the declared variable set `vars`.
pub fn parse(text: &str, vars: &[&str]) -> Result<Expr, ParseError> {
    let mut lexer = Lexer {
        input: text,
        pos: 0,
    };
    let current = lexer.next()?;
    let mut parser = Parser {
        lexer,
        current,
        vars,
    };
    let expr = parser.expr()?;
    if parser.current.1 != Token::Eof {
        return Err(ParseError::new(
            parser.current.0,
            "end of input",
            parser.current.1.describe(),
        ));
    }
    Ok(expr)
}

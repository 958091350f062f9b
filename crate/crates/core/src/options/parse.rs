use thiserror::Error;

use super::{KeyError, OptionKey, OptionValue, OptionsSet, ValueError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("{0}")]
    Syntax(String),
    #[error(transparent)]
    MalformedKey(#[from] KeyError),
    #[error(transparent)]
    Value(#[from] ValueError),
    #[error("integer literal out of 64-bit range")]
    IntegerOutOfRange,
    #[error("invalid escape sequence `{0}`")]
    BadEscape(String),
}

/// Error with a 1-based line and column (in characters).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

/// Parses an options document. Later assignments to a key replace earlier
/// ones; blank lines and `#` comments are skipped.
pub fn parse_options(text: &str) -> Result<OptionsSet, ParseError> {
    let mut set = OptionsSet::new();
    for (idx, line) in text.split('\n').enumerate() {
        let mut cur = Cursor::new(line, idx + 1);
        cur.skip_ws();
        match cur.peek() {
            None | Some('#') => continue,
            _ => {}
        }

        let key_col = cur.column();
        let key_text = cur.take_while(|c| c != '=' && c != ' ' && c != '\t');
        let key =
            OptionKey::parse(key_text).map_err(|e| ParseError { line: idx + 1, column: key_col, kind: e.into() })?;

        cur.skip_ws();
        cur.expect('=')?;
        cur.skip_ws();
        let value = cur.value(false)?;
        cur.skip_ws();
        cur.expect_end()?;

        // values coming out of the parser are already validated
        set.insert(key, value).map_err(|e| cur.error(e.into()))?;
    }
    Ok(set)
}

/// Parses a single value token, e.g. `0.5`, `"x"` or `[1, 2]`.
pub fn text_to_value(text: &str) -> Result<OptionValue, ParseError> {
    let mut cur = Cursor::new(text, 1);
    let value = cur.value(false)?;
    cur.expect_end()?;
    Ok(value)
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str, line: usize) -> Self {
        Cursor { src, pos: 0, line }
    }

    fn column(&self) -> usize {
        self.src[..self.pos].chars().count() + 1
    }

    fn error(&self, kind: ParseErrorKind) -> ParseError {
        ParseError { line: self.line, column: self.column(), kind }
    }

    fn error_at(&self, pos: usize, kind: ParseErrorKind) -> ParseError {
        ParseError { line: self.line, column: self.src[..pos].chars().count() + 1, kind }
    }

    fn syntax(&self, msg: impl Into<String>) -> ParseError {
        self.error(ParseErrorKind::Syntax(msg.into()))
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn take_while(&mut self, pred: impl Fn(char) -> bool) -> &'a str {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if !pred(c) {
                break;
            }
            self.pos += c.len_utf8();
        }
        &self.src[start..self.pos]
    }

    fn skip_ws(&mut self) {
        self.take_while(|c| c == ' ' || c == '\t');
    }

    fn expect(&mut self, want: char) -> Result<(), ParseError> {
        match self.peek() {
            Some(c) if c == want => {
                self.bump();
                Ok(())
            }
            Some(c) => Err(self.syntax(format!("expected `{want}`, found `{}`", c.escape_default()))),
            None => Err(self.syntax(format!("expected `{want}`, found end of line"))),
        }
    }

    fn expect_end(&self) -> Result<(), ParseError> {
        match self.peek() {
            None => Ok(()),
            Some(c) => Err(self.syntax(format!("unexpected `{}` after value", c.escape_default()))),
        }
    }

    fn value(&mut self, in_list: bool) -> Result<OptionValue, ParseError> {
        match self.peek() {
            Some('"') => self.string(),
            Some('[') if in_list => Err(self.error(ValueError::NestedList.into())),
            Some('[') => self.list(),
            Some(c) if c == '-' || c.is_ascii_digit() => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.word(),
            Some(c) => Err(self.syntax(format!("unexpected `{}`", c.escape_default()))),
            None => Err(self.syntax("expected a value")),
        }
    }

    fn word(&mut self) -> Result<OptionValue, ParseError> {
        let start = self.pos;
        let word = self.take_while(|c| c.is_ascii_alphanumeric() || c == '_');
        match word {
            "true" => Ok(OptionValue::Boolean(true)),
            "false" => Ok(OptionValue::Boolean(false)),
            w if is_non_finite_word(w) => Err(self.error_at(start, ValueError::NonFiniteFloat.into())),
            w => Err(self.error_at(start, ParseErrorKind::Syntax(format!("unknown value `{w}`")))),
        }
    }

    fn number(&mut self) -> Result<OptionValue, ParseError> {
        let start = self.pos;
        let negative = self.peek() == Some('-');
        if negative {
            self.bump();
            if self.peek().is_some_and(|c| c.is_ascii_alphabetic()) {
                let word = self.take_while(|c| c.is_ascii_alphanumeric());
                let kind = if is_non_finite_word(word) {
                    ValueError::NonFiniteFloat.into()
                } else {
                    ParseErrorKind::Syntax(format!("malformed number `-{word}`"))
                };
                return Err(self.error_at(start, kind));
            }
        }
        self.take_while(|c| c.is_ascii_digit() || matches!(c, '.' | 'e' | 'E' | '+' | '-'));
        let token = &self.src[start..self.pos];
        let digits = if negative { &token[1..] } else { token };
        let malformed = || self.error_at(start, ParseErrorKind::Syntax(format!("malformed number `{token}`")));

        if digits.contains(['.', 'e', 'E']) {
            if !is_float_literal(digits) {
                return Err(malformed());
            }
            let f: f64 = token.parse().map_err(|_| malformed())?;
            if !f.is_finite() {
                return Err(self.error_at(start, ValueError::NonFiniteFloat.into()));
            }
            Ok(OptionValue::Float(f))
        } else {
            let valid = !digits.is_empty()
                && digits.bytes().all(|b| b.is_ascii_digit())
                && (digits == "0" || !digits.starts_with('0'));
            if !valid {
                return Err(malformed());
            }
            token
                .parse::<i64>()
                .map(OptionValue::Integer)
                .map_err(|_| self.error_at(start, ParseErrorKind::IntegerOutOfRange))
        }
    }

    fn string(&mut self) -> Result<OptionValue, ParseError> {
        self.bump();
        let mut out = String::new();
        loop {
            let esc_start = self.pos;
            match self.bump() {
                None => return Err(self.syntax("unterminated string")),
                Some('"') => return Ok(OptionValue::Text(out)),
                Some('\\') => match self.bump() {
                    Some('"') => out.push('"'),
                    Some('\\') => out.push('\\'),
                    Some('n') => out.push('\n'),
                    Some('t') => out.push('\t'),
                    Some('r') => out.push('\r'),
                    Some('u') => {
                        let hex = self.src.get(self.pos..self.pos + 4).unwrap_or("");
                        let ch = (hex.len() == 4 && hex.bytes().all(|b| b.is_ascii_hexdigit()))
                            .then(|| u32::from_str_radix(hex, 16).ok())
                            .flatten()
                            .and_then(char::from_u32);
                        match ch {
                            Some(c) => {
                                out.push(c);
                                self.pos += 4;
                            }
                            None => {
                                let end = (self.pos + 4).min(self.src.len());
                                let seq = self.src.get(esc_start..end).unwrap_or("\\u");
                                return Err(self.error_at(esc_start, ParseErrorKind::BadEscape(seq.to_owned())));
                            }
                        }
                    }
                    Some(c) => return Err(self.error_at(esc_start, ParseErrorKind::BadEscape(format!("\\{c}")))),
                    None => return Err(self.syntax("unterminated string")),
                },
                Some(c) => out.push(c),
            }
        }
    }

    fn list(&mut self) -> Result<OptionValue, ParseError> {
        let start = self.pos;
        self.bump();
        let mut items = Vec::new();
        if self.peek() == Some(']') {
            self.bump();
            return Ok(OptionValue::List(items));
        }
        loop {
            items.push(self.value(true)?);
            match self.peek() {
                Some(']') => {
                    self.bump();
                    break;
                }
                Some(',') => {
                    self.bump();
                    self.skip_ws();
                }
                _ => return Err(self.syntax("expected `,` or `]` in list")),
            }
        }
        let list = OptionValue::List(items);
        list.validate().map_err(|e| self.error_at(start, e.into()))?;
        Ok(list)
    }
}

fn is_non_finite_word(w: &str) -> bool {
    matches!(w.to_ascii_lowercase().as_str(), "nan" | "inf" | "infinity")
}

/// `[0-9]+ ('.' [0-9]+)? ([eE] [+-]? [0-9]+)?` with a fraction or exponent present.
fn is_float_literal(s: &str) -> bool {
    let b = s.as_bytes();
    let mut i = 0;
    let digits = |i: &mut usize| {
        let start = *i;
        while *i < b.len() && b[*i].is_ascii_digit() {
            *i += 1;
        }
        *i > start
    };
    if !digits(&mut i) {
        return false;
    }
    let mut shaped = false;
    if i < b.len() && b[i] == b'.' {
        i += 1;
        if !digits(&mut i) {
            return false;
        }
        shaped = true;
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        i += 1;
        if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
            i += 1;
        }
        if !digits(&mut i) {
            return false;
        }
        shaped = true;
    }
    shaped && i == b.len()
}

//! The `.rxn` text format.
//!
//! ```text
//! # HIV infection dynamics
//! species H, I, V
//! reaction alpha: 0 -> H @ 1
//! reaction gamma: H + V -> I @ 0.002
//! ```
//!
//! `#` starts a comment. `species` lines declare names in order (they may span
//! several lines). A reaction is `reaction <name>: <complex> -> <complex> @ <rate>`
//! where a complex is `0` or terms like `2 H + V` joined by a standalone `+`.
//! Names match `[A-Za-z_][A-Za-z0-9_+'-]*`, so operators must be separated from
//! names by whitespace. Repeated species in one complex add up.

use std::fmt::{self, Write as _};

use rxnet_core::{MultiIndex, Network, Reaction, SpeciesTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax,
    UnknownSpecies,
    DuplicateSpecies,
    DuplicateReaction,
    NonpositiveRate,
    BadNumber,
}

impl ParseErrorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ParseErrorKind::Syntax => "syntax",
            ParseErrorKind::UnknownSpecies => "unknown-species",
            ParseErrorKind::DuplicateSpecies => "duplicate-species",
            ParseErrorKind::DuplicateReaction => "duplicate-reaction",
            ParseErrorKind::NonpositiveRate => "nonpositive-rate",
            ParseErrorKind::BadNumber => "bad-number",
        }
    }
}

/// A parse failure at a 1-based line and column of the input.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{column}: {}: {message}", kind.as_str())]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
    pub message: String,
}

fn is_name_start(b: u8) -> bool {
    b.is_ascii_alphabetic() || b == b'_'
}

fn is_name_char(b: u8) -> bool {
    b.is_ascii_alphanumeric() || matches!(b, b'_' | b'+' | b'\'' | b'-')
}

fn is_number_char(b: u8) -> bool {
    b.is_ascii_alphanumeric() || matches!(b, b'_' | b'.' | b'+' | b'-')
}

/// Whether `s` is a valid species or reaction name.
pub fn is_valid_name(s: &str) -> bool {
    let b = s.as_bytes();
    !b.is_empty() && is_name_start(b[0]) && b[1..].iter().all(|&c| is_name_char(c))
}

struct Cursor<'a> {
    text: &'a [u8],
    pos: usize,
    line: usize,
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str, line: usize) -> Self {
        Self {
            text: text.as_bytes(),
            pos: 0,
            line,
        }
    }

    fn error(&self, column: usize, kind: ParseErrorKind, message: impl Into<String>) -> ParseError {
        ParseError {
            line: self.line,
            column,
            kind,
            message: message.into(),
        }
    }

    fn column(&self) -> usize {
        self.pos + 1
    }

    fn skip_ws(&mut self) {
        while self.pos < self.text.len() && self.text[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos >= self.text.len()
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.text.get(self.pos).copied()
    }

    fn describe_here(&mut self) -> String {
        match self.peek() {
            None => "end of line".to_string(),
            Some(_) => {
                let rest = &self.text[self.pos..];
                let end = rest
                    .iter()
                    .position(|b| b.is_ascii_whitespace())
                    .unwrap_or(rest.len());
                format!("`{}`", String::from_utf8_lossy(&rest[..end]))
            }
        }
    }

    fn expect(&mut self, token: &str, what: &str) -> Result<(), ParseError> {
        self.skip_ws();
        if self.text[self.pos..].starts_with(token.as_bytes()) {
            self.pos += token.len();
            Ok(())
        } else {
            let col = self.column();
            let found = self.describe_here();
            Err(self.error(col, ParseErrorKind::Syntax, format!("expected {what}, found {found}")))
        }
    }

    /// A name token, returned with its column.
    fn name(&mut self, what: &str) -> Result<(&'a str, usize), ParseError> {
        self.skip_ws();
        let start = self.pos;
        if start < self.text.len() && is_name_start(self.text[start]) {
            self.pos += 1;
            while self.pos < self.text.len() && is_name_char(self.text[self.pos]) {
                self.pos += 1;
            }
            let s = std::str::from_utf8(&self.text[start..self.pos]).expect("ascii");
            Ok((s, start + 1))
        } else {
            let found = self.describe_here();
            Err(self.error(start + 1, ParseErrorKind::Syntax, format!("expected {what}, found {found}")))
        }
    }

    /// A run of number-like characters starting at a digit or `.`.
    fn number_token(&mut self) -> Option<(&'a str, usize)> {
        self.skip_ws();
        let start = self.pos;
        match self.text.get(start) {
            Some(b) if b.is_ascii_digit() || *b == b'.' => {}
            _ => return None,
        }
        while self.pos < self.text.len() && is_number_char(self.text[self.pos]) {
            // Leave `->` for the caller.
            if self.text[self.pos] == b'-' && self.text.get(self.pos + 1) == Some(&b'>') {
                break;
            }
            self.pos += 1;
        }
        let s = std::str::from_utf8(&self.text[start..self.pos]).expect("ascii");
        Some((s, start + 1))
    }

    /// Everything left on the line, trimmed.
    fn rest(&mut self) -> (&'a str, usize) {
        self.skip_ws();
        let start = self.pos;
        let mut end = self.text.len();
        while end > start && self.text[end - 1].is_ascii_whitespace() {
            end -= 1;
        }
        self.pos = self.text.len();
        (
            std::str::from_utf8(&self.text[start..end]).unwrap_or(""),
            start + 1,
        )
    }
}

/// Decimal or scientific literal with an optional sign.
fn is_float_literal(s: &str) -> bool {
    let b = s.as_bytes();
    let mut i = 0;
    if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
        i += 1;
    }
    let int_start = i;
    while i < b.len() && b[i].is_ascii_digit() {
        i += 1;
    }
    let mut digits = i - int_start;
    if i < b.len() && b[i] == b'.' {
        i += 1;
        let frac_start = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        digits += i - frac_start;
    }
    if digits == 0 {
        return false;
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        i += 1;
        if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
            i += 1;
        }
        let exp_start = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        if i == exp_start {
            return false;
        }
    }
    i == b.len()
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.split('\n').enumerate().map(|(i, l)| {
        let l = l.strip_suffix('\r').unwrap_or(l);
        (i + 1, strip_comment(l))
    })
}

struct PendingReaction<'a> {
    line_no: usize,
    body: &'a str,
}

/// Parses and validates a network description.
pub fn parse_network(text: &str) -> Result<Network, ParseError> {
    let mut species: Vec<String> = Vec::new();
    let mut pending = Vec::new();

    for (line_no, line) in lines(text) {
        let mut cur = Cursor::new(line, line_no);
        if cur.at_end() {
            continue;
        }
        let (keyword, col) = cur.name("`species` or `reaction`")?;
        match keyword {
            "species" => loop {
                let (name, col) = cur.name("species name")?;
                if species.iter().any(|s| s == name) {
                    return Err(cur.error(
                        col,
                        ParseErrorKind::DuplicateSpecies,
                        format!("species `{name}` is already declared"),
                    ));
                }
                species.push(name.to_string());
                if cur.at_end() {
                    break;
                }
                cur.expect(",", "`,` or end of line")?;
            },
            "reaction" => pending.push(PendingReaction {
                line_no,
                body: line,
            }),
            other => {
                return Err(cur.error(
                    col,
                    ParseErrorKind::Syntax,
                    format!("expected `species` or `reaction`, found `{other}`"),
                ))
            }
        }
    }

    if species.is_empty() {
        return Err(ParseError {
            line: 1,
            column: 1,
            kind: ParseErrorKind::Syntax,
            message: "no species declared".to_string(),
        });
    }

    let mut reactions: Vec<Reaction> = Vec::with_capacity(pending.len());
    for p in &pending {
        let mut cur = Cursor::new(p.body, p.line_no);
        cur.name("`reaction`")?;
        let (name, name_col) = cur.name("reaction name")?;
        if reactions.iter().any(|r| r.name() == name) {
            return Err(cur.error(
                name_col,
                ParseErrorKind::DuplicateReaction,
                format!("reaction `{name}` is already defined"),
            ));
        }
        cur.expect(":", "`:` after the reaction name")?;
        let source = parse_complex(&mut cur, &species)?;
        cur.expect("->", "`->`")?;
        let target = parse_complex(&mut cur, &species)?;
        cur.expect("@", "`@` before the rate")?;
        let (literal, rate_col) = cur.rest();
        if literal.is_empty() {
            return Err(cur.error(rate_col, ParseErrorKind::Syntax, "missing rate after `@`"));
        }
        if !is_float_literal(literal) {
            return Err(cur.error(
                rate_col,
                ParseErrorKind::BadNumber,
                format!("`{literal}` is not a decimal or scientific number"),
            ));
        }
        let rate: f64 = literal.parse().map_err(|_| {
            cur.error(rate_col, ParseErrorKind::BadNumber, format!("cannot read `{literal}`"))
        })?;
        if !rate.is_finite() {
            return Err(cur.error(
                rate_col,
                ParseErrorKind::BadNumber,
                format!("rate `{literal}` is out of range"),
            ));
        }
        if rate <= 0.0 {
            return Err(cur.error(
                rate_col,
                ParseErrorKind::NonpositiveRate,
                format!("rate must be positive, got {literal}"),
            ));
        }
        let reaction = Reaction::new(name, source, target, rate)
            .expect("validated name, complexes and rate");
        reactions.push(reaction);
    }

    let table = SpeciesTable::new(species).expect("validated species names");
    Ok(Network::new(table, reactions).expect("validated network"))
}

fn parse_complex(cur: &mut Cursor<'_>, species: &[String]) -> Result<MultiIndex, ParseError> {
    let mut counts = vec![0u64; species.len()];
    let save = cur.pos;
    if let Some(("0", _)) = cur.number_token() {
        if matches!(cur.peek(), Some(b'-') | Some(b'@')) {
            return Ok(MultiIndex::new(counts));
        }
    }
    cur.pos = save;
    loop {
        let coeff = match cur.number_token() {
            Some((tok, col)) => {
                if !tok.bytes().all(|b| b.is_ascii_digit()) {
                    return Err(cur.error(
                        col,
                        ParseErrorKind::BadNumber,
                        format!("coefficient `{tok}` is not a natural number"),
                    ));
                }
                tok.parse::<u64>().map_err(|_| {
                    cur.error(col, ParseErrorKind::BadNumber, format!("coefficient `{tok}` is too large"))
                })?
            }
            None => 1,
        };
        let (name, col) = cur.name("species name")?;
        let i = species.iter().position(|s| s == name).ok_or_else(|| {
            cur.error(
                col,
                ParseErrorKind::UnknownSpecies,
                format!("species `{name}` is not declared"),
            )
        })?;
        counts[i] = counts[i].checked_add(coeff).ok_or_else(|| {
            cur.error(col, ParseErrorKind::BadNumber, "coefficient sum overflows")
        })?;
        if cur.peek() == Some(b'+') {
            cur.pos += 1;
        } else {
            break;
        }
    }
    Ok(MultiIndex::new(counts))
}

fn write_complex(out: &mut String, species: &SpeciesTable, complex: &MultiIndex) {
    let mut first = true;
    for (i, &n) in complex.entries().iter().enumerate() {
        if n == 0 {
            continue;
        }
        if !first {
            out.push_str(" + ");
        }
        first = false;
        if n != 1 {
            let _ = write!(out, "{n} ");
        }
        out.push_str(species.name(i));
    }
    if first {
        out.push('0');
    }
}

/// Canonical text for `net`; parsing it yields an identical network.
pub fn format_network(net: &Network) -> String {
    let mut out = String::new();
    out.push_str("species ");
    out.push_str(&net.species().names().join(", "));
    out.push('\n');
    for r in net.reactions() {
        let _ = write!(out, "reaction {}: ", r.name());
        write_complex(&mut out, net.species(), r.source());
        out.push_str(" -> ");
        write_complex(&mut out, net.species(), r.target());
        let _ = writeln!(out, " @ {:?}", r.rate());
    }
    out
}

/// Wrapper whose `Display` is the canonical text.
pub struct Canonical<'a>(pub &'a Network);

impl fmt::Display for Canonical<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_network(self.0))
    }
}

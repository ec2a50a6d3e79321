//! Line-oriented parser for network files. See `docs/network-format.md` for
//! the grammar.

use std::collections::HashMap;
use std::fmt;

use crate::conjugacy::{Pin, PinTarget};
use crate::kinetics::PolynomialKinetics;
use crate::network::Complex;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "line {}, column {}: {}",
            self.line, self.column, self.message
        )
    }
}

impl std::error::Error for ParseError {}

/// A rate literal: its value and, for `p/q` literals, the exact fraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateLiteral {
    pub value: f64,
    pub fraction: Option<(u64, u64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedReaction {
    pub source: usize,
    pub target: usize,
    pub rate: RateLiteral,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Content {
    Reactions(Vec<ParsedReaction>),
    Kinetics(PolynomialKinetics),
}

/// Parsed network file. `complexes` holds the declared complexes followed by
/// complexes first met in reactions; `declared` counts the former.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkFile {
    pub species: Vec<String>,
    pub complexes: Vec<Complex>,
    pub labels: Vec<String>,
    pub declared: usize,
    pub content: Content,
}

const KEYWORDS: [&str; 5] = ["species", "complex", "k", "kf", "kb"];

struct Cursor<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    _src: &'a str,
}

type PResult<T> = Result<T, ParseError>;
/// Monomial exponents and coefficient of one rate-law term.
type Term = (Vec<u32>, f64);

impl<'a> Cursor<'a> {
    fn new(src: &'a str, line: usize) -> Self {
        let body = match src.find('#') {
            Some(k) => &src[..k],
            None => src,
        };
        Cursor {
            chars: body.chars().collect(),
            pos: 0,
            line,
            _src: src,
        }
    }

    fn err<T>(&self, msg: impl Into<String>) -> PResult<T> {
        self.err_at(self.pos, msg)
    }

    fn err_at<T>(&self, pos: usize, msg: impl Into<String>) -> PResult<T> {
        Err(ParseError {
            line: self.line,
            column: pos + 1,
            message: msg.into(),
        })
    }

    fn ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, k: usize) -> Option<char> {
        self.chars.get(self.pos + k).copied()
    }

    fn at_end(&mut self) -> bool {
        self.ws();
        self.pos >= self.chars.len()
    }

    fn eat(&mut self, s: &str) -> bool {
        self.ws();
        let n = s.chars().count();
        if self.chars.len() >= self.pos + n
            && self.chars[self.pos..self.pos + n]
                .iter()
                .copied()
                .eq(s.chars())
        {
            self.pos += n;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &str, what: &str) -> PResult<()> {
        if self.eat(s) {
            Ok(())
        } else {
            self.err(format!("expected {what}"))
        }
    }

    fn ident(&mut self) -> Option<String> {
        self.ws();
        let start = self.pos;
        match self.peek() {
            Some(c) if c.is_alphabetic() || c == '_' => {}
            _ => return None,
        }
        while let Some(c) = self.peek() {
            if c.is_alphanumeric() || c == '_' {
                self.pos += 1;
            } else {
                break;
            }
        }
        Some(self.chars[start..self.pos].iter().collect())
    }

    fn integer(&mut self) -> Option<u64> {
        self.ws();
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == start {
            return None;
        }
        let s: String = self.chars[start..self.pos].iter().collect();
        match s.parse() {
            Ok(v) => Some(v),
            Err(_) => {
                self.pos = start;
                None
            }
        }
    }

    /// Decimal (optional fraction digits and exponent) or `p/q`.
    fn number(&mut self) -> PResult<RateLiteral> {
        self.ws();
        let start = self.pos;
        let mut negative = false;
        if self.peek() == Some('-') || self.peek() == Some('+') {
            negative = self.peek() == Some('-');
            self.pos += 1;
        }
        let digits_start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        let int_end = self.pos;
        let mut plain_integer = true;
        if self.peek() == Some('.') {
            plain_integer = false;
            self.pos += 1;
            while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                self.pos += 1;
            }
        }
        if self.pos == digits_start || (self.pos == digits_start + 1 && !plain_integer) {
            return self.err_at(start, "expected a number");
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some('+' | '-')) {
                self.pos += 1;
            }
            if matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                plain_integer = false;
                while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                    self.pos += 1;
                }
            } else {
                self.pos = save;
            }
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        if plain_integer {
            let save = self.pos;
            self.ws();
            if self.peek() == Some('/') {
                self.pos += 1;
                self.ws();
                let den_start = self.pos;
                match self.integer() {
                    Some(0) => return self.err_at(den_start, "zero denominator"),
                    Some(q) => {
                        let p: u64 = match self.chars[digits_start..int_end]
                            .iter()
                            .collect::<String>()
                            .parse()
                        {
                            Ok(p) => p,
                            Err(_) => return self.err_at(start, "numerator out of range"),
                        };
                        let v = p as f64 / q as f64;
                        return Ok(RateLiteral {
                            value: if negative { -v } else { v },
                            fraction: Some((p, q)),
                        });
                    }
                    None => return self.err_at(den_start, "expected a denominator after '/'"),
                }
            }
            self.pos = save;
        }
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(RateLiteral {
                value: v,
                fraction: None,
            }),
            _ => self.err_at(start, format!("invalid number '{text}'")),
        }
    }
}

struct Parser {
    species: Vec<String>,
    species_index: HashMap<String, usize>,
    complexes: Vec<Complex>,
    labels: Vec<String>,
    complex_index: HashMap<Complex, usize>,
    label_index: HashMap<String, usize>,
    declared: usize,
    reactions: Vec<ParsedReaction>,
    reaction_lines: HashMap<(usize, usize), usize>,
    equations: Vec<Option<Vec<Term>>>,
}

enum ComplexRef {
    Index(usize),
    New(Complex),
}

impl Parser {
    fn n(&self) -> usize {
        self.species.len()
    }

    fn species_line(&mut self, cur: &mut Cursor) -> PResult<()> {
        if !self.species.is_empty() {
            return cur.err_at(0, "species declared twice");
        }
        cur.eat(":");
        loop {
            let at = {
                cur.ws();
                cur.pos
            };
            let Some(name) = cur.ident() else {
                return cur.err("expected a species name");
            };
            if KEYWORDS.contains(&name.as_str()) {
                return cur.err_at(
                    at,
                    format!("'{name}' is reserved and cannot name a species"),
                );
            }
            if self.species_index.contains_key(&name) {
                return cur.err_at(at, format!("species '{name}' declared twice"));
            }
            self.species_index.insert(name.clone(), self.species.len());
            self.species.push(name);
            if cur.at_end() {
                break;
            }
            cur.expect(",", "',' between species names")?;
        }
        self.equations = vec![None; self.species.len()];
        Ok(())
    }

    /// Rate-law variable: a species name, or `x<i>` / `x_<i>` for the i-th
    /// species (1-based) when no species carries that name.
    fn variable(&self, name: &str) -> Option<usize> {
        if let Some(&i) = self.species_index.get(name) {
            return Some(i);
        }
        let digits = name.strip_prefix('x')?;
        let digits = digits.strip_prefix('_').unwrap_or(digits);
        let i: usize = digits.parse().ok()?;
        (1..=self.n()).contains(&i).then(|| i - 1)
    }

    fn need_species(&self, cur: &Cursor) -> PResult<()> {
        if self.species.is_empty() {
            return cur.err_at(0, "the species declaration must come first");
        }
        Ok(())
    }

    /// `0`, or `[coef] name (+ [coef] name)*`; a lone declared label refers
    /// to that complex.
    fn complex_expr(&self, cur: &mut Cursor, role: &str, allow_label: bool) -> PResult<ComplexRef> {
        cur.ws();
        if cur.peek() == Some('0') && !matches!(cur.peek_at(1), Some(c) if c.is_alphanumeric()) {
            cur.pos += 1;
            return Ok(ComplexRef::New(Complex::zero(self.n())));
        }
        let mut coefs = vec![0u32; self.n()];
        let mut terms = 0;
        loop {
            cur.ws();
            let term_start = cur.pos;
            let coef = cur.integer();
            let name_at = {
                cur.ws();
                cur.pos
            };
            let Some(name) = cur.ident() else {
                if terms == 0 && coef.is_none() {
                    return cur.err_at(term_start, format!("empty {role} complex"));
                }
                return cur.err_at(
                    name_at,
                    format!("expected a species name in the {role} complex"),
                );
            };
            if terms == 0 && coef.is_none() && allow_label {
                if let Some(&idx) = self.label_index.get(&name) {
                    cur.ws();
                    if cur.peek() != Some('+') {
                        return Ok(ComplexRef::Index(idx));
                    }
                    return cur
                        .err_at(name_at, format!("complex label '{name}' used inside a sum"));
                }
            }
            let Some(&s) = self.species_index.get(&name) else {
                return cur.err_at(name_at, format!("unknown species '{name}'"));
            };
            let c = coef.unwrap_or(1);
            if c == 0 {
                return cur.err_at(term_start, "zero stoichiometric coefficient");
            }
            coefs[s] = match u32::try_from(c).ok().and_then(|c| coefs[s].checked_add(c)) {
                Some(v) => v,
                None => return cur.err_at(term_start, "stoichiometric coefficient too large"),
            };
            terms += 1;
            if !cur.eat("+") {
                break;
            }
        }
        Ok(ComplexRef::New(Complex(coefs)))
    }

    fn intern(&mut self, r: ComplexRef) -> usize {
        match r {
            ComplexRef::Index(i) => i,
            ComplexRef::New(c) => {
                if let Some(&i) = self.complex_index.get(&c) {
                    return i;
                }
                let i = self.complexes.len();
                self.complex_index.insert(c.clone(), i);
                self.complexes.push(c);
                let mut k = i + 1;
                while self.labels.contains(&format!("C{k}")) {
                    k += 1;
                }
                self.labels.push(format!("C{k}"));
                i
            }
        }
    }

    fn complex_line(&mut self, cur: &mut Cursor) -> PResult<()> {
        self.need_species(cur)?;
        if !self.reactions.is_empty() || self.complexes.len() > self.declared {
            return cur.err_at(0, "complex declarations must precede reactions");
        }
        let at = {
            cur.ws();
            cur.pos
        };
        let Some(label) = cur.ident() else {
            return cur.err("expected a complex label");
        };
        if self.species_index.contains_key(&label) || KEYWORDS.contains(&label.as_str()) {
            return cur.err_at(
                at,
                format!("complex label '{label}' clashes with a species name or keyword"),
            );
        }
        if self.label_index.contains_key(&label) {
            return cur.err_at(at, format!("complex label '{label}' declared twice"));
        }
        cur.expect("=", "'=' after the complex label")?;
        let expr_at = {
            cur.ws();
            cur.pos
        };
        let ComplexRef::New(c) = self.complex_expr(cur, "declared", false)? else {
            unreachable!("labels disabled")
        };
        if !cur.at_end() {
            return cur.err("unexpected text after the complex");
        }
        if let Some(&i) = self.complex_index.get(&c) {
            return cur.err_at(
                expr_at,
                format!("complex already declared as {}", self.labels[i]),
            );
        }
        let i = self.complexes.len();
        self.complex_index.insert(c.clone(), i);
        self.complexes.push(c);
        self.labels.push(label.clone());
        self.label_index.insert(label, i);
        self.declared += 1;
        Ok(())
    }

    fn rate(&self, cur: &mut Cursor, key: &str) -> PResult<RateLiteral> {
        cur.ws();
        let at = cur.pos;
        if !(cur.eat(key) && !matches!(cur.peek(), Some(c) if c.is_alphanumeric())) {
            return cur.err_at(at, format!("expected '{key} = <rate>'"));
        }
        cur.expect("=", &format!("'=' after '{key}'"))?;
        cur.ws();
        let at = cur.pos;
        let r = cur.number()?;
        if r.value < 0.0 {
            return cur.err_at(at, "negative rate constant");
        }
        if r.value == 0.0 {
            return cur.err_at(at, "rate constant must be positive");
        }
        Ok(r)
    }

    fn add_reaction(
        &mut self,
        cur: &Cursor,
        at: usize,
        s: usize,
        t: usize,
        rate: RateLiteral,
    ) -> PResult<()> {
        if s == t {
            return cur.err_at(at, "reactant and product complexes are identical");
        }
        if let Some(line) = self.reaction_lines.insert((s, t), cur.line) {
            return cur.err_at(
                at,
                format!(
                    "reaction {} -> {} already given on line {line}",
                    self.labels[s], self.labels[t]
                ),
            );
        }
        self.reactions.push(ParsedReaction {
            source: s,
            target: t,
            rate,
        });
        Ok(())
    }

    fn reaction_line(&mut self, cur: &mut Cursor) -> PResult<()> {
        self.need_species(cur)?;
        if self.equations.iter().any(Option::is_some) {
            return cur.err_at(0, "reactions and rate laws cannot be mixed in one file");
        }
        cur.ws();
        let at = cur.pos;
        let lhs = self.complex_expr(cur, "reactant", true)?;
        let reversible = if cur.eat("<->") {
            true
        } else if cur.eat("->") {
            false
        } else {
            return cur.err("expected '->' or '<->'");
        };
        let rhs = self.complex_expr(cur, "product", true)?;
        cur.expect(",", "',' before the rate constant")?;
        let s = self.intern(lhs);
        let t = self.intern(rhs);
        if reversible {
            let kf = self.rate(cur, "kf")?;
            cur.expect(",", "',' between kf and kb")?;
            let kb = self.rate(cur, "kb")?;
            if !cur.at_end() {
                return cur.err("unexpected text after the rate constants");
            }
            self.add_reaction(cur, at, s, t, kf)?;
            self.add_reaction(cur, at, t, s, kb)
        } else {
            let k = self.rate(cur, "k")?;
            if !cur.at_end() {
                return cur.err("unexpected text after the rate constant");
            }
            self.add_reaction(cur, at, s, t, k)
        }
    }

    /// `d<species>/dt = <signed monomial list>`.
    fn rate_law(&mut self, cur: &mut Cursor, name: String, name_at: usize) -> PResult<()> {
        self.need_species(cur)?;
        if !self.reactions.is_empty() {
            return cur.err_at(0, "reactions and rate laws cannot be mixed in one file");
        }
        let Some(i) = self.variable(&name) else {
            return cur.err_at(name_at + 1, format!("unknown species '{name}'"));
        };
        if self.equations[i].is_some() {
            return cur.err_at(0, format!("rate law for '{name}' given twice"));
        }
        cur.expect("/", "'/dt'")?;
        if cur.ident().as_deref() != Some("dt") {
            return cur.err("expected '/dt'");
        }
        cur.expect("=", "'=' after d/dt")?;
        let mut terms = Vec::new();
        let mut first = true;
        loop {
            if cur.at_end() {
                if first {
                    return cur.err("empty rate law (write 0 for no terms)");
                }
                return cur.err("expected a term after the sign");
            }
            let mut sign = 1.0;
            if cur.eat("-") {
                sign = -1.0;
            } else if !cur.eat("+") && !first {
                return cur.err("expected '+' or '-' between terms");
            }
            first = false;
            let (coef, mono) = self.monomial(cur)?;
            if coef != 0.0 {
                terms.push((mono, sign * coef));
            }
            if cur.at_end() {
                break;
            }
        }
        self.equations[i] = Some(terms);
        Ok(())
    }

    fn monomial(&self, cur: &mut Cursor) -> PResult<(f64, Vec<u32>)> {
        cur.ws();
        let mut coef = 1.0;
        let mut has_coef = false;
        if matches!(cur.peek(), Some(c) if c.is_ascii_digit() || c == '.') {
            coef = cur.number()?.value;
            has_coef = true;
            cur.eat("*");
        }
        let mut exps = vec![0u32; self.n()];
        let mut factors = 0;
        loop {
            cur.ws();
            let at = cur.pos;
            let Some(name) = cur.ident() else { break };
            let Some(s) = self.variable(&name) else {
                return cur.err_at(at, format!("unknown species '{name}'"));
            };
            let mut p = 1u32;
            if cur.eat("^") {
                let pat = {
                    cur.ws();
                    cur.pos
                };
                p = match cur.integer().and_then(|v| u32::try_from(v).ok()) {
                    Some(v) => v,
                    None => return cur.err_at(pat, "expected an integer exponent"),
                };
            }
            exps[s] += p;
            factors += 1;
            if !cur.eat("*") {
                cur.ws();
                if !matches!(cur.peek(), Some(c) if c.is_alphabetic() || c == '_') {
                    break;
                }
            }
        }
        if factors == 0 && !has_coef {
            return cur.err("expected a monomial");
        }
        Ok((coef, exps))
    }

    fn finish(self) -> PResult<NetworkFile> {
        if self.species.is_empty() {
            return Err(ParseError {
                line: 1,
                column: 1,
                message: "missing species declaration".into(),
            });
        }
        let content = if self.equations.iter().any(Option::is_some) {
            let eqs: Vec<_> = self
                .equations
                .into_iter()
                .map(Option::unwrap_or_default)
                .collect();
            let k = PolynomialKinetics::new(self.species.clone(), eqs).map_err(|e| ParseError {
                line: 1,
                column: 1,
                message: e.to_string(),
            })?;
            Content::Kinetics(k)
        } else {
            Content::Reactions(self.reactions)
        };
        Ok(NetworkFile {
            species: self.species,
            complexes: self.complexes,
            labels: self.labels,
            declared: self.declared,
            content,
        })
    }
}

/// Parses a network file.
pub fn parse_network_file(text: &str) -> Result<NetworkFile, ParseError> {
    let mut p = Parser {
        species: Vec::new(),
        species_index: HashMap::new(),
        complexes: Vec::new(),
        labels: Vec::new(),
        complex_index: HashMap::new(),
        label_index: HashMap::new(),
        declared: 0,
        reactions: Vec::new(),
        reaction_lines: HashMap::new(),
        equations: Vec::new(),
    };
    for (k, raw) in text.lines().enumerate() {
        let mut cur = Cursor::new(raw, k + 1);
        if cur.at_end() {
            continue;
        }
        let start = cur.pos;
        let word = cur.ident();
        match word.as_deref() {
            Some("species") if !p.species_index.contains_key("species") => {
                p.species_line(&mut cur)?
            }
            Some("complex") if !matches!(cur.peek(), Some(c) if c.is_alphanumeric()) => {
                p.complex_line(&mut cur)?
            }
            Some(w) if w.len() > 1 && w.starts_with('d') && cur.eat("/") => {
                cur.pos -= 1;
                p.rate_law(&mut cur, w[1..].to_string(), start)?
            }
            _ => {
                cur.pos = start;
                p.reaction_line(&mut cur)?
            }
        }
    }
    p.finish()
}

/// Parses one complex such as `X2 + X4` or `0` against a species list.
pub fn parse_complex(text: &str, species: &[String]) -> Result<Complex, ParseError> {
    let p = Parser {
        species: species.to_vec(),
        species_index: species
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect(),
        complexes: Vec::new(),
        labels: Vec::new(),
        complex_index: HashMap::new(),
        label_index: HashMap::new(),
        declared: 0,
        reactions: Vec::new(),
        reaction_lines: HashMap::new(),
        equations: Vec::new(),
    };
    let mut cur = Cursor::new(text, 1);
    let ComplexRef::New(c) = p.complex_expr(&mut cur, "extra", false)? else {
        unreachable!("labels disabled")
    };
    if !cur.at_end() {
        return cur.err("unexpected text after the complex");
    }
    Ok(c)
}

/// Parses a decimal or `p/q` literal.
pub fn parse_number(text: &str) -> Result<RateLiteral, ParseError> {
    let mut cur = Cursor::new(text, 1);
    let r = cur.number()?;
    if !cur.at_end() {
        return cur.err("unexpected text after the number");
    }
    Ok(r)
}

/// `A[i,j]` (also `A_k[i,j]` or `[i,j]`), 1-based product and reactant
/// indices; returned zero-based.
fn pin_entry(cur: &mut Cursor) -> PResult<(usize, usize)> {
    cur.ws();
    let save = cur.pos;
    match cur.ident().as_deref() {
        Some("A" | "A_k" | "Ak") | None => {}
        Some(_) => return cur.err_at(save, "expected an entry such as A[2,1]"),
    }
    cur.expect("[", "'[' opening the entry")?;
    let at = {
        cur.ws();
        cur.pos
    };
    let i = cur.integer();
    cur.expect(",", "',' between entry indices")?;
    let j = cur.integer();
    cur.expect("]", "']' closing the entry")?;
    match (i, j) {
        (Some(i), Some(j)) if i >= 1 && j >= 1 && i != j => Ok((i as usize - 1, j as usize - 1)),
        _ => cur.err_at(at, "entry indices must be distinct and at least 1"),
    }
}

/// Parses `A[i,j]=<value>` or `A[i,j]=A[k,l]`.
pub fn parse_pin(text: &str) -> Result<Pin, ParseError> {
    let mut cur = Cursor::new(text, 1);
    let entry = pin_entry(&mut cur)?;
    cur.expect("=", "'=' in the pin")?;
    cur.ws();
    let target = if matches!(cur.peek(), Some(c) if c.is_ascii_digit() || c == '.') {
        let at = cur.pos;
        let v = cur.number()?;
        if v.value <= 0.0 {
            return cur.err_at(at, "pinned value must be positive");
        }
        PinTarget::Value(v.value)
    } else {
        let (k, l) = pin_entry(&mut cur)?;
        PinTarget::Entry(k, l)
    };
    if !cur.at_end() {
        return cur.err("unexpected text after the pin");
    }
    Ok(Pin { entry, target })
}

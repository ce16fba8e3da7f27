//! Reduced words over the signed generators of a free group, templates over
//! variables, and finite presentations.
//!
//! Generators are written `a, b, c, …` in rank order and their inverses as the
//! corresponding uppercase letters.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{parse_err, Error, Result};

/// Largest rank expressible in the textual alphabet.
pub const MAX_RANK: usize = 26;

/// A signed generator `e_i^{±1}`, stored as `+i` or `-i` with `i ≥ 1`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Letter(i32);

impl Letter {
    pub fn new(generator: usize, positive: bool) -> Letter {
        assert!(generator >= 1, "generator index starts at 1");
        let g = generator as i32;
        Letter(if positive { g } else { -g })
    }

    pub fn generator(self) -> usize {
        self.0.unsigned_abs() as usize
    }

    /// `+1` or `-1`.
    pub fn sign(self) -> i32 {
        self.0.signum()
    }

    pub fn is_positive(self) -> bool {
        self.0 > 0
    }

    pub fn inverse(self) -> Letter {
        Letter(-self.0)
    }

    /// Position of the letter in the order `a, A, b, B, …` (0-based).
    pub fn index(self) -> usize {
        2 * (self.generator() - 1) + usize::from(!self.is_positive())
    }

    pub fn from_index(index: usize) -> Letter {
        Letter::new(index / 2 + 1, index % 2 == 0)
    }

    /// All `2n` letters of rank `n` in alphabet order.
    pub fn alphabet(rank: usize) -> impl Iterator<Item = Letter> {
        (0..2 * rank).map(Letter::from_index)
    }

    pub fn to_char(self) -> char {
        let base = if self.is_positive() { b'a' } else { b'A' };
        (base + (self.generator() - 1) as u8) as char
    }

    pub fn from_char(c: char) -> Option<Letter> {
        match c {
            'a'..='z' => Some(Letter::new((c as u8 - b'a') as usize + 1, true)),
            'A'..='Z' => Some(Letter::new((c as u8 - b'A') as usize + 1, false)),
            _ => None,
        }
    }
}

impl Ord for Letter {
    fn cmp(&self, other: &Self) -> Ordering {
        self.index().cmp(&other.index())
    }
}

impl PartialOrd for Letter {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_char())
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_char())
    }
}

/// A word in the free group. Value-semantic; every operation returns a new word.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Word {
    letters: Vec<Letter>,
    reduced: bool,
}

impl Word {
    pub fn empty() -> Word {
        Word {
            letters: Vec::new(),
            reduced: true,
        }
    }

    /// Wraps a letter sequence without reducing it.
    pub fn from_letters(letters: Vec<Letter>) -> Word {
        let reduced = letters.windows(2).all(|p| p[0] != p[1].inverse());
        Word { letters, reduced }
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn into_letters(self) -> Vec<Letter> {
        self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn is_reduced(&self) -> bool {
        self.reduced
    }

    /// Largest generator index used, 0 for the empty word.
    pub fn max_generator(&self) -> usize {
        self.letters.iter().map(|l| l.generator()).max().unwrap_or(0)
    }

    pub fn free_reduce(&self) -> Word {
        if self.reduced {
            return self.clone();
        }
        Word {
            letters: reduce_letters(self.letters.iter().copied()),
            reduced: true,
        }
    }

    /// Returns `(u, c)` with `self = c·u·c⁻¹` and `u` cyclically reduced.
    pub fn cyclic_reduce(&self) -> (Word, Word) {
        let w = self.free_reduce();
        let n = w.len();
        let mut k = 0;
        while 2 * k + 1 < n && w.letters[k] == w.letters[n - 1 - k].inverse() {
            k += 1;
        }
        (
            Word {
                letters: w.letters[k..n - k].to_vec(),
                reduced: true,
            },
            Word {
                letters: w.letters[..k].to_vec(),
                reduced: true,
            },
        )
    }

    pub fn is_cyclically_reduced(&self) -> bool {
        self.reduced
            && match (self.letters.first(), self.letters.last()) {
                (Some(&f), Some(&l)) => self.letters.len() == 1 || f != l.inverse(),
                _ => true,
            }
    }

    pub fn invert(&self) -> Word {
        Word {
            letters: self.letters.iter().rev().map(|l| l.inverse()).collect(),
            reduced: self.reduced,
        }
    }

    /// Free product `self·other`, freely reduced.
    pub fn mul(&self, other: &Word) -> Word {
        Word {
            letters: reduce_letters(self.letters.iter().chain(other.letters.iter()).copied()),
            reduced: true,
        }
    }

    /// Plain concatenation without reduction.
    pub fn concat(&self, other: &Word) -> Word {
        let mut letters = self.letters.clone();
        letters.extend_from_slice(&other.letters);
        Word::from_letters(letters)
    }

    /// Cyclic rotation starting at position `k`.
    pub fn rotate(&self, k: usize) -> Word {
        if self.letters.is_empty() {
            return self.clone();
        }
        let k = k % self.letters.len();
        let mut letters = self.letters[k..].to_vec();
        letters.extend_from_slice(&self.letters[..k]);
        Word::from_letters(letters)
    }

    pub fn slice(&self, start: usize, end: usize) -> Word {
        Word::from_letters(self.letters[start..end].to_vec())
    }

    pub fn pow(&self, k: usize) -> Word {
        let mut out = Word::empty();
        for _ in 0..k {
            out = out.mul(self);
        }
        out
    }

    /// Shortlex order: length first, then alphabet order letter by letter.
    pub fn shortlex_cmp(&self, other: &Word) -> Ordering {
        self.len()
            .cmp(&other.len())
            .then_with(|| self.letters.cmp(&other.letters))
    }
}

fn reduce_letters(letters: impl Iterator<Item = Letter>) -> Vec<Letter> {
    let mut out: Vec<Letter> = Vec::new();
    for l in letters {
        if out.last() == Some(&l.inverse()) {
            out.pop();
        } else {
            out.push(l);
        }
    }
    out
}

pub fn free_reduce(w: &Word) -> Word {
    w.free_reduce()
}

pub fn cyclic_reduce(w: &Word) -> (Word, Word) {
    w.cyclic_reduce()
}

pub fn invert(w: &Word) -> Word {
    w.invert()
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.letters {
            write!(f, "{}", l.to_char())?;
        }
        Ok(())
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Word(\"{self}\")")
    }
}

impl FromStr for Word {
    type Err = Error;

    /// Parses concatenated letters; single spaces are ignored. The result is
    /// not reduced.
    fn from_str(s: &str) -> Result<Word> {
        let mut letters = Vec::with_capacity(s.len());
        for (i, c) in s.chars().enumerate() {
            if c == ' ' {
                continue;
            }
            letters.push(
                Letter::from_char(c)
                    .ok_or_else(|| parse_err(1, i + 1, format!("unexpected character `{c}`")))?,
            );
        }
        Ok(Word::from_letters(letters))
    }
}

impl Serialize for Word {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Word {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Word, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One symbol of a template: a constant letter or a (possibly inverted)
/// variable occurrence.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Symbol {
    Gen(Letter),
    Var { name: String, inverse: bool },
}

impl Symbol {
    pub fn var(name: &str) -> Symbol {
        Symbol::Var {
            name: name.to_string(),
            inverse: false,
        }
    }

    pub fn inverse(&self) -> Symbol {
        match self {
            Symbol::Gen(l) => Symbol::Gen(l.inverse()),
            Symbol::Var { name, inverse } => Symbol::Var {
                name: name.clone(),
                inverse: !inverse,
            },
        }
    }

    pub fn var_name(&self) -> Option<&str> {
        match self {
            Symbol::Var { name, .. } => Some(name),
            Symbol::Gen(_) => None,
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::Gen(l) if l.is_positive() => write!(f, "{l}"),
            Symbol::Gen(l) => write!(f, "~{}", l.inverse()),
            Symbol::Var { name, inverse } => {
                write!(f, "{}{name}", if *inverse { "~" } else { "" })
            }
        }
    }
}

/// A word over variables and constant generators, freely reduced on
/// construction.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Template {
    symbols: Vec<Symbol>,
}

impl Template {
    pub fn new(symbols: Vec<Symbol>) -> Template {
        let mut out: Vec<Symbol> = Vec::with_capacity(symbols.len());
        for s in symbols {
            if out.last() == Some(&s.inverse()) {
                out.pop();
            } else {
                out.push(s);
            }
        }
        Template { symbols: out }
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn invert(&self) -> Template {
        Template {
            symbols: self.symbols.iter().rev().map(Symbol::inverse).collect(),
        }
    }

    pub fn concat(&self, other: &Template) -> Template {
        Template::new(self.symbols.iter().chain(other.symbols.iter()).cloned().collect())
    }

    /// Variable names in order of first occurrence.
    pub fn variables(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for s in &self.symbols {
            if let Some(n) = s.var_name() {
                if !out.iter().any(|o| o == n) {
                    out.push(n.to_string());
                }
            }
        }
        out
    }

    /// Parses whitespace-separated terms `x`, `~x`, `x1`, `a`, `~a`.
    pub fn parse(text: &str) -> Result<Template> {
        let mut symbols = Vec::new();
        for tok in text.split_whitespace() {
            let (inv, name) = match tok.strip_prefix('~') {
                Some(rest) => (true, rest),
                None => (false, tok),
            };
            symbols.push(parse_ident(name, inv)?);
        }
        Ok(Template::new(symbols))
    }
}

/// Variables are `x, y, z, u, v, w, t` optionally followed by digits;
/// constants are single letters `a..j`.
pub(crate) fn parse_ident(name: &str, inverse: bool) -> Result<Symbol> {
    let mut chars = name.chars();
    let head = chars.next().ok_or_else(|| parse_err(1, 1, "empty identifier"))?;
    let rest: String = chars.collect();
    if "xyzuvwt".contains(head) && rest.chars().all(|c| c.is_ascii_digit()) {
        return Ok(Symbol::Var {
            name: name.to_string(),
            inverse,
        });
    }
    if ('a'..='j').contains(&head) && rest.is_empty() {
        let l = Letter::from_char(head).expect("lowercase letter");
        return Ok(Symbol::Gen(if inverse { l.inverse() } else { l }));
    }
    Err(parse_err(1, 1, format!("unknown identifier `{name}`")))
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.symbols.is_empty() {
            return write!(f, "1");
        }
        for (i, s) in self.symbols.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

pub type Assignment = BTreeMap<String, Word>;

/// Substitutes words for variables and freely reduces the result.
pub fn substitute(template: &Template, assignment: &Assignment) -> Result<Word> {
    let mut letters = Vec::new();
    for s in template.symbols() {
        match s {
            Symbol::Gen(l) => letters.push(*l),
            Symbol::Var { name, inverse } => {
                let w = assignment
                    .get(name)
                    .ok_or_else(|| Error::UnboundVariable(name.clone()))?;
                if *inverse {
                    letters.extend(w.letters().iter().rev().map(|l| l.inverse()));
                } else {
                    letters.extend_from_slice(w.letters());
                }
            }
        }
    }
    Ok(Word {
        letters: reduce_letters(letters.into_iter()),
        reduced: true,
    })
}

/// A finite presentation `⟨e₁,…,eₙ | R⟩` with relators of uniform length.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Presentation {
    rank: usize,
    relators: Vec<Word>,
    relator_length: usize,
}

impl Presentation {
    pub fn new(rank: usize, relators: Vec<Word>) -> Result<Presentation> {
        if !(2..=MAX_RANK).contains(&rank) {
            return Err(Error::InvalidPresentation(format!(
                "rank {rank} outside 2..={MAX_RANK}"
            )));
        }
        let relator_length = relators.first().map_or(0, Word::len);
        for (i, r) in relators.iter().enumerate() {
            if r.is_empty() {
                return Err(Error::InvalidPresentation(format!("relator {i} is empty")));
            }
            if !r.is_cyclically_reduced() {
                return Err(Error::InvalidPresentation(format!(
                    "relator {i} `{r}` is not freely and cyclically reduced"
                )));
            }
            if r.len() != relator_length {
                return Err(Error::InvalidPresentation(format!(
                    "relator {i} has length {} but expected {relator_length}",
                    r.len()
                )));
            }
            if r.max_generator() > rank {
                return Err(Error::InvalidPresentation(format!(
                    "relator {i} `{r}` uses a generator beyond rank {rank}"
                )));
            }
        }
        Ok(Presentation {
            rank,
            relators,
            relator_length,
        })
    }

    pub fn free(rank: usize) -> Result<Presentation> {
        Presentation::new(rank, Vec::new())
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn relators(&self) -> &[Word] {
        &self.relators
    }

    pub fn relator_length(&self) -> usize {
        self.relator_length
    }

    /// Parses the presentation file format: `rank=<n> length=<l>` on the
    /// first non-comment line, then one relator per line; `#` starts a
    /// comment line.
    pub fn parse(text: &str) -> Result<Presentation> {
        let mut header: Option<(usize, usize)> = None;
        let mut relators = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if header.is_none() {
                header = Some(parse_header(line, lineno + 1)?);
                continue;
            }
            let w: Word = line.parse().map_err(|e| match e {
                Error::Parse {
                    column, message, ..
                } => parse_err(lineno + 1, column, message),
                other => other,
            })?;
            relators.push(w);
        }
        let (rank, length) = header.ok_or_else(|| parse_err(1, 1, "missing header"))?;
        let p = Presentation::new(rank, relators)?;
        if !p.relators.is_empty() && p.relator_length != length {
            return Err(Error::InvalidPresentation(format!(
                "header says length={length} but relators have length {}",
                p.relator_length
            )));
        }
        if p.relators.is_empty() && length != 0 {
            // an empty relator list is written with length=0, but tolerate a
            // nominal length for hand-written free presentations
            log::debug!("free presentation with nominal length {length}");
        }
        Ok(p)
    }

    pub fn to_file_string(&self) -> String {
        let mut s = format!("rank={} length={}\n", self.rank, self.relator_length);
        for r in &self.relators {
            s.push_str(&r.to_string());
            s.push('\n');
        }
        s
    }
}

fn parse_header(line: &str, lineno: usize) -> Result<(usize, usize)> {
    let mut rank = None;
    let mut length = None;
    for part in line.split_whitespace() {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| parse_err(lineno, 1, format!("expected key=value, got `{part}`")))?;
        let v: usize = v
            .parse()
            .map_err(|_| parse_err(lineno, 1, format!("bad integer `{v}`")))?;
        match k {
            "rank" => rank = Some(v),
            "length" => length = Some(v),
            _ => return Err(parse_err(lineno, 1, format!("unknown key `{k}`"))),
        }
    }
    match (rank, length) {
        (Some(r), Some(l)) => Ok((r, l)),
        _ => Err(parse_err(lineno, 1, "header needs rank= and length=")),
    }
}

//! Universal sentences: parsing, clausal normal form, triangular systems and
//! bounded evaluation in free and sampled groups.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::cancellation::{DehnSolver, WordEquality};
use crate::error::{parse_err, Error, Result};
use crate::words::{parse_ident, substitute, Assignment, Letter, Presentation, Symbol, Template, Word};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Polarity {
    #[serde(rename = "=1")]
    Eq,
    #[serde(rename = "!=1")]
    Neq,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Literal {
    pub word: Template,
    pub polarity: Polarity,
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.polarity {
            Polarity::Eq => "=",
            Polarity::Neq => "!=",
        };
        write!(f, "{} {op} 1", self.word)
    }
}

/// `(h₁ ∧ … ∧ h_k) → (c₁ ∨ … ∨ c_m)`; with no hypotheses, a disjunction.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Clause {
    pub hypotheses: Vec<Literal>,
    pub conclusions: Vec<Literal>,
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |lits: &[Literal], sep: &str| {
            lits.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(sep)
        };
        if !self.hypotheses.is_empty() {
            write!(f, "{} -> ", join(&self.hypotheses, " & "))?;
        }
        write!(f, "{}", join(&self.conclusions, " | "))
    }
}

/// A conjunction of clauses; every variable is universally quantified.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct UniversalSentence {
    pub variables: Vec<String>,
    pub clauses: Vec<Clause>,
}

impl fmt::Display for UniversalSentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .clauses
            .iter()
            .map(|c| {
                if c.hypotheses.is_empty() {
                    c.to_string()
                } else {
                    format!("( {c} )")
                }
            })
            .collect();
        write!(f, "{}", parts.join(" & "))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Term(Symbol),
    One,
    Eq,
    Neq,
    And,
    Or,
    Arrow,
    Open,
    Close,
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>> {
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let (line_no, column) = (ln + 1, i + 1);
            let c = chars[i];
            let push = |out: &mut Vec<Spanned>, tok| {
                out.push(Spanned {
                    tok,
                    line: line_no,
                    column,
                })
            };
            match c {
                _ if c.is_whitespace() => i += 1,
                '1' => {
                    push(&mut out, Tok::One);
                    i += 1;
                }
                '=' => {
                    push(&mut out, Tok::Eq);
                    i += 1;
                }
                '!' if chars.get(i + 1) == Some(&'=') => {
                    push(&mut out, Tok::Neq);
                    i += 2;
                }
                '&' => {
                    push(&mut out, Tok::And);
                    i += 1;
                }
                '|' => {
                    push(&mut out, Tok::Or);
                    i += 1;
                }
                '-' if chars.get(i + 1) == Some(&'>') => {
                    push(&mut out, Tok::Arrow);
                    i += 2;
                }
                '(' => {
                    push(&mut out, Tok::Open);
                    i += 1;
                }
                ')' => {
                    push(&mut out, Tok::Close);
                    i += 1;
                }
                '~' | 'a'..='z' => {
                    let inverse = c == '~';
                    let mut j = i + usize::from(inverse);
                    let start = j;
                    if j < chars.len() && chars[j].is_ascii_lowercase() {
                        j += 1;
                        while j < chars.len() && chars[j].is_ascii_digit() {
                            j += 1;
                        }
                    }
                    let name: String = chars[start..j].iter().collect();
                    let sym = parse_ident(&name, inverse).map_err(|_| {
                        parse_err(line_no, column, format!("unknown token `{}`", if name.is_empty() { "~".into() } else { name.clone() }))
                    })?;
                    push(&mut out, Tok::Term(sym));
                    i = j;
                }
                _ => return Err(parse_err(line_no, column, format!("unknown token `{c}`"))),
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn error(&self, message: impl Into<String>) -> Error {
        match self.toks.get(self.pos).or(self.toks.last()) {
            Some(s) if self.pos < self.toks.len() => parse_err(s.line, s.column, message),
            Some(s) => parse_err(s.line, s.column + 1, message),
            None => parse_err(1, 1, message),
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn literal(&mut self) -> Result<Literal> {
        let mut symbols = Vec::new();
        while let Some(Tok::Term(s)) = self.peek() {
            symbols.push(s.clone());
            self.pos += 1;
        }
        if symbols.is_empty() {
            let next = self.toks.get(self.pos + 1).map(|s| &s.tok);
            if self.peek() == Some(&Tok::One) && matches!(next, Some(Tok::Eq | Tok::Neq)) {
                self.pos += 1;
            } else {
                return Err(self.error("expected a word"));
            }
        }
        let polarity = if self.eat(&Tok::Eq) {
            Polarity::Eq
        } else if self.eat(&Tok::Neq) {
            Polarity::Neq
        } else {
            return Err(self.error("expected `=` or `!=`"));
        };
        if !self.eat(&Tok::One) {
            return Err(self.error("expected `1`"));
        }
        Ok(Literal {
            word: Template::new(symbols),
            polarity,
        })
    }

    // lit (sep lit)*, optionally wrapped in one pair of parentheses
    fn literals(&mut self, sep: &Tok) -> Result<Vec<Literal>> {
        let open = self.eat(&Tok::Open);
        let mut lits = vec![self.literal()?];
        while self.peek() == Some(sep) {
            let save = self.pos;
            self.pos += 1;
            match self.literal() {
                Ok(l) => lits.push(l),
                Err(e) => {
                    if open {
                        return Err(e);
                    }
                    self.pos = save;
                    break;
                }
            }
        }
        if open && !self.eat(&Tok::Close) {
            return Err(self.error("expected `)`"));
        }
        Ok(lits)
    }

    // A maximal `&`-chain followed by `->` is a hypothesis list; otherwise the
    // clause is a bare disjunction.
    fn clause(&mut self) -> Result<Clause> {
        let start = self.pos;
        let outer = self.peek() == Some(&Tok::Open) && self.clause_in_parens();
        if outer {
            self.pos += 1;
            let c = self.clause()?;
            if !self.eat(&Tok::Close) {
                return Err(self.error("expected `)`"));
            }
            return Ok(c);
        }
        if let Ok(hyps) = self.literals(&Tok::And) {
            if self.eat(&Tok::Arrow) {
                let conclusions = self.literals(&Tok::Or)?;
                return Ok(Clause {
                    hypotheses: hyps,
                    conclusions,
                });
            }
        }
        self.pos = start;
        Ok(Clause {
            hypotheses: Vec::new(),
            conclusions: self.literals(&Tok::Or)?,
        })
    }

    // whether the parenthesis at the cursor encloses an implication
    fn clause_in_parens(&self) -> bool {
        let mut depth = 0usize;
        for s in &self.toks[self.pos..] {
            match s.tok {
                Tok::Open => depth += 1,
                Tok::Close => {
                    depth -= 1;
                    if depth == 0 {
                        return false;
                    }
                }
                Tok::Arrow if depth == 1 => return true,
                _ => {}
            }
        }
        false
    }
}

/// Parses `clause (& clause)*` where `clause := [hyp ->] disj`.
pub fn parse_sentence(text: &str) -> Result<UniversalSentence> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
    };
    let mut clauses = vec![p.clause()?];
    while p.eat(&Tok::And) {
        clauses.push(p.clause()?);
    }
    if p.pos < p.toks.len() {
        return Err(p.error("unexpected token"));
    }
    let mut variables: Vec<String> = Vec::new();
    for c in &clauses {
        for l in c.hypotheses.iter().chain(&c.conclusions) {
            for v in l.word.variables() {
                if !variables.contains(&v) {
                    variables.push(v);
                }
            }
        }
    }
    Ok(UniversalSentence { variables, clauses })
}

/// `∀x̄ (V(x̄) = 1 → w₁(x̄) = 1 ∨ … ∨ w_k(x̄) = 1)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct EquationalClause {
    #[serde(serialize_with = "ser_templates")]
    pub system: Vec<Template>,
    #[serde(serialize_with = "ser_templates")]
    pub conclusions: Vec<Template>,
}

fn ser_templates<S: serde::Serializer>(ts: &[Template], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(ts.iter().map(|t| t.to_string()))
}

impl EquationalClause {
    /// Variables of the system first, then of the conclusions.
    pub fn variables(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for t in self.system.iter().chain(&self.conclusions) {
            for v in t.variables() {
                if !out.contains(&v) {
                    out.push(v);
                }
            }
        }
        out
    }
}

impl fmt::Display for EquationalClause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let eqs = |ts: &[Template], sep: &str| {
            ts.iter().map(|t| format!("{t} = 1")).collect::<Vec<_>>().join(sep)
        };
        if !self.system.is_empty() {
            write!(f, "{} -> ", eqs(&self.system, " & "))?;
        }
        if self.conclusions.is_empty() {
            write!(f, "false")
        } else {
            write!(f, "{}", eqs(&self.conclusions, " | "))
        }
    }
}

/// One clause per conjunct. Equations assumed true and inequations
/// concluded become the system; the rest become conclusions.
pub fn to_clausal(s: &UniversalSentence) -> Vec<EquationalClause> {
    s.clauses
        .iter()
        .map(|c| {
            let mut system = Vec::new();
            let mut conclusions = Vec::new();
            for l in &c.hypotheses {
                match l.polarity {
                    Polarity::Eq => system.push(l.word.clone()),
                    Polarity::Neq => conclusions.push(l.word.clone()),
                }
            }
            for l in &c.conclusions {
                match l.polarity {
                    Polarity::Eq => conclusions.push(l.word.clone()),
                    Polarity::Neq => system.push(l.word.clone()),
                }
            }
            EquationalClause { system, conclusions }
        })
        .collect()
}

pub fn eval_clause_with(c: &EquationalClause, a: &Assignment, eq: &dyn WordEquality) -> Result<bool> {
    for t in &c.system {
        if !eq.is_trivial(&substitute(t, a)?) {
            return Ok(true);
        }
    }
    for t in &c.conclusions {
        if eq.is_trivial(&substitute(t, a)?) {
            return Ok(true);
        }
    }
    Ok(false)
}

struct FreeEquality;

impl WordEquality for FreeEquality {
    fn is_trivial(&self, w: &Word) -> bool {
        w.free_reduce().is_empty()
    }
}

pub fn eval_clause_free(c: &EquationalClause, a: &Assignment) -> Result<bool> {
    eval_clause_with(c, a, &FreeEquality)
}

pub fn eval_clause_group(c: &EquationalClause, a: &Assignment, p: &Presentation) -> Result<bool> {
    let solver = DehnSolver::new(p)?;
    eval_clause_with(c, a, &solver)
}

/// Removal of an equation in which `variable` occurred exactly once.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Elimination {
    pub variable: String,
    #[serde(serialize_with = "ser_template")]
    pub equation: Template,
}

fn ser_template<S: serde::Serializer>(t: &Template, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&t.to_string())
}

/// A fresh variable standing for the product of two symbols.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Definition {
    pub variable: String,
    #[serde(serialize_with = "ser_template")]
    pub value: Template,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TriangularSystem {
    #[serde(serialize_with = "ser_templates")]
    pub equations: Vec<Template>,
    /// Equations after splitting, before any elimination.
    #[serde(serialize_with = "ser_templates")]
    pub split: Vec<Template>,
    pub split_origin: Vec<usize>,
    /// Source equation of each output equation.
    pub origin: Vec<usize>,
    pub variables: Vec<String>,
    pub definitions: Vec<Definition>,
    /// In removal order.
    pub eliminations: Vec<Elimination>,
}

fn fresh_name(taken: &BTreeSet<String>, next: &mut usize) -> String {
    loop {
        *next += 1;
        let name = format!("z{next}");
        if !taken.contains(&name) {
            return name;
        }
    }
}

fn occurrence_counts<'a>(eqs: impl Iterator<Item = &'a Template>) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for t in eqs {
        for s in t.symbols() {
            if let Some(n) = s.var_name() {
                *counts.entry(n.to_string()).or_insert(0) += 1;
            }
        }
    }
    counts
}

/// Splits `s₁s₂…s_m = 1` into `s₁s₂z⁻¹ = 1, z s₃…s_m = 1` until every
/// equation has at most three symbols, then repeatedly drops equations in
/// which some variable occurs only once in the whole system.
pub fn triangularize(system: &[Template]) -> Result<TriangularSystem> {
    if let Some(i) = system.iter().position(Template::is_empty) {
        return Err(Error::InvalidParams(format!("equation {i} has no occurrences")));
    }
    let mut taken: BTreeSet<String> = system.iter().flat_map(|t| t.variables()).collect();
    let mut next = 0;
    let mut equations = Vec::new();
    let mut origin = Vec::new();
    let mut definitions = Vec::new();
    for (j, t) in system.iter().enumerate() {
        let mut rest = t.symbols().to_vec();
        while rest.len() > 3 {
            let z = fresh_name(&taken, &mut next);
            taken.insert(z.clone());
            let pair = Template::new(rest[..2].to_vec());
            equations.push(Template::new(vec![rest[0].clone(), rest[1].clone(), Symbol::var(&z).inverse()]));
            origin.push(j);
            definitions.push(Definition {
                variable: z.clone(),
                value: pair,
            });
            let mut tail = vec![Symbol::var(&z)];
            tail.extend_from_slice(&rest[2..]);
            rest = tail;
        }
        equations.push(Template::new(rest));
        origin.push(j);
    }
    let split = equations.clone();
    let split_origin = origin.clone();
    let mut eliminations = Vec::new();
    loop {
        let counts = occurrence_counts(equations.iter());
        let hit = equations.iter().enumerate().find_map(|(i, t)| {
            t.symbols()
                .iter()
                .filter_map(Symbol::var_name)
                .find(|n| counts[*n] == 1)
                .map(|n| (i, n.to_string()))
        });
        let Some((i, variable)) = hit else { break };
        eliminations.push(Elimination {
            variable,
            equation: equations.remove(i),
        });
        origin.remove(i);
    }
    let variables = occurrence_counts(equations.iter()).into_keys().collect();
    Ok(TriangularSystem {
        equations,
        split,
        split_origin,
        origin,
        variables,
        definitions,
        eliminations,
    })
}

impl TriangularSystem {
    /// Extends an assignment of the original variables by the definitions of
    /// the fresh ones.
    /// Takes equations as already triangular, with no auxiliary variables.
    pub fn from_equations(equations: Vec<Template>) -> TriangularSystem {
        let mut variables: Vec<String> = equations.iter().flat_map(Template::variables).collect();
        variables.sort();
        variables.dedup();
        let n = equations.len();
        TriangularSystem {
            split: equations.clone(),
            equations,
            split_origin: (0..n).collect(),
            origin: (0..n).collect(),
            variables,
            definitions: Vec::new(),
            eliminations: Vec::new(),
        }
    }

    pub fn forward(&self, a: &Assignment) -> Result<Assignment> {
        let mut out = a.clone();
        for d in &self.definitions {
            let value = substitute(&d.value, &out)?;
            out.insert(d.variable.clone(), value);
        }
        Ok(out)
    }

    /// Turns a solution of the pruned system into a solution of the source
    /// system: eliminated variables are solved from their equations in
    /// reverse removal order, anything still unassigned becomes the identity.
    pub fn lift(&self, b: &Assignment) -> Result<Assignment> {
        let mut out = b.clone();
        for e in self.eliminations.iter().rev() {
            for v in e.equation.variables() {
                if v != e.variable {
                    out.entry(v).or_insert_with(Word::empty);
                }
            }
            let syms = e.equation.symbols();
            let k = syms
                .iter()
                .position(|s| s.var_name() == Some(e.variable.as_str()))
                .expect("eliminated variable occurs in its equation");
            let before = substitute(&Template::new(syms[..k].to_vec()), &out)?;
            let after = substitute(&Template::new(syms[k + 1..].to_vec()), &out)?;
            // before · y^{±1} · after = 1
            let y_signed = before.invert().mul(&after.invert());
            let inverted = matches!(&syms[k], Symbol::Var { inverse: true, .. });
            out.insert(
                e.variable.clone(),
                if inverted { y_signed.invert() } else { y_signed },
            );
        }
        Ok(out)
    }

    pub fn is_solution(&self, b: &Assignment) -> Result<bool> {
        for t in &self.equations {
            if !substitute(t, b)?.is_empty() {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Largest number of occurrences of a single variable.
pub fn max_occurrences(t: &TriangularSystem) -> usize {
    occurrence_counts(t.equations.iter()).into_values().max().unwrap_or(0)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Refutation {
    /// First assignment (in enumeration order) falsifying the clause.
    pub witness: Option<Assignment>,
    pub assignments_checked: u64,
    /// Whether candidate values were deduplicated up to group equality.
    pub deduplicated: bool,
}

/// Reduced words of length at most `max_len`, in shortlex order.
pub fn reduced_words_up_to(rank: usize, max_len: usize) -> Vec<Word> {
    let mut out = vec![Word::empty()];
    let mut frontier = vec![Word::empty()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for w in &frontier {
            for x in Letter::alphabet(rank) {
                if w.letters().last() != Some(&x.inverse()) {
                    let mut l = w.letters().to_vec();
                    l.push(x);
                    next.push(Word::from_letters(l));
                }
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// Enumerates assignments of `values` to `vars`, ordered by total length,
/// then lexicographically by the index of each value.
fn search(
    c: &EquationalClause,
    values: &[Word],
    eq: &dyn WordEquality,
    budget: u64,
) -> Result<(Option<Assignment>, u64)> {
    let vars = c.variables();
    let m = vars.len();
    let max_len = values.iter().map(Word::len).max().unwrap_or(0);
    let mut checked = 0u64;
    let mut choice = vec![0usize; m];
    for total in 0..=m * max_len {
        if let Some(a) = search_total(c, &vars, values, eq, total, 0, &mut choice, &mut checked, budget)? {
            return Ok((Some(a), checked));
        }
    }
    Ok((None, checked))
}

#[allow(clippy::too_many_arguments)]
fn search_total(
    c: &EquationalClause,
    vars: &[String],
    values: &[Word],
    eq: &dyn WordEquality,
    remaining: usize,
    depth: usize,
    choice: &mut Vec<usize>,
    checked: &mut u64,
    budget: u64,
) -> Result<Option<Assignment>> {
    if depth == vars.len() {
        if remaining != 0 {
            return Ok(None);
        }
        if *checked >= budget {
            return Err(Error::Budget(format!(
                "assignment budget {budget} exhausted after {checked} assignments"
            )));
        }
        *checked += 1;
        let a: Assignment = vars
            .iter()
            .zip(choice.iter())
            .map(|(v, &i)| (v.clone(), values[i].clone()))
            .collect();
        return Ok((!eval_clause_with(c, &a, eq)?).then_some(a));
    }
    for (i, w) in values.iter().enumerate() {
        if w.len() > remaining {
            break;
        }
        choice[depth] = i;
        if let Some(a) = search_total(c, vars, values, eq, remaining - w.len(), depth + 1, choice, checked, budget)? {
            return Ok(Some(a));
        }
    }
    Ok(None)
}

/// Searches assignments of reduced words of length at most `max_len` over
/// rank `rank` for one falsifying the clause in the free group. An empty
/// result only means no counterexample exists in the ball.
pub fn refute_on_ball_free(c: &EquationalClause, rank: usize, max_len: usize, budget: u64) -> Result<Refutation> {
    let values = reduced_words_up_to(rank, max_len);
    let (witness, checked) = search(c, &values, &FreeEquality, budget)?;
    Ok(Refutation {
        witness,
        assignments_checked: checked,
        deduplicated: false,
    })
}

/// Candidate values above this count are used without deduplication.
pub const DEDUP_LIMIT: usize = 4096;

pub fn refute_on_ball_group(c: &EquationalClause, p: &Presentation, max_len: usize, budget: u64) -> Result<Refutation> {
    let solver = DehnSolver::new(p)?;
    refute_with_solver(c, &solver, max_len, budget)
}

pub fn refute_with_solver(c: &EquationalClause, solver: &DehnSolver, max_len: usize, budget: u64) -> Result<Refutation> {
    let raw = reduced_words_up_to(solver.presentation().rank(), max_len);
    let deduplicated = raw.len() <= DEDUP_LIMIT;
    let values = if deduplicated {
        let mut kept: Vec<Word> = Vec::new();
        for w in raw {
            if !kept.iter().any(|k| solver.equal(k, &w)) {
                kept.push(w);
            }
        }
        kept
    } else {
        log::info!("{} candidate values; skipping deduplication", raw.len());
        raw
    };
    let (witness, checked) = search(c, &values, solver, budget)?;
    Ok(Refutation {
        witness,
        assignments_checked: checked,
        deduplicated,
    })
}

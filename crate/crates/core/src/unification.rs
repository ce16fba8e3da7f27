//! Parametric systems over the free group, position unification into a
//! piece alphabet, decorations of diagram boundaries and relators, and the
//! resulting probability bounds.

use std::collections::{BTreeMap, BTreeSet};

use num_rational::Rational64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::sentences::TriangularSystem;
use crate::words::{Assignment, Symbol, Template};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Role {
    /// `y_k`: the part of a side shared with the previous side.
    Outer,
    /// `ȳ_k`
    Inner,
    /// `c_k`: on the boundary of the central component.
    Central,
    /// `c̄_k`
    Left,
    /// `ĉ_k`
    Right,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SymbolInfo {
    pub name: String,
    pub role: Role,
    pub equation: usize,
    pub corner: usize,
}

/// Lengths for one triangle: `outer[k]`, `inner[k]` per corner and
/// `central[k]`, `left[k]`, `right[k]` per side.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TriangleShape {
    pub outer: Vec<usize>,
    pub inner: Vec<usize>,
    pub central: Vec<usize>,
    pub left: Vec<usize>,
    pub right: Vec<usize>,
}

impl TriangleShape {
    pub fn uniform(sides: usize, len: usize) -> TriangleShape {
        TriangleShape {
            outer: vec![len; sides],
            inner: vec![len; sides],
            central: vec![len; sides],
            left: vec![len; sides],
            right: vec![len; sides],
        }
    }
}

/// One occurrence of a variable in a triangular equation, written through
/// the corner and side symbols of its triangle.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Side {
    pub equation: usize,
    pub index: usize,
    pub variable: String,
    pub inverted: bool,
    #[serde(serialize_with = "ser_template")]
    pub rep: Template,
}

fn ser_template<S: serde::Serializer>(t: &Template, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&t.to_string())
}

fn ser_pairs<S: serde::Serializer>(v: &[(Template, Template)], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for (l, r) in v {
        seq.serialize_element(&format!("{l} = {r}"))?;
    }
    seq.end()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ParametricSystem {
    pub symbols: Vec<SymbolInfo>,
    pub sides: Vec<Side>,
    /// `lhs = rhs` for consecutive occurrences of the same variable.
    #[serde(serialize_with = "ser_pairs")]
    pub equations: Vec<(Template, Template)>,
    pub lengths: BTreeMap<String, usize>,
}

impl ParametricSystem {
    pub fn variables(&self) -> Vec<&str> {
        self.symbols
            .iter()
            .filter(|s| matches!(s.role, Role::Outer | Role::Inner))
            .map(|s| s.name.as_str())
            .collect()
    }

    pub fn parameters(&self) -> Vec<&str> {
        self.symbols
            .iter()
            .filter(|s| !matches!(s.role, Role::Outer | Role::Inner))
            .map(|s| s.name.as_str())
            .collect()
    }

    fn symbol(&self, role: Role, equation: usize, corner: usize) -> &str {
        &self
            .symbols
            .iter()
            .find(|s| s.role == role && s.equation == equation && s.corner == corner)
            .expect("symbol exists")
            .name
    }

    /// Parameter words for which every triangle closes in the group: the
    /// products `c_1 c_2 c_3` and `c̄_{k+1} ĉ_k` around each triangle.
    pub fn closing_words(&self) -> Vec<Template> {
        let mut by_eq: BTreeMap<usize, usize> = BTreeMap::new();
        for s in &self.sides {
            *by_eq.entry(s.equation).or_default() += 1;
        }
        let mut out = Vec::new();
        for (&j, &n) in &by_eq {
            out.push(Template::new((0..n).map(|k| Symbol::var(self.symbol(Role::Central, j, k))).collect()));
            for k in 0..n {
                out.push(Template::new(vec![
                    Symbol::var(self.symbol(Role::Left, j, (k + 1) % n)),
                    Symbol::var(self.symbol(Role::Right, j, k)),
                ]));
            }
        }
        out
    }

    /// Values of the original variables read off the first side of each.
    pub fn recover(&self, values: &Assignment) -> Result<Assignment> {
        let mut out = Assignment::new();
        for s in &self.sides {
            if out.contains_key(&s.variable) {
                continue;
            }
            let v = crate::words::substitute(&s.rep, values)?;
            out.insert(s.variable.clone(), if s.inverted { v.invert() } else { v });
        }
        Ok(out)
    }
}

fn template_len(t: &Template, lengths: &BTreeMap<String, usize>) -> Result<usize> {
    t.symbols()
        .iter()
        .map(|s| match s {
            Symbol::Gen(_) => Ok(1),
            Symbol::Var { name, .. } => lengths
                .get(name)
                .copied()
                .ok_or_else(|| Error::UnboundVariable(name.clone())),
        })
        .sum()
}

/// Writes every variable occurrence of a triangular system as
/// `y_k c̄_k ȳ_k c_k ȳ_{k+1}⁻¹ ĉ_k y_{k+1}⁻¹` around its triangle and
/// equates consecutive occurrences of each variable. `shapes` gives the
/// symbol lengths per equation.
pub fn build_parametric_system(t: &TriangularSystem, shapes: &[TriangleShape]) -> Result<ParametricSystem> {
    if shapes.len() != t.equations.len() {
        return Err(Error::Lengths(format!(
            "{} shapes for {} equations",
            shapes.len(),
            t.equations.len()
        )));
    }
    let mut symbols = Vec::new();
    let mut lengths = BTreeMap::new();
    let mut sides = Vec::new();
    let mut counter = 0usize;
    for (j, eq) in t.equations.iter().enumerate() {
        let occ: Vec<(String, bool)> = eq
            .symbols()
            .iter()
            .map(|s| match s {
                Symbol::Var { name, inverse } => Ok((name.clone(), *inverse)),
                Symbol::Gen(l) => Err(Error::InvalidParams(format!(
                    "equation {} contains the constant {l}",
                    j + 1
                ))),
            })
            .collect::<Result<_>>()?;
        let n = occ.len();
        let shape = &shapes[j];
        for (name, v) in [
            ("outer", &shape.outer),
            ("inner", &shape.inner),
            ("central", &shape.central),
            ("left", &shape.left),
            ("right", &shape.right),
        ] {
            if v.len() != n {
                return Err(Error::Lengths(format!(
                    "equation {}: {} {name} lengths for {n} sides",
                    j + 1,
                    v.len()
                )));
            }
        }
        let mut names: BTreeMap<(Role, usize), String> = BTreeMap::new();
        for (role, prefix, lens) in [
            (Role::Outer, 'y', &shape.outer),
            (Role::Inner, 'w', &shape.inner),
            (Role::Central, 'u', &shape.central),
            (Role::Left, 'v', &shape.left),
            (Role::Right, 't', &shape.right),
        ] {
            for k in 0..n {
                counter += 1;
                let name = format!("{prefix}{counter}");
                lengths.insert(name.clone(), lens[k]);
                symbols.push(SymbolInfo {
                    name: name.clone(),
                    role,
                    equation: j,
                    corner: k,
                });
                names.insert((role, k), name);
            }
        }
        for (k, (variable, inverted)) in occ.into_iter().enumerate() {
            let k1 = (k + 1) % n;
            let sym = |role: Role, c: usize, inv: bool| Symbol::Var {
                name: names[&(role, c)].clone(),
                inverse: inv,
            };
            let rep = Template::new(vec![
                sym(Role::Outer, k, false),
                sym(Role::Left, k, false),
                sym(Role::Inner, k, false),
                sym(Role::Central, k, false),
                sym(Role::Inner, k1, true),
                sym(Role::Right, k, false),
                sym(Role::Outer, k1, true),
            ]);
            sides.push(Side {
                equation: j,
                index: k,
                variable,
                inverted,
                rep,
            });
        }
    }
    let mut equations = Vec::new();
    let mut last: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, s) in sides.iter().enumerate() {
        if let Some(&p) = last.get(s.variable.as_str()) {
            let prev = &sides[p];
            let lhs = if prev.inverted { prev.rep.invert() } else { prev.rep.clone() };
            let rhs = if s.inverted { s.rep.invert() } else { s.rep.clone() };
            let (a, b) = (template_len(&lhs, &lengths)?, template_len(&rhs, &lengths)?);
            if a != b {
                return Err(Error::Lengths(format!(
                    "equation {} side {} has length {a} but equation {} side {} has length {b} for `{}`",
                    prev.equation + 1,
                    prev.index + 1,
                    s.equation + 1,
                    s.index + 1,
                    s.variable
                )));
            }
            equations.push((lhs, rhs));
        }
        last.insert(&s.variable, i);
    }
    Ok(ParametricSystem {
        symbols,
        sides,
        equations,
        lengths,
    })
}

/// An occurrence of a symbol on the master interval.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Segment {
    pub symbol: String,
    pub inverted: bool,
    pub start: usize,
    pub len: usize,
    /// Segments in the same group are read as one word.
    pub group: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Range {
    pub segment: usize,
    pub offset: usize,
    pub len: usize,
}

/// Two ranges that carry the same letters, or mutually inverse letters in
/// opposite order when `reversed`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Double {
    pub first: Range,
    pub second: Range,
    pub reversed: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct IntervalLayout {
    pub segments: Vec<Segment>,
    pub doubles: Vec<Double>,
}

impl IntervalLayout {
    pub fn total(&self) -> usize {
        self.segments.last().map_or(0, |s| s.start + s.len)
    }

    /// Absolute unit position of offset `t` inside range `r`.
    pub fn unit(&self, r: &Range, t: usize) -> usize {
        self.segments[r.segment].start + r.offset + t
    }

    pub fn push(&mut self, symbol: String, inverted: bool, len: usize, group: usize) -> Option<usize> {
        if len == 0 {
            return None;
        }
        let start = self.total();
        self.segments.push(Segment {
            symbol,
            inverted,
            start,
            len,
            group,
        });
        Some(self.segments.len() - 1)
    }

    // chains every later occurrence of a symbol to its first one
    fn double_repeats(&mut self) {
        let mut first: BTreeMap<&str, usize> = BTreeMap::new();
        let mut doubles = Vec::new();
        for (i, s) in self.segments.iter().enumerate() {
            match first.get(s.symbol.as_str()) {
                Some(&f) => {
                    let fs = &self.segments[f];
                    doubles.push(Double {
                        first: Range { segment: f, offset: 0, len: fs.len },
                        second: Range { segment: i, offset: 0, len: s.len },
                        reversed: fs.inverted != s.inverted,
                    });
                }
                None => {
                    first.insert(&s.symbol, i);
                }
            }
        }
        self.doubles.extend(doubles);
    }
}

fn symbol_key(s: &Symbol) -> (String, bool) {
    match s {
        Symbol::Gen(l) => (l.generator().to_string(), !l.is_positive()),
        Symbol::Var { name, inverse } => (name.clone(), *inverse),
    }
}

/// Occurrences of the triangular equations laid left to right, one group
/// per equation; repeated variables are doubled.
pub fn build_layout(t: &TriangularSystem, lengths: &BTreeMap<String, usize>) -> Result<IntervalLayout> {
    let mut layout = IntervalLayout::default();
    for (j, eq) in t.equations.iter().enumerate() {
        for s in eq.symbols() {
            let (name, inv) = symbol_key(s);
            let len = match s {
                Symbol::Gen(_) => 1,
                Symbol::Var { name, .. } => *lengths.get(name).ok_or_else(|| Error::UnboundVariable(name.clone()))?,
            };
            let name = if matches!(s, Symbol::Gen(_)) { format!("#{name}") } else { name };
            layout.push(name, inv, len, j);
        }
    }
    layout.double_repeats();
    Ok(layout)
}

/// Both sides of every equation of a parametric system, with repeated
/// symbols doubled and each equation's sides identified unit by unit.
pub fn build_parametric_layout(sys: &ParametricSystem) -> Result<IntervalLayout> {
    let mut layout = IntervalLayout::default();
    let mut pairs = Vec::new();
    for (j, (lhs, rhs)) in sys.equations.iter().enumerate() {
        let mut sides = [Vec::new(), Vec::new()];
        for (side, t) in [lhs, rhs].into_iter().enumerate() {
            for s in t.symbols() {
                let (name, inv) = symbol_key(s);
                let len = *sys.lengths.get(&name).ok_or_else(|| Error::UnboundVariable(name.clone()))?;
                if let Some(i) = layout.push(name, inv, len, 2 * j + side) {
                    sides[side].push(i);
                }
            }
        }
        pairs.push(sides);
    }
    layout.double_repeats();
    for (j, [left, right]) in pairs.into_iter().enumerate() {
        let (mut a, mut b) = (left.iter().peekable(), right.iter().peekable());
        let (mut oa, mut ob) = (0usize, 0usize);
        while let (Some(&&sa), Some(&&sb)) = (a.peek(), b.peek()) {
            let (la, lb) = (layout.segments[sa].len, layout.segments[sb].len);
            let take = (la - oa).min(lb - ob);
            layout.doubles.push(Double {
                first: Range { segment: sa, offset: oa, len: take },
                second: Range { segment: sb, offset: ob, len: take },
                reversed: false,
            });
            oa += take;
            ob += take;
            if oa == la {
                a.next();
                oa = 0;
            }
            if ob == lb {
                b.next();
                ob = 0;
            }
        }
        if a.peek().is_some() || b.peek().is_some() {
            return Err(Error::Lengths(format!("the two sides of equation {} differ in length", j + 1)));
        }
    }
    Ok(layout)
}

/// Union-find whose links carry a sign: `sign[x]` tells whether `x`
/// holds the inverse letter of its parent.
struct SignedUnionFind {
    parent: Vec<usize>,
    sign: Vec<bool>,
}

impl SignedUnionFind {
    fn new(n: usize) -> SignedUnionFind {
        SignedUnionFind {
            parent: (0..n).collect(),
            sign: vec![false; n],
        }
    }

    fn find(&mut self, x: usize) -> (usize, bool) {
        let mut path = Vec::new();
        let mut r = x;
        while self.parent[r] != r {
            path.push(r);
            r = self.parent[r];
        }
        // compress from the top so each node's parity is relative to r
        let mut acc = false;
        for &n in path.iter().rev() {
            acc ^= self.sign[n];
            self.sign[n] = acc;
            self.parent[n] = r;
        }
        (r, if path.is_empty() { false } else { self.sign[x] })
    }

    // x carries the inverse letter of y when `inv`
    fn union(&mut self, x: usize, y: usize, inv: bool) -> std::result::Result<(), usize> {
        let (rx, sx) = self.find(x);
        let (ry, sy) = self.find(y);
        if rx == ry {
            return if sx ^ sy == inv { Ok(()) } else { Err(x.min(y)) };
        }
        let (lo, hi) = if rx < ry { (rx, ry) } else { (ry, rx) };
        self.parent[hi] = lo;
        self.sign[hi] = sx ^ sy ^ inv;
        Ok(())
    }
}

/// Classes of unit positions forced to carry the same letter (up to
/// inversion), and the pieces obtained by merging classes that always
/// occur side by side.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PieceAlphabet {
    /// Class of each unit position and whether it holds the inverse of
    /// the class letter. Classes are numbered by first position.
    pub class_of: Vec<(usize, bool)>,
    pub class_count: usize,
    pub pieces: Vec<Piece>,
    /// Each group of the layout as a signed piece sequence.
    pub words: Vec<Vec<(usize, bool)>>,
}

/// A run of classes; `occurrences` lists start positions on the layout
/// and whether the run is read inverted there.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Piece {
    pub classes: Vec<(usize, bool)>,
    pub occurrences: Vec<(usize, bool)>,
}

impl Piece {
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }
}

impl PieceAlphabet {
    /// Letters that can be chosen freely: one per class.
    pub fn degrees_of_freedom(&self) -> usize {
        self.class_count
    }
}

/// Repeatedly replaces a pair `p q` by a new piece when every occurrence of
/// `p` is followed by the same signed `q` and `q` occurs nowhere else.
/// Words are signed label sequences; returns each final label's expansion
/// into the original labels.
pub(crate) fn merge_adjacent(
    words: &mut [Vec<(usize, bool)>],
    labels: usize,
) -> Vec<Vec<(usize, bool)>> {
    let mut expand: Vec<Vec<(usize, bool)>> = (0..labels).map(|c| vec![(c, false)]).collect();
    loop {
        let mut count = vec![0usize; expand.len()];
        // right neighbour of each label read positively, if unique
        let mut right: Vec<Option<Option<(usize, bool)>>> = vec![None; expand.len()];
        for w in words.iter() {
            for (i, &(p, s)) in w.iter().enumerate() {
                count[p] += 1;
                let nb = if s {
                    i.checked_sub(1).map(|j| (w[j].0, !w[j].1))
                } else {
                    w.get(i + 1).copied()
                };
                right[p] = match right[p] {
                    None => Some(nb),
                    Some(prev) if prev == nb => Some(prev),
                    Some(_) => Some(None),
                };
            }
        }
        let pick = (0..expand.len()).find_map(|p| match right[p] {
            Some(Some((q, t))) if q != p && count[q] == count[p] && count[p] > 0 => Some((p, q, t)),
            _ => None,
        });
        let Some((p, q, t)) = pick else {
            break;
        };
        let merged_label = expand.len();
        let mut merged = expand[p].clone();
        merged.extend(if t { invert_run(&expand[q]) } else { expand[q].clone() });
        expand.push(merged);
        for w in words.iter_mut() {
            let mut out = Vec::with_capacity(w.len());
            let mut i = 0;
            while i < w.len() {
                let (a, s) = w[i];
                if i + 1 < w.len() {
                    let (b, s2) = w[i + 1];
                    if !s && a == p && b == q && s2 == t {
                        out.push((merged_label, false));
                        i += 2;
                        continue;
                    }
                    if s2 && b == p && a == q && s == !t {
                        out.push((merged_label, true));
                        i += 2;
                        continue;
                    }
                }
                out.push((a, s));
                i += 1;
            }
            *w = out;
        }
    }
    expand
}

fn invert_run(run: &[(usize, bool)]) -> Vec<(usize, bool)> {
    run.iter().rev().map(|&(c, s)| (c, !s)).collect()
}

/// Glues the doubled ranges unit by unit and groups the resulting classes
/// into pieces. Fails when some unit would have to equal its own inverse.
pub fn unify_positions(layout: &IntervalLayout) -> Result<PieceAlphabet> {
    let total = layout.total();
    let mut uf = SignedUnionFind::new(total);
    for d in &layout.doubles {
        if d.first.len != d.second.len {
            return Err(Error::Lengths(format!(
                "doubled ranges of lengths {} and {}",
                d.first.len, d.second.len
            )));
        }
        for t in 0..d.first.len {
            let x = layout.unit(&d.first, t);
            let y = if d.reversed {
                layout.unit(&d.second, d.second.len - 1 - t)
            } else {
                layout.unit(&d.second, t)
            };
            uf.union(x, y, d.reversed)
                .map_err(|position| Error::OrientationConflict { position })?;
        }
    }
    let mut class_id: BTreeMap<usize, usize> = BTreeMap::new();
    let mut class_of = Vec::with_capacity(total);
    for x in 0..total {
        let (r, s) = uf.find(x);
        let next = class_id.len();
        let c = *class_id.entry(r).or_insert(next);
        class_of.push((c, s));
    }
    // flip signs so the first position of each class is positive
    let mut first_sign = vec![None; class_id.len()];
    for &(c, s) in &class_of {
        first_sign[c].get_or_insert(s);
    }
    for e in &mut class_of {
        e.1 ^= first_sign[e.0].unwrap_or(false);
    }
    let class_count = class_id.len();

    let groups: BTreeSet<usize> = layout.segments.iter().map(|s| s.group).collect();
    let mut words: Vec<Vec<(usize, bool)>> = Vec::new();
    let mut starts: Vec<Vec<usize>> = Vec::new();
    for g in groups {
        let mut w = Vec::new();
        let mut st = Vec::new();
        for s in layout.segments.iter().filter(|s| s.group == g) {
            for x in s.start..s.start + s.len {
                w.push(class_of[x]);
                st.push(x);
            }
        }
        words.push(w);
        starts.push(st);
    }
    let mut merged = words.clone();
    let expand = merge_adjacent(&mut merged, class_count);
    let (pieces, words) = relabel(&expand, &merged, &starts);
    Ok(PieceAlphabet {
        class_of,
        class_count,
        pieces,
        words,
    })
}

// keeps only labels still in use, numbered by first appearance, and
// records where each occurrence starts
fn relabel(
    expand: &[Vec<(usize, bool)>],
    words: &[Vec<(usize, bool)>],
    positions: &[Vec<usize>],
) -> (Vec<Piece>, Vec<Vec<(usize, bool)>>) {
    let mut ids: BTreeMap<usize, usize> = BTreeMap::new();
    let mut pieces: Vec<Piece> = Vec::new();
    let mut out = Vec::with_capacity(words.len());
    for (w, pos) in words.iter().zip(positions) {
        let mut at = 0usize;
        let mut seq = Vec::with_capacity(w.len());
        for &(label, s) in w {
            let id = *ids.entry(label).or_insert_with(|| {
                pieces.push(Piece {
                    classes: expand[label].clone(),
                    occurrences: Vec::new(),
                });
                pieces.len() - 1
            });
            pieces[id].occurrences.push((pos[at], s));
            at += expand[label].len();
            seq.push((id, s));
        }
        out.push(seq);
    }
    (pieces, out)
}

/// A stretch of layout positions forming (part of) the boundary of a
/// component.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct BoundarySpan {
    pub component: usize,
    pub start: usize,
    pub len: usize,
}

/// Class labels on component boundaries, some possibly occurring once.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PreDecoration {
    pub boundaries: Vec<Vec<(usize, bool)>>,
    pub components: Vec<usize>,
    pub class_count: usize,
}

impl PreDecoration {
    fn tally(&self, alive: &BTreeSet<usize>) -> Vec<usize> {
        let mut count = vec![0usize; self.class_count];
        for (b, comp) in self.boundaries.iter().zip(&self.components) {
            if alive.contains(comp) {
                for &(c, _) in b {
                    count[c] += 1;
                }
            }
        }
        count
    }

    fn all_components(&self) -> BTreeSet<usize> {
        self.components.iter().copied().collect()
    }

    /// Classes occurring exactly once on the boundaries.
    pub fn singletons(&self) -> Vec<usize> {
        let count = self.tally(&self.all_components());
        (0..self.class_count).filter(|&c| count[c] == 1).collect()
    }

    fn decorate(&self, alive: &BTreeSet<usize>) -> Decoration {
        let keep: Vec<usize> = (0..self.boundaries.len()).filter(|&b| alive.contains(&self.components[b])).collect();
        let mut words: Vec<Vec<(usize, bool)>> = keep.iter().map(|&b| self.boundaries[b].clone()).collect();
        let expand = merge_adjacent(&mut words, self.class_count);
        let mut ids: BTreeMap<usize, usize> = BTreeMap::new();
        let mut pieces = Vec::new();
        let mut multiplicity = Vec::new();
        for w in &mut words {
            for (label, _) in w.iter_mut() {
                let id = *ids.entry(*label).or_insert_with(|| {
                    pieces.push(expand[*label].clone());
                    multiplicity.push(0);
                    pieces.len() - 1
                });
                multiplicity[id] += 1;
                *label = id;
            }
        }
        Decoration {
            boundaries: words,
            components: keep.iter().map(|&b| self.components[b]).collect(),
            pieces,
            multiplicity,
        }
    }
}

/// Boundary labels in which every piece occurs at least twice.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Decoration {
    boundaries: Vec<Vec<(usize, bool)>>,
    components: Vec<usize>,
    pieces: Vec<Vec<(usize, bool)>>,
    multiplicity: Vec<usize>,
}

impl Decoration {
    /// Each boundary as a signed piece sequence.
    pub fn boundaries(&self) -> &[Vec<(usize, bool)>] {
        &self.boundaries
    }

    pub fn components(&self) -> &[usize] {
        &self.components
    }

    /// Each piece as a signed run of position classes.
    pub fn pieces(&self) -> &[Vec<(usize, bool)>] {
        &self.pieces
    }

    pub fn multiplicity(&self) -> &[usize] {
        &self.multiplicity
    }

    /// Boundary `b` expanded to signed classes, one per unit.
    pub fn boundary_classes(&self, b: usize) -> Vec<(usize, bool)> {
        self.boundaries[b]
            .iter()
            .flat_map(|&(p, s)| if s { invert_run(&self.pieces[p]) } else { self.pieces[p].clone() })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum DecorationOutcome {
    Decoration(Decoration),
    Pre { pre: PreDecoration, singletons: Vec<usize> },
}

/// Restricts the class labels to the given boundary spans.
pub fn boundary_decoration(alphabet: &PieceAlphabet, spans: &[BoundarySpan]) -> Result<DecorationOutcome> {
    let total = alphabet.class_of.len();
    let mut boundaries = Vec::with_capacity(spans.len());
    for s in spans {
        if s.start + s.len > total {
            return Err(Error::InvalidParams(format!(
                "boundary span {}..{} exceeds the {total} layout positions",
                s.start,
                s.start + s.len
            )));
        }
        boundaries.push(alphabet.class_of[s.start..s.start + s.len].to_vec());
    }
    let pre = PreDecoration {
        boundaries,
        components: spans.iter().map(|s| s.component).collect(),
        class_count: alphabet.class_count,
    };
    let singletons = pre.singletons();
    Ok(if singletons.is_empty() {
        DecorationOutcome::Decoration(pre.decorate(&pre.all_components()))
    } else {
        DecorationOutcome::Pre { pre, singletons }
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum PruneOutcome {
    Decorated { decoration: Decoration, removed: Vec<usize> },
    /// Every component went; the solution was free.
    AllRemoved { removed: Vec<usize> },
}

/// Drops components carrying a once-occurring class until none is left,
/// always taking the least such component.
pub fn prune_singletons(pre: &PreDecoration) -> PruneOutcome {
    let mut alive = pre.all_components();
    let mut removed = Vec::new();
    loop {
        let count = pre.tally(&alive);
        let victim = pre
            .boundaries
            .iter()
            .zip(&pre.components)
            .filter(|(b, comp)| alive.contains(comp) && b.iter().any(|&(c, _)| count[c] == 1))
            .map(|(_, &comp)| comp)
            .min();
        match victim {
            Some(comp) => {
                alive.remove(&comp);
                removed.push(comp);
            }
            None => break,
        }
    }
    if alive.is_empty() && !removed.is_empty() {
        PruneOutcome::AllRemoved { removed }
    } else {
        PruneOutcome::Decorated {
            decoration: pre.decorate(&alive),
            removed,
        }
    }
}

/// Where face `f` sits on the relator interval: its unit `i` reads
/// relator letter `offset + i`, or the inverse of letter `offset - i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct FacePlacement {
    pub relator: usize,
    pub offset: usize,
    pub inverted: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct FacePos {
    pub face: usize,
    pub position: usize,
}

/// An edge path shared by two faces: unit `first + t` of one face carries
/// the inverse letter of unit `second + len - 1 - t` of the other.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Matching {
    pub first: FacePos,
    pub second: FacePos,
    pub len: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RelatorDecoration {
    /// Class of every relator position `relator·ℓ + i`.
    pub class_of: Vec<(usize, bool)>,
    pub multiplicity: Vec<usize>,
}

impl RelatorDecoration {
    pub fn degrees_of_freedom(&self) -> usize {
        self.multiplicity.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum RelatorOutcome {
    Decoration(RelatorDecoration),
    /// A relator position identified with nothing else.
    SingletonWitness { relator: usize, position: usize },
}

/// Transfers the boundary decoration and the internal matchings onto the
/// relators laid side by side, then unifies positions there. `along[b][u]`
/// is the face unit under unit `u` of boundary `b`, read the same way.
pub fn relator_decoration(
    decoration: &Decoration,
    along: &[Vec<FacePos>],
    faces: &[FacePlacement],
    matchings: &[Matching],
    relators: usize,
    length: usize,
) -> Result<RelatorOutcome> {
    if length == 0 || relators == 0 {
        return Err(Error::InvalidParams("need at least one relator of positive length".into()));
    }
    let place = |p: FacePos| -> Result<(usize, bool)> {
        let f = faces
            .get(p.face)
            .ok_or_else(|| Error::InvalidParams(format!("face {} is not placed", p.face)))?;
        if f.relator >= relators {
            return Err(Error::InvalidParams(format!("face {} uses relator {}", p.face, f.relator)));
        }
        let i = p.position % length;
        let at = if f.inverted { (f.offset + length - i) % length } else { (f.offset + i) % length };
        Ok((f.relator * length + at, f.inverted))
    };
    let mut uf = SignedUnionFind::new(relators * length);
    let conflict = |position| Error::OrientationConflict { position };
    let mut first_of: BTreeMap<usize, (usize, bool)> = BTreeMap::new();
    for (b, units) in along.iter().enumerate() {
        let classes = decoration.boundary_classes(b);
        if classes.len() != units.len() {
            return Err(Error::Lengths(format!(
                "boundary {b} has {} units but {} face positions",
                classes.len(),
                units.len()
            )));
        }
        for (&(c, s), &fp) in classes.iter().zip(units) {
            let (x, sx) = place(fp)?;
            let parity = s ^ sx;
            match first_of.get(&c) {
                Some(&(y, py)) => uf.union(x, y, parity ^ py).map_err(conflict)?,
                None => {
                    first_of.insert(c, (x, parity));
                }
            }
        }
    }
    for m in matchings {
        for t in 0..m.len {
            let a = place(FacePos { face: m.first.face, position: m.first.position + t })?;
            let b = place(FacePos { face: m.second.face, position: m.second.position + m.len - 1 - t })?;
            uf.union(a.0, b.0, !(a.1 ^ b.1)).map_err(conflict)?;
        }
    }
    let mut ids: BTreeMap<usize, usize> = BTreeMap::new();
    let mut class_of = Vec::with_capacity(relators * length);
    let mut multiplicity: Vec<usize> = Vec::new();
    for x in 0..relators * length {
        let (r, s) = uf.find(x);
        let next = ids.len();
        let c = *ids.entry(r).or_insert(next);
        if c == multiplicity.len() {
            multiplicity.push(0);
        }
        multiplicity[c] += 1;
        class_of.push((c, s));
    }
    if let Some(x) = (0..relators * length).find(|&x| multiplicity[class_of[x].0] == 1) {
        return Ok(RelatorOutcome::SingletonWitness {
            relator: x / length,
            position: x % length,
        });
    }
    let mut first_sign = vec![None; multiplicity.len()];
    for &(c, s) in &class_of {
        first_sign[c].get_or_insert(s);
    }
    for e in &mut class_of {
        e.1 ^= first_sign[e.0].unwrap_or(false);
    }
    Ok(RelatorOutcome::Decoration(RelatorDecoration { class_of, multiplicity }))
}

/// `n·ℓ/2`: the most letters a decoration of `n` relators of length `ℓ`
/// leaves free.
pub fn free_letter_bound(relators: usize, length: usize) -> Rational64 {
    Rational64::new((relators * length) as i64, 2)
}

/// Bounds `(2m - 1)^{e}` on the probability that a random group fulfils a
/// relator decoration, for all `n` relators at once and for a single one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProbabilityBound {
    pub base: u64,
    #[serde(serialize_with = "ser_ratio")]
    pub exponent_all: Rational64,
    #[serde(serialize_with = "ser_ratio")]
    pub exponent_single: Rational64,
    pub all: f64,
    pub single: f64,
}

fn ser_ratio<S: serde::Serializer>(x: &Rational64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&x.to_string())
}

pub fn fulfill_probability_bound(rank: usize, relators: usize, length: usize, density: Rational64) -> Result<ProbabilityBound> {
    let half = Rational64::new(1, 2);
    if density >= half {
        return Err(Error::InvalidParams(format!("density {density} leaves no decay")));
    }
    if rank == 0 {
        return Err(Error::InvalidParams("rank must be positive".into()));
    }
    let base = (2 * rank - 1) as u64;
    let exponent_single = -Rational64::from_integer(length as i64) * (half - density);
    let exponent_all = exponent_single * Rational64::from_integer(relators as i64);
    let pow = |e: Rational64| (base as f64).powf(*e.numer() as f64 / *e.denom() as f64);
    Ok(ProbabilityBound {
        base,
        exponent_all,
        exponent_single,
        all: pow(exponent_all),
        single: pow(exponent_single),
    })
}

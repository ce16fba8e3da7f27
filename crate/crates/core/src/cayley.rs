//! Bounded balls in Cayley graphs and checks of their geodesic structure.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

use rayon::prelude::*;
use serde::Serialize;

pub use crate::cancellation::{AbelianEquality, WordEquality};
use crate::cancellation::{DehnSolver, SymmetrizedSet};
use crate::error::{Error, Result};
use crate::words::{Letter, Presentation, Word};

pub const DEFAULT_VERTEX_BUDGET: usize = 2_000_000;

fn exponent_vector(w: &Word, rank: usize) -> Vec<i64> {
    let mut v = vec![0i64; rank];
    for l in w.letters() {
        v[l.generator() - 1] += i64::from(l.sign());
    }
    v
}

/// Image of a word in the abelianization, reduced to a canonical
/// representative modulo the lattice spanned by the relators.
#[derive(Clone, Debug)]
struct AbelianKey {
    rank: usize,
    // echelon basis of the relator lattice: (pivot column, row)
    rows: Vec<(usize, Vec<i64>)>,
}

impl AbelianKey {
    fn new(p: &Presentation) -> AbelianKey {
        let rank = p.rank();
        let mut rows: Vec<Vec<i64>> = p.relators().iter().map(|r| exponent_vector(r, rank)).collect();
        let mut echelon = Vec::new();
        let mut top = 0;
        for col in 0..rank {
            loop {
                let pivot = (top..rows.len())
                    .filter(|&i| rows[i][col] != 0)
                    .min_by_key(|&i| rows[i][col].abs());
                let Some(pivot) = pivot else { break };
                rows.swap(top, pivot);
                let mut done = true;
                for j in top + 1..rows.len() {
                    if rows[j][col] != 0 {
                        let q = rows[j][col] / rows[top][col];
                        for c in 0..rank {
                            rows[j][c] -= q * rows[top][c];
                        }
                        done &= rows[j][col] == 0;
                    }
                }
                if done {
                    if rows[top][col] < 0 {
                        rows[top].iter_mut().for_each(|x| *x = -*x);
                    }
                    echelon.push((col, rows[top].clone()));
                    top += 1;
                    break;
                }
            }
        }
        AbelianKey { rank, rows: echelon }
    }

    fn key(&self, w: &Word) -> Vec<i64> {
        let mut v = exponent_vector(w, self.rank);
        for (col, row) in &self.rows {
            let q = v[*col].div_euclid(row[*col]);
            for c in 0..self.rank {
                v[c] -= q * row[c];
            }
        }
        v
    }
}

/// Ball of radius `R` about the identity. Vertices carry their shortlex
/// least geodesic word; vertex 0 is the identity.
pub struct CayleyBall {
    presentation: Presentation,
    radius: usize,
    words: Vec<Word>,
    layer: Vec<usize>,
    layer_starts: Vec<usize>,
    edges: Vec<Vec<Option<usize>>>,
    equality: Box<dyn WordEquality>,
    keyer: AbelianKey,
    buckets: HashMap<(Vec<i64>, usize), Vec<usize>>,
    symmetrized: SymmetrizedSet,
}

impl std::fmt::Debug for CayleyBall {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CayleyBall")
            .field("radius", &self.radius)
            .field("vertices", &self.words.len())
            .finish()
    }
}

pub fn build_ball(p: &Presentation, radius: usize) -> Result<CayleyBall> {
    let solver = DehnSolver::new(p)?;
    build_ball_with(p, radius, Box::new(solver), DEFAULT_VERTEX_BUDGET)
}

/// Breadth-first construction with a caller-supplied word problem oracle.
pub fn build_ball_with(
    p: &Presentation,
    radius: usize,
    equality: Box<dyn WordEquality>,
    max_vertices: usize,
) -> Result<CayleyBall> {
    if radius == 0 {
        return Err(Error::InvalidParams("ball radius must be at least 1".into()));
    }
    let width = 2 * p.rank();
    let mut ball = CayleyBall {
        presentation: p.clone(),
        radius,
        words: Vec::new(),
        layer: Vec::new(),
        layer_starts: vec![0],
        edges: Vec::new(),
        equality,
        keyer: AbelianKey::new(p),
        buckets: HashMap::new(),
        symmetrized: crate::cancellation::symmetrize(p),
    };
    ball.add_vertex(Word::empty(), 0, width);
    for k in 0..=radius {
        let (lo, hi) = (ball.layer_starts[k], ball.words.len());
        ball.layer_starts.push(hi);
        for v in lo..hi {
            for x in Letter::alphabet(p.rank()) {
                if ball.edges[v][x.index()].is_some() {
                    continue;
                }
                let w = ball.words[v].mul(&Word::from_letters(vec![x]));
                let found = ball.find_equal(&w, k, v);
                let target = match found {
                    Some(t) => t,
                    None if k < radius => {
                        if ball.words.len() >= max_vertices {
                            return Err(Error::Budget(format!(
                                "vertex budget {max_vertices} exhausted while building layer {} ({} vertices so far)",
                                k + 1,
                                ball.words.len()
                            )));
                        }
                        ball.add_vertex(w, k + 1, width)
                    }
                    None => continue,
                };
                ball.edges[v][x.index()] = Some(target);
                ball.edges[target][x.inverse().index()] = Some(v);
            }
        }
        log::debug!("layer {k}: {} vertices", hi - lo);
    }
    Ok(ball)
}

impl CayleyBall {
    fn add_vertex(&mut self, w: Word, layer: usize, width: usize) -> usize {
        let id = self.words.len();
        self.buckets.entry((self.keyer.key(&w), layer)).or_default().push(id);
        self.words.push(w);
        self.layer.push(layer);
        self.edges.push(vec![None; width]);
        id
    }

    // Equal vertices for v·x can only lie in layer k from v on or in layer k+1;
    // earlier ones would already have set the edge.
    fn find_equal(&self, w: &Word, k: usize, v: usize) -> Option<usize> {
        let key = self.keyer.key(w);
        for layer in [k, k + 1] {
            if let Some(cands) = self.buckets.get(&(key.clone(), layer)) {
                for &c in cands {
                    if layer == k && c < v {
                        continue;
                    }
                    if self.equality.equal(w, &self.words[c]) {
                        return Some(c);
                    }
                }
            }
        }
        None
    }

    pub fn presentation(&self) -> &Presentation {
        &self.presentation
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn vertex_count(&self) -> usize {
        self.words.len()
    }

    pub fn identity(&self) -> usize {
        0
    }

    pub fn word(&self, v: usize) -> &Word {
        &self.words[v]
    }

    /// Distance from the identity.
    pub fn distance(&self, v: usize) -> usize {
        self.layer[v]
    }

    pub fn layer(&self, k: usize) -> std::ops::Range<usize> {
        let k = k.min(self.radius);
        self.layer_starts[k]..self.layer_starts[k + 1]
    }

    /// Vertices at distance at most `k` from the identity.
    pub fn within(&self, k: usize) -> std::ops::Range<usize> {
        0..self.layer_starts[k.min(self.radius) + 1]
    }

    pub fn neighbor(&self, v: usize, x: Letter) -> Option<usize> {
        self.edges[v][x.index()]
    }

    pub fn symmetrized(&self) -> &SymmetrizedSet {
        &self.symmetrized
    }

    pub fn equal(&self, u: &Word, v: &Word) -> bool {
        self.equality.equal(u, v)
    }

    /// Vertex representing `w`, if it lies in the ball.
    pub fn locate(&self, w: &Word) -> Option<usize> {
        let w = w.free_reduce();
        let mut at = 0;
        let mut walked = true;
        for &l in w.letters() {
            match self.neighbor(at, l) {
                Some(n) => at = n,
                None => {
                    walked = false;
                    break;
                }
            }
        }
        if walked {
            return Some(at);
        }
        let key = self.keyer.key(&w);
        (0..=self.radius.min(w.len())).find_map(|layer| {
            self.buckets
                .get(&(key.clone(), layer))?
                .iter()
                .copied()
                .find(|&c| self.equality.equal(&w, &self.words[c]))
        })
    }

    /// Graph distances inside the ball from `from`; `u32::MAX` if unreachable.
    pub fn bfs_distances(&self, from: usize) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.words.len()];
        dist[from] = 0;
        let mut queue = VecDeque::from([from]);
        while let Some(v) = queue.pop_front() {
            for n in self.edges[v].iter().flatten() {
                if dist[*n] == u32::MAX {
                    dist[*n] = dist[v] + 1;
                    queue.push_back(*n);
                }
            }
        }
        dist
    }

    fn reliable_limit(&self) -> usize {
        self.radius.saturating_sub(1)
    }

    /// Geodesics from the identity to `g`: paths climbing one layer per step.
    /// Sorted lexicographically by label.
    pub fn geodesics_from_identity(&self, g: usize) -> Vec<Path> {
        let mut out = Vec::new();
        let mut stack: Vec<(usize, Vec<Letter>, Vec<usize>)> = vec![(g, Vec::new(), vec![g])];
        while let Some((at, labels, verts)) = stack.pop() {
            if at == 0 {
                let mut labels = labels;
                let mut verts = verts;
                labels.reverse();
                verts.reverse();
                out.push(Path {
                    start: 0,
                    labels: Word::from_letters(labels),
                    vertices: verts,
                });
                continue;
            }
            for x in Letter::alphabet(self.presentation.rank()) {
                if let Some(prev) = self.neighbor(at, x) {
                    if self.layer[prev] + 1 == self.layer[at] {
                        let mut l = labels.clone();
                        l.push(x.inverse());
                        let mut vs = verts.clone();
                        vs.push(prev);
                        stack.push((prev, l, vs));
                    }
                }
            }
        }
        out.sort_by(|a, b| a.labels.letters().cmp(b.labels.letters()));
        out
    }
}

/// An edge path in the frame of the ball: `vertices[i+1] = vertices[i]·labels[i]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Path {
    pub start: usize,
    pub labels: Word,
    pub vertices: Vec<usize>,
}

impl Path {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn end(&self) -> usize {
        *self.vertices.last().unwrap_or(&self.start)
    }
}

/// All geodesic label words from `u` to `v`. The search runs in the
/// translate of the ball that moves `u` to the identity, so no geodesic is
/// lost to truncation.
pub fn all_geodesics(ball: &CayleyBall, u: usize, v: usize) -> Result<Vec<Word>> {
    let g = relative_vertex(ball, u, v)?;
    Ok(ball.geodesics_from_identity(g).into_iter().map(|p| p.labels).collect())
}

fn relative_vertex(ball: &CayleyBall, u: usize, v: usize) -> Result<usize> {
    let limit = ball.reliable_limit();
    if ball.distance(u) > limit || ball.distance(v) > limit {
        return Err(Error::Unreliable(format!(
            "endpoints must lie within distance {limit} of the identity"
        )));
    }
    let rel = ball.word(u).invert().mul(ball.word(v));
    match ball.locate(&rel) {
        Some(g) if ball.distance(g) <= limit => Ok(g),
        _ => Err(Error::Unreliable(format!(
            "d(u, v) exceeds {limit}, the reliable radius"
        ))),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    CellStructure,
    Coverage,
    Overlap,
    Minimizers,
    SideUniqueness,
    LongSegments,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub detail: String,
}

impl Violation {
    fn new(kind: ViolationKind, detail: impl Into<String>) -> Violation {
        Violation {
            kind,
            detail: detail.into(),
        }
    }
}

/// A face of a digon, bounded by `low[a..a']`, a divisor, `up[b..b']` and
/// another divisor.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Cell {
    pub low: (usize, usize),
    pub up: (usize, usize),
    pub boundary: Word,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Digon {
    /// Offset of the digon along the two geodesics it was cut from.
    pub offset: usize,
    pub low: Path,
    pub up: Path,
    /// Division points as offsets into `low` and `up`.
    pub division_low: Vec<usize>,
    pub division_up: Vec<usize>,
    pub divisors: Vec<Word>,
    pub cells: Vec<Cell>,
}

impl Digon {
    pub fn low_interval(&self) -> (usize, usize) {
        (self.offset, self.offset + self.low.len())
    }

    fn edges(&self, ball: &CayleyBall) -> Vec<(usize, usize)> {
        let mut out = path_edges(&self.low);
        out.extend(path_edges(&self.up));
        for (i, d) in self.divisors.iter().enumerate() {
            let mut at = self.low.vertices[self.division_low[i]];
            for &l in d.letters() {
                if let Some(n) = ball.neighbor(at, l) {
                    out.push(edge_key(at, n));
                    at = n;
                }
            }
        }
        out
    }
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

fn path_edges(p: &Path) -> Vec<(usize, usize)> {
    p.vertices.windows(2).map(|w| edge_key(w[0], w[1])).collect()
}

fn sub_path(p: &Path, from: usize, to: usize) -> Path {
    Path {
        start: p.vertices[from],
        labels: p.labels.slice(from, to),
        vertices: p.vertices[from..=to].to_vec(),
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct DigonDecomposition {
    pub digons: Vec<Digon>,
    /// Maximal common stretches as offset ranges.
    pub shared: Vec<(usize, usize)>,
    pub violations: Vec<Violation>,
}

/// Splits two geodesics with common endpoints into shared stretches and
/// digons, and recovers the cell structure of each digon.
pub fn decompose_digons(ball: &CayleyBall, first: &Path, second: &Path) -> Result<DigonDecomposition> {
    if first.len() != second.len() || first.start != second.start || first.end() != second.end() {
        return Err(Error::Lengths(
            "geodesics must have equal lengths and common endpoints".into(),
        ));
    }
    let len = first.len();
    let common: Vec<usize> = (0..=len).filter(|&i| first.vertices[i] == second.vertices[i]).collect();
    let mut out = DigonDecomposition::default();
    let mut shared_from = 0;
    for pair in common.windows(2) {
        let (i, j) = (pair[0], pair[1]);
        if j == i + 1 {
            continue;
        }
        if shared_from < i {
            out.shared.push((shared_from, i));
        }
        shared_from = j;
        let mut digon = Digon {
            offset: i,
            low: sub_path(first, i, j),
            up: sub_path(second, i, j),
            division_low: Vec::new(),
            division_up: Vec::new(),
            divisors: Vec::new(),
            cells: Vec::new(),
        };
        if !find_cells(ball, &mut digon) {
            out.violations.push(Violation::new(
                ViolationKind::CellStructure,
                format!(
                    "digon {} / {} has no decomposition into relator cells with divisors shorter than ℓ/8",
                    digon.low.labels, digon.up.labels
                ),
            ));
        }
        out.digons.push(digon);
    }
    if shared_from < len {
        out.shared.push((shared_from, len));
    }
    Ok(out)
}

/// Label words of all non-backtracking walks of length `< max_len` from `from`
/// to `to` inside the ball.
fn short_walks(ball: &CayleyBall, from: usize, to: usize, max_len: usize) -> Vec<Word> {
    let mut out = Vec::new();
    let mut stack = vec![(from, Vec::<Letter>::new())];
    while let Some((at, labels)) = stack.pop() {
        if at == to {
            out.push(Word::from_letters(labels.clone()));
        }
        if labels.len() + 1 >= max_len {
            continue;
        }
        for x in Letter::alphabet(ball.presentation.rank()) {
            if labels.last() == Some(&x.inverse()) {
                continue;
            }
            if let Some(n) = ball.neighbor(at, x) {
                let mut l = labels.clone();
                l.push(x);
                stack.push((n, l));
            }
        }
    }
    out.sort_by(|a, b| a.shortlex_cmp(b));
    out
}

// Search for a ladder of cells from the start of the digon to its end. States
// are division points (a, b) with a chosen divisor; a cell joins two states
// when the cycle low[a..a']·δ'·up[b..b']⁻¹·δ⁻¹ is a symmetrized element.
fn find_cells(ball: &CayleyBall, digon: &mut Digon) -> bool {
    let ell = ball.presentation.relator_length();
    let n = digon.low.len();
    // divisors must satisfy 8|δ| < ℓ
    let bound = ell.div_ceil(8);
    let mut states: Vec<(usize, usize, Word)> = vec![(0, 0, Word::empty())];
    for a in 1..n {
        for b in 1..n {
            for d in short_walks(ball, digon.low.vertices[a], digon.up.vertices[b], bound) {
                if !d.is_empty() {
                    states.push((a, b, d));
                }
            }
        }
    }
    states.push((n, n, Word::empty()));
    let target = states.len() - 1;
    let mut prev: Vec<Option<(usize, Word)>> = vec![None; states.len()];
    let mut seen = vec![false; states.len()];
    seen[0] = true;
    let mut queue = VecDeque::from([0usize]);
    while let Some(s) = queue.pop_front() {
        if s == target {
            break;
        }
        let (a, b, ref d) = states[s];
        for (t, (a2, b2, d2)) in states.iter().enumerate() {
            if seen[t] || *a2 < a || *b2 < b || (*a2, *b2) == (a, b) {
                continue;
            }
            if (a2 - a) + (b2 - b) + d.len() + d2.len() != ell {
                continue;
            }
            let cycle = digon
                .low
                .labels
                .slice(a, *a2)
                .concat(d2)
                .concat(&digon.up.labels.slice(b, *b2).invert())
                .concat(&d.invert());
            if ball.symmetrized.contains(cycle.letters()) {
                seen[t] = true;
                prev[t] = Some((s, cycle));
                queue.push_back(t);
            }
        }
    }
    if !seen[target] {
        return false;
    }
    let mut chain = Vec::new();
    let mut at = target;
    while let Some((p, cycle)) = prev[at].clone() {
        chain.push((p, at, cycle));
        at = p;
    }
    chain.reverse();
    for (p, t, cycle) in chain {
        let (a, b, _) = &states[p];
        let (a2, b2, d2) = &states[t];
        digon.cells.push(Cell {
            low: (*a, *a2),
            up: (*b, *b2),
            boundary: cycle,
        });
        if t != target {
            digon.division_low.push(*a2);
            digon.division_up.push(*b2);
            digon.divisors.push(d2.clone());
        }
    }
    true
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SingleLayerConfig {
    pub base: Path,
    pub digons: Vec<Digon>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SingleLayerReport {
    pub config: SingleLayerConfig,
    pub geodesic_count: usize,
    /// Every digon cut between the base and another geodesic.
    pub all_digons: Vec<Digon>,
    pub violations: Vec<Violation>,
}

/// Base geodesic from `u` to `v` plus digons covering every other geodesic,
/// computed in the translate that moves `u` to the identity.
pub fn single_layer(ball: &CayleyBall, u: usize, v: usize) -> Result<SingleLayerReport> {
    let g = relative_vertex(ball, u, v)?;
    Ok(single_layer_from_identity(ball, g))
}

fn single_layer_from_identity(ball: &CayleyBall, g: usize) -> SingleLayerReport {
    let ell = ball.presentation.relator_length();
    let geodesics = ball.geodesics_from_identity(g);
    let base = geodesics[0].clone();
    let mut violations = Vec::new();
    let mut all_digons = Vec::new();
    for other in &geodesics[1..] {
        let dec = decompose_digons(ball, &base, other).expect("geodesics share endpoints");
        violations.extend(dec.violations);
        all_digons.extend(dec.digons);
    }
    let mut pool: BTreeMap<(usize, usize), Digon> = BTreeMap::new();
    for d in &all_digons {
        pool.entry(d.low_interval()).or_insert_with(|| d.clone());
    }
    let overlap = |x: (usize, usize), y: (usize, usize)| x.1.min(y.1).saturating_sub(x.0.max(y.0));
    let mut chosen: Vec<(usize, usize)> = pool.keys().copied().collect();
    'merge: loop {
        for i in 0..chosen.len() {
            for j in i + 1..chosen.len() {
                let (x, y) = (chosen[i], chosen[j]);
                if 8 * overlap(x, y) >= ell {
                    let merged = (x.0.min(y.0), x.1.max(y.1));
                    if pool.contains_key(&merged) {
                        chosen.retain(|&c| c != x && c != y);
                        chosen.push(merged);
                        chosen.sort();
                        chosen.dedup();
                        continue 'merge;
                    }
                    violations.push(Violation::new(
                        ViolationKind::Overlap,
                        format!(
                            "lower sides {:?} and {:?} of the geodesic {} overlap in at least ℓ/8 edges but their union is not the lower side of a digon",
                            x, y, base.labels
                        ),
                    ));
                    chosen.remove(j);
                    continue 'merge;
                }
            }
        }
        break;
    }
    for i in 0..chosen.len() {
        for j in i + 2..chosen.len() {
            if overlap(chosen[i], chosen[j]) > 0 {
                violations.push(Violation::new(
                    ViolationKind::Overlap,
                    format!(
                        "non-consecutive digons {:?} and {:?} on {} intersect",
                        chosen[i], chosen[j], base.labels
                    ),
                ));
            }
        }
    }
    let digons: Vec<Digon> = chosen.iter().map(|k| pool[k].clone()).collect();
    let mut covered: HashSet<(usize, usize)> = path_edges(&base).into_iter().collect();
    for d in &digons {
        covered.extend(d.edges(ball));
    }
    for geo in &geodesics {
        if path_edges(geo).iter().any(|e| !covered.contains(e)) {
            violations.push(Violation::new(
                ViolationKind::Coverage,
                format!(
                    "geodesic {} leaves the union of the base {} and its digons",
                    geo.labels, base.labels
                ),
            ));
        }
    }
    SingleLayerReport {
        config: SingleLayerConfig { base, digons },
        geodesic_count: geodesics.len(),
        all_digons,
        violations,
    }
}

/// Vertices of `base` nearest to `c`.
pub fn distance_minimizers(ball: &CayleyBall, base: &Path, c: usize) -> Result<Vec<usize>> {
    let dist = ball.bfs_distances(c);
    minimizers_with(ball, base, c, &dist)
}

// Ball distance from c to a equals the true distance whenever
// |a| + |c| + d_ball(a, c) ≤ 2R: every geodesic then stays in the ball.
fn minimizers_with(ball: &CayleyBall, base: &Path, c: usize, dist: &[u32]) -> Result<Vec<usize>> {
    let mut best = u32::MAX;
    let mut out = Vec::new();
    for &a in &base.vertices {
        let d = dist[a];
        if d == u32::MAX || ball.distance(a) + ball.distance(c) + d as usize > 2 * ball.radius {
            return Err(Error::Unreliable(format!(
                "distance from {} to {} is not certified inside the ball",
                ball.word(c),
                ball.word(a)
            )));
        }
        if d < best {
            best = d;
            out.clear();
        }
        if d == best {
            out.push(a);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SideReport {
    pub lower_sides: usize,
    pub cells_checked: usize,
    pub violations: Vec<Violation>,
}

/// Upper sides must be functions of lower sides (up to translation), and
/// both long arcs of every cell must exceed ℓ/4.
pub fn digon_side_uniqueness(ball: &CayleyBall, digons: &[Digon]) -> SideReport {
    let ell = ball.presentation.relator_length();
    let mut groups: BTreeMap<Vec<Letter>, Vec<&Word>> = BTreeMap::new();
    let mut report = SideReport::default();
    for d in digons {
        let ups = groups.entry(d.low.labels.letters().to_vec()).or_default();
        if !ups.contains(&&d.up.labels) {
            ups.push(&d.up.labels);
        }
        for cell in &d.cells {
            report.cells_checked += 1;
            let (low, up) = (cell.low.1 - cell.low.0, cell.up.1 - cell.up.0);
            if 4 * low <= ell || 4 * up <= ell {
                report.violations.push(Violation::new(
                    ViolationKind::LongSegments,
                    format!(
                        "cell {} of digon {} / {} has arcs of lengths {low} and {up}, not both above ℓ/4",
                        cell.boundary, d.low.labels, d.up.labels
                    ),
                ));
            }
        }
    }
    report.lower_sides = groups.len();
    for (low, ups) in groups {
        if ups.len() > 1 {
            report.violations.push(Violation::new(
                ViolationKind::SideUniqueness,
                format!(
                    "lower side {} has {} upper sides: {}",
                    Word::from_letters(low),
                    ups.len(),
                    ups.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(", ")
                ),
            ));
        }
    }
    report
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct VerifyChecks {
    pub single_layer: bool,
    pub minimizers: bool,
    pub digons: bool,
}

impl VerifyChecks {
    pub fn all() -> VerifyChecks {
        VerifyChecks {
            single_layer: true,
            minimizers: true,
            digons: true,
        }
    }

    pub fn parse(list: &str) -> Result<VerifyChecks> {
        let mut checks = VerifyChecks {
            single_layer: false,
            minimizers: false,
            digons: false,
        };
        for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item {
                "single-layer" => checks.single_layer = true,
                "minimizers" => checks.minimizers = true,
                "digons" => checks.digons = true,
                other => return Err(Error::InvalidParams(format!("unknown check `{other}`"))),
            }
        }
        Ok(checks)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct BallReport {
    pub vertices: usize,
    pub pairs_checked: usize,
    pub minimizer_checks: usize,
    pub unreliable_skipped: usize,
    pub violations: Vec<Violation>,
    pub digon_count: usize,
    pub max_divisor_len: usize,
    pub max_minimizers: usize,
}

/// Exhaustive scan over all pairs `(u, v)` with reliable distances, taken up
/// to left translation: one pair `(1, g)` per `g` with `|g| ≤ R − 1`.
/// Minimizers are checked for every such base against every `c` with
/// `|c| ≤ R − 1` whose distances are certified.
pub fn verify_ball(ball: &CayleyBall, checks: VerifyChecks) -> BallReport {
    let limit = ball.reliable_limit();
    let targets: Vec<usize> = ball.within(limit).skip(1).collect();
    let layers: Vec<SingleLayerReport> = targets
        .par_iter()
        .map(|&g| single_layer_from_identity(ball, g))
        .collect();
    let mut report = BallReport {
        vertices: ball.vertex_count(),
        pairs_checked: targets.len(),
        ..BallReport::default()
    };
    let mut digons = Vec::new();
    for l in &layers {
        if checks.single_layer {
            report.violations.extend(l.violations.iter().cloned());
        } else if checks.digons {
            report.violations.extend(
                l.violations
                    .iter()
                    .filter(|v| v.kind == ViolationKind::CellStructure)
                    .cloned(),
            );
        }
        digons.extend(l.all_digons.iter().cloned());
    }
    report.digon_count = digons.len();
    report.max_divisor_len = digons
        .iter()
        .flat_map(|d| d.divisors.iter().map(Word::len))
        .max()
        .unwrap_or(0);
    if checks.digons {
        report.violations.extend(digon_side_uniqueness(ball, &digons).violations);
    }
    if checks.minimizers {
        let bases: Vec<&Path> = layers.iter().map(|l| &l.config.base).collect();
        let per_c: Vec<(usize, usize, usize, Vec<Violation>)> = ball
            .within(limit)
            .into_par_iter()
            .map(|c| {
                let dist = ball.bfs_distances(c);
                let (mut checked, mut skipped, mut most) = (0, 0, 0);
                let mut bad = Vec::new();
                for base in &bases {
                    match minimizers_with(ball, base, c, &dist) {
                        Ok(m) => {
                            checked += 1;
                            most = most.max(m.len());
                            if m.len() > 2 {
                                bad.push(Violation::new(
                                    ViolationKind::Minimizers,
                                    format!(
                                        "{} points of the geodesic {} minimize the distance to {}",
                                        m.len(),
                                        base.labels,
                                        ball.word(c)
                                    ),
                                ));
                            }
                        }
                        Err(_) => skipped += 1,
                    }
                }
                (checked, skipped, most, bad)
            })
            .collect();
        for (checked, skipped, most, bad) in per_c {
            report.minimizer_checks += checked;
            report.unreliable_skipped += skipped;
            report.max_minimizers = report.max_minimizers.max(most);
            report.violations.extend(bad);
        }
    }
    report
}

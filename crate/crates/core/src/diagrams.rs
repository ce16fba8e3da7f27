//! Van Kampen diagrams as combinatorial maps, their construction from Dehn
//! traces, and counting bounds for abstract diagram families.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_bigint::BigUint;
use num_rational::Rational64;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::cancellation::{symmetrize, DehnSolver, SymmetrizedSet};
use crate::error::{Error, Result};
use crate::words::{Letter, Presentation, Word};

/// An edge read from `from` to `to` spells `label`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub label: Letter,
}

/// Dart `2e` runs along edge `e`, dart `2e + 1` against it.
pub type Dart = usize;

fn rev(d: Dart) -> Dart {
    d ^ 1
}

/// Planar diagram stored as a rotation system: `rotation[v]` lists the darts
/// leaving `v` in counterclockwise order. Each face is the dart cycle that
/// keeps the face on its left; the outer boundary is the remaining cycle.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VanKampenDiagram {
    pub vertices: usize,
    pub edges: Vec<Edge>,
    pub faces: Vec<Vec<Dart>>,
    /// Faces with equal numbers bear the same relator.
    pub numbering: Vec<usize>,
    pub base: usize,
    /// First dart of the boundary reading; `None` for a single vertex.
    pub base_dart: Option<Dart>,
    pub rotation: Vec<Vec<Dart>>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct DiagramReport {
    pub valid: bool,
    pub problems: Vec<String>,
}

impl VanKampenDiagram {
    /// The trivial diagram: one vertex, no edges.
    pub fn point() -> VanKampenDiagram {
        VanKampenDiagram {
            vertices: 1,
            edges: Vec::new(),
            faces: Vec::new(),
            numbering: Vec::new(),
            base: 0,
            base_dart: None,
            rotation: vec![Vec::new()],
        }
    }

    pub fn tail(&self, d: Dart) -> usize {
        let e = &self.edges[d / 2];
        if d % 2 == 0 { e.from } else { e.to }
    }

    pub fn head(&self, d: Dart) -> usize {
        self.tail(rev(d))
    }

    pub fn label(&self, d: Dart) -> Letter {
        let l = self.edges[d / 2].label;
        if d % 2 == 0 { l } else { l.inverse() }
    }

    pub fn read(&self, darts: &[Dart]) -> Word {
        Word::from_letters(darts.iter().map(|&d| self.label(d)).collect())
    }

    fn dart_count(&self) -> usize {
        2 * self.edges.len()
    }

    // σ⁻¹(rev d): the next dart along the face on the left of d
    fn successors(&self) -> Option<Vec<Dart>> {
        let mut pos = vec![usize::MAX; self.dart_count()];
        for v in 0..self.vertices {
            for (i, &d) in self.rotation.get(v)?.iter().enumerate() {
                if d >= self.dart_count() || self.tail(d) != v || pos[d] != usize::MAX {
                    return None;
                }
                pos[d] = i;
            }
        }
        if pos.iter().any(|&p| p == usize::MAX) {
            return None;
        }
        Some(
            (0..self.dart_count())
                .map(|d| {
                    let r = rev(d);
                    let around = &self.rotation[self.tail(r)];
                    around[(pos[r] + around.len() - 1) % around.len()]
                })
                .collect(),
        )
    }

    /// All face cycles of the rotation system, each starting at its least dart.
    pub fn orbits(&self) -> Vec<Vec<Dart>> {
        let Some(next) = self.successors() else {
            return Vec::new();
        };
        let mut seen = vec![false; next.len()];
        let mut out = Vec::new();
        for start in 0..next.len() {
            if seen[start] {
                continue;
            }
            let mut cycle = Vec::new();
            let mut d = start;
            while !seen[d] {
                seen[d] = true;
                cycle.push(d);
                d = next[d];
            }
            out.push(cycle);
        }
        out
    }

    /// Darts of the outer boundary, starting at the base dart.
    pub fn boundary_darts(&self) -> Vec<Dart> {
        let Some(bd) = self.base_dart else {
            return Vec::new();
        };
        let Some(next) = self.successors() else {
            return Vec::new();
        };
        let mut out = vec![bd];
        let mut d = next[bd];
        while d != bd {
            out.push(d);
            d = next[d];
        }
        out
    }

    pub fn boundary_word(&self) -> Word {
        self.read(&self.boundary_darts())
    }

    pub fn boundary_length(&self) -> usize {
        self.boundary_darts().len()
    }

    pub fn face_word(&self, f: usize) -> Word {
        self.read(&self.faces[f])
    }

    fn connected(&self) -> bool {
        let mut parent: Vec<usize> = (0..self.vertices).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            p[x] = r;
            r
        }
        for e in &self.edges {
            let (a, b) = (find(&mut parent, e.from), find(&mut parent, e.to));
            parent[a] = b;
        }
        let root = find(&mut parent, 0);
        (0..self.vertices).all(|v| find(&mut parent, v) == root)
    }

    /// Structural and labelling checks; every failure becomes a report line.
    pub fn verify(&self, p: &Presentation) -> DiagramReport {
        let sym = symmetrize(p);
        self.verify_with(p.rank(), &sym)
    }

    fn verify_with(&self, rank: usize, sym: &SymmetrizedSet) -> DiagramReport {
        let mut problems = Vec::new();
        if self.vertices == 0 {
            problems.push("diagram has no vertices".to_string());
            return DiagramReport { valid: false, problems };
        }
        for (i, e) in self.edges.iter().enumerate() {
            if e.from >= self.vertices || e.to >= self.vertices {
                problems.push(format!("edge {} has an endpoint outside the vertex range", i + 1));
            }
            if e.label.generator() > rank {
                problems.push(format!("edge {} is labelled by a generator outside the rank", i + 1));
            }
        }
        if !problems.is_empty() {
            return DiagramReport { valid: false, problems };
        }
        if self.base >= self.vertices {
            problems.push("base vertex out of range".into());
        }
        if !self.connected() {
            problems.push("diagram is not connected".into());
        }
        if self.numbering.len() != self.faces.len() {
            problems.push("face numbering does not cover every face".into());
        }
        let Some(next) = self.successors() else {
            problems.push("rotation system does not list every dart exactly once at its tail".into());
            return DiagramReport { valid: false, problems };
        };
        let mut used = vec![false; self.dart_count()];
        for (f, face) in self.faces.iter().enumerate() {
            if face.is_empty() {
                problems.push(format!("face {} is empty", f + 1));
                continue;
            }
            for (i, &d) in face.iter().enumerate() {
                if d >= self.dart_count() {
                    problems.push(format!("face {} refers to a missing edge", f + 1));
                    continue;
                }
                let nx = face[(i + 1) % face.len()];
                if nx < self.dart_count() && self.head(d) != self.tail(nx) {
                    problems.push(format!("face {} is not a closed path at position {}", f + 1, i + 1));
                } else if nx < self.dart_count() && next[d] != nx {
                    problems.push(format!("face {} disagrees with the rotation system at position {}", f + 1, i + 1));
                }
                if used[d] {
                    problems.push(format!("a dart is used twice (face {})", f + 1));
                }
                used[d] = true;
            }
            let word = self.face_word(f);
            if !sym.contains(word.letters()) {
                problems.push(format!("face {} reads {word}, which is not a relator up to rotation and inversion", f + 1));
            }
        }
        let orbits = self.orbits();
        let free: Vec<&Vec<Dart>> = orbits.iter().filter(|o| o.iter().all(|&d| !used[d])).collect();
        if !self.edges.is_empty() && (orbits.len() != self.faces.len() + 1 || free.len() != 1) {
            problems.push(format!(
                "expected exactly one boundary cycle besides the {} faces, found {} cycles",
                self.faces.len(),
                orbits.len()
            ));
        }
        let euler = self.vertices as i64 - self.edges.len() as i64 + self.faces.len() as i64;
        if euler != 1 {
            problems.push(format!("V - E + F = {euler}, expected 1 for a disc"));
        }
        match (self.base_dart, free.first()) {
            (Some(bd), Some(outer)) => {
                if bd >= self.dart_count() || !outer.contains(&bd) {
                    problems.push("base dart is not on the outer boundary".into());
                } else if self.tail(bd) != self.base {
                    problems.push("base dart does not start at the base vertex".into());
                }
            }
            (None, _) if !self.edges.is_empty() => problems.push("missing base dart".into()),
            _ => {}
        }
        DiagramReport {
            valid: problems.is_empty(),
            problems,
        }
    }
}

pub fn verify_diagram(d: &VanKampenDiagram, p: &Presentation) -> DiagramReport {
    d.verify(p)
}

pub fn boundary_word(d: &VanKampenDiagram) -> Word {
    d.boundary_word()
}

/// Same combinatorics without labels.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AbstractDiagram {
    pub vertices: usize,
    pub edges: Vec<(usize, usize)>,
    pub faces: Vec<Vec<Dart>>,
    pub numbering: Vec<usize>,
    pub base: usize,
    /// Starting dart of each face; faces are oriented by their dart order.
    pub face_starts: Vec<Dart>,
}

impl VanKampenDiagram {
    pub fn to_abstract(&self) -> AbstractDiagram {
        AbstractDiagram {
            vertices: self.vertices,
            edges: self.edges.iter().map(|e| (e.from, e.to)).collect(),
            faces: self.faces.clone(),
            numbering: self.numbering.clone(),
            base: self.base,
            face_starts: self.faces.iter().map(|f| f.first().copied().unwrap_or(0)).collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct EdgeJson {
    from: usize,
    to: usize,
    label: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct DiagramJson {
    vertices: usize,
    edges: Vec<EdgeJson>,
    faces: Vec<Vec<i64>>,
    base: usize,
    numbering: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rotation: Option<Vec<Vec<i64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    base_edge: Option<i64>,
}

fn dart_ref(d: Dart) -> i64 {
    let e = (d / 2 + 1) as i64;
    if d % 2 == 0 { e } else { -e }
}

fn dart_from_ref(r: i64, edges: usize) -> Result<Dart> {
    let e = r.unsigned_abs() as usize;
    if r == 0 || e > edges {
        return Err(Error::Diagram(format!("edge reference {r} out of range")));
    }
    Ok(2 * (e - 1) + usize::from(r < 0))
}

impl VanKampenDiagram {
    /// JSON with 1-based signed edge references (`-k` runs edge `k` backwards).
    pub fn to_json(&self) -> String {
        let j = DiagramJson {
            vertices: self.vertices,
            edges: self
                .edges
                .iter()
                .map(|e| EdgeJson {
                    from: e.from,
                    to: e.to,
                    label: e.label.to_string(),
                })
                .collect(),
            faces: self.faces.iter().map(|f| f.iter().map(|&d| dart_ref(d)).collect()).collect(),
            base: self.base,
            numbering: self.numbering.clone(),
            rotation: Some(self.rotation.iter().map(|r| r.iter().map(|&d| dart_ref(d)).collect()).collect()),
            base_edge: self.base_dart.map(dart_ref),
        };
        serde_json::to_string_pretty(&j).expect("diagram serializes")
    }

    /// Reads the JSON form. Without an explicit rotation, each vertex's
    /// cyclic order is recovered from the faces; this needs the face
    /// constraints to leave at most two gaps per vertex.
    pub fn from_json(text: &str) -> Result<VanKampenDiagram> {
        let j: DiagramJson = serde_json::from_str(text).map_err(|e| Error::Diagram(e.to_string()))?;
        let mut edges = Vec::with_capacity(j.edges.len());
        for e in &j.edges {
            let mut chars = e.label.chars();
            let label = match (chars.next().and_then(Letter::from_char), chars.next()) {
                (Some(l), None) => l,
                _ => return Err(Error::Diagram(format!("bad edge label `{}`", e.label))),
            };
            if e.from >= j.vertices || e.to >= j.vertices {
                return Err(Error::Diagram("edge endpoint out of range".into()));
            }
            edges.push(Edge { from: e.from, to: e.to, label });
        }
        let n = edges.len();
        let faces = j
            .faces
            .iter()
            .map(|f| f.iter().map(|&r| dart_from_ref(r, n)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let mut d = VanKampenDiagram {
            vertices: j.vertices,
            edges,
            faces,
            numbering: j.numbering,
            base: j.base,
            base_dart: None,
            rotation: Vec::new(),
        };
        d.rotation = match j.rotation {
            Some(rot) => rot
                .iter()
                .map(|r| r.iter().map(|&x| dart_from_ref(x, n)).collect::<Result<Vec<_>>>())
                .collect::<Result<Vec<_>>>()?,
            None => d.rotation_from_faces()?,
        };
        d.base_dart = match j.base_edge {
            Some(r) => Some(dart_from_ref(r, n)?),
            None => d.default_base_dart(),
        };
        Ok(d)
    }

    // least outer-boundary dart leaving the base vertex
    fn default_base_dart(&self) -> Option<Dart> {
        let used: BTreeSet<Dart> = self.faces.iter().flatten().copied().collect();
        self.orbits()
            .into_iter()
            .find(|o| o.iter().all(|d| !used.contains(d)))?
            .into_iter()
            .filter(|&d| self.tail(d) == self.base)
            .min()
    }

    // A face ... d, d' ... forces σ(d') = rev(d). The forced links at a
    // vertex form chains; one or two chains close into a unique cycle.
    fn rotation_from_faces(&self) -> Result<Vec<Vec<Dart>>> {
        let mut succ: HashMap<Dart, Dart> = HashMap::new();
        for face in &self.faces {
            for (i, &d) in face.iter().enumerate() {
                let nx = face[(i + 1) % face.len()];
                if succ.insert(nx, rev(d)).is_some() {
                    return Err(Error::Diagram("a dart is used twice by the faces".into()));
                }
            }
        }
        let mut out = Vec::with_capacity(self.vertices);
        for v in 0..self.vertices {
            let darts: Vec<Dart> = (0..self.dart_count()).filter(|&d| self.tail(d) == v).collect();
            if darts.is_empty() {
                out.push(Vec::new());
                continue;
            }
            if darts.iter().any(|d| succ.get(d).is_some_and(|s| self.tail(*s) != v)) {
                return Err(Error::Diagram(format!("face is not a closed path at vertex {v}")));
            }
            let has_pred: BTreeSet<Dart> = darts.iter().filter_map(|d| succ.get(d)).copied().collect();
            let mut chains: Vec<Vec<Dart>> = Vec::new();
            for &start in darts.iter().filter(|d| !has_pred.contains(d)) {
                let mut chain = vec![start];
                let mut at = start;
                while let Some(&n) = succ.get(&at) {
                    chain.push(n);
                    at = n;
                }
                chains.push(chain);
            }
            if chains.is_empty() {
                // all links known: a single cycle
                let mut cycle = vec![darts[0]];
                let mut at = succ[&darts[0]];
                while at != darts[0] {
                    cycle.push(at);
                    at = succ[&at];
                }
                if cycle.len() != darts.len() {
                    return Err(Error::Diagram(format!("faces split the darts at vertex {v} into several cycles")));
                }
                out.push(cycle);
                continue;
            }
            if chains.len() > 2 {
                return Err(Error::Diagram(format!(
                    "vertex {v} needs an explicit rotation: the faces leave {} gaps",
                    chains.len()
                )));
            }
            let cycle: Vec<Dart> = chains.concat();
            if cycle.len() != darts.len() {
                return Err(Error::Diagram(format!("inconsistent face links at vertex {v}")));
            }
            out.push(cycle);
        }
        Ok(out)
    }
}

impl VanKampenDiagram {
    fn face_of_dart(&self) -> Vec<Option<usize>> {
        let mut owner = vec![None; self.dart_count()];
        for (f, face) in self.faces.iter().enumerate() {
            for &d in face {
                owner[d] = Some(f);
            }
        }
        owner
    }

    fn face_read_from(&self, f: usize, d: Dart) -> Vec<Letter> {
        let face = &self.faces[f];
        let at = face.iter().position(|&x| x == d).unwrap_or(0);
        face[at..].iter().chain(&face[..at]).map(|&x| self.label(x)).collect()
    }

    /// A pair of distinct faces across an edge whose readings from that
    /// edge are mutually inverse, i.e. mirror images that would cancel.
    pub fn cancelling_pair(&self) -> Option<(usize, usize)> {
        let owner = self.face_of_dart();
        for e in 0..self.edges.len() {
            let (Some(f1), Some(f2)) = (owner[2 * e], owner[2 * e + 1]) else {
                continue;
            };
            if f1 == f2 {
                continue;
            }
            let w1 = self.face_read_from(f1, 2 * e);
            let w2 = self.face_read_from(f2, 2 * e + 1);
            if w1.len() != w2.len() || w1.is_empty() {
                continue;
            }
            let inv: Vec<Letter> = w1.iter().rev().map(|l| l.inverse()).collect();
            let n = inv.len();
            let rotated: Vec<Letter> = inv[n - 1..].iter().chain(&inv[..n - 1]).copied().collect();
            if rotated == w2 {
                return Some((f1.min(f2), f1.max(f2)));
            }
        }
        None
    }

    pub fn is_reduced(&self) -> bool {
        self.cancelling_pair().is_none()
    }
}

pub fn is_reduced(d: &VanKampenDiagram) -> bool {
    d.is_reduced()
}

/// Faces glued along vertices or edges, with the cells they span.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Component {
    pub faces: Vec<usize>,
    pub vertices: Vec<usize>,
    pub edges: Vec<usize>,
}

/// Components joined by bridges: maximal paths of edges on no face whose
/// inner vertices have degree two.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FilamentDecomposition {
    pub components: Vec<Component>,
    pub bridges: Vec<Vec<usize>>,
}

impl FilamentDecomposition {
    pub fn bridge_lengths(&self) -> Vec<usize> {
        self.bridges.iter().map(Vec::len).collect()
    }
}

pub fn filament_decomposition(d: &VanKampenDiagram) -> FilamentDecomposition {
    let owner = d.face_of_dart();
    let on_face = |e: usize| owner[2 * e].is_some() || owner[2 * e + 1].is_some();
    let mut parent: Vec<usize> = (0..d.faces.len()).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        p[x] = r;
        r
    }
    let mut face_at_vertex: Vec<Option<usize>> = vec![None; d.vertices];
    for (f, face) in d.faces.iter().enumerate() {
        for &dart in face {
            let v = d.tail(dart);
            match face_at_vertex[v] {
                Some(g) => {
                    let (a, b) = (find(&mut parent, f), find(&mut parent, g));
                    parent[a] = b;
                }
                None => face_at_vertex[v] = Some(f),
            }
        }
    }
    let mut groups: BTreeMap<usize, Component> = BTreeMap::new();
    for f in 0..d.faces.len() {
        let root = find(&mut parent, f);
        let c = groups.entry(root).or_insert_with(|| Component {
            faces: Vec::new(),
            vertices: Vec::new(),
            edges: Vec::new(),
        });
        c.faces.push(f);
        for &dart in &d.faces[f] {
            c.vertices.push(d.tail(dart));
            c.edges.push(dart / 2);
        }
    }
    let mut components: Vec<Component> = groups.into_values().collect();
    for c in &mut components {
        c.vertices.sort_unstable();
        c.vertices.dedup();
        c.edges.sort_unstable();
        c.edges.dedup();
    }
    components.sort_by_key(|c| c.faces[0]);

    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); d.vertices];
    for (e, edge) in d.edges.iter().enumerate() {
        incident[edge.from].push(e);
        if edge.to != edge.from {
            incident[edge.to].push(e);
        }
    }
    let inner = |v: usize| face_at_vertex[v].is_none() && incident[v].len() == 2;
    let other_end = |e: usize, v: usize| {
        let edge = &d.edges[e];
        if edge.from == v { edge.to } else { edge.from }
    };
    let mut taken = vec![false; d.edges.len()];
    let mut bridges = Vec::new();
    for start in 0..d.edges.len() {
        if taken[start] || on_face(start) {
            continue;
        }
        taken[start] = true;
        let mut chain = std::collections::VecDeque::from([start]);
        for (mut v, forward) in [(d.edges[start].to, true), (d.edges[start].from, false)] {
            let mut last = start;
            while inner(v) {
                let Some(&e) = incident[v].iter().find(|&&e| e != last && !taken[e]) else {
                    break;
                };
                taken[e] = true;
                if forward { chain.push_back(e) } else { chain.push_front(e) }
                v = other_end(e, v);
                last = e;
            }
        }
        bridges.push(chain.into_iter().collect());
    }
    FilamentDecomposition { components, bridges }
}

/// Whether `|∂D| > f·ℓ·(1 - 2d - ε)` for a diagram with `f` faces over
/// relators of length `ℓ`.
pub fn isoperimetric_check(d: &VanKampenDiagram, relator_length: usize, density: Rational64, epsilon: Rational64) -> bool {
    let rhs = Rational64::from_integer((d.faces.len() * relator_length) as i64)
        * (Rational64::one() - Rational64::from_integer(2) * density - epsilon);
    Rational64::from_integer(d.boundary_length() as i64) > rhs
}

// Free reduction recording where each cancelling pair sat at the moment
// it was removed.
fn reduce_recording(letters: &[Letter]) -> (Vec<Letter>, Vec<(usize, Letter)>) {
    let mut stack: Vec<Letter> = Vec::with_capacity(letters.len());
    let mut removed = Vec::new();
    for &l in letters {
        if stack.last() == Some(&l.inverse()) {
            let top = stack.pop().expect("nonempty");
            removed.push((stack.len(), top));
        } else {
            stack.push(l);
        }
    }
    (stack, removed)
}

struct Builder {
    d: VanKampenDiagram,
    boundary: Vec<Dart>,
}

impl Builder {
    fn add_vertex(&mut self) -> usize {
        self.d.vertices += 1;
        self.d.rotation.push(Vec::new());
        self.d.vertices - 1
    }

    fn add_edge(&mut self, from: usize, to: usize, label: Letter) -> Dart {
        self.d.edges.push(Edge { from, to, label });
        2 * (self.d.edges.len() - 1)
    }

    fn insert_after(&mut self, anchor: Dart, new: &[Dart]) {
        let v = self.d.tail(anchor);
        let at = self.d.rotation[v].iter().position(|&x| x == anchor).expect("anchor in rotation");
        for (k, &n) in new.iter().enumerate() {
            self.d.rotation[v].insert(at + 1 + k, n);
        }
    }

    fn insert_before(&mut self, anchor: Dart, new: Dart) {
        let v = self.d.tail(anchor);
        let at = self.d.rotation[v].iter().position(|&x| x == anchor).expect("anchor in rotation");
        self.d.rotation[v].insert(at, new);
    }

    fn gap_vertex(&self, j: usize) -> usize {
        if self.boundary.is_empty() {
            self.d.base
        } else {
            self.d.tail(self.boundary[j % self.boundary.len()])
        }
    }

    // undoes one free cancellation: a spike x·x⁻¹ at boundary position j
    fn spike(&mut self, j: usize, x: Letter) {
        let p = self.gap_vertex(j);
        let n = self.add_vertex();
        let s = self.add_edge(p, n, x);
        self.d.rotation[n].push(rev(s));
        if self.boundary.is_empty() {
            self.d.rotation[p].push(s);
        } else {
            let after = self.boundary[j % self.boundary.len()];
            self.insert_after(after, &[s]);
        }
        self.boundary.splice(j..j, [s, rev(s)]);
    }

    // undoes a Dehn step: the boundary reads v⁻¹ on [i, i + m) and gains a
    // face reading (u·v)⁻¹, leaving u on the boundary instead
    fn attach(&mut self, i: usize, m: usize, u: &[Letter], number: usize) {
        let len = self.boundary.len();
        let p = self.gap_vertex(i);
        let q = if m > 0 { self.d.head(self.boundary[i + m - 1]) } else { p };
        let k = u.len();
        let mut path = Vec::with_capacity(k);
        let mut at = p;
        for (j, &l) in u.iter().enumerate() {
            let to = if j + 1 == k { q } else { self.add_vertex() };
            let dart = self.add_edge(at, to, l);
            if j > 0 {
                self.d.rotation[at].push(rev(path[j - 1]));
                self.d.rotation[at].push(dart);
            }
            path.push(dart);
            at = to;
        }
        let (first, last) = (path[0], path[k - 1]);
        if len == 0 {
            self.d.rotation[p].extend([first, rev(last)]);
        } else if m == 0 {
            self.insert_after(self.boundary[i % len], &[rev(last), first]);
        } else if m == len {
            self.insert_after(self.boundary[0], &[first, rev(last)]);
        } else {
            self.insert_after(self.boundary[(i + m) % len], &[rev(last)]);
            self.insert_before(rev(self.boundary[(i + len - 1) % len]), first);
        }
        let mut face: Vec<Dart> = self.boundary[i..i + m].to_vec();
        face.extend(path.iter().rev().map(|&x| rev(x)));
        self.d.faces.push(face);
        self.d.numbering.push(number);
        self.boundary.splice(i..i + m, path);
    }
}

/// Replays Dehn's algorithm on a trivial word backwards, gluing one face
/// per step and one spike per free cancellation. The boundary, read from
/// the base, is exactly `w`.
pub fn diagram_from_dehn_trace(w: &Word, solver: &DehnSolver) -> Result<VanKampenDiagram> {
    let trace = solver.reduce(w);
    if !trace.result.is_empty() {
        return Err(Error::NontrivialWord);
    }
    let sym = solver.symmetrized();
    let (mut current, first) = reduce_recording(w.letters());
    let mut stages = Vec::with_capacity(trace.steps.len());
    for step in &trace.steps {
        let r = sym.elements()[step.element].letters();
        let v_inv: Vec<Letter> = r[step.length..].iter().rev().map(|l| l.inverse()).collect();
        let mut next = current[..step.position].to_vec();
        next.extend_from_slice(&v_inv);
        next.extend_from_slice(&current[step.position + step.length..]);
        let (reduced, removed) = reduce_recording(&next);
        stages.push((*step, removed));
        current = reduced;
    }
    let mut b = Builder {
        d: VanKampenDiagram::point(),
        boundary: Vec::new(),
    };
    for (step, removed) in stages.iter().rev() {
        for &(j, x) in removed.iter().rev() {
            b.spike(j, x);
        }
        let r = sym.elements()[step.element].letters();
        let number = sym.origin(step.element).relator;
        b.attach(step.position, r.len() - step.length, &r[..step.length], number);
    }
    for &(j, x) in first.iter().rev() {
        b.spike(j, x);
    }
    b.d.base_dart = b.boundary.first().copied();
    Ok(b.d)
}

/// Parameters of the diagram counting bounds. `k` bounds the lengths of the
/// witnesses, `r` their number, `f` the faces, `q` the boundary pieces and
/// `n_rel` the distinct relators.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BoundsParams {
    pub k: u64,
    pub r: u64,
    #[serde(serialize_with = "ser_ratio")]
    pub d: Rational64,
    #[serde(serialize_with = "ser_ratio")]
    pub epsilon: Rational64,
    pub f: u64,
    pub q: u64,
    pub n_rel: u64,
    pub rank: usize,
    pub length: u64,
}

fn ser_ratio<S: serde::Serializer>(x: &Rational64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&x.to_string())
}

impl Default for BoundsParams {
    fn default() -> BoundsParams {
        BoundsParams {
            k: 10,
            r: 3,
            d: Rational64::new(1, 16),
            epsilon: Rational64::new(1, 16),
            f: 1,
            q: 3,
            n_rel: 1,
            rank: 2,
            length: 50,
        }
    }
}

/// Largest `f` with `f < K·r/(1 - 2d - ε)`.
pub fn face_bound(p: &BoundsParams) -> Result<u64> {
    let den = Rational64::one() - Rational64::from_integer(2) * p.d - p.epsilon;
    if den <= Rational64::zero() {
        return Err(Error::InvalidParams(format!("1 - 2d - ε = {den} must be positive")));
    }
    let x = Rational64::from_integer((p.k * p.r) as i64) / den;
    let fl = x.floor().to_integer();
    let f = if x.is_integer() { fl - 1 } else { fl };
    Ok(f.max(0) as u64)
}

/// Stirling numbers of the second kind.
pub fn stirling(f: u64, n: u64) -> BigUint {
    if n > f {
        return BigUint::zero();
    }
    let n = n as usize;
    let mut row = vec![BigUint::zero(); n + 1];
    row[0] = BigUint::one();
    for m in 1..=f as usize {
        for j in (1..=n.min(m)).rev() {
            row[j] = &row[j] * BigUint::from(j) + &row[j - 1];
        }
        row[0] = BigUint::zero();
    }
    row[n].clone()
}

/// `2^{10f}`.
pub fn planar_graph_bound(f: u64) -> BigUint {
    BigUint::one() << (10 * f as usize)
}

fn advk_base(p: &BoundsParams) -> BigUint {
    BigUint::from(p.k) * BigUint::from(8192u32) * BigUint::from(p.length).pow(7)
}

/// `(K·2¹³·ℓ⁷)^{f+2q}·S(f, n_rel)`.
pub fn advk_count_bound(p: &BoundsParams) -> BigUint {
    advk_base(p).pow((p.f + 2 * p.q) as u32) * stirling(p.f, p.n_rel)
}

/// Sum of the count bound over `1 ≤ n_rel ≤ f ≤ face_bound`.
pub fn advk_total_bound(p: &BoundsParams) -> Result<BigUint> {
    let top = face_bound(p)?;
    let base = advk_base(p);
    let mut power = base.pow((2 * p.q) as u32);
    let mut total = BigUint::zero();
    for f in 1..=top {
        power *= &base;
        let partitions: BigUint = (1..=f).map(|n| stirling(f, n)).sum();
        total += &power * partitions;
    }
    Ok(total)
}

/// Natural logarithm of a big integer.
pub fn ln_big(x: &BigUint) -> f64 {
    let bits = x.bits();
    let shift = bits.saturating_sub(64);
    let top = (x >> shift).to_f64().unwrap_or(f64::NAN);
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// `ln` of `advk_total_bound / (2·rank - 1)^{ℓ(1/2 - d)}`.
pub fn advk_ratio_ln(p: &BoundsParams) -> Result<f64> {
    let total = advk_total_bound(p)?;
    let exponent = p.length as f64 * (0.5 - *p.d.numer() as f64 / *p.d.denom() as f64);
    Ok(ln_big(&total) - exponent * ((2 * p.rank - 1) as f64).ln())
}

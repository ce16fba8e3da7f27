//! Pieces, the C'(λ) condition and Dehn's algorithm.

use std::collections::HashMap;

use num_rational::Rational64;
use num_traits::ToPrimitive;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::sampler::{relator_count, Density, DensityParams};
use crate::words::{Letter, Presentation, Word};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Origin {
    pub relator: usize,
    pub rotation: usize,
    pub inverted: bool,
}

/// All cyclic permutations of the relators and their inverses, deduplicated.
#[derive(Clone, Debug)]
pub struct SymmetrizedSet {
    elements: Vec<Word>,
    origins: Vec<Origin>,
    index: HashMap<Vec<Letter>, usize>,
}

impl SymmetrizedSet {
    pub fn elements(&self) -> &[Word] {
        &self.elements
    }

    pub fn origin(&self, element: usize) -> Origin {
        self.origins[element]
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn find(&self, letters: &[Letter]) -> Option<usize> {
        self.index.get(letters).copied()
    }

    pub fn contains(&self, letters: &[Letter]) -> bool {
        self.index.contains_key(letters)
    }
}

pub fn symmetrize(p: &Presentation) -> SymmetrizedSet {
    let mut set = SymmetrizedSet {
        elements: Vec::new(),
        origins: Vec::new(),
        index: HashMap::new(),
    };
    for (i, r) in p.relators().iter().enumerate() {
        for inverted in [false, true] {
            let base = if inverted { r.invert() } else { r.clone() };
            for rotation in 0..base.len() {
                let w = base.rotate(rotation);
                if set.index.contains_key(w.letters()) {
                    continue;
                }
                set.index.insert(w.letters().to_vec(), set.elements.len());
                set.elements.push(w);
                set.origins.push(Origin {
                    relator: i,
                    rotation,
                    inverted,
                });
            }
        }
    }
    set
}

/// An occurrence of a subword in the cyclic reading of relator `relator`
/// (or of its inverse) starting at `position`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Occurrence {
    pub relator: usize,
    pub inverted: bool,
    pub position: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PieceWitness {
    pub word: Word,
    pub first: Occurrence,
    pub second: Occurrence,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PieceReport {
    pub max_piece_length: usize,
    pub witnesses: Vec<PieceWitness>,
}

/// Cyclic readings of every relator in both directions; each reading is
/// identified with an occurrence base `(relator, inverted)`.
fn readings(p: &Presentation) -> Vec<(usize, bool, Vec<Letter>)> {
    let mut out = Vec::with_capacity(2 * p.relators().len());
    for (i, r) in p.relators().iter().enumerate() {
        out.push((i, false, r.letters().to_vec()));
        out.push((i, true, r.invert().into_letters()));
    }
    out
}

/// Longest word read at two distinct occurrences, capped at the relator
/// length. Two occurrences are the same only if they share relator,
/// direction and starting position; the same occurrence reached through a
/// different rotation is therefore never counted.
///
/// Works on a suffix array of all unrolled readings: the longest common
/// extension between any two starts is attained by a pair adjacent in
/// suffix order.
pub fn max_piece_length(p: &Presentation) -> PieceReport {
    let len = p.relator_length();
    let reads = readings(p);
    if reads.is_empty() {
        return PieceReport {
            max_piece_length: 0,
            witnesses: Vec::new(),
        };
    }
    let alphabet = 2 * p.rank() as u32;
    let mut text: Vec<u32> = Vec::new();
    // (start in text) -> occurrence, for valid starts only
    let mut starts: Vec<Option<Occurrence>> = Vec::new();
    for (k, (relator, inverted, letters)) in reads.iter().enumerate() {
        for j in 0..2 * len - 1 {
            text.push(letters[j % len].index() as u32);
            starts.push((j < len).then_some(Occurrence {
                relator: *relator,
                inverted: *inverted,
                position: j,
            }));
        }
        text.push(alphabet + k as u32);
        starts.push(None);
    }
    let sa = suffix_array(&text);
    let lcp = lcp_array(&text, &sa);

    let mut best = 0usize;
    let mut pairs: Vec<(Occurrence, Occurrence)> = Vec::new();
    let mut prev: Option<Occurrence> = None;
    let mut run_min = usize::MAX;
    for (rank, &pos) in sa.iter().enumerate() {
        if rank > 0 {
            run_min = run_min.min(lcp[rank]);
        }
        if let Some(occ) = starts[pos] {
            if let Some(prev_occ) = prev {
                let common = run_min.min(len);
                if common > best {
                    best = common;
                    pairs.clear();
                }
                if common == best && common > 0 {
                    pairs.push((prev_occ.min(occ), prev_occ.max(occ)));
                }
            }
            prev = Some(occ);
            run_min = usize::MAX;
        }
    }
    let mut witnesses: Vec<PieceWitness> = pairs
        .into_iter()
        .map(|(a, b)| PieceWitness {
            word: read_occurrence(&reads, a, best),
            first: a,
            second: b,
        })
        .collect();
    witnesses.sort_by(|x, y| (x.first, x.second).cmp(&(y.first, y.second)));
    PieceReport {
        max_piece_length: best,
        witnesses,
    }
}

fn read_occurrence(reads: &[(usize, bool, Vec<Letter>)], occ: Occurrence, len: usize) -> Word {
    let letters = &reads[2 * occ.relator + usize::from(occ.inverted)].2;
    Word::from_letters((0..len).map(|j| letters[(occ.position + j) % letters.len()]).collect())
}

/// Prefix-doubling suffix array, `O(n log² n)`.
fn suffix_array(text: &[u32]) -> Vec<usize> {
    let n = text.len();
    let mut sa: Vec<usize> = (0..n).collect();
    let mut rank: Vec<usize> = text.iter().map(|&c| c as usize).collect();
    let mut tmp = vec![0usize; n];
    let mut k = 1;
    while k < n {
        let key = |i: usize| (rank[i], if i + k < n { rank[i + k] + 1 } else { 0 });
        sa.sort_by_key(|&i| key(i));
        tmp[sa[0]] = 0;
        for w in 1..n {
            tmp[sa[w]] = tmp[sa[w - 1]] + usize::from(key(sa[w - 1]) != key(sa[w]));
        }
        std::mem::swap(&mut rank, &mut tmp);
        if rank[sa[n - 1]] == n - 1 {
            break;
        }
        k *= 2;
    }
    sa
}

/// Kasai's algorithm; `lcp[r]` is the common prefix of suffixes `sa[r-1]`
/// and `sa[r]`.
fn lcp_array(text: &[u32], sa: &[usize]) -> Vec<usize> {
    let n = text.len();
    let mut rank = vec![0usize; n];
    for (r, &p) in sa.iter().enumerate() {
        rank[p] = r;
    }
    let mut lcp = vec![0usize; n];
    let mut h = 0usize;
    for i in 0..n {
        if rank[i] > 0 {
            let j = sa[rank[i] - 1];
            while i + h < n && j + h < n && text[i + h] == text[j + h] {
                h += 1;
            }
            lcp[rank[i]] = h;
            h = h.saturating_sub(1);
        } else {
            h = 0;
        }
    }
    lcp
}

/// `max_piece < λ·ℓ`, strictly. The free presentation satisfies every C'(λ).
pub fn satisfies_cprime(p: &Presentation, lambda: Rational64) -> bool {
    piece_below(max_piece_length(p).max_piece_length, p.relator_length(), lambda)
}

pub(crate) fn piece_below(piece: usize, length: usize, lambda: Rational64) -> bool {
    if length == 0 {
        return true;
    }
    (piece as i128) * (*lambda.denom() as i128) < (*lambda.numer() as i128) * (length as i128)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct DehnStep {
    /// Index into the symmetrized set.
    pub element: usize,
    /// Start of the replaced subword in the word before this step.
    pub position: usize,
    /// Length of the replaced subword.
    pub length: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DehnTrace {
    pub result: Word,
    pub steps: Vec<DehnStep>,
}

/// Dehn's algorithm for a fixed presentation. Building the solver checks
/// C'(1/6) once; afterwards word problems are answered without rechecking.
#[derive(Clone, Debug)]
pub struct DehnSolver {
    presentation: Presentation,
    symmetrized: SymmetrizedSet,
    trie: PrefixTrie,
    min_len: usize,
}

/// Trie over the symmetrized elements; each node remembers the first
/// element having that prefix.
#[derive(Clone, Debug)]
struct PrefixTrie {
    width: usize,
    children: Vec<u32>,
    element: Vec<usize>,
}

impl PrefixTrie {
    const NONE: u32 = u32::MAX;

    fn new(width: usize, words: &[Word]) -> PrefixTrie {
        let mut t = PrefixTrie {
            width,
            children: vec![Self::NONE; width],
            element: vec![usize::MAX],
        };
        for (e, w) in words.iter().enumerate() {
            let mut node = 0usize;
            for l in w.letters() {
                let slot = node * width + l.index();
                if t.children[slot] == Self::NONE {
                    t.children[slot] = t.element.len() as u32;
                    t.element.push(e);
                    t.children.extend(std::iter::repeat(Self::NONE).take(width));
                }
                node = t.children[slot] as usize;
            }
        }
        t
    }
}

impl DehnSolver {
    pub fn new(p: &Presentation) -> Result<DehnSolver> {
        let piece = max_piece_length(p).max_piece_length;
        if !piece_below(piece, p.relator_length(), Rational64::new(1, 6)) {
            return Err(Error::NotSmallCancellation {
                piece,
                length: p.relator_length(),
            });
        }
        Ok(DehnSolver::new_unchecked(p))
    }

    /// Skips the C'(1/6) check. Triviality verdicts are then only
    /// sufficient (an empty result proves triviality), not complete.
    pub fn new_unchecked(p: &Presentation) -> DehnSolver {
        let symmetrized = symmetrize(p);
        let len = p.relator_length();
        let min_len = len / 2 + 1;
        let trie = PrefixTrie::new(2 * p.rank(), symmetrized.elements());
        DehnSolver {
            presentation: p.clone(),
            symmetrized,
            trie,
            min_len,
        }
    }

    pub fn presentation(&self) -> &Presentation {
        &self.presentation
    }

    pub fn symmetrized(&self) -> &SymmetrizedSet {
        &self.symmetrized
    }

    /// Leftmost, then longest, subword `u` with `r = u·v` for a symmetrized
    /// `r` and `|u| > |r|/2`.
    fn find_step(&self, letters: &[Letter]) -> Option<DehnStep> {
        let len = self.presentation.relator_length();
        if len == 0 {
            return None;
        }
        for start in 0..letters.len() {
            let mut node = 0usize;
            let mut best = None;
            for (k, l) in letters[start..].iter().take(len).enumerate() {
                let next = self.trie.children[node * self.trie.width + l.index()];
                if next == PrefixTrie::NONE {
                    break;
                }
                node = next as usize;
                if k + 1 >= self.min_len {
                    best = Some(DehnStep {
                        element: self.trie.element[node],
                        position: start,
                        length: k + 1,
                    });
                }
            }
            if best.is_some() {
                return best;
            }
        }
        None
    }

    pub fn reduce(&self, w: &Word) -> DehnTrace {
        let mut current = w.free_reduce();
        let mut steps = Vec::new();
        while let Some(step) = self.find_step(current.letters()) {
            let r = &self.symmetrized.elements()[step.element];
            let v_inv = r.slice(step.length, r.len()).invert();
            let l = current.letters();
            let mut next = l[..step.position].to_vec();
            next.extend_from_slice(v_inv.letters());
            next.extend_from_slice(&l[step.position + step.length..]);
            current = Word::from_letters(next).free_reduce();
            steps.push(step);
        }
        DehnTrace {
            result: current,
            steps,
        }
    }

    pub fn is_trivial(&self, w: &Word) -> bool {
        self.reduce(w).result.is_empty()
    }

    pub fn equal(&self, u: &Word, v: &Word) -> bool {
        self.is_trivial(&u.mul(&v.invert()))
    }
}

/// Decides triviality of words in some group.
pub trait WordEquality: Send + Sync {
    fn is_trivial(&self, w: &Word) -> bool;

    fn equal(&self, u: &Word, v: &Word) -> bool {
        self.is_trivial(&u.mul(&v.invert()))
    }
}

impl WordEquality for DehnSolver {
    fn is_trivial(&self, w: &Word) -> bool {
        DehnSolver::is_trivial(self, w)
    }
}

/// Free abelian equality: a word is trivial iff every exponent sum vanishes.
#[derive(Clone, Copy, Debug, Default)]
pub struct AbelianEquality;

impl WordEquality for AbelianEquality {
    fn is_trivial(&self, w: &Word) -> bool {
        let mut sums: std::collections::BTreeMap<usize, i64> = Default::default();
        for l in w.letters() {
            *sums.entry(l.generator()).or_default() += i64::from(l.sign());
        }
        sums.values().all(|&s| s == 0)
    }
}

pub fn dehn_reduce(w: &Word, p: &Presentation) -> Result<DehnTrace> {
    Ok(DehnSolver::new(p)?.reduce(w))
}

pub fn is_trivial(w: &Word, p: &Presentation) -> Result<bool> {
    Ok(DehnSolver::new(p)?.is_trivial(w))
}

pub fn equal_in_group(u: &Word, v: &Word, p: &Presentation) -> Result<bool> {
    Ok(DehnSolver::new(p)?.equal(u, v))
}

/// `N²·ℓ²·(2n−1)^{−⌈λℓ⌉}` with `N` the density-model relator count: a
/// first-moment bound on the expected number of forbidden shared subwords.
pub fn first_moment_piece_bound(n: usize, d: Density, l: usize, lambda: Rational64) -> f64 {
    let params = DensityParams {
        rank: n,
        density: d,
        length: l,
        seed: 0,
    };
    let count = relator_count(&params).to_f64().unwrap_or(f64::INFINITY);
    let threshold = (lambda * Rational64::from_integer(l as i64)).ceil().to_integer();
    count * count * (l as f64) * (l as f64) * ((2 * n - 1) as f64).powi(-(threshold as i32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::{rng_from_seed, sample_reduced_word};
    use proptest::prelude::*;
    use std::collections::{HashSet, VecDeque};

    fn w(s: &str) -> Word {
        s.parse().unwrap()
    }

    fn pres(rank: usize, rels: &[&str]) -> Presentation {
        Presentation::new(rank, rels.iter().map(|r| w(r)).collect()).unwrap()
    }

    // all-pairs longest common extension over distinct occurrences
    fn brute_piece(p: &Presentation) -> usize {
        let len = p.relator_length();
        let reads = readings(p);
        let occs: Vec<(usize, usize)> = (0..reads.len())
            .flat_map(|k| (0..len).map(move |s| (k, s)))
            .collect();
        let mut best = 0;
        for (i, &(ka, sa)) in occs.iter().enumerate() {
            for &(kb, sb) in &occs[i + 1..] {
                let mut m = 0;
                while m < len && reads[ka].2[(sa + m) % len] == reads[kb].2[(sb + m) % len] {
                    m += 1;
                }
                best = best.max(m);
            }
        }
        best
    }

    #[test]
    fn symmetrize_examples() {
        let s = symmetrize(&pres(2, &["abAB"]));
        let mut oracle = HashSet::new();
        for base in [w("abAB"), w("abAB").invert()] {
            for k in 0..4 {
                oracle.insert(base.rotate(k).to_string());
            }
        }
        assert_eq!(s.len(), oracle.len());
        assert_eq!(s.len(), 8);
        assert!(s.elements().iter().all(|e| oracle.contains(&e.to_string())));

        let s = symmetrize(&pres(2, &["aaaa"]));
        assert_eq!(s.len(), 2);
        assert!(symmetrize(&Presentation::free(2).unwrap()).is_empty());
    }

    #[test]
    fn piece_examples() {
        let genus2 = pres(4, &["abABcdCD"]);
        assert_eq!(max_piece_length(&genus2).max_piece_length, 1);
        assert_eq!(brute_piece(&genus2), 1);

        let dup = pres(2, &["abbabbab", "abbabbab"]);
        assert_eq!(max_piece_length(&dup).max_piece_length, 8);

        let single = pres(2, &["ab"]);
        assert_eq!(max_piece_length(&single).max_piece_length, 0);
        assert_eq!(brute_piece(&single), 0);
    }

    #[test]
    fn witnesses_are_genuine() {
        let p = pres(3, &["abcaBC"]);
        let report = max_piece_length(&p);
        assert_eq!(report.max_piece_length, brute_piece(&p));
        let reads = readings(&p);
        for wit in &report.witnesses {
            assert_ne!(wit.first, wit.second);
            assert_eq!(read_occurrence(&reads, wit.first, wit.word.len()), wit.word);
            assert_eq!(read_occurrence(&reads, wit.second, wit.word.len()), wit.word);
        }
    }

    #[test]
    fn cprime_examples() {
        let genus2 = pres(4, &["abABcdCD"]);
        assert!(satisfies_cprime(&genus2, Rational64::new(1, 6)));
        assert!(!satisfies_cprime(&genus2, Rational64::new(1, 8)));
        let dup = pres(2, &["abbabbab", "abbabbab"]);
        assert!(!satisfies_cprime(&dup, Rational64::new(7, 8)));
    }

    #[test]
    fn dehn_examples() {
        let p = pres(4, &["abABcdCD"]);
        let t = dehn_reduce(&w("abABcdCD"), &p).unwrap();
        assert!(t.result.is_empty());
        assert_eq!(t.steps.len(), 1);
        let t = dehn_reduce(&w("abABcd"), &p).unwrap();
        assert_eq!(t.result, w("dc"));
        let t = dehn_reduce(&w("a"), &p).unwrap();
        assert_eq!(t.result, w("a"));
        assert!(t.steps.is_empty());
        assert!(equal_in_group(&w("abABcd"), &w("dc"), &p).unwrap());
        assert!(!is_trivial(&w("a"), &p).unwrap());
    }

    #[test]
    fn dehn_rejects_non_small_cancellation() {
        let p = pres(2, &["abAB"]);
        assert!(matches!(dehn_reduce(&w("ab"), &p), Err(Error::NotSmallCancellation { .. })));
    }

    // relator-insertion rewriting from w; true iff the empty word is reached
    fn bfs_trivial(word: &Word, p: &Presentation, cap: usize, budget: usize) -> bool {
        let sym = symmetrize(p);
        let start = word.free_reduce();
        let mut seen = HashSet::from([start.clone()]);
        let mut queue = VecDeque::from([start]);
        while let Some(cur) = queue.pop_front() {
            if cur.is_empty() {
                return true;
            }
            if seen.len() > budget {
                break;
            }
            for pos in 0..=cur.len() {
                for r in sym.elements() {
                    let next = cur.slice(0, pos).concat(r).concat(&cur.slice(pos, cur.len())).free_reduce();
                    if next.len() <= cap && seen.insert(next.clone()) {
                        queue.push_back(next);
                    }
                }
            }
        }
        false
    }

    #[test]
    fn dehn_example_matches_bfs_rewriting() {
        let p = pres(4, &["abABcdCD"]);
        let target = w("abABcd").mul(&w("dc").invert());
        assert!(bfs_trivial(&target, &p, 10, 20_000));
        assert!(is_trivial(&target, &p).unwrap());
    }

    #[test]
    fn first_moment_examples() {
        let b = first_moment_piece_bound(2, Density::new(0, 1), 160, Rational64::new(1, 8));
        let expected = 160.0f64 * 160.0 * 3f64.powi(-20);
        assert!((b - expected).abs() < 1e-15);
        assert!((b - 7.3e-6).abs() < 0.05e-6);
        let vacuous = first_moment_piece_bound(2, Density::new(0, 1), 10, Rational64::new(0, 1));
        assert_eq!(vacuous, 100.0);
        let mut last = f64::INFINITY;
        for k in 0..16 {
            let b = first_moment_piece_bound(3, Density::new(1, 16), 64, Rational64::new(k, 16));
            assert!(b <= last);
            last = b;
        }
    }

    proptest! {
        #[test]
        fn suffix_array_matches_brute_force(seed in any::<u64>(), n_rel in 1usize..4, len in 1usize..10) {
            let mut rng = rng_from_seed(seed);
            let rels: Vec<Word> = (0..n_rel).map(|_| loop {
                let w = sample_reduced_word(2, len, &mut rng);
                if w.is_cyclically_reduced() { break w; }
            }).collect();
            let p = Presentation::new(2, rels).unwrap();
            prop_assert_eq!(max_piece_length(&p).max_piece_length, brute_piece(&p));
        }

        #[test]
        fn cprime_is_monotone(seed in any::<u64>(), a in 1i64..16, b in 1i64..16) {
            let mut rng = rng_from_seed(seed);
            let r = loop {
                let w = sample_reduced_word(3, 12, &mut rng);
                if w.is_cyclically_reduced() { break w; }
            };
            let p = Presentation::new(3, vec![r]).unwrap();
            let (lo, hi) = (a.min(b), a.max(b));
            if satisfies_cprime(&p, Rational64::new(lo, 16)) {
                prop_assert!(satisfies_cprime(&p, Rational64::new(hi, 16)));
            }
        }

        #[test]
        fn dehn_steps_shrink(seed in any::<u64>()) {
            let mut rng = rng_from_seed(seed);
            let (r, p) = loop {
                let w = sample_reduced_word(6, 18, &mut rng);
                if !w.is_cyclically_reduced() { continue; }
                let p = Presentation::new(6, vec![w.clone()]).unwrap();
                if satisfies_cprime(&p, Rational64::new(1, 6)) { break (w, p); }
            };
            let solver = DehnSolver::new(&p).unwrap();
            let word = sample_reduced_word(6, 10, &mut rng).mul(&r).mul(&sample_reduced_word(6, 3, &mut rng));
            let trace = solver.reduce(&word);
            prop_assert!(trace.steps.len() <= word.len());
            let mut cur = word.free_reduce();
            for step in &trace.steps {
                let e = &solver.symmetrized().elements()[step.element];
                let mut next = cur.letters()[..step.position].to_vec();
                next.extend(e.slice(step.length, e.len()).invert().letters());
                next.extend(&cur.letters()[step.position + step.length..]);
                let next = Word::from_letters(next).free_reduce();
                prop_assert!(next.len() < cur.len());
                cur = next;
            }
            prop_assert_eq!(cur, trace.result);
        }
    }
}

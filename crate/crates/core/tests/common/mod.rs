#![allow(dead_code)]

use std::collections::{BTreeMap, HashSet, VecDeque};

use num_bigint::BigUint;
use num_rational::Rational64;
use rand::Rng;

use randgroup::cancellation::{satisfies_cprime, symmetrize};
use randgroup::sampler::{rng_from_seed, sample_reduced_word};
use randgroup::unification::IntervalLayout;
use randgroup::words::{Assignment, Letter, Presentation, Symbol, Template, Word};

pub fn w(s: &str) -> Word {
    s.parse().unwrap()
}

pub fn random_cyclic_word(rank: usize, len: usize, rng: &mut impl Rng) -> Word {
    loop {
        let r = sample_reduced_word(rank, len, rng);
        if r.is_cyclically_reduced() {
            return r;
        }
    }
}

/// Rejection-samples presentations with `relators` relators of length `len`
/// until one is C'(λ); gives up after `tries` attempts.
pub fn sampled_cprime(
    rank: usize,
    relators: usize,
    len: usize,
    lambda: Rational64,
    seed: u64,
    tries: usize,
) -> Option<Presentation> {
    let mut rng = rng_from_seed(seed);
    for _ in 0..tries {
        let rels = (0..relators).map(|_| random_cyclic_word(rank, len, &mut rng)).collect();
        let p = Presentation::new(rank, rels).unwrap();
        if satisfies_cprime(&p, lambda) {
            return Some(p);
        }
    }
    None
}

/// Longest common extension over all pairs of distinct cyclic occurrences
/// in the relators and their inverses, capped at the relator length.
pub fn brute_piece(p: &Presentation) -> usize {
    let len = p.relator_length();
    let reads: Vec<Vec<Letter>> = p
        .relators()
        .iter()
        .flat_map(|r| [r.letters().to_vec(), r.invert().letters().to_vec()])
        .collect();
    let mut best = 0;
    for a in 0..reads.len() {
        for sa in 0..len {
            for b in a..reads.len() {
                let from = if a == b { sa + 1 } else { 0 };
                for sb in from..len {
                    let mut m = 0;
                    while m < len && reads[a][(sa + m) % len] == reads[b][(sb + m) % len] {
                        m += 1;
                    }
                    best = best.max(m);
                }
            }
        }
    }
    best
}

/// Relator-insertion rewriting from `word` with free reduction and a length
/// cap; true iff the empty word is reached within `budget` states.
pub fn bfs_trivial(word: &Word, p: &Presentation, cap: usize, budget: usize) -> bool {
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

/// Representative of the conjugacy class of `w` up to inversion: the least
/// rotation of the cyclic reduction of `w` or `w⁻¹`.
pub fn cyclic_class(w: &Word) -> Vec<i32> {
    let (u, _) = w.cyclic_reduce();
    let codes = |x: &Word| -> Vec<i32> {
        x.letters().iter().map(|l| l.generator() as i32 * l.sign()).collect()
    };
    let mut best: Option<Vec<i32>> = None;
    for v in [u.clone(), u.invert()] {
        for k in 0..v.len().max(1) {
            let c = codes(&v.rotate(k));
            if best.as_ref().is_none_or(|b| c < *b) {
                best = Some(c);
            }
        }
    }
    best.unwrap_or_default()
}

/// Every freely reduced word of length at most `max_len`.
pub fn reduced_words(rank: usize, max_len: usize) -> Vec<Word> {
    let letters: Vec<Letter> = (1..=rank).flat_map(|g| [Letter::new(g, true), Letter::new(g, false)]).collect();
    let mut out = vec![Word::empty()];
    let mut frontier = vec![Vec::<Letter>::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for f in &frontier {
            for &x in &letters {
                if f.last().is_some_and(|&y| y == x.inverse()) {
                    continue;
                }
                let mut g = f.clone();
                g.push(x);
                out.push(Word::from_letters(g.clone()));
                next.push(g);
            }
        }
        frontier = next;
    }
    out
}

/// Set partitions of `{1..f}` into exactly `n` blocks, by enumerating
/// restricted growth strings.
pub fn count_partitions(f: usize, n: usize) -> u64 {
    fn go(pos: usize, f: usize, used: usize, n: usize) -> u64 {
        if pos == f {
            return u64::from(used == n);
        }
        if used + (f - pos) < n {
            return 0;
        }
        let mut total = 0;
        for b in 0..=used.min(n.saturating_sub(1)) {
            total += go(pos + 1, f, if b == used { used + 1 } else { used }, n);
        }
        total
    }
    if f == 0 {
        return u64::from(n == 0);
    }
    go(0, f, 0, n)
}

pub fn big_pow(base: u64, exp: u64) -> BigUint {
    let mut out = BigUint::from(1u32);
    for _ in 0..exp {
        out *= base;
    }
    out
}

/// Signed classes of unit positions by graph search over the doubles, or
/// `None` when some position is forced to equal its own inverse.
pub fn closure(l: &IntervalLayout) -> Option<Vec<(usize, bool)>> {
    let n = l.total();
    let mut adj: Vec<Vec<(usize, bool)>> = vec![Vec::new(); n];
    for d in &l.doubles {
        for t in 0..d.first.len {
            let x = l.unit(&d.first, t);
            let y = l.unit(&d.second, if d.reversed { d.second.len - 1 - t } else { t });
            adj[x].push((y, d.reversed));
            adj[y].push((x, d.reversed));
        }
    }
    let mut out: Vec<Option<(usize, bool)>> = vec![None; n];
    let mut classes = 0;
    for s in 0..n {
        if out[s].is_some() {
            continue;
        }
        out[s] = Some((classes, false));
        let mut stack = vec![s];
        while let Some(x) = stack.pop() {
            let sx = out[x].unwrap().1;
            for &(y, inv) in &adj[x] {
                match out[y] {
                    Some((_, sy)) if sy != sx ^ inv => return None,
                    Some(_) => {}
                    None => {
                        out[y] = Some((classes, sx ^ inv));
                        stack.push(y);
                    }
                }
            }
        }
        classes += 1;
    }
    Some(out.into_iter().map(Option::unwrap).collect())
}

pub fn tally<K: Ord + Clone>(items: impl IntoIterator<Item = K>) -> BTreeMap<K, usize> {
    let mut m = BTreeMap::new();
    for k in items {
        *m.entry(k).or_insert(0) += 1;
    }
    m
}

/// `S(f, n) = (1/n!) Σ_j (-1)^j C(n, j) (n - j)^f`.
pub fn stirling_explicit(f: u64, n: u64) -> BigUint {
    use num_bigint::BigInt;
    let mut sum = BigInt::from(0);
    let mut binom = BigInt::from(1);
    for j in 0..=n {
        let term = &binom * BigInt::from(big_pow(n - j, f));
        if j % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
        binom = binom * BigInt::from(n - j) / BigInt::from(j + 1);
    }
    let fact: BigInt = (1..=n).map(BigInt::from).product();
    (sum / fact).to_biguint().unwrap()
}

// Integer solution of Σ cᵢ kᵢ = 0 for each row, by rational elimination.
pub fn kernel_point(rows: &[Vec<i64>], cols: usize, rng: &mut impl Rng) -> Vec<i64> {
    let mut m: Vec<Vec<Rational64>> = rows
        .iter()
        .map(|r| r.iter().map(|&x| Rational64::from_integer(x)).collect())
        .collect();
    let mut pivots = Vec::new();
    let mut top = 0;
    for c in 0..cols {
        if let Some(p) = (top..m.len()).find(|&i| m[i][c] != Rational64::from_integer(0)) {
            m.swap(top, p);
            let pv = m[top][c];
            for x in m[top].iter_mut() {
                *x /= pv;
            }
            for i in 0..m.len() {
                if i != top && m[i][c] != Rational64::from_integer(0) {
                    let f = m[i][c];
                    for k in 0..cols {
                        let d = f * m[top][k];
                        m[i][k] -= d;
                    }
                }
            }
            pivots.push(c);
            top += 1;
        }
    }
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    let mut x = vec![Rational64::from_integer(0); cols];
    for &f in &free {
        x[f] = Rational64::from_integer(rng.gen_range(-2..=2));
    }
    for (r, &p) in pivots.iter().enumerate() {
        x[p] = -free.iter().map(|&f| m[r][f] * x[f]).sum::<Rational64>();
    }
    let lcm = x.iter().fold(1i64, |acc, q| num_integer::lcm(acc, *q.denom()));
    x.iter().map(|q| (q * lcm).to_integer()).collect()
}

// a solution inside the cyclic subgroup generated by a random word
pub fn cyclic_solution(eqs: &[Template], vars: &[String], rng: &mut impl Rng) -> Assignment {
    let rows: Vec<Vec<i64>> = eqs
        .iter()
        .map(|e| {
            let mut row = vec![0i64; vars.len()];
            for s in e.symbols() {
                if let Symbol::Var { name, inverse } = s {
                    let i = vars.iter().position(|v| v == name).unwrap();
                    row[i] += if *inverse { -1 } else { 1 };
                }
            }
            row
        })
        .collect();
    let k = kernel_point(&rows, vars.len(), rng);
    let g = loop {
        let g = sample_reduced_word(2, 3, rng);
        if g.is_cyclically_reduced() {
            break g;
        }
    };
    vars.iter()
        .zip(k)
        .map(|(v, e)| {
            let base = if e < 0 { g.invert() } else { g.clone() };
            (v.clone(), base.pow(e.unsigned_abs() as usize))
        })
        .collect()
}

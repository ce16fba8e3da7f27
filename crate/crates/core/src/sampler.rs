//! Random presentations in the density model.
//!
//! Randomness comes from `ChaCha8Rng` (a counter-based stream cipher RNG).
//! Independent streams for parallel trials are keyed by [`derive_seed`], a
//! SplitMix64 mix of `(seed, cell, trial)`, so serial and parallel runs draw
//! identical samples.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_rational::Rational64;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::words::{Letter, Presentation, Word, MAX_RANK};

/// Upper limit on the number of relators a sample may contain.
pub const MAX_SAMPLED_RELATORS: u64 = 1 << 20;

pub type Rng64 = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng64 {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed for trial `trial` of grid cell `cell`: SplitMix64 applied to the
/// master seed, then absorbed with each index in turn.
pub fn derive_seed(master: u64, cell: u64, trial: u64) -> u64 {
    let h = splitmix64(master);
    let h = splitmix64(h ^ cell.wrapping_mul(0xD6E8_FEB8_6659_FD93));
    splitmix64(h ^ trial.wrapping_mul(0xA076_1D64_78BD_642F))
}

/// A density written either as a fraction `p/q` or as a finite decimal.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Density(pub Rational64);

impl Density {
    pub fn new(numer: i64, denom: i64) -> Density {
        Density(Rational64::new(numer, denom))
    }

    pub fn to_f64(self) -> f64 {
        *self.0.numer() as f64 / *self.0.denom() as f64
    }
}

impl FromStr for Density {
    type Err = Error;

    fn from_str(s: &str) -> Result<Density> {
        parse_rational(s).map(Density)
    }
}

/// Parses `p/q`, an integer, or a finite decimal like `0.05` exactly.
pub fn parse_rational(s: &str) -> Result<Rational64> {
    let s = s.trim();
    let bad = || Error::InvalidParams(format!("cannot parse rational `{s}`"));
    if let Some((p, q)) = s.split_once('/') {
        let p: i64 = p.trim().parse().map_err(|_| bad())?;
        let q: i64 = q.trim().parse().map_err(|_| bad())?;
        if q == 0 {
            return Err(bad());
        }
        return Ok(Rational64::new(p, q));
    }
    if let Some((int, frac)) = s.split_once('.') {
        if frac.len() > 15 || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let neg = int.starts_with('-');
        let ip: i64 = if int.is_empty() || int == "-" { 0 } else { int.parse().map_err(|_| bad())? };
        let den = 10i64.pow(frac.len() as u32);
        let fp: i64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        let num = ip.abs() * den + fp;
        return Ok(Rational64::new(if neg { -num } else { num }, den));
    }
    Ok(Rational64::from_integer(s.parse().map_err(|_| bad())?))
}

impl fmt::Display for Density {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self.0.denom() == 1 {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Debug for Density {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl Serialize for Density {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Density {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Density, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DensityParams {
    pub rank: usize,
    pub density: Density,
    pub length: usize,
    pub seed: u64,
}

impl DensityParams {
    pub fn new(rank: usize, density: Density, length: usize, seed: u64) -> Result<DensityParams> {
        let p = DensityParams {
            rank,
            density,
            length,
            seed,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=MAX_RANK).contains(&self.rank) {
            return Err(Error::InvalidParams(format!("rank {} outside 2..={MAX_RANK}", self.rank)));
        }
        let d = self.density.0;
        if d < Rational64::zero() || d > Rational64::from_integer(1) {
            return Err(Error::InvalidParams(format!("density {} outside [0,1]", self.density)));
        }
        if self.length == 0 {
            return Err(Error::InvalidParams("length must be at least 1".into()));
        }
        Ok(())
    }
}

/// `|S_ℓ| = 2n·(2n−1)^{ℓ−1}`.
pub fn reduced_word_count(n: usize, l: usize) -> BigUint {
    assert!(n >= 1 && l >= 1);
    BigUint::from(2 * n) * BigUint::from(2 * n - 1).pow((l - 1) as u32)
}

/// `max(1, ⌊(2n−1)^{dℓ}⌋)`, exact.
///
/// With `dℓ = p/q` in lowest terms the floor equals the integer `q`-th root
/// of `(2n−1)^p`, so no floating point is involved even for fractional
/// exponents.
pub fn relator_count(params: &DensityParams) -> BigUint {
    let exponent = params.density.0 * Rational64::from_integer(params.length as i64);
    let p = *exponent.numer() as u32;
    let q = *exponent.denom() as u32;
    let base = BigUint::from(2 * params.rank - 1);
    let count = base.pow(p).nth_root(q);
    if count.is_zero() {
        BigUint::from(1u32)
    } else {
        count
    }
}

/// Uniform element of `S_ℓ`: the first letter uniform over the `2n` signed
/// generators, each later letter uniform over the `2n−1` non-cancelling ones.
pub fn sample_reduced_word<R: Rng + ?Sized>(n: usize, l: usize, rng: &mut R) -> Word {
    let mut letters: Vec<Letter> = Vec::with_capacity(l);
    for i in 0..l {
        let next = if i == 0 {
            Letter::from_index(rng.gen_range(0..2 * n))
        } else {
            let forbidden = letters[i - 1].inverse().index();
            let mut k = rng.gen_range(0..2 * n - 1);
            if k >= forbidden {
                k += 1;
            }
            Letter::from_index(k)
        };
        letters.push(next);
    }
    Word::from_letters(letters)
}

#[derive(Clone, Debug)]
pub struct SampledPresentation {
    pub presentation: Presentation,
    /// Draws rejected for not being cyclically reduced.
    pub resampled: usize,
}

pub fn sample_presentation(params: &DensityParams) -> Result<Presentation> {
    let mut rng = rng_from_seed(params.seed);
    Ok(sample_presentation_with(params, &mut rng)?.presentation)
}

/// Draws `relator_count(params)` relators independently (with replacement),
/// redrawing any word that is not cyclically reduced.
pub fn sample_presentation_with<R: Rng + ?Sized>(
    params: &DensityParams,
    rng: &mut R,
) -> Result<SampledPresentation> {
    params.validate()?;
    let count = relator_count(params);
    let count = count
        .to_u64()
        .filter(|&c| c <= MAX_SAMPLED_RELATORS)
        .ok_or_else(|| Error::Budget(format!("relator count {count} exceeds {MAX_SAMPLED_RELATORS}")))?;
    let mut relators = Vec::with_capacity(count as usize);
    let mut resampled = 0;
    while relators.len() < count as usize {
        let w = sample_reduced_word(params.rank, params.length, rng);
        if w.is_cyclically_reduced() {
            relators.push(w);
        } else {
            resampled += 1;
        }
    }
    log::debug!("sampled {count} relators, {resampled} redraws");
    Ok(SampledPresentation {
        presentation: Presentation::new(params.rank, relators)?,
        resampled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn params(n: usize, d: (i64, i64), l: usize) -> DensityParams {
        DensityParams::new(n, Density::new(d.0, d.1), l, 1).unwrap()
    }

    #[test]
    fn reduced_word_counts() {
        assert_eq!(reduced_word_count(2, 1), BigUint::from(4u32));
        assert_eq!(reduced_word_count(2, 3), BigUint::from(36u32));
        assert_eq!(reduced_word_count(3, 5), BigUint::from(3750u32));
    }

    #[test]
    fn relator_counts() {
        assert_eq!(relator_count(&params(2, (1, 2), 4)), BigUint::from(9u32));
        assert_eq!(relator_count(&params(2, (0, 1), 17)), BigUint::from(1u32));
        assert_eq!(relator_count(&params(2, (1, 16), 64)), BigUint::from(81u32));
        // 3^{1/2} = 1.73…, 3^{3/4} = 2.27…, 5^{1/2} = 2.23…
        assert_eq!(relator_count(&params(2, (1, 16), 8)), BigUint::from(1u32));
        assert_eq!(relator_count(&params(2, (1, 16), 12)), BigUint::from(2u32));
        assert_eq!(relator_count(&params(3, (1, 16), 8)), BigUint::from(2u32));
    }

    #[test]
    fn fractional_exponent_agrees_with_float() {
        for l in 1..60 {
            for (p, q) in [(1, 16), (1, 20), (1, 7), (3, 10)] {
                let exact = relator_count(&params(2, (p, q), l)).to_u64().unwrap();
                let approx = 3f64.powf(p as f64 * l as f64 / q as f64);
                assert!((exact as f64) <= approx + 1e-9 && approx < exact as f64 + 1.0 + 1e-9);
            }
        }
    }

    #[test]
    fn density_parsing() {
        assert_eq!("1/16".parse::<Density>().unwrap(), Density::new(1, 16));
        assert_eq!("0.05".parse::<Density>().unwrap(), Density::new(1, 20));
        assert_eq!("0".parse::<Density>().unwrap(), Density::new(0, 1));
        assert!("x".parse::<Density>().is_err());
        assert!(DensityParams::new(2, Density::new(3, 2), 4, 0).is_err());
        assert!(DensityParams::new(1, Density::new(0, 1), 4, 0).is_err());
        assert!(DensityParams::new(2, Density::new(0, 1), 0, 0).is_err());
    }

    #[test]
    fn words_are_reduced_of_exact_length() {
        let mut rng = rng_from_seed(3);
        for l in 1..30 {
            let w = sample_reduced_word(3, l, &mut rng);
            assert_eq!(w.len(), l);
            assert_eq!(w.free_reduce(), w);
        }
    }

    #[test]
    fn base_case_covers_alphabet() {
        let mut rng = rng_from_seed(5);
        let mut seen = HashMap::new();
        for _ in 0..4000 {
            *seen.entry(sample_reduced_word(2, 1, &mut rng).to_string()).or_insert(0) += 1;
        }
        assert_eq!(seen.len(), 4);
        assert!(seen.values().all(|&c| c > 850 && c < 1150));
    }

    #[test]
    fn presentation_examples() {
        let p = sample_presentation(&params(2, (0, 1), 20)).unwrap();
        assert_eq!(p.relators().len(), 1);
        assert_eq!(p.relator_length(), 20);

        let p = sample_presentation(&params(2, (1, 16), 32)).unwrap();
        assert_eq!(p.relators().len(), 9);
        assert!(p.relators().iter().all(|r| r.len() == 32 && r.is_cyclically_reduced()));

        let q = sample_presentation(&params(2, (1, 16), 32)).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn derived_seeds_differ() {
        let a = derive_seed(1, 0, 0);
        assert_ne!(a, derive_seed(1, 0, 1));
        assert_ne!(a, derive_seed(1, 1, 0));
        assert_ne!(a, derive_seed(2, 0, 0));
        assert_eq!(a, derive_seed(1, 0, 0));
    }
}

//! Disjoint pairs of languages as ternary sequences over {0, 1, −1}.
//!
//! Ternary words use symbol indices 0, 1, 2 for 0, 1, −1; text uses '0', '+', '-'.

use std::path::Path;

use crate::error::{Error, Result};
use crate::gale::{Alphabet, AlphabetDistribution, SymbolSource, Word};
use crate::lang::{index_to_string, parse_fixture, show, write_fixture, LanguageSpec};
use crate::rational::rat;

pub const ZERO: u8 = 0;
pub const PLUS: u8 = 1;
pub const MINUS: u8 = 2;

/// γ₀ = (1/4, 3/8, 3/8) on (0, 1, −1).
pub fn gamma_zero() -> AlphabetDistribution {
    AlphabetDistribution::ternary(rat(1, 4), rat(3, 8), rat(3, 8)).expect("γ₀ is a distribution")
}

/// An ordered pair (A, B), expected disjoint. Disjointness is checked on every
/// queried index.
#[derive(Clone, Debug)]
pub struct PairEncoding {
    name: String,
    pub a: LanguageSpec,
    pub b: LanguageSpec,
}

impl PairEncoding {
    pub fn new(name: impl Into<String>, a: LanguageSpec, b: LanguageSpec) -> Self {
        PairEncoding { name: name.into(), a, b }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    fn combine(index: u64, in_a: bool, in_b: bool) -> Result<u8> {
        match (in_a, in_b) {
            (true, true) => Err(Error::Disjointness { index, string: show(&index_to_string(index)) }),
            (true, false) => Ok(PLUS),
            (false, true) => Ok(MINUS),
            (false, false) => Ok(ZERO),
        }
    }

    /// Symbol n: 1 if s_n ∈ A, −1 if s_n ∈ B, 0 otherwise.
    pub fn symbol(&self, n: u64) -> Result<u8> {
        Self::combine(n, self.a.bit(n)?, self.b.bit(n)?)
    }
}

pub fn encode_pair(pair: &PairEncoding, n: usize) -> Result<Word> {
    let a = pair.a.char_prefix(n)?;
    let b = pair.b.char_prefix(n)?;
    a.iter().zip(&b).enumerate().map(|(i, (&x, &y))| PairEncoding::combine(i as u64, x == 1, y == 1)).collect()
}

/// 0 ↦ 0, ±1 ↦ 1.
pub fn flatten(word: &[u8]) -> Word {
    word.iter().map(|&a| u8::from(a != ZERO)).collect()
}

/// A ∪ B; a string in both is reported as a disjointness error.
pub fn union_language(pair: &PairEncoding) -> LanguageSpec {
    let (a, b) = (pair.a.clone(), pair.b.clone());
    LanguageSpec::program(format!("union({})", pair.name), move |x| {
        let (in_a, in_b) = (a.contains(x)?, b.contains(x)?);
        if in_a && in_b {
            return Err(Error::Disjointness { index: crate::lang::string_to_index(x)?, string: show(x) });
        }
        Ok(in_a || in_b)
    })
}

impl SymbolSource for PairEncoding {
    fn source_id(&self) -> &str {
        &self.name
    }

    fn source_alphabet(&self) -> Alphabet {
        Alphabet::Ternary
    }

    fn prefix(&self, n: usize) -> Result<Word> {
        encode_pair(self, n)
    }
}

const PAIR_HEADER: &str = "pair";

/// Two language fixture blocks after a `pair` header, each introduced by `[A]` or `[B]`.
pub fn write_pair_fixture(a_bits: &[u8], b_bits: &[u8]) -> String {
    format!("{PAIR_HEADER}\n[A]\n{}[B]\n{}", write_fixture(a_bits), write_fixture(b_bits))
}

pub fn parse_pair_fixture(name: impl Into<String>, text: &str) -> Result<PairEncoding> {
    let name = name.into();
    let bad = |msg: &str| Error::Parse { what: "pair fixture", input: format!("{name}: {msg}") };
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(PAIR_HEADER) {
        return Err(bad("missing header"));
    }
    let rest: Vec<&str> = lines.collect();
    let a_at = rest.iter().position(|l| l.trim() == "[A]").ok_or_else(|| bad("missing [A] block"))?;
    let b_at = rest.iter().position(|l| l.trim() == "[B]").ok_or_else(|| bad("missing [B] block"))?;
    if b_at < a_at {
        return Err(bad("[B] precedes [A]"));
    }
    let a = parse_fixture(format!("{name}.A"), &rest[a_at + 1..b_at].join("\n"))?;
    let b = parse_fixture(format!("{name}.B"), &rest[b_at + 1..].join("\n"))?;
    Ok(PairEncoding::new(name, a, b))
}

pub fn read_pair_fixture(path: &Path) -> Result<PairEncoding> {
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    parse_pair_fixture(name, &std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn complementary() -> PairEncoding {
        PairEncoding::new(
            "comp",
            LanguageSpec::periodic("a", vec![1, 0]).unwrap(),
            LanguageSpec::periodic("b", vec![0, 1]).unwrap(),
        )
    }

    #[test]
    fn gamma_zero_values() {
        let g = gamma_zero();
        assert_eq!(g.probs(), &[rat(1, 4), rat(3, 8), rat(3, 8)]);
    }

    #[test]
    fn complementary_pair_alternates() {
        let w = encode_pair(&complementary(), 8).unwrap();
        assert_eq!(Alphabet::Ternary.format_word(&w), "+-+-+-+-");
        assert_eq!(flatten(&w), vec![1; 8]);
        assert_eq!(union_language(&complementary()).char_prefix(8).unwrap(), vec![1; 8]);
    }

    #[test]
    fn empty_pair_and_overlap() {
        let empty = PairEncoding::new("e", LanguageSpec::empty("a"), LanguageSpec::empty("b"));
        assert_eq!(encode_pair(&empty, 5).unwrap(), vec![0; 5]);
        assert_eq!(union_language(&empty).char_prefix(5).unwrap(), vec![0; 5]);
        let full = PairEncoding::new("f", LanguageSpec::all("a"), LanguageSpec::all("b"));
        match encode_pair(&full, 3) {
            Err(Error::Disjointness { index, string }) => {
                assert_eq!(index, 0);
                assert_eq!(string, "λ");
            }
            other => panic!("expected a disjointness error, got {other:?}"),
        }
        assert!(full.symbol(2).is_err());
        assert!(union_language(&full).contains(&[1]).is_err());
    }

    #[test]
    fn flatten_examples() {
        let w = Alphabet::Ternary.parse_word("1 0 -1").unwrap();
        assert_eq!(flatten(&w), vec![1, 0, 1]);
        assert_eq!(flatten(&[0, 0, 0]), vec![0, 0, 0]);
        assert_eq!(flatten(&flatten(&w)), flatten(&w));
    }

    #[test]
    fn fixture_round_trip() {
        let pair = complementary();
        let a = pair.a.char_prefix(40).unwrap();
        let b = pair.b.char_prefix(40).unwrap();
        let text = write_pair_fixture(&a, &b);
        let parsed = parse_pair_fixture("comp", &text).unwrap();
        assert_eq!(encode_pair(&parsed, 40).unwrap(), encode_pair(&pair, 40).unwrap());
        assert!(encode_pair(&parsed, 41).is_err());
        assert!(parse_pair_fixture("x", "length 2\n01").is_err());
    }
}

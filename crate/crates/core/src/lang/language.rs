use std::fmt;
use std::path::Path;
use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::{One, Signed, ToPrimitive};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::enumeration::{index_to_string, show, string_to_index, val_below};
use crate::error::{Error, Result};
use crate::gale::{Alphabet, SymbolSource, Word};
use crate::rational::{format_rational, Rational};

pub type MembershipFn = Arc<dyn Fn(&[u8]) -> Result<bool> + Send + Sync>;

#[derive(Clone)]
pub enum LanguageKind {
    /// `{x : val(x) < θ}`.
    LeftCut { theta: Rational },
    /// Characteristic sequence repeats `pattern`.
    Periodic { pattern: Word },
    /// Bit n is bit n of the ChaCha8 stream seeded with `seed`.
    SeededRandom { seed: u64 },
    /// A fixed-length characteristic prefix; queries past the end are errors.
    FileBacked { bits: Arc<Word> },
    Program(MembershipFn),
}

/// A decidable language, identified with its characteristic sequence.
#[derive(Clone)]
pub struct LanguageSpec {
    name: String,
    kind: LanguageKind,
}

impl fmt::Debug for LanguageSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            LanguageKind::LeftCut { theta } => format!("left-cut({})", format_rational(theta)),
            LanguageKind::Periodic { pattern } => format!("periodic({})", show(pattern)),
            LanguageKind::SeededRandom { seed } => format!("seeded-random({seed})"),
            LanguageKind::FileBacked { bits } => format!("file-backed({} bits)", bits.len()),
            LanguageKind::Program(_) => "program".to_string(),
        };
        write!(f, "LanguageSpec({}: {kind})", self.name)
    }
}

fn random_word(seed: u64, pos: u64) -> u32 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_word_pos(pos as u128);
    rng.next_u32()
}

impl LanguageSpec {
    pub fn new(name: impl Into<String>, kind: LanguageKind) -> Result<Self> {
        let name = name.into();
        match &kind {
            LanguageKind::LeftCut { theta } if theta.is_negative() || *theta >= Rational::one() => {
                return Err(Error::Config(format!(
                    "left cut {name}: θ = {} is outside [0,1)",
                    format_rational(theta)
                )))
            }
            LanguageKind::Periodic { pattern } if pattern.is_empty() || pattern.iter().any(|&b| b > 1) => {
                return Err(Error::Config(format!("periodic {name}: pattern must be a non-empty bit string")))
            }
            LanguageKind::FileBacked { bits } if bits.iter().any(|&b| b > 1) => {
                return Err(Error::Config(format!("fixture {name}: bits must be 0 or 1")))
            }
            _ => {}
        }
        Ok(LanguageSpec { name, kind })
    }

    pub fn left_cut(name: impl Into<String>, theta: Rational) -> Result<Self> {
        Self::new(name, LanguageKind::LeftCut { theta })
    }

    pub fn periodic(name: impl Into<String>, pattern: Word) -> Result<Self> {
        Self::new(name, LanguageKind::Periodic { pattern })
    }

    pub fn empty(name: impl Into<String>) -> Self {
        LanguageSpec { name: name.into(), kind: LanguageKind::Periodic { pattern: vec![0] } }
    }

    pub fn all(name: impl Into<String>) -> Self {
        LanguageSpec { name: name.into(), kind: LanguageKind::Periodic { pattern: vec![1] } }
    }

    pub fn seeded_random(name: impl Into<String>, seed: u64) -> Self {
        LanguageSpec { name: name.into(), kind: LanguageKind::SeededRandom { seed } }
    }

    pub fn file_backed(name: impl Into<String>, bits: Word) -> Result<Self> {
        Self::new(name, LanguageKind::FileBacked { bits: Arc::new(bits) })
    }

    pub fn program<F>(name: impl Into<String>, membership: F) -> Self
    where
        F: Fn(&[u8]) -> Result<bool> + Send + Sync + 'static,
    {
        LanguageSpec { name: name.into(), kind: LanguageKind::Program(Arc::new(membership)) }
    }

    /// Strings not in this language.
    pub fn complement(&self, name: impl Into<String>) -> Self {
        let inner = self.clone();
        Self::program(name, move |x| Ok(!inner.contains(x)?))
    }

    /// `{y·b : y ∈ self, b ∈ {0,1}}`; strip-last-bit reduces it to `self`.
    pub fn padded(&self, name: impl Into<String>) -> Self {
        let inner = self.clone();
        Self::program(name, move |x| match x.split_last() {
            None => Ok(false),
            Some((_, y)) => inner.contains(y),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> &LanguageKind {
        &self.kind
    }

    pub fn contains(&self, x: &[u8]) -> Result<bool> {
        match &self.kind {
            LanguageKind::LeftCut { theta } => Ok(val_below(x, theta)),
            LanguageKind::Program(f) => f(x),
            _ => self.bit(string_to_index(x)?),
        }
    }

    /// Bit n of the characteristic sequence: membership of `s_n`.
    pub fn bit(&self, n: u64) -> Result<bool> {
        match &self.kind {
            LanguageKind::Periodic { pattern } => Ok(pattern[(n % pattern.len() as u64) as usize] == 1),
            LanguageKind::SeededRandom { seed } => Ok((random_word(*seed, n / 32) >> (n % 32)) & 1 == 1),
            LanguageKind::FileBacked { bits } => match bits.get(n as usize) {
                Some(&b) => Ok(b == 1),
                None => Err(Error::FixtureOverrun { name: self.name.clone(), index: n, len: bits.len() as u64 }),
            },
            LanguageKind::LeftCut { .. } | LanguageKind::Program(_) => self.contains(&index_to_string(n)),
        }
    }

    /// The first n bits of the characteristic sequence.
    pub fn char_prefix(&self, n: usize) -> Result<Word> {
        match &self.kind {
            LanguageKind::SeededRandom { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut out = Vec::with_capacity(n);
                while out.len() < n {
                    let w = rng.next_u32();
                    for i in 0..32 {
                        if out.len() == n {
                            break;
                        }
                        out.push(((w >> i) & 1) as u8);
                    }
                }
                Ok(out)
            }
            LanguageKind::FileBacked { bits } if n > bits.len() => Err(Error::FixtureOverrun {
                name: self.name.clone(),
                index: bits.len() as u64,
                len: bits.len() as u64,
            }),
            LanguageKind::FileBacked { bits } => Ok(bits[..n].to_vec()),
            _ => (0..n as u64).map(|i| self.bit(i).map(u8::from)).collect(),
        }
    }
}

impl SymbolSource for LanguageSpec {
    fn source_id(&self) -> &str {
        &self.name
    }

    fn source_alphabet(&self) -> Alphabet {
        Alphabet::Binary
    }

    fn prefix(&self, n: usize) -> Result<Word> {
        self.char_prefix(n)
    }
}

/// Parses a fixture: a `length N` line followed by N characters from {0,1}.
pub fn parse_fixture(name: impl Into<String>, text: &str) -> Result<LanguageSpec> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let header = lines.next().unwrap_or_default();
    let len: usize = header
        .strip_prefix("length")
        .map(str::trim)
        .and_then(|n| n.parse().ok())
        .ok_or_else(|| Error::Parse { what: "fixture header", input: header.to_string() })?;
    let body = lines.next().unwrap_or_default();
    if body.len() != len {
        return Err(Error::Parse { what: "fixture body of declared length", input: body.to_string() });
    }
    let bits = Alphabet::Binary.parse_word(body)?;
    LanguageSpec::file_backed(name, bits)
}

pub fn read_fixture(path: &Path) -> Result<LanguageSpec> {
    let text = std::fs::read_to_string(path)?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("fixture").to_string();
    parse_fixture(name, &text)
}

pub fn write_fixture(bits: &[u8]) -> String {
    format!("length {}\n{}\n", bits.len(), Alphabet::Binary.format_word(bits))
}

/// `δ^n(λ)`, checking at each step that δ properly extends its input.
pub fn run_constructor(delta: &dyn Fn(&[u8]) -> Word, n: usize) -> Result<Word> {
    let mut w = Word::new();
    for step in 1..=n {
        let next = delta(&w);
        if next.len() <= w.len() || !next.starts_with(&w) {
            return Err(Error::ConstructorViolation { step });
        }
        w = next;
    }
    Ok(w)
}

const MAX_GROWTH_BITS: u64 = 1 << 26;

/// The canonical growth rates `ĝ_0(n) = 2n`, `ĝ_{i+1}(n) = 2^{ĝ_i(log n)}`.
///
/// Every argument that gets a logarithm taken must be a power of two.
pub fn growth_rate(level: u32, n: u64) -> Result<BigUint> {
    if level == 0 {
        return Ok(BigUint::from(n) * 2u32);
    }
    if !n.is_power_of_two() {
        return Err(Error::GrowthRate(format!("ĝ_{level}({n}): {n} is not a power of two")));
    }
    let inner = growth_rate(level - 1, n.trailing_zeros() as u64)?;
    let bits = inner.to_u64().filter(|&b| b < MAX_GROWTH_BITS).ok_or_else(|| {
        Error::GrowthRate(format!("ĝ_{level}({n}) = 2^{inner} is too large to materialize"))
    })?;
    if bits == 0 {
        return Ok(BigUint::one());
    }
    Ok(BigUint::one() << bits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::enumeration::val;
    use crate::rational::rat;

    #[test]
    fn left_cut_half_starts_with_zero() {
        let l = LanguageSpec::left_cut("lc", rat(1, 2)).unwrap();
        assert!(!l.bit(0).unwrap());
        assert_eq!(l.char_prefix(7).unwrap(), vec![0, 1, 0, 1, 1, 0, 0]);
    }

    #[test]
    fn left_cut_is_downward_closed_under_val() {
        let l = LanguageSpec::left_cut("lc", rat(2, 3)).unwrap();
        let strings: Vec<Word> = (0..127).map(index_to_string).collect();
        for x in &strings {
            for y in &strings {
                if val(x) < val(y) && l.contains(y).unwrap() {
                    assert!(l.contains(x).unwrap());
                }
            }
        }
    }

    #[test]
    fn theta_must_be_below_one() {
        assert!(LanguageSpec::left_cut("x", rat(1, 1)).is_err());
        assert!(LanguageSpec::left_cut("x", rat(-1, 3)).is_err());
        assert!(LanguageSpec::left_cut("x", rat(0, 1)).is_ok());
    }

    #[test]
    fn periodic_prefix() {
        let l = LanguageSpec::periodic("p", vec![1, 0]).unwrap();
        assert_eq!(l.char_prefix(6).unwrap(), vec![1, 0, 1, 0, 1, 0]);
        assert!(LanguageSpec::periodic("p", vec![]).is_err());
    }

    #[test]
    fn seeded_random_matches_golden_prefix() {
        let l = LanguageSpec::seeded_random("r", 7);
        let bits = l.char_prefix(16).unwrap();
        assert_eq!(Alphabet::Binary.format_word(&bits), GOLDEN_SEED_7);
        for (n, &b) in bits.iter().enumerate() {
            assert_eq!(l.bit(n as u64).unwrap(), b == 1);
        }
        let long = l.char_prefix(100).unwrap();
        assert_eq!(l.bit(77).unwrap(), long[77] == 1);
    }

    const GOLDEN_SEED_7: &str = "1101110111000010";

    #[test]
    fn file_backed_overrun_is_an_error() {
        let l = parse_fixture("f", "length 4\n0110\n").unwrap();
        assert_eq!(l.char_prefix(4).unwrap(), vec![0, 1, 1, 0]);
        assert!(matches!(l.bit(4), Err(Error::FixtureOverrun { index: 4, len: 4, .. })));
        assert!(l.char_prefix(5).is_err());
        assert!(parse_fixture("f", "length 5\n0110\n").is_err());
        assert_eq!(write_fixture(&[0, 1, 1, 0]), "length 4\n0110\n");
    }

    #[test]
    fn padded_language_reduces_by_stripping() {
        let base = LanguageSpec::left_cut("lc", rat(2, 3)).unwrap();
        let padded = base.padded("pad");
        for n in 0..200 {
            let x = index_to_string(n);
            let expected = match x.split_last() {
                None => false,
                Some((_, y)) => base.contains(y).unwrap(),
            };
            assert_eq!(padded.contains(&x).unwrap(), expected);
        }
    }

    #[test]
    fn constructors() {
        assert_eq!(run_constructor(&|w: &[u8]| [w, &[0]].concat(), 5).unwrap(), vec![0; 5]);
        assert_eq!(run_constructor(&|w: &[u8]| [w, &[1, 0]].concat(), 3).unwrap(), vec![1, 0, 1, 0, 1, 0]);
        assert!(matches!(
            run_constructor(&|w: &[u8]| w.to_vec(), 3),
            Err(Error::ConstructorViolation { step: 1 })
        ));
        assert!(matches!(
            run_constructor(&|w: &[u8]| if w.is_empty() { vec![1] } else { vec![0, 0] }, 3),
            Err(Error::ConstructorViolation { step: 2 })
        ));
    }

    #[test]
    fn growth_rates() {
        assert_eq!(growth_rate(0, 8).unwrap(), BigUint::from(16u32));
        assert_eq!(growth_rate(1, 16).unwrap(), BigUint::from(256u32));
        assert_eq!(growth_rate(2, 16).unwrap(), BigUint::from(65536u32));
        assert!(growth_rate(1, 12).is_err());
        assert!(growth_rate(2, 8).is_err());
        assert_eq!(growth_rate(1, 1).unwrap(), BigUint::one());
        assert!(growth_rate(3, 16).unwrap() > BigUint::from(0u8));
    }
}

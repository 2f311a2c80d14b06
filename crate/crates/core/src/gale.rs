//! Mass-function representation of martingales, s-gales and β-s-gales.
//!
//! A β-s-gale `d` over an alphabet Σ satisfies `d(w) = Σ_a d(wa)·β(a)^s`.
//! Multiplying through by `β(w)^s` turns this into plain sum-preservation of the
//! mass `M(w) = d(w)·β(w)^s`:
//!
//! ```text
//!     M(w) = Σ_a M(wa)
//! ```
//!
//! Every gale in this crate is stored as a [`MassFunction`] with exact rational
//! values. The capital is recovered in the log2 domain as
//! `log2 d(w) = log2 M(w) − s·Σ_a count_a(w)·log2 β(a)`.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::sync::Arc;

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::rational::{format_rational, log2_rational, parse_rational, rat, to_f64, Rational};

/// A word is a sequence of symbol indices into its alphabet.
pub type Word = Vec<u8>;

/// Symbol sets used by the gales. Ternary index 1 is the value `1` (printed `+`),
/// index 2 is the value `−1` (printed `-`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Alphabet {
    Binary,
    Ternary,
}

impl Alphabet {
    pub fn arity(self) -> usize {
        match self {
            Alphabet::Binary => 2,
            Alphabet::Ternary => 3,
        }
    }

    pub fn symbol_char(self, symbol: u8) -> char {
        match (self, symbol) {
            (_, 0) => '0',
            (Alphabet::Binary, 1) => '1',
            (Alphabet::Ternary, 1) => '+',
            (Alphabet::Ternary, 2) => '-',
            _ => '?',
        }
    }

    /// The integer value of a symbol: 0, 1, or −1.
    pub fn symbol_value(self, symbol: u8) -> i8 {
        match symbol {
            0 => 0,
            1 => 1,
            _ => -1,
        }
    }

    pub fn format_word(self, word: &[u8]) -> String {
        word.iter().map(|&s| self.symbol_char(s)).collect()
    }

    /// Parses a word. Binary words use `0`/`1`; ternary words use `0`, `+` (or `1`)
    /// and `-` (or `-1`). Whitespace is ignored.
    pub fn parse_word(self, text: &str) -> Result<Word> {
        let err = || Error::Parse { what: "word", input: text.to_string() };
        let mut out = Vec::with_capacity(text.len());
        let mut chars = text.chars().filter(|c| !c.is_whitespace()).peekable();
        while let Some(c) = chars.next() {
            let sym = match (self, c) {
                (_, '0') => 0,
                (_, '1') => 1,
                (Alphabet::Ternary, '+') => 1,
                (Alphabet::Ternary, '-') => {
                    if chars.peek() == Some(&'1') {
                        chars.next();
                    }
                    2
                }
                _ => return Err(err()),
            };
            out.push(sym);
        }
        Ok(out)
    }

    pub fn check_word(self, word: &[u8]) -> Result<()> {
        let arity = self.arity();
        match word.iter().find(|&&s| s as usize >= arity) {
            Some(&symbol) => Err(Error::SymbolOutOfRange { symbol, arity }),
            None => Ok(()),
        }
    }
}

/// A probability distribution β on an alphabet, with exact rational weights.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AlphabetDistribution {
    alphabet: Alphabet,
    probs: Vec<Rational>,
}

impl AlphabetDistribution {
    pub fn new(alphabet: Alphabet, probs: Vec<Rational>) -> Result<Self> {
        if probs.len() != alphabet.arity() {
            return Err(Error::InvalidDistribution(format!(
                "{} probabilities for {} symbols",
                probs.len(),
                alphabet.arity()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_positive()) {
            return Err(Error::InvalidDistribution(format!(
                "probability {} is not strictly positive",
                format_rational(p)
            )));
        }
        let total: Rational = probs.iter().cloned().sum();
        if !total.is_one() {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {}",
                format_rational(&total)
            )));
        }
        Ok(AlphabetDistribution { alphabet, probs })
    }

    pub fn uniform_binary() -> Self {
        AlphabetDistribution { alphabet: Alphabet::Binary, probs: vec![rat(1, 2), rat(1, 2)] }
    }

    pub fn binary(p0: Rational, p1: Rational) -> Result<Self> {
        Self::new(Alphabet::Binary, vec![p0, p1])
    }

    /// Ternary distribution given as (γ(0), γ(1), γ(−1)).
    pub fn ternary(p0: Rational, p1: Rational, p_minus: Rational) -> Result<Self> {
        Self::new(Alphabet::Ternary, vec![p0, p1, p_minus])
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn prob(&self, symbol: u8) -> &Rational {
        &self.probs[symbol as usize]
    }

    pub fn probs(&self) -> &[Rational] {
        &self.probs
    }

    pub fn log2_prob(&self, symbol: u8) -> f64 {
        log2_rational(&self.probs[symbol as usize])
    }

    pub fn is_uniform_binary(&self) -> bool {
        self.alphabet == Alphabet::Binary && self.probs[0] == self.probs[1]
    }

    pub fn max_prob(&self) -> &Rational {
        self.probs.iter().max().expect("non-empty alphabet")
    }
}

/// The exponent s of an s-gale.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DimensionExponent(Rational);

impl DimensionExponent {
    pub fn new(value: Rational) -> Result<Self> {
        if value.is_negative() {
            return Err(Error::InvalidExponent(format!("{} is negative", format_rational(&value))));
        }
        Ok(DimensionExponent(value))
    }

    pub fn one() -> Self {
        DimensionExponent(Rational::one())
    }

    pub fn value(&self) -> &Rational {
        &self.0
    }

    pub fn to_f64(&self) -> f64 {
        to_f64(&self.0)
    }

    pub fn is_one(&self) -> bool {
        self.0.is_one()
    }
}

impl fmt::Display for DimensionExponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_rational(&self.0))
    }
}

/// Evaluation state at one word: its mass and the states of any wrapped gales.
#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub mass: Rational,
    pub inner: Vec<Node>,
}

impl Node {
    pub fn leaf(mass: Rational) -> Self {
        Node { mass, inner: Vec::new() }
    }
}

/// A sum-preserving assignment of non-negative rational mass to words.
///
/// `child` receives the parent word and its node, so rule-defined masses can be
/// evaluated incrementally along a path or a depth-first walk.
pub trait MassFunction: Send + Sync + fmt::Debug {
    fn arity(&self) -> usize;

    fn root(&self) -> Result<Node>;

    fn child(&self, word: &[u8], node: &Node, symbol: u8) -> Result<Node>;

    /// All children of `word`, in symbol order.
    fn children(&self, word: &[u8], node: &Node) -> Result<Vec<Node>> {
        (0..self.arity() as u8).map(|a| self.child(word, node, a)).collect()
    }
}

pub fn node_at(mass: &dyn MassFunction, word: &[u8]) -> Result<Node> {
    let mut node = mass.root()?;
    for (i, &a) in word.iter().enumerate() {
        node = mass.child(&word[..i], &node, a)?;
    }
    Ok(node)
}

pub fn mass_at(mass: &dyn MassFunction, word: &[u8]) -> Result<Rational> {
    Ok(node_at(mass, word)?.mass)
}

/// Masses of every prefix of `word`, from λ up to `word` itself.
pub fn prefix_masses(mass: &dyn MassFunction, word: &[u8]) -> Result<Vec<Rational>> {
    let mut out = Vec::with_capacity(word.len() + 1);
    let mut node = mass.root()?;
    for (i, &a) in word.iter().enumerate() {
        let next = mass.child(&word[..i], &node, a)?;
        out.push(std::mem::replace(&mut node, next).mass);
    }
    out.push(node.mass);
    Ok(out)
}

/// Depth-first walk over all words of length ≤ `depth`, in prefix order.
pub fn walk<F>(mass: &dyn MassFunction, depth: usize, mut visit: F) -> Result<()>
where
    F: FnMut(&[u8], &Node, &[Node]) -> Result<()>,
{
    fn go<F>(mass: &dyn MassFunction, depth: usize, word: &mut Word, node: &Node, visit: &mut F) -> Result<()>
    where
        F: FnMut(&[u8], &Node, &[Node]) -> Result<()>,
    {
        let children = if word.len() < depth {
            mass.children(word, node)?
        } else {
            Vec::new()
        };
        visit(word, node, &children)?;
        for (a, child) in children.iter().enumerate() {
            word.push(a as u8);
            go(mass, depth, word, child, visit)?;
            word.pop();
        }
        Ok(())
    }
    let root = mass.root()?;
    go(mass, depth, &mut Vec::new(), &root, &mut visit)
}

/// An eagerly tabulated mass function.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MassTable {
    alphabet: Alphabet,
    entries: HashMap<Word, Rational>,
}

impl MassTable {
    pub fn new(alphabet: Alphabet) -> Self {
        MassTable { alphabet, entries: HashMap::new() }
    }

    pub fn insert(&mut self, word: Word, mass: Rational) {
        self.entries.insert(word, mass);
    }

    pub fn get(&self, word: &[u8]) -> Option<&Rational> {
        self.entries.get(word)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    /// Tabulates `mass` on every word of length ≤ `depth`.
    pub fn materialize(mass: &dyn MassFunction, alphabet: Alphabet, depth: usize) -> Result<Self> {
        let mut table = MassTable::new(alphabet);
        walk(mass, depth, |w, node, _| {
            table.entries.insert(w.to_vec(), node.mass.clone());
            Ok(())
        })?;
        Ok(table)
    }

    fn sorted_words(&self) -> Vec<&Word> {
        let mut words: Vec<&Word> = self.entries.keys().collect();
        words.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        words
    }

    /// One line per word: `word<TAB>numerator/denominator`, shortest words first.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        for w in self.sorted_words() {
            let m = &self.entries[w];
            writeln!(out, "{}\t{}/{}", self.alphabet.format_word(w), m.numer(), m.denom())?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(input: R, alphabet: Alphabet) -> Result<Self> {
        let mut table = MassTable::new(alphabet);
        for line in input.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (word, value) = line
                .split_once('\t')
                .ok_or_else(|| Error::Parse { what: "mass table line", input: line.clone() })?;
            let mass = parse_rational(value)?;
            if mass.is_negative() {
                return Err(Error::Parse { what: "non-negative mass", input: line.clone() });
            }
            table.insert(alphabet.parse_word(word)?, mass);
        }
        Ok(table)
    }
}

impl MassFunction for MassTable {
    fn arity(&self) -> usize {
        self.alphabet.arity()
    }

    fn root(&self) -> Result<Node> {
        self.entries
            .get(&Vec::new())
            .map(|m| Node::leaf(m.clone()))
            .ok_or_else(|| Error::PartialDefinition { word: String::new() })
    }

    fn child(&self, word: &[u8], _node: &Node, symbol: u8) -> Result<Node> {
        let mut key = word.to_vec();
        key.push(symbol);
        match self.entries.get(&key) {
            Some(m) => Ok(Node::leaf(m.clone())),
            None => Err(Error::PartialDefinition { word: self.alphabet.format_word(&key) }),
        }
    }
}

/// Outcome of [`validate_mass`].
#[derive(Clone, Debug, PartialEq)]
pub struct MassReport {
    pub ok: bool,
    pub first_violation: Option<MassViolation>,
    pub words_checked: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MassViolation {
    pub word: Word,
    pub mass: Rational,
    pub children_sum: Rational,
}

/// Checks `Σ_a M(wa) = M(w)` exactly for every `|w| < depth` and `M(w) ≥ 0` for
/// every `|w| ≤ depth`. Reports the shortest (then lexicographically first)
/// violating word.
pub fn validate_mass(mass: &dyn MassFunction, depth: usize) -> Result<MassReport> {
    let mut best: Option<MassViolation> = None;
    let mut checked = 0usize;
    walk(mass, depth, |w, node, children| {
        checked += 1;
        if best.as_ref().is_some_and(|b| b.word.len() <= w.len()) {
            return Ok(());
        }
        let negative = node.mass.is_negative() || children.iter().any(|c| c.mass.is_negative());
        let sum = children.iter().fold(Rational::zero(), |acc, c| acc + &c.mass);
        if negative || (!children.is_empty() && sum != node.mass) {
            best = Some(MassViolation { word: w.to_vec(), mass: node.mass.clone(), children_sum: sum });
        }
        Ok(())
    })?;
    Ok(MassReport { ok: best.is_none(), first_violation: best, words_checked: checked })
}

/// A gale: distribution, exponent and mass function.
#[derive(Clone)]
pub struct GaleSpec {
    pub id: String,
    pub distribution: Arc<AlphabetDistribution>,
    pub exponent: DimensionExponent,
    pub mass: Arc<dyn MassFunction>,
}

impl fmt::Debug for GaleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GaleSpec")
            .field("id", &self.id)
            .field("alphabet", &self.distribution.alphabet())
            .field("exponent", &self.exponent.to_string())
            .finish()
    }
}

impl GaleSpec {
    pub fn new(
        id: impl Into<String>,
        distribution: AlphabetDistribution,
        exponent: DimensionExponent,
        mass: Arc<dyn MassFunction>,
    ) -> Result<Self> {
        let id = id.into();
        if mass.arity() != distribution.alphabet().arity() {
            return Err(Error::Unsupported(format!(
                "gale {id}: mass arity {} does not match the alphabet",
                mass.arity()
            )));
        }
        Ok(GaleSpec { id, distribution: Arc::new(distribution), exponent, mass })
    }

    /// A gale over the uniform binary distribution.
    pub fn binary(id: impl Into<String>, exponent: DimensionExponent, mass: Arc<dyn MassFunction>) -> Result<Self> {
        Self::new(id, AlphabetDistribution::uniform_binary(), exponent, mass)
    }

    pub fn alphabet(&self) -> Alphabet {
        self.distribution.alphabet()
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    fn log_capital(&self, mass: &Rational, counts: Vec<u64>) -> LogCapital {
        LogCapital {
            mass_log2: log2_rational(mass),
            counts,
            exponent: self.exponent.clone(),
            distribution: Arc::clone(&self.distribution),
        }
    }
}

/// `log2 d(w)`, kept as `log2 M(w)` plus the symbolic correction
/// `−s·Σ_a count_a·log2 β(a)`.
///
/// The float value is accurate to well under 1e-9 for words up to length 2^20:
/// `log2 M` carries a relative error near 1e-16, and the correction is a sum of
/// at most |Σ| products of exact counts with correctly rounded logarithms.
#[derive(Clone, Debug)]
pub struct LogCapital {
    pub mass_log2: f64,
    pub counts: Vec<u64>,
    pub exponent: DimensionExponent,
    pub distribution: Arc<AlphabetDistribution>,
}

impl LogCapital {
    pub fn correction(&self) -> f64 {
        let s = self.exponent.to_f64();
        let weighted: f64 = self
            .counts
            .iter()
            .enumerate()
            .map(|(a, &c)| c as f64 * self.distribution.log2_prob(a as u8))
            .sum();
        -s * weighted
    }

    pub fn value(&self) -> f64 {
        if self.mass_log2 == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        self.mass_log2 + self.correction()
    }

    pub fn is_zero(&self) -> bool {
        self.mass_log2 == f64::NEG_INFINITY
    }
}

/// `log2 d(word)` for a gale.
pub fn capital(gale: &GaleSpec, word: &[u8]) -> Result<LogCapital> {
    gale.alphabet().check_word(word)?;
    let mass = mass_at(gale.mass.as_ref(), word)?;
    let mut counts = vec![0u64; gale.alphabet().arity()];
    for &a in word {
        counts[a as usize] += 1;
    }
    Ok(gale.log_capital(&mass, counts))
}

/// `log2 d` at every prefix of `word` (n+1 values).
pub fn capitals_along(gale: &GaleSpec, word: &[u8]) -> Result<Vec<LogCapital>> {
    gale.alphabet().check_word(word)?;
    let masses = prefix_masses(gale.mass.as_ref(), word)?;
    let mut counts = vec![0u64; gale.alphabet().arity()];
    let mut out = Vec::with_capacity(masses.len());
    for (i, m) in masses.iter().enumerate() {
        if i > 0 {
            counts[word[i - 1] as usize] += 1;
        }
        out.push(gale.log_capital(m, counts.clone()));
    }
    Ok(out)
}

fn require_uniform_binary(gale: &GaleSpec, what: &str) -> Result<()> {
    if !gale.distribution.is_uniform_binary() {
        return Err(Error::Unsupported(format!("{what} needs a uniform binary gale, got {}", gale.id)));
    }
    Ok(())
}

/// Reads a martingale as the s-gale `2^{(s−1)|w|}·d(w)`. The mass is shared.
pub fn martingale_to_sgale(martingale: &GaleSpec, s: DimensionExponent) -> Result<GaleSpec> {
    require_uniform_binary(martingale, "martingale_to_sgale")?;
    if !martingale.exponent.is_one() {
        return Err(Error::InvalidExponent(format!(
            "{} is a {}-gale, not a martingale",
            martingale.id, martingale.exponent
        )));
    }
    Ok(GaleSpec { exponent: s, ..martingale.clone() })
}

/// Reads an s-gale as the martingale `2^{(1−s)|w|}·d(w)`.
pub fn sgale_to_martingale(gale: &GaleSpec) -> Result<GaleSpec> {
    require_uniform_binary(gale, "sgale_to_martingale")?;
    Ok(GaleSpec { exponent: DimensionExponent::one(), ..gale.clone() })
}

/// A finite sequence provider: a language's characteristic sequence or a pair encoding.
pub trait SymbolSource: Send + Sync {
    fn source_id(&self) -> &str;
    fn source_alphabet(&self) -> Alphabet;
    fn prefix(&self, n: usize) -> Result<Word>;
}

#[derive(Clone, Debug)]
pub struct SuccessTrace {
    /// `log2 d(S↾m)` for m = 0..=n.
    pub capitals: Vec<f64>,
    /// Least m with capital ≥ threshold.
    pub crossing: Option<usize>,
}

/// Capital along the first n symbols of `source`, and the first threshold crossing.
pub fn success_trace(gale: &GaleSpec, source: &dyn SymbolSource, n: usize, threshold: f64) -> Result<SuccessTrace> {
    if source.source_alphabet() != gale.alphabet() {
        return Err(Error::Unsupported(format!(
            "gale {} and source {} use different alphabets",
            gale.id,
            source.source_id()
        )));
    }
    let word = source.prefix(n)?;
    trace_word(gale, &word, threshold)
}

pub fn trace_word(gale: &GaleSpec, word: &[u8], threshold: f64) -> Result<SuccessTrace> {
    let capitals: Vec<f64> = capitals_along(gale, word)?.iter().map(LogCapital::value).collect();
    let crossing = capitals.iter().position(|&c| c >= threshold);
    Ok(SuccessTrace { capitals, crossing })
}

/// Child-sum check on raw nodes, shared by the float-reporting identity tests.
pub fn capital_identity_residual(gale: &GaleSpec, word: &[u8]) -> Result<f64> {
    let parent = capital(gale, word)?.value();
    let s = gale.exponent.to_f64();
    let mut sum = 0.0;
    let mut child = word.to_vec();
    for a in 0..gale.alphabet().arity() as u8 {
        child.push(a);
        let c = capital(gale, &child)?.value();
        child.pop();
        if c.is_finite() {
            sum += (c + s * gale.distribution.log2_prob(a)).exp2();
        }
    }
    if parent == f64::NEG_INFINITY {
        return Ok(sum);
    }
    Ok(sum.log2() - parent)
}

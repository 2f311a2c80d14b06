//! Built-in betting strategies, all martingales over the uniform binary
//! distribution unless stated otherwise.

use std::sync::Arc;

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::gale::{DimensionExponent, GaleSpec, MassFunction, Node};
use crate::lang::{decide_from_theta_bits, index_to_string, LanguageSpec, RestrictedOracle};
use crate::rational::{format_rational, rat, Rational};

/// Splits mass evenly among all symbols.
#[derive(Debug, Clone)]
pub struct UniformMass {
    pub arity: usize,
}

impl MassFunction for UniformMass {
    fn arity(&self) -> usize {
        self.arity
    }

    fn root(&self) -> Result<Node> {
        Ok(Node::leaf(Rational::one()))
    }

    fn child(&self, _word: &[u8], node: &Node, _symbol: u8) -> Result<Node> {
        Ok(Node::leaf(&node.mass / Rational::from_integer(self.arity.into())))
    }
}

/// Puts all mass on one symbol at every step.
#[derive(Debug, Clone)]
pub struct BetSymbol {
    pub arity: usize,
    pub symbol: u8,
}

impl MassFunction for BetSymbol {
    fn arity(&self) -> usize {
        self.arity
    }

    fn root(&self) -> Result<Node> {
        Ok(Node::leaf(Rational::one()))
    }

    fn child(&self, _word: &[u8], node: &Node, symbol: u8) -> Result<Node> {
        Ok(Node::leaf(if symbol == self.symbol { node.mass.clone() } else { Rational::zero() }))
    }
}

/// Gives fraction `p_one` of the mass to 1 and the rest to 0.
#[derive(Debug, Clone)]
pub struct Biased {
    pub p_one: Rational,
}

impl MassFunction for Biased {
    fn arity(&self) -> usize {
        2
    }

    fn root(&self) -> Result<Node> {
        Ok(Node::leaf(Rational::one()))
    }

    fn child(&self, _word: &[u8], node: &Node, symbol: u8) -> Result<Node> {
        let share = if symbol == 1 { self.p_one.clone() } else { Rational::one() - &self.p_one };
        Ok(Node::leaf(&node.mass * share))
    }
}

/// Bets fraction `confidence` on the next bit of a known language.
#[derive(Debug, Clone)]
pub struct Predictor {
    pub language: LanguageSpec,
    pub confidence: Rational,
}

impl MassFunction for Predictor {
    fn arity(&self) -> usize {
        2
    }

    fn root(&self) -> Result<Node> {
        Ok(Node::leaf(Rational::one()))
    }

    fn child(&self, word: &[u8], node: &Node, symbol: u8) -> Result<Node> {
        let predicted = u8::from(self.language.bit(word.len() as u64)?);
        let share = if symbol == predicted { self.confidence.clone() } else { Rational::one() - &self.confidence };
        Ok(Node::leaf(&node.mass * share))
    }

    fn children(&self, word: &[u8], node: &Node) -> Result<Vec<Node>> {
        let predicted = usize::from(self.language.bit(word.len() as u64)?);
        let hit = &node.mass * &self.confidence;
        let miss = &node.mass - &hit;
        let mut out = vec![Node::leaf(miss), Node::leaf(hit)];
        if predicted == 0 {
            out.swap(0, 1);
        }
        Ok(out)
    }
}

/// Bets everything on left-cut membership of the next string, deciding it from
/// θ digits read through slice `slice` of a restricted oracle. When the oracle
/// answer carries no digits the mass is split evenly.
#[derive(Debug)]
pub struct OracleLeftCut {
    pub oracle: Arc<RestrictedOracle>,
    pub slice: usize,
}

impl OracleLeftCut {
    fn predict(&self, position: usize) -> Result<Option<u8>> {
        let x = index_to_string(position as u64);
        let mut query = vec![0u8; self.slice];
        query.push(1);
        query.extend_from_slice(&x);
        let answer = match self.oracle.query_at(position + 1, &query) {
            Ok(answer) => answer,
            // logged by the audit; an over-length query buys no information
            Err(Error::PolicyViolation { .. }) => return Ok(None),
            Err(e) => return Err(e),
        };
        Ok(decide_from_theta_bits(&x, &answer).map(u8::from))
    }
}

impl MassFunction for OracleLeftCut {
    fn arity(&self) -> usize {
        2
    }

    fn root(&self) -> Result<Node> {
        Ok(Node::leaf(Rational::one()))
    }

    fn child(&self, word: &[u8], node: &Node, symbol: u8) -> Result<Node> {
        let mass = match self.predict(word.len())? {
            Some(bit) if bit == symbol => node.mass.clone(),
            Some(_) => Rational::zero(),
            None => &node.mass / Rational::from_integer(2.into()),
        };
        Ok(Node::leaf(mass))
    }

    fn children(&self, word: &[u8], node: &Node) -> Result<Vec<Node>> {
        let masses = match self.predict(word.len())? {
            Some(0) => [node.mass.clone(), Rational::zero()],
            Some(_) => [Rational::zero(), node.mass.clone()],
            None => {
                let half = &node.mass / Rational::from_integer(2.into());
                [half.clone(), half]
            }
        };
        Ok(masses.into_iter().map(Node::leaf).collect())
    }
}

fn martingale(id: String, mass: Arc<dyn MassFunction>) -> GaleSpec {
    GaleSpec::binary(id, DimensionExponent::one(), mass).expect("binary mass")
}

pub fn constant_martingale() -> GaleSpec {
    martingale("constant".into(), Arc::new(UniformMass { arity: 2 }))
}

pub fn bet_on(symbol: u8) -> Result<GaleSpec> {
    if symbol > 1 {
        return Err(Error::SymbolOutOfRange { symbol, arity: 2 });
    }
    Ok(martingale(format!("bet-{symbol}"), Arc::new(BetSymbol { arity: 2, symbol })))
}

pub fn biased(p_one: Rational) -> Result<GaleSpec> {
    if p_one.is_negative() || p_one > Rational::one() {
        return Err(Error::Config(format!("bias {} is outside [0,1]", format_rational(&p_one))));
    }
    Ok(martingale(format!("biased({})", format_rational(&p_one)), Arc::new(Biased { p_one })))
}

pub fn predictor(language: LanguageSpec, confidence: Rational) -> Result<GaleSpec> {
    if confidence < rat(1, 2) || confidence > Rational::one() {
        return Err(Error::Config(format!("confidence {} is outside [1/2,1]", format_rational(&confidence))));
    }
    let id = format!("predict({},{})", language.name(), format_rational(&confidence));
    Ok(martingale(id, Arc::new(Predictor { language, confidence })))
}

pub fn oracle_left_cut(oracle: Arc<RestrictedOracle>, slice: usize) -> GaleSpec {
    martingale(format!("oracle-left-cut[{slice}]"), Arc::new(OracleLeftCut { oracle, slice }))
}

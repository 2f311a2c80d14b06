//! Exact-arithmetic s-gales and β-s-gales, the selective betting strategy,
//! gale transforms, disjoint-pair encodings, and a desk-scale experiment runner.
//!
//! Every gale is stored through its mass function `M(w) = d(w)·β(w)^s`, which is
//! rational and sum-preserving even when the capital `d` itself is irrational.
//! Capitals are reported in the log2 domain.

pub mod error;
pub mod experiment;
pub mod gale;
pub mod lang;
pub mod pairs;
pub mod rational;
pub mod selective;
pub mod strategies;
pub mod transforms;

pub use error::{Error, Result};
pub use gale::{
    capital, martingale_to_sgale, sgale_to_martingale, success_trace, validate_mass, Alphabet,
    AlphabetDistribution, DimensionExponent, GaleSpec, LogCapital, MassFunction, MassReport,
    MassTable, Node, Word,
};
pub use rational::Rational;

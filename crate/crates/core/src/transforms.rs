//! Gale-to-gale constructions, all defined on mass functions.

use std::sync::Arc;

use num_traits::{One, Signed};

use crate::error::{Error, Result};
use crate::gale::{
    capital, martingale_to_sgale, sgale_to_martingale, Alphabet, AlphabetDistribution, DimensionExponent, GaleSpec,
    MassFunction, Node,
};
use crate::pairs::{flatten, MINUS, PLUS, ZERO};
use crate::rational::{format_rational, rat, to_f64, Rational};

/// Margin a numerically decided inequality must clear.
pub const PRECONDITION_MARGIN: f64 = 1e-9;

/// An ordered list of gales sharing alphabet, distribution and exponent.
#[derive(Clone, Debug)]
pub struct GaleFamily {
    members: Vec<GaleSpec>,
}

impl GaleFamily {
    pub fn new(members: Vec<GaleSpec>) -> Result<Self> {
        if let Some(first) = members.first() {
            for m in &members[1..] {
                if m.distribution != first.distribution || m.exponent != first.exponent {
                    return Err(Error::Config(format!(
                        "family members {} and {} differ in distribution or exponent",
                        first.id, m.id
                    )));
                }
            }
        }
        Ok(GaleFamily { members })
    }

    pub fn members(&self) -> &[GaleSpec] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn slice(&self, k: usize) -> Result<&GaleSpec> {
        self.members.get(k).ok_or(Error::SliceOutOfRange { k, len: self.members.len() })
    }
}

/// Member k becomes the s-gale `2^{(s−1)|x|}·d_k(x)`; masses are shared.
pub fn exponent_shift(family: &GaleFamily, s: &DimensionExponent) -> Result<GaleFamily> {
    let members = family
        .members
        .iter()
        .map(|m| Ok(martingale_to_sgale(m, s.clone())?.with_id(format!("{}@{}", m.id, s))))
        .collect::<Result<_>>()?;
    GaleFamily::new(members)
}

/// Inverse of [`exponent_shift`].
pub fn exponent_unshift(family: &GaleFamily) -> Result<GaleFamily> {
    let members = family
        .members
        .iter()
        .map(|m| {
            let id = m.id.rsplit_once('@').map_or(m.id.as_str(), |(base, _)| base).to_string();
            Ok(sgale_to_martingale(m)?.with_id(id))
        })
        .collect::<Result<_>>()?;
    GaleFamily::new(members)
}

#[derive(Debug)]
struct MixtureMass {
    arity: usize,
    weights: Vec<Rational>,
    members: Vec<Arc<dyn MassFunction>>,
}

impl MixtureMass {
    fn combine(&self, inner: Vec<Node>) -> Node {
        let mass = self.weights.iter().zip(&inner).map(|(w, n)| w * &n.mass).sum();
        Node { mass, inner }
    }
}

impl MassFunction for MixtureMass {
    fn arity(&self) -> usize {
        self.arity
    }

    fn root(&self) -> Result<Node> {
        Ok(self.combine(self.members.iter().map(|m| m.root()).collect::<Result<_>>()?))
    }

    fn child(&self, word: &[u8], node: &Node, symbol: u8) -> Result<Node> {
        let inner = self
            .members
            .iter()
            .zip(&node.inner)
            .map(|(m, n)| m.child(word, n, symbol))
            .collect::<Result<_>>()?;
        Ok(self.combine(inner))
    }

    fn children(&self, word: &[u8], node: &Node) -> Result<Vec<Node>> {
        let mut per_member: Vec<std::vec::IntoIter<Node>> = self
            .members
            .iter()
            .zip(&node.inner)
            .map(|(m, n)| m.children(word, n).map(Vec::into_iter))
            .collect::<Result<_>>()?;
        Ok((0..self.arity)
            .map(|_| self.combine(per_member.iter_mut().map(|it| it.next().expect("one child per symbol")).collect()))
            .collect())
    }
}

/// `2^{−k}` for k = 0..n.
pub fn dyadic_weights(n: usize) -> Vec<Rational> {
    (0..n).map(|k| Rational::new(1.into(), num_bigint::BigInt::one() << k)).collect()
}

/// `Σ_k weight_k·d_k`. Weights default to `2^{−k}` and are not renormalized.
pub fn mixture(family: &GaleFamily, weights: Option<Vec<Rational>>) -> Result<GaleSpec> {
    let first = family.members.first().ok_or_else(|| Error::Config("mixture of an empty family".into()))?;
    let weights = weights.unwrap_or_else(|| dyadic_weights(family.len()));
    if weights.len() != family.len() || weights.iter().any(|w| !w.is_positive()) {
        return Err(Error::Config(format!(
            "mixture needs {} positive weights, got {}",
            family.len(),
            weights.len()
        )));
    }
    let ids: Vec<&str> = family.members.iter().map(|m| m.id.as_str()).collect();
    let mass = MixtureMass {
        arity: first.alphabet().arity(),
        weights,
        members: family.members.iter().map(|m| Arc::clone(&m.mass)).collect(),
    };
    Ok(GaleSpec {
        id: format!("mix[{}]", ids.join(",")),
        distribution: Arc::clone(&first.distribution),
        exponent: first.exponent.clone(),
        mass: Arc::new(mass),
    })
}

#[derive(Debug)]
struct BetaMass {
    source: Arc<dyn MassFunction>,
}

impl MassFunction for BetaMass {
    fn arity(&self) -> usize {
        2
    }

    fn root(&self) -> Result<Node> {
        let src = self.source.root()?;
        Ok(Node { mass: src.mass.clone(), inner: vec![src] })
    }

    fn child(&self, word: &[u8], node: &Node, symbol: u8) -> Result<Node> {
        // the ratio recursion from M′(λ) = M_d(λ) keeps M′ = M_d on every path
        let next = self.source.child(word, &node.inner[0], symbol)?;
        Ok(Node { mass: next.mass.clone(), inner: vec![next] })
    }

    fn children(&self, word: &[u8], node: &Node) -> Result<Vec<Node>> {
        let next = self.source.children(word, &node.inner[0])?;
        Ok(next.into_iter().map(|n| Node { mass: n.mass.clone(), inner: vec![n] }).collect())
    }
}

/// The β-t-gale `d′(wb) = d′(w)·d(wb)/(2^s d(w))·β(b)^{−t}`, as the mass recursion
/// `M′(wb) = M′(w)·M_d(wb)/M_d(w)`. Subtrees below a zero source mass stay at zero.
pub fn to_beta_gale(d: &GaleSpec, t: &DimensionExponent, beta: &AlphabetDistribution) -> Result<GaleSpec> {
    if !d.distribution.is_uniform_binary() {
        return Err(Error::Unsupported(format!("to_beta_gale needs a uniform binary gale, got {}", d.id)));
    }
    if beta.alphabet() != Alphabet::Binary {
        return Err(Error::InvalidDistribution("β must be a binary distribution".into()));
    }
    if !t.value().is_positive() || *t.value() >= Rational::one() {
        return Err(Error::InvalidExponent(format!("t must lie in (0,1), got {t}")));
    }
    let id = format!("beta({},t={},β={})", d.id, t, fmt_probs(beta));
    GaleSpec::new(id, beta.clone(), t.clone(), Arc::new(BetaMass { source: Arc::clone(&d.mass) }))
}

fn fmt_probs(dist: &AlphabetDistribution) -> String {
    let parts: Vec<String> = dist.probs().iter().map(format_rational).collect();
    format!("({})", parts.join(","))
}

/// `log2 d′(w) − log2(d(w)·2^{−s|w|}·β(w)^{−t})`; non-negative when the bound holds.
pub fn beta_bound_residual(d: &GaleSpec, transformed: &GaleSpec, word: &[u8]) -> Result<f64> {
    let lhs = capital(transformed, word)?.value();
    let base = capital(d, word)?.value();
    if base == f64::NEG_INFINITY {
        return Ok(f64::INFINITY);
    }
    let t = transformed.exponent.to_f64();
    let log_beta: f64 = word.iter().map(|&b| transformed.distribution.log2_prob(b)).sum();
    Ok(lhs - (base - d.exponent.to_f64() * word.len() as f64 - t * log_beta))
}

/// `max β < 2^{−s′/t}`: the transformed gale keeps the source's successes.
pub fn beta_transfer_holds(beta: &AlphabetDistribution, t: f64, s_prime: f64) -> bool {
    to_f64(beta.max_prob()) < (-s_prime / t).exp2()
}

/// The infimum of t for which [`beta_transfer_holds`] at `s_prime`.
pub fn min_transfer_t(beta: &AlphabetDistribution, s_prime: f64) -> f64 {
    s_prime / -to_f64(beta.max_prob()).log2()
}

/// How the pair lift splits the mass of a flattened 1 between +1 and −1.
#[derive(Clone, Debug, PartialEq)]
pub enum SignSplit {
    Even,
    /// Share of +1; −1 takes the rest. A rational stand-in for
    /// `γ(1)^{s′}/(γ(1)^{s′}+γ(−1)^{s′})`.
    Weighted(Rational),
}

impl SignSplit {
    fn share(&self, symbol: u8) -> Rational {
        match (self, symbol) {
            (SignSplit::Even, _) => rat(1, 2),
            (SignSplit::Weighted(p), PLUS) => p.clone(),
            (SignSplit::Weighted(p), _) => Rational::one() - p,
        }
    }
}

#[derive(Debug)]
struct PairMass {
    source: Arc<dyn MassFunction>,
    split: SignSplit,
}

impl PairMass {
    /// `M_D(w) = M_d(w̄)·σ(w)` where σ is the product of the sign shares, so a
    /// node carries the source node and σ.
    fn node(&self, src: Node, sigma: Rational) -> Node {
        Node { mass: &src.mass * &sigma, inner: vec![src, Node::leaf(sigma)] }
    }

    fn step(&self, node: &Node, symbol: u8, zero: &Node, one: &Node) -> Node {
        let sigma = &node.inner[1].mass;
        if symbol == ZERO {
            self.node(zero.clone(), sigma.clone())
        } else {
            self.node(one.clone(), sigma * self.split.share(symbol))
        }
    }
}

impl MassFunction for PairMass {
    fn arity(&self) -> usize {
        3
    }

    fn root(&self) -> Result<Node> {
        Ok(self.node(self.source.root()?, Rational::one()))
    }

    fn child(&self, word: &[u8], node: &Node, symbol: u8) -> Result<Node> {
        let src = &node.inner[0];
        let bit = u8::from(symbol != ZERO);
        let next = self.source.child(&flatten(word), src, bit)?;
        let sigma = &node.inner[1].mass;
        let sigma = if symbol == ZERO { sigma.clone() } else { sigma * self.split.share(symbol) };
        Ok(self.node(next, sigma))
    }

    fn children(&self, word: &[u8], node: &Node) -> Result<Vec<Node>> {
        let flat = flatten(word);
        let zero = self.source.child(&flat, &node.inner[0], 0)?;
        let one = self.source.child(&flat, &node.inner[0], 1)?;
        Ok([ZERO, PLUS, MINUS].iter().map(|&a| self.step(node, a, &zero, &one)).collect())
    }
}

/// Outcome of checking `β(0)^s ≥ γ(0)^{s′}` and `β(1)^s ≥ γ(1)^{s′} + γ(−1)^{s′}`.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftFeasibility {
    pub zero_margin: f64,
    pub one_margin: f64,
}

const ZERO_INEQUALITY: &str = "β(0)^s ≥ γ(0)^{s′}";
const ONE_INEQUALITY: &str = "β(1)^s ≥ γ(1)^{s′}+γ(−1)^{s′}";

fn pow(p: &Rational, e: f64) -> f64 {
    to_f64(p).powf(e)
}

/// Checks the lift preconditions. `β(0) = γ(0)` is required exactly; given it,
/// the 0-inequality is `s′ ≥ s` and is decided exactly. The 1-inequality
/// involves irrational powers and must clear [`PRECONDITION_MARGIN`].
pub fn check_lift_preconditions(
    beta: &AlphabetDistribution,
    s: &Rational,
    gamma: &AlphabetDistribution,
    s_prime: &Rational,
) -> Result<LiftFeasibility> {
    if beta.alphabet() != Alphabet::Binary || gamma.alphabet() != Alphabet::Ternary {
        return Err(Error::InvalidDistribution("lift needs a binary β and a ternary γ".into()));
    }
    if beta.prob(0) != gamma.prob(ZERO) {
        return Err(Error::InvalidDistribution(format!(
            "lift needs β(0) = γ(0), got {} and {}",
            format_rational(beta.prob(0)),
            format_rational(gamma.prob(ZERO))
        )));
    }
    let (sf, spf) = (to_f64(s), to_f64(s_prime));
    let zero_margin = pow(beta.prob(0), sf) - pow(gamma.prob(ZERO), spf);
    let one_margin = pow(beta.prob(1), sf) - pow(gamma.prob(PLUS), spf) - pow(gamma.prob(MINUS), spf);
    if s_prime < s {
        return Err(Error::InfeasibleExponents { inequality: ZERO_INEQUALITY.into(), margin: zero_margin });
    }
    if one_margin < -PRECONDITION_MARGIN {
        return Err(Error::InfeasibleExponents { inequality: ONE_INEQUALITY.into(), margin: one_margin });
    }
    if one_margin < PRECONDITION_MARGIN {
        return Err(Error::AmbiguousExponents { inequality: ONE_INEQUALITY.into(), margin: one_margin });
    }
    Ok(LiftFeasibility { zero_margin, one_margin })
}

/// Denominator of the rational stand-in for an uneven sign split.
const SPLIT_DENOMINATOR: i64 = 1 << 40;

/// The γ-s′-gale D over {0, 1, −1} driven by the binary β-s-gale d on the
/// flattened word: `M_D(w0) = M_D(w)·M_d(w̄0)/M_d(w̄)` and
/// `M_D(w±1) = M_D(w)·M_d(w̄1)/M_d(w̄)·split(±1)`.
pub fn lift_to_pair_gale(d: &GaleSpec, gamma: &AlphabetDistribution, s_prime: &DimensionExponent) -> Result<GaleSpec> {
    check_lift_preconditions(&d.distribution, d.exponent.value(), gamma, s_prime.value())?;
    let split = if gamma.prob(PLUS) == gamma.prob(MINUS) {
        SignSplit::Even
    } else {
        let sp = s_prime.to_f64();
        let (a, b) = (pow(gamma.prob(PLUS), sp), pow(gamma.prob(MINUS), sp));
        let share = (a / (a + b) * SPLIT_DENOMINATOR as f64).round() as i64;
        SignSplit::Weighted(rat(share.clamp(1, SPLIT_DENOMINATOR - 1), SPLIT_DENOMINATOR))
    };
    let id = format!("pair({},s′={},γ={})", d.id, s_prime, fmt_probs(gamma));
    GaleSpec::new(id, gamma.clone(), s_prime.clone(), Arc::new(PairMass { source: Arc::clone(&d.mass), split }))
}

/// `log2 D(w) − log2 d(w̄)`; non-negative when domination holds.
pub fn pair_domination_residual(d: &GaleSpec, lifted: &GaleSpec, word: &[u8]) -> Result<f64> {
    let upper = capital(lifted, word)?.value();
    let lower = capital(d, &flatten(word))?.value();
    if lower == f64::NEG_INFINITY {
        return Ok(f64::INFINITY);
    }
    Ok(upper - lower)
}

/// The least s′ on the grid `m/1000` within [s, 1) that passes
/// [`check_lift_preconditions`]; `None` if there is none.
pub fn find_exponent_pair(beta: &AlphabetDistribution, gamma: &AlphabetDistribution, s: &Rational) -> Result<Option<Rational>> {
    if !s.is_positive() || *s >= Rational::one() {
        return Err(Error::InvalidExponent(format!("s must lie in (0,1), got {}", format_rational(s))));
    }
    let scaled = s * Rational::from_integer(1000.into());
    let start = scaled.ceil().to_integer();
    let start: i64 = num_traits::ToPrimitive::to_i64(&start).expect("grid index fits");
    for m in start..1000 {
        let candidate = rat(m, 1000);
        match check_lift_preconditions(beta, s, gamma, &candidate) {
            Ok(_) => return Ok(Some(candidate)),
            Err(Error::InfeasibleExponents { .. } | Error::AmbiguousExponents { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gale::{validate_mass, walk};
    use crate::pairs::gamma_zero;
    use crate::strategies::{bet_on, biased, constant_martingale};

    fn quarter() -> AlphabetDistribution {
        AlphabetDistribution::binary(rat(1, 4), rat(3, 4)).unwrap()
    }

    fn exp(p: i64, q: i64) -> DimensionExponent {
        DimensionExponent::new(rat(p, q)).unwrap()
    }

    #[test]
    fn shift_examples() {
        let fam = GaleFamily::new(vec![constant_martingale(), bet_on(1).unwrap()]).unwrap();
        let same = exponent_shift(&fam, &DimensionExponent::one()).unwrap();
        assert!(same.members().iter().all(|m| m.exponent.is_one()));
        let half = exponent_shift(&fam, &exp(1, 2)).unwrap();
        assert_eq!(capital(half.slice(0).unwrap(), &[0, 1, 1, 0]).unwrap().value(), -2.0);
        let back = exponent_unshift(&half).unwrap();
        assert_eq!(back.members()[1].id, fam.members()[1].id);
        assert!(exponent_shift(&half, &exp(1, 3)).is_err());
    }

    #[test]
    fn mixture_root_and_single_member() {
        let fam = GaleFamily::new(vec![constant_martingale(), bet_on(0).unwrap()]).unwrap();
        let mix = mixture(&fam, None).unwrap();
        assert_eq!(mix.mass.root().unwrap().mass, rat(3, 2));
        assert!((capital(&mix, &[]).unwrap().value() - 1.5f64.log2()).abs() < 1e-15);
        let single = GaleFamily::new(vec![biased(rat(1, 3)).unwrap()]).unwrap();
        let mix = mixture(&single, Some(vec![Rational::one()])).unwrap();
        for w in [vec![], vec![1, 0, 1], vec![0, 0, 0, 1]] {
            assert_eq!(capital(&mix, &w).unwrap().value(), capital(single.slice(0).unwrap(), &w).unwrap().value());
        }
        assert!(mixture(&GaleFamily::new(vec![]).unwrap(), None).is_err());
    }

    #[test]
    fn constant_beta_transform() {
        let d = martingale_to_sgale(&constant_martingale(), exp(1, 2)).unwrap();
        let t = exp(1, 2);
        let dp = to_beta_gale(&d, &t, &quarter()).unwrap();
        let one = capital(&dp, &[1]).unwrap().value();
        assert!((one - (1.0 / 3f64.sqrt()).log2()).abs() < 1e-12);
        let zero = capital(&dp, &[0]).unwrap().value();
        let identity = zero.exp2() * 0.25f64.sqrt() + one.exp2() * 0.75f64.sqrt();
        assert!((identity - 1.0).abs() < 1e-12);
        assert!(validate_mass(dp.mass.as_ref(), 12).unwrap().ok);
        assert!(to_beta_gale(&d, &exp(1, 1), &quarter()).is_err());
    }

    #[test]
    fn beta_feasibility_threshold() {
        assert!((min_transfer_t(&quarter(), 0.2) - 0.4819).abs() < 1e-4);
        assert!(beta_transfer_holds(&quarter(), 0.5, 0.2));
        assert!(!beta_transfer_holds(&quarter(), 0.45, 0.2));
    }

    #[test]
    fn beta_transform_keeps_success_on_zeros() {
        let d = martingale_to_sgale(&bet_on(0).unwrap(), exp(1, 2)).unwrap();
        let dp = to_beta_gale(&d, &exp(1, 2), &quarter()).unwrap();
        let zeros = vec![0u8; 200];
        assert!(capital(&dp, &zeros).unwrap().value() > 100.0);
        let mut worst = f64::INFINITY;
        walk(dp.mass.as_ref(), 10, |w, _, _| {
            worst = worst.min(beta_bound_residual(&d, &dp, w)?);
            Ok(())
        })
        .unwrap();
        assert!(worst >= -1e-9);
    }

    #[test]
    fn constant_pair_lift_ratios() {
        let d = GaleSpec::new("const", quarter(), exp(3, 10), Arc::new(crate::strategies::UniformMass { arity: 2 }))
            .unwrap();
        let lifted = lift_to_pair_gale(&d, &gamma_zero(), &exp(4, 5)).unwrap();
        let root = lifted.mass.root().unwrap();
        let shares: Vec<Rational> =
            (0..3).map(|a| lifted.mass.child(&[], &root, a).unwrap().mass / &root.mass).collect();
        assert_eq!(shares, vec![rat(1, 2), rat(1, 4), rat(1, 4)]);
        assert!(validate_mass(lifted.mass.as_ref(), 8).unwrap().ok);
    }

    #[test]
    fn lift_preconditions() {
        let ok = check_lift_preconditions(&quarter(), &rat(3, 10), &gamma_zero(), &rat(4, 5)).unwrap();
        assert!(ok.zero_margin >= PRECONDITION_MARGIN && ok.one_margin >= PRECONDITION_MARGIN);
        let even = AlphabetDistribution::binary(rat(1, 2), rat(1, 2)).unwrap();
        assert!(matches!(
            check_lift_preconditions(&even, &rat(3, 10), &gamma_zero(), &rat(4, 5)),
            Err(Error::InvalidDistribution(_))
        ));
        match check_lift_preconditions(&quarter(), &rat(3, 10), &gamma_zero(), &rat(1, 2)) {
            Err(Error::InfeasibleExponents { inequality, .. }) => assert_eq!(inequality, ONE_INEQUALITY),
            other => panic!("{other:?}"),
        }
        match check_lift_preconditions(&quarter(), &rat(3, 10), &gamma_zero(), &rat(1, 5)) {
            Err(Error::InfeasibleExponents { inequality, .. }) => assert_eq!(inequality, ZERO_INEQUALITY),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn exponent_pair_search() {
        let found = find_exponent_pair(&quarter(), &gamma_zero(), &rat(3, 10)).unwrap();
        assert_eq!(found, Some(rat(795, 1000)));
        let s_prime = 795.0 / 1000.0;
        assert!(2.0 * 0.375f64.powf(s_prime) <= 0.75f64.powf(0.3));
        assert!(2.0 * 0.375f64.powf(s_prime - 1e-3) > 0.75f64.powf(0.3));
        assert_eq!(find_exponent_pair(&quarter(), &gamma_zero(), &rat(999, 1000)).unwrap(), None);
        assert_eq!(find_exponent_pair(&quarter(), &gamma_zero(), &rat(99, 100)).unwrap(), Some(rat(998, 1000)));
    }

    #[test]
    fn asymmetric_lift_stays_exact() {
        let d = GaleSpec::new("b", quarter(), exp(3, 10), biased(rat(2, 3)).unwrap().mass).unwrap();
        let gamma = AlphabetDistribution::ternary(rat(1, 4), rat(1, 2), rat(1, 4)).unwrap();
        let lifted = lift_to_pair_gale(&d, &gamma, &exp(4, 5)).unwrap();
        assert!(validate_mass(lifted.mass.as_ref(), 7).unwrap().ok);
    }
}

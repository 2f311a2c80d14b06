use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::Zero;

use super::enumeration::{cmp_enumeration, pair, show, unpair, val};
use crate::error::{Error, Result};
use crate::gale::Word;
use crate::rational::{format_rational, Rational};

pub type StringFn = Arc<dyn Fn(&[u8]) -> Word + Send + Sync>;

#[derive(Clone)]
pub struct NamedFunction {
    pub name: String,
    pub func: StringFn,
}

impl fmt::Debug for NamedFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NamedFunction({})", self.name)
    }
}

impl NamedFunction {
    pub fn new<F>(name: impl Into<String>, func: F) -> Self
    where
        F: Fn(&[u8]) -> Word + Send + Sync + 'static,
    {
        NamedFunction { name: name.into(), func: Arc::new(func) }
    }

    pub fn call(&self, x: &[u8]) -> Word {
        (self.func)(x)
    }
}

/// A finite ordered list of string functions, addressed by slices:
/// the registry as a single function maps `0^k 1 x` to `f_k(x)`.
#[derive(Clone, Debug, Default)]
pub struct FunctionRegistry {
    entries: Vec<NamedFunction>,
}

impl FunctionRegistry {
    pub fn new(entries: Vec<NamedFunction>) -> Self {
        FunctionRegistry { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.name.as_str()).collect()
    }

    pub fn slice(&self, k: usize) -> Result<&NamedFunction> {
        self.entries.get(k).ok_or(Error::SliceOutOfRange { k, len: self.entries.len() })
    }

    /// `f(0^k 1 x) = f_k(x)`; λ when `u` has no 1.
    pub fn eval(&self, u: &[u8]) -> Result<Word> {
        match u.iter().position(|&b| b == 1) {
            None => Ok(Word::new()),
            Some(k) => Ok(self.slice(k)?.call(&u[k + 1..])),
        }
    }

    /// The registry as one total function (out-of-range slices answer λ).
    pub fn into_function(self, name: impl Into<String>) -> NamedFunction {
        NamedFunction::new(name, move |u| self.eval(u).unwrap_or_default())
    }
}

/// Query-length policy: at context length n, queries may have length at most
/// `c·max(1, ⌈log2 n⌉)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OraclePolicy {
    pub c: usize,
}

impl OraclePolicy {
    pub fn new(c: usize) -> Self {
        OraclePolicy { c }
    }

    pub fn max_query_len(&self, context: usize) -> usize {
        let log = if context <= 1 { 0 } else { (usize::BITS - (context - 1).leading_zeros()) as usize };
        self.c * log.max(1)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryRecord {
    pub context: usize,
    pub query: Word,
    pub allowed: bool,
}

/// A per-session query log checked against an [`OraclePolicy`].
#[derive(Debug)]
pub struct QueryAudit {
    policy: OraclePolicy,
    log: Mutex<Vec<QueryRecord>>,
}

impl QueryAudit {
    pub fn new(policy: OraclePolicy) -> Self {
        QueryAudit { policy, log: Mutex::new(Vec::new()) }
    }

    pub fn policy(&self) -> OraclePolicy {
        self.policy
    }

    /// Logs the query and rejects it if it is over length.
    pub fn check(&self, context: usize, query: &[u8]) -> Result<()> {
        let bound = self.policy.max_query_len(context);
        let allowed = query.len() <= bound;
        self.log.lock().expect("query log poisoned").push(QueryRecord { context, query: query.to_vec(), allowed });
        if allowed {
            Ok(())
        } else {
            Err(Error::PolicyViolation { query: show(query), len: query.len(), bound, context })
        }
    }

    pub fn records(&self) -> Vec<QueryRecord> {
        self.log.lock().expect("query log poisoned").clone()
    }

    pub fn query_count(&self) -> usize {
        self.log.lock().expect("query log poisoned").len()
    }

    pub fn violations(&self) -> Vec<QueryRecord> {
        self.records().into_iter().filter(|r| !r.allowed).collect()
    }
}

/// An oracle `g` reachable only through a length policy, with a query log.
#[derive(Debug)]
pub struct RestrictedOracle {
    oracle: NamedFunction,
    audit: QueryAudit,
    context: AtomicUsize,
}

impl RestrictedOracle {
    pub fn new(oracle: NamedFunction, policy: OraclePolicy) -> Self {
        RestrictedOracle { oracle, audit: QueryAudit::new(policy), context: AtomicUsize::new(0) }
    }

    pub fn name(&self) -> &str {
        &self.oracle.name
    }

    pub fn set_context(&self, context_len: usize) {
        self.context.store(context_len, Ordering::Relaxed);
    }

    pub fn query(&self, x: &[u8]) -> Result<Word> {
        self.query_at(self.context.load(Ordering::Relaxed), x)
    }

    pub fn query_at(&self, context_len: usize, x: &[u8]) -> Result<Word> {
        self.audit.check(context_len, x)?;
        Ok(self.oracle.call(x))
    }

    pub fn audit(&self) -> &QueryAudit {
        &self.audit
    }
}

pub fn restrict_oracle(g: NamedFunction, policy: OraclePolicy) -> RestrictedOracle {
    RestrictedOracle::new(g, policy)
}

pub type SelectorFn = Arc<dyn Fn(&[u8]) -> Result<Word> + Send + Sync>;

/// A selector: on `⟨a,b⟩` returns one of a, b. The contract is checked on every call.
#[derive(Clone)]
pub struct SelectorFunction {
    pub name: String,
    func: SelectorFn,
    oracle: Option<Arc<RestrictedOracle>>,
}

impl fmt::Debug for SelectorFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SelectorFunction({})", self.name)
    }
}

impl SelectorFunction {
    pub fn new<F>(name: impl Into<String>, func: F) -> Self
    where
        F: Fn(&[u8]) -> Result<Word> + Send + Sync + 'static,
    {
        SelectorFunction { name: name.into(), func: Arc::new(func), oracle: None }
    }

    /// Attaches the restricted oracle the selector consults, for auditing.
    pub fn with_oracle(mut self, oracle: Arc<RestrictedOracle>) -> Self {
        self.oracle = Some(oracle);
        self
    }

    pub fn oracle(&self) -> Option<&Arc<RestrictedOracle>> {
        self.oracle.as_ref()
    }

    pub fn select(&self, a: &[u8], b: &[u8]) -> Result<Word> {
        let out = (self.func)(&pair(a, b))?;
        if out != a && out != b {
            return Err(Error::SelectorContract { name: self.name.clone(), a: show(a), b: show(b), output: show(&out) });
        }
        Ok(out)
    }
}

/// Output-length bound `factor·|x| + offset`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LengthBound {
    pub factor: usize,
    pub offset: usize,
}

impl LengthBound {
    pub fn at(&self, n: usize) -> usize {
        self.factor * n + self.offset
    }
}

/// A many-one reduction candidate with a declared output-length bound.
#[derive(Clone)]
pub struct ReductionFunction {
    pub name: String,
    func: StringFn,
    pub bound: LengthBound,
}

impl fmt::Debug for ReductionFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ReductionFunction({})", self.name)
    }
}

impl ReductionFunction {
    pub fn new<F>(name: impl Into<String>, bound: LengthBound, func: F) -> Self
    where
        F: Fn(&[u8]) -> Word + Send + Sync + 'static,
    {
        ReductionFunction { name: name.into(), func: Arc::new(func), bound }
    }

    pub fn apply(&self, x: &[u8]) -> Result<Word> {
        let out = (self.func)(x);
        let bound = self.bound.at(x.len());
        if out.len() > bound {
            return Err(Error::ReductionBound { name: self.name.clone(), input: show(x), len: out.len(), bound });
        }
        Ok(out)
    }
}

/// Returns the argument with the smaller `val`, the first one on ties. For every
/// θ this selects for the left cut `{x : val(x) < θ}`.
pub fn left_cut_selector(theta: &Rational) -> SelectorFunction {
    SelectorFunction::new(format!("left-cut({})", format_rational(theta)), |z| {
        let (a, b) = unpair(z)?;
        Ok(if val(&b) < val(&a) { b } else { a })
    })
}

/// Returns whichever argument comes first in the standard enumeration.
pub fn enumeration_min_selector() -> SelectorFunction {
    SelectorFunction::new("enumeration-min", |z| {
        let (a, b) = unpair(z)?;
        Ok(if cmp_enumeration(&b, &a).is_lt() { b } else { a })
    })
}

pub fn first_argument_selector() -> SelectorFunction {
    SelectorFunction::new("first-argument", |z| Ok(unpair(z)?.0))
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// A deterministic pseudo-random choice between the arguments. Not a selector
/// for anything in particular; used to exercise broken premises.
pub fn coin_flip_selector(seed: u64) -> SelectorFunction {
    SelectorFunction::new(format!("coin-flip({seed})"), move |z| {
        let h = z.iter().fold(splitmix(seed), |acc, &b| splitmix(acc ^ (b as u64 + 1)));
        let h = splitmix(h ^ z.len() as u64);
        let (a, b) = unpair(z)?;
        Ok(if h & 1 == 0 { a } else { b })
    })
}

pub fn identity_reduction() -> ReductionFunction {
    ReductionFunction::new("identity", LengthBound { factor: 1, offset: 0 }, |x| x.to_vec())
}

/// `y·b ↦ y`, and `λ ↦ empty_image`.
pub fn strip_last_bit_reduction(empty_image: Word) -> ReductionFunction {
    let bound = LengthBound { factor: 1, offset: empty_image.len() };
    ReductionFunction::new(format!("strip-last-bit({})", show(&empty_image)), bound, move |x| match x.split_last() {
        Some((_, y)) => y.to_vec(),
        None => empty_image.clone(),
    })
}

pub fn noop_oracle() -> NamedFunction {
    NamedFunction::new("noop", |_| Word::new())
}

/// The first `|x|+1` binary digits of θ, followed by one flag bit that is 1 iff
/// θ has further nonzero digits.
pub fn theta_bits(theta: &Rational, x: &[u8]) -> Word {
    let places = x.len() + 1;
    let scaled = theta.numer() << places;
    let (digits, rem) = scaled.div_rem(theta.denom());
    let mut out: Word = (0..places).rev().map(|i| u8::from(((&digits >> i) & BigInt::from(1)) == BigInt::from(1))).collect();
    out.push(u8::from(!rem.is_zero()));
    out
}

/// An oracle whose k-th slice reports digits of `thetas[k]`.
pub fn theta_bits_oracle(thetas: Vec<Rational>) -> NamedFunction {
    let slices = thetas
        .into_iter()
        .enumerate()
        .map(|(k, theta)| NamedFunction::new(format!("theta[{k}]"), move |x| theta_bits(&theta, x)))
        .collect();
    FunctionRegistry::new(slices).into_function("theta-bits")
}

/// Decides `val(x) < θ` from a [`theta_bits`] answer for `x`; `None` when the
/// answer has the wrong shape (an uninformative oracle).
pub fn decide_from_theta_bits(x: &[u8], answer: &[u8]) -> Option<bool> {
    if answer.len() != x.len() + 2 {
        return None;
    }
    let (digits, tail) = answer.split_at(x.len() + 1);
    let x1: Word = x.iter().copied().chain([1]).collect();
    Some(x1.as_slice() < digits || (x1.as_slice() == digits && tail[0] == 1))
}

/// A left-cut selector that decides membership by querying slice `slice` of a
/// θ-bits oracle: returns the argument that is a member, `a` if neither is.
pub fn oracle_left_cut_selector(oracle: Arc<RestrictedOracle>, slice: usize) -> SelectorFunction {
    let inner = Arc::clone(&oracle);
    let member = move |x: &[u8]| -> Result<bool> {
        let mut query = vec![0u8; slice];
        query.push(1);
        query.extend_from_slice(x);
        Ok(decide_from_theta_bits(x, &inner.query(&query)?).unwrap_or(false))
    };
    SelectorFunction::new(format!("oracle-left-cut[{slice}]"), move |z| {
        let (a, b) = unpair(z)?;
        Ok(if !member(&a)? && member(&b)? { b } else { a })
    })
    .with_oracle(oracle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::enumeration::index_to_string;
    use crate::lang::LanguageSpec;
    use crate::rational::rat;

    fn strings_up_to(len: usize) -> Vec<Word> {
        (0..(1u64 << (len + 1)) - 1).map(index_to_string).collect()
    }

    #[test]
    fn left_cut_selector_picks_smaller_val() {
        let f = left_cut_selector(&rat(2, 3));
        assert_eq!(f.select(&[0], &[1]).unwrap(), vec![0]);
        assert_eq!(f.select(&[1], &[0]).unwrap(), vec![0]);
        assert_eq!(f.select(&[1, 1], &[1, 1]).unwrap(), vec![1, 1]);
    }

    #[test]
    fn left_cut_selector_property_exhaustive() {
        let theta = rat(2, 3);
        let lang = LanguageSpec::left_cut("lc", theta.clone()).unwrap();
        let f = left_cut_selector(&theta);
        let strings = strings_up_to(5);
        assert_eq!(strings.len() * strings.len(), 3969);
        for a in &strings {
            for b in &strings {
                let out = f.select(a, b).unwrap();
                if lang.contains(a).unwrap() || lang.contains(b).unwrap() {
                    assert!(lang.contains(&out).unwrap());
                }
            }
        }
    }

    #[test]
    fn builtin_selectors_select_for_their_languages_to_length_6() {
        let strings = strings_up_to(6);
        let cases = [
            (left_cut_selector(&rat(1, 3)), LanguageSpec::left_cut("a", rat(1, 3)).unwrap()),
            (left_cut_selector(&rat(5, 7)), LanguageSpec::left_cut("b", rat(5, 7)).unwrap()),
            // {x : |x| ≤ 3} is closed downward in the enumeration order.
            (enumeration_min_selector(), LanguageSpec::program("short", |x: &[u8]| Ok(x.len() <= 3))),
        ];
        for (f, lang) in &cases {
            for a in &strings {
                for b in &strings {
                    let out = f.select(a, b).unwrap();
                    if lang.contains(a).unwrap() || lang.contains(b).unwrap() {
                        assert!(lang.contains(&out).unwrap(), "{} on {a:?},{b:?}", f.name);
                    }
                }
            }
        }
    }

    #[test]
    fn broken_selector_is_caught() {
        let f = SelectorFunction::new("bad", |_| Ok(vec![1, 1, 1]));
        assert!(matches!(f.select(&[0], &[1]), Err(Error::SelectorContract { .. })));
    }

    #[test]
    fn coin_flip_is_deterministic_and_returns_an_argument() {
        let f = coin_flip_selector(11);
        let g = coin_flip_selector(11);
        let mut firsts = 0;
        for n in 0..200 {
            let a = index_to_string(n);
            let b = index_to_string(n + 7);
            let out = f.select(&a, &b).unwrap();
            assert_eq!(out, g.select(&a, &b).unwrap());
            firsts += usize::from(out == a);
        }
        assert!(firsts > 50 && firsts < 150);
    }

    #[test]
    fn reductions_honor_their_bounds() {
        let h = strip_last_bit_reduction(vec![1]);
        assert_eq!(h.apply(&[0, 1, 1]).unwrap(), vec![0, 1]);
        assert_eq!(h.apply(&[]).unwrap(), vec![1]);
        let liar = ReductionFunction::new("liar", LengthBound { factor: 1, offset: 0 }, |x| [x, &[0]].concat());
        assert!(matches!(liar.apply(&[1]), Err(Error::ReductionBound { len: 2, bound: 1, .. })));
    }

    #[test]
    fn policy_boundary() {
        let oracle = RestrictedOracle::new(noop_oracle(), OraclePolicy::new(2));
        oracle.set_context(1024);
        assert!(oracle.query(&[0; 20]).is_ok());
        assert!(matches!(oracle.query(&[0; 21]), Err(Error::PolicyViolation { len: 21, bound: 20, .. })));
        let log = oracle.audit().records();
        assert_eq!(log.len(), 2);
        assert_eq!(oracle.audit().violations().len(), 1);
        assert_eq!(OraclePolicy::new(4).max_query_len(1), 4);
        assert_eq!(OraclePolicy::new(4).max_query_len(1025), 44);
    }

    #[test]
    fn registry_slices() {
        let reg = FunctionRegistry::new(vec![
            NamedFunction::new("id", |x| x.to_vec()),
            NamedFunction::new("rev", |x| x.iter().rev().copied().collect()),
        ]);
        assert_eq!(reg.eval(&[1, 0, 1]).unwrap(), vec![0, 1]);
        assert_eq!(reg.eval(&[0, 1, 0, 1]).unwrap(), vec![1, 0]);
        assert_eq!(reg.eval(&[0, 0]).unwrap(), Vec::<u8>::new());
        assert!(matches!(reg.slice(2), Err(Error::SliceOutOfRange { k: 2, len: 2 })));
        assert!(reg.eval(&[0, 0, 1]).is_err());
    }

    #[test]
    fn theta_digits_decide_left_cut_membership() {
        for theta in [rat(2, 3), rat(1, 2), rat(5, 8), rat(1, 3)] {
            for n in 0..300 {
                let x = index_to_string(n);
                let ans = theta_bits(&theta, &x);
                assert_eq!(ans.len(), x.len() + 2);
                let digits = &ans[..x.len() + 1];
                let tail = ans[x.len() + 1] == 1;
                let x1: Word = [x.as_slice(), &[1]].concat();
                let below = x1.as_slice() < digits || (x1.as_slice() == digits && tail);
                assert_eq!(below, val(&x) < theta, "θ={theta} x={x:?}");
            }
        }
    }
}

//! The block-tournament s-gale that succeeds on every language many-one
//! reducible to a selective set.
//!
//! Strings are processed in blocks of k. For block q the selector is played on
//! all ordered pairs of reduced block strings; the resulting tournament, with
//! strongly connected components contracted and topologically sorted, gives an
//! order ≺_q in which membership is upward closed. Sub-strategy i bets that the
//! block members are exactly `{j : i ⪯_q j}`, with i = k betting on none.
//!
//! Masses: with `alive(w)` the sub-strategies consistent with the bits of the
//! current block, `M(w) = M(block start)·|alive(w)|/(k+1)`.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use num_bigint::BigUint;
use num_traits::{One, Signed, ToPrimitive, Zero};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gale::{mass_at, prefix_masses, DimensionExponent, GaleSpec, MassFunction, Node, SymbolSource};
use crate::lang::{index_to_string, show, LanguageSpec, OraclePolicy, QueryAudit, ReductionFunction, SelectorFunction};
use crate::rational::{format_rational, log2_rational, to_f64, Rational};

const FLOAT_BUDGET: f64 = 1e-9;

fn exponent_parts(s: &Rational) -> Result<(u32, u32)> {
    if !s.is_positive() {
        return Err(Error::InvalidExponent(format!("block size needs s > 0, got {}", format_rational(s))));
    }
    let p = s.numer().to_u32();
    let r = s.denom().to_u32();
    match (p, r) {
        (Some(p), Some(r)) => Ok((p, r)),
        _ => Err(Error::InvalidExponent(format!("exponent {} is too fine", format_rational(s)))),
    }
}

/// `2^{ks}/(k+1) > 1`, decided as `2^{k·p} > (k+1)^r` for `s = p/r`.
pub fn block_size_ok(k: usize, s: &Rational) -> Result<bool> {
    let (p, r) = exponent_parts(s)?;
    if k == 0 {
        return Ok(false);
    }
    let lhs = BigUint::one() << (k as u64 * p as u64);
    let rhs = BigUint::from(k + 1).pow(r);
    Ok(lhs > rhs)
}

/// The least k ≥ 1 with `2^{ks}/(k+1) > 1`.
pub fn min_block_size(s: &Rational) -> Result<usize> {
    exponent_parts(s)?;
    let mut k = 1;
    while !block_size_ok(k, s)? {
        k += 1;
    }
    Ok(k)
}

#[derive(Clone, Debug)]
pub struct StrategyConfig {
    pub s: Rational,
    pub k: usize,
    pub selector: SelectorFunction,
    pub reduction: ReductionFunction,
    pub policy: Option<OraclePolicy>,
    pub cache_capacity: usize,
}

impl StrategyConfig {
    /// `k = None` picks [`min_block_size`].
    pub fn new(s: Rational, k: Option<usize>, selector: SelectorFunction, reduction: ReductionFunction) -> Result<Self> {
        if !s.is_positive() || s > Rational::one() {
            return Err(Error::InvalidExponent(format!("selective strategy needs s in (0,1], got {}", format_rational(&s))));
        }
        let k = match k {
            Some(k) => k,
            None => min_block_size(&s)?,
        };
        let config = StrategyConfig { s, k, selector, reduction, policy: None, cache_capacity: 64 };
        config.validate()?;
        Ok(config)
    }

    pub fn with_policy(mut self, policy: OraclePolicy) -> Self {
        self.policy = Some(policy);
        self
    }

    pub fn with_cache_capacity(mut self, capacity: usize) -> Self {
        self.cache_capacity = capacity;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !block_size_ok(self.k, &self.s)? {
            return Err(Error::BlockSize { k: self.k, s: format_rational(&self.s) });
        }
        Ok(())
    }

    /// `ks − log2(k+1)`, the guaranteed log2 gain per block.
    pub fn gain_per_block(&self) -> f64 {
        self.k as f64 * to_f64(&self.s) - ((self.k + 1) as f64).log2()
    }

    fn block_string(&self, q: u64, i: usize) -> Vec<u8> {
        index_to_string(q * self.k as u64 + i as u64)
    }
}

/// The tournament of block q and its linear order. `rank[v]` is the position of
/// v in `order`; `rank[k] = k` places the extra vertex last.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BlockTournament {
    pub q: u64,
    pub k: usize,
    pub edges: Vec<(usize, usize)>,
    /// Strongly connected components in topological order, each sorted.
    pub components: Vec<Vec<usize>>,
    pub order: Vec<usize>,
    pub rank: Vec<usize>,
}

impl BlockTournament {
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.binary_search(&(i, j)).is_ok()
    }

    /// `i ⪯_q j`.
    pub fn precedes_eq(&self, i: usize, j: usize) -> bool {
        self.rank[i] <= self.rank[j]
    }

    /// Whether `j` is reachable from `i` along tournament edges.
    pub fn has_path(&self, i: usize, j: usize) -> bool {
        let mut seen = vec![false; self.k];
        let mut stack = vec![i];
        seen[i] = true;
        while let Some(v) = stack.pop() {
            if v == j {
                return true;
            }
            for &(a, b) in &self.edges {
                if a == v && !seen[b] {
                    seen[b] = true;
                    stack.push(b);
                }
            }
        }
        false
    }

    /// The block membership pattern sub-strategy i bets on.
    pub fn prediction(&self, i: usize) -> Vec<bool> {
        (0..self.k).map(|j| self.precedes_eq(i, j)).collect()
    }

    /// Sub-strategies consistent with the first `bits.len()` bits of the block.
    pub fn alive(&self, bits: &[u8]) -> usize {
        (0..=self.k)
            .filter(|&i| bits.iter().enumerate().all(|(j, &b)| (b == 1) == self.precedes_eq(i, j)))
            .count()
    }

    /// The i whose prediction matches `members`, if any.
    pub fn threshold_for(&self, members: &[bool]) -> Option<usize> {
        (0..=self.k).find(|&i| self.prediction(i) == members)
    }
}

fn order_tournament(q: u64, k: usize, edges: Vec<(usize, usize)>) -> BlockTournament {
    let mut graph = DiGraph::<(), ()>::new();
    let nodes: Vec<_> = (0..k).map(|_| graph.add_node(())).collect();
    for &(i, j) in &edges {
        graph.add_edge(nodes[i], nodes[j], ());
    }
    let mut comps: Vec<Vec<usize>> = tarjan_scc(&graph)
        .into_iter()
        .map(|c| {
            let mut c: Vec<usize> = c.into_iter().map(|n| n.index()).collect();
            c.sort_unstable();
            c
        })
        .collect();
    comps.sort_by_key(|c| c[0]);
    let mut comp_of = vec![0; k];
    for (ci, c) in comps.iter().enumerate() {
        for &v in c {
            comp_of[v] = ci;
        }
    }
    let mut succ = vec![Vec::new(); comps.len()];
    let mut indegree = vec![0usize; comps.len()];
    for &(i, j) in &edges {
        let (a, b) = (comp_of[i], comp_of[j]);
        if a != b && !succ[a].contains(&b) {
            succ[a].push(b);
            indegree[b] += 1;
        }
    }
    // comps are sorted by smallest vertex, so the component index is the key
    let mut ready: BinaryHeap<Reverse<usize>> = (0..comps.len()).filter(|&c| indegree[c] == 0).map(Reverse).collect();
    let mut components = Vec::with_capacity(comps.len());
    while let Some(Reverse(c)) = ready.pop() {
        for &n in &succ[c] {
            indegree[n] -= 1;
            if indegree[n] == 0 {
                ready.push(Reverse(n));
            }
        }
        components.push(comps[c].clone());
    }
    let order: Vec<usize> = components.iter().flatten().copied().collect();
    let mut rank = vec![0; k + 1];
    for (pos, &v) in order.iter().enumerate() {
        rank[v] = pos;
    }
    rank[k] = k;
    BlockTournament { q, k, edges, components, order, rank }
}

/// Builds the tournament of block q with k² selector calls and k reduction calls.
pub fn build_tournament(q: u64, config: &StrategyConfig) -> Result<BlockTournament> {
    let k = config.k;
    if let Some(oracle) = config.selector.oracle() {
        oracle.set_context(q as usize * k + 1);
    }
    let images: Vec<Vec<u8>> =
        (0..k).map(|i| config.reduction.apply(&config.block_string(q, i))).collect::<Result<_>>()?;
    let mut edges = Vec::new();
    for i in 0..k {
        for j in 0..k {
            if config.selector.select(&images[i], &images[j])? == images[j] {
                edges.push((i, j));
            }
        }
    }
    Ok(order_tournament(q, k, edges))
}

/// Which i describes `A` on block q. Reads A's memberships directly, so it is a
/// checking tool and never used by the betting rule.
pub fn threshold_index(q: u64, config: &StrategyConfig, lang: &LanguageSpec) -> Result<usize> {
    let t = build_tournament(q, config)?;
    block_threshold(&t, config, lang)
}

fn block_threshold(t: &BlockTournament, config: &StrategyConfig, lang: &LanguageSpec) -> Result<usize> {
    let members: Vec<bool> = (0..config.k).map(|j| lang.contains(&config.block_string(t.q, j))).collect::<Result<_>>()?;
    t.threshold_for(&members).ok_or(Error::ThresholdViolated { q: t.q })
}

/// The k+1 sub-strategy masses at w. For |w| = qk + j with j in 1..=k, a live
/// sub-strategy holds the block-start mass and a dead one holds 0.
#[derive(Clone, Debug, PartialEq)]
pub struct SubStrategyState {
    pub q: u64,
    pub j: usize,
    pub masses: Vec<Rational>,
}

impl SubStrategyState {
    /// `(1/(k+1))·Σ_i M_i`.
    pub fn aggregate(&self) -> Rational {
        let sum: Rational = self.masses.iter().cloned().sum();
        sum / Rational::from_integer(self.masses.len().into())
    }
}

/// The selective s-gale as a mass function, with a tournament cache and call counters.
pub struct SelectiveGale {
    config: StrategyConfig,
    cache: RwLock<BTreeMap<u64, Arc<BlockTournament>>>,
    build_lock: Mutex<()>,
    selector_calls: AtomicU64,
    reduction_calls: AtomicU64,
    builds: AtomicU64,
    audit: Option<QueryAudit>,
}

impl fmt::Debug for SelectiveGale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SelectiveGale")
            .field("s", &format_rational(&self.config.s))
            .field("k", &self.config.k)
            .field("selector", &self.config.selector.name)
            .field("reduction", &self.config.reduction.name)
            .finish()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CallCounts {
    pub tournaments: u64,
    pub selector_calls: u64,
    pub reduction_calls: u64,
}

impl SelectiveGale {
    pub fn new(config: StrategyConfig) -> Result<Arc<Self>> {
        config.validate()?;
        let audit = config.policy.map(QueryAudit::new);
        Ok(Arc::new(SelectiveGale {
            config,
            cache: RwLock::new(BTreeMap::new()),
            build_lock: Mutex::new(()),
            selector_calls: AtomicU64::new(0),
            reduction_calls: AtomicU64::new(0),
            builds: AtomicU64::new(0),
            audit,
        }))
    }

    pub fn config(&self) -> &StrategyConfig {
        &self.config
    }

    /// The query log of reduction inputs, when a policy is configured.
    pub fn audit(&self) -> Option<&QueryAudit> {
        self.audit.as_ref()
    }

    pub fn counts(&self) -> CallCounts {
        CallCounts {
            tournaments: self.builds.load(Ordering::Relaxed),
            selector_calls: self.selector_calls.load(Ordering::Relaxed),
            reduction_calls: self.reduction_calls.load(Ordering::Relaxed),
        }
    }

    pub fn tournament(&self, q: u64) -> Result<Arc<BlockTournament>> {
        if let Some(t) = self.cache.read().expect("tournament cache poisoned").get(&q) {
            return Ok(Arc::clone(t));
        }
        let _guard = self.build_lock.lock().expect("build lock poisoned");
        if let Some(t) = self.cache.read().expect("tournament cache poisoned").get(&q) {
            return Ok(Arc::clone(t));
        }
        let k = self.config.k;
        if let Some(audit) = &self.audit {
            let context = q as usize * k + 1;
            for i in 0..k {
                audit.check(context, &self.config.block_string(q, i))?;
            }
        }
        self.builds.fetch_add(1, Ordering::Relaxed);
        self.reduction_calls.fetch_add(k as u64, Ordering::Relaxed);
        self.selector_calls.fetch_add((k * k) as u64, Ordering::Relaxed);
        let t = Arc::new(build_tournament(q, &self.config)?);
        let mut cache = self.cache.write().expect("tournament cache poisoned");
        while !cache.is_empty() && cache.len() >= self.config.cache_capacity {
            cache.pop_first();
        }
        if self.config.cache_capacity > 0 {
            cache.insert(q, Arc::clone(&t));
        }
        Ok(t)
    }

    pub fn sub_state(&self, word: &[u8]) -> Result<SubStrategyState> {
        let k = self.config.k;
        if word.is_empty() {
            return Ok(SubStrategyState { q: 0, j: 0, masses: vec![Rational::one(); k + 1] });
        }
        let q = (word.len() - 1) / k;
        let start = q * k;
        let j = word.len() - start;
        let base = mass_at(self, &word[..start])?;
        let t = self.tournament(q as u64)?;
        let bits = &word[start..];
        let masses = (0..=k)
            .map(|i| {
                let live = bits.iter().enumerate().all(|(v, &b)| (b == 1) == t.precedes_eq(i, v));
                if live {
                    base.clone()
                } else {
                    Rational::zero()
                }
            })
            .collect();
        Ok(SubStrategyState { q: q as u64, j, masses })
    }

    pub fn gale_spec(self: &Arc<Self>) -> GaleSpec {
        let id = format!(
            "selective(s={},k={},{},{})",
            format_rational(&self.config.s),
            self.config.k,
            self.config.selector.name,
            self.config.reduction.name
        );
        let exponent = DimensionExponent::new(self.config.s.clone()).expect("validated exponent");
        GaleSpec::binary(id, exponent, Arc::clone(self) as Arc<dyn MassFunction>).expect("binary mass")
    }
}

impl MassFunction for SelectiveGale {
    fn arity(&self) -> usize {
        2
    }

    fn root(&self) -> Result<Node> {
        Ok(Node::leaf(Rational::one()))
    }

    fn child(&self, word: &[u8], node: &Node, symbol: u8) -> Result<Node> {
        if node.mass.is_zero() {
            return Ok(Node::leaf(Rational::zero()));
        }
        let k = self.config.k;
        let q = word.len() / k;
        let start = q * k;
        let t = self.tournament(q as u64)?;
        let mut bits = word[start..].to_vec();
        let before = if bits.is_empty() { k + 1 } else { t.alive(&bits) };
        bits.push(symbol);
        let after = t.alive(&bits);
        let ratio = Rational::new(after.into(), before.into());
        Ok(Node::leaf(&node.mass * ratio))
    }
}

pub fn selective_gale(config: StrategyConfig) -> Result<GaleSpec> {
    Ok(SelectiveGale::new(config)?.gale_spec())
}

#[derive(Clone, Debug, Serialize)]
pub struct BlockDiagnostic {
    pub q: u64,
    pub order: Vec<usize>,
    pub i: Option<usize>,
    /// `log2 d(A↾(q+1)k)`, at the end of the block.
    pub capital_log2: f64,
    pub bound_log2: f64,
    pub exact_ok: bool,
    pub float_ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuccessReport {
    pub gale_id: String,
    pub fixture_id: String,
    pub s: String,
    pub k: usize,
    pub n: usize,
    #[serde(skip)]
    pub trace: Vec<f64>,
    pub blocks: Vec<BlockDiagnostic>,
    pub bound_satisfied: bool,
    pub final_capital_log2: f64,
    pub final_bound_log2: f64,
    pub threshold_violations: Vec<u64>,
    pub policy_violations: Vec<String>,
    pub queries_audited: usize,
    pub calls: CallCounts,
    pub errors: Vec<String>,
}

impl SuccessReport {
    pub fn clean(&self) -> bool {
        self.bound_satisfied && self.threshold_violations.is_empty() && self.policy_violations.is_empty() && self.errors.is_empty()
    }
}

/// Runs the gale along A's first n bits and checks `d(A↾qk) ≥ (2^{ks}/(k+1))^q`
/// at every block boundary, exactly (`M(A↾qk)·(k+1)^q ≥ 1`) and in floats.
/// Problems are collected in the report.
pub fn certify_success(config: StrategyConfig, lang: &LanguageSpec, n: usize) -> Result<SuccessReport> {
    let engine = SelectiveGale::new(config)?;
    certify_with(&engine, lang, n)
}

pub fn certify_with(engine: &Arc<SelectiveGale>, lang: &LanguageSpec, n: usize) -> Result<SuccessReport> {
    let config = engine.config();
    let k = config.k;
    let s = to_f64(&config.s);
    let gain = config.gain_per_block();
    let spec = engine.gale_spec();
    let mut report = SuccessReport {
        gale_id: spec.id.clone(),
        fixture_id: lang.source_id().to_string(),
        s: format_rational(&config.s),
        k,
        n,
        trace: Vec::new(),
        blocks: Vec::new(),
        bound_satisfied: true,
        final_capital_log2: 0.0,
        final_bound_log2: 0.0,
        threshold_violations: Vec::new(),
        policy_violations: Vec::new(),
        queries_audited: 0,
        calls: CallCounts::default(),
        errors: Vec::new(),
    };
    let word = lang.prefix(n)?;
    match prefix_masses(engine.as_ref(), &word) {
        Ok(masses) => {
            report.trace = masses.iter().enumerate().map(|(m, mass)| log2_rational(mass) + s * m as f64).collect();
            let k_plus_one = Rational::from_integer((k + 1).into());
            let mut scale = Rational::one();
            for q in 0..(n / k) as u64 {
                scale *= &k_plus_one;
                let end = (q as usize + 1) * k;
                let capital_log2 = report.trace[end];
                let bound_log2 = (q + 1) as f64 * gain;
                let exact_ok = &masses[end] * &scale >= Rational::one();
                let float_ok = capital_log2 >= bound_log2 - FLOAT_BUDGET;
                let (order, i) = match engine.tournament(q) {
                    Ok(t) => match block_threshold(&t, config, lang) {
                        Ok(i) => (t.order.clone(), Some(i)),
                        Err(Error::ThresholdViolated { q }) => {
                            report.threshold_violations.push(q);
                            (t.order.clone(), None)
                        }
                        Err(e) => return Err(e),
                    },
                    Err(e) => {
                        report.errors.push(e.to_string());
                        (Vec::new(), None)
                    }
                };
                report.bound_satisfied &= exact_ok && float_ok;
                report.blocks.push(BlockDiagnostic { q, order, i, capital_log2, bound_log2, exact_ok, float_ok });
            }
            report.final_capital_log2 = *report.trace.last().expect("trace has the root");
            report.final_bound_log2 = (n / k) as f64 * gain;
        }
        Err(e) => {
            report.bound_satisfied = false;
            report.errors.push(e.to_string());
        }
    }
    let mut audited = 0;
    for audit in engine.audit().into_iter().chain(config.selector.oracle().map(|o| o.audit())) {
        audited += audit.query_count();
        report.policy_violations.extend(
            audit.violations().iter().map(|r| format!("{} (len {}, context {})", show(&r.query), r.query.len(), r.context)),
        );
    }
    report.queries_audited = audited;
    report.calls = engine.counts();
    Ok(report)
}

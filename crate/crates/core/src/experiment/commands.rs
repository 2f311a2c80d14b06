use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use super::config::{beta_param, gamma_param, is_martingale, opt_rational, str_param, u64_param, Entry, ExperimentConfig};
use crate::error::{Error, Result};
use crate::gale::{capitals_along, martingale_to_sgale, prefix_masses, trace_word, Alphabet, DimensionExponent, GaleSpec, LogCapital, SymbolSource};
use crate::pairs::{encode_pair, flatten, union_language};
use crate::rational::{format_rational, log2_rational, rat, to_f64, Rational};
use crate::selective::{certify_with, SelectiveGale};
use crate::transforms::{check_lift_preconditions, find_exponent_pair, lift_to_pair_gale, to_beta_gale, LiftFeasibility};

const FLOAT_BUDGET: f64 = 1e-9;

/// One row of a trace CSV.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRecord {
    pub n: usize,
    pub log2_capital: f64,
    pub gale_id: String,
    pub fixture_id: String,
    pub block_q: Option<u64>,
}

/// Files written by a command, the property violations it found, and a short
/// human-readable summary.
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub violations: Vec<String>,
    pub summary: Vec<String>,
}

impl Outcome {
    pub fn exit_code(&self) -> u8 {
        if self.violations.is_empty() {
            0
        } else {
            2
        }
    }
}

fn write_json<T: Serialize>(out: &Path, name: &str, value: &T, outcome: &mut Outcome) -> Result<()> {
    let path = out.join(name);
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(&path, text)?;
    outcome.files.push(path);
    Ok(())
}

fn write_csv<T: Serialize>(out: &Path, name: &str, rows: &[T], outcome: &mut Outcome) -> Result<()> {
    let path = out.join(name);
    let mut w = csv::Writer::from_path(&path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    outcome.files.push(path);
    Ok(())
}

fn write_trace(out: &Path, name: &str, rows: &[TraceRecord], outcome: &mut Outcome) -> Result<()> {
    let path = out.join(name);
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["n", "log2_capital", "gale_id", "fixture_id", "block_q"])?;
    for r in rows {
        let q = r.block_q.map(|q| q.to_string()).unwrap_or_default();
        w.write_record([r.n.to_string(), r.log2_capital.to_string(), r.gale_id.clone(), r.fixture_id.clone(), q])?;
    }
    w.flush()?;
    outcome.files.push(path);
    Ok(())
}

fn records(capitals: &[f64], gale_id: &str, fixture_id: &str, k: Option<usize>) -> Vec<TraceRecord> {
    capitals
        .iter()
        .enumerate()
        .map(|(n, &c)| TraceRecord {
            n,
            log2_capital: c,
            gale_id: gale_id.to_string(),
            fixture_id: fixture_id.to_string(),
            block_q: k.map(|k| (n / k) as u64),
        })
        .collect()
}

fn is_property_violation(e: &Error) -> bool {
    matches!(
        e,
        Error::Disjointness { .. }
            | Error::ThresholdViolated { .. }
            | Error::SelectorContract { .. }
            | Error::ReductionBound { .. }
            | Error::PolicyViolation { .. }
    )
}

/// Block sizes of registry gales built by the selective strategy, by id.
fn block_sizes(config: &ExperimentConfig) -> Result<BTreeMap<String, usize>> {
    let mut out = BTreeMap::new();
    for e in config.gales.iter().filter(|e| e.kind == "selective") {
        out.insert(e.name.clone(), config.strategy_config(&e.params, &e.name)?.k);
    }
    Ok(out)
}

#[derive(Serialize)]
struct TraceSummary {
    gale_id: String,
    fixture_id: String,
    crossing: Option<usize>,
    final_log2_capital: f64,
}

/// Capital traces of every pipeline gale on every fixture with its alphabet.
pub fn cmd_trace(config: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let gales = config.pipeline_gales()?;
    let languages = config.all_languages()?;
    let pairs = config.all_pairs()?;
    let ks = block_sizes(config)?;
    let mut jobs: Vec<(&GaleSpec, &dyn SymbolSource)> = Vec::new();
    for g in &gales {
        let sources: Vec<&dyn SymbolSource> = match g.alphabet() {
            Alphabet::Binary => languages.iter().map(|l| l as &dyn SymbolSource).collect(),
            Alphabet::Ternary => pairs.iter().map(|p| p as &dyn SymbolSource).collect(),
        };
        jobs.extend(sources.into_iter().map(|s| (g, s)));
    }
    let results: Vec<Result<Vec<f64>>> = jobs
        .par_iter()
        .map(|(g, src)| Ok(trace_word(g, &src.prefix(config.n)?, config.threshold)?.capitals))
        .collect();

    let mut outcome = Outcome::default();
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for ((g, src), res) in jobs.iter().zip(results) {
        match res {
            Ok(capitals) => {
                let crossing = capitals.iter().position(|&c| c >= config.threshold);
                summary.push(TraceSummary {
                    gale_id: g.id.clone(),
                    fixture_id: src.source_id().to_string(),
                    crossing,
                    final_log2_capital: *capitals.last().expect("non-empty trace"),
                });
                rows.extend(records(&capitals, &g.id, src.source_id(), ks.get(&g.id).copied()));
            }
            Err(e) if is_property_violation(&e) => {
                outcome.violations.push(format!("{} on {}: {e}", g.id, src.source_id()))
            }
            Err(e) => return Err(e),
        }
    }
    write_trace(out, "trace.csv", &rows, &mut outcome)?;
    write_json(out, "trace_summary.json", &summary, &mut outcome)?;
    outcome.summary.push(format!("{} traces of length {}", summary.len(), config.n));
    Ok(outcome)
}

/// The least grid exponent at which some registry martingale, shifted to that
/// exponent, crosses the threshold; `None` stands for +∞.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub s_hat: Option<String>,
    pub gale_id: Option<String>,
    #[serde(skip)]
    pub value: Option<Rational>,
}

/// ŝ over the registry. Shifting a martingale to s keeps its mass and adds
/// `s·|w|` to its log2 capital, so one mass trace per member serves every grid point.
pub fn estimate_dimension(
    registry: &[GaleSpec],
    source: &dyn SymbolSource,
    grid: &[Rational],
    n: usize,
    threshold: f64,
) -> Result<Estimate> {
    let word = source.prefix(n)?;
    let mut traces = Vec::with_capacity(registry.len());
    for g in registry {
        if !is_martingale(g) {
            return Err(Error::Unsupported(format!("{} is not a uniform binary martingale", g.id)));
        }
        let masses = prefix_masses(g.mass.as_ref(), &word)?;
        traces.push(masses.iter().map(log2_rational).collect::<Vec<f64>>());
    }
    for s in grid {
        let sf = to_f64(s);
        for (g, t) in registry.iter().zip(&traces) {
            if t.iter().enumerate().any(|(m, &l)| l + sf * m as f64 >= threshold) {
                return Ok(Estimate {
                    s_hat: Some(format_rational(s)),
                    gale_id: Some(g.id.clone()),
                    value: Some(s.clone()),
                });
            }
        }
    }
    Ok(Estimate { s_hat: None, gale_id: None, value: None })
}

fn fmt_estimate(e: &Option<Rational>) -> String {
    e.as_ref().map_or_else(|| "inf".to_string(), format_rational)
}

/// Supremum with `None` as +∞.
fn sup(values: &[Option<Rational>]) -> Option<Rational> {
    if values.iter().any(Option::is_none) {
        return None;
    }
    values.iter().flatten().max().cloned()
}

fn lt_inf(a: &Option<Rational>, b: &Option<Rational>) -> bool {
    match (a, b) {
        (Some(a), Some(b)) => a < b,
        (Some(_), None) => true,
        _ => false,
    }
}

#[derive(Serialize)]
struct DimestRow {
    fixture_id: String,
    s_hat_estimate: String,
    gale_id: String,
}

fn martingale_registry(gales: Vec<GaleSpec>) -> (Vec<GaleSpec>, Vec<String>) {
    let (keep, skip): (Vec<_>, Vec<_>) = gales.into_iter().partition(is_martingale);
    (keep, skip.into_iter().map(|g| g.id).collect())
}

/// Empirical dimension estimate per language fixture.
pub fn cmd_dimest(config: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let grid = config.grid.points()?;
    let (registry, skipped) = martingale_registry(config.gales(None)?);
    let mut languages = config.all_languages()?;
    languages.sort_by(|a, b| a.name().cmp(b.name()));
    let estimates: Vec<Estimate> = languages
        .par_iter()
        .map(|l| estimate_dimension(&registry, l, &grid, config.n, config.threshold))
        .collect::<Result<_>>()?;

    let rows: Vec<DimestRow> = languages
        .iter()
        .zip(&estimates)
        .map(|(l, e)| DimestRow {
            fixture_id: l.name().to_string(),
            s_hat_estimate: fmt_estimate(&e.value),
            gale_id: e.gale_id.clone().unwrap_or_default(),
        })
        .collect();
    let values: Vec<Option<Rational>> = estimates.iter().map(|e| e.value.clone()).collect();
    let mut outcome = Outcome::default();
    write_csv(out, "dimest.csv", &rows, &mut outcome)?;
    write_json(
        out,
        "dimest.json",
        &serde_json::json!({
            "label": "registry-relative dimension estimate",
            "n": config.n,
            "threshold": config.threshold,
            "grid_points": grid.len(),
            "registry": registry.iter().map(|g| g.id.clone()).collect::<Vec<_>>(),
            "skipped_non_martingales": skipped,
            "rows": rows,
            "sup": fmt_estimate(&sup(&values)),
        }),
        &mut outcome,
    )?;
    outcome.summary.push(format!("sup of estimates: {}", fmt_estimate(&sup(&values))));
    Ok(outcome)
}

#[derive(Clone, Debug, Serialize)]
pub struct P2sCell {
    pub oracle: String,
    pub fixture_id: String,
    pub s_hat_estimate: String,
    pub gale_id: String,
    pub queries: usize,
    pub policy_violations: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct P2sReport {
    pub label: String,
    pub cells: Vec<P2sCell>,
    pub sup_by_oracle: BTreeMap<String, String>,
    pub min_sup: String,
    pub argmin: Vec<String>,
    #[serde(skip)]
    pub min_sup_value: Option<Rational>,
}

/// The oracle × fixture table of estimates with per-oracle suprema and their minimum.
pub fn p2s_report(config: &ExperimentConfig) -> Result<P2sReport> {
    let grid = config.grid.points()?;
    let mut oracles: Vec<Entry> = config.oracles.clone();
    if oracles.is_empty() {
        oracles.push(Entry { name: "noop".into(), kind: "noop".into(), params: Value::Null });
    }
    oracles.sort_by(|a, b| a.name.cmp(&b.name));
    let mut languages = config.all_languages()?;
    if languages.is_empty() {
        return Err(Error::Config("p2s needs at least one language fixture".into()));
    }
    languages.sort_by(|a, b| a.name().cmp(b.name()));
    let jobs: Vec<(&Entry, usize)> = oracles.iter().flat_map(|o| (0..languages.len()).map(move |i| (o, i))).collect();
    let cells: Vec<(P2sCell, Option<Rational>)> = jobs
        .par_iter()
        .map(|&(entry, i)| {
            let oracle = config.oracle(entry)?;
            let (registry, _) = martingale_registry(config.gales(Some(&oracle))?);
            let lang = &languages[i];
            let est = estimate_dimension(&registry, lang, &grid, config.n, config.threshold)?;
            let cell = P2sCell {
                oracle: entry.name.clone(),
                fixture_id: lang.name().to_string(),
                s_hat_estimate: fmt_estimate(&est.value),
                gale_id: est.gale_id.clone().unwrap_or_default(),
                queries: oracle.audit().query_count(),
                policy_violations: oracle.audit().violations().len(),
            };
            Ok((cell, est.value))
        })
        .collect::<Result<_>>()?;

    let per_oracle: Vec<(String, Option<Rational>)> = oracles
        .iter()
        .zip(cells.chunks(languages.len()))
        .map(|(o, chunk)| (o.name.clone(), sup(&chunk.iter().map(|(_, v)| v.clone()).collect::<Vec<_>>())))
        .collect();
    let min_sup_value = per_oracle
        .iter()
        .map(|(_, v)| v.clone())
        .reduce(|a, b| if lt_inf(&b, &a) { b } else { a })
        .expect("at least one oracle");
    let argmin = per_oracle.iter().filter(|(_, v)| *v == min_sup_value).map(|(n, _)| n.clone()).collect();
    let sups = per_oracle.iter().map(|(n, v)| (n.clone(), fmt_estimate(v))).collect();
    Ok(P2sReport {
        label: "registry-relative dimension estimate".into(),
        cells: cells.into_iter().map(|(c, _)| c).collect(),
        sup_by_oracle: sups,
        min_sup: fmt_estimate(&min_sup_value),
        argmin,
        min_sup_value,
    })
}

pub fn cmd_p2s(config: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let report = p2s_report(config)?;
    let mut outcome = Outcome::default();
    write_csv(out, "p2s.csv", &report.cells, &mut outcome)?;
    write_json(out, "p2s.json", &report, &mut outcome)?;
    for c in report.cells.iter().filter(|c| c.policy_violations > 0) {
        outcome.violations.push(format!("{} on {}: {} policy violations", c.oracle, c.fixture_id, c.policy_violations));
    }
    outcome.summary.push(format!("min-sup estimate: {} (oracles {})", report.min_sup, report.argmin.join(", ")));
    Ok(outcome)
}

#[derive(Serialize)]
struct BlockLine {
    q: u64,
    order: Vec<usize>,
    i: Option<usize>,
    capital_log2: f64,
}

/// Runs the selective strategy on a fixture and certifies the per-block bound.
pub fn cmd_selective(config: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let params = config.selective.as_ref().ok_or_else(|| Error::Config("missing \"selective\" section".into()))?;
    let strategy = config.strategy_config(params, "selective")?;
    let fixture = str_param(params, "fixture")?.ok_or_else(|| Error::Config("selective: missing \"fixture\"".into()))?;
    let lang = config.language(&fixture)?;
    let n = u64_param(params, "n")?.map_or(config.n, |n| n as usize);
    let k = strategy.k;
    let engine = SelectiveGale::new(strategy)?;
    let report = certify_with(&engine, &lang, n)?;

    let mut outcome = Outcome::default();
    let blocks: Vec<BlockLine> = report
        .blocks
        .iter()
        .map(|b| BlockLine { q: b.q, order: b.order.clone(), i: b.i, capital_log2: b.capital_log2 })
        .collect();
    write_json(out, "selective_blocks.json", &blocks, &mut outcome)?;
    write_json(out, "selective_report.json", &report, &mut outcome)?;
    write_trace(out, "selective_trace.csv", &records(&report.trace, &report.gale_id, &report.fixture_id, Some(k)), &mut outcome)?;

    outcome.summary.push(format!("bound satisfied: {}", report.bound_satisfied));
    outcome.summary.push(format!(
        "final log2 capital: {:.6} (bound {:.6})",
        report.final_capital_log2, report.final_bound_log2
    ));
    if !report.bound_satisfied {
        let first = report.blocks.iter().find(|b| !(b.exact_ok && b.float_ok)).map(|b| b.q);
        outcome.violations.push(format!("capital bound fails first at block {first:?}"));
    }
    if let Some(q) = report.threshold_violations.first() {
        outcome.violations.push(format!("threshold violated at q={q}"));
    }
    if !report.policy_violations.is_empty() {
        outcome.violations.push(format!("{} oracle policy violations", report.policy_violations.len()));
    }
    outcome.violations.extend(report.errors.iter().cloned());
    Ok(outcome)
}

#[derive(Clone, Debug, Serialize)]
pub struct LiftReport {
    pub source: String,
    pub pair: String,
    pub n: usize,
    pub s: String,
    pub t: String,
    pub s_prime: Option<String>,
    pub s_prime_searched: bool,
    pub feasible: bool,
    pub failing_inequality: Option<String>,
    pub zero_margin: Option<f64>,
    pub one_margin: Option<f64>,
    pub domination_min_residual: Option<f64>,
    pub domination_ok: bool,
    pub crossing_pair: Option<usize>,
    pub crossing_flat: Option<usize>,
    pub transfer_ok: bool,
}

/// Chains a binary martingale through the s-gale shift, the β transform and the
/// pair lift, then checks `D(w) ≥ d(w̄)` along an encoded pair.
pub fn cmd_liftpair(config: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let params = config.liftpair.as_ref().ok_or_else(|| Error::Config("missing \"liftpair\" section".into()))?;
    let source_name = str_param(params, "source")?.ok_or_else(|| Error::Config("liftpair: missing \"source\"".into()))?;
    let pair_name = str_param(params, "pair")?.ok_or_else(|| Error::Config("liftpair: missing \"pair\"".into()))?;
    let n = u64_param(params, "n")?.map_or(config.n, |n| n as usize);
    let s = opt_rational(params, "s")?.unwrap_or_else(|| rat(1, 2));
    let t = opt_rational(params, "t")?.unwrap_or_else(|| rat(3, 10));
    let beta = beta_param(params)?;
    let gamma = gamma_param(params)?;

    let entry = config
        .gales
        .iter()
        .find(|e| e.name == source_name)
        .ok_or_else(|| Error::Config(format!("unknown gale {source_name:?}")))?;
    let martingale = config.gale(entry, None)?;
    let d = martingale_to_sgale(&martingale, DimensionExponent::new(s.clone())?)?;
    let t_exp = DimensionExponent::new(t.clone())?;
    let d_beta = to_beta_gale(&d, &t_exp, &beta)?;
    let pair = config.pair(&pair_name)?;

    let mut report = LiftReport {
        source: source_name,
        pair: pair_name,
        n,
        s: format_rational(&s),
        t: format_rational(&t),
        s_prime: None,
        s_prime_searched: false,
        feasible: false,
        failing_inequality: None,
        zero_margin: None,
        one_margin: None,
        domination_min_residual: None,
        domination_ok: false,
        crossing_pair: None,
        crossing_flat: None,
        transfer_ok: false,
    };
    let mut outcome = Outcome::default();
    let s_prime = match opt_rational(params, "s_prime")? {
        Some(sp) => Some(sp),
        None => {
            report.s_prime_searched = true;
            if t >= Rational::from_integer(1.into()) {
                return Err(Error::InvalidExponent("t must lie in (0,1)".into()));
            }
            find_exponent_pair(&beta, &gamma, &t)?
        }
    };
    // the largest grid value explains an infeasible search
    let probe = s_prime.clone().unwrap_or_else(|| rat(999, 1000));
    let feasibility: Result<LiftFeasibility> = check_lift_preconditions(&beta, &t, &gamma, &probe);
    let s_prime = match (s_prime, feasibility) {
        (Some(sp), Ok(f)) => {
            report.zero_margin = Some(f.zero_margin);
            report.one_margin = Some(f.one_margin);
            report.feasible = true;
            sp
        }
        (sp, Err(e)) => {
            report.s_prime = sp.as_ref().map(format_rational);
            if let Error::InfeasibleExponents { inequality, margin } | Error::AmbiguousExponents { inequality, margin } = &e {
                report.failing_inequality = Some(inequality.clone());
                report.one_margin = Some(*margin);
            }
            write_json(out, "liftpair_report.json", &report, &mut outcome)?;
            return Err(e);
        }
        (None, Ok(_)) => unreachable!("an infeasible search cannot pass the probe"),
    };
    report.s_prime = Some(format_rational(&s_prime));
    let lifted = lift_to_pair_gale(&d_beta, &gamma, &DimensionExponent::new(s_prime)?)?;

    let encoded = match encode_pair(&pair, n) {
        Ok(w) => w,
        Err(e) if is_property_violation(&e) => {
            outcome.violations.push(e.to_string());
            write_json(out, "liftpair_report.json", &report, &mut outcome)?;
            return Ok(outcome);
        }
        Err(e) => return Err(e),
    };
    let flat = flatten(&encoded);
    let upper: Vec<f64> = capitals_along(&lifted, &encoded)?.iter().map(LogCapital::value).collect();
    let lower: Vec<f64> = capitals_along(&d_beta, &flat)?.iter().map(LogCapital::value).collect();
    let min_residual = upper
        .iter()
        .zip(&lower)
        .filter(|(_, l)| l.is_finite())
        .map(|(u, l)| u - l)
        .fold(f64::INFINITY, f64::min);
    report.domination_min_residual = Some(min_residual);
    report.domination_ok = min_residual >= -FLOAT_BUDGET;
    report.crossing_pair = upper.iter().position(|&c| c >= config.threshold);
    report.crossing_flat = lower.iter().position(|&c| c >= config.threshold);
    report.transfer_ok = match (report.crossing_pair, report.crossing_flat) {
        (_, None) => true,
        (Some(a), Some(b)) => a <= b,
        (None, Some(_)) => false,
    };

    let union = union_language(&pair);
    let mut rows = records(&upper, &lifted.id, pair.name(), None);
    rows.extend(records(&lower, &d_beta.id, union.name(), None));
    write_trace(out, "liftpair_trace.csv", &rows, &mut outcome)?;
    let path = out.join("liftpair_pair.txt");
    fs::write(&path, format!("{}\n", Alphabet::Ternary.format_word(&encoded)))?;
    outcome.files.push(path);
    write_json(out, "liftpair_report.json", &report, &mut outcome)?;

    outcome.summary.push(format!(
        "s′ = {} ; domination min residual {:.3e} ; crossings pair {:?} / flat {:?}",
        report.s_prime.as_deref().unwrap_or("-"),
        min_residual,
        report.crossing_pair,
        report.crossing_flat
    ));
    if !report.domination_ok {
        outcome.violations.push(format!("domination fails (min residual {min_residual:e})"));
    }
    if !report.transfer_ok {
        outcome.violations.push("success does not transfer to the encoded pair".into());
    }
    Ok(outcome)
}

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::gale::{AlphabetDistribution, DimensionExponent, GaleSpec};
use crate::lang::{
    coin_flip_selector, enumeration_min_selector, first_argument_selector, identity_reduction, left_cut_selector,
    noop_oracle, oracle_left_cut_selector, parse_fixture, strip_last_bit_reduction, theta_bits_oracle, LanguageSpec,
    NamedFunction, OraclePolicy, ReductionFunction, RestrictedOracle, SelectorFunction,
};
use crate::pairs::{gamma_zero, read_pair_fixture, PairEncoding};
use crate::rational::{parse_rational, Rational};
use crate::selective::{SelectiveGale, StrategyConfig};
use crate::strategies;
use crate::transforms::{exponent_shift, lift_to_pair_gale, mixture, to_beta_gale, GaleFamily};

pub const DEFAULT_N: usize = 4096;
pub const DEFAULT_THRESHOLD: f64 = 10.0;
pub const DEFAULT_POLICY_C: usize = 4;

/// A named registry entry: `{name, kind, params}`.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Entry {
    pub name: String,
    pub kind: String,
    #[serde(default)]
    pub params: Value,
}

/// One pipeline stage: `{op, params}`.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stage {
    pub op: String,
    #[serde(default)]
    pub params: Value,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub start: Value,
    pub stop: Value,
    pub step: Value,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { start: Value::from("0"), stop: Value::from("1"), step: Value::from("1/64") }
    }
}

impl GridSpec {
    pub fn points(&self) -> Result<Vec<Rational>> {
        let start = rational_value(&self.start, "grid.start")?;
        let stop = rational_value(&self.stop, "grid.stop")?;
        let step = rational_value(&self.step, "grid.step")?;
        if step <= Rational::from_integer(0.into()) {
            return Err(Error::Config("grid step must be positive".into()));
        }
        let mut out = Vec::new();
        let mut s = start;
        while s <= stop {
            out.push(s.clone());
            s += &step;
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub languages: Vec<Entry>,
    #[serde(default)]
    pub pairs: Vec<Entry>,
    #[serde(default)]
    pub gales: Vec<Entry>,
    #[serde(default)]
    pub pipeline: Vec<Stage>,
    #[serde(default)]
    pub oracles: Vec<Entry>,
    #[serde(default)]
    pub policy_c: Option<usize>,
    #[serde(default)]
    pub selective: Option<Value>,
    #[serde(default)]
    pub liftpair: Option<Value>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Directory relative paths are resolved against; set by the loader.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_n() -> usize {
    DEFAULT_N
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

impl ExperimentConfig {
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self> {
        let mut config: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        config.base_dir = base_dir.to_path_buf();
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("n must be at least 1".into()));
        }
        if !self.threshold.is_finite() {
            return Err(Error::Config("threshold must be finite".into()));
        }
        self.grid.points()?;
        let mut seen = BTreeMap::new();
        for e in self.languages.iter().chain(&self.pairs).chain(&self.gales).chain(&self.oracles) {
            if seen.insert(e.name.as_str(), ()).is_some() {
                return Err(Error::Config(format!("duplicate registry name {:?}", e.name)));
            }
        }
        Ok(())
    }

    pub fn policy(&self) -> OraclePolicy {
        OraclePolicy::new(self.policy_c.unwrap_or(DEFAULT_POLICY_C))
    }

    pub fn resolve_path(&self, p: &str) -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn entry<'a>(&self, list: &'a [Entry], name: &str, what: &str) -> Result<&'a Entry> {
        list.iter().find(|e| e.name == name).ok_or_else(|| Error::Config(format!("unknown {what} {name:?}")))
    }

    pub fn language(&self, name: &str) -> Result<LanguageSpec> {
        self.build_language(self.entry(&self.languages, name, "language")?, 0)
    }

    pub fn all_languages(&self) -> Result<Vec<LanguageSpec>> {
        self.languages.iter().map(|e| self.build_language(e, 0)).collect()
    }

    fn build_language(&self, e: &Entry, depth: usize) -> Result<LanguageSpec> {
        if depth > 16 {
            return Err(Error::Config(format!("language {:?} refers to itself", e.name)));
        }
        let p = &e.params;
        let inner = |key: &str| -> Result<LanguageSpec> {
            let of = str_param(p, key)?.ok_or_else(|| missing(&e.name, key))?;
            self.build_language(self.entry(&self.languages, &of, "language")?, depth + 1)
        };
        match e.kind.as_str() {
            "left_cut" => LanguageSpec::left_cut(&e.name, req_rational(p, "theta", &e.name)?),
            "periodic" => {
                let pattern = str_param(p, "pattern")?.ok_or_else(|| missing(&e.name, "pattern"))?;
                LanguageSpec::periodic(&e.name, crate::gale::Alphabet::Binary.parse_word(&pattern)?)
            }
            "seeded_random" => Ok(LanguageSpec::seeded_random(&e.name, u64_param(p, "seed")?.unwrap_or(self.seed))),
            "fixture" => {
                let path = str_param(p, "path")?.ok_or_else(|| missing(&e.name, "path"))?;
                let text = std::fs::read_to_string(self.resolve_path(&path))
                    .map_err(|err| Error::Config(format!("fixture {:?}: {err}", e.name)))?;
                parse_fixture(&e.name, &text)
            }
            "empty" => Ok(LanguageSpec::empty(&e.name)),
            "all" => Ok(LanguageSpec::all(&e.name)),
            "padded" => Ok(inner("of")?.padded(&e.name)),
            "complement" => Ok(inner("of")?.complement(&e.name)),
            other => Err(Error::Config(format!("language {:?}: unknown kind {other:?}", e.name))),
        }
    }

    pub fn pair(&self, name: &str) -> Result<PairEncoding> {
        self.build_pair(self.entry(&self.pairs, name, "pair")?)
    }

    pub fn all_pairs(&self) -> Result<Vec<PairEncoding>> {
        self.pairs.iter().map(|e| self.build_pair(e)).collect()
    }

    fn build_pair(&self, e: &Entry) -> Result<PairEncoding> {
        let p = &e.params;
        match e.kind.as_str() {
            "languages" => {
                let a = str_param(p, "a")?.ok_or_else(|| missing(&e.name, "a"))?;
                let b = str_param(p, "b")?.ok_or_else(|| missing(&e.name, "b"))?;
                Ok(PairEncoding::new(&e.name, self.language(&a)?, self.language(&b)?))
            }
            "fixture" => {
                let path = str_param(p, "path")?.ok_or_else(|| missing(&e.name, "path"))?;
                let pair = read_pair_fixture(&self.resolve_path(&path))
                    .map_err(|err| Error::Config(format!("pair fixture {:?}: {err}", e.name)))?;
                Ok(PairEncoding::new(&e.name, pair.a, pair.b))
            }
            other => Err(Error::Config(format!("pair {:?}: unknown kind {other:?}", e.name))),
        }
    }

    /// A fresh restricted oracle for the named registry entry.
    pub fn oracle(&self, e: &Entry) -> Result<Arc<RestrictedOracle>> {
        let g: NamedFunction = match e.kind.as_str() {
            "noop" => noop_oracle(),
            "theta_bits" => {
                let thetas = match e.params.get("thetas") {
                    Some(Value::Array(items)) => {
                        items.iter().map(|v| rational_value(v, "thetas")).collect::<Result<Vec<_>>>()?
                    }
                    _ => return Err(missing(&e.name, "thetas")),
                };
                theta_bits_oracle(thetas)
            }
            other => return Err(Error::Config(format!("oracle {:?}: unknown kind {other:?}", e.name))),
        };
        Ok(Arc::new(RestrictedOracle::new(NamedFunction { name: e.name.clone(), func: g.func }, self.policy())))
    }

    /// Builds one registry gale. Oracle-aware kinds consult `oracle`, or an
    /// uninformative oracle when none is given.
    pub fn gale(&self, e: &Entry, oracle: Option<&Arc<RestrictedOracle>>) -> Result<GaleSpec> {
        let p = &e.params;
        let g = match e.kind.as_str() {
            "constant" => strategies::constant_martingale(),
            "bet" => strategies::bet_on(u64_param(p, "symbol")?.unwrap_or(0) as u8)?,
            "biased" => strategies::biased(req_rational(p, "p", &e.name)?)?,
            "predictor" => {
                let lang = str_param(p, "language")?.ok_or_else(|| missing(&e.name, "language"))?;
                let confidence = opt_rational(p, "confidence")?.unwrap_or_else(|| crate::rational::rat(1, 1));
                strategies::predictor(self.language(&lang)?, confidence)?
            }
            "oracle_left_cut" => {
                let slice = u64_param(p, "slice")?.unwrap_or(0) as usize;
                let oracle = match oracle {
                    Some(o) => Arc::clone(o),
                    None => Arc::new(RestrictedOracle::new(noop_oracle(), self.policy())),
                };
                strategies::oracle_left_cut(oracle, slice)
            }
            "selective" => SelectiveGale::new(self.strategy_config(p, &e.name)?)?.gale_spec(),
            other => return Err(Error::Config(format!("gale {:?}: unknown kind {other:?}", e.name))),
        };
        Ok(g.with_id(e.name.clone()))
    }

    pub fn gales(&self, oracle: Option<&Arc<RestrictedOracle>>) -> Result<Vec<GaleSpec>> {
        self.gales.iter().map(|e| self.gale(e, oracle)).collect()
    }

    /// The registry gales after every pipeline stage.
    pub fn pipeline_gales(&self) -> Result<Vec<GaleSpec>> {
        let mut gales = self.gales(None)?;
        for stage in &self.pipeline {
            gales = apply_stage(stage, gales)?;
        }
        Ok(gales)
    }

    /// Selective strategy parameters: `s`, optional `k`, `selector`,
    /// `reduction`, optional `policy_c` and `cache`.
    pub fn strategy_config(&self, p: &Value, name: &str) -> Result<StrategyConfig> {
        let s = req_rational(p, "s", name)?;
        let k = u64_param(p, "k")?.map(|k| k as usize);
        let selector = self.selector(p.get("selector").unwrap_or(&Value::Null), name)?;
        let reduction = reduction(p.get("reduction").unwrap_or(&Value::Null), name)?;
        let mut config = StrategyConfig::new(s, k, selector, reduction)?;
        if let Some(c) = u64_param(p, "policy_c")? {
            config = config.with_policy(OraclePolicy::new(c as usize));
        }
        if let Some(cache) = u64_param(p, "cache")? {
            config = config.with_cache_capacity(cache as usize);
        }
        Ok(config)
    }

    fn selector(&self, v: &Value, name: &str) -> Result<SelectorFunction> {
        let kind = str_param(v, "kind")?.ok_or_else(|| missing(name, "selector.kind"))?;
        match kind.as_str() {
            "left_cut" => Ok(left_cut_selector(&req_rational(v, "theta", name)?)),
            "enumeration_min" => Ok(enumeration_min_selector()),
            "first_argument" => Ok(first_argument_selector()),
            "coin_flip" => Ok(coin_flip_selector(u64_param(v, "seed")?.unwrap_or(self.seed))),
            "oracle_left_cut" => {
                let oracle_name = str_param(v, "oracle")?.ok_or_else(|| missing(name, "selector.oracle"))?;
                let entry = self.entry(&self.oracles, &oracle_name, "oracle")?;
                let slice = u64_param(v, "slice")?.unwrap_or(0) as usize;
                Ok(oracle_left_cut_selector(self.oracle(entry)?, slice))
            }
            other => Err(Error::Config(format!("{name}: unknown selector kind {other:?}"))),
        }
    }
}

fn reduction(v: &Value, name: &str) -> Result<ReductionFunction> {
    match str_param(v, "kind")?.as_deref() {
        None | Some("identity") => Ok(identity_reduction()),
        Some("strip_last_bit") => {
            let image = str_param(v, "empty_image")?.unwrap_or_default();
            Ok(strip_last_bit_reduction(crate::gale::Alphabet::Binary.parse_word(&image)?))
        }
        Some(other) => Err(Error::Config(format!("{name}: unknown reduction kind {other:?}"))),
    }
}

fn binary_distribution(v: Option<&Value>) -> Result<AlphabetDistribution> {
    match v {
        None => AlphabetDistribution::binary(crate::rational::rat(1, 4), crate::rational::rat(3, 4)),
        Some(Value::Array(items)) if items.len() == 2 => {
            AlphabetDistribution::binary(rational_value(&items[0], "beta")?, rational_value(&items[1], "beta")?)
        }
        Some(_) => Err(Error::Config("beta must be a list of two probabilities".into())),
    }
}

pub fn beta_param(p: &Value) -> Result<AlphabetDistribution> {
    binary_distribution(p.get("beta"))
}

pub fn gamma_param(p: &Value) -> Result<AlphabetDistribution> {
    match p.get("gamma") {
        None => Ok(gamma_zero()),
        Some(Value::Array(items)) if items.len() == 3 => AlphabetDistribution::ternary(
            rational_value(&items[0], "gamma")?,
            rational_value(&items[1], "gamma")?,
            rational_value(&items[2], "gamma")?,
        ),
        Some(_) => Err(Error::Config("gamma must be a list of three probabilities".into())),
    }
}

fn exponent(p: &Value, key: &str, stage: &str) -> Result<DimensionExponent> {
    DimensionExponent::new(req_rational(p, key, stage)?)
}

pub fn apply_stage(stage: &Stage, gales: Vec<GaleSpec>) -> Result<Vec<GaleSpec>> {
    let p = &stage.params;
    match stage.op.as_str() {
        "exponent_shift" => {
            let family = GaleFamily::new(gales)?;
            Ok(exponent_shift(&family, &exponent(p, "s", "exponent_shift")?)?.members().to_vec())
        }
        "mixture" => {
            let family = GaleFamily::new(gales)?;
            let weights = match p.get("weights") {
                Some(Value::Array(items)) => {
                    Some(items.iter().map(|v| rational_value(v, "weights")).collect::<Result<Vec<_>>>()?)
                }
                _ => None,
            };
            Ok(vec![mixture(&family, weights)?])
        }
        "to_beta" => {
            let t = exponent(p, "t", "to_beta")?;
            let beta = beta_param(p)?;
            gales.iter().map(|g| to_beta_gale(g, &t, &beta)).collect()
        }
        "lift_pair" => {
            let s_prime = exponent(p, "s_prime", "lift_pair")?;
            let gamma = gamma_param(p)?;
            gales.iter().map(|g| lift_to_pair_gale(g, &gamma, &s_prime)).collect()
        }
        other => Err(Error::Config(format!("unknown pipeline op {other:?}"))),
    }
}

fn missing(name: &str, key: &str) -> Error {
    Error::Config(format!("{name}: missing parameter {key:?}"))
}

/// A rational from a JSON string ("2/3", "0.3") or number.
pub fn rational_value(v: &Value, what: &str) -> Result<Rational> {
    match v {
        Value::String(s) => parse_rational(s),
        Value::Number(n) => parse_rational(&n.to_string()),
        _ => Err(Error::Config(format!("{what}: expected a rational"))),
    }
}

pub fn opt_rational(p: &Value, key: &str) -> Result<Option<Rational>> {
    p.get(key).filter(|v| !v.is_null()).map(|v| rational_value(v, key)).transpose()
}

pub fn req_rational(p: &Value, key: &str, name: &str) -> Result<Rational> {
    opt_rational(p, key)?.ok_or_else(|| missing(name, key))
}

pub fn str_param(p: &Value, key: &str) -> Result<Option<String>> {
    match p.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(_) => Err(Error::Config(format!("parameter {key:?} must be a string"))),
    }
}

pub fn u64_param(p: &Value, key: &str) -> Result<Option<u64>> {
    match p.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => v.as_u64().map(Some).ok_or_else(|| Error::Config(format!("parameter {key:?} must be a non-negative integer"))),
    }
}

/// Registry gales that are martingales over the uniform binary distribution.
pub fn is_martingale(g: &GaleSpec) -> bool {
    g.exponent.is_one() && g.distribution.is_uniform_binary()
}

//! Experiment configuration: flat `key = value` text or a JSON object.
//!
//! Both forms go through the same typed schema, and [`ExperimentConfig::echo`]
//! writes a JSON object that parses back to an identical config.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde_json::{Map, Number, Value};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Simulate,
    Phi,
    Lln,
    Qsd,
    Extinction,
    Sigma,
    SpineCheck,
    GIterate,
    SbCurve,
    LocalSurvival,
}

impl Experiment {
    const ALL: [(Experiment, &'static str); 10] = [
        (Experiment::Simulate, "simulate"),
        (Experiment::Phi, "phi"),
        (Experiment::Lln, "lln"),
        (Experiment::Qsd, "qsd"),
        (Experiment::Extinction, "extinction"),
        (Experiment::Sigma, "sigma"),
        (Experiment::SpineCheck, "spine-check"),
        (Experiment::GIterate, "g-iterate"),
        (Experiment::SbCurve, "sb-curve"),
        (Experiment::LocalSurvival, "local-survival"),
    ];

    pub fn name(self) -> &'static str {
        Self::ALL.iter().find(|e| e.0 == self).map(|e| e.1).unwrap_or("?")
    }

    /// Experiments whose targets are limits in `t` and need `r(m1 − 1) > λ`.
    pub fn is_asymptotic(self) -> bool {
        !matches!(self, Experiment::Simulate | Experiment::Lln | Experiment::SpineCheck)
    }
}

impl FromStr for Experiment {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Self::ALL.iter().find(|e| e.1 == s).map(|e| e.0).ok_or_else(|| {
            let names: Vec<&str> = Self::ALL.iter().map(|e| e.1).collect();
            CliError::Config(format!("unknown experiment '{s}' (expected one of {})", names.join(", ")))
        })
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    KilledDriftedBm { c: f64 },
    KilledRecurrentOu { lambda: f64 },
    TransientOu { lambda: f64, sigma2: f64 },
    SubcriticalGw { rho: Vec<(i64, f64)> },
    ErgodicCtmc { q: Vec<Vec<f64>>, pi: Option<Vec<f64>> },
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::KilledDriftedBm { .. } => "killed_drifted_bm",
            ModelSpec::KilledRecurrentOu { .. } => "killed_recurrent_ou",
            ModelSpec::TransientOu { .. } => "transient_ou",
            ModelSpec::SubcriticalGw { .. } => "subcritical_gw",
            ModelSpec::ErgodicCtmc { .. } => "ergodic_ctmc",
        }
    }

    pub fn is_integer(&self) -> bool {
        matches!(self, ModelSpec::SubcriticalGw { .. } | ModelSpec::ErgodicCtmc { .. })
    }

    fn keys(name: &str) -> Option<&'static [&'static str]> {
        Some(match name {
            "killed_drifted_bm" => &["c"],
            "killed_recurrent_ou" => &["lambda"],
            "transient_ou" => &["lambda", "sigma2"],
            "subcritical_gw" => &["rho"],
            "ergodic_ctmc" => &["q", "pi"],
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConditioningSpec {
    Survival,
    DPositive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PoolingSpec {
    Pooled,
    PerReplica,
}

/// Half-open `[lo, hi)`.
pub type IntervalSpec = (f64, f64);

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub model: ModelSpec,
    pub offspring: Vec<(u32, f64)>,
    pub r: f64,
    pub x0: f64,
    pub t_end: f64,
    pub snapshot_times: Vec<f64>,
    pub step_dt: f64,
    pub n_rep: usize,
    pub n_mc: usize,
    pub seed: u64,
    pub max_population: usize,
    pub b: Option<IntervalSpec>,
    pub b_prime: Option<IntervalSpec>,
    pub k: Option<IntervalSpec>,
    pub eps: f64,
    pub tol: f64,
    pub t_grid: Option<Vec<f64>>,
    pub x_grid: Option<Vec<f64>>,
    pub n_iter: usize,
    pub conditioning: ConditioningSpec,
    pub pooling: PoolingSpec,
    pub eta_horizon: Option<f64>,
    pub survival_cap: Option<usize>,
    pub output: Option<String>,
}

#[derive(Clone, Copy)]
enum Kind {
    Text,
    Number,
    Integer,
    List,
    Interval,
    Pmf,
    Matrix,
}

const SCHEMA: &[(&str, Kind)] = &[
    ("experiment", Kind::Text),
    ("model", Kind::Text),
    ("c", Kind::Number),
    ("lambda", Kind::Number),
    ("sigma2", Kind::Number),
    ("rho", Kind::Pmf),
    ("q", Kind::Matrix),
    ("pi", Kind::List),
    ("offspring", Kind::Pmf),
    ("r", Kind::Number),
    ("x0", Kind::Number),
    ("t_end", Kind::Number),
    ("snapshot_times", Kind::List),
    ("step_dt", Kind::Number),
    ("n_rep", Kind::Integer),
    ("n_mc", Kind::Integer),
    ("seed", Kind::Integer),
    ("max_population", Kind::Integer),
    ("b", Kind::Interval),
    ("b_prime", Kind::Interval),
    ("k", Kind::Interval),
    ("eps", Kind::Number),
    ("tol", Kind::Number),
    ("t_grid", Kind::List),
    ("x_grid", Kind::List),
    ("n_iter", Kind::Integer),
    ("conditioning", Kind::Text),
    ("pooling", Kind::Text),
    ("eta_horizon", Kind::Number),
    ("survival_cap", Kind::Integer),
    ("output", Kind::Text),
];

const MODEL_KEYS: &[&str] = &["c", "lambda", "sigma2", "rho", "q", "pi"];

fn kind_of(key: &str) -> Option<Kind> {
    SCHEMA.iter().find(|s| s.0 == key).map(|s| s.1)
}

fn bad(key: &str, msg: impl fmt::Display) -> CliError {
    CliError::Config(format!("key '{key}': {msg}"))
}

fn parse_f64(key: &str, s: &str) -> Result<f64, CliError> {
    match s.trim() {
        "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
        "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
        t => t.parse::<f64>().map_err(|_| bad(key, format!("'{t}' is not a number"))).and_then(|v| {
            if v.is_nan() {
                Err(bad(key, "NaN is not allowed"))
            } else {
                Ok(v)
            }
        }),
    }
}

fn number(v: f64) -> Value {
    if v.is_finite() {
        Value::Number(Number::from_f64(v).expect("finite"))
    } else if v > 0.0 {
        Value::String("inf".into())
    } else {
        Value::String("-inf".into())
    }
}

fn strip_brackets(s: &str) -> &str {
    let t = s.trim();
    let t = t.strip_prefix(['[', '(', '{']).unwrap_or(t);
    t.strip_suffix([']', ')', '}']).unwrap_or(t).trim()
}

fn split_items(s: &str) -> impl Iterator<Item = &str> {
    s.split(|c: char| c == ',' || c.is_whitespace()).filter(|p| !p.is_empty())
}

/// Converts the text form of one value into its JSON form.
fn text_to_value(key: &str, kind: Kind, raw: &str) -> Result<Value, CliError> {
    Ok(match kind {
        Kind::Text => Value::String(raw.trim().to_string()),
        Kind::Number => number(parse_f64(key, raw)?),
        Kind::Integer => {
            let v = parse_f64(key, raw)?;
            if v < 0.0 || v.fract() != 0.0 || v > u64::MAX as f64 {
                return Err(bad(key, format!("'{}' is not a nonnegative integer", raw.trim())));
            }
            // Seeds need all 64 bits, so prefer an exact integer parse.
            let exact = raw.trim().parse::<u64>().unwrap_or(v as u64);
            Value::Number(exact.into())
        }
        Kind::List => Value::Array(split_items(strip_brackets(raw)).map(|p| parse_f64(key, p).map(number)).collect::<Result<_, _>>()?),
        Kind::Interval => {
            let items: Vec<&str> = split_items(strip_brackets(raw)).collect();
            if items.len() != 2 {
                return Err(bad(key, "an interval needs exactly two endpoints, e.g. '0, 2' or '1, inf'"));
            }
            Value::Array(vec![number(parse_f64(key, items[0])?), number(parse_f64(key, items[1])?)])
        }
        Kind::Pmf => {
            let mut map = Map::new();
            for item in strip_brackets(raw).split(',').map(str::trim).filter(|p| !p.is_empty()) {
                let (k, p) = item.split_once(':').ok_or_else(|| bad(key, format!("entry '{item}' is not of the form value:weight")))?;
                map.insert(k.trim().to_string(), number(parse_f64(key, p)?));
            }
            Value::Object(map)
        }
        Kind::Matrix => Value::Array(
            strip_brackets(raw)
                .split(';')
                .map(|row| split_items(strip_brackets(row)).map(|p| parse_f64(key, p).map(number)).collect::<Result<Vec<_>, _>>().map(Value::Array))
                .collect::<Result<_, _>>()?,
        ),
    })
}

fn value_f64(key: &str, v: &Value) -> Result<f64, CliError> {
    match v {
        Value::Number(n) => n.as_f64().ok_or_else(|| bad(key, "not a number")),
        Value::String(s) => parse_f64(key, s),
        _ => Err(bad(key, format!("expected a number, got {v}"))),
    }
}

fn value_u64(key: &str, v: &Value) -> Result<u64, CliError> {
    match v {
        Value::Number(n) => n.as_u64().ok_or_else(|| bad(key, format!("{n} is not a nonnegative integer"))),
        Value::String(s) => text_to_value(key, Kind::Integer, s).and_then(|v| value_u64(key, &v)),
        _ => Err(bad(key, format!("expected an integer, got {v}"))),
    }
}

fn value_list(key: &str, v: &Value) -> Result<Vec<f64>, CliError> {
    match v {
        Value::Array(items) => items.iter().map(|x| value_f64(key, x)).collect(),
        Value::String(s) => text_to_value(key, Kind::List, s).and_then(|v| value_list(key, &v)),
        _ => Err(bad(key, format!("expected a list of numbers, got {v}"))),
    }
}

fn value_interval(key: &str, v: &Value) -> Result<IntervalSpec, CliError> {
    let items = match v {
        Value::String(s) => return text_to_value(key, Kind::Interval, s).and_then(|v| value_interval(key, &v)),
        other => value_list(key, other)?,
    };
    match items[..] {
        [lo, hi] if lo < hi => Ok((lo, hi)),
        [_, _] => Err(bad(key, "interval needs lo < hi")),
        _ => Err(bad(key, "an interval needs exactly two endpoints")),
    }
}

fn value_pmf<K: FromStr + Ord + Copy>(key: &str, v: &Value) -> Result<Vec<(K, f64)>, CliError> {
    let map = match v {
        Value::Object(m) => m,
        Value::String(s) => return text_to_value(key, Kind::Pmf, s).and_then(|v| value_pmf(key, &v)),
        _ => return Err(bad(key, format!("expected value:weight pairs, got {v}"))),
    };
    let mut out = Vec::with_capacity(map.len());
    for (k, p) in map {
        let k: K = k.trim().parse().map_err(|_| bad(key, format!("'{k}' is not a valid value")))?;
        if out.iter().any(|e: &(K, f64)| e.0 == k) {
            return Err(bad(key, "repeated value"));
        }
        out.push((k, value_f64(key, p)?));
    }
    out.sort_by_key(|e| e.0);
    Ok(out)
}

fn value_matrix(key: &str, v: &Value) -> Result<Vec<Vec<f64>>, CliError> {
    match v {
        Value::Array(rows) => rows.iter().map(|row| value_list(key, row)).collect(),
        Value::String(s) => text_to_value(key, Kind::Matrix, s).and_then(|v| value_matrix(key, &v)),
        _ => Err(bad(key, format!("expected a matrix, got {v}"))),
    }
}

fn value_text(key: &str, v: &Value) -> Result<String, CliError> {
    v.as_str().map(str::to_string).ok_or_else(|| bad(key, format!("expected a string, got {v}")))
}

fn pmf_value<K: ToString>(pmf: &[(K, f64)]) -> Value {
    Value::Object(pmf.iter().map(|(k, p)| (k.to_string(), number(*p))).collect())
}

fn list_value(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| number(x)).collect())
}

/// Values taken from the file, consumed as the config is built so that
/// leftovers can be reported.
struct Entries(BTreeMap<String, Value>);

impl Entries {
    fn take(&mut self, key: &str) -> Option<Value> {
        self.0.remove(key)
    }

    fn required(&mut self, key: &str) -> Result<Value, CliError> {
        self.take(key).ok_or_else(|| CliError::Config(format!("missing required key '{key}'")))
    }

    fn f64_or(&mut self, key: &str, default: f64) -> Result<f64, CliError> {
        self.take(key).map_or(Ok(default), |v| value_f64(key, &v))
    }

    fn usize_or(&mut self, key: &str, default: usize) -> Result<usize, CliError> {
        self.take(key).map_or(Ok(default), |v| {
            let n = value_u64(key, &v)?;
            usize::try_from(n).map_err(|_| bad(key, "too large"))
        })
    }
}

impl ExperimentConfig {
    /// Parses either form; text starting with `{` is read as JSON.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        if text.trim_start().starts_with('{') {
            Self::from_json(text)
        } else {
            Self::from_key_values(text)
        }
    }

    pub fn from_key_values(text: &str) -> Result<Self, CliError> {
        let mut map = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, raw) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value, got '{line}'", n + 1)))?;
            let key = key.trim();
            let kind = kind_of(key).ok_or_else(|| CliError::Config(format!("line {}: unknown key '{key}'", n + 1)))?;
            if map.insert(key.to_string(), text_to_value(key, kind, raw)?).is_some() {
                return Err(CliError::Config(format!("line {}: key '{key}' given twice", n + 1)));
            }
        }
        Self::from_map(map)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let value: Value = serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid JSON: {e}")))?;
        let Value::Object(obj) = value else {
            return Err(CliError::Config("JSON config must be an object".into()));
        };
        Self::from_map(obj.into_iter().collect())
    }

    fn from_map(map: BTreeMap<String, Value>) -> Result<Self, CliError> {
        if let Some(unknown) = map.keys().find(|k| kind_of(k).is_none()) {
            return Err(CliError::Config(format!("unknown key '{unknown}'")));
        }
        let mut e = Entries(map);
        let experiment: Experiment = value_text("experiment", &e.required("experiment")?)?.parse()?;
        let model_name = value_text("model", &e.required("model")?)?;
        let allowed = ModelSpec::keys(&model_name).ok_or_else(|| {
            CliError::Config(format!(
                "unknown model '{model_name}' (expected killed_drifted_bm, killed_recurrent_ou, transient_ou, subcritical_gw or ergodic_ctmc)"
            ))
        })?;
        if let Some(stray) = MODEL_KEYS.iter().find(|k| e.0.contains_key(**k) && !allowed.contains(k)) {
            return Err(CliError::Config(format!("key '{stray}' does not apply to model {model_name}")));
        }
        let model = match model_name.as_str() {
            "killed_drifted_bm" => ModelSpec::KilledDriftedBm { c: e.f64_or("c", 1.0)? },
            "killed_recurrent_ou" => ModelSpec::KilledRecurrentOu { lambda: e.f64_or("lambda", 1.0)? },
            "transient_ou" => ModelSpec::TransientOu { lambda: e.f64_or("lambda", 0.5)?, sigma2: e.f64_or("sigma2", 1.0)? },
            "subcritical_gw" => ModelSpec::SubcriticalGw { rho: value_pmf("rho", &e.required("rho")?)? },
            _ => ModelSpec::ErgodicCtmc {
                q: value_matrix("q", &e.required("q")?)?,
                pi: e.take("pi").map(|v| value_list("pi", &v)).transpose()?,
            },
        };
        let offspring = value_pmf("offspring", &e.required("offspring")?)?;
        let r = value_f64("r", &e.required("r")?)?;
        let x0 = value_f64("x0", &e.required("x0")?)?;
        let t_end = value_f64("t_end", &e.required("t_end")?)?;
        let snapshot_times = e.take("snapshot_times").map(|v| value_list("snapshot_times", &v)).transpose()?.unwrap_or_else(|| vec![t_end]);
        let conditioning = match e.take("conditioning").map(|v| value_text("conditioning", &v)).transpose()?.as_deref() {
            None | Some("survival") => ConditioningSpec::Survival,
            Some("d_positive") => ConditioningSpec::DPositive,
            Some(other) => return Err(bad("conditioning", format!("'{other}' (expected survival or d_positive)"))),
        };
        let pooling = match e.take("pooling").map(|v| value_text("pooling", &v)).transpose()?.as_deref() {
            None | Some("pooled") => PoolingSpec::Pooled,
            Some("per_replica") => PoolingSpec::PerReplica,
            Some(other) => return Err(bad("pooling", format!("'{other}' (expected pooled or per_replica)"))),
        };
        let cfg = ExperimentConfig {
            experiment,
            model,
            offspring,
            r,
            x0,
            t_end,
            snapshot_times,
            step_dt: e.f64_or("step_dt", 0.05)?,
            n_rep: e.usize_or("n_rep", 1000)?,
            n_mc: e.usize_or("n_mc", 10_000)?,
            seed: e.take("seed").map_or(Ok(0), |v| value_u64("seed", &v))?,
            max_population: e.usize_or("max_population", branchlln::DEFAULT_MAX_POPULATION)?,
            b: e.take("b").map(|v| value_interval("b", &v)).transpose()?,
            b_prime: e.take("b_prime").map(|v| value_interval("b_prime", &v)).transpose()?,
            k: e.take("k").map(|v| value_interval("k", &v)).transpose()?,
            eps: e.f64_or("eps", 0.01)?,
            tol: e.f64_or("tol", 1e-8)?,
            t_grid: e.take("t_grid").map(|v| value_list("t_grid", &v)).transpose()?,
            x_grid: e.take("x_grid").map(|v| value_list("x_grid", &v)).transpose()?,
            n_iter: e.usize_or("n_iter", 20)?,
            conditioning,
            pooling,
            eta_horizon: e.take("eta_horizon").map(|v| value_f64("eta_horizon", &v)).transpose()?,
            survival_cap: e.take("survival_cap").map(|v| value_u64("survival_cap", &v).map(|n| n as usize)).transpose()?,
            output: e.take("output").map(|v| value_text("output", &v)).transpose()?,
        };
        debug_assert!(e.0.is_empty(), "schema keys left unread: {:?}", e.0.keys());
        Ok(cfg)
    }

    /// Every resolved setting, defaults included, as a JSON object.
    pub fn echo(&self) -> Value {
        let mut m = Map::new();
        m.insert("experiment".into(), Value::String(self.experiment.name().into()));
        m.insert("model".into(), Value::String(self.model.name().into()));
        match &self.model {
            ModelSpec::KilledDriftedBm { c } => {
                m.insert("c".into(), number(*c));
            }
            ModelSpec::KilledRecurrentOu { lambda } => {
                m.insert("lambda".into(), number(*lambda));
            }
            ModelSpec::TransientOu { lambda, sigma2 } => {
                m.insert("lambda".into(), number(*lambda));
                m.insert("sigma2".into(), number(*sigma2));
            }
            ModelSpec::SubcriticalGw { rho } => {
                m.insert("rho".into(), pmf_value(rho));
            }
            ModelSpec::ErgodicCtmc { q, pi } => {
                m.insert("q".into(), Value::Array(q.iter().map(|row| list_value(row)).collect()));
                if let Some(pi) = pi {
                    m.insert("pi".into(), list_value(pi));
                }
            }
        }
        m.insert("offspring".into(), pmf_value(&self.offspring));
        m.insert("r".into(), number(self.r));
        m.insert("x0".into(), number(self.x0));
        m.insert("t_end".into(), number(self.t_end));
        m.insert("snapshot_times".into(), list_value(&self.snapshot_times));
        m.insert("step_dt".into(), number(self.step_dt));
        m.insert("n_rep".into(), Value::Number((self.n_rep as u64).into()));
        m.insert("n_mc".into(), Value::Number((self.n_mc as u64).into()));
        m.insert("seed".into(), Value::Number(self.seed.into()));
        m.insert("max_population".into(), Value::Number((self.max_population as u64).into()));
        for (key, iv) in [("b", self.b), ("b_prime", self.b_prime), ("k", self.k)] {
            if let Some((lo, hi)) = iv {
                m.insert(key.into(), list_value(&[lo, hi]));
            }
        }
        m.insert("eps".into(), number(self.eps));
        m.insert("tol".into(), number(self.tol));
        if let Some(g) = &self.t_grid {
            m.insert("t_grid".into(), list_value(g));
        }
        if let Some(g) = &self.x_grid {
            m.insert("x_grid".into(), list_value(g));
        }
        m.insert("n_iter".into(), Value::Number((self.n_iter as u64).into()));
        let cond = match self.conditioning {
            ConditioningSpec::Survival => "survival",
            ConditioningSpec::DPositive => "d_positive",
        };
        m.insert("conditioning".into(), Value::String(cond.into()));
        let pooling = match self.pooling {
            PoolingSpec::Pooled => "pooled",
            PoolingSpec::PerReplica => "per_replica",
        };
        m.insert("pooling".into(), Value::String(pooling.into()));
        if let Some(t) = self.eta_horizon {
            m.insert("eta_horizon".into(), number(t));
        }
        if let Some(cap) = self.survival_cap {
            m.insert("survival_cap".into(), Value::Number((cap as u64).into()));
        }
        if let Some(out) = &self.output {
            m.insert("output".into(), Value::String(out.clone()));
        }
        Value::Object(m)
    }
}

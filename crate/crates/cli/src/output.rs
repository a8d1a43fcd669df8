use std::fmt::Write as _;

use branchlln::{EstimatorResult, QuadratureResult};
use serde_json::{json, Map, Number, Value};

/// One CSV field.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Real(f64),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

/// `%.17g`: 17 significant digits, trailing zeros trimmed, `.` as the
/// decimal separator regardless of locale.
pub fn format_g17(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..17).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (16 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn csv(header: &[&str], rows: &[Vec<Cell>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            match cell {
                Cell::Int(v) => write!(out, "{v}").expect("string write"),
                Cell::Real(v) => out.push_str(&format_g17(*v)),
                Cell::Text(s) if s.contains([',', '"', '\n']) => write!(out, "\"{}\"", s.replace('"', "\"\"")).expect("string write"),
                Cell::Text(s) => out.push_str(s),
                Cell::Empty => {}
            }
        }
        out.push('\n');
    }
    out
}

/// JSON number, or `null` when not finite.
pub fn num(x: f64) -> Value {
    Number::from_f64(x).map_or(Value::Null, Value::Number)
}

/// `{mean, stderr, n}`; an empty sample has null mean and stderr.
pub fn estimate(e: &EstimatorResult<f64>) -> Value {
    let mut m = Map::new();
    let (mean, stderr) = if e.n == 0 { (Value::Null, Value::Null) } else { (num(e.mean), num(e.stderr)) };
    m.insert("mean".into(), mean);
    m.insert("stderr".into(), stderr);
    m.insert("n".into(), json!(e.n));
    if let Some(ess) = e.ess {
        m.insert("ess".into(), num(ess));
        m.insert("low_ess".into(), json!(e.low_ess()));
    }
    Value::Object(m)
}

pub fn quadrature(q: &QuadratureResult<f64>) -> Value {
    json!({
        "value": q.value.map_or(Value::Null, num),
        "diverged": q.diverged,
        "error_estimate": num(q.error_estimate),
        "truncation_T": num(q.truncation_t),
    })
}

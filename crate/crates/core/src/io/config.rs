//! Flat `key = value` configuration with a typed schema.
//!
//! Lines are `key = value`; blank lines and lines starting with `#` are ignored. Lists are
//! comma-separated. Values set later (e.g. from command-line flags) override file values.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use super::key_value_lines;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ValueKind {
    Int,
    Float,
    Bool,
    Text,
    IntList,
    FloatList,
}

impl ValueKind {
    fn describe(self) -> &'static str {
        match self {
            ValueKind::Int => "an integer",
            ValueKind::Float => "a number",
            ValueKind::Bool => "true or false",
            ValueKind::Text => "text",
            ValueKind::IntList => "a comma-separated list of integers",
            ValueKind::FloatList => "a comma-separated list of numbers",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    Bool(bool),
    Text(String),
    IntList(Vec<i64>),
    FloatList(Vec<f64>),
}

fn fmt_list<T: fmt::Display>(f: &mut fmt::Formatter<'_>, xs: &[T]) -> fmt::Result {
    for (i, x) in xs.iter().enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        write!(f, "{x}")?;
    }
    Ok(())
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Float(v) => write!(f, "{v:?}"),
            Value::Bool(v) => write!(f, "{v}"),
            Value::Text(v) => f.write_str(v),
            Value::IntList(v) => fmt_list(f, v),
            Value::FloatList(v) => {
                let dbg: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
                fmt_list(f, &dbg)
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct KeySpec {
    pub name: &'static str,
    pub kind: ValueKind,
    pub help: &'static str,
}

/// The set of keys a configuration may contain.
#[derive(Clone, Debug, Default)]
pub struct ConfigSchema {
    keys: Vec<KeySpec>,
}

fn parse_float(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

impl ConfigSchema {
    pub fn new(keys: Vec<KeySpec>) -> Self {
        Self { keys }
    }

    pub fn keys(&self) -> &[KeySpec] {
        &self.keys
    }

    pub fn get(&self, name: &str) -> Option<&KeySpec> {
        self.keys.iter().find(|k| k.name == name)
    }

    /// Parses `raw` as the type declared for `key`.
    pub fn parse_value(&self, key: &str, raw: &str) -> Result<Value> {
        let spec = self.get(key).ok_or_else(|| Error::Config { key: key.into(), reason: "unknown key".into() })?;
        let mismatch = || Error::Config { key: key.into(), reason: format!("expected {}, got `{raw}`", spec.kind.describe()) };
        let raw = raw.trim();
        Ok(match spec.kind {
            ValueKind::Int => Value::Int(raw.parse().map_err(|_| mismatch())?),
            ValueKind::Float => Value::Float(parse_float(raw).ok_or_else(mismatch)?),
            ValueKind::Bool => Value::Bool(match raw {
                "true" => true,
                "false" => false,
                _ => return Err(mismatch()),
            }),
            ValueKind::Text => {
                if raw.is_empty() {
                    return Err(mismatch());
                }
                Value::Text(raw.to_string())
            }
            ValueKind::IntList => Value::IntList(
                raw.split(',').map(|s| s.trim().parse::<i64>().map_err(|_| mismatch())).collect::<Result<_>>()?,
            ),
            ValueKind::FloatList => {
                Value::FloatList(raw.split(',').map(|s| parse_float(s).ok_or_else(mismatch)).collect::<Result<_>>()?)
            }
        })
    }
}

/// Resolved configuration values, ordered by key.
#[derive(Clone, Debug)]
pub struct Config {
    schema: ConfigSchema,
    values: BTreeMap<String, Value>,
}

impl Config {
    pub fn empty(schema: &ConfigSchema) -> Self {
        Self { schema: schema.clone(), values: BTreeMap::new() }
    }

    /// Parses a whole file; unknown keys, duplicates and malformed values are errors.
    pub fn parse(text: &str, schema: &ConfigSchema) -> Result<Self> {
        let mut cfg = Self::empty(schema);
        for (line, key, raw) in key_value_lines(text)? {
            if cfg.values.contains_key(key) {
                return Err(Error::Config { key: key.into(), reason: format!("line {line}: duplicate key") });
            }
            cfg.set_raw(key, raw)?;
        }
        Ok(cfg)
    }

    /// Sets `key` from its textual form, replacing any earlier value.
    pub fn set_raw(&mut self, key: &str, raw: &str) -> Result<()> {
        let v = self.schema.parse_value(key, raw)?;
        self.values.insert(key.to_string(), v);
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: Value) -> Result<()> {
        self.set_raw(key, &value.to_string())
    }

    /// Overlays `other` on `self`: keys present in `other` win.
    pub fn merge(&mut self, other: &Config) {
        for (k, v) in &other.values {
            self.values.insert(k.clone(), v.clone());
        }
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn remove(&mut self, key: &str) -> Option<Value> {
        self.values.remove(key)
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.values.get(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Value)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v))
    }

    fn missing(key: &str) -> Error {
        Error::Config { key: key.into(), reason: "missing required key".into() }
    }

    fn wrong(key: &str, v: &Value) -> Error {
        Error::Config { key: key.into(), reason: format!("value `{v}` has the wrong type") }
    }

    /// Errors naming the first absent key.
    pub fn require(&self, keys: &[&str]) -> Result<()> {
        match keys.iter().find(|k| !self.values.contains_key(**k)) {
            Some(k) => Err(Self::missing(k)),
            None => Ok(()),
        }
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        match self.get(key) {
            Some(Value::Float(v)) => Ok(*v),
            Some(Value::Int(v)) => Ok(*v as f64),
            Some(v) => Err(Self::wrong(key, v)),
            None => Err(Self::missing(key)),
        }
    }

    pub fn i64(&self, key: &str) -> Result<i64> {
        match self.get(key) {
            Some(Value::Int(v)) => Ok(*v),
            Some(v) => Err(Self::wrong(key, v)),
            None => Err(Self::missing(key)),
        }
    }

    /// Non-negative integer.
    pub fn usize(&self, key: &str) -> Result<usize> {
        let v = self.i64(key)?;
        usize::try_from(v).map_err(|_| Error::Config { key: key.into(), reason: format!("must be non-negative, got {v}") })
    }

    pub fn bool(&self, key: &str) -> Result<bool> {
        match self.get(key) {
            Some(Value::Bool(v)) => Ok(*v),
            Some(v) => Err(Self::wrong(key, v)),
            None => Err(Self::missing(key)),
        }
    }

    pub fn text(&self, key: &str) -> Result<&str> {
        match self.get(key) {
            Some(Value::Text(v)) => Ok(v),
            Some(v) => Err(Self::wrong(key, v)),
            None => Err(Self::missing(key)),
        }
    }

    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>> {
        match self.get(key) {
            Some(Value::FloatList(v)) => Ok(v.clone()),
            Some(Value::IntList(v)) => Ok(v.iter().map(|&x| x as f64).collect()),
            Some(v) => Err(Self::wrong(key, v)),
            None => Err(Self::missing(key)),
        }
    }

    /// Non-negative integer list.
    pub fn u64_list(&self, key: &str) -> Result<Vec<u64>> {
        match self.get(key) {
            Some(Value::IntList(v)) => v
                .iter()
                .map(|&x| {
                    u64::try_from(x)
                        .map_err(|_| Error::Config { key: key.into(), reason: format!("must be non-negative, got {x}") })
                })
                .collect(),
            Some(v) => Err(Self::wrong(key, v)),
            None => Err(Self::missing(key)),
        }
    }

    /// `key = value` lines in key order; parsing the output yields the same configuration.
    pub fn to_text(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

/// Reads `path` and overlays `overrides` (typically from command-line flags) on it.
pub fn load_config(path: impl AsRef<Path>, schema: &ConfigSchema, overrides: &Config) -> Result<Config> {
    let text = fs::read_to_string(path)?;
    let mut cfg = Config::parse(&text, schema)?;
    cfg.merge(overrides);
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> ConfigSchema {
        ConfigSchema::new(vec![
            KeySpec { name: "N", kind: ValueKind::Int, help: "" },
            KeySpec { name: "mu", kind: ValueKind::Float, help: "" },
            KeySpec { name: "renormalize", kind: ValueKind::Bool, help: "" },
            KeySpec { name: "out", kind: ValueKind::Text, help: "" },
            KeySpec { name: "seed", kind: ValueKind::IntList, help: "" },
            KeySpec { name: "magnitudes", kind: ValueKind::FloatList, help: "" },
        ])
    }

    fn message(e: Error) -> String {
        e.to_string()
    }

    #[test]
    fn parses_typed_values() {
        let c = Config::parse("# run\nN = 32\n\nmu=0.5\nrenormalize = false\nout = a b\nseed = 1, 2\nmagnitudes = 1,1e1\n", &schema())
            .unwrap();
        assert_eq!(c.usize("N").unwrap(), 32);
        assert_eq!(c.f64("mu").unwrap(), 0.5);
        assert!(!c.bool("renormalize").unwrap());
        assert_eq!(c.text("out").unwrap(), "a b");
        assert_eq!(c.u64_list("seed").unwrap(), vec![1, 2]);
        assert_eq!(c.f64_list("magnitudes").unwrap(), vec![1.0, 10.0]);
        // An integer is accepted where a number is expected.
        assert_eq!(Config::parse("mu = 2", &schema()).unwrap().f64("mu").unwrap(), 2.0);
    }

    #[test]
    fn errors_name_the_key() {
        let s = schema();
        assert!(message(Config::parse("foo = 1", &s).unwrap_err()).contains("`foo`"));
        assert!(message(Config::parse("N = 3.5", &s).unwrap_err()).contains("`N`"));
        assert!(message(Config::parse("renormalize = yes", &s).unwrap_err()).contains("`renormalize`"));
        assert!(message(Config::parse("mu = nan", &s).unwrap_err()).contains("`mu`"));
        assert!(message(Config::parse("N = 1\nN = 2", &s).unwrap_err()).contains("duplicate"));
        assert!(Config::parse("just text", &s).is_err());
        let c = Config::parse("", &s).unwrap();
        let e = message(c.require(&["N", "mu"]).unwrap_err());
        assert!(e.contains("`N`") && e.contains("missing"));
        assert!(message(c.f64("mu").unwrap_err()).contains("`mu`"));
        let c = Config::parse("seed = -1", &s).unwrap();
        assert!(c.u64_list("seed").is_err());
    }

    #[test]
    fn flags_override_file() {
        let s = schema();
        let mut flags = Config::empty(&s);
        flags.set_raw("N", "64").unwrap();
        let mut file = Config::parse("N = 16\nmu = 1", &s).unwrap();
        file.merge(&flags);
        assert_eq!(file.usize("N").unwrap(), 64);
        assert_eq!(file.f64("mu").unwrap(), 1.0);
        // Empty file plus full flags.
        let mut empty = Config::parse("", &s).unwrap();
        empty.merge(&flags);
        assert_eq!(empty.usize("N").unwrap(), 64);
    }

    #[test]
    fn text_round_trip() {
        let s = schema();
        let c = Config::parse("N = 8\nmu = 0.1\nmagnitudes = 1,0.30000000000000004\nseed = 3\nrenormalize = true", &s).unwrap();
        let back = Config::parse(&c.to_text(), &s).unwrap();
        assert_eq!(back.values, c.values);
    }
}

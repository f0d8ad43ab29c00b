//! Experiment configuration: flat `key = value` lines with `[section]` headers.
//!
//! Top-level keys are `experiment`, `seed` and `out`. A section named after an
//! experiment sets that experiment's parameters; other experiments' sections are
//! validated but ignored. `#` starts a comment.

use serde::Serialize;
use std::collections::BTreeMap;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown key `{key}`{}", section.as_ref().map(|s| format!(" in [{s}]")).unwrap_or_default())]
    UnknownKey { section: Option<String>, key: String },
    #[error("unknown experiment `{0}` (see `qwass list`)")]
    UnknownExperiment(String),
    #[error("parameter `{key}`: {msg}")]
    Invalid { key: String, msg: String },
    #[error("no experiment given")]
    MissingExperiment,
    #[error("cannot read {path}: {msg}")]
    Io { path: String, msg: String },
}

#[derive(Clone, Copy, Debug)]
pub enum Default {
    Num(f64),
    Int(u64),
    List(&'static [f64]),
}

/// One documented parameter with its inclusive range.
#[derive(Clone, Copy, Debug)]
pub struct ParamSpec {
    pub key: &'static str,
    pub default: Default,
    pub min: f64,
    pub max: f64,
    pub doc: &'static str,
}

impl ParamSpec {
    pub const fn num(key: &'static str, default: f64, min: f64, max: f64, doc: &'static str) -> Self {
        ParamSpec { key, default: Default::Num(default), min, max, doc }
    }

    pub const fn int(key: &'static str, default: u64, min: u64, max: u64, doc: &'static str) -> Self {
        ParamSpec { key, default: Default::Int(default), min: min as f64, max: max as f64, doc }
    }

    pub const fn list(key: &'static str, default: &'static [f64], min: f64, max: f64, doc: &'static str) -> Self {
        ParamSpec { key, default: Default::List(default), min, max, doc }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Value {
    Num(f64),
    Int(u64),
    List(Vec<f64>),
}

impl std::fmt::Display for Value {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Value::Num(x) => write!(f, "{x}"),
            Value::Int(k) => write!(f, "{k}"),
            Value::List(v) => {
                let s: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                write!(f, "{}", s.join(" "))
            }
        }
    }
}

/// Parameter values of one experiment, keyed in the catalog's order.
#[derive(Clone, Debug, Serialize)]
#[serde(transparent)]
pub struct Params {
    values: BTreeMap<&'static str, Value>,
}

impl Params {
    pub fn defaults(specs: &[ParamSpec]) -> Self {
        let values = specs
            .iter()
            .map(|s| {
                let v = match s.default {
                    Default::Num(x) => Value::Num(x),
                    Default::Int(k) => Value::Int(k),
                    Default::List(v) => Value::List(v.to_vec()),
                };
                (s.key, v)
            })
            .collect();
        Params { values }
    }

    /// Parses `raw` for `key` and checks its range.
    pub fn set(&mut self, specs: &[ParamSpec], key: &str, raw: &str) -> Result<(), ConfigError> {
        let spec = specs.iter().find(|s| s.key == key).ok_or_else(|| ConfigError::UnknownKey { section: None, key: key.into() })?;
        let bad = |msg: String| ConfigError::Invalid { key: key.into(), msg };
        let in_range = |x: f64| x.is_finite() && x >= spec.min && x <= spec.max;
        let range = format!("must lie in [{}, {}]", spec.min, spec.max);
        let value = match spec.default {
            Default::Num(_) => {
                let x: f64 = raw.parse().map_err(|_| bad(format!("`{raw}` is not a number")))?;
                if !in_range(x) {
                    return Err(bad(format!("{x} {range}")));
                }
                Value::Num(x)
            }
            Default::Int(_) => {
                let k: u64 = raw.parse().map_err(|_| bad(format!("`{raw}` is not a nonnegative integer")))?;
                if !in_range(k as f64) {
                    return Err(bad(format!("{k} {range}")));
                }
                Value::Int(k)
            }
            Default::List(_) => {
                let xs = raw
                    .split([',', ' '])
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<f64>().map_err(|_| bad(format!("`{s}` is not a number"))))
                    .collect::<Result<Vec<_>, _>>()?;
                if xs.is_empty() {
                    return Err(bad("empty list".into()));
                }
                if let Some(x) = xs.iter().find(|x| !in_range(**x)) {
                    return Err(bad(format!("{x} {range}")));
                }
                Value::List(xs)
            }
        };
        self.values.insert(spec.key, value);
        Ok(())
    }

    pub fn num(&self, key: &str) -> f64 {
        match self.values.get(key) {
            Some(Value::Num(x)) => *x,
            Some(Value::Int(k)) => *k as f64,
            other => panic!("parameter `{key}` is not a number: {other:?}"),
        }
    }

    pub fn int(&self, key: &str) -> usize {
        match self.values.get(key) {
            Some(Value::Int(k)) => *k as usize,
            other => panic!("parameter `{key}` is not an integer: {other:?}"),
        }
    }

    pub fn list(&self, key: &str) -> &[f64] {
        match self.values.get(key) {
            Some(Value::List(v)) => v,
            other => panic!("parameter `{key}` is not a list: {other:?}"),
        }
    }

    /// `k1=v1;k2=v2` in key order, used as the CSV parameter column.
    pub fn summary(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";")
    }
}

/// Raw entry with its source line.
#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigFile {
    pub top: Vec<Entry>,
    pub sections: Vec<(String, Vec<Entry>)>,
}

pub fn parse(text: &str) -> Result<ConfigFile, ConfigError> {
    let mut cfg = ConfigFile::default();
    let mut current: Option<usize> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.split('#').next().unwrap_or("").trim();
        if s.is_empty() {
            continue;
        }
        if let Some(rest) = s.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or(ConfigError::Syntax { line, msg: "unclosed section header".into() })?.trim();
            if name.is_empty() {
                return Err(ConfigError::Syntax { line, msg: "empty section name".into() });
            }
            if cfg.sections.iter().any(|(n, _)| n == name) {
                return Err(ConfigError::Syntax { line, msg: format!("section [{name}] appears twice") });
            }
            cfg.sections.push((name.to_string(), Vec::new()));
            current = Some(cfg.sections.len() - 1);
            continue;
        }
        let (k, v) = s.split_once('=').ok_or(ConfigError::Syntax { line, msg: format!("expected `key = value`, got `{s}`") })?;
        let (key, value) = (k.trim().to_string(), v.trim().to_string());
        if key.is_empty() {
            return Err(ConfigError::Syntax { line, msg: "empty key".into() });
        }
        let entries = match current {
            Some(j) => &mut cfg.sections[j].1,
            None => &mut cfg.top,
        };
        if entries.iter().any(|e| e.key == key) {
            return Err(ConfigError::Syntax { line, msg: format!("key `{key}` set twice") });
        }
        entries.push(Entry { key, value, line });
    }
    Ok(cfg)
}

/// Settings for one run after merging the file with command-line overrides.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub experiment: String,
    pub seed: u64,
    pub out: PathBuf,
    pub params: Params,
}

pub const DEFAULT_SEED: u64 = 20_240_601;

/// Resolves `cfg` against the catalog. `experiment`, `seed` and `out` given on the
/// command line take precedence over the file.
pub fn resolve(cfg: &ConfigFile, experiment: Option<&str>, seed: Option<u64>, out: Option<PathBuf>) -> Result<RunConfig, ConfigError> {
    let mut name = experiment.map(str::to_string);
    let mut file_seed = None;
    let mut file_out = None;
    for e in &cfg.top {
        match e.key.as_str() {
            "experiment" => {
                if name.is_none() {
                    name = Some(e.value.clone());
                }
            }
            "seed" => {
                let s = e.value.parse::<u64>().map_err(|_| ConfigError::Invalid { key: "seed".into(), msg: format!("`{}` is not a 64-bit unsigned integer", e.value) })?;
                file_seed = Some(s);
            }
            "out" => file_out = Some(PathBuf::from(&e.value)),
            _ => return Err(ConfigError::UnknownKey { section: None, key: e.key.clone() }),
        }
    }
    let name = name.ok_or(ConfigError::MissingExperiment)?;
    let exp = crate::catalog::find(&name).ok_or_else(|| ConfigError::UnknownExperiment(name.clone()))?;
    let mut params = Params::defaults(exp.params);
    for (section, entries) in &cfg.sections {
        let target = crate::catalog::find(section).ok_or_else(|| ConfigError::UnknownExperiment(section.clone()))?;
        let mut scratch = Params::defaults(target.params);
        let sink = if target.name == exp.name { &mut params } else { &mut scratch };
        for e in entries {
            sink.set(target.params, &e.key, &e.value).map_err(|err| match err {
                ConfigError::UnknownKey { key, .. } => ConfigError::UnknownKey { section: Some(section.clone()), key },
                other => other,
            })?;
        }
    }
    Ok(RunConfig {
        experiment: exp.name.to_string(),
        seed: seed.or(file_seed).unwrap_or(DEFAULT_SEED),
        out: out.or(file_out).unwrap_or_else(|| PathBuf::from("results")),
        params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPECS: &[ParamSpec] = &[
        ParamSpec::num("hbar", 0.1, 1e-3, 10.0, "semiclassical parameter"),
        ParamSpec::int("n", 8, 2, 64, "Fock modes"),
        ParamSpec::list("dts", &[0.1, 0.05], 1e-6, 1.0, "steps"),
    ];

    #[test]
    fn parses_sections_and_comments() {
        let c = parse("experiment = self-distance # trailing\n\n[self-distance]\nhbars = 0.1, 0.5\n").unwrap();
        assert_eq!(c.top.len(), 1);
        assert_eq!(c.sections[0].0, "self-distance");
        assert_eq!(c.sections[0].1[0].value, "0.1, 0.5");
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(matches!(parse("hbar 0.1"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(parse("[x"), Err(ConfigError::Syntax { .. })));
        assert!(matches!(parse("a=1\na=2"), Err(ConfigError::Syntax { line: 2, .. })));
    }

    #[test]
    fn ranges_and_types_are_checked() {
        let mut p = Params::defaults(SPECS);
        assert!(p.set(SPECS, "hbar", "0.5").is_ok());
        assert_eq!(p.num("hbar"), 0.5);
        assert!(matches!(p.set(SPECS, "hbar", "0"), Err(ConfigError::Invalid { .. })));
        assert!(matches!(p.set(SPECS, "hbar", "nan"), Err(ConfigError::Invalid { .. })));
        assert!(matches!(p.set(SPECS, "n", "2.5"), Err(ConfigError::Invalid { .. })));
        assert!(matches!(p.set(SPECS, "dts", ""), Err(ConfigError::Invalid { .. })));
        assert!(matches!(p.set(SPECS, "bogus", "1"), Err(ConfigError::UnknownKey { .. })));
        p.set(SPECS, "dts", "0.2 0.1,0.05").unwrap();
        assert_eq!(p.list("dts"), &[0.2, 0.1, 0.05]);
        assert_eq!(p.summary(), "dts=0.2 0.1 0.05;hbar=0.5;n=8");
    }

    #[test]
    fn resolve_rejects_unknown_names() {
        let c = parse("experiment = nope").unwrap();
        assert!(matches!(resolve(&c, None, None, None), Err(ConfigError::UnknownExperiment(_))));
        let c = parse("colour = blue").unwrap();
        assert!(matches!(resolve(&c, Some("self-distance"), None, None), Err(ConfigError::UnknownKey { .. })));
        let c = parse("[self-distance]\nlambda = 2").unwrap();
        assert!(matches!(resolve(&c, Some("self-distance"), None, None), Err(ConfigError::UnknownKey { section: Some(_), .. })));
    }

    #[test]
    fn command_line_wins() {
        let c = parse("experiment = self-distance\nseed = 5\nout = a").unwrap();
        let r = resolve(&c, Some("equal-mass-pair"), Some(9), None).unwrap();
        assert_eq!((r.experiment.as_str(), r.seed, r.out.to_str().unwrap()), ("equal-mass-pair", 9, "a"));
    }
}

//! Experiment configuration: flat `key = value` files, typed per experiment.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use ips_core::percolation::Generator;

use crate::LabError;

/// Every experiment the runner knows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Experiment {
    TwoSite,
    CoupleCheck,
    Breakpoints,
    LlnClt,
    CompleteConv,
    SubcriticalRange,
    SubcriticalLifetime,
    Containment,
    Speedcomp,
    Fracpunch,
    Subadd,
    Cse,
    PercolationDensity,
    PercolationGrowth,
    Duality,
}

impl Experiment {
    pub const ALL: [Experiment; 15] = [
        Experiment::TwoSite,
        Experiment::CoupleCheck,
        Experiment::Breakpoints,
        Experiment::LlnClt,
        Experiment::CompleteConv,
        Experiment::SubcriticalRange,
        Experiment::SubcriticalLifetime,
        Experiment::Containment,
        Experiment::Speedcomp,
        Experiment::Fracpunch,
        Experiment::Subadd,
        Experiment::Cse,
        Experiment::PercolationDensity,
        Experiment::PercolationGrowth,
        Experiment::Duality,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::TwoSite => "two-site",
            Experiment::CoupleCheck => "couple-check",
            Experiment::Breakpoints => "breakpoints",
            Experiment::LlnClt => "lln-clt",
            Experiment::CompleteConv => "complete-conv",
            Experiment::SubcriticalRange => "subcritical-range",
            Experiment::SubcriticalLifetime => "subcritical-lifetime",
            Experiment::Containment => "containment",
            Experiment::Speedcomp => "speedcomp",
            Experiment::Fracpunch => "fracpunch",
            Experiment::Subadd => "subadd",
            Experiment::Cse => "cse",
            Experiment::PercolationDensity => "percolation-density",
            Experiment::PercolationGrowth => "percolation-growth",
            Experiment::Duality => "duality",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Experiment::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Experiment::ALL.iter().map(|e| e.name()).collect();
            format!("unknown experiment `{s}` (expected one of: {})", names.join(", "))
        })
    }
}

/// Shape and range of one configuration key.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kind {
    /// A finite real in `[min, max]`.
    Float { min: f64, max: f64 },
    /// A nonnegative integer in `[min, max]`.
    Count { min: u64, max: u64 },
    /// Comma-separated reals in `[min, max]`.
    Floats { min: f64, max: f64 },
    /// Comma-separated integers in `[min, max]`.
    Ints { min: i64, max: i64 },
    /// `independent:p` or `overlap:q`.
    Generator,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeySpec {
    pub name: &'static str,
    pub kind: Kind,
    pub default: &'static str,
    pub doc: &'static str,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Float(f64),
    Count(u64),
    Floats(Vec<f64>),
    Ints(Vec<i64>),
    Generator(Generator),
}

/// Keys shared by every experiment, handled outside the typed parameters.
pub const RUN_KEYS: [&str; 3] = ["seed", "workers", "out"];

/// Typed parameters of one run. Missing keys were filled from defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    values: BTreeMap<&'static str, Value>,
    /// Canonical text of every parameter, for provenance.
    echo: BTreeMap<String, String>,
}

impl Params {
    fn get(&self, key: &str) -> &Value {
        self.values.get(key).unwrap_or_else(|| panic!("no parameter `{key}` declared for this experiment"))
    }

    pub fn f64(&self, key: &str) -> f64 {
        match self.get(key) {
            Value::Float(v) => *v,
            v => panic!("`{key}` is not a float: {v:?}"),
        }
    }

    pub fn u64(&self, key: &str) -> u64 {
        match self.get(key) {
            Value::Count(v) => *v,
            v => panic!("`{key}` is not a count: {v:?}"),
        }
    }

    pub fn floats(&self, key: &str) -> &[f64] {
        match self.get(key) {
            Value::Floats(v) => v,
            v => panic!("`{key}` is not a float list: {v:?}"),
        }
    }

    pub fn ints(&self, key: &str) -> &[i64] {
        match self.get(key) {
            Value::Ints(v) => v,
            v => panic!("`{key}` is not an integer list: {v:?}"),
        }
    }

    pub fn generator(&self, key: &str) -> Generator {
        match self.get(key) {
            Value::Generator(g) => *g,
            v => panic!("`{key}` is not a generator: {v:?}"),
        }
    }

    pub fn echo(&self) -> &BTreeMap<String, String> {
        &self.echo
    }
}

fn usage(key: &str, msg: impl Into<String>) -> LabError {
    LabError::Usage { key: key.to_string(), msg: msg.into() }
}

fn parse_float(key: &str, s: &str, min: f64, max: f64) -> Result<f64, LabError> {
    let v: f64 = s.trim().parse().map_err(|_| usage(key, format!("`{s}` is not a number")))?;
    if !v.is_finite() || v < min || v > max {
        return Err(usage(key, format!("{v} is outside [{min}, {max}]")));
    }
    Ok(v)
}

fn parse_value(spec: &KeySpec, s: &str) -> Result<Value, LabError> {
    let key = spec.name;
    let list = |s: &str| -> Vec<String> { s.split(',').map(|x| x.trim().to_string()).filter(|x| !x.is_empty()).collect() };
    Ok(match spec.kind {
        Kind::Float { min, max } => Value::Float(parse_float(key, s, min, max)?),
        Kind::Count { min, max } => {
            let v: u64 = s.trim().parse().map_err(|_| usage(key, format!("`{s}` is not a nonnegative integer")))?;
            if v < min || v > max {
                return Err(usage(key, format!("{v} is outside [{min}, {max}]")));
            }
            Value::Count(v)
        }
        Kind::Floats { min, max } => {
            let v = list(s).iter().map(|x| parse_float(key, x, min, max)).collect::<Result<Vec<_>, _>>()?;
            if v.is_empty() {
                return Err(usage(key, "empty list"));
            }
            Value::Floats(v)
        }
        Kind::Ints { min, max } => {
            let v = list(s)
                .iter()
                .map(|x| {
                    let v: i64 = x.parse().map_err(|_| usage(key, format!("`{x}` is not an integer")))?;
                    if v < min || v > max {
                        return Err(usage(key, format!("{v} is outside [{min}, {max}]")));
                    }
                    Ok(v)
                })
                .collect::<Result<Vec<_>, _>>()?;
            if v.is_empty() {
                return Err(usage(key, "empty list"));
            }
            Value::Ints(v)
        }
        Kind::Generator => {
            let (name, arg) = s.trim().split_once(':').ok_or_else(|| usage(key, "expected `independent:p` or `overlap:q`"))?;
            let v = parse_float(key, arg, 0.0, 1.0)?;
            match name.trim() {
                "independent" => Value::Generator(Generator::Independent(v)),
                "overlap" => Value::Generator(Generator::Overlap(v)),
                other => return Err(usage(key, format!("unknown generator `{other}`"))),
            }
        }
    })
}

fn canonical(v: &Value) -> String {
    let join = |xs: Vec<String>| xs.join(",");
    match v {
        Value::Float(x) => format!("{x:?}"),
        Value::Count(x) => x.to_string(),
        Value::Floats(xs) => join(xs.iter().map(|x| format!("{x:?}")).collect()),
        Value::Ints(xs) => join(xs.iter().map(|x| x.to_string()).collect()),
        Value::Generator(Generator::Independent(p)) => format!("independent:{p:?}"),
        Value::Generator(Generator::Overlap(q)) => format!("overlap:{q:?}"),
    }
}

/// Parses flat `key = value` text. `#` starts a comment; blank lines are
/// ignored; a key may appear once.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, LabError> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| usage(&format!("line {}", i + 1), format!("expected `key = value`, got `{line}`")))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(usage(&format!("line {}", i + 1), "empty key"));
        }
        if out.iter().any(|(x, _)| x == k) {
            return Err(usage(k, "given twice"));
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

/// A validated run description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub params: Params,
    pub master_seed: u64,
    pub workers: usize,
    pub output: PathBuf,
}

pub const DEFAULT_SEED: u64 = 20_240_917;

impl ExperimentConfig {
    /// Builds a config from file pairs, then applies `overrides` on top.
    /// Unknown keys are rejected, missing ones take their defaults.
    pub fn build(
        experiment: Experiment,
        file: &[(String, String)],
        overrides: &[(String, String)],
    ) -> Result<Self, LabError> {
        let specs = crate::experiments::keys(experiment);
        let mut merged: BTreeMap<String, String> = BTreeMap::new();
        for (k, v) in file.iter().chain(overrides) {
            if !RUN_KEYS.contains(&k.as_str()) && !specs.iter().any(|s| s.name == k) {
                return Err(usage(k, format!("not a key of `{experiment}`")));
            }
            merged.insert(k.clone(), v.clone());
        }
        let mut values = BTreeMap::new();
        let mut echo = BTreeMap::new();
        for spec in specs {
            let text = merged.get(spec.name).map_or(spec.default, |s| s.as_str());
            let v = parse_value(spec, text)?;
            echo.insert(spec.name.to_string(), canonical(&v));
            values.insert(spec.name, v);
        }
        let master_seed = match merged.get("seed") {
            Some(s) => s.trim().parse().map_err(|_| usage("seed", format!("`{s}` is not a 64-bit unsigned integer")))?,
            None => DEFAULT_SEED,
        };
        let workers = match merged.get("workers") {
            Some(s) => match s.trim().parse::<usize>() {
                Ok(n) if (1..=1024).contains(&n) => n,
                _ => return Err(usage("workers", format!("`{s}` is not a worker count in 1..=1024"))),
            },
            None => 1,
        };
        let output = merged.get("out").map_or_else(|| PathBuf::from("ips-lab-out").join(experiment.name()), PathBuf::from);
        let params = Params { values, echo };
        crate::experiments::validate(experiment, &params)?;
        Ok(ExperimentConfig { experiment, params, master_seed, workers, output })
    }

    /// Defaults only, with optional overrides given as `key=value` strings.
    pub fn with(experiment: Experiment, overrides: &[&str]) -> Result<Self, LabError> {
        let pairs = parse_pairs(&overrides.join("\n"))?;
        ExperimentConfig::build(experiment, &[], &pairs)
    }
}

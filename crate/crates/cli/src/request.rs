//! The effective run request: config file entries overlaid by flags,
//! checked key by key and then deserialised.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::ValueEnum;
use ruinlab::levy_models::ModelSpec;
use ruinlab::occupation::{erlang_rates, Horizon};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CommandName {
    Density,
    Lt,
    Ruin,
    Parisian,
    InverseOccupation,
    Drawdown,
    Simulate,
    Validate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Bm,
    Cl,
    Jdpt,
    Stable,
}

impl ModelKind {
    fn keys(self) -> &'static [&'static str] {
        match self {
            ModelKind::Bm => &["mu", "sigma"],
            ModelKind::Cl => &["c", "eta", "alpha"],
            ModelKind::Jdpt => &["c", "sigma", "eta", "T", "alpha_vec"],
            ModelKind::Stable => &[],
        }
    }

    fn tag(self) -> &'static str {
        match self {
            ModelKind::Bm => "bm",
            ModelKind::Cl => "cl",
            ModelKind::Jdpt => "jdpt",
            ModelKind::Stable => "stable",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Identities,
    RefractedAtom,
}

/// `exp:<λ>`, `fixed:<t>`, `inf`, `hypo:<λ1,λ2,...>` or `erlang:<t>,<n>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum HorizonSpec {
    Exp(f64),
    Fixed(f64),
    Inf,
    Hypo(Vec<f64>),
    Erlang(f64, usize),
}

fn positive(s: &str, what: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("{what} `{s}` is not a number"))?;
    if v <= 0.0 || !v.is_finite() {
        return Err(format!("{what} must be positive and finite, got {v}"));
    }
    Ok(v)
}

impl FromStr for HorizonSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if s == "inf" {
            return Ok(HorizonSpec::Inf);
        }
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| format!("horizon `{s}` is not one of exp:<rate>, fixed:<t>, inf, hypo:<rates>, erlang:<t>,<n>"))?;
        match kind {
            "exp" => Ok(HorizonSpec::Exp(positive(rest, "rate")?)),
            "fixed" => Ok(HorizonSpec::Fixed(positive(rest, "horizon")?)),
            "hypo" => {
                let rates = rest.split(',').map(|r| positive(r, "rate")).collect::<Result<Vec<_>, _>>()?;
                Ok(HorizonSpec::Hypo(rates))
            }
            "erlang" => {
                let (t, n) = rest.split_once(',').ok_or("erlang horizon needs erlang:<t>,<n>")?;
                let n: usize = n.trim().parse().map_err(|_| format!("stage count `{n}` is not an integer"))?;
                if n == 0 {
                    return Err("stage count must be at least 1".into());
                }
                Ok(HorizonSpec::Erlang(positive(t, "horizon")?, n))
            }
            _ => Err(format!("unknown horizon kind `{kind}`")),
        }
    }
}

impl fmt::Display for HorizonSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HorizonSpec::Exp(l) => write!(f, "exp:{l}"),
            HorizonSpec::Fixed(t) => write!(f, "fixed:{t}"),
            HorizonSpec::Inf => write!(f, "inf"),
            HorizonSpec::Hypo(r) => {
                let parts: Vec<String> = r.iter().map(|v| v.to_string()).collect();
                write!(f, "hypo:{}", parts.join(","))
            }
            HorizonSpec::Erlang(t, n) => write!(f, "erlang:{t},{n}"),
        }
    }
}

impl TryFrom<String> for HorizonSpec {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<HorizonSpec> for String {
    fn from(h: HorizonSpec) -> String {
        h.to_string()
    }
}

impl HorizonSpec {
    /// The horizon as the library sees it; Erlang stages become their
    /// hypoexponential rates.
    pub fn to_horizon(&self) -> ruinlab::Result<Horizon> {
        Ok(match self {
            HorizonSpec::Exp(lambda) => Horizon::Exponential { lambda: *lambda },
            HorizonSpec::Fixed(t) => Horizon::Fixed { t: *t },
            HorizonSpec::Inf => Horizon::Infinite,
            HorizonSpec::Hypo(rates) => Horizon::Hypoexponential { rates: rates.clone() },
            HorizonSpec::Erlang(t, n) => Horizon::Hypoexponential { rates: erlang_rates(*t, *n)? },
        })
    }
}

/// `start:stop:points`, evenly spaced with both ends included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl FromStr for GridSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let [start, stop, points] = parts[..] else {
            return Err(format!("grid `{s}` is not start:stop:points"));
        };
        let num = |v: &str| -> Result<f64, String> {
            v.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| format!("grid bound `{v}` is not a finite number"))
        };
        let g = GridSpec {
            start: num(start)?,
            stop: num(stop)?,
            points: points
                .trim()
                .parse()
                .map_err(|_| format!("grid point count `{points}` is not an integer"))?,
        };
        if g.start < 0.0 {
            return Err(format!("grid start must be >= 0, got {}", g.start));
        }
        if g.start >= g.stop {
            return Err(format!("grid start {} must be below stop {}", g.start, g.stop));
        }
        if g.points < 2 {
            return Err(format!("grid needs at least 2 points, got {}", g.points));
        }
        Ok(g)
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.stop, self.points)
    }
}

impl TryFrom<String> for GridSpec {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<GridSpec> for String {
    fn from(g: GridSpec) -> String {
        g.to_string()
    }
}

impl GridSpec {
    pub fn values(&self) -> Vec<f64> {
        let n = self.points - 1;
        let h = (self.stop - self.start) / n as f64;
        (0..=n)
            .map(|i| if i == n { self.stop } else { self.start + h * i as f64 })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRequest {
    pub command: CommandName,
    #[serde(flatten)]
    pub model: ModelSpec,
    /// Refraction rate; present means the refracted process.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    pub x: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<HorizonSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    pub format: Format,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Delay rate for `parisian`, killing rate for `validate`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    /// Look-ahead time for `drawdown`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_paths: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub bridge: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suite: Option<Suite>,
}

pub const DEFAULT_PATHS: usize = 10_000;
pub const DEFAULT_ATOM_PATHS: usize = 100_000;

impl RunRequest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap_or_default()
    }
}

/// Where a setting came from, for error context.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Flag,
    File { line: Option<usize> },
}

#[derive(Debug, Clone)]
pub struct Entry {
    pub value: Value,
    pub source: Source,
}

pub type Settings = BTreeMap<String, Entry>;

fn check<T: DeserializeOwned>(v: &Value) -> Result<(), String> {
    serde_json::from_value::<T>(v.clone()).map(|_| ()).map_err(|e| e.to_string())
}

type Checker = fn(&Value) -> Result<(), String>;

const KEYS: &[(&str, Checker)] = &[
    ("command", check::<CommandName>),
    ("model", check::<ModelKind>),
    ("mu", check::<f64>),
    ("sigma", check::<f64>),
    ("c", check::<f64>),
    ("eta", check::<f64>),
    ("alpha", check::<f64>),
    ("T", check::<Vec<f64>>),
    ("alpha_vec", check::<Vec<f64>>),
    ("m", check::<usize>),
    ("delta", check::<f64>),
    ("x", check::<f64>),
    ("horizon", check::<HorizonSpec>),
    ("grid", check::<GridSpec>),
    ("format", check::<Format>),
    ("output", check::<PathBuf>),
    ("q", check::<f64>),
    ("s", check::<f64>),
    ("seed", check::<u64>),
    ("n_paths", check::<usize>),
    ("dt", check::<f64>),
    ("bridge", check::<bool>),
    ("suite", check::<Suite>),
];

pub fn canonical_key(key: &str) -> String {
    match key.replace('-', "_").as_str() {
        "t_matrix" => "T".to_string(),
        k => k.to_string(),
    }
}

fn entry_error(key: &str, source: Source, message: String) -> CliError {
    match source {
        Source::Flag => CliError::usage(format!("--{}: {message}", key.replace('_', "-"))),
        Source::File { line } => CliError::config(line, Some(key), message),
    }
}

fn missing(key: &str, settings: &Settings, why: &str) -> CliError {
    let line = settings.get("model").and_then(|e| match e.source {
        Source::File { line } => line,
        Source::Flag => None,
    });
    match settings.get("model").map(|e| e.source) {
        Some(Source::File { .. }) => CliError::config(line, Some(key), format!("missing {key}: {why}")),
        _ => CliError::usage(format!("missing --{}: {why}", key.replace('_', "-"))),
    }
}

/// Checks every setting and assembles the effective request.
pub fn build_request(settings: &Settings) -> Result<RunRequest, CliError> {
    for (key, entry) in settings {
        let Some((_, checker)) = KEYS.iter().find(|(k, _)| k == key) else {
            return Err(entry_error(key, entry.source, format!("unknown key `{key}`")));
        };
        checker(&entry.value).map_err(|m| entry_error(key, entry.source, m))?;
    }
    let get = |k: &str| settings.get(k).map(|e| e.value.clone());
    let command: CommandName = match get("command") {
        Some(v) => serde_json::from_value(v).expect("checked above"),
        None => return Err(CliError::usage("no command given")),
    };
    let kind: ModelKind = match get("model") {
        Some(v) => serde_json::from_value(v).expect("checked above"),
        None => return Err(missing("model", settings, "every command needs a model")),
    };
    let mut obj = Map::new();
    obj.insert("command".into(), get("command").unwrap_or(Value::Null));
    obj.insert("model".into(), Value::String(kind.tag().into()));
    for key in kind.keys() {
        let v = get(key).ok_or_else(|| missing(key, settings, &format!("model {} requires it", kind.tag())))?;
        obj.insert((*key).into(), v);
    }
    if kind == ModelKind::Jdpt {
        let m = obj["alpha_vec"].as_array().map_or(0, Vec::len);
        obj.insert("m".into(), m.into());
    }
    for key in [
        "delta", "x", "horizon", "grid", "format", "output", "q", "s", "seed", "n_paths", "dt", "bridge", "suite",
    ] {
        if let Some(v) = get(key) {
            obj.insert(key.into(), v);
        }
    }
    obj.entry("x").or_insert(0.0.into());
    let default_format = if command == CommandName::Validate { "json" } else { "csv" };
    obj.entry("format").or_insert(default_format.into());
    let mut req: RunRequest =
        serde_json::from_value(Value::Object(obj)).map_err(|e| CliError::config(None, None, e.to_string()))?;
    match command {
        CommandName::Simulate => {
            req.seed.get_or_insert(0);
            req.n_paths.get_or_insert(DEFAULT_PATHS);
        }
        CommandName::Validate => {
            let suite = *req.suite.get_or_insert(Suite::Identities);
            if suite == Suite::RefractedAtom {
                req.seed.get_or_insert(0);
                req.n_paths.get_or_insert(DEFAULT_ATOM_PATHS);
            } else {
                req.q.get_or_insert(1.0);
            }
        }
        _ => {}
    }
    Ok(req)
}

/// Reads a config file: a JSON object, or one `key = value` (or
/// `key: value`) per line with `#` comments. Values are read as JSON where
/// they parse and as bare strings otherwise.
pub fn load_config(text: &str) -> Result<Settings, CliError> {
    let mut out = Settings::new();
    if text.trim_start().starts_with('{') {
        let map: Map<String, Value> =
            serde_json::from_str(text).map_err(|e| CliError::config(Some(e.line()), None, e.to_string()))?;
        for (k, v) in map {
            out.insert(canonical_key(&k), Entry { value: v, source: Source::File { line: None } });
        }
        return Ok(out);
    }
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let Some(split) = body.find(['=', ':']) else {
            return Err(CliError::config(Some(line), None, format!("expected key = value, got `{body}`")));
        };
        let key = body[..split].trim();
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return Err(CliError::config(Some(line), None, format!("invalid key `{key}`")));
        }
        let key = canonical_key(key);
        let text = body[split + 1..].trim();
        if text.is_empty() {
            return Err(CliError::config(Some(line), Some(&key), "empty value"));
        }
        let value = serde_json::from_str(text).unwrap_or_else(|_| {
            let bare = text.strip_prefix('\'').and_then(|t| t.strip_suffix('\'')).unwrap_or(text);
            Value::String(bare.to_string())
        });
        if out.contains_key(&key) {
            return Err(CliError::config(Some(line), Some(&key), "key given twice"));
        }
        out.insert(key, Entry { value, source: Source::File { line: Some(line) } });
    }
    Ok(out)
}

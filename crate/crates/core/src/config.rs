//! Experiment configuration files.
//!
//! Configs are TOML documents with flat sections. Top-level keys select the
//! experiment and seed; each section configures one part of the run:
//!
//! ```toml
//! experiment = "solve"
//! seed = 1
//!
//! [grid]
//! lower = [0.0]
//! upper = [1.0]
//! h = 0.025
//!
//! [game]
//! epsilon = 0.025
//! f = "2"
//! F = "x"
//! ```
//!
//! Expressions are strings (numbers are accepted too) or catalog names such
//! as `"zero-counterexample"`. All expressions are parsed at load time.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;
use toml::{Table, Value};

use crate::expr::{FunctionSpec, ParseError};
use crate::game::{SolveOptions, SweepMode};
use crate::operators::{Form, Role};
use crate::solutions;
use crate::verification::ConeDirection;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Selector {
    Solve,
    Recover,
    Unique,
    Doubling,
    Slope,
    Cones,
    Check,
    Simulate,
}

impl Selector {
    pub const ALL: [Selector; 8] = [
        Selector::Solve,
        Selector::Recover,
        Selector::Unique,
        Selector::Doubling,
        Selector::Slope,
        Selector::Cones,
        Selector::Check,
        Selector::Simulate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Selector::Solve => "solve",
            Selector::Recover => "recover",
            Selector::Unique => "unique",
            Selector::Doubling => "doubling",
            Selector::Slope => "slope",
            Selector::Cones => "cones",
            Selector::Check => "check",
            Selector::Simulate => "simulate",
        }
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Selector {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Selector::ALL
            .into_iter()
            .find(|sel| sel.name() == s)
            .ok_or_else(|| ConfigError::UnknownSelector {
                found: s.to_string(),
                valid: Selector::ALL.iter().map(|s| s.name()).collect::<Vec<_>>().join(", "),
            })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("reading {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{0}")]
    Syntax(String),
    #[error("missing required key '{key}'")]
    Missing { key: String },
    #[error("{}'{key}': {message}", line_prefix(*.line))]
    Invalid {
        key: String,
        line: Option<usize>,
        message: String,
    },
    #[error("{}'{key}': cannot parse expression \"{text}\": {err}", line_prefix(*.line))]
    Expression {
        key: String,
        line: Option<usize>,
        text: String,
        err: ParseError,
    },
    #[error("unknown experiment '{found}'; valid experiments are: {valid}")]
    UnknownSelector { found: String, valid: String },
    #[error("{}unknown key '{key}'", line_prefix(*.line))]
    UnknownKey { key: String, line: Option<usize> },
    #[error("override '{arg}': {message}")]
    Override { arg: String, message: String },
}

fn line_prefix(line: Option<usize>) -> String {
    line.map(|l| format!("line {l}: ")).unwrap_or_default()
}

/// An expression as written in the config, with its parsed form.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Expression {
    pub text: String,
    /// Catalog entry the text named, if any.
    pub catalog: Option<&'static str>,
    #[serde(skip)]
    pub spec: FunctionSpec,
}

/// Where a field comes from: sampled from an expression, or the game value
/// solved from the `[game]` block.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldSource {
    Solve,
    Expr(Expression),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GameConfig {
    pub epsilon: f64,
    pub f: Option<Expression>,
    #[serde(rename = "F")]
    pub terminal: Expression,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorKind {
    Infinity,
    Normalized,
    Aronsson,
    General,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperatorConfig {
    pub kind: OperatorKind,
    pub hamiltonian: Option<Expression>,
    /// Explicit partials, in the order H_x1, H_x2, H_z, H_p1, H_p2.
    pub partials: [Option<Expression>; 5],
    pub step: f64,
    pub b: Vec<Expression>,
    pub c: Option<Expression>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckConfig {
    pub u: FieldSource,
    pub f: Expression,
    pub form: Form,
    pub roles: Vec<Role>,
    pub theta: f64,
    pub tol: f64,
    pub region: Option<(Vec<f64>, Vec<f64>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoverConfig {
    pub u: FieldSource,
    pub theta: f64,
    pub reference: Option<Expression>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniqueConfig {
    pub f: Expression,
    pub g: Expression,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoublingConfig {
    pub u: FieldSource,
    pub v: Option<FieldSource>,
    pub epsilons: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeConfig {
    pub u: FieldSource,
    pub center: Vec<f64>,
    pub radii: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConesConfig {
    pub u: FieldSource,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub directions: Vec<ConeDirection>,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateConfig {
    pub start: Vec<f64>,
    pub samples: usize,
    pub step_cap: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub prefix: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Selector,
    pub seed: u64,
    pub grid: GridConfig,
    pub game: Option<GameConfig>,
    pub solver: SolveOptions,
    pub operator: Option<OperatorConfig>,
    pub check: Option<CheckConfig>,
    pub recover: Option<RecoverConfig>,
    pub unique: Option<UniqueConfig>,
    pub doubling: Option<DoublingConfig>,
    pub slope: Option<SlopeConfig>,
    pub cones: Option<ConesConfig>,
    pub simulate: Option<SimulateConfig>,
    pub output: OutputConfig,
    /// The effective key-value table after overrides, echoed in reports.
    #[serde(skip)]
    pub table: Table,
}

const KNOWN_KEYS: &[(&str, &[&str])] = &[
    ("", &["experiment", "seed"]),
    ("grid", &["lower", "upper", "h"]),
    ("game", &["epsilon", "f", "F"]),
    ("solver", &["tol", "max_iter", "sweep"]),
    (
        "operator",
        &["kind", "H", "H_x1", "H_x2", "H_z", "H_p1", "H_p2", "step", "B", "c"],
    ),
    ("check", &["u", "f", "form", "role", "theta", "tol", "lower", "upper"]),
    ("recover", &["u", "theta", "reference"]),
    ("unique", &["f", "g"]),
    ("doubling", &["u", "v", "epsilon"]),
    ("slope", &["u", "center", "radii"]),
    ("cones", &["u", "lower", "upper", "direction", "tol"]),
    ("simulate", &["start", "samples", "step_cap"]),
    ("output", &["dir", "prefix"]),
];

/// Reads and validates a config file, then applies `key=value` overrides.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    parse_config(&text, overrides)
}

pub fn parse_config(text: &str, overrides: &[String]) -> Result<ExperimentConfig, ConfigError> {
    let mut table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string().trim_end().to_string()))?;
    let mut overridden = BTreeSet::new();
    for arg in overrides {
        let key = apply_override(&mut table, arg)?;
        overridden.insert(key);
    }
    let reader = Reader {
        table: &table,
        source: text,
        overridden,
    };
    reader.check_known_keys()?;
    reader.build(table.clone())
}

/// Parses `section.key=value` and stores it. The value is read as a TOML
/// value when possible and as a bare string otherwise.
fn apply_override(table: &mut Table, arg: &str) -> Result<String, ConfigError> {
    let bad = |message: &str| ConfigError::Override {
        arg: arg.to_string(),
        message: message.to_string(),
    };
    let (key, raw) = arg.split_once('=').ok_or_else(|| bad("expected key=value"))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => Value::String(raw.to_string()),
    };
    let (section, name) = match key.split_once('.') {
        Some((s, n)) => (s, n),
        None => ("", key),
    };
    if name.is_empty() || name.contains('.') {
        return Err(bad("keys look like 'name' or 'section.name'"));
    }
    if section.is_empty() {
        table.insert(name.to_string(), value);
    } else {
        let entry = table
            .entry(section.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        match entry {
            Value::Table(t) => {
                t.insert(name.to_string(), value);
            }
            _ => return Err(bad("section name is already used by a plain key")),
        }
    }
    Ok(key.to_string())
}

struct Reader<'a> {
    table: &'a Table,
    source: &'a str,
    overridden: BTreeSet<String>,
}

impl Reader<'_> {
    fn get(&self, key: &str) -> Option<&Value> {
        match key.split_once('.') {
            Some((section, name)) => self.table.get(section)?.as_table()?.get(name),
            None => self.table.get(key),
        }
    }

    fn has_section(&self, section: &str) -> bool {
        self.table.get(section).is_some_and(Value::is_table)
    }

    /// Line of `key` in the source text, if it came from the file.
    fn line_of(&self, key: &str) -> Option<usize> {
        if self.overridden.contains(key) {
            return None;
        }
        let (section, name) = key.split_once('.').unwrap_or(("", key));
        let mut current = String::new();
        for (i, line) in self.source.lines().enumerate() {
            let t = line.trim();
            if let Some(rest) = t.strip_prefix('[') {
                current = rest.trim_end_matches(']').trim().to_string();
                continue;
            }
            if current == section {
                if let Some((k, _)) = t.split_once('=') {
                    let k = k.trim().trim_matches('"');
                    if k == name {
                        return Some(i + 1);
                    }
                }
            }
        }
        None
    }

    fn invalid(&self, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError::Invalid {
            key: key.to_string(),
            line: self.line_of(key),
            message: message.into(),
        }
    }

    fn check_known_keys(&self) -> Result<(), ConfigError> {
        let known = |section: &str, name: &str| {
            KNOWN_KEYS
                .iter()
                .any(|(s, keys)| *s == section && keys.contains(&name))
        };
        for (name, value) in self.table {
            match value {
                Value::Table(inner) => {
                    if !KNOWN_KEYS.iter().any(|(s, _)| !s.is_empty() && s == name) {
                        return Err(ConfigError::UnknownKey {
                            key: name.clone(),
                            line: self.section_line(name),
                        });
                    }
                    for k in inner.keys() {
                        if !known(name, k) {
                            let key = format!("{name}.{k}");
                            return Err(ConfigError::UnknownKey {
                                line: self.line_of(&key),
                                key,
                            });
                        }
                    }
                }
                _ if known("", name) => {}
                _ => {
                    return Err(ConfigError::UnknownKey {
                        key: name.clone(),
                        line: self.line_of(name),
                    })
                }
            }
        }
        Ok(())
    }

    fn section_line(&self, section: &str) -> Option<usize> {
        self.source.lines().position(|l| {
            l.trim()
                .strip_prefix('[')
                .is_some_and(|r| r.trim_end_matches(']').trim() == section)
        })
        .map(|i| i + 1)
    }

    fn f64(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Float(v)) if v.is_finite() => Ok(Some(*v)),
            Some(Value::Integer(v)) => Ok(Some(*v as f64)),
            Some(other) => Err(self.invalid(key, format!("expected a finite number, got {other}"))),
        }
    }

    fn positive(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.f64(key)? {
            Some(v) if v <= 0.0 => Err(self.invalid(key, format!("must be positive, got {v}"))),
            v => Ok(v),
        }
    }

    fn require<T>(&self, key: &str, v: Option<T>) -> Result<T, ConfigError> {
        v.ok_or_else(|| ConfigError::Missing { key: key.to_string() })
    }

    fn u64(&self, key: &str) -> Result<Option<u64>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Integer(v)) if *v >= 0 => Ok(Some(*v as u64)),
            Some(other) => Err(self.invalid(key, format!("expected a non-negative integer, got {other}"))),
        }
    }

    fn string(&self, key: &str) -> Result<Option<&str>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(other) => Err(self.invalid(key, format!("expected a string, got {other}"))),
        }
    }

    /// A number or an array of numbers.
    fn list(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| match v {
                    Value::Float(x) if x.is_finite() => Ok(*x),
                    Value::Integer(x) => Ok(*x as f64),
                    other => Err(self.invalid(key, format!("expected numbers, found {other}"))),
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
            Some(_) => self.f64(key).map(|v| v.map(|x| vec![x])),
        }
    }

    fn point(&self, key: &str, dim: usize) -> Result<Option<Vec<f64>>, ConfigError> {
        match self.list(key)? {
            Some(p) if p.len() != dim => Err(self.invalid(
                key,
                format!("expected {dim} coordinate(s), got {}", p.len()),
            )),
            p => Ok(p),
        }
    }

    fn expr_text(&self, key: &str, value: &Value) -> Result<String, ConfigError> {
        match value {
            Value::String(s) => Ok(s.clone()),
            Value::Integer(v) => Ok(v.to_string()),
            Value::Float(v) => Ok(format!("{v:?}")),
            other => Err(self.invalid(key, format!("expected an expression, got {other}"))),
        }
    }

    fn parse_expression(&self, key: &str, text: String) -> Result<Expression, ConfigError> {
        if let Some(entry) = solutions::lookup(text.trim()) {
            return Ok(Expression {
                spec: entry.function(),
                catalog: Some(entry.name),
                text,
            });
        }
        match FunctionSpec::parse(&text) {
            Ok(spec) => Ok(Expression {
                text,
                catalog: None,
                spec,
            }),
            Err(err) => Err(ConfigError::Expression {
                key: key.to_string(),
                line: self.line_of(key),
                text,
                err,
            }),
        }
    }

    fn expr(&self, key: &str) -> Result<Option<Expression>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => {
                let text = self.expr_text(key, v)?;
                self.parse_expression(key, text).map(Some)
            }
        }
    }

    fn source(&self, key: &str) -> Result<FieldSource, ConfigError> {
        match self.get(key) {
            None => Ok(FieldSource::Solve),
            Some(Value::String(s)) if s.trim() == "solve" => Ok(FieldSource::Solve),
            Some(_) => Ok(FieldSource::Expr(self.expr(key)?.expect("present"))),
        }
    }

    fn choice<T: Copy>(&self, key: &str, options: &[(&str, T)], default: T) -> Result<T, ConfigError> {
        match self.string(key)? {
            None => Ok(default),
            Some(s) => options
                .iter()
                .find(|(name, _)| *name == s)
                .map(|(_, v)| *v)
                .ok_or_else(|| {
                    let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
                    self.invalid(key, format!("'{s}' is not one of: {}", names.join(", ")))
                }),
        }
    }

    fn build(&self, table: Table) -> Result<ExperimentConfig, ConfigError> {
        let selector: Selector = self
            .require("experiment", self.string("experiment")?)?
            .parse()?;
        let seed = self.u64("seed")?.unwrap_or(0);

        let lower = self.require("grid.lower", self.list("grid.lower")?)?;
        let upper = self.require("grid.upper", self.list("grid.upper")?)?;
        let h = self.require("grid.h", self.positive("grid.h")?)?;
        if !(1..=2).contains(&lower.len()) {
            return Err(self.invalid("grid.lower", "grids have 1 or 2 dimensions"));
        }
        if upper.len() != lower.len() {
            return Err(self.invalid("grid.upper", "dimension differs from grid.lower"));
        }
        let dim = lower.len();
        let grid = GridConfig { lower, upper, h };

        let solver = SolveOptions {
            tol: self.positive("solver.tol")?.unwrap_or(SolveOptions::default().tol),
            max_iter: match self.u64("solver.max_iter")? {
                Some(0) => return Err(self.invalid("solver.max_iter", "must be at least 1")),
                Some(n) => n as usize,
                None => SolveOptions::default().max_iter,
            },
            sweep: self.choice(
                "solver.sweep",
                &[("jacobi", SweepMode::Jacobi), ("gauss-seidel", SweepMode::GaussSeidel)],
                SweepMode::Jacobi,
            )?,
        };

        let sqrt_h = h.sqrt();
        let wants = |sel: Selector, name: &str| selector == sel || self.has_section(name);

        let check = if wants(Selector::Check, "check") {
            let u = self.source("check.u")?;
            let f = match self.expr("check.f")? {
                Some(f) => f,
                None => self.require("check.f", self.expr("game.f")?)?,
            };
            let tol_default = match u {
                FieldSource::Solve => 10.0 * sqrt_h,
                FieldSource::Expr(_) => 10.0 * h * h,
            };
            let roles = match self.string("check.role")?.unwrap_or("both") {
                "sub" => vec![Role::Sub],
                "super" => vec![Role::Super],
                "both" => vec![Role::Sub, Role::Super],
                other => {
                    return Err(self.invalid(
                        "check.role",
                        format!("'{other}' is not one of: sub, super, both"),
                    ))
                }
            };
            let region = match (self.point("check.lower", dim)?, self.point("check.upper", dim)?) {
                (Some(lo), Some(hi)) => Some((lo, hi)),
                (None, None) => None,
                (None, _) => return Err(ConfigError::Missing { key: "check.lower".into() }),
                (_, None) => return Err(ConfigError::Missing { key: "check.upper".into() }),
            };
            let tol = match self.f64("check.tol")? {
                Some(t) if t < 0.0 => return Err(self.invalid("check.tol", "must be non-negative")),
                Some(t) => t,
                None => tol_default,
            };
            Some(CheckConfig {
                u,
                f,
                form: self.choice(
                    "check.form",
                    &[("ratio", Form::Ratio), ("product", Form::Product)],
                    Form::Ratio,
                )?,
                roles,
                theta: self.positive("check.theta")?.unwrap_or(sqrt_h),
                tol,
                region,
            })
        } else {
            None
        };

        let recover = if wants(Selector::Recover, "recover") {
            Some(RecoverConfig {
                u: self.source("recover.u")?,
                theta: self.positive("recover.theta")?.unwrap_or(sqrt_h),
                reference: self.expr("recover.reference")?,
            })
        } else {
            None
        };

        let unique = if wants(Selector::Unique, "unique") {
            Some(UniqueConfig {
                f: self.require("unique.f", self.expr("unique.f")?)?,
                g: self.require("unique.g", self.expr("unique.g")?)?,
            })
        } else {
            None
        };

        let doubling = if wants(Selector::Doubling, "doubling") {
            let epsilons = match self.list("doubling.epsilon")? {
                Some(list) if list.is_empty() || list.iter().any(|e| *e <= 0.0) => {
                    return Err(self.invalid("doubling.epsilon", "need one or more positive values"))
                }
                Some(list) => list,
                None => vec![self.require("doubling.epsilon", self.positive("game.epsilon")?)?],
            };
            let v = match self.get("doubling.v") {
                Some(_) => Some(self.source("doubling.v")?),
                None => None,
            };
            Some(DoublingConfig {
                u: self.source("doubling.u")?,
                v,
                epsilons,
            })
        } else {
            None
        };

        let slope = if wants(Selector::Slope, "slope") {
            let radii = self.require("slope.radii", self.list("slope.radii")?)?;
            Some(SlopeConfig {
                u: self.source("slope.u")?,
                center: self.require("slope.center", self.point("slope.center", dim)?)?,
                radii,
            })
        } else {
            None
        };

        let cones = if wants(Selector::Cones, "cones") {
            let directions = match self.string("cones.direction")?.unwrap_or("both") {
                "above" => vec![ConeDirection::Above],
                "below" => vec![ConeDirection::Below],
                "both" => vec![ConeDirection::Above, ConeDirection::Below],
                other => {
                    return Err(self.invalid(
                        "cones.direction",
                        format!("'{other}' is not one of: above, below, both"),
                    ))
                }
            };
            Some(ConesConfig {
                u: self.source("cones.u")?,
                lower: self.require("cones.lower", self.point("cones.lower", dim)?)?,
                upper: self.require("cones.upper", self.point("cones.upper", dim)?)?,
                directions,
                tol: self.positive("cones.tol")?.unwrap_or(h),
            })
        } else {
            None
        };

        let simulate = if wants(Selector::Simulate, "simulate") {
            let samples = match self.u64("simulate.samples")? {
                Some(0) => return Err(self.invalid("simulate.samples", "must be at least 1")),
                Some(n) => n as usize,
                None => 10_000,
            };
            Some(SimulateConfig {
                start: self.require("simulate.start", self.point("simulate.start", dim)?)?,
                samples,
                step_cap: self.u64("simulate.step_cap")?,
            })
        } else {
            None
        };

        let operator = if self.has_section("operator") {
            Some(self.operator()?)
        } else {
            None
        };

        // The [game] block is needed whenever something is solved.
        let solves = |s: Option<&FieldSource>| matches!(s, Some(FieldSource::Solve));
        let needs_value = matches!(selector, Selector::Solve | Selector::Simulate)
            || solves(check.as_ref().map(|c| &c.u))
            || solves(recover.as_ref().map(|c| &c.u))
            || solves(doubling.as_ref().map(|c| &c.u))
            || solves(doubling.as_ref().and_then(|c| c.v.as_ref()))
            || solves(slope.as_ref().map(|c| &c.u))
            || solves(cones.as_ref().map(|c| &c.u));
        let needs_game = needs_value || selector == Selector::Unique;
        let game = if needs_game || self.has_section("game") {
            let epsilon = self.positive("game.epsilon")?;
            let terminal = self.expr("game.F")?;
            let f = self.expr("game.f")?;
            if needs_game {
                let epsilon = self.require("game.epsilon", epsilon)?;
                if epsilon < h {
                    return Err(self.invalid(
                        "game.epsilon",
                        format!("must be at least grid.h = {h}, got {epsilon}"),
                    ));
                }
                let terminal = self.require("game.F", terminal)?;
                if needs_value && f.is_none() {
                    return Err(ConfigError::Missing { key: "game.f".into() });
                }
                Some(GameConfig { epsilon, f, terminal })
            } else {
                match (epsilon, terminal) {
                    (Some(epsilon), Some(terminal)) => Some(GameConfig { epsilon, f, terminal }),
                    _ => None,
                }
            }
        } else {
            None
        };

        let output = OutputConfig {
            dir: PathBuf::from(self.string("output.dir")?.unwrap_or(".")),
            prefix: self
                .string("output.prefix")?
                .map(str::to_string)
                .unwrap_or_else(|| selector.name().to_string()),
        };

        Ok(ExperimentConfig {
            experiment: selector,
            seed,
            grid,
            game,
            solver,
            operator,
            check,
            recover,
            unique,
            doubling,
            slope,
            cones,
            simulate,
            output,
            table,
        })
    }

    fn operator(&self) -> Result<OperatorConfig, ConfigError> {
        let kind = self.choice(
            "operator.kind",
            &[
                ("infinity", OperatorKind::Infinity),
                ("normalized", OperatorKind::Normalized),
                ("aronsson", OperatorKind::Aronsson),
                ("general", OperatorKind::General),
            ],
            OperatorKind::Infinity,
        )?;
        let hamiltonian = self.expr("operator.H")?;
        if kind == OperatorKind::Aronsson && hamiltonian.is_none() {
            return Err(ConfigError::Missing { key: "operator.H".into() });
        }
        let partials = [
            self.expr("operator.H_x1")?,
            self.expr("operator.H_x2")?,
            self.expr("operator.H_z")?,
            self.expr("operator.H_p1")?,
            self.expr("operator.H_p2")?,
        ];
        let b = match self.get("operator.B") {
            None => Vec::new(),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| {
                    let text = self.expr_text("operator.B", v)?;
                    self.parse_expression("operator.B", text)
                })
                .collect::<Result<_, _>>()?,
            Some(_) => return Err(self.invalid("operator.B", "expected an array of expressions")),
        };
        let c = self.expr("operator.c")?;
        if kind == OperatorKind::General && b.is_empty() {
            return Err(ConfigError::Missing { key: "operator.B".into() });
        }
        Ok(OperatorConfig {
            kind,
            hamiltonian,
            partials,
            step: self.positive("operator.step")?.unwrap_or(crate::operators::DEFAULT_DIFF_STEP),
            b,
            c,
        })
    }
}

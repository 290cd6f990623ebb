//! Problem configuration files (TOML).
//!
//! ```toml
//! [space]
//! dims = [1, 2]                 # module dimensions d_i
//! beta = [0.0, 2.0]             # defaults to zeros
//! brackets = [{ i = 1, k = 2, l = 3, value = 0.5 }]   # 1-based, optional
//!
//! [boundary]
//! a = [1.0, 0.25]               # f_i(0)
//! b = [1.0, 0.25]               # f_i(1)
//!
//! [solver]                      # every key optional
//! engine = "continuation"       # torus | continuation | shooting
//! intervals = 256
//! residual_tol = 1e-8
//! newton_tol = 1e-12            # continuation corrector
//! shooting_tol = 1e-10          # shooting Newton
//! length = 1.0                  # shooting only
//! starts = 32
//! seed = 12648430
//! polish = true
//! initial_slopes = [0.0, 0.0]   # shooting only, y_i'(0)
//!
//! [output]                      # every key optional
//! dir = "out"
//! stem = "run"                  # defaults to the config file stem
//! formats = ["csv", "jsonl"]
//! diagnostics = false           # continuation step log
//! ```
//!
//! Unknown keys are rejected everywhere.

use std::fmt;
use std::ops::Range;
use std::path::PathBuf;

use dirichlet_einstein::general::MIN_INTERVALS;
use dirichlet_einstein::{BoundarySpec, SpaceData};
use serde::{Deserialize, Serialize};
use toml::Spanned;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Torus,
    Continuation,
    Shooting,
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Engine::Torus => "torus",
            Engine::Continuation => "continuation",
            Engine::Shooting => "shooting",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    #[serde(alias = "json-lines")]
    #[value(alias = "json-lines")]
    Jsonl,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Jsonl => "jsonl",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub space: SpaceBlock,
    pub boundary: BoundaryBlock,
    #[serde(default)]
    pub solver: SolverBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceBlock {
    pub dims: Spanned<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Spanned<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub brackets: Vec<Bracket>,
}

/// Fully symmetric bracket constant `[ikl]`, indices starting at 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bracket {
    pub i: usize,
    pub k: usize,
    pub l: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryBlock {
    pub a: Spanned<Vec<f64>>,
    pub b: Spanned<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverBlock {
    pub engine: Engine,
    pub intervals: usize,
    pub residual_tol: f64,
    pub newton_tol: f64,
    pub shooting_tol: f64,
    pub length: f64,
    pub starts: usize,
    pub seed: u64,
    pub polish: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_slopes: Option<Vec<f64>>,
}

impl Default for SolverBlock {
    fn default() -> Self {
        Self {
            engine: Engine::Continuation,
            intervals: 256,
            residual_tol: 1e-8,
            newton_tol: 1e-12,
            shooting_tol: 1e-10,
            length: 1.0,
            starts: 32,
            seed: 0x00c0_ffee,
            polish: true,
            initial_slopes: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stem: Option<String>,
    pub formats: Vec<Format>,
    pub diagnostics: bool,
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            dir: None,
            stem: None,
            formats: vec![Format::Csv, Format::Jsonl],
            diagnostics: false,
        }
    }
}

/// A rejected configuration, with the offending field and line when known.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ConfigError {
    pub field: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.field.is_empty()) {
            (Some(l), false) => write!(f, "line {l}, {}: {}", self.field, self.message),
            (Some(l), true) => write!(f, "line {l}: {}", self.message),
            (None, false) => write!(f, "{}: {}", self.field, self.message),
            (None, true) => f.write_str(&self.message),
        }
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<ProblemConfig, ConfigError> {
    let config: ProblemConfig = toml::from_str(text).map_err(|e| ConfigError {
        field: String::new(),
        line: e.span().map(|s| line_at(text, s.start)),
        message: e.message().trim().to_string(),
    })?;
    config.check(Some(text))?;
    Ok(config)
}

fn line_at(text: &str, offset: usize) -> usize {
    text.as_bytes()[..offset.min(text.len())]
        .iter()
        .filter(|&&c| c == b'\n')
        .count()
        + 1
}

struct Ctx<'a> {
    text: Option<&'a str>,
}

impl Ctx<'_> {
    fn err(&self, field: impl Into<String>, span: Option<Range<usize>>, msg: impl Into<String>) -> ConfigError {
        ConfigError {
            field: field.into(),
            line: self.text.zip(span).map(|(t, s)| line_at(t, s.start)),
            message: msg.into(),
        }
    }
}

impl ProblemConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        parse_config(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration always serialises")
    }

    /// Re-checks every invariant, e.g. after command-line overrides.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.check(None)
    }

    fn check(&self, text: Option<&str>) -> Result<(), ConfigError> {
        let cx = Ctx { text };
        let dims = &self.space.dims;
        let n = dims.get_ref().len();
        if n == 0 {
            return Err(cx.err("space.dims", Some(dims.span()), "at least one summand is required"));
        }
        if let Some(i) = dims.get_ref().iter().position(|&d| d == 0) {
            return Err(cx.err(format!("space.dims[{i}]"), Some(dims.span()), "dimensions must be >= 1"));
        }
        if dims.get_ref().iter().sum::<usize>() <= 1 {
            return Err(cx.err(
                "space.dims",
                Some(dims.span()),
                "total dimension must be strictly greater than 1",
            ));
        }
        if let Some(beta) = &self.space.beta {
            if beta.get_ref().len() != n {
                return Err(cx.err("space.beta", Some(beta.span()), format!("expected {n} entries")));
            }
            if beta.get_ref().iter().any(|v| !v.is_finite()) {
                return Err(cx.err("space.beta", Some(beta.span()), "entries must be finite"));
            }
        }
        for (j, br) in self.space.brackets.iter().enumerate() {
            if [br.i, br.k, br.l].iter().any(|&x| x == 0 || x > n) {
                return Err(cx.err(
                    format!("space.brackets[{j}]"),
                    None,
                    format!("indices must lie in 1..={n}"),
                ));
            }
            if !br.value.is_finite() {
                return Err(cx.err(format!("space.brackets[{j}]"), None, "value must be finite"));
            }
        }
        for (name, arr) in [("a", &self.boundary.a), ("b", &self.boundary.b)] {
            let field = format!("boundary.{name}");
            if arr.get_ref().len() != n {
                return Err(cx.err(field, Some(arr.span()), format!("expected {n} entries")));
            }
            if let Some(i) = arr.get_ref().iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
                return Err(cx.err(
                    format!("{field}[{i}]"),
                    Some(arr.span()),
                    "boundary coefficients must be positive",
                ));
            }
        }
        let s = &self.solver;
        if s.intervals < MIN_INTERVALS {
            return Err(cx.err("solver.intervals", None, format!("must be at least {MIN_INTERVALS}")));
        }
        for (name, v) in [
            ("residual_tol", s.residual_tol),
            ("newton_tol", s.newton_tol),
            ("shooting_tol", s.shooting_tol),
            ("length", s.length),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(cx.err(format!("solver.{name}"), None, "must be positive"));
            }
        }
        if s.starts == 0 {
            return Err(cx.err("solver.starts", None, "must be at least 1"));
        }
        if let Some(g) = &s.initial_slopes {
            if g.len() != n || g.iter().any(|v| !v.is_finite()) {
                return Err(cx.err("solver.initial_slopes", None, format!("expected {n} finite entries")));
            }
        }
        if s.engine == Engine::Torus && !self.is_torus() {
            return Err(cx.err(
                "solver.engine",
                None,
                "the torus engine needs unit dimensions, beta = 0 and no brackets",
            ));
        }
        if self.output.formats.is_empty() {
            return Err(cx.err("output.formats", None, "at least one format is required"));
        }
        self.space()
            .map_err(|e| cx.err("space", Some(dims.span()), e.to_string()))?;
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.space.dims.get_ref().len()
    }

    pub fn is_torus(&self) -> bool {
        self.space.dims.get_ref().iter().all(|&d| d == 1)
            && self.space.brackets.iter().all(|b| b.value == 0.0)
            && self
                .space
                .beta
                .as_ref()
                .is_none_or(|b| b.get_ref().iter().all(|&v| v == 0.0))
    }

    pub fn space(&self) -> dirichlet_einstein::Result<SpaceData> {
        let dims = self.space.dims.get_ref().clone();
        let beta = match &self.space.beta {
            Some(b) => b.get_ref().clone(),
            None => vec![0.0; dims.len()],
        };
        if self.space.brackets.is_empty() {
            SpaceData::without_gamma(dims, beta)
        } else {
            let br: Vec<_> = self
                .space
                .brackets
                .iter()
                .map(|b| (b.i - 1, b.k - 1, b.l - 1, b.value))
                .collect();
            SpaceData::from_brackets(dims, beta, &br)
        }
    }

    pub fn boundary(&self) -> dirichlet_einstein::Result<BoundarySpec> {
        BoundarySpec::new(self.boundary.a.get_ref().clone(), self.boundary.b.get_ref().clone())
    }
}

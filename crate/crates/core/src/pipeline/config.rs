use std::path::{Path, PathBuf};
use std::time::Duration;

use crate::engine::{Method, SolverConfig};
use crate::statespace::BuildConfig;

use super::PipelineError;

pub const MODEL_EXTENSION: &str = "prism";
pub const PROPS_EXTENSION: &str = "props";
pub const DEFAULT_POLL: Duration = Duration::from_secs(1);

/// Fully resolved pipeline settings.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub model: PathBuf,
    pub props: PathBuf,
    pub out_dir: PathBuf,
    /// `NAME=VALUE` overrides in the order given; later entries win.
    pub constants: Vec<(String, String)>,
    pub solver: SolverConfig,
    pub build: BuildConfig,
    pub poll_interval: Duration,
    pub templates: Option<PathBuf>,
    pub dot: bool,
}

impl PipelineConfig {
    /// Settings for a model and property file pair with everything else at
    /// its default.
    pub fn new(
        model: impl Into<PathBuf>,
        props: impl Into<PathBuf>,
        out_dir: impl Into<PathBuf>,
    ) -> Self {
        PipelineConfig {
            model: model.into(),
            props: props.into(),
            out_dir: out_dir.into(),
            constants: Vec::new(),
            solver: SolverConfig::default(),
            build: BuildConfig::default(),
            poll_interval: DEFAULT_POLL,
            templates: None,
            dot: false,
        }
    }

    /// Base name shared by all output files.
    pub fn stem(&self) -> String {
        self.model
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "model".into())
    }

    /// Checks that the input files exist. Watch mode passes
    /// `require_props = false` because editors may briefly remove the file.
    pub fn check_paths(&self, require_props: bool) -> Result<(), PipelineError> {
        if !self.model.is_file() {
            return Err(PipelineError::Config(format!(
                "model file {} not found",
                self.model.display()
            )));
        }
        if require_props && !self.props.is_file() {
            return Err(PipelineError::Config(format!(
                "property file {} not found",
                self.props.display()
            )));
        }
        if let Some(t) = &self.templates {
            if !t.is_file() {
                return Err(PipelineError::Config(format!(
                    "template file {} not found",
                    t.display()
                )));
            }
        }
        Ok(())
    }
}

/// Partially specified settings from a config file or command-line flags.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigSource {
    pub model: Option<PathBuf>,
    pub props: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub constants: Vec<(String, String)>,
    pub epsilon: Option<f64>,
    pub max_iters: Option<usize>,
    pub method: Option<Method>,
    pub max_states: Option<usize>,
    pub poll_ms: Option<u64>,
    pub templates: Option<PathBuf>,
    pub dot: Option<bool>,
}

/// Splits `NAME=VALUE`.
pub fn parse_assignment(text: &str) -> Result<(String, String), PipelineError> {
    let (k, v) = text
        .split_once('=')
        .ok_or_else(|| PipelineError::Config(format!("expected NAME=VALUE, found `{text}`")))?;
    let (k, v) = (k.trim(), v.trim());
    if k.is_empty() || v.is_empty() {
        return Err(PipelineError::Config(format!(
            "expected NAME=VALUE, found `{text}`"
        )));
    }
    Ok((k.to_string(), v.to_string()))
}

fn parse_number<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, PipelineError> {
    v.parse()
        .map_err(|_| PipelineError::Config(format!("`{key}`: `{v}` is not a valid number")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, PipelineError> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(PipelineError::Config(format!(
            "`{key}`: `{v}` is not a boolean"
        ))),
    }
}

pub fn parse_method(v: &str) -> Result<Method, PipelineError> {
    match v {
        "jacobi" => Ok(Method::Jacobi),
        "gauss-seidel" | "gs" => Ok(Method::GaussSeidel),
        _ => Err(PipelineError::Config(format!(
            "unknown solver method `{v}`"
        ))),
    }
}

impl ConfigSource {
    /// Reads `key = value` lines. Keys: `model`, `props`, `out`, `const`
    /// (repeatable, `NAME=VALUE`), `epsilon`, `max_iters`, `method`,
    /// `max_states`, `poll_ms`, `templates`, `dot`. Relative paths are
    /// taken relative to `base`.
    pub fn parse(text: &str, base: Option<&Path>) -> Result<Self, PipelineError> {
        let mut c = ConfigSource::default();
        let path = |v: &str| match base {
            Some(b) if Path::new(v).is_relative() => b.join(v),
            _ => PathBuf::from(v),
        };
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                PipelineError::Config(format!("config line {}: expected `key = value`", n + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "model" => c.model = Some(path(value)),
                "props" => c.props = Some(path(value)),
                "out" => c.out = Some(path(value)),
                "templates" => c.templates = Some(path(value)),
                "const" => c.constants.push(parse_assignment(value)?),
                "epsilon" => c.epsilon = Some(parse_number(key, value)?),
                "max_iters" => c.max_iters = Some(parse_number(key, value)?),
                "max_states" => c.max_states = Some(parse_number(key, value)?),
                "poll_ms" => c.poll_ms = Some(parse_number(key, value)?),
                "method" => c.method = Some(parse_method(value)?),
                "dot" => c.dot = Some(parse_bool(key, value)?),
                other => {
                    return Err(PipelineError::Config(format!(
                        "config line {}: unknown key `{other}`",
                        n + 1
                    )))
                }
            }
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path.parent())
    }

    /// Values of `over` take precedence; constants are concatenated so that
    /// the overriding ones come last.
    pub fn overlay(self, over: ConfigSource) -> ConfigSource {
        let mut constants = self.constants;
        constants.extend(over.constants);
        ConfigSource {
            model: over.model.or(self.model),
            props: over.props.or(self.props),
            out: over.out.or(self.out),
            constants,
            epsilon: over.epsilon.or(self.epsilon),
            max_iters: over.max_iters.or(self.max_iters),
            method: over.method.or(self.method),
            max_states: over.max_states.or(self.max_states),
            poll_ms: over.poll_ms.or(self.poll_ms),
            templates: over.templates.or(self.templates),
            dot: over.dot.or(self.dot),
        }
    }

    /// Fills in defaults. A missing model or property path is paired with
    /// the other by file stem in the same directory; a directory given as
    /// the model is searched for a single `.prism`/`.props` pair. Output
    /// goes next to the model unless `out` is set.
    pub fn resolve(self) -> Result<PipelineConfig, PipelineError> {
        let (model, props) = match (self.model, self.props) {
            (Some(m), _) if m.is_dir() => discover_pair(&m)?,
            (Some(m), Some(p)) => (m, p),
            (Some(m), None) => {
                let p = m.with_extension(PROPS_EXTENSION);
                (m, p)
            }
            (None, Some(p)) => (p.with_extension(MODEL_EXTENSION), p),
            (None, None) => return Err(PipelineError::Config("no model file given".into())),
        };
        let out_dir = self.out.unwrap_or_else(|| {
            model
                .parent()
                .filter(|p| !p.as_os_str().is_empty())
                .map(Path::to_path_buf)
                .unwrap_or_else(|| PathBuf::from("."))
        });
        let mut solver = SolverConfig::default();
        if let Some(e) = self.epsilon {
            solver.epsilon = e;
        }
        if let Some(m) = self.max_iters {
            solver.max_iterations = m;
        }
        if let Some(m) = self.method {
            solver.method = m;
        }
        solver
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        let mut build = BuildConfig::default();
        if let Some(m) = self.max_states {
            build.max_states = m;
        }
        let poll_interval = match self.poll_ms {
            Some(0) => {
                return Err(PipelineError::Config(
                    "poll interval must be positive".into(),
                ))
            }
            Some(ms) => Duration::from_millis(ms),
            None => DEFAULT_POLL,
        };
        Ok(PipelineConfig {
            model,
            props,
            out_dir,
            constants: self.constants,
            solver,
            build,
            poll_interval,
            templates: self.templates,
            dot: self.dot.unwrap_or(false),
        })
    }
}

/// Finds the single model in `dir` that has a property file of the same
/// stem.
pub fn discover_pair(dir: &Path) -> Result<(PathBuf, PathBuf), PipelineError> {
    let entries = std::fs::read_dir(dir).map_err(|source| PipelineError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut pairs: Vec<(PathBuf, PathBuf)> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == MODEL_EXTENSION))
        .map(|m| {
            let p = m.with_extension(PROPS_EXTENSION);
            (m, p)
        })
        .filter(|(_, p)| p.is_file())
        .collect();
    pairs.sort();
    match pairs.len() {
        1 => Ok(pairs.pop().unwrap()),
        0 => Err(PipelineError::Config(format!(
            "no .{MODEL_EXTENSION} file with a matching .{PROPS_EXTENSION} file in {}",
            dir.display()
        ))),
        n => Err(PipelineError::Config(format!(
            "{n} model/property pairs in {}; name one with --model",
            dir.display()
        ))),
    }
}

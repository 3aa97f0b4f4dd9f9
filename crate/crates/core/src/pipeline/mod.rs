//! File-level pipeline: verification runs, argument generation with merge,
//! lifecycle commands and the change watcher.
//!
//! Every command works in memory first and writes its outputs only once
//! everything succeeded, each file through a temporary name and a rename.

mod config;
mod watch;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::diag::Diagnostics;
use crate::engine::{check_property, EngineError, VerificationResult};
use crate::gsn::{
    export_dot, parse_dsl, serialize_dsl, validate_argument, ArgumentModel, DslError, Issue,
};
use crate::hash::{sha256_fields, sha256_hex};
use crate::lifecycle::{
    apply_regeneration, detect_changes, impact_analysis, ingest_monitor_events, parse_monitor_log,
    plan_regeneration, EvolutionPackage, ImpactReport, IngestReport, LifecycleError,
    RegenerationPlan,
};
use crate::model::{bind_constants, type_check, BindError, BoundModel, PropertySpec, Value};
use crate::parser::{parse_model, parse_properties};
use crate::statespace::{build_state_space, fix_deadlocks, BuildError};
use crate::transformer::{
    build_argument, property_fingerprint, regenerate, ArgumentTemplate, ModelRef, TransformError,
};

pub use config::{
    discover_pair, parse_assignment, parse_method, ConfigSource, PipelineConfig, DEFAULT_POLL,
};
pub use watch::{PollOutcome, Watcher};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Syntax(Diagnostics),
    #[error("constant override `{name}`: `{value}` is not a literal")]
    BadOverride { name: String, value: String },
    #[error("binding constants: {0}")]
    Bind(#[from] BindError),
    #[error("building the state space: {0}")]
    Build(#[from] BuildError),
    #[error("property `{property}`: {source}")]
    Engine {
        property: String,
        #[source]
        source: EngineError,
    },
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Lifecycle(#[from] LifecycleError),
    #[error("{}:{}: {}", path.display(), source.line, source.message)]
    Dsl { path: PathBuf, source: DslError },
    #[error("{}:{line}: {message}", path.display())]
    Data {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("no argument at {0}; run `generate` first")]
    NoArgument(PathBuf),
}

/// Process exit status contract of the command-line tool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    /// All bounded properties hold.
    Success = 0,
    /// At least one bounded property is violated.
    Violated = 1,
    /// Input, build or solver error.
    Error = 2,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }

    pub fn of_results(results: &[VerificationResult]) -> Self {
        if results.iter().any(|r| r.verdict == Some(false)) {
            ExitStatus::Violated
        } else {
            ExitStatus::Success
        }
    }
}

/// Output file locations, all in the output directory and named after the
/// model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputPaths {
    pub results: PathBuf,
    pub gsn: PathBuf,
    pub dot: PathBuf,
    pub ingest: PathBuf,
    pub impact: PathBuf,
    pub impact_text: PathBuf,
    pub plan: PathBuf,
}

impl OutputPaths {
    pub fn new(cfg: &PipelineConfig) -> Self {
        let stem = cfg.stem();
        let f = |suffix: &str| cfg.out_dir.join(format!("{stem}{suffix}"));
        OutputPaths {
            results: f(".results.jsonl"),
            gsn: f(".gsn"),
            dot: f(".dot"),
            ingest: f(".ingest.json"),
            impact: f(".impact.json"),
            impact_text: f(".impact.txt"),
            plan: f(".plan.json"),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn read_text(path: &Path) -> Result<String, PipelineError> {
    std::fs::read_to_string(path).map_err(io_err(path))
}

/// Replaces `path` with `bytes` through a temporary file in the same
/// directory, so readers see either the old or the new content.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut tmp = tempfile::Builder::new()
        .prefix(".tmp-")
        .tempfile_in(dir)
        .map_err(io_err(dir))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.as_file().sync_all().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| PipelineError::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

/// Writes only when the content differs. Returns whether it wrote.
fn write_if_changed(path: &Path, bytes: &[u8]) -> Result<bool, PipelineError> {
    if std::fs::read(path).is_ok_and(|old| old == bytes) {
        return Ok(false);
    }
    write_atomic(path, bytes)?;
    Ok(true)
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serialises");
    s.push('\n');
    s
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, PipelineError> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Data {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

/// One JSON object per line.
pub fn results_to_jsonl(results: &[VerificationResult]) -> String {
    results
        .iter()
        .map(|r| serde_json::to_string(r).expect("result serialises") + "\n")
        .collect()
}

pub fn results_from_jsonl(
    text: &str,
    path: &Path,
) -> Result<Vec<VerificationResult>, PipelineError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| PipelineError::Data {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn read_results(path: &Path) -> Result<Vec<VerificationResult>, PipelineError> {
    results_from_jsonl(&read_text(path)?, path)
}

/// Input texts as read at one instant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sources {
    pub model: String,
    pub props: String,
    pub templates: Option<String>,
}

impl Sources {
    pub fn read(cfg: &PipelineConfig) -> Result<Self, PipelineError> {
        Ok(Sources {
            model: read_text(&cfg.model)?,
            props: read_text(&cfg.props)?,
            templates: cfg.templates.as_deref().map(read_text).transpose()?,
        })
    }

    pub fn fingerprint(&self) -> String {
        sha256_fields([
            self.model.as_str(),
            self.props.as_str(),
            self.templates.as_deref().unwrap_or(""),
        ])
    }
}

/// Parsed, type-checked and bound inputs.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub model: BoundModel,
    pub props: Vec<PropertySpec>,
    pub model_ref: ModelRef,
    pub template: ArgumentTemplate,
}

pub fn parse_overrides(
    constants: &[(String, String)],
) -> Result<BTreeMap<String, Value>, PipelineError> {
    constants
        .iter()
        .map(|(k, v)| {
            Value::parse_literal(v)
                .map(|val| (k.clone(), val))
                .ok_or_else(|| PipelineError::BadOverride {
                    name: k.clone(),
                    value: v.clone(),
                })
        })
        .collect()
}

/// Model reference recorded in the argument: the file name, so the
/// argument does not depend on the working directory.
fn model_reference(cfg: &PipelineConfig) -> String {
    cfg.model
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| cfg.model.display().to_string())
}

pub fn prepare(cfg: &PipelineConfig, src: &Sources) -> Result<Inputs, PipelineError> {
    let ast =
        parse_model(&src.model).map_err(|d| PipelineError::Syntax(d.with_file(&cfg.model)))?;
    let typed = type_check(&ast).map_err(|d| PipelineError::Syntax(d.with_file(&cfg.model)))?;
    let model = bind_constants(&typed, &parse_overrides(&cfg.constants)?)?;
    let props =
        parse_properties(&src.props).map_err(|d| PipelineError::Syntax(d.with_file(&cfg.props)))?;
    let template = match &src.templates {
        Some(t) => ArgumentTemplate::parse(t)?,
        None => ArgumentTemplate::default(),
    };
    template.check()?;
    let model_ref = ModelRef {
        name: cfg.stem(),
        path: model_reference(cfg),
        fingerprint: model.fingerprint().to_string(),
    };
    Ok(Inputs {
        model,
        props,
        model_ref,
        template,
    })
}

/// Builds the state space and checks every property, in parallel.
pub fn verify(
    cfg: &PipelineConfig,
    inputs: &Inputs,
) -> Result<Vec<VerificationResult>, PipelineError> {
    let space = fix_deadlocks(build_state_space(&inputs.model, &cfg.build)?);
    let d = &space.diagnostics;
    if d.deadlock_states_fixed > 0 {
        log::warn!(
            "{}: {} deadlock state(s) given self-loops (e.g. {})",
            cfg.model.display(),
            d.deadlock_states_fixed,
            d.deadlock_samples
                .iter()
                .take(3)
                .map(|s| space.describe_state(*s))
                .collect::<Vec<_>>()
                .join(", ")
        );
    }
    log::debug!(
        "{}: {} states, {} transitions",
        cfg.model.display(),
        space.len(),
        space.matrix().nnz()
    );
    inputs
        .props
        .par_iter()
        .map(|p| {
            check_property(&space, p, &cfg.solver).map_err(|source| PipelineError::Engine {
                property: p.name.clone(),
                source,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub results: Vec<VerificationResult>,
    pub status: ExitStatus,
    pub results_path: PathBuf,
}

/// Verifies all properties and writes the results file.
pub fn cmd_check(cfg: &PipelineConfig) -> Result<CheckOutcome, PipelineError> {
    cfg.check_paths(true)?;
    let src = Sources::read(cfg)?;
    let inputs = prepare(cfg, &src)?;
    let results = verify(cfg, &inputs)?;
    let paths = OutputPaths::new(cfg);
    write_atomic(&paths.results, results_to_jsonl(&results).as_bytes())?;
    Ok(CheckOutcome {
        status: ExitStatus::of_results(&results),
        results,
        results_path: paths.results,
    })
}

#[derive(Debug, Clone)]
pub struct CycleOutcome {
    pub results: Vec<VerificationResult>,
    pub argument: ArgumentModel,
    /// Version of the argument that was merged with, if any.
    pub previous_version: Option<u32>,
    /// Node ids whose version changed or that are new.
    pub bumped: Vec<String>,
    pub orphans: usize,
    /// The `.gsn` file content changed.
    pub written: bool,
    pub issues: Vec<Issue>,
    pub status: ExitStatus,
}

impl CycleOutcome {
    /// One-line summary for logs.
    pub fn summary(&self) -> String {
        let held = self
            .results
            .iter()
            .filter(|r| r.verdict == Some(true))
            .count();
        let violated = self
            .results
            .iter()
            .filter(|r| r.verdict == Some(false))
            .count();
        let mut s = format!(
            "{} properties ({held} hold, {violated} violated); argument v{} with {} nodes",
            self.results.len(),
            self.argument.version,
            self.argument.nodes.len()
        );
        if self.previous_version.is_some() {
            if self.bumped.is_empty() {
                s += ", unchanged";
            } else {
                s += &format!(", updated: {}", self.bumped.join(" "));
            }
        }
        if self.orphans > 0 {
            s += &format!(", {} orphaned item(s) quarantined", self.orphans);
        }
        s
    }
}

fn load_previous(path: &Path) -> Result<Option<ArgumentModel>, PipelineError> {
    match std::fs::read_to_string(path) {
        Ok(text) => parse_dsl(&text)
            .map(Some)
            .map_err(|source| PipelineError::Dsl {
                path: path.to_path_buf(),
                source,
            }),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(source) => Err(PipelineError::Io {
            path: path.to_path_buf(),
            source,
        }),
    }
}

/// Verification followed by argument generation for the given sources.
/// Nothing is written unless both succeed.
pub fn run_cycle(cfg: &PipelineConfig, src: &Sources) -> Result<CycleOutcome, PipelineError> {
    let paths = OutputPaths::new(cfg);
    let inputs = prepare(cfg, src)?;
    let results = verify(cfg, &inputs)?;
    let fresh = build_argument(&inputs.model_ref, &inputs.props, &results, &inputs.template)?;
    let previous = load_previous(&paths.gsn)?;
    let argument = match &previous {
        Some(prev) => regenerate(prev, &fresh),
        None => fresh,
    };
    let bumped = argument
        .nodes
        .values()
        .filter(|n| {
            previous
                .as_ref()
                .and_then(|p| p.node(&n.id))
                .is_none_or(|old| old.version != n.version)
        })
        .map(|n| n.id.clone())
        .collect();
    let orphans = argument.quarantine.annotations.len() + argument.quarantine.traces.len();
    if orphans > 0 {
        log::warn!(
            "{}: {orphans} orphaned annotation(s) or trace link(s) quarantined",
            paths.gsn.display()
        );
    }
    let issues = validate_argument(&argument);
    let text = serialize_dsl(&argument);

    write_atomic(&paths.results, results_to_jsonl(&results).as_bytes())?;
    let written = write_if_changed(&paths.gsn, text.as_bytes())?;
    if cfg.dot {
        write_if_changed(&paths.dot, export_dot(&argument).as_bytes())?;
    }
    Ok(CycleOutcome {
        status: ExitStatus::of_results(&results),
        previous_version: previous.map(|p| p.version),
        results,
        argument,
        bumped,
        orphans,
        written,
        issues,
    })
}

/// Verifies and (re)generates the argument, merging with an existing one.
pub fn cmd_generate(cfg: &PipelineConfig) -> Result<CycleOutcome, PipelineError> {
    cfg.check_paths(true)?;
    run_cycle(cfg, &Sources::read(cfg)?)
}

fn load_argument(paths: &OutputPaths) -> Result<ArgumentModel, PipelineError> {
    load_previous(&paths.gsn)?.ok_or_else(|| PipelineError::NoArgument(paths.gsn.clone()))
}

fn save_argument(
    paths: &OutputPaths,
    cfg: &PipelineConfig,
    arg: &ArgumentModel,
) -> Result<(), PipelineError> {
    write_if_changed(&paths.gsn, serialize_dsl(arg).as_bytes())?;
    if cfg.dot {
        write_if_changed(&paths.dot, export_dot(arg).as_bytes())?;
    }
    Ok(())
}

/// Applies monitor logs to the stored argument.
pub fn cmd_ingest(cfg: &PipelineConfig, logs: &[PathBuf]) -> Result<IngestReport, PipelineError> {
    let paths = OutputPaths::new(cfg);
    let arg = load_argument(&paths)?;
    let mut events = Vec::new();
    for log in logs {
        events.extend(parse_monitor_log(&read_text(log)?)?);
    }
    let (out, report) = ingest_monitor_events(&arg, &events)?;
    save_argument(&paths, cfg, &out)?;
    write_atomic(&paths.ingest, to_json(&report).as_bytes())?;
    Ok(report)
}

/// Current fingerprints of the configured model and its properties.
fn current_fingerprints(
    cfg: &PipelineConfig,
    inputs: &Inputs,
) -> (BTreeMap<String, String>, BTreeMap<String, String>) {
    let models = BTreeMap::from([(model_reference(cfg), inputs.model.fingerprint().to_string())]);
    let props = inputs
        .props
        .iter()
        .map(|p| (p.name.clone(), property_fingerprint(p)))
        .collect();
    (models, props)
}

/// Change-impact analysis of the stored argument. Without a package
/// directory the changes are detected from the current input files; the
/// logs of a package are ingested first. With `recheck` the current inputs
/// are verified so changed goals can be told apart from unaffected ones.
pub fn cmd_impact(
    cfg: &PipelineConfig,
    package: Option<&Path>,
    recheck: bool,
) -> Result<ImpactReport, PipelineError> {
    let paths = OutputPaths::new(cfg);
    let mut arg = load_argument(&paths)?;
    let needs_inputs = package.is_none() || recheck;
    let inputs = if needs_inputs {
        cfg.check_paths(true)?;
        Some(prepare(cfg, &Sources::read(cfg)?)?)
    } else {
        None
    };
    let pkg = match package {
        Some(dir) => {
            let pkg = EvolutionPackage::load(dir)?;
            let events = pkg.events()?;
            if !events.is_empty() {
                arg = ingest_monitor_events(&arg, &events)?.0;
            }
            pkg
        }
        None => {
            let inputs = inputs.as_ref().expect("inputs prepared");
            let (models, props) = current_fingerprints(cfg, inputs);
            EvolutionPackage {
                changes: detect_changes(&arg, &models, &props),
                ..Default::default()
            }
        }
    };
    let fresh = match (&inputs, recheck) {
        (Some(i), true) => Some(verify(cfg, i)?),
        _ => None,
    };
    let (report, out) = impact_analysis(&arg, &pkg, fresh.as_deref())?;
    save_argument(&paths, cfg, &out)?;
    write_atomic(&paths.impact, to_json(&report).as_bytes())?;
    write_atomic(&paths.impact_text, report.to_text().as_bytes())?;
    Ok(report)
}

/// Plans evidence regeneration from the last impact report.
pub fn cmd_plan(cfg: &PipelineConfig) -> Result<RegenerationPlan, PipelineError> {
    let paths = OutputPaths::new(cfg);
    let arg = load_argument(&paths)?;
    let report: ImpactReport = read_json(&paths.impact)?;
    let (plan, out) = plan_regeneration(&report, &arg)?;
    for w in &plan.warnings {
        log::warn!("{w}");
    }
    save_argument(&paths, cfg, &out)?;
    write_atomic(&paths.plan, to_json(&plan).as_bytes())?;
    Ok(plan)
}

#[derive(Debug, Clone)]
pub struct ApplyOutcome {
    pub argument: ArgumentModel,
    pub applied: Vec<String>,
    pub skipped: Vec<String>,
}

/// Re-verifies the current inputs (or takes results from `results`) and
/// applies them to the planned goals.
pub fn cmd_apply(
    cfg: &PipelineConfig,
    results: Option<&Path>,
) -> Result<ApplyOutcome, PipelineError> {
    let paths = OutputPaths::new(cfg);
    let arg = load_argument(&paths)?;
    let plan: RegenerationPlan = read_json(&paths.plan)?;
    cfg.check_paths(true)?;
    let inputs = prepare(cfg, &Sources::read(cfg)?)?;
    let fresh = match results {
        Some(p) => read_results(p)?,
        None => {
            let r = verify(cfg, &inputs)?;
            write_atomic(&paths.results, results_to_jsonl(&r).as_bytes())?;
            r
        }
    };
    let (models, props) = current_fingerprints(cfg, &inputs);
    let changes = detect_changes(&arg, &models, &props);
    let out = apply_regeneration(&arg, &plan, &fresh, &inputs.template, &changes)?;
    save_argument(&paths, cfg, &out)?;
    let (applied, skipped) = plan
        .entries
        .iter()
        .partition::<Vec<_>, _>(|e| e.strategy == crate::lifecycle::PlanStrategy::ReVerify);
    Ok(ApplyOutcome {
        argument: out,
        applied: applied.into_iter().map(|e| e.goal.clone()).collect(),
        skipped: skipped.into_iter().map(|e| e.goal.clone()).collect(),
    })
}

/// Hash of a file's bytes, `None` if it cannot be read.
pub fn file_fingerprint(path: &Path) -> Option<String> {
    std::fs::read(path).ok().map(sha256_hex)
}

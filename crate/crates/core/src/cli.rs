//! Command-line front end.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};

use crate::effects::{catalog, infer_initial_schema, trace, EffectOptions};
use crate::emit::{emit_dot, emit_yw, ViewKind};
use crate::graph::{
    build_collapsed, build_linear, build_parallel, downstream_impact, upstream_lineage, GraphError,
    NodeKind, WorkflowModel,
};
use crate::recipe::{parse_recipe, validate_recipe, Diagnostic, Severity};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RECIPE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Linear,
    Parallel,
    Collapsed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ViewArg {
    Combined,
    Process,
    Data,
}

impl From<ViewArg> for ViewKind {
    fn from(v: ViewArg) -> Self {
        match v {
            ViewArg::Combined => ViewKind::Combined,
            ViewArg::Process => ViewKind::Process,
            ViewArg::Data => ViewKind::Data,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Dot,
    Yw,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Dot => "dot",
            Format::Yw => "yw",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Upstream,
    Downstream,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub direction: Direction,
    pub node: String,
}

fn parse_query(s: &str) -> Result<Query, String> {
    let (dir, node) = s
        .split_once(':')
        .ok_or_else(|| "expected upstream:<node> or downstream:<node>".to_owned())?;
    let direction = match dir {
        "upstream" => Direction::Upstream,
        "downstream" => Direction::Downstream,
        other => return Err(format!("unknown direction {other:?}")),
    };
    if node.is_empty() {
        return Err("empty node".to_owned());
    }
    Ok(Query {
        direction,
        node: node.to_owned(),
    })
}

fn parse_arity(s: &str) -> Result<(String, usize), String> {
    let (label, k) = s
        .rsplit_once('=')
        .ok_or_else(|| "expected <column>=<count>".to_owned())?;
    let k: usize = k.parse().map_err(|_| format!("bad count {k:?}"))?;
    if k == 0 {
        return Err("count must be at least 1".to_owned());
    }
    Ok((label.to_owned(), k))
}

fn parse_threshold(s: &str) -> Result<usize, String> {
    let k: usize = s.parse().map_err(|_| format!("bad threshold {s:?}"))?;
    if k < 2 {
        return Err("threshold must be at least 2".to_owned());
    }
    Ok(k)
}

/// Converts an OpenRefine operation history into a workflow model.
#[derive(Debug, Parser)]
#[command(name = "recipeflow", version)]
pub struct Cli {
    /// Recipe JSON exported from OpenRefine.
    #[arg(short, long, required_unless_present = "list_ops")]
    pub input: Option<PathBuf>,

    /// Output file, or `-` for standard output.
    #[arg(short, long, default_value = "-")]
    pub output: PathBuf,

    #[arg(short = 't', long, value_enum, default_value_t = ModelArg::Parallel)]
    pub model: ModelArg,

    #[arg(short, long, value_enum, default_value_t = ViewArg::Combined)]
    pub view: ViewArg,

    #[arg(short, long, value_enum, default_value_t = Format::Dot)]
    pub format: Format,

    /// Shortest run of similar steps folded into a summary.
    #[arg(long, default_value_t = 3, value_parser = parse_threshold)]
    pub collapse_threshold: usize,

    /// Number of parts a split of COLUMN produces, as COLUMN=K.
    #[arg(long, value_parser = parse_arity)]
    pub split_arity: Vec<(String, usize)>,

    /// Restrict output to `upstream:NODE` or `downstream:NODE`.
    #[arg(long, value_parser = parse_query)]
    pub query: Option<Query>,

    /// Print the supported operations and exit.
    #[arg(long)]
    pub list_ops: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    pub input: PathBuf,
    pub output: PathBuf,
    pub model: ModelArg,
    pub view: ViewKind,
    pub format: Format,
    pub collapse_threshold: usize,
    pub split_arity: BTreeMap<String, usize>,
    pub query: Option<Query>,
}

/// Failure of a run, carrying the exit status.
#[derive(Debug)]
pub struct Failure {
    pub status: i32,
    pub diagnostics: Vec<Diagnostic>,
}

impl Failure {
    fn usage(code: &'static str, message: impl Into<String>) -> Self {
        Failure {
            status: EXIT_USAGE,
            diagnostics: vec![Diagnostic::error(code, None, message)],
        }
    }

    fn recipe(mut notes: Vec<Diagnostic>, d: Diagnostic) -> Self {
        notes.push(d);
        Failure {
            status: EXIT_RECIPE,
            diagnostics: notes,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.diagnostics {
            writeln!(f, "{d}")?;
        }
        Ok(())
    }
}

/// One rendered file. `path` is `None` for standard output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rendered {
    pub path: Option<PathBuf>,
    pub text: String,
}

/// Everything a run produces before anything is written.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<Rendered>,
    pub diagnostics: Vec<Diagnostic>,
}

fn model_name(input: &Path) -> String {
    input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "workflow".to_owned())
}

/// Finds a node by id, or else the latest data node carrying the label.
fn resolve_node(model: &WorkflowModel, key: &str) -> Option<String> {
    if model.node(key).is_some() {
        return Some(key.to_owned());
    }
    model
        .nodes
        .iter()
        .rev()
        .find(|n| n.kind.is_data() && n.label == key)
        .map(|n| n.id.clone())
}

fn render(model: &WorkflowModel, cfg: &RunConfig) -> String {
    match cfg.format {
        Format::Dot => emit_dot(model, cfg.view),
        Format::Yw => emit_yw(model, cfg.view),
    }
}

/// Path of the detail file for `summary_id`, next to the main output.
pub fn detail_path(cfg: &RunConfig, summary_id: &str) -> PathBuf {
    let ext = cfg.format.extension();
    if cfg.output.as_os_str() == "-" {
        PathBuf::from(format!(
            "{}.detail.{summary_id}.{ext}",
            model_name(&cfg.input)
        ))
    } else {
        let stem = model_name(&cfg.output);
        cfg.output
            .with_file_name(format!("{stem}.detail.{summary_id}.{ext}"))
    }
}

/// Builds every output of a run in memory.
pub fn plan(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let text = std::fs::read_to_string(&cfg.input).map_err(|e| {
        Failure::usage("usage", format!("cannot read {}: {e}", cfg.input.display()))
    })?;
    let source = cfg
        .input
        .file_name()
        .map(|s| s.to_string_lossy().into_owned());
    let recipe = parse_recipe(&text, source.as_deref())
        .map_err(|e| Failure::recipe(Vec::new(), (&e).into()))?;

    let mut notes = validate_recipe(&recipe);
    let opts = EffectOptions {
        split_arity: cfg.split_arity.clone(),
    };
    let initial = infer_initial_schema(&recipe, &opts);
    let traced = match trace(&recipe, &initial, &opts) {
        Ok(t) => t,
        Err(e) => return Err(Failure::recipe(notes, (&e).into())),
    };
    notes.extend(traced.diagnostics.iter().cloned());

    let (model, details) = match cfg.model {
        ModelArg::Linear => (build_linear(&recipe, &traced.states), Vec::new()),
        ModelArg::Parallel => (
            build_parallel(&recipe, &traced.effects, &traced.states),
            Vec::new(),
        ),
        ModelArg::Collapsed => {
            match build_collapsed(
                &recipe,
                &traced.effects,
                &traced.states,
                cfg.collapse_threshold,
            ) {
                Ok(pair) => pair,
                Err(e) => return Err(Failure::usage(e.code(), e.to_string())),
            }
        }
    };

    let model = match &cfg.query {
        None => model,
        Some(q) => {
            let Some(id) = resolve_node(&model, &q.node) else {
                let e = GraphError::UnknownNode(q.node.clone());
                return Err(Failure::usage(e.code(), e.to_string()));
            };
            let sub = match q.direction {
                Direction::Upstream => upstream_lineage(&model, &id),
                Direction::Downstream => downstream_impact(&model, &id),
            };
            sub.map_err(|e| Failure::usage(e.code(), e.to_string()))?
        }
    };

    let mut files = vec![Rendered {
        path: (cfg.output.as_os_str() != "-").then(|| cfg.output.clone()),
        text: render(&model, cfg),
    }];
    for d in &details {
        let kept = model
            .node(&d.parent_summary_id)
            .is_some_and(|n| n.kind == NodeKind::Summary);
        if kept {
            files.push(Rendered {
                path: Some(detail_path(cfg, &d.parent_summary_id)),
                text: render(&d.inner, cfg),
            });
        }
    }
    Ok(Outcome {
        files,
        diagnostics: notes,
    })
}

/// Writes all files through temporaries, renaming only once every file
/// has been fully written.
fn write_files(files: &[Rendered], stdout: &mut dyn Write) -> io::Result<()> {
    let mut staged = Vec::new();
    for f in files {
        let Some(path) = &f.path else { continue };
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        tmp.write_all(f.text.as_bytes())?;
        tmp.flush()?;
        staged.push((tmp, path));
    }
    for (tmp, path) in staged {
        tmp.persist(path).map_err(|e| e.error)?;
    }
    for f in files.iter().filter(|f| f.path.is_none()) {
        stdout.write_all(f.text.as_bytes())?;
    }
    stdout.flush()
}

fn report(diags: &[Diagnostic], stderr: &mut dyn Write) {
    for d in diags {
        let _ = writeln!(stderr, "{d}");
    }
}

/// Runs a parsed configuration, returning the exit status.
pub fn run(cfg: &RunConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    match plan(cfg) {
        Err(f) => {
            report(&f.diagnostics, stderr);
            f.status
        }
        Ok(outcome) => {
            report(&outcome.diagnostics, stderr);
            debug_assert!(outcome
                .diagnostics
                .iter()
                .all(|d| d.severity != Severity::Error));
            match write_files(&outcome.files, stdout) {
                Ok(()) => EXIT_OK,
                Err(e) => {
                    let _ = writeln!(stderr, "{}", Diagnostic::error("io", None, e.to_string()));
                    EXIT_USAGE
                }
            }
        }
    }
}

/// Parses arguments and runs, returning the exit status.
pub fn main_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let status = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            if status == EXIT_OK {
                let _ = stdout.write_all(rendered.as_bytes());
            } else {
                let _ = stderr.write_all(rendered.as_bytes());
            }
            return status;
        }
    };
    if cli.list_ops {
        let _ = stdout.write_all(catalog::reference_markdown().as_bytes());
        return EXIT_OK;
    }
    let cfg = RunConfig {
        input: cli.input.expect("clap enforces --input"),
        output: cli.output,
        model: cli.model,
        view: cli.view.into(),
        format: cli.format,
        collapse_threshold: cli.collapse_threshold,
        split_arity: cli.split_arity.into_iter().collect(),
        query: cli.query,
    };
    run(&cfg, stdout, stderr)
}

//! Experiment runner: resolves a layered configuration, runs one experiment
//! and writes its CSV tables (and optional SVG plots).

// `!(x > 0.0)` style guards reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod merge;
pub mod output;
pub mod svg;

use std::fmt::Write;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use toml::{Table, Value};

use fwdre_core::config::ModelConfig;

pub use error::{Result, XpError};
pub use experiments::{info, EXPERIMENTS};
pub use output::Table as OutputTable;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "FWDRE_OUT_DIR";

/// Command-line overrides, applied after the config file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub dt: Option<f64>,
    pub svg: bool,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct OutputSection {
    dir: Option<PathBuf>,
    svg: bool,
}

/// Fully resolved experiment configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub id: String,
    pub model: ModelConfig,
    pub params: Value,
    pub out_dir: PathBuf,
    pub emit_svg: bool,
    /// Merged configuration that was hashed.
    pub resolved: Table,
    pub hash: String,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
    pub tables: Vec<OutputTable>,
    pub hash: String,
    pub seed: u64,
}

fn set(table: &mut Table, path: &[&str], v: Value) {
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut t = table;
    for key in parents {
        t = t
            .entry(key.to_string())
            .or_insert_with(|| Value::Table(Table::new()))
            .as_table_mut()
            .expect("defaults are tables");
    }
    t.insert(last.to_string(), v);
}

fn read_user_config(path: &Path) -> Result<Table> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| XpError::Config(format!("{}: {e}", path.display())))?;
    text.parse::<Table>()
        .map_err(|e| XpError::Config(format!("{}: {e}", path.display())))
}

/// Layers defaults, the config file and the command-line flags.
pub fn resolve(id: &str, opts: &RunOptions) -> Result<ExperimentConfig> {
    let mut cfg = experiments::defaults(id)?;
    if let Some(path) = &opts.config {
        let mut user = read_user_config(path)?;
        if let Some(v) = user.remove("experiment") {
            if v.as_str() != Some(id) {
                return Err(XpError::Config(format!(
                    "config is for experiment {v}, not `{id}`"
                )));
            }
        }
        for key in user.keys() {
            if !["model", "params", "output"].contains(&key.as_str()) {
                return Err(XpError::Config(format!("unknown top-level key `{key}`")));
            }
        }
        merge::deep_merge(&mut cfg, &user);
    }
    if let Some(seed) = opts.seed {
        let seed =
            i64::try_from(seed).map_err(|_| XpError::Config("seed must be < 2^63".into()))?;
        set(&mut cfg, &["model", "sim", "seed"], Value::Integer(seed));
    }
    if let Some(n) = opts.paths {
        set(
            &mut cfg,
            &["model", "sim", "n_paths"],
            Value::Integer(n as i64),
        );
    }
    if let Some(dt) = opts.dt {
        set(&mut cfg, &["model", "sim", "dt"], Value::Float(dt));
    }
    if opts.svg {
        set(&mut cfg, &["output", "svg"], Value::Boolean(true));
    }

    let output: OutputSection = match cfg.get("output") {
        Some(v) => v
            .clone()
            .try_into()
            .map_err(|e: toml::de::Error| XpError::Config(format!("[output]: {e}")))?,
        None => OutputSection::default(),
    };
    let model = ModelConfig::from_value(cfg["model"].clone())?;
    model.sim.validate()?;
    // The output location does not change the results, so it is left out
    // of the hash.
    let mut hashed = cfg.clone();
    if let Some(Value::Table(o)) = hashed.get_mut("output") {
        o.remove("dir");
    }
    let out_dir = opts
        .out
        .clone()
        .or(output.dir)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    Ok(ExperimentConfig {
        id: id.into(),
        params: cfg["params"].clone(),
        model,
        out_dir,
        emit_svg: output.svg,
        hash: merge::config_hash(&hashed),
        resolved: cfg,
    })
}

/// Computes the experiment's tables without writing anything.
pub fn compute(cfg: &ExperimentConfig) -> Result<Vec<OutputTable>> {
    experiments::dispatch(&cfg.id, &cfg.model, cfg.params.clone())
}

pub fn run(id: &str, opts: &RunOptions) -> Result<RunSummary> {
    let cfg = resolve(id, opts)?;
    let tables = compute(&cfg)?;
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| XpError::io(&cfg.out_dir, e))?;
    let seed = cfg.model.sim.seed;
    let mut files = Vec::new();
    for t in &tables {
        files.push(t.write_csv(&cfg.out_dir, &cfg.hash, seed)?);
        if cfg.emit_svg {
            files.extend(t.write_svg(&cfg.out_dir)?);
        }
    }
    Ok(RunSummary {
        files,
        tables,
        hash: cfg.hash,
        seed,
    })
}

pub fn list() -> String {
    let mut s = String::new();
    for e in &EXPERIMENTS {
        let _ = writeln!(s, "{:<14} {}", e.id, e.summary);
    }
    s
}

/// Description, outputs and the default configuration of an experiment.
pub fn describe(id: &str) -> Result<String> {
    let e = info(id)?;
    let mut s = String::new();
    let _ = writeln!(s, "{}: {}\n", e.id, e.summary);
    let _ = writeln!(s, "{}\n", textwrap(e.details, 78));
    let _ = writeln!(
        s,
        "Outputs (each CSV starts with `# config_hash=<sha256> seed=<n>`):"
    );
    for (file, cols) in e.outputs {
        let _ = writeln!(s, "  {file}: {cols}");
    }
    let defaults = experiments::defaults(id)?;
    let _ = writeln!(
        s,
        "\nDefault configuration (override any key with --config FILE):\n\n{}",
        toml::to_string(&defaults).unwrap_or_default()
    );
    Ok(s)
}

fn textwrap(text: &str, width: usize) -> String {
    let mut out = String::new();
    let mut line = 0;
    for word in text.split_whitespace() {
        if line > 0 && line + 1 + word.len() > width {
            out.push('\n');
            line = 0;
        } else if line > 0 {
            out.push(' ');
            line += 1;
        }
        out.push_str(word);
        line += word.len();
    }
    out
}

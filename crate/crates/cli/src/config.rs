//! Line-oriented `key = value` experiment configuration.
//!
//! Unknown keys, duplicate keys, and type mismatches are hard errors naming
//! the offending line; omitted optional keys take documented defaults.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use semnet::Precision;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}:{line}: {message}")]
    Line {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    File { path: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    FedMnist,
    KgCompress,
    Distortion,
    GradCheck,
    SemanticDigit,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::FedMnist => "fed-mnist",
            ExperimentKind::KgCompress => "kg-compress",
            ExperimentKind::Distortion => "distortion",
            ExperimentKind::GradCheck => "gradcheck",
            ExperimentKind::SemanticDigit => "semantic-digit",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "fed-mnist" => Some(ExperimentKind::FedMnist),
            "kg-compress" => Some(ExperimentKind::KgCompress),
            "distortion" => Some(ExperimentKind::Distortion),
            "gradcheck" => Some(ExperimentKind::GradCheck),
            "semantic-digit" => Some(ExperimentKind::SemanticDigit),
            _ => None,
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub mnist_dir: Option<PathBuf>,
    pub graph_content: Option<PathBuf>,
    pub graph_cites: Option<PathBuf>,
    pub graph_name: Option<String>,
    pub checkpoint: Option<PathBuf>,
    pub servers: Vec<usize>,
    pub targets: Vec<f64>,
    pub fractions: Vec<f64>,
    /// Bit budgets for the distortion experiment; empty means "use the
    /// default percentage grid of the full label payload".
    pub budgets: Vec<u64>,
    pub seeds: Vec<u64>,
    pub round_cap: usize,
    pub precision: Precision,
    pub output: PathBuf,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        ExperimentConfig {
            experiment,
            mnist_dir: None,
            graph_content: None,
            graph_cites: None,
            graph_name: None,
            checkpoint: None,
            servers: vec![1, 2, 4, 8],
            targets: vec![0.988],
            fractions: vec![0.05, 0.10, 0.25, 0.50, 0.75],
            budgets: vec![],
            seeds: vec![17],
            round_cap: 30,
            precision: Precision::F32,
            output: PathBuf::from("results.csv"),
        }
    }

    /// Display name of the graph for CSV rows.
    pub fn graph_label(&self) -> String {
        if let Some(name) = &self.graph_name {
            return name.clone();
        }
        self.graph_content
            .as_ref()
            .and_then(|p| p.file_stem())
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "graph".into())
    }

    /// Canonical text form; `parse` of the result yields an equal config.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let mut push = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        push("experiment", self.experiment.name().into());
        if let Some(p) = &self.mnist_dir {
            push("mnist_dir", p.display().to_string());
        }
        if let Some(p) = &self.graph_content {
            push("graph_content", p.display().to_string());
        }
        if let Some(p) = &self.graph_cites {
            push("graph_cites", p.display().to_string());
        }
        if let Some(n) = &self.graph_name {
            push("graph_name", n.clone());
        }
        if let Some(p) = &self.checkpoint {
            push("checkpoint", p.display().to_string());
        }
        push("servers", join(&self.servers));
        push("targets", join(&self.targets));
        push("fractions", join(&self.fractions));
        if !self.budgets.is_empty() {
            push("budgets", join(&self.budgets));
        }
        push("seeds", join(&self.seeds));
        push("round_cap", self.round_cap.to_string());
        push("precision", self.precision.name().into());
        push("output", self.output.display().to_string());
        out
    }

    /// Fails fast when a required input is missing or absent on disk.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let file_err = |message: String| ConfigError::File {
            path: self.output.display().to_string(),
            message,
        };
        let need_file = |key: &str, p: &Option<PathBuf>| -> Result<(), ConfigError> {
            match p {
                None => Err(file_err(format!(
                    "experiment {} requires {key}",
                    self.experiment
                ))),
                Some(p) if !p.exists() => Err(file_err(format!(
                    "{key} path {} does not exist",
                    p.display()
                ))),
                _ => Ok(()),
            }
        };
        match self.experiment {
            ExperimentKind::FedMnist => {
                need_file("mnist_dir", &self.mnist_dir)?;
                if self.servers.is_empty() || self.targets.is_empty() {
                    return Err(file_err("servers and targets must be non-empty".into()));
                }
                for &t in &self.targets {
                    if !(t > 0.0 && t < 1.0) {
                        return Err(file_err(format!("target accuracy {t} outside (0, 1)")));
                    }
                }
            }
            ExperimentKind::KgCompress => {
                need_file("graph_content", &self.graph_content)?;
                need_file("graph_cites", &self.graph_cites)?;
                if self.fractions.is_empty() {
                    return Err(file_err("fractions must be non-empty".into()));
                }
            }
            ExperimentKind::Distortion => {
                need_file("graph_content", &self.graph_content)?;
                need_file("graph_cites", &self.graph_cites)?;
            }
            ExperimentKind::GradCheck => {}
            ExperimentKind::SemanticDigit => {
                need_file("mnist_dir", &self.mnist_dir)?;
                if let Some(c) = &self.checkpoint {
                    if !c.exists() {
                        return Err(file_err(format!(
                            "checkpoint path {} does not exist",
                            c.display()
                        )));
                    }
                }
            }
        }
        if self.seeds.is_empty() {
            return Err(file_err("seeds must be non-empty".into()));
        }
        Ok(())
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_list<T: std::str::FromStr>(
    raw: &str,
    path: &str,
    line: usize,
    what: &str,
) -> Result<Vec<T>, ConfigError> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>().map_err(|_| ConfigError::Line {
                path: path.into(),
                line,
                message: format!("bad {what} value {s:?}"),
            })
        })
        .collect()
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<ExperimentConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text, &path.display().to_string())
}

pub fn parse_config_str(text: &str, path: &str) -> Result<ExperimentConfig, ConfigError> {
    let line_err = |line: usize, message: String| ConfigError::Line {
        path: path.into(),
        line,
        message,
    };

    let mut experiment: Option<(ExperimentKind, usize)> = None;
    let mut pairs: Vec<(usize, String, String)> = Vec::new();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| line_err(lineno, format!("expected `key = value`, got {line:?}")))?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if !seen.insert(key.clone()) {
            return Err(line_err(lineno, format!("duplicate key {key}")));
        }
        if key == "experiment" {
            let kind = ExperimentKind::parse(&value)
                .ok_or_else(|| line_err(lineno, format!("unknown experiment kind {value:?}")))?;
            experiment = Some((kind, lineno));
        } else {
            pairs.push((lineno, key, value));
        }
    }

    let (kind, _) = experiment.ok_or_else(|| ConfigError::File {
        path: path.into(),
        message: "missing required key `experiment`".into(),
    })?;
    let mut cfg = ExperimentConfig::new(kind);

    for (lineno, key, value) in pairs {
        match key.as_str() {
            "mnist_dir" => cfg.mnist_dir = Some(PathBuf::from(&value)),
            "graph_content" => cfg.graph_content = Some(PathBuf::from(&value)),
            "graph_cites" => cfg.graph_cites = Some(PathBuf::from(&value)),
            "graph_name" => cfg.graph_name = Some(value),
            "checkpoint" => cfg.checkpoint = Some(PathBuf::from(&value)),
            "servers" => cfg.servers = parse_list(&value, path, lineno, "server count")?,
            "targets" => cfg.targets = parse_list(&value, path, lineno, "target accuracy")?,
            "fractions" => cfg.fractions = parse_list(&value, path, lineno, "fraction")?,
            "budgets" => cfg.budgets = parse_list(&value, path, lineno, "bit budget")?,
            "seeds" => cfg.seeds = parse_list(&value, path, lineno, "seed")?,
            "round_cap" => {
                cfg.round_cap = value
                    .parse()
                    .map_err(|_| line_err(lineno, format!("bad round_cap {value:?}")))?
            }
            "precision" => {
                cfg.precision = match value.as_str() {
                    "f32" => Precision::F32,
                    "f64" => Precision::F64,
                    other => {
                        return Err(line_err(
                            lineno,
                            format!("precision must be f32 or f64, got {other:?}"),
                        ))
                    }
                }
            }
            "output" => cfg.output = PathBuf::from(&value),
            other => return Err(line_err(lineno, format!("unknown key {other:?}"))),
        }
    }
    Ok(cfg)
}

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] pathmeas::Error),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        use pathmeas::Error as E;
        match self {
            CliError::Read { .. } => "read",
            CliError::Usage(_) => "usage",
            CliError::Core(e) => match e {
                E::Io(pathmeas::IoError::Json(_)) => "json",
                E::Io(_) => "input",
                E::Sparse(_) => "sparse",
                E::Diagram(_) => "diagram",
                E::Path(_) => "path",
                E::Spectral(_) => "spectral",
                E::Measure(_) => "measure",
                E::Sfs(_) => "sfs",
                E::Kernel(_) => "kernel",
            },
        }
    }

    pub fn to_json(&self) -> Value {
        json!({ "error": { "kind": self.kind(), "message": self.to_string() } })
    }
}

/// Lifts any core error into [`CliError`].
pub trait OrCore<T> {
    fn core(self) -> Result<T, CliError>;
}

impl<T, E: Into<pathmeas::Error>> OrCore<T> for Result<T, E> {
    fn core(self) -> Result<T, CliError> {
        self.map_err(|e| CliError::Core(e.into()))
    }
}

pub fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })
}

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub enum Body {
    Json(Value),
    Csv(String),
}

/// What a command prints, and whether the check it ran passed.
pub struct Outcome {
    pub body: Body,
    pub pass: bool,
}

impl Outcome {
    pub fn json(value: impl Serialize) -> Result<Outcome, CliError> {
        Ok(Outcome {
            body: Body::Json(to_value(value)?),
            pass: true,
        })
    }

    pub fn csv(header: &str, rows: impl IntoIterator<Item = (usize, f64)>) -> Outcome {
        let mut out = format!("{header}\n");
        for (i, x) in rows {
            // `{:e}` round-trips f64 exactly and never depends on locale.
            writeln!(out, "{i},{x:e}").expect("writing to a String cannot fail");
        }
        Outcome {
            body: Body::Csv(out),
            pass: true,
        }
    }

    pub fn with_pass(mut self, pass: bool) -> Outcome {
        self.pass = pass;
        self
    }

    pub fn render(&self) -> String {
        match &self.body {
            Body::Json(v) => {
                let mut s = serde_json::to_string_pretty(v).expect("a Value always serializes");
                s.push('\n');
                s
            }
            Body::Csv(s) => s.clone(),
        }
    }
}

pub fn to_value(value: impl Serialize) -> Result<Value, CliError> {
    serde_json::to_value(value).map_err(|e| usage(format!("cannot serialize report: {e}")))
}

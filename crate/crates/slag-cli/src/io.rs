//! Input parsing, report assembly and output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;
use slag_core::SlagError;

#[derive(Debug)]
pub enum CliError {
    /// Bad file, schema violation or inconsistent arguments: exit 2.
    Input(String),
    /// A computation refused its input on mathematical grounds: exit 1.
    Math(SlagError),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Math(e) => write!(f, "{e}"),
        }
    }
}

impl From<SlagError> for CliError {
    fn from(e: SlagError) -> Self {
        match e {
            SlagError::Invalid(_)
            | SlagError::Dimension(_)
            | SlagError::SizeMismatch(_, _)
            | SlagError::Expr(_)
            | SlagError::OracleLimit(_)
            | SlagError::ExpansionTooLarge(_) => CliError::Input(e.to_string()),
            other => CliError::Math(other),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Parse a JSON file, reporting the JSON path of the first schema violation.
pub fn load<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let at = e.path().to_string();
        CliError::Input(format!("{}: at `{at}`: {}", path.display(), e.inner()))
    })
}

pub fn load_opt<T: DeserializeOwned>(path: &Option<PathBuf>) -> CliResult<Option<T>> {
    path.as_deref().map(load).transpose()
}

/// Plot-ready rows with a one-line header.
#[derive(Debug, Default)]
pub struct Series {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Series {
    pub fn new(header: &[&str]) -> Self {
        Series {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

pub fn cell(x: impl ToString) -> String {
    x.to_string()
}

pub fn opt_cell(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub struct Outcome {
    pub passed: bool,
    pub report: Value,
    pub series: Option<Series>,
}

impl Outcome {
    pub fn new(passed: bool, report: impl Serialize) -> Self {
        Outcome {
            passed,
            report: serde_json::to_value(report).expect("reports serialize"),
            series: None,
        }
    }

    pub fn with_series(mut self, s: Series) -> Self {
        self.series = Some(s);
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

fn scalar_rows(v: &Value) -> Series {
    let mut s = Series::new(&["key", "value"]);
    if let Value::Object(map) = v {
        for (k, x) in map {
            match x {
                Value::Number(_) | Value::Bool(_) | Value::String(_) => {
                    s.push(vec![k.clone(), x.to_string().trim_matches('"').to_string()])
                }
                _ => {}
            }
        }
    }
    s
}

pub fn render(command: &str, outcome: &Outcome, format: Format) -> CliResult<Vec<u8>> {
    match format {
        Format::Json => {
            let doc = serde_json::json!({
                "command": command,
                "passed": outcome.passed,
                "report": outcome.report,
            });
            let mut out = serde_json::to_vec_pretty(&doc).expect("json");
            out.push(b'\n');
            Ok(out)
        }
        Format::Csv => {
            let fallback;
            let series = match &outcome.series {
                Some(s) => s,
                None => {
                    fallback = scalar_rows(&outcome.report);
                    &fallback
                }
            };
            let mut w = csv::Writer::from_writer(Vec::new());
            let err = |e: csv::Error| CliError::Input(e.to_string());
            w.write_record(&series.header).map_err(err)?;
            for r in &series.rows {
                w.write_record(r).map_err(err)?;
            }
            w.into_inner().map_err(|e| CliError::Input(e.to_string()))
        }
    }
}

pub fn emit(bytes: &[u8], out: &Option<PathBuf>) -> CliResult<()> {
    match out {
        Some(p) => {
            fs::write(p, bytes).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))
        }
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| CliError::Input(e.to_string())),
    }
}

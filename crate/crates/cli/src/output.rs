use crate::config::ExperimentConfig;
use crate::CliError;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

/// CSV table kept as strings so fields are written exactly.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv of utf-8 fields"))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct InstanceStatus {
    pub index: usize,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl InstanceStatus {
    pub fn ok(index: usize) -> Self {
        InstanceStatus { index, status: "ok".into(), detail: None }
    }

    pub fn from_error(index: usize, e: &iet_core::Error) -> Self {
        use iet_core::Error::*;
        let status = match e {
            PrecisionExhausted(_) | TieUndecidable { .. } => "precision_exhausted",
            _ if e.is_resource() => "resource_guard",
            _ => "domain_error",
        };
        InstanceStatus { index, status: status.into(), detail: Some(e.to_string()) }
    }
}

/// Result of one command before it is written.
#[derive(Debug, Clone)]
pub struct Output {
    pub json: serde_json::Value,
    pub table: Option<Table>,
    pub instances: Vec<InstanceStatus>,
}

impl Output {
    pub fn single(json: serde_json::Value, table: Option<Table>) -> Self {
        Output { json, table, instances: vec![InstanceStatus::ok(0)] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: ExperimentConfig,
    pub tool_version: String,
    pub instances: Vec<InstanceStatus>,
    pub wall_time_secs: f64,
    /// SHA-256 of each primary output file.
    pub outputs: BTreeMap<String, String>,
}

pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes through a temporary file in the target directory and renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.persist(path).map_err(|e| CliError::Io(e.error))?;
    Ok(())
}

pub fn render(out: &Output, csv: bool) -> Result<(String, &'static str), CliError> {
    if csv {
        let t = out.table.as_ref().ok_or_else(|| CliError::Config("this command has no CSV form".into()))?;
        Ok((t.to_csv()?, "csv"))
    } else {
        Ok((serde_json::to_string_pretty(&out.json)? + "\n", "json"))
    }
}

/// Emits the primary output to stdout, or to `<out>/<command>.<ext>` with a
/// manifest beside it.
pub fn emit(command: &str, cfg: &ExperimentConfig, out: &Output, secs: f64) -> Result<(), CliError> {
    let (text, ext) = render(out, cfg.format_csv())?;
    for st in out.instances.iter().filter(|s| s.status != "ok") {
        eprintln!("instance {}: {} ({})", st.index, st.status, st.detail.as_deref().unwrap_or(""));
    }
    let Some(dir) = &cfg.out else {
        print!("{text}");
        return Ok(());
    };
    let name = format!("{command}.{ext}");
    write_atomic(&dir.join(&name), text.as_bytes())?;
    let mut outputs = BTreeMap::new();
    outputs.insert(name, digest(text.as_bytes()));
    let manifest = RunManifest {
        command: command.to_string(),
        config: cfg.clone(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        instances: out.instances.clone(),
        wall_time_secs: secs,
        outputs,
    };
    write_atomic(&dir.join("manifest.json"), (serde_json::to_string_pretty(&manifest)? + "\n").as_bytes())
}

/// Per-instance record written as soon as the instance finishes.
pub fn write_instance(cfg: &ExperimentConfig, command: &str, index: usize, value: &serde_json::Value) -> Result<(), CliError> {
    if let Some(dir) = &cfg.out {
        let path = dir.join("instances").join(format!("{command}-{index:05}.json"));
        write_atomic(&path, serde_json::to_string(value)?.as_bytes())?;
    }
    Ok(())
}

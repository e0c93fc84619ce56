//! On-disk artifacts. Every file carries the fingerprint of the stage that
//! produced it and a checksum of its payload, so a stale or edited file is
//! detected before it is reused.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use kgrefine::report::{fingerprint, MetricsReport};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// JSON wrapper around a stage payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub stage: String,
    pub fingerprint: String,
    /// sha256 of the compact JSON encoding of `payload`.
    pub checksum: String,
    pub payload: serde_json::Value,
}

/// Checksum of a JSON value. `serde_json::Value` keeps object keys sorted,
/// so the encoding is canonical.
pub fn json_checksum(value: &serde_json::Value) -> String {
    fingerprint(value.to_string().as_bytes())
}

/// What a stored artifact looks like relative to an expected fingerprint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Status {
    Missing,
    Current,
    /// Written by a different configuration or upstream state.
    Stale { found: String },
    /// Payload does not match its checksum, or the file does not parse.
    Corrupt(String),
}

/// Write `bytes` to `path` through a temporary sibling and a rename, so a
/// reader never sees a half-written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let name = path
        .file_name()
        .ok_or_else(|| CliError::Usage(format!("{} is not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// An output directory of artifacts.
#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Store { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.root.join(file)
    }

    pub fn save_json<T: Serialize>(&self, file: &str, stage: &str, fp: &str, payload: &T) -> CliResult<()> {
        let payload = serde_json::to_value(payload)?;
        let env = Envelope {
            stage: stage.to_string(),
            fingerprint: fp.to_string(),
            checksum: json_checksum(&payload),
            payload,
        };
        let mut text = serde_json::to_string_pretty(&env)?;
        text.push('\n');
        write_atomic(&self.path(file), text.as_bytes())
    }

    fn read_envelope(&self, file: &str) -> Result<Option<Envelope>, String> {
        let path = self.path(file);
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path).map_err(|e| e.to_string())?;
        let env: Envelope = serde_json::from_str(&text).map_err(|e| e.to_string())?;
        if json_checksum(&env.payload) != env.checksum {
            return Err("checksum mismatch".into());
        }
        Ok(Some(env))
    }

    pub fn json_status(&self, file: &str, fp: &str) -> Status {
        match self.read_envelope(file) {
            Ok(None) => Status::Missing,
            Ok(Some(env)) if env.fingerprint == fp => Status::Current,
            Ok(Some(env)) => Status::Stale { found: env.fingerprint },
            Err(e) => Status::Corrupt(e),
        }
    }

    /// The payload of `file` if it exists and was produced by `fp`.
    pub fn load_json<T: DeserializeOwned>(&self, file: &str, fp: &str) -> CliResult<Option<T>> {
        match self.read_envelope(file) {
            Ok(Some(env)) if env.fingerprint == fp => Ok(Some(serde_json::from_value(env.payload)?)),
            _ => Ok(None),
        }
    }

    /// Text artifact with a `# stage= fingerprint= checksum=` first line;
    /// the checksum covers everything after it.
    pub fn save_text(&self, file: &str, stage: &str, fp: &str, body: &str) -> CliResult<()> {
        let text = format!(
            "# stage={stage} fingerprint={fp} checksum={}\n{body}",
            fingerprint(body.as_bytes())
        );
        write_atomic(&self.path(file), text.as_bytes())
    }

    fn read_text(&self, file: &str) -> Result<Option<(String, String)>, String> {
        let path = self.path(file);
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path).map_err(|e| e.to_string())?;
        let (header, body) = text.split_once('\n').ok_or("missing header line")?;
        let field = |key: &str| {
            header
                .strip_prefix('#')
                .into_iter()
                .flat_map(str::split_whitespace)
                .find_map(|f| f.strip_prefix(key)?.strip_prefix('='))
                .map(str::to_string)
        };
        let fp = field("fingerprint").ok_or("header has no fingerprint")?;
        let sum = field("checksum").ok_or("header has no checksum")?;
        if fingerprint(body.as_bytes()) != sum {
            return Err("checksum mismatch".into());
        }
        Ok(Some((fp, body.to_string())))
    }

    pub fn text_status(&self, file: &str, fp: &str) -> Status {
        match self.read_text(file) {
            Ok(None) => Status::Missing,
            Ok(Some((found, _))) if found == fp => Status::Current,
            Ok(Some((found, _))) => Status::Stale { found },
            Err(e) => Status::Corrupt(e),
        }
    }

    /// Body of `file` (header stripped) if it was produced by `fp`.
    pub fn load_text(&self, file: &str, fp: &str) -> Option<String> {
        match self.read_text(file) {
            Ok(Some((found, body))) if found == fp => Some(body),
            _ => None,
        }
    }

    /// `report.json` and `report.kv`, both carrying the report's fingerprint.
    pub fn save_report(&self, report: &MetricsReport) -> CliResult<()> {
        let mut json = report.to_json()?;
        json.push('\n');
        write_atomic(&self.path(REPORT_JSON), json.as_bytes())?;
        write_atomic(&self.path(REPORT_KV), report.to_kv().as_bytes())
    }

    pub fn report_status(&self, fp: &str) -> Status {
        match self.read_report() {
            Ok(None) => Status::Missing,
            Ok(Some(r)) if r.fingerprint == fp => Status::Current,
            Ok(Some(r)) => Status::Stale { found: r.fingerprint },
            Err(e) => Status::Corrupt(e),
        }
    }

    /// Both report files must exist and agree.
    fn read_report(&self) -> Result<Option<MetricsReport>, String> {
        let (jp, kp) = (self.path(REPORT_JSON), self.path(REPORT_KV));
        if !jp.exists() && !kp.exists() {
            return Ok(None);
        }
        let json = fs::read_to_string(jp).map_err(|e| e.to_string())?;
        let kv = fs::read_to_string(kp).map_err(|e| e.to_string())?;
        let a = MetricsReport::from_json(&json).map_err(|e| e.to_string())?;
        let b = MetricsReport::from_kv(&kv).map_err(|e| e.to_string())?;
        if a != b {
            return Err("report.json and report.kv disagree".into());
        }
        Ok(Some(a))
    }

    pub fn load_report(&self, fp: &str) -> Option<MetricsReport> {
        match self.read_report() {
            Ok(Some(r)) if r.fingerprint == fp => Some(r),
            _ => None,
        }
    }
}

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_KV: &str = "report.kv";

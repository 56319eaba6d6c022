//! Config files, run records and artifact output.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use vesselmatch::io::write_atomic;

pub const OUT_DIR_ENV: &str = "VESSELMATCH_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "out";
/// Version of the JSON/CSV report layouts written by the CLI.
pub const REPORT_FORMAT_VERSION: u32 = 1;

/// A failed run: usage problems exit with 1, bad data with 2.
pub enum Failure {
    Usage(anyhow::Error),
    Data(anyhow::Error),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
        }
    }

    pub fn usage(msg: impl fmt::Display) -> Self {
        Failure::Usage(anyhow!("{msg}"))
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (Failure::Usage(e) | Failure::Data(e)) = self;
        write!(f, "{e:#}")
    }
}

impl From<vesselmatch::Error> for Failure {
    fn from(e: vesselmatch::Error) -> Self {
        match e {
            vesselmatch::Error::InvalidArgument(_) => Failure::Usage(e.into()),
            _ => Failure::Data(e.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast::<vesselmatch::Error>() {
            Ok(core) => core.into(),
            Err(e) => Failure::Data(e),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, Failure>;

/// Resolves parameters: defaults, then the JSON config file, then every
/// flag that was given.
pub fn resolve<P: DeserializeOwned>(file: Option<&Path>, flags: &impl Serialize) -> CliResult<P> {
    let mut merged = match file {
        Some(path) => {
            let text = vesselmatch::io::read_text(path)?;
            match serde_json::from_str::<Value>(&text).with_context(|| format!("config {}", path.display()))? {
                Value::Object(m) => m,
                _ => {
                    return Err(Failure::Data(anyhow!(
                        "config {}: top level must be an object",
                        path.display()
                    )))
                }
            }
        }
        None => Map::new(),
    };
    if let Value::Object(over) = serde_json::to_value(flags).map_err(|e| Failure::Data(e.into()))? {
        for (k, v) in over {
            if !v.is_null() && v != Value::Array(vec![]) {
                merged.insert(k, v);
            }
        }
    }
    let origin = file.map_or("command line".to_string(), |p| format!("config {}", p.display()));
    serde_json::from_value(Value::Object(merged)).map_err(|e| Failure::Data(anyhow!("{origin}: {e}")))
}

pub fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Serialize)]
struct Hashed<'a, P> {
    command: &'a str,
    params: &'a P,
}

#[derive(Serialize)]
struct RunRecord<'a, P> {
    tool: &'static str,
    version: &'static str,
    invoked_as: &'a str,
    command: &'a str,
    run_config_hash: &'a str,
    params: &'a P,
}

/// Output directory of one run; every artifact carries the run config hash.
pub struct Output {
    dir: PathBuf,
    pub hash: String,
}

impl Output {
    /// Hashes `command` + `params`, creates the directory and writes
    /// `run_config.json`. `invoked_as` is recorded but not hashed.
    pub fn create<P: Serialize>(dir: PathBuf, invoked_as: &str, command: &str, params: &P) -> CliResult<Output> {
        let canonical = serde_json::to_vec(&Hashed { command, params }).map_err(|e| Failure::Data(e.into()))?;
        let hash = sha256_hex(&canonical);
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let out = Output { dir, hash };
        let record = RunRecord {
            tool: "vesselmatch",
            version: env!("CARGO_PKG_VERSION"),
            invoked_as,
            command,
            run_config_hash: &out.hash,
            params,
        };
        out.json("run_config.json", &record)?;
        Ok(out)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn bytes(&self, name: &str, bytes: &[u8]) -> CliResult<()> {
        let path = self.path(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        Ok(write_atomic(&path, bytes)?)
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::Data(e.into()))?;
        text.push('\n');
        self.bytes(name, text.as_bytes())
    }

    /// CSV body behind a `#` header line naming format version and hash.
    pub fn csv(&self, name: &str, body: &str) -> CliResult<()> {
        let text = format!("# {}\n{body}", self.stamp());
        self.bytes(name, text.as_bytes())
    }

    pub fn stamp(&self) -> String {
        format!("format_version={REPORT_FORMAT_VERSION} run_config_hash={}", self.hash)
    }
}

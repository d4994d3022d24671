use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// One record per invocation, written next to the primary output.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: &'static str,
    pub status: &'static str,
    pub exit_code: i32,
    pub parameters: Value,
    pub input_hashes: BTreeMap<String, String>,
    pub outputs: Vec<PathBuf>,
    pub wall_seconds: f64,
    pub diagnostics: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunManifest {
    pub fn new(subcommand: &str, parameters: Value) -> Self {
        RunManifest {
            subcommand: subcommand.to_string(),
            version: env!("CARGO_PKG_VERSION"),
            status: "ok",
            exit_code: 0,
            parameters,
            input_hashes: BTreeMap::new(),
            outputs: Vec::new(),
            wall_seconds: 0.0,
            diagnostics: Value::Null,
            error: None,
        }
    }

    pub fn hash_input(&mut self, name: &str, bytes: &[u8]) {
        self.input_hashes.insert(name.to_string(), sha256_hex(bytes));
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        std::fs::write(path, text + "\n")
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// `<out>.manifest.json` unless given explicitly.
pub fn manifest_path(out: &Path, explicit: Option<&Path>) -> PathBuf {
    explicit.map(Path::to_path_buf).unwrap_or_else(|| {
        let mut name = out.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        out.with_file_name(name)
    })
}

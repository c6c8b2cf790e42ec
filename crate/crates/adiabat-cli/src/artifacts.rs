use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{json, Map, Value};

use crate::config::RunConfig;
use crate::CliError;

/// Write through a temporary file in the same directory and rename it into
/// place, so readers see either the old file or the complete new one.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::Builder::new().prefix(".adiabat-").suffix(".tmp").tempfile_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CliError::Io(e.error))?;
    Ok(())
}

pub fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

pub const MANIFEST: &str = "manifest.json";

/// The run manifest of `dir`, started afresh when missing or written for a
/// different configuration.
pub fn open_manifest(dir: &Path, cfg: &RunConfig, scenario: Value) -> Result<Map<String, Value>, CliError> {
    let hash = cfg.hash();
    if let Ok(text) = fs::read_to_string(dir.join(MANIFEST)) {
        if let Ok(Value::Object(m)) = serde_json::from_str::<Value>(&text) {
            if m.get("config_hash").and_then(Value::as_str) == Some(hash.as_str()) {
                return Ok(m);
            }
        }
    }
    let mut m = Map::new();
    m.insert("tool".into(), json!(format!("adiabat {}", env!("CARGO_PKG_VERSION"))));
    m.insert("config_hash".into(), json!(hash));
    m.insert("config".into(), serde_json::to_value(cfg)?);
    m.insert("config_toml".into(), json!(cfg.to_toml()));
    m.insert("scenario".into(), scenario);
    m.insert("seeds".into(), json!(null));
    m.insert("sweeps".into(), json!({}));
    Ok(m)
}

pub fn save_manifest(dir: &Path, m: &Map<String, Value>) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(&Value::Object(m.clone()))?;
    write_atomic(&dir.join(MANIFEST), text.as_bytes())
}

pub fn load_manifest(dir: &Path) -> Result<Value, CliError> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::Config(format!("no manifest at {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

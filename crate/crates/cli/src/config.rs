//! Effective run configuration: defaults, then the JSON config file, then
//! command-line flags. Seeds fall back to `CROSSPERS_SEED`.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::CliError;

pub const SEED_ENV: &str = "CROSSPERS_SEED";

/// Overlays the keys of `file` onto `base`, recursing into objects.
fn overlay(base: &mut Value, file: Value) {
    match (base, file) {
        (Value::Object(b), Value::Object(f)) => {
            for (k, v) in f {
                match b.get_mut(&k) {
                    Some(slot) => overlay(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Loaded config and whether the file set a top-level `seed`.
pub fn load<T: Serialize + DeserializeOwned>(default: T, path: Option<&Path>) -> Result<(T, bool), CliError> {
    let Some(path) = path else { return Ok((default, false)) };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let file: Value =
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    if !file.is_object() {
        return Err(CliError::Usage(format!("{}: config must be a JSON object", path.display())));
    }
    let has_seed = file.get("seed").is_some();
    let mut merged = serde_json::to_value(default)?;
    overlay(&mut merged, file);
    let cfg = serde_json::from_value(merged).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    Ok((cfg, has_seed))
}

/// Flag, then config file, then the environment, then 0.
pub fn resolve_seed(flag: Option<u64>, file_seed: Option<u64>) -> Result<u64, CliError> {
    if let Some(s) = flag.or(file_seed) {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| CliError::Usage(format!("{SEED_ENV}={v:?} is not an integer"))),
        Err(_) => Ok(0),
    }
}

pub fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

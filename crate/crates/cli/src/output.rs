//! Artifact plumbing: one writer for every subcommand, so determinism is a
//! property of the artifact string alone.

use std::fs;
use std::path::Path;

/// Write the artifact to `out`, or print it when no path was given.
pub fn emit(out: Option<&Path>, artifact: &str) -> Result<(), String> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
            }
            fs::write(p, artifact).map_err(|e| format!("cannot write {}: {e}", p.display()))
        }
        None => {
            print!("{artifact}");
            Ok(())
        }
    }
}

/// A JSON Lines header record; every text-format artifact starts with one.
pub fn jsonl_header(subcommand: &str, seed: u64, extra: serde_json::Value) -> String {
    let mut obj = serde_json::json!({
        "record": "header",
        "schema_version": 1,
        "subcommand": subcommand,
        "seed": seed,
    });
    if let (Some(o), Some(e)) = (obj.as_object_mut(), extra.as_object()) {
        for (k, v) in e {
            o.insert(k.clone(), v.clone());
        }
    }
    obj.to_string()
}

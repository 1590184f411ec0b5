//! Persistence: FLD1 snapshots, flat `key = value` configs, experiment manifests and CSV tables.

pub mod config;
pub mod csv;
pub mod fld1;
pub mod manifest;

pub use config::{load_config, Config, ConfigSchema, KeySpec, Value, ValueKind};
pub use fld1::{decode_fld1, encode_fld1, read_fld1, write_fld1, FLD1_HEADER_LEN, FLD1_MAGIC};
pub use manifest::{sha256_hex, Artifact, EnsembleRecord, ExperimentManifest};

/// Splits `text` into `(line number, key, value)` triples, skipping blanks and `#` comments.
pub(crate) fn key_value_lines(text: &str) -> crate::Result<Vec<(usize, &str, &str)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| crate::Error::Format(format!("line {}: expected `key = value`", i + 1)))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(crate::Error::Format(format!("line {}: empty key", i + 1)));
        }
        out.push((i + 1, k, v.trim()));
    }
    Ok(out)
}

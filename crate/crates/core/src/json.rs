//! JSON helpers shared by the persisted model files.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::ser::{SerializeSeq, Serializer};
use serde::Serialize;
use serde_json::value::RawValue;

use crate::error::{Error, Result};

/// Formats a finite real with 17 significant digits, enough to round-trip
/// any f64 exactly.
pub fn format_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn raw_real(x: f64) -> Box<RawValue> {
    RawValue::from_string(format_real(x)).expect("scientific notation is valid JSON")
}

pub fn serialize_matrix<S: Serializer>(rows: &[Vec<f64>], serializer: S) -> std::result::Result<S::Ok, S::Error> {
    let mut seq = serializer.serialize_seq(Some(rows.len()))?;
    for row in rows {
        let raw: Vec<Box<RawValue>> = row.iter().map(|&x| raw_real(x)).collect();
        seq.serialize_element(&raw)?;
    }
    seq.end()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(format_real(0.5), "5.0000000000000000e-1");
        assert_eq!(format_real(0.1), "1.0000000000000001e-1");
        for &x in &[0.1, 1.0 / 3.0, 0.01 + 0.99 * 0.123456789, 4.999999999999999] {
            let back: f64 = format_real(x).parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits());
        }
    }
}

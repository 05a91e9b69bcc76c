//! Parsing of JSON arguments. An argument starting with `@` names a file.

use std::fs;

use anyhow::{bail, Context, Result};
use kahlerkit::cubics::BinaryCubic;
use kahlerkit::linalg::cvec_serde;
use kahlerkit::{c, CVec, ComplexMatrix, C64};
use serde::de::DeserializeOwned;

fn read_source(flag: &str, raw: &str) -> Result<(String, String)> {
    match raw.strip_prefix('@') {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("{flag}: cannot read {path}"))?;
            Ok((text, path.to_string()))
        }
        None => Ok((raw.to_string(), flag.to_string())),
    }
}

/// Deserializes `raw`; syntax and shape errors carry line and column.
pub fn parse<T: DeserializeOwned>(flag: &str, raw: &str) -> Result<T> {
    let (text, origin) = read_source(flag, raw)?;
    serde_json::from_str(&text).map_err(|e| {
        anyhow::anyhow!("malformed JSON in {origin} at line {} column {}: {e}", e.line(), e.column())
    })
}

pub fn vector(flag: &str, raw: &str) -> Result<CVec> {
    let pairs: Vec<[f64; 2]> = parse(flag, raw)?;
    if pairs.iter().flatten().any(|x| !x.is_finite()) {
        bail!("{flag}: entries must be finite");
    }
    Ok(cvec_serde::from_pairs(&pairs))
}

pub fn matrix(flag: &str, raw: &str) -> Result<ComplexMatrix> {
    parse(flag, raw)
}

pub fn cubic(flag: &str, raw: &str) -> Result<BinaryCubic> {
    parse(flag, raw)
}

/// `1.5` or `[re, im]`.
pub fn scalar(flag: &str, raw: &str) -> Result<C64> {
    if let Ok(x) = raw.trim().parse::<f64>() {
        if !x.is_finite() {
            bail!("{flag}: value must be finite");
        }
        return Ok(c(x, 0.0));
    }
    let [re, im]: [f64; 2] = parse(flag, raw)?;
    Ok(c(re, im))
}

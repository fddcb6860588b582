use std::path::Path;

use num_complex::Complex64;
use serde::Deserialize;
use serde_json::{json, Value};

use super::{ExactCoefficients, FormKind, ModformError, NewformData};
use crate::arith::{DirichletCharacter, RootOfUnity};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CharacterFile {
    modulus: i64,
    #[serde(default)]
    values_on_generators: Vec<(i64, i64, i64)>,
}

/// Optional exact coefficient block, written for the bundled forms.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExactFile {
    ring: String,
    values: Vec<(u64, String, String)>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NewformFile {
    #[serde(default)]
    format_version: Option<u32>,
    #[serde(default)]
    name: Option<String>,
    level: i64,
    weight: u32,
    kind: String,
    #[serde(default)]
    parity: Option<u8>,
    #[serde(default)]
    spectral_parameter: Option<f64>,
    character: CharacterFile,
    coefficients: Vec<(u64, f64, f64)>,
    #[serde(default)]
    exact: Option<ExactFile>,
}

fn parse_err(m: impl Into<String>) -> ModformError {
    ModformError::Parse(m.into())
}

/// Parses and validates a newform from its JSON text.
pub fn parse_newform(text: &str) -> Result<NewformData, ModformError> {
    let file: NewformFile = serde_json::from_str(text).map_err(|e| parse_err(e.to_string()))?;
    if let Some(v) = file.format_version {
        if v != super::FORMAT_VERSION {
            return Err(parse_err(format!(
                "format version {v} is not supported (expected {})",
                super::FORMAT_VERSION
            )));
        }
    }
    let gens: Vec<(i64, RootOfUnity)> = file
        .character
        .values_on_generators
        .iter()
        .map(|&(g, num, den)| {
            if den == 0 {
                Err(parse_err(format!("generator {g} has a zero denominator")))
            } else {
                Ok((g, RootOfUnity::new(num, den)))
            }
        })
        .collect::<Result<_, _>>()?;
    let character = DirichletCharacter::from_generators(file.character.modulus, &gens)
        .map_err(|e| ModformError::Invariant(format!("character: {e}")))?;
    let kind = match file.kind.as_str() {
        "holomorphic" => FormKind::Holomorphic,
        "maass" => FormKind::Maass {
            parity: file.parity.ok_or_else(|| parse_err("maass form without parity"))?,
            spectral_parameter: file
                .spectral_parameter
                .ok_or_else(|| parse_err("maass form without spectral_parameter"))?,
        },
        other => return Err(parse_err(format!("unknown kind {other:?}"))),
    };
    let n_max = file.coefficients.iter().map(|c| c.0).max().unwrap_or(0) as usize;
    let mut coefficients = vec![None; n_max + 1];
    for &(n, re, im) in &file.coefficients {
        if n == 0 {
            return Err(parse_err("coefficient index 0"));
        }
        if coefficients[n as usize].replace(Complex64::new(re, im)).is_some() {
            return Err(parse_err(format!("coefficient {n} given twice")));
        }
    }
    let coefficients: Vec<Complex64> = coefficients
        .into_iter()
        .enumerate()
        .map(|(n, c)| match (n, c) {
            (0, _) => Ok(Complex64::new(0.0, 0.0)),
            (_, Some(c)) => Ok(c),
            (n, None) => Err(parse_err(format!("coefficient {n} missing (indices must be 1..n_max)"))),
        })
        .collect::<Result<_, _>>()?;
    let name = file.name.unwrap_or_else(|| format!("N{}k{}", file.level, file.weight));
    let mut f = NewformData::new(name, file.level, file.weight, kind, character, coefficients)?;
    if let Some(ex) = file.exact {
        let mut values = vec![(0i128, 0i128); f.n_max() + 1];
        if ex.values.len() != f.n_max() {
            return Err(parse_err("exact block does not cover every coefficient"));
        }
        for (n, u, v) in ex.values {
            let int = |s: &str| s.parse::<i128>().map_err(|e| parse_err(format!("exact coefficient {n}: {e}")));
            let (u, v) = (int(&u)?, int(&v)?);
            let slot = values
                .get_mut(n as usize)
                .filter(|_| n > 0)
                .ok_or_else(|| parse_err(format!("exact index {n} out of range")))?;
            *slot = (u, v);
        }
        let exact = match ex.ring.as_str() {
            "Z" => {
                if values.iter().any(|&(_, v)| v != 0) {
                    return Err(parse_err("integer coefficients with nonzero second component"));
                }
                ExactCoefficients::Integer(values.into_iter().map(|(u, _)| u).collect())
            }
            "Z[omega]" => ExactCoefficients::Eisenstein(values),
            other => return Err(parse_err(format!("unknown ring {other:?}"))),
        };
        let floats = exact.to_complex();
        for n in 1..=f.n_max() {
            if (floats[n] - f.coefficients[n]).norm() > 1e-9 * (1.0 + floats[n].norm()) {
                return Err(ModformError::Invariant(format!(
                    "exact and floating coefficient {n} disagree"
                )));
            }
        }
        f.set_exact(exact)?;
    }
    Ok(f)
}

pub fn load_newform(path: &Path) -> Result<NewformData, ModformError> {
    let text = std::fs::read_to_string(path).map_err(|source| ModformError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_newform(&text)
}

/// The JSON document for `f` (with exact data when present).
pub fn to_json(f: &NewformData) -> Value {
    let gens: Vec<Value> = f
        .character()
        .generator_values()
        .into_iter()
        .map(|(g, v)| json!([g, v.num(), v.den()]))
        .collect();
    let coefficients: Vec<Value> = (1..=f.n_max())
        .map(|n| json!([n, f.coefficients[n].re, f.coefficients[n].im]))
        .collect();
    let mut doc = serde_json::Map::new();
    doc.insert("format_version".into(), json!(super::FORMAT_VERSION));
    doc.insert("name".into(), json!(f.name()));
    doc.insert("level".into(), json!(f.level()));
    doc.insert("weight".into(), json!(f.weight()));
    match f.kind() {
        FormKind::Holomorphic => {
            doc.insert("kind".into(), json!("holomorphic"));
        }
        FormKind::Maass { parity, spectral_parameter } => {
            doc.insert("kind".into(), json!("maass"));
            doc.insert("parity".into(), json!(parity));
            doc.insert("spectral_parameter".into(), json!(spectral_parameter));
        }
    }
    doc.insert(
        "character".into(),
        json!({"modulus": f.character().modulus(), "values_on_generators": gens}),
    );
    doc.insert("coefficients".into(), Value::Array(coefficients));
    if let Some(ex) = f.exact() {
        let (ring, values): (&str, Vec<Value>) = match ex {
            ExactCoefficients::Integer(v) => ("Z", (1..v.len()).map(|n| json!([n, v[n].to_string(), "0"])).collect()),
            ExactCoefficients::Eisenstein(v) => (
                "Z[omega]",
                (1..v.len()).map(|n| json!([n, v[n].0.to_string(), v[n].1.to_string()])).collect(),
            ),
        };
        doc.insert("exact".into(), json!({"ring": ring, "values": values}));
    }
    Value::Object(doc)
}

pub fn save_newform(f: &NewformData, path: &Path) -> Result<(), ModformError> {
    let io_err = |source| ModformError::Io {
        path: path.display().to_string(),
        source,
    };
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io_err)?;
    }
    // Write-then-rename so a crashed run never leaves a truncated cache file.
    let tmp = path.with_extension(format!("json.{}.tmp", std::process::id()));
    std::fs::write(&tmp, crate::json::to_string_compact(&to_json(f))).map_err(io_err)?;
    std::fs::rename(&tmp, path).map_err(io_err)
}

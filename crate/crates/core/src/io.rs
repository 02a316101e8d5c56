//! Input files and deterministic JSON output.
//!
//! Matrices are arrays of rows; each entry is either a real number or a
//! `[re, im]` pair. Output floats carry 17 significant digits and
//! non-finite values are written as the strings `"inf"`, `"-inf"`, `"nan"`.

use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::linalg::{c, CMatrix, C64};
use crate::model::{validate_model, QuantumModel, RawModel};
use crate::uncertainty::LinearUncertainty;

#[derive(Deserialize)]
#[serde(untagged)]
enum Entry {
    Real(f64),
    Pair([f64; 2]),
}

type MatrixSpec = Vec<Vec<Entry>>;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    n_a: usize,
    n_b: usize,
    #[serde(rename = "M")]
    m: MatrixSpec,
    #[serde(rename = "N_a")]
    n_a_coupling: MatrixSpec,
    #[serde(rename = "N_b")]
    n_b_coupling: MatrixSpec,
    #[serde(rename = "E_tilde")]
    e_tilde: MatrixSpec,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct UncertaintyFile {
    #[serde(rename = "A_u")]
    a_u: MatrixSpec,
    #[serde(rename = "B_u")]
    b_u: MatrixSpec,
    #[serde(rename = "C_u")]
    c_u: MatrixSpec,
    #[serde(rename = "NoiseCov")]
    noise_cov: MatrixSpec,
}

fn to_matrix(name: &str, spec: MatrixSpec) -> Result<CMatrix> {
    let rows = spec.len();
    let cols = spec.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Err(Error::Parse(format!("{name}: matrix is empty")));
    }
    let mut m = CMatrix::zeros(rows, cols);
    for (i, row) in spec.into_iter().enumerate() {
        if row.len() != cols {
            return Err(Error::Parse(format!(
                "{name}: row {i} has {} entries, expected {cols}",
                row.len()
            )));
        }
        for (j, e) in row.into_iter().enumerate() {
            m[(i, j)] = match e {
                Entry::Real(x) => c(x, 0.0),
                Entry::Pair([re, im]) => c(re, im),
            };
        }
    }
    Ok(m)
}

fn json_error(e: serde_json::Error) -> Error {
    Error::Parse(format!("{e}"))
}

pub fn parse_raw_model(text: &str) -> Result<RawModel> {
    let f: ModelFile = serde_json::from_str(text).map_err(json_error)?;
    Ok(RawModel {
        n_a: f.n_a,
        n_b: f.n_b,
        m: to_matrix("M", f.m)?,
        n_a_coupling: to_matrix("N_a", f.n_a_coupling)?,
        n_b_coupling: to_matrix("N_b", f.n_b_coupling)?,
        e_tilde: to_matrix("E_tilde", f.e_tilde)?,
    })
}

pub fn parse_model(text: &str) -> Result<QuantumModel> {
    validate_model(parse_raw_model(text)?)
}

pub fn parse_uncertainty(text: &str) -> Result<LinearUncertainty> {
    let f: UncertaintyFile = serde_json::from_str(text).map_err(json_error)?;
    LinearUncertainty::new(
        to_matrix("A_u", f.a_u)?,
        to_matrix("B_u", f.b_u)?,
        to_matrix("C_u", f.c_u)?,
        to_matrix("NoiseCov", f.noise_cov)?,
    )
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn with_path<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn load_model(path: &Path) -> Result<QuantumModel> {
    with_path(path, parse_model(&read(path)?))
}

pub fn load_uncertainty(path: &Path) -> Result<LinearUncertainty> {
    with_path(path, parse_uncertainty(&read(path)?))
}

/// Output document with ordered keys.
#[derive(Debug, Clone, PartialEq)]
pub enum Json {
    Null,
    Bool(bool),
    Int(i64),
    Num(f64),
    Str(String),
    Arr(Vec<Json>),
    Obj(Vec<(String, Json)>),
}

impl Json {
    pub fn obj<K: Into<String>>(fields: impl IntoIterator<Item = (K, Json)>) -> Json {
        Json::Obj(fields.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }

    pub fn complex(z: C64) -> Json {
        Json::Arr(vec![Json::Num(z.re), Json::Num(z.im)])
    }

    pub fn matrix(m: &CMatrix) -> Json {
        Json::Arr(
            (0..m.nrows())
                .map(|i| Json::Arr((0..m.ncols()).map(|j| Json::complex(m[(i, j)])).collect()))
                .collect(),
        )
    }

    pub fn opt_num(v: Option<f64>) -> Json {
        v.map_or(Json::Null, Json::Num)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        self.write(&mut out, 0);
        out.push('\n');
        out
    }

    fn write(&self, out: &mut String, indent: usize) {
        match self {
            Json::Null => out.push_str("null"),
            Json::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Json::Int(i) => write!(out, "{i}").unwrap(),
            Json::Num(x) => out.push_str(&format_float(*x)),
            Json::Str(s) => out.push_str(&serde_json::to_string(s).unwrap()),
            Json::Arr(items) => {
                let flat = items.iter().all(|v| !matches!(v, Json::Arr(_) | Json::Obj(_)))
                    || items.iter().all(|v| matches!(v, Json::Arr(x) if x.iter().all(|y| !matches!(y, Json::Arr(_) | Json::Obj(_)))));
                if items.is_empty() {
                    out.push_str("[]");
                } else if flat {
                    out.push('[');
                    for (k, v) in items.iter().enumerate() {
                        if k > 0 {
                            out.push_str(", ");
                        }
                        v.write(out, indent);
                    }
                    out.push(']');
                } else {
                    out.push_str("[\n");
                    for (k, v) in items.iter().enumerate() {
                        push_indent(out, indent + 1);
                        v.write(out, indent + 1);
                        out.push_str(if k + 1 < items.len() { ",\n" } else { "\n" });
                    }
                    push_indent(out, indent);
                    out.push(']');
                }
            }
            Json::Obj(fields) => {
                if fields.is_empty() {
                    out.push_str("{}");
                    return;
                }
                out.push_str("{\n");
                for (k, (key, v)) in fields.iter().enumerate() {
                    push_indent(out, indent + 1);
                    out.push_str(&serde_json::to_string(key).unwrap());
                    out.push_str(": ");
                    v.write(out, indent + 1);
                    out.push_str(if k + 1 < fields.len() { ",\n" } else { "\n" });
                }
                push_indent(out, indent);
                out.push('}');
            }
        }
    }
}

fn push_indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

/// 17 significant digits in scientific notation; non-finite values quoted.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "\"nan\"".into()
    } else if x.is_infinite() {
        if x > 0.0 { "\"inf\"" } else { "\"-inf\"" }.into()
    } else {
        format!("{:.16e}", x + 0.0)
    }
}

/// Model file contents for `model`, readable by [`parse_model`].
pub fn model_json(model: &QuantumModel) -> Json {
    Json::obj([
        ("n_a", Json::Int(model.n_a() as i64)),
        ("n_b", Json::Int(model.n_b() as i64)),
        ("M", Json::matrix(model.hamiltonian())),
        ("N_a", Json::matrix(model.plant_coupling().value())),
        ("N_b", Json::matrix(model.uncertainty_coupling().value())),
        ("E_tilde", Json::matrix(model.e_tilde())),
    ])
}

pub fn uncertainty_json(u: &LinearUncertainty) -> Json {
    Json::obj([
        ("A_u", Json::matrix(u.a_u())),
        ("B_u", Json::matrix(u.b_u())),
        ("C_u", Json::matrix(u.c_u())),
        ("NoiseCov", Json::matrix(u.noise_cov())),
    ])
}

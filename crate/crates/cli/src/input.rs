use std::path::Path;

use cph_core::{CMatrix, ToleranceConfig};
use num_complex::Complex64;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Kraus,
    Markov,
    MatrixList,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Kraus => "kraus",
            Kind::Markov => "markov",
            Kind::MatrixList => "matrix-list",
        }
    }
}

/// A parsed input file. `matrices` holds one entry for `markov`.
#[derive(Debug, Clone)]
pub struct InputDocument {
    pub kind: Kind,
    pub name: Option<String>,
    pub matrices: Vec<CMatrix>,
    pub tolerances: TolOverrides,
    pub digest: String,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct TolOverrides {
    pub herm_tol: Option<f64>,
    pub psd_tol: Option<f64>,
    pub eig_tol: Option<f64>,
    pub conv_tol: Option<f64>,
    pub max_iter: Option<usize>,
}

impl TolOverrides {
    /// Fields set in `self` win over those in `base`.
    pub fn over(self, base: TolOverrides) -> TolOverrides {
        TolOverrides {
            herm_tol: self.herm_tol.or(base.herm_tol),
            psd_tol: self.psd_tol.or(base.psd_tol),
            eig_tol: self.eig_tol.or(base.eig_tol),
            conv_tol: self.conv_tol.or(base.conv_tol),
            max_iter: self.max_iter.or(base.max_iter),
        }
    }

    pub fn resolve(self) -> Result<ToleranceConfig, CliError> {
        let d = ToleranceConfig::default();
        let tol = ToleranceConfig {
            herm_tol: self.herm_tol.unwrap_or(d.herm_tol),
            psd_tol: self.psd_tol.unwrap_or(d.psd_tol),
            eig_tol: self.eig_tol.unwrap_or(d.eig_tol),
            conv_tol: self.conv_tol.unwrap_or(d.conv_tol),
            max_iter: self.max_iter.unwrap_or(d.max_iter),
        };
        tol.validate().map_err(|e| CliError::Parse(e.to_string()))?;
        Ok(tol)
    }
}

pub fn read_input(path: &Path) -> Result<InputDocument, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    let digest = Sha256::digest(&bytes)
        .iter()
        .fold(String::from("sha256:"), |mut s, b| {
            s.push_str(&format!("{b:02x}"));
            s
        });
    let value: Value = serde_json::from_slice(&bytes).map_err(|e| CliError::Parse(format!("invalid JSON: {e}")))?;
    parse_document(&value, digest)
}

pub fn parse_document(value: &Value, digest: String) -> Result<InputDocument, CliError> {
    let obj = value.as_object().ok_or_else(|| parse_err("top level must be an object"))?;
    let kind = match obj.get("kind").and_then(Value::as_str) {
        Some("kraus") => Kind::Kraus,
        Some("markov") => Kind::Markov,
        Some("matrix-list") => Kind::MatrixList,
        Some(other) => return Err(parse_err(format!("unknown kind {other:?}"))),
        None => return Err(parse_err("missing string field \"kind\"")),
    };
    let payload = obj.get("payload").ok_or_else(|| parse_err("missing field \"payload\""))?;
    let matrices = match kind {
        Kind::Markov => vec![parse_real_matrix(payload, "payload")?],
        Kind::Kraus | Kind::MatrixList => {
            let items = payload.as_array().ok_or_else(|| parse_err("payload must be a list of matrices"))?;
            if items.is_empty() {
                return Err(parse_err("payload is empty"));
            }
            items
                .iter()
                .enumerate()
                .map(|(i, m)| parse_matrix(m, &format!("payload[{i}]")))
                .collect::<Result<Vec<_>, _>>()?
        }
    };
    check_shapes(kind, &matrices)?;

    let (mut name, mut tolerances) = (None, TolOverrides::default());
    if let Some(meta) = obj.get("metadata") {
        let meta = meta.as_object().ok_or_else(|| parse_err("metadata must be an object"))?;
        if let Some(n) = meta.get("name") {
            name = Some(n.as_str().ok_or_else(|| parse_err("metadata.name must be a string"))?.to_owned());
        }
        if let Some(t) = meta.get("tolerances") {
            tolerances = parse_tolerances(t)?;
        }
    }
    Ok(InputDocument {
        kind,
        name,
        matrices,
        tolerances,
        digest,
    })
}

fn parse_err(msg: impl Into<String>) -> CliError {
    CliError::Parse(msg.into())
}

fn parse_tolerances(value: &Value) -> Result<TolOverrides, CliError> {
    let obj = value.as_object().ok_or_else(|| parse_err("metadata.tolerances must be an object"))?;
    let mut out = TolOverrides::default();
    for (key, v) in obj {
        let positive = || {
            v.as_f64()
                .filter(|x| x.is_finite() && *x > 0.0)
                .ok_or_else(|| parse_err(format!("tolerance {key} must be a positive number")))
        };
        match key.as_str() {
            "herm_tol" => out.herm_tol = Some(positive()?),
            "psd_tol" => out.psd_tol = Some(positive()?),
            "eig_tol" => out.eig_tol = Some(positive()?),
            "conv_tol" => out.conv_tol = Some(positive()?),
            "max_iter" => {
                out.max_iter = Some(
                    v.as_u64()
                        .filter(|&x| x > 0)
                        .ok_or_else(|| parse_err("tolerance max_iter must be a positive integer"))?
                        as usize,
                )
            }
            other => return Err(parse_err(format!("unknown tolerance {other:?}"))),
        }
    }
    Ok(out)
}

fn parse_entry(v: &Value, at: &str) -> Result<Complex64, CliError> {
    let z = match v {
        Value::Number(n) => Complex64::new(n.as_f64().unwrap_or(f64::NAN), 0.0),
        Value::Array(pair) if pair.len() == 2 => match (pair[0].as_f64(), pair[1].as_f64()) {
            (Some(re), Some(im)) => Complex64::new(re, im),
            _ => return Err(parse_err(format!("{at}: [re, im] must hold two numbers"))),
        },
        _ => return Err(parse_err(format!("{at}: entry must be a number or [re, im]"))),
    };
    if !z.is_finite() {
        return Err(parse_err(format!("{at}: entry is not finite")));
    }
    Ok(z)
}

fn rows_of<'a>(v: &'a Value, at: &str) -> Result<&'a Vec<Value>, CliError> {
    let rows = v.as_array().ok_or_else(|| parse_err(format!("{at}: matrix must be a list of rows")))?;
    if rows.is_empty() {
        return Err(parse_err(format!("{at}: matrix has no rows")));
    }
    Ok(rows)
}

fn parse_matrix(v: &Value, at: &str) -> Result<CMatrix, CliError> {
    let rows = rows_of(v, at)?;
    let mut entries = Vec::new();
    let mut width = None;
    for (i, row) in rows.iter().enumerate() {
        let row = row.as_array().ok_or_else(|| parse_err(format!("{at}[{i}]: row must be a list")))?;
        if *width.get_or_insert(row.len()) != row.len() {
            return Err(parse_err(format!("{at}: ragged rows")));
        }
        for (j, e) in row.iter().enumerate() {
            entries.push(parse_entry(e, &format!("{at}[{i}][{j}]"))?);
        }
    }
    let cols = width.unwrap_or(0);
    if cols == 0 {
        return Err(parse_err(format!("{at}: matrix has no columns")));
    }
    Ok(CMatrix::from_row_slice(rows.len(), cols, &entries))
}

/// Markov payloads are real: a `[re, im]` entry with nonzero imaginary part
/// is rejected.
fn parse_real_matrix(v: &Value, at: &str) -> Result<CMatrix, CliError> {
    let m = parse_matrix(v, at)?;
    if let Some(z) = m.iter().find(|z| z.im != 0.0) {
        return Err(parse_err(format!("{at}: complex entry {z} in a markov matrix")));
    }
    Ok(m)
}

fn check_shapes(kind: Kind, matrices: &[CMatrix]) -> Result<(), CliError> {
    let (r, c) = matrices[0].shape();
    if kind != Kind::MatrixList && r != c {
        return Err(parse_err(format!("{} matrices must be square, got {r}x{c}", kind.as_str())));
    }
    if let Some((i, m)) = matrices.iter().enumerate().find(|(_, m)| m.shape() != (r, c)) {
        return Err(parse_err(format!(
            "payload[{i}] is {}x{}, expected {r}x{c}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn parse(v: Value) -> Result<InputDocument, CliError> {
        parse_document(&v, String::new())
    }

    #[test]
    fn entries_may_be_real_or_pairs() {
        let doc = parse(json!({"kind": "kraus", "payload": [[[1, [0.5, -2]], [0, 0]]]})).unwrap();
        assert_eq!(doc.matrices[0][(0, 1)], Complex64::new(0.5, -2.0));
        assert_eq!(doc.matrices[0][(0, 0)], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn malformed_documents_are_parse_errors() {
        for bad in [
            json!([]),
            json!({"kind": "kraus"}),
            json!({"kind": "tensor", "payload": []}),
            json!({"kind": "kraus", "payload": [[[1, 0]]]}),
            json!({"kind": "kraus", "payload": [[[1, 0], [0]]]}),
            json!({"kind": "kraus", "payload": [[[1]], [[1, 0], [0, 1]]]}),
            json!({"kind": "kraus", "payload": [[["a"]]]}),
            json!({"kind": "markov", "payload": [[[0.5, 0.5]]]}),
            json!({"kind": "kraus", "payload": [[[1]]], "metadata": {"tolerances": {"eig_tol": 0}}}),
        ] {
            assert!(matches!(parse(bad.clone()), Err(CliError::Parse(_))), "{bad}");
        }
    }

    #[test]
    fn markov_accepts_zero_imaginary_parts() {
        let doc = parse(json!({"kind": "markov", "payload": [[[1, 0]]]})).unwrap();
        assert_eq!(doc.matrices[0][(0, 0)].re, 1.0);
    }

    #[test]
    fn later_overrides_win() {
        let file = TolOverrides {
            eig_tol: Some(1e-6),
            conv_tol: Some(1e-9),
            ..Default::default()
        };
        let flags = TolOverrides {
            eig_tol: Some(1e-7),
            ..Default::default()
        };
        let tol = flags.over(file).resolve().unwrap();
        assert_eq!((tol.eig_tol, tol.conv_tol), (1e-7, 1e-9));
        assert_eq!(tol.herm_tol, ToleranceConfig::default().herm_tol);
    }
}

use cph_core::{CMatrix, Projection, ToleranceConfig};
use nalgebra::{DMatrix, DVector};
use serde_json::{json, Map, Value};

use crate::input::InputDocument;

pub const SCHEMA_VERSION: &str = "1";

/// Row-major nested arrays of `[re, im]` pairs.
pub fn matrix(m: &CMatrix) -> Value {
    Value::Array(
        m.row_iter()
            .map(|row| row.iter().map(|z| json!([z.re, z.im])).collect())
            .collect(),
    )
}

pub fn real_matrix(m: &DMatrix<f64>) -> Value {
    Value::Array(m.row_iter().map(|row| row.iter().copied().collect()).collect())
}

pub fn real_vector(v: &DVector<f64>) -> Value {
    v.iter().copied().collect()
}

pub fn matrices(ms: &[CMatrix]) -> Value {
    ms.iter().map(matrix).collect()
}

pub fn projection(p: &Projection) -> Value {
    json!({"rank": p.rank(), "matrix": matrix(p.matrix())})
}

pub fn tolerances(tol: &ToleranceConfig) -> Value {
    json!({
        "herm_tol": tol.herm_tol,
        "psd_tol": tol.psd_tol,
        "eig_tol": tol.eig_tol,
        "conv_tol": tol.conv_tol,
        "max_iter": tol.max_iter,
    })
}

/// Envelope shared by every command. Keys serialize in sorted order, so
/// the output is a function of the input bytes and flags alone.
pub fn document(
    command: &str,
    input: &InputDocument,
    tol: &ToleranceConfig,
    seed: u64,
    verdicts: Value,
    certificates: Value,
    diagnostics: Value,
) -> Value {
    let first = &input.matrices[0];
    let mut doc = Map::new();
    doc.insert("schema_version".into(), SCHEMA_VERSION.into());
    doc.insert("command".into(), command.into());
    doc.insert(
        "input".into(),
        json!({
            "digest": input.digest,
            "kind": input.kind.as_str(),
            "name": input.name,
            "dim": first.nrows(),
            "matrices": input.matrices.len(),
        }),
    );
    doc.insert("seed".into(), seed.into());
    doc.insert("tolerances".into(), tolerances(tol));
    doc.insert("verdicts".into(), verdicts);
    doc.insert("certificates".into(), certificates);
    doc.insert("diagnostics".into(), diagnostics);
    Value::Object(doc)
}

pub fn render(doc: &Value) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("reports hold only JSON values");
    s.push('\n');
    s
}

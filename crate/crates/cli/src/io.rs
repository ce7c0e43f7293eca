//! JSON encodings: complex numbers as `[re, im]`, matrices as row-major
//! nested arrays, rays as multiples of π.

use std::path::Path;

use serde_json::{json, Value};
use stokes_core::liealg::{GradedElement, GradedSystem, Kind};
use stokes_core::{CMat, C64};

#[derive(Debug)]
pub struct SchemaError(pub String);

type Res<T> = std::result::Result<T, SchemaError>;

fn err<T>(msg: impl Into<String>) -> Res<T> {
    Err(SchemaError(msg.into()))
}

/// Inline JSON if the argument looks like JSON, else a file path.
pub fn load(arg: &str) -> Res<Value> {
    let text = match arg.trim_start().chars().next() {
        Some('{') | Some('[') => arg.to_string(),
        _ => std::fs::read_to_string(Path::new(arg)).map_err(|e| SchemaError(format!("{arg}: {e}")))?,
    };
    serde_json::from_str(&text).map_err(|e| SchemaError(format!("invalid JSON: {e}")))
}

pub fn complex(v: &Value) -> Res<C64> {
    match v {
        Value::Array(a) if a.len() == 2 => match (a[0].as_f64(), a[1].as_f64()) {
            (Some(re), Some(im)) => Ok(C64::new(re, im)),
            _ => err(format!("expected [re, im], got {v}")),
        },
        Value::Number(n) => Ok(C64::new(n.as_f64().unwrap_or(f64::NAN), 0.0)),
        _ => err(format!("expected [re, im], got {v}")),
    }
}

pub fn complex_list(v: &Value) -> Res<Vec<C64>> {
    match v {
        Value::Array(a) => a.iter().map(complex).collect(),
        _ => err(format!("expected a list of [re, im], got {v}")),
    }
}

/// One tuple, or a batch of tuples (a list of lists of `[re, im]`).
pub fn tuples(v: &Value) -> Res<(Vec<Vec<C64>>, bool)> {
    let batch = matches!(v, Value::Array(a) if matches!(a.first(), Some(Value::Array(b)) if matches!(b.first(), Some(Value::Array(_)))));
    if batch {
        Ok((
            v.as_array()
                .expect("array")
                .iter()
                .map(complex_list)
                .collect::<Res<_>>()?,
            true,
        ))
    } else {
        Ok((vec![complex_list(v)?], false))
    }
}

pub fn matrix(v: &Value) -> Res<CMat> {
    let Value::Array(rows) = v else {
        return err("matrix must be a list of rows");
    };
    let rows: Vec<Vec<C64>> = rows.iter().map(complex_list).collect::<Res<_>>()?;
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return err("matrix must be square and nonempty");
    }
    Ok(CMat::from_fn(n, n, |i, j| rows[i][j]))
}

pub fn c_json(z: C64) -> Value {
    json!([z.re, z.im])
}

pub fn matrix_json(m: &CMat) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| c_json(m[(i, j)])).collect()))
            .collect(),
    )
}

/// `{"eigenvalues": [...], "multiplicities": [...]}`, `{"diagonal": [...]}`,
/// either with an optional `"borel": true`.
pub fn system(v: &Value) -> Res<GradedSystem> {
    let sys = if let Some(d) = v.get("diagonal") {
        GradedSystem::from_diagonal(&complex_list(d)?)
    } else if let Some(e) = v.get("eigenvalues") {
        let e = complex_list(e)?;
        let mult = match v.get("multiplicities") {
            Some(Value::Array(m)) => m
                .iter()
                .map(|x| {
                    x.as_u64()
                        .map(|k| k as usize)
                        .ok_or(SchemaError("multiplicities must be integers".into()))
                })
                .collect::<Res<Vec<_>>>()?,
            Some(_) => return err("multiplicities must be a list"),
            None => vec![1; e.len()],
        };
        GradedSystem::new(&e, &mult)
    } else {
        return err("system needs \"diagonal\" or \"eigenvalues\"");
    }
    .map_err(|e| SchemaError(e.to_string()))?;
    Ok(if v.get("borel").and_then(Value::as_bool) == Some(true) {
        sys.borel()
    } else {
        sys
    })
}

/// `{"matrix": [[...]]}` or a bare matrix; blocks off the root spaces are dropped.
pub fn element(v: &Value, sys: &GradedSystem, kind: Kind) -> Res<GradedElement> {
    let m = matrix(v.get("matrix").unwrap_or(v))?;
    if m.nrows() != sys.dim() {
        return err(format!(
            "element is {}×{}, system has dimension {}",
            m.nrows(),
            m.nrows(),
            sys.dim()
        ));
    }
    let mut e = GradedElement::zero(sys, kind);
    for &a in sys.roots() {
        let part = sys.block_part(&m, a);
        if part.iter().any(|v| v.norm() > 0.0) {
            e.insert(a, part);
        }
    }
    Ok(e)
}

pub fn element_json(e: &GradedElement) -> Value {
    let support: Vec<Value> = e.support().iter().map(|&(i, j)| json!([i, j])).collect();
    json!({
        "kind": format!("{:?}", e.kind),
        "matrix": matrix_json(&e.to_matrix()),
        "support": support,
    })
}

/// A list of eigenvalue tuples.
pub fn z_path(v: &Value) -> Res<Vec<Vec<C64>>> {
    match v {
        Value::Array(a) if !a.is_empty() => a.iter().map(complex_list).collect(),
        _ => err("path must be a nonempty list of eigenvalue tuples"),
    }
}

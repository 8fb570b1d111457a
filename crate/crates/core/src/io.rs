//! JSON inputs and manifests, CSV outputs.
//!
//! Matrices are nested arrays of `[re, im]` pairs, row-major. Every JSON
//! document carries `schema_version`; documents written by another version
//! are rejected with [`Error::Migration`].

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::algebra::{close_algebra, FiniteAlgebra};
use crate::continuity::{ContinuityReport, RefinementRow};
use crate::error::{Error, Result};
use crate::matrix::{c, CMatrix, HermMatrix};
use crate::qtorus::FuzzyTorusSpec;
use crate::triple::FiniteSpectralTriple;

pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable that overrides the output directory.
pub const OUT_ENV: &str = "SPECPROP_OUT";

/// `$SPECPROP_OUT` when set, otherwise `default`.
pub fn output_dir(default: &Path) -> PathBuf {
    match std::env::var_os(OUT_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => default.to_path_buf(),
    }
}

fn parse_err(pointer: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Parse {
        pointer: pointer.into(),
        message: message.into(),
    }
}

pub fn matrix_to_json(m: &CMatrix) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| json!([m[(i, j)].re, m[(i, j)].im])).collect()))
            .collect(),
    )
}

/// Reads a square or rectangular matrix; entries may be `[re, im]` or a
/// bare real number.
pub fn matrix_from_json(v: &Value, pointer: &str) -> Result<CMatrix> {
    let rows = v.as_array().ok_or_else(|| parse_err(pointer, "expected an array of rows"))?;
    if rows.is_empty() {
        return Err(parse_err(pointer, "matrix has no rows"));
    }
    let mut ncols = None;
    let mut data = vec![];
    for (i, row) in rows.iter().enumerate() {
        let p = format!("{pointer}/{i}");
        let row = row.as_array().ok_or_else(|| parse_err(&p, "expected a row array"))?;
        match ncols {
            None => ncols = Some(row.len()),
            Some(n) if n != row.len() => {
                return Err(parse_err(&p, format!("row has {} entries, expected {n}", row.len())));
            }
            _ => {}
        }
        for (j, e) in row.iter().enumerate() {
            let q = format!("{p}/{j}");
            let z = match e {
                Value::Number(x) => c(x.as_f64().unwrap_or(f64::NAN), 0.0),
                Value::Array(pair) if pair.len() == 2 => {
                    let re = pair[0].as_f64().ok_or_else(|| parse_err(format!("{q}/0"), "expected a number"))?;
                    let im = pair[1].as_f64().ok_or_else(|| parse_err(format!("{q}/1"), "expected a number"))?;
                    c(re, im)
                }
                _ => return Err(parse_err(&q, "expected [re, im] or a number")),
            };
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(parse_err(&q, "entry is not finite"));
            }
            data.push(z);
        }
    }
    let n = ncols.unwrap_or(0);
    if n == 0 {
        return Err(parse_err(pointer, "matrix has no columns"));
    }
    Ok(CMatrix::from_row_slice(rows.len(), n, &data))
}

/// Fails with [`Error::Migration`] unless `schema_version` matches.
pub fn check_version(doc: &Value) -> Result<()> {
    let v = doc
        .get("schema_version")
        .ok_or_else(|| parse_err("/schema_version", "missing"))?
        .as_u64()
        .ok_or_else(|| parse_err("/schema_version", "expected a non-negative integer"))?;
    if v != SCHEMA_VERSION as u64 {
        return Err(Error::Migration {
            found: v as u32,
            expected: SCHEMA_VERSION,
        });
    }
    Ok(())
}

fn kind_of<'a>(doc: &'a Value, want: &str) -> Result<&'a Value> {
    match doc.get("kind").and_then(Value::as_str) {
        Some(k) if k == want => Ok(doc),
        Some(k) => Err(parse_err("/kind", format!("expected \"{want}\", found \"{k}\""))),
        None => Err(parse_err("/kind", "missing")),
    }
}

/// A triple with its optional name.
#[derive(Clone, Debug, PartialEq)]
pub struct TripleFile {
    pub name: Option<String>,
    pub triple: FiniteSpectralTriple,
}

/// The algebra is written as its orthonormal Hermitian basis, so loading
/// a saved file gives back the same matrices.
pub fn triple_to_json(t: &FiniteSpectralTriple, name: Option<&str>) -> Value {
    let mut doc = json!({
        "schema_version": SCHEMA_VERSION,
        "kind": "triple",
        "hilbert_dim": t.hilbert_dim(),
        "algebra": { "basis": t.alg.basis().iter().map(matrix_to_json).collect::<Vec<_>>() },
        "dirac": matrix_to_json(t.dirac.as_matrix()),
    });
    if let Some(n) = name {
        doc["name"] = json!(n);
    }
    doc
}

/// Accepts `algebra` as one of `{"diagonal": n}`, `{"full": n}`,
/// `{"generators": [...]}` (closed under products) or `{"basis": [...]}`
/// (orthonormal, Hermitian).
pub fn triple_from_json(doc: &Value) -> Result<TripleFile> {
    check_version(doc)?;
    kind_of(doc, "triple")?;
    let dirac = matrix_from_json(doc.get("dirac").ok_or_else(|| parse_err("/dirac", "missing"))?, "/dirac")?;
    if !dirac.is_square() {
        return Err(parse_err("/dirac", "Dirac operator must be square"));
    }
    let n = dirac.nrows();
    if let Some(h) = doc.get("hilbert_dim") {
        if h.as_u64() != Some(n as u64) {
            return Err(parse_err("/hilbert_dim", format!("does not match the Dirac operator size {n}")));
        }
    }
    let dirac = HermMatrix::new(dirac).map_err(|e| parse_err("/dirac", e.to_string()))?;
    let a = doc.get("algebra").ok_or_else(|| parse_err("/algebra", "missing"))?;
    let size = |key: &str| -> Result<usize> {
        let k = a[key]
            .as_u64()
            .ok_or_else(|| parse_err(format!("/algebra/{key}"), "expected a positive integer"))? as usize;
        if k != n {
            return Err(parse_err(format!("/algebra/{key}"), format!("size {k} does not match the Dirac operator size {n}")));
        }
        Ok(k)
    };
    let matrices = |key: &str| -> Result<Vec<CMatrix>> {
        let arr = a[key]
            .as_array()
            .ok_or_else(|| parse_err(format!("/algebra/{key}"), "expected an array of matrices"))?;
        arr.iter()
            .enumerate()
            .map(|(k, m)| {
                let p = format!("/algebra/{key}/{k}");
                let m = matrix_from_json(m, &p)?;
                if m.shape() != (n, n) {
                    return Err(parse_err(&p, format!("shape {:?}, expected {n}x{n}", m.shape())));
                }
                Ok(m)
            })
            .collect()
    };
    let alg = if a.get("diagonal").is_some() {
        FiniteAlgebra::diagonal(size("diagonal")?)
    } else if a.get("full").is_some() {
        FiniteAlgebra::full(size("full")?)
    } else if a.get("generators").is_some() {
        close_algebra(&matrices("generators")?, n)?
    } else if a.get("basis").is_some() {
        FiniteAlgebra::from_orthonormal_basis(matrices("basis")?, n).map_err(|e| match e {
            Error::Parse { pointer, message } => parse_err(format!("/algebra{pointer}"), message),
            e => e,
        })?
    } else {
        return Err(parse_err("/algebra", "expected one of diagonal, full, generators, basis"));
    };
    Ok(TripleFile {
        name: doc.get("name").and_then(Value::as_str).map(str::to_owned),
        triple: FiniteSpectralTriple::new(alg, dirac)?,
    })
}

fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| parse_err("", format!("{}: {e}", path.display())))
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn load_triple(path: &Path) -> Result<TripleFile> {
    triple_from_json(&read_json(path)?)
}

pub fn save_triple(path: &Path, t: &FiniteSpectralTriple, name: Option<&str>) -> Result<()> {
    write_json(path, &triple_to_json(t, name))
}

#[derive(Serialize, Deserialize)]
struct TorusDoc {
    schema_version: u32,
    kind: String,
    spec: FuzzyTorusSpec,
}

pub fn torus_spec_to_json(spec: &FuzzyTorusSpec) -> Value {
    serde_json::to_value(TorusDoc {
        schema_version: SCHEMA_VERSION,
        kind: "fuzzy_torus".into(),
        spec: spec.clone(),
    })
    .expect("plain data")
}

/// Coefficients are `[[z_1, ..., z_d], [re, im]]` pairs.
pub fn torus_spec_from_json(doc: &Value) -> Result<FuzzyTorusSpec> {
    check_version(doc)?;
    kind_of(doc, "fuzzy_torus")?;
    let spec: FuzzyTorusSpec = serde_json::from_value(doc.get("spec").cloned().ok_or_else(|| parse_err("/spec", "missing"))?)
        .map_err(|e| parse_err("/spec", e.to_string()))?;
    spec.validate()?;
    Ok(spec)
}

pub fn load_torus_spec(path: &Path) -> Result<FuzzyTorusSpec> {
    torus_spec_from_json(&read_json(path)?)
}

pub fn save_torus_spec(path: &Path, spec: &FuzzyTorusSpec) -> Result<()> {
    write_json(path, &torus_spec_to_json(spec))
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct InputHash {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Timing {
    pub name: String,
    pub seconds: f64,
}

/// Record of one run: enough to repeat it and to trace every CSV number
/// back to its computation.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ExperimentManifest {
    pub schema_version: u32,
    pub command: String,
    pub args: Vec<String>,
    pub options: Value,
    pub seeds: Vec<u64>,
    pub inputs: Vec<InputHash>,
    pub outputs: Vec<String>,
    pub diagnostics: Value,
    pub results: Value,
    pub timings: Vec<Timing>,
}

impl ExperimentManifest {
    pub fn new(command: &str, args: Vec<String>) -> Self {
        ExperimentManifest {
            schema_version: SCHEMA_VERSION,
            command: command.into(),
            args,
            options: Value::Null,
            seeds: vec![],
            inputs: vec![],
            outputs: vec![],
            diagnostics: Value::Null,
            results: Value::Null,
            timings: vec![],
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(InputHash {
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
        });
        Ok(())
    }

    pub fn time<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let start = std::time::Instant::now();
        let out = f();
        self.timings.push(Timing {
            name: name.into(),
            seconds: start.elapsed().as_secs_f64(),
        });
        out
    }
}

pub fn save_manifest(path: &Path, m: &ExperimentManifest) -> Result<()> {
    write_json(path, &serde_json::to_value(m)?)
}

pub fn load_manifest(path: &Path) -> Result<ExperimentManifest> {
    let doc = read_json(path)?;
    check_version(&doc)?;
    serde_json::from_value(doc).map_err(|e| parse_err("", e.to_string()))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

/// A CSV table with a fixed header.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: vec![],
        }
    }

    pub fn push(&mut self, row: Vec<String>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(Error::Dimension(format!("row has {} fields, header has {}", row.len(), self.header.len())));
        }
        self.rows.push(row);
        Ok(())
    }
}

/// Full-precision float formatting (round-trips through `parse`).
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn write_csv(path: &Path, table: &Table) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&table.header)?;
    for r in &table.rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Table> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.iter().map(str::to_owned).collect();
    let mut rows = vec![];
    for rec in r.records() {
        rows.push(rec?.iter().map(str::to_owned).collect());
    }
    Ok(Table { header, rows })
}

/// Header of `perturb_sweep.csv`. `bound` is `2 r |T| / (1 - 2 r |T|)`,
/// `construction_bound` the extent bound of the tunnel actually built.
pub const PERTURB_HEADER: &[&str] = &["step", "t_norm", "diameter", "bound", "construction_bound", "extent_estimate"];

/// Header of `magnitude.csv`.
pub const MAGNITUDE_HEADER: &[&str] = &["eps", "extent", "reach", "modular_reach", "magnitude", "n_times"];

/// Header of `refinement.csv`.
pub const REFINEMENT_HEADER: &[&str] = &["element", "m", "theta0", "h", "l_base", "l_step", "difference", "ratio"];

/// Header of `oracle_compare.csv`.
pub const ORACLE_HEADER: &[&str] = &["quantity", "i", "j", "solver", "oracle", "gap", "oracle_samples"];

/// Header of `torus_sweep.csv` for the given test element names: fixed
/// columns, then `L_full_<name>`, `L_window_<name>` and `S_<name>` per
/// element, then `seed` and `error`.
pub fn continuity_header(elements: &[String]) -> Vec<String> {
    let mut h: Vec<String> = [
        "theta_id",
        "t_id",
        "neighbor",
        "param_distance",
        "tunnel",
        "bridge_eps",
        "bound",
        "capped",
        "extent_estimate",
        "reach",
        "magnitude",
        "analytic_bound",
        "quotient_excess",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for prefix in ["L_full_", "L_window_", "S_"] {
        h.extend(elements.iter().map(|e| format!("{prefix}{e}")));
    }
    h.push("seed".into());
    h.push("error".into());
    h
}

pub fn continuity_table(rep: &ContinuityReport) -> Table {
    let header = continuity_header(&rep.elements);
    let k = rep.elements.len();
    let pad = |v: &[f64]| -> Vec<String> { (0..k).map(|i| v.get(i).map(|&x| num(x)).unwrap_or_default()).collect() };
    let rows = rep
        .rows
        .iter()
        .map(|r| {
            let mut row = vec![
                r.theta_id.to_string(),
                r.t_id.to_string(),
                r.neighbor.clone(),
                num(r.param_distance),
                r.tunnel.clone(),
                opt_num(r.bridge_eps),
                opt_num(r.bound),
                r.capped.map(|b| b.to_string()).unwrap_or_default(),
                opt_num(r.extent_estimate),
                opt_num(r.reach),
                opt_num(r.magnitude),
                opt_num(r.analytic_bound),
                opt_num(r.quotient_excess),
            ];
            row.extend(pad(&r.l_full));
            row.extend(pad(&r.l_window));
            row.extend(pad(&r.s_theta));
            row.push(r.seed.to_string());
            row.push(r.error.clone().unwrap_or_default());
            row
        })
        .collect();
    Table { header, rows }
}

pub fn refinement_table(rows: &[RefinementRow]) -> Table {
    Table {
        header: REFINEMENT_HEADER.iter().map(|s| s.to_string()).collect(),
        rows: rows
            .iter()
            .map(|r| {
                vec![
                    r.element.clone(),
                    r.m.to_string(),
                    num(r.theta0),
                    num(r.h),
                    num(r.l_base),
                    num(r.l_step),
                    num(r.difference),
                    opt_num(r.ratio),
                ]
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn fixtures_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        for (name, t) in fixtures::named() {
            let p = dir.path().join(format!("{name}.json"));
            save_triple(&p, &t, Some(name)).unwrap();
            let back = load_triple(&p).unwrap();
            assert_eq!(back.triple, t);
            assert_eq!(back.name.as_deref(), Some(name));
        }
    }

    #[test]
    fn ragged_rows_are_rejected_with_pointer() {
        let doc = json!({
            "schema_version": 1,
            "kind": "triple",
            "algebra": {"diagonal": 2},
            "dirac": [[[0, 0], [1, 0]], [[1, 0]]],
        });
        match triple_from_json(&doc) {
            Err(Error::Parse { pointer, .. }) => assert_eq!(pointer, "/dirac/1"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn version_mismatch_is_a_migration_error() {
        let mut doc = triple_to_json(&fixtures::two_point(1.0), None);
        doc["schema_version"] = json!(0);
        assert!(matches!(triple_from_json(&doc), Err(Error::Migration { found: 0, expected: 1 })));
    }

    #[test]
    fn torus_spec_round_trip() {
        let s = FuzzyTorusSpec::planar(5, 0.4).unwrap();
        assert_eq!(torus_spec_from_json(&torus_spec_to_json(&s)).unwrap(), s);
    }

    #[test]
    fn csv_header_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let mut t = Table::new(PERTURB_HEADER);
        t.push(vec!["0".into(), num(0.1), num(1.0), num(0.25), num(0.3), num(0.2)]).unwrap();
        assert!(t.push(vec!["x".into()]).is_err());
        write_csv(&p, &t).unwrap();
        let back = read_csv(&p).unwrap();
        assert_eq!(back, t);
        assert_eq!(std::fs::read_to_string(&p).unwrap().lines().next().unwrap(), PERTURB_HEADER.join(","));
    }

    #[test]
    fn digest_is_sha256() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}

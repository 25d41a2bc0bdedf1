//! JSON interchange.
//!
//! Complex numbers are `[re, im]` pairs and matrices are row-major nested
//! arrays. A map is accepted either as
//! `{"dim_in": n, "dim_out": m, "choi": [[[re, im], ...], ...]}` or as
//! `{"dim_in": n, "dim_out": m, "kraus": [{"sign": 1, "matrix": [...]}, ...]}`;
//! output is always the Choi form. Code spaces are
//! `{"ambient_dim": N, "projector": [[...]]}`.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::linalg::{self, c, ComplexMatrix, Tolerances};
use crate::map::{KrausTerm, QuantumMap, Sign, SignedKrausRep};

pub type JsonMatrix = Vec<Vec<[f64; 2]>>;

pub fn matrix_to_json(m: &ComplexMatrix) -> JsonMatrix {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub fn matrix_from_json(rows: &JsonMatrix) -> Result<ComplexMatrix> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 {
        return Err(Error::Parse("matrix must be non-empty".into()));
    }
    if let Some(k) = rows.iter().position(|row| row.len() != ncols) {
        return Err(Error::Parse(format!(
            "matrix row {k} has {} entries, expected {ncols}",
            rows[k].len()
        )));
    }
    let m = ComplexMatrix::from_fn(nrows, ncols, |i, j| c(rows[i][j][0], rows[i][j][1]));
    if !linalg::all_finite(&m) {
        return Err(Error::Parse("matrix has non-finite entries".into()));
    }
    Ok(m)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ChoiFile {
    pub dim_in: usize,
    pub dim_out: usize,
    pub choi: JsonMatrix,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct KrausTermFile {
    pub sign: Sign,
    pub matrix: JsonMatrix,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct KrausFile {
    pub dim_in: usize,
    pub dim_out: usize,
    pub kraus: Vec<KrausTermFile>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CodeFile {
    pub ambient_dim: usize,
    pub projector: JsonMatrix,
}

/// Either accepted map encoding.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum MapFile {
    Choi(ChoiFile),
    Kraus(KrausFile),
}

pub(crate) fn ser_matrix<S: serde::Serializer>(m: &ComplexMatrix, s: S) -> std::result::Result<S::Ok, S::Error> {
    matrix_to_json(m).serialize(s)
}

pub(crate) fn ser_opt_matrix<S: serde::Serializer>(
    m: &Option<ComplexMatrix>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    m.as_ref().map(matrix_to_json).serialize(s)
}

fn parse_err(e: serde_json::Error) -> Error {
    Error::Parse(e.to_string())
}

pub fn map_to_json(map: &QuantumMap) -> Value {
    serde_json::to_value(ChoiFile {
        dim_in: map.dim_in(),
        dim_out: map.dim_out(),
        choi: matrix_to_json(map.choi()),
    })
    .expect("plain data")
}

pub fn kraus_to_json(rep: &SignedKrausRep) -> Value {
    serde_json::to_value(KrausFile {
        dim_in: rep.dim_in,
        dim_out: rep.dim_out,
        kraus: rep
            .terms
            .iter()
            .map(|t| KrausTermFile {
                sign: t.sign,
                matrix: matrix_to_json(&t.operator),
            })
            .collect(),
    })
    .expect("plain data")
}

fn kraus_from_file(f: KrausFile) -> Result<SignedKrausRep> {
    if f.kraus.is_empty() {
        return Err(Error::Parse("kraus list is empty".into()));
    }
    let terms = f
        .kraus
        .iter()
        .map(|t| {
            Ok(KrausTerm {
                sign: t.sign,
                operator: matrix_from_json(&t.matrix)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    SignedKrausRep::new(f.dim_in, f.dim_out, terms)
}

fn map_from_file(f: MapFile) -> Result<QuantumMap> {
    match f {
        MapFile::Choi(f) => QuantumMap::from_choi(f.dim_in, f.dim_out, matrix_from_json(&f.choi)?),
        MapFile::Kraus(f) => Ok(kraus_from_file(f)?.to_map()),
    }
}

fn untagged_map(text: &str) -> Result<MapFile> {
    // Parse to a Value first so syntax errors keep their line/column.
    let v: Value = serde_json::from_str(text).map_err(parse_err)?;
    describe_map_value(v)
}

fn describe_map_value(v: Value) -> Result<MapFile> {
    if v.get("choi").is_some() {
        return serde_json::from_value::<ChoiFile>(v).map(MapFile::Choi).map_err(parse_err);
    }
    if v.get("kraus").is_some() {
        return serde_json::from_value::<KrausFile>(v).map(MapFile::Kraus).map_err(parse_err);
    }
    serde_json::from_value::<MapFile>(v).map_err(|_| Error::Parse("expected a `choi` or `kraus` map object".into()))
}

pub fn map_from_json_str(text: &str) -> Result<QuantumMap> {
    map_from_file(untagged_map(text)?)
}

pub fn map_from_json_value(v: &Value) -> Result<QuantumMap> {
    map_from_file(describe_map_value(v.clone())?)
}

/// Reads a signed operator-sum; a Choi-form input is converted spectrally.
pub fn kraus_from_json_str(text: &str, tol: &Tolerances) -> Result<SignedKrausRep> {
    match untagged_map(text)? {
        MapFile::Kraus(f) => kraus_from_file(f),
        MapFile::Choi(f) => {
            let map = QuantumMap::from_choi(f.dim_in, f.dim_out, matrix_from_json(&f.choi)?)?;
            map.to_signed_kraus(tol)
        }
    }
}

pub fn code_to_json(code: &crate::qec::CodeSpace) -> Value {
    serde_json::to_value(CodeFile {
        ambient_dim: code.ambient_dim(),
        projector: matrix_to_json(code.projector()),
    })
    .expect("plain data")
}

pub fn code_from_json_str(text: &str, tol: &Tolerances) -> Result<crate::qec::CodeSpace> {
    let f: CodeFile = serde_json::from_str(text).map_err(parse_err)?;
    let p = matrix_from_json(&f.projector)?;
    if p.shape() != (f.ambient_dim, f.ambient_dim) {
        return Err(Error::Parse(format!(
            "projector is {}x{}, ambient_dim says {}",
            p.nrows(),
            p.ncols(),
            f.ambient_dim
        )));
    }
    crate::qec::CodeSpace::new(p, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atlas;

    #[test]
    fn choi_round_trip() {
        let psi = atlas::random_hptp(2, 3, 5);
        let text = serde_json::to_string(&map_to_json(&psi)).unwrap();
        let back = map_from_json_str(&text).unwrap();
        assert_eq!(back, psi);
    }

    #[test]
    fn kraus_input_becomes_choi() {
        let text = r#"{"dim_in":2,"dim_out":2,"kraus":[
            {"sign":1,"matrix":[[[1,0],[0,0]],[[0,0],[0,0]]]},
            {"sign":1,"matrix":[[[0,0],[1,0]],[[0,0],[0,0]]]}]}"#;
        let map = map_from_json_str(text).unwrap();
        assert!(map.distance(&atlas::example2_phi()) < 1e-15);
        let rep = kraus_from_json_str(text, &Tolerances::default()).unwrap();
        assert_eq!(rep.terms.len(), 2);
        let back = kraus_from_json_str(&serde_json::to_string(&kraus_to_json(&rep)).unwrap(), &Tolerances::default())
            .unwrap();
        assert_eq!(back, rep);
    }

    #[test]
    fn malformed_inputs() {
        let err = map_from_json_str("{\"dim_in\": 2,\n \"choi\": [[[1, 0]]\n").unwrap_err();
        assert!(matches!(&err, Error::Parse(msg) if msg.contains("line")), "{err}");
        assert!(matches!(map_from_json_str("{\"foo\": 1}"), Err(Error::Parse(_))));
        assert!(matches!(
            map_from_json_str(r#"{"dim_in":2,"dim_out":2,"choi":[[[1,0]]]}"#),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(
            map_from_json_str(r#"{"dim_in":1,"dim_out":1,"kraus":[{"sign":2,"matrix":[[[1,0]]]}]}"#),
            Err(Error::Parse(_))
        ));
        assert!(matches!(
            map_from_json_str(r#"{"dim_in":1,"dim_out":1,"choi":[[[1,0]],[[1,0],[0,0]]]}"#),
            Err(Error::Parse(_))
        ));
    }
}

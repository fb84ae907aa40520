//! Complex scalars and matrices as `[re, im]` pairs in JSON.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};

pub fn c64_value(z: C64) -> Value {
    json!([z.re, z.im])
}

pub fn cmat_value(m: &CMat) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| c64_value(m[(i, j)])).collect()))
            .collect(),
    )
}

pub fn parse_c64(v: &Value, path: &str) -> Result<C64> {
    let arr = v.as_array().ok_or_else(|| schema(path, "expected [re, im] pair"))?;
    if arr.len() != 2 {
        return Err(schema(path, "expected [re, im] pair of length 2"));
    }
    let re = arr[0]
        .as_f64()
        .ok_or_else(|| schema(&format!("{path}[0]"), "expected number"))?;
    let im = arr[1]
        .as_f64()
        .ok_or_else(|| schema(&format!("{path}[1]"), "expected number"))?;
    Ok(C64::new(re, im))
}

pub fn parse_cmat(v: &Value, path: &str) -> Result<CMat> {
    let rows = v
        .as_array()
        .ok_or_else(|| schema(path, "expected matrix (array of rows)"))?;
    let n = rows.len();
    let mut cols = None;
    let mut data = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let rp = format!("{path}[{i}]");
        let r = row.as_array().ok_or_else(|| schema(&rp, "expected row array"))?;
        match cols {
            None => cols = Some(r.len()),
            Some(c) if c != r.len() => return Err(schema(&rp, "ragged matrix row")),
            _ => {}
        }
        for (j, z) in r.iter().enumerate() {
            data.push(parse_c64(z, &format!("{rp}[{j}]"))?);
        }
    }
    let m = cols.unwrap_or(0);
    Ok(CMat::from_row_slice(n, m, &data))
}

pub(crate) fn schema(path: &str, message: &str) -> Error {
    Error::Schema {
        path: path.to_string(),
        message: message.to_string(),
    }
}

/// `#[serde(with = "c64_pair")]`
pub mod c64_pair {
    use super::*;

    pub fn serialize<S: Serializer>(z: &C64, s: S) -> std::result::Result<S::Ok, S::Error> {
        [z.re, z.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<C64, D::Error> {
        let v = <[f64; 2]>::deserialize(d)?;
        Ok(C64::new(v[0], v[1]))
    }
}

/// `#[serde(with = "cmat_rows")]`
pub mod cmat_rows {
    use super::*;

    pub fn serialize<S: Serializer>(m: &CMat, s: S) -> std::result::Result<S::Ok, S::Error> {
        cmat_value(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<CMat, D::Error> {
        let v = Value::deserialize(d)?;
        parse_cmat(&v, "matrix").map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_round_trip_is_bit_exact() {
        let m = CMat::from_fn(2, 3, |i, j| C64::new(0.1 * i as f64 + 1.0 / 3.0, -(j as f64) / 7.0));
        let v = cmat_value(&m);
        let back = parse_cmat(&serde_json::from_str(&v.to_string()).unwrap(), "m").unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn bad_pair_names_the_path() {
        let v: Value = serde_json::from_str("[[[1.0, 2.0], [1.0]]]").unwrap();
        let err = parse_cmat(&v, "zeroth").unwrap_err();
        assert!(err.to_string().contains("zeroth[0][1]"), "{err}");
    }
}

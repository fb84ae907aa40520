//! JSON operator files.
//!
//! ```json
//! { "m": 2, "rank_e": 1, "rank_f": 1, "geometry": "circle",
//!   "coeffs": [ { "l": 0, "entries": [ { "row": 0, "col": 0,
//!                 "monomials": [ { "powers": [0], "coef": [1.0, 0.0] } ] } ] }, ... ] }
//! ```

use serde_json::{json, Map, Value};

use crate::error::Result;
use crate::json::{c64_value, cmat_value, parse_c64, parse_cmat, schema};
use crate::symbol::{CollarOperator, Geometry, Monomial, Polynomial, SymbolMatrix};

pub fn parse_operator_str(text: &str) -> Result<CollarOperator> {
    let v: Value = serde_json::from_str(text).map_err(|e| {
        schema(
            &format!("line {} column {}", e.line(), e.column()),
            &format!("invalid JSON: {e}"),
        )
    })?;
    parse_operator(&v)
}

pub fn read_operator(path: &std::path::Path) -> Result<CollarOperator> {
    let text = std::fs::read_to_string(path)?;
    parse_operator_str(&text)
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str, path: &str) -> Result<&'a Value> {
    obj.get(key)
        .ok_or_else(|| schema(&format!("{path}.{key}"), "missing required field"))
}

fn as_usize(v: &Value, path: &str) -> Result<usize> {
    v.as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| schema(path, "expected non-negative integer"))
}

pub fn parse_operator(v: &Value) -> Result<CollarOperator> {
    let obj = v.as_object().ok_or_else(|| schema("$", "expected object"))?;
    let m = as_usize(field(obj, "m", "$")?, "$.m")?;
    let rank_e = as_usize(field(obj, "rank_e", "$")?, "$.rank_e")?;
    let rank_f = as_usize(field(obj, "rank_f", "$")?, "$.rank_f")?;
    let gname = field(obj, "geometry", "$")?
        .as_str()
        .ok_or_else(|| schema("$.geometry", "expected string"))?;
    let geometry = Geometry::parse(gname)?;
    let dim = geometry.boundary_dim();
    if m == 0 {
        return Err(schema("$.m", "order must be at least 1"));
    }
    if rank_e == 0 || rank_f == 0 {
        return Err(schema("$.rank_e", "ranks must be at least 1"));
    }
    let coeffs_v = field(obj, "coeffs", "$")?
        .as_array()
        .ok_or_else(|| schema("$.coeffs", "expected array"))?;
    let mut coeffs: Vec<Option<SymbolMatrix>> = vec![None; m + 1];
    let mut dnormal = vec![None; m + 1];
    let mut zeroth = vec![None; m + 1];
    for (idx, cv) in coeffs_v.iter().enumerate() {
        let path = format!("$.coeffs[{idx}]");
        let co = cv.as_object().ok_or_else(|| schema(&path, "expected object"))?;
        let l = as_usize(field(co, "l", &path)?, &format!("{path}.l"))?;
        if l > m {
            return Err(schema(&format!("{path}.l"), &format!("l = {l} exceeds m = {m}")));
        }
        if coeffs[l].is_some() {
            return Err(schema(&format!("{path}.l"), &format!("duplicate coefficient l = {l}")));
        }
        let entries = field(co, "entries", &path)?;
        coeffs[l] = Some(parse_entries(
            entries,
            rank_f,
            rank_e,
            dim,
            l as i32,
            &format!("{path}.entries"),
        )?);
        if let Some(dn) = co.get("dnormal") {
            dnormal[l] = Some(parse_entries(
                dn,
                rank_f,
                rank_e,
                dim,
                l as i32,
                &format!("{path}.dnormal"),
            )?);
        }
        if let Some(z) = co.get("zeroth") {
            let zm = parse_cmat(z, &format!("{path}.zeroth"))?;
            if zm.nrows() != rank_f || zm.ncols() != rank_e {
                return Err(schema(
                    &format!("{path}.zeroth"),
                    &format!("expected {rank_f}x{rank_e} matrix"),
                ));
            }
            zeroth[l] = Some(zm);
        }
    }
    let coeffs: Vec<SymbolMatrix> = coeffs
        .into_iter()
        .map(|c| c.unwrap_or_else(|| SymbolMatrix::zeros(rank_f, rank_e, dim)))
        .collect();
    CollarOperator::with_parts(geometry, coeffs, dnormal, zeroth)
}

fn parse_entries(
    v: &Value,
    rows: usize,
    cols: usize,
    dim: usize,
    degree: i32,
    path: &str,
) -> Result<SymbolMatrix> {
    let arr = v.as_array().ok_or_else(|| schema(path, "expected array of entries"))?;
    let mut s = SymbolMatrix::zeros(rows, cols, dim);
    let mut seen = std::collections::BTreeSet::new();
    for (i, ev) in arr.iter().enumerate() {
        let ep = format!("{path}[{i}]");
        let eo = ev.as_object().ok_or_else(|| schema(&ep, "expected object"))?;
        let row = as_usize(field(eo, "row", &ep)?, &format!("{ep}.row"))?;
        let col = as_usize(field(eo, "col", &ep)?, &format!("{ep}.col"))?;
        if row >= rows || col >= cols {
            return Err(schema(
                &format!("{ep}.row"),
                &format!("({row}, {col}) outside {rows}x{cols}"),
            ));
        }
        if !seen.insert((row, col)) {
            return Err(schema(&ep, &format!("duplicate entry ({row}, {col})")));
        }
        let monos = field(eo, "monomials", &ep)?
            .as_array()
            .ok_or_else(|| schema(&format!("{ep}.monomials"), "expected array"))?;
        let mut terms = Vec::new();
        for (k, mv) in monos.iter().enumerate() {
            let mp = format!("{ep}.monomials[{k}]");
            let mo = mv.as_object().ok_or_else(|| schema(&mp, "expected object"))?;
            let pv = field(mo, "powers", &mp)?
                .as_array()
                .ok_or_else(|| schema(&format!("{mp}.powers"), "expected array"))?;
            if pv.len() != dim {
                return Err(schema(
                    &format!("{mp}.powers"),
                    &format!("expected {dim} powers for this geometry, got {}", pv.len()),
                ));
            }
            let mut powers = Vec::new();
            for (q, p) in pv.iter().enumerate() {
                powers.push(
                    p.as_u64()
                        .ok_or_else(|| schema(&format!("{mp}.powers[{q}]"), "expected integer"))?
                        as u32,
                );
            }
            let norm_power = match mo.get("norm_power") {
                None => 0,
                Some(np) => np
                    .as_i64()
                    .ok_or_else(|| schema(&format!("{mp}.norm_power"), "expected integer"))?
                    as i32,
            };
            let coef = parse_c64(field(mo, "coef", &mp)?, &format!("{mp}.coef"))?;
            let mono = Monomial {
                powers,
                norm_power,
                coef,
            };
            if mono.degree() != degree {
                return Err(schema(
                    &mp,
                    &format!("degree {} but coefficient l = {degree} requires degree {degree}", mono.degree()),
                ));
            }
            terms.push(mono);
        }
        let poly = Polynomial::from_terms(dim, terms).map_err(|e| schema(&ep, &e.to_string()))?;
        s.set(row, col, poly).map_err(|e| schema(&ep, &e.to_string()))?;
    }
    Ok(s)
}

fn entries_value(s: &SymbolMatrix) -> Value {
    Value::Array(
        s.nonzero_entries()
            .into_iter()
            .map(|(row, col, monos)| {
                let ms: Vec<Value> = monos
                    .iter()
                    .map(|m| {
                        let mut o = Map::new();
                        o.insert("powers".into(), json!(m.powers));
                        if m.norm_power != 0 {
                            o.insert("norm_power".into(), json!(m.norm_power));
                        }
                        o.insert("coef".into(), c64_value(m.coef));
                        Value::Object(o)
                    })
                    .collect();
                json!({ "row": row, "col": col, "monomials": ms })
            })
            .collect(),
    )
}

pub fn operator_value(op: &CollarOperator) -> Value {
    let coeffs: Vec<Value> = op
        .coeffs
        .iter()
        .enumerate()
        .map(|(l, a)| {
            let mut o = Map::new();
            o.insert("l".into(), json!(l));
            o.insert("entries".into(), entries_value(a));
            if let Some(Some(d)) = op.dnormal.get(l) {
                o.insert("dnormal".into(), entries_value(d));
            }
            if let Some(Some(z)) = op.zeroth.get(l) {
                o.insert("zeroth".into(), cmat_value(z));
            }
            Value::Object(o)
        })
        .collect();
    json!({
        "m": op.m,
        "rank_e": op.bundle_in.rank,
        "rank_f": op.bundle_out.rank,
        "geometry": op.geometry.name(),
        "coeffs": coeffs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const LAPLACE: &str = r#"{
        "m": 2, "rank_e": 1, "rank_f": 1, "geometry": "circle",
        "coeffs": [
            { "l": 0, "entries": [ { "row": 0, "col": 0, "monomials": [ { "powers": [0], "coef": [1.0, 0.0] } ] } ] },
            { "l": 2, "entries": [ { "row": 0, "col": 0, "monomials": [ { "powers": [2], "coef": [1.0, 0.0] } ] } ] }
        ]
    }"#;

    #[test]
    fn parse_and_round_trip() {
        let op = parse_operator_str(LAPLACE).unwrap();
        assert_eq!(op.m, 2);
        assert!(op.coeffs[1].nonzero_entries().is_empty());
        let back = parse_operator(&operator_value(&op)).unwrap();
        assert_eq!(back.coeffs, op.coeffs);
    }

    #[test]
    fn malformed_fields_are_named() {
        let bad = LAPLACE.replace("\"coef\": [1.0, 0.0] } ] } ] },", "\"coef\": [1.0] } ] } ] },");
        let e = parse_operator_str(&bad).unwrap_err();
        assert!(e.is_schema());
        assert!(e.to_string().contains("$.coeffs[0].entries[0].monomials[0].coef"), "{e}");

        let wrong_degree = LAPLACE.replace("\"powers\": [2]", "\"powers\": [1]");
        let e = parse_operator_str(&wrong_degree).unwrap_err();
        assert!(e.to_string().contains("$.coeffs[1].entries[0].monomials[0]"), "{e}");

        let no_m = LAPLACE.replace("\"m\": 2,", "");
        assert!(parse_operator_str(&no_m).unwrap_err().to_string().contains("$.m"));

        let geo = LAPLACE.replace("circle", "moebius");
        assert!(parse_operator_str(&geo).unwrap_err().to_string().contains("moebius"));

        let e = parse_operator_str("{ \"m\": ").unwrap_err();
        assert!(e.is_schema() && e.to_string().contains("line 1"), "{e}");
    }

    #[test]
    fn text_round_trip_is_exact() {
        // random coefficients catch a lossy float parser
        let op = crate::fixtures::random_order3_rank2(7).unwrap();
        let text = serde_json::to_string(&operator_value(&op)).unwrap();
        let back = parse_operator_str(&text).unwrap();
        let p = crate::symbol::CospherePoint::new(vec![0.0], vec![1.0]).unwrap();
        for l in 0..=3 {
            assert_eq!(back.coefficient_at(l, &p).unwrap(), op.coefficient_at(l, &p).unwrap());
        }
    }
}

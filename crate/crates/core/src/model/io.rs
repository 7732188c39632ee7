//! `LENSW1` weight files: one JSON document holding the config and every
//! parameter as nested arrays keyed by dotted name.

use std::path::Path;

use serde_json::{json, Map, Value};

use super::config::ModelConfig;
use super::weights::{ParamMut, WeightSet};
use crate::error::{Error, Result};

pub const FORMAT_TAG: &str = "LENSW1";

pub fn to_json_string(w: &WeightSet) -> String {
    let mut copy = w.clone();
    let mut params = Map::new();
    for p in copy.params_mut() {
        let value = match p.value {
            ParamMut::Mat(m) => Value::Array(
                m.iter_rows()
                    .map(|row| Value::Array(row.iter().map(|&x| json!(x)).collect()))
                    .collect(),
            ),
            ParamMut::Vec(v) => Value::Array(v.iter().map(|&x| json!(x)).collect()),
        };
        params.insert(p.name, value);
    }
    let doc = json!({
        "format": FORMAT_TAG,
        "config": w.config,
        "params": Value::Object(params),
    });
    serde_json::to_string(&doc).expect("weights serialize")
}

fn flatten_numbers(v: &Value, name: &str, out: &mut Vec<f64>) -> Result<()> {
    let arr = v
        .as_array()
        .ok_or_else(|| Error::format(format!("{name}: expected an array")))?;
    for x in arr {
        out.push(
            x.as_f64()
                .ok_or_else(|| Error::format(format!("{name}: non-numeric entry")))?,
        );
    }
    Ok(())
}

pub fn from_json_str(s: &str) -> Result<WeightSet> {
    let doc: Value =
        serde_json::from_str(s).map_err(|e| Error::format(format!("invalid JSON: {e}")))?;
    let obj = doc
        .as_object()
        .ok_or_else(|| Error::format("weight file is not a JSON object"))?;
    match obj.get("format").and_then(Value::as_str) {
        Some(FORMAT_TAG) => {}
        Some(other) => return Err(Error::format(format!("unknown format tag {other:?}"))),
        None => return Err(Error::format("missing format tag")),
    }
    let config: ModelConfig = serde_json::from_value(
        obj.get("config")
            .cloned()
            .ok_or_else(|| Error::format("missing config"))?,
    )
    .map_err(|e| Error::format(format!("bad config: {e}")))?;
    config.validate()?;
    let params = obj
        .get("params")
        .and_then(Value::as_object)
        .ok_or_else(|| Error::format("missing params object"))?;

    let mut w = WeightSet::neutral(&config)?;
    let mut seen = 0usize;
    for mut p in w.params_mut() {
        let v = params
            .get(&p.name)
            .ok_or_else(|| Error::format(format!("missing parameter {}", p.name)))?;
        seen += 1;
        let mut flat = Vec::new();
        match &p.value {
            ParamMut::Mat(m) => {
                let rows = v
                    .as_array()
                    .ok_or_else(|| Error::format(format!("{}: expected rows", p.name)))?;
                if rows.len() != m.rows() {
                    return Err(Error::format(format!(
                        "{}: {} rows, expected {}",
                        p.name,
                        rows.len(),
                        m.rows()
                    )));
                }
                for row in rows {
                    let before = flat.len();
                    flatten_numbers(row, &p.name, &mut flat)?;
                    if flat.len() - before != m.cols() {
                        return Err(Error::format(format!(
                            "{}: row of length {}, expected {}",
                            p.name,
                            flat.len() - before,
                            m.cols()
                        )));
                    }
                }
            }
            ParamMut::Vec(_) => flatten_numbers(v, &p.name, &mut flat)?,
        }
        let dst = p.value.values_mut();
        if flat.len() != dst.len() {
            return Err(Error::format(format!(
                "{}: {} values, expected {}",
                p.name,
                flat.len(),
                dst.len()
            )));
        }
        dst.copy_from_slice(&flat);
    }
    if seen != params.len() {
        return Err(Error::format(format!(
            "{} unexpected parameters in file",
            params.len() - seen
        )));
    }
    Ok(w)
}

pub fn read_file(path: &Path) -> Result<WeightSet> {
    from_json_str(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{NormStyle, SmolgenConfig};

    #[test]
    fn round_trip_is_bitwise() {
        for cfg in [
            ModelConfig::toy(1),
            ModelConfig::toy(2).with_norm_style(NormStyle::Preln),
            ModelConfig::toy(3).with_smolgen(SmolgenConfig::default()),
        ] {
            let w = WeightSet::init(&cfg).unwrap();
            let s = to_json_string(&w);
            let back = from_json_str(&s).unwrap();
            assert_eq!(w, back);
            assert_eq!(s, to_json_string(&back));
        }
    }

    #[test]
    fn rejects_wrong_tag() {
        let w = WeightSet::init(&ModelConfig::toy(1)).unwrap();
        let s = to_json_string(&w).replacen("LENSW1", "LENSW2", 1);
        assert!(matches!(from_json_str(&s), Err(Error::Format(_))));
    }

    #[test]
    fn rejects_shape_mismatch() {
        let w = WeightSet::init(&ModelConfig::toy(1)).unwrap();
        let mut doc: Value = serde_json::from_str(&to_json_string(&w)).unwrap();
        doc["params"]["input.bias"].as_array_mut().unwrap().pop();
        assert!(matches!(
            from_json_str(&doc.to_string()),
            Err(Error::Format(_))
        ));
        let mut doc: Value = serde_json::from_str(&to_json_string(&w)).unwrap();
        doc["params"]["extra"] = json!([1.0]);
        assert!(from_json_str(&doc.to_string()).is_err());
    }

    #[test]
    fn rejects_inconsistent_config() {
        let w = WeightSet::init(&ModelConfig::toy(1)).unwrap();
        let mut doc: Value = serde_json::from_str(&to_json_string(&w)).unwrap();
        doc["config"]["head_dim"] = json!(5);
        assert!(matches!(
            from_json_str(&doc.to_string()),
            Err(Error::Config(_))
        ));
    }
}

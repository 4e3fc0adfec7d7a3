//! Stage records shared by the pipeline and the command-line reports.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// One named step of a run: its constants, a pass/fail verdict and a witness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub name: String,
    #[serde(with = "lossless")]
    pub constants: BTreeMap<String, f64>,
    pub verdict: bool,
    pub witness: serde_json::Value,
}

impl Stage {
    pub fn new(name: impl Into<String>) -> Self {
        Stage {
            name: name.into(),
            constants: BTreeMap::new(),
            verdict: true,
            witness: serde_json::Value::Null,
        }
    }

    pub fn constant(mut self, key: impl Into<String>, value: f64) -> Self {
        self.constants.insert(key.into(), value);
        self
    }

    pub fn verdict(mut self, ok: bool) -> Self {
        self.verdict = ok;
        self
    }

    pub fn witness(mut self, value: impl Serialize) -> Self {
        self.witness = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self
    }

    /// A failed stage carrying the error message.
    pub fn failed(name: impl Into<String>, err: impl std::fmt::Display) -> Self {
        Stage::new(name)
            .verdict(false)
            .witness(serde_json::json!({ "error": err.to_string() }))
    }
}

/// JSON has no infinities or NaN, so those are written as strings.
mod lossless {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Num {
        Finite(f64),
        Special(String),
    }

    pub fn serialize<S: Serializer>(map: &BTreeMap<String, f64>, s: S) -> Result<S::Ok, S::Error> {
        let out: BTreeMap<&String, Num> = map
            .iter()
            .map(|(k, v)| {
                let n = if v.is_finite() {
                    Num::Finite(*v)
                } else if v.is_nan() {
                    Num::Special("nan".into())
                } else if *v > 0.0 {
                    Num::Special("inf".into())
                } else {
                    Num::Special("-inf".into())
                };
                (k, n)
            })
            .collect();
        out.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, f64>, D::Error> {
        let raw = BTreeMap::<String, Num>::deserialize(d)?;
        raw.into_iter()
            .map(|(k, n)| {
                let v = match n {
                    Num::Finite(v) => v,
                    Num::Special(s) => match s.as_str() {
                        "inf" => f64::INFINITY,
                        "-inf" => f64::NEG_INFINITY,
                        "nan" => f64::NAN,
                        other => return Err(serde::de::Error::custom(format!("bad number `{other}`"))),
                    },
                };
                Ok((k, v))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_with_infinities() {
        let s = Stage::new("x")
            .constant("a", 0.1 + 0.2)
            .constant("b", f64::INFINITY)
            .witness(vec![1, 2]);
        let text = serde_json::to_string(&s).unwrap();
        let back: Stage = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
    }
}

//! Fixed five-place decimal output for emitted artifacts.

use std::collections::BTreeMap;

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

/// Formats with five fractional digits, rounding exact ties to even.
pub fn fixed5(x: f64) -> String {
    let s = format!("{x:.5}");
    if s == "-0.00000" {
        "0.00000".to_string()
    } else {
        s
    }
}

fn raw(x: f64) -> Box<RawValue> {
    let text = if x.is_finite() {
        fixed5(x)
    } else {
        "null".to_string()
    };
    RawValue::from_string(text).expect("fixed-point decimals are valid JSON")
}

pub fn ser_f64<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    raw(*x).serialize(s)
}

pub fn ser_opt_f64<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => raw(*v).serialize(s),
        None => s.serialize_none(),
    }
}

pub fn ser_map_f64<K: Serialize, S: Serializer>(m: &BTreeMap<K, f64>, s: S) -> Result<S::Ok, S::Error> {
    let mut map = s.serialize_map(Some(m.len()))?;
    for (k, v) in m {
        map.serialize_entry(k, &raw(*v))?;
    }
    map.end()
}

pub fn ser_opt_map_f64<K: Serialize, S: Serializer>(
    m: &Option<BTreeMap<K, f64>>,
    s: S,
) -> Result<S::Ok, S::Error> {
    match m {
        Some(m) => ser_map_f64(m, s),
        None => s.serialize_none(),
    }
}

pub fn ser_nested_f64<S: Serializer>(
    m: &BTreeMap<String, BTreeMap<String, f64>>,
    s: S,
) -> Result<S::Ok, S::Error> {
    struct Inner<'a>(&'a BTreeMap<String, f64>);
    impl Serialize for Inner<'_> {
        fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
            ser_map_f64(self.0, s)
        }
    }
    let mut map = s.serialize_map(Some(m.len()))?;
    for (k, v) in m {
        map.serialize_entry(k, &Inner(v))?;
    }
    map.end()
}

//! JSON/CSV emission helpers.
//!
//! Floats are written with 17 significant digits (`{:.16e}`), which
//! round-trips every `f64`, so emitted reports can serve as regression
//! fixtures. Non-finite values become `null`.

use serde::Serializer;
use serde_json::value::RawValue;

/// Formats a float with 17 significant digits; `null` when not finite.
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".to_string()
    }
}

/// `serialize_with` adapter for a single float.
pub fn sig17<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    use serde::Serialize;
    let raw = RawValue::from_string(fmt17(*x)).map_err(serde::ser::Error::custom)?;
    raw.serialize(s)
}

/// `serialize_with` adapter for float slices.
pub fn sig17_vec<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(xs.len()))?;
    for x in xs {
        seq.serialize_element(&Sig17(*x))?;
    }
    seq.end()
}

/// A float that serializes with [`sig17`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sig17(pub f64);

impl serde::Serialize for Sig17 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        sig17(&self.0, s)
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut out = serde_json::to_string_pretty(value).expect("report types serialize");
    out.push('\n');
    out
}

//! Deterministic JSON: keys sorted, floats printed with 17 significant digits.

use std::io;

use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter, PrettyFormatter};

/// Wraps a formatter and replaces its float rendering with `{:.16e}`.
struct FixedFloats<F>(F);

macro_rules! delegate {
    ($($name:ident($($arg:ident: $ty:ty),*)),* $(,)?) => {
        $(
            fn $name<W: ?Sized + io::Write>(&mut self, w: &mut W $(, $arg: $ty)*) -> io::Result<()> {
                self.0.$name(w $(, $arg)*)
            }
        )*
    };
}

impl<F: Formatter> Formatter for FixedFloats<F> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        if value == 0.0 {
            // one spelling for both signed zeros
            return w.write_all(b"0.0000000000000000e0");
        }
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    delegate!(
        begin_array(),
        end_array(),
        begin_array_value(first: bool),
        end_array_value(),
        begin_object(),
        end_object(),
        begin_object_key(first: bool),
        end_object_key(),
        begin_object_value(),
        end_object_value(),
    );
}

fn render<F: Formatter>(value: &impl Serialize, f: F) -> serde_json::Result<String> {
    // routing through Value sorts object keys
    let v = serde_json::to_value(value)?;
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FixedFloats(f));
    v.serialize(&mut ser)?;
    Ok(String::from_utf8(out).expect("serde_json emits UTF-8"))
}

/// Compact canonical form, suitable for hashing.
pub fn to_canonical_string(value: &impl Serialize) -> serde_json::Result<String> {
    render(value, CompactFormatter)
}

/// Indented canonical form.
pub fn to_canonical_pretty(value: &impl Serialize) -> serde_json::Result<String> {
    render(value, PrettyFormatter::with_indent(b"  "))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn keys_sorted_and_floats_fixed() {
        let v = json!({"b": 0.1, "a": [1, 2.5, -0.0], "c": {"z": 1e-300, "y": true}});
        assert_eq!(
            to_canonical_string(&v).unwrap(),
            r#"{"a":[1,2.5000000000000000e0,0.0000000000000000e0],"b":1.0000000000000001e-1,"c":{"y":true,"z":1.0000000000000000e-300}}"#
        );
        let pretty = to_canonical_pretty(&v).unwrap();
        assert!(pretty.contains("\n  \"a\": [\n    1,"));
    }

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 2.0f64.sqrt(), 1e-17, 123456789.123456789, f64::MIN_POSITIVE] {
            let s = to_canonical_string(&x).unwrap();
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
    }
}

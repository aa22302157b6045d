//! JSON-lines helpers. Floats are always printed with 17 significant
//! digits so records round-trip bit-exactly.

use serde_json::Value;

use crate::{CoreError, Result};

pub fn fmt_f64(x: f64) -> String {
    format!("{:.16e}", x)
}

/// Writes `data` as nested lists with the given dimensions (row-major).
pub fn write_nested(out: &mut String, data: &[f64], dims: &[usize]) {
    fn rec(out: &mut String, data: &[f64], dims: &[usize]) {
        match dims {
            [] => out.push_str(&fmt_f64(data[0])),
            [d, rest @ ..] => {
                let stride: usize = rest.iter().product();
                out.push('[');
                for i in 0..*d {
                    if i > 0 {
                        out.push(',');
                    }
                    rec(out, &data[i * stride..(i + 1) * stride], rest);
                }
                out.push(']');
            }
        }
    }
    debug_assert_eq!(data.len(), dims.iter().product::<usize>());
    rec(out, data, dims)
}

/// Flattens nested lists, checking they match `dims` exactly.
pub fn read_nested(v: &Value, dims: &[usize]) -> Result<Vec<f64>> {
    fn rec(v: &Value, dims: &[usize], out: &mut Vec<f64>) -> Result<()> {
        match dims {
            [] => {
                let x = v
                    .as_f64()
                    .ok_or_else(|| CoreError::Parse(format!("expected number, got {v}")))?;
                out.push(x);
                Ok(())
            }
            [d, rest @ ..] => {
                let arr = v
                    .as_array()
                    .ok_or_else(|| CoreError::Parse("expected list".into()))?;
                if arr.len() != *d {
                    return Err(CoreError::Parse(format!(
                        "expected {d} entries, found {}",
                        arr.len()
                    )));
                }
                arr.iter().try_for_each(|x| rec(x, rest, out))
            }
        }
    }
    let mut out = Vec::with_capacity(dims.iter().product());
    rec(v, dims, &mut out)?;
    Ok(out)
}

pub(crate) fn field<'a>(v: &'a Value, name: &str) -> Result<&'a Value> {
    v.get(name)
        .ok_or_else(|| CoreError::Parse(format!("missing field `{name}`")))
}

pub(crate) fn usize_field(v: &Value, name: &str) -> Result<usize> {
    field(v, name)?
        .as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| CoreError::Parse(format!("`{name}` is not a non-negative integer")))
}

pub(crate) fn str_field<'a>(v: &'a Value, name: &str) -> Result<&'a str> {
    field(v, name)?
        .as_str()
        .ok_or_else(|| CoreError::Parse(format!("`{name}` is not a string")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_round_trip() {
        let data = vec![0.1, 1.0 / 3.0, -2.5e-300, 7.0, 8.0, 9.0];
        let mut s = String::new();
        write_nested(&mut s, &data, &[2, 3]);
        let v: Value = serde_json::from_str(&s).unwrap();
        let back = read_nested(&v, &[2, 3]).unwrap();
        assert!(back.iter().zip(&data).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert!(read_nested(&v, &[3, 2]).is_err());
    }
}

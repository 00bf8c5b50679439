//! Fixed-width, locale-free number formatting shared by every output file.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::ser::{Serialize, Serializer};
use serde_json::value::RawValue;

/// Scientific notation with 17 significant digits; round-trips every `f64`.
pub fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

/// `100·p` rounded half-to-even at two decimals, computed on the exact
/// binary value of `p` so that ties are genuine ties.
pub fn percent(p: f64) -> String {
    let Some(exact) = BigRational::from_float(p) else {
        return format!("{p}");
    };
    let hundredths = exact.abs() * BigRational::from_integer(BigInt::from(10_000));
    let floor = hundredths.floor();
    let frac = &hundredths - &floor;
    let half = BigRational::new(BigInt::from(1), BigInt::from(2));
    let mut n = floor.to_integer();
    if frac > half || (frac == half && !(&n % BigInt::from(2)).is_zero()) {
        n += 1;
    }
    let sign = if p < 0.0 && !n.is_zero() { "-" } else { "" };
    let hundred = BigInt::from(100);
    format!("{sign}{}.{:02}", &n / &hundred, (&n % &hundred).to_u32_digits().1.first().copied().unwrap_or(0))
}

/// A float that serializes into JSON with the same digits as [`sci`].
#[derive(Clone, Copy, Debug)]
pub struct Sci(pub f64);

impl Serialize for Sci {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return s.serialize_none();
        }
        RawValue::from_string(sci(self.0)).map_err(serde::ser::Error::custom)?.serialize(s)
    }
}

/// A probability rendered as a two-decimal percentage (a JSON number).
#[derive(Clone, Copy, Debug)]
pub struct Percent(pub f64);

impl Serialize for Percent {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return s.serialize_none();
        }
        RawValue::from_string(percent(self.0)).map_err(serde::ser::Error::custom)?.serialize(s)
    }
}

/// CSV with a header row, comma separators and LF line endings.
pub fn csv<R: AsRef<[String]>>(header: &[&str], rows: &[R]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.as_ref().join(","));
        out.push('\n');
    }
    out
}

/// Pretty JSON terminated by a newline.
pub fn json<T: Serialize>(value: &T) -> Result<String, serde_json::Error> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(sci(0.1), "1.0000000000000001e-1");
        assert_eq!(sci(1.0), "1.0000000000000000e0");
        assert_eq!(sci(-2.5e-300), "-2.5000000000000000e-300");
    }

    #[test]
    fn percent_rounds_to_two_decimals() {
        assert_eq!(percent(0.1680), "16.80");
        assert_eq!(percent(0.0003), "0.03");
        assert_eq!(percent(1.0), "100.00");
        assert_eq!(percent(0.0), "0.00");
        assert_eq!(percent(2f64.powi(-7)), "0.78");
        assert_eq!(percent(0.816_5), "81.65");
    }

    #[test]
    fn exact_ties_go_to_even() {
        // 1/32 = 3.125 % and 3/32 = 9.375 % are exact binary ties.
        assert_eq!(percent(1.0 / 32.0), "3.12");
        assert_eq!(percent(3.0 / 32.0), "9.38");
        assert_eq!(percent(-1.0 / 32.0), "-3.12");
    }

    #[test]
    fn csv_layout() {
        let rows = vec![vec!["1".to_string(), "2".to_string()]];
        assert_eq!(csv(&["a", "b"], &rows), "a,b\n1,2\n");
    }
}

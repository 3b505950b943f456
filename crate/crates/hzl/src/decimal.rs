//! Exact decimal numbers.
//!
//! Replicated execution forbids floating point, so contract values use
//! arbitrary-precision decimals stored in a normalized textual form:
//! no leading zeros in the integer part, no trailing zeros in the
//! fraction, no negative zero. Equality is exact and `10`, `10.0` and
//! `010` all normalize to the same value.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("malformed decimal literal '{0}'")]
pub struct DecimalParseError(pub String);

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Decimal {
    neg: bool,
    int_part: String,
    frac_part: String,
}

impl Decimal {
    pub fn zero() -> Self {
        Decimal {
            neg: false,
            int_part: "0".into(),
            frac_part: String::new(),
        }
    }

    pub fn from_u64(n: u64) -> Self {
        Decimal {
            neg: false,
            int_part: n.to_string(),
            frac_part: String::new(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.int_part == "0" && self.frac_part.is_empty()
    }

    fn magnitude_cmp(&self, other: &Self) -> Ordering {
        match self.int_part.len().cmp(&other.int_part.len()) {
            Ordering::Equal => {}
            ord => return ord,
        }
        match self.int_part.cmp(&other.int_part) {
            Ordering::Equal => {}
            ord => return ord,
        }
        // Fraction digits compare positionally; a missing digit counts
        // as zero. Normalized fractions never end in '0', so any extra
        // digits make the longer fraction strictly larger.
        let a = self.frac_part.as_bytes();
        let b = other.frac_part.as_bytes();
        for i in 0..a.len().max(b.len()) {
            let da = a.get(i).copied().unwrap_or(b'0');
            let db = b.get(i).copied().unwrap_or(b'0');
            match da.cmp(&db) {
                Ordering::Equal => {}
                ord => return ord,
            }
        }
        Ordering::Equal
    }
}

impl FromStr for Decimal {
    type Err = DecimalParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || DecimalParseError(s.to_string());
        let (neg, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        if body.is_empty() {
            return Err(err());
        }
        let (int_raw, frac_raw) = match body.split_once('.') {
            Some((i, f)) => (i, f),
            None => (body, ""),
        };
        if int_raw.is_empty()
            || (body.contains('.') && frac_raw.is_empty())
            || !int_raw.bytes().all(|b| b.is_ascii_digit())
            || !frac_raw.bytes().all(|b| b.is_ascii_digit())
        {
            return Err(err());
        }
        let int_part = match int_raw.trim_start_matches('0') {
            "" => "0",
            trimmed => trimmed,
        }
        .to_string();
        let frac_part = frac_raw.trim_end_matches('0').to_string();
        let neg = neg && !(int_part == "0" && frac_part.is_empty());
        Ok(Decimal {
            neg,
            int_part,
            frac_part,
        })
    }
}

impl fmt::Display for Decimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.neg {
            f.write_str("-")?;
        }
        f.write_str(&self.int_part)?;
        if !self.frac_part.is_empty() {
            write!(f, ".{}", self.frac_part)?;
        }
        Ok(())
    }
}

impl PartialOrd for Decimal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Decimal {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.neg, other.neg) {
            (false, true) => Ordering::Greater,
            (true, false) => Ordering::Less,
            (false, false) => self.magnitude_cmp(other),
            (true, true) => other.magnitude_cmp(self),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> Decimal {
        s.parse().unwrap()
    }

    #[test]
    fn normalization() {
        assert_eq!(d("10"), d("10.0"));
        assert_eq!(d("010"), d("10"));
        assert_eq!(d("-0"), d("0"));
        assert_eq!(d("-0.000"), d("0"));
        assert_eq!(d("1.500").to_string(), "1.5");
        assert_eq!(d("-03.10").to_string(), "-3.1");
        assert_eq!(d("0.5").to_string(), "0.5");
    }

    #[test]
    fn rejects_malformed() {
        for bad in ["", "-", ".", "1.", ".5", "1..2", "1e3", "+1", "1 0"] {
            assert!(bad.parse::<Decimal>().is_err(), "accepted {bad:?}");
        }
    }

    #[test]
    fn ordering() {
        assert!(d("2") < d("10"));
        assert!(d("0.5") < d("0.51"));
        assert!(d("0.5") > d("0.49"));
        assert!(d("-1") < d("0"));
        assert!(d("-10") < d("-2"));
        assert!(d("-0.51") < d("-0.5"));
        assert!(d("100") > d("99.999"));
        assert_eq!(d("3.14").cmp(&d("3.14")), Ordering::Equal);
    }
}

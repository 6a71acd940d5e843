//! Value parsers for list, range and fraction flags.

use std::str::FromStr;

use knperc::rational::parse_fraction;
use knperc::Rational;

/// `5,15,25`, `4..7` (inclusive) or a mix such as `1,4..6`.
pub fn parse_list<T>(s: &str) -> Result<Vec<T>, String>
where
    T: FromStr + Copy + PartialOrd + Into<u64> + TryFrom<u64>,
{
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let a: u64 = parse_one::<T>(a)?.into();
            let b: u64 = parse_one::<T>(b.trim_start_matches('='))?.into();
            if a > b {
                return Err(format!("empty range {part}"));
            }
            if b - a > 1_000_000 {
                return Err(format!("range {part} is too long"));
            }
            for v in a..=b {
                out.push(T::try_from(v).map_err(|_| format!("{v} out of range"))?);
            }
        } else {
            out.push(parse_one::<T>(part)?);
        }
    }
    if out.is_empty() {
        return Err("expected at least one value".into());
    }
    Ok(out)
}

fn parse_one<T: FromStr>(s: &str) -> Result<T, String> {
    s.trim().parse().map_err(|_| format!("'{s}' is not a valid value"))
}

/// A parsed list flag. Wrapped so clap sees one value, not many.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
#[serde(transparent)]
pub struct List<T>(pub Vec<T>);

impl<T> std::ops::Deref for List<T> {
    type Target = [T];
    fn deref(&self) -> &[T] {
        &self.0
    }
}

pub fn usizes(s: &str) -> Result<List<usize>, String> {
    Ok(List(parse_list::<u32>(s)?.into_iter().map(|v| v as usize).collect()))
}

pub fn u32s(s: &str) -> Result<List<u32>, String> {
    parse_list::<u32>(s).map(List)
}

/// `1/4`, `0.25` is rejected to keep probabilities exact.
pub fn fraction(s: &str) -> Result<Rational, String> {
    parse_fraction(s).ok_or_else(|| format!("'{s}' is not a fraction like 1/4"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists_and_ranges() {
        assert_eq!(*u32s("5,15,25").unwrap(), [5, 15, 25]);
        assert_eq!(*usizes("4..7").unwrap(), [4, 5, 6, 7]);
        assert_eq!(*usizes("1, 3..4").unwrap(), [1, 3, 4]);
        assert!(usizes("7..4").is_err());
        assert!(usizes("x").is_err());
        assert!(usizes("").is_err());
    }

    #[test]
    fn fractions() {
        assert_eq!(fraction("1/4").unwrap(), knperc::rational::ratio(1, 4));
        assert!(fraction("a/b").is_err());
    }
}

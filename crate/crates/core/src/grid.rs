//! Evaluation grids for `n`.
//!
//! Syntax: comma-separated items, each either a single term or a range.
//! A term is an integer (`1000`) or a power (`2^10`). A range `B^a..B^b`
//! steps geometrically by `B`; `x..y` steps by 2; a `:f` suffix overrides the
//! factor (`100..10000:10`). The result is sorted and deduplicated.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NGrid(Vec<u64>);

impl NGrid {
    /// Builds a grid from strictly increasing positive values.
    pub fn new(values: Vec<u64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("n grid is empty"));
        }
        if values[0] == 0 {
            return Err(Error::invalid("n grid values must be positive"));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("n grid must be strictly increasing"));
        }
        Ok(NGrid(values))
    }

    /// `base^lo, base^(lo+1), .., base^hi`.
    pub fn powers(base: u64, lo: u32, hi: u32) -> Result<Self> {
        if base < 2 || lo > hi {
            return Err(Error::invalid(format!(
                "power grid needs base >= 2 and lo <= hi, got {base}^{lo}..{base}^{hi}"
            )));
        }
        let values = (lo..=hi)
            .map(|e| {
                base.checked_pow(e)
                    .ok_or_else(|| Error::invalid(format!("{base}^{e} overflows")))
            })
            .collect::<Result<Vec<_>>>()?;
        NGrid::new(values)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut values = Vec::new();
        for item in text.split(',').map(str::trim) {
            if item.is_empty() {
                return Err(Error::invalid(format!("empty item in n grid {text:?}")));
            }
            match item.split_once("..") {
                None => values.push(parse_term(item)?.0),
                Some((lo, hi)) => {
                    let (hi, factor) = match hi.split_once(':') {
                        Some((hi, f)) => (hi, Some(parse_int(f)?)),
                        None => (hi, None),
                    };
                    let (lo, lo_base) = parse_term(lo)?;
                    let (hi, hi_base) = parse_term(hi)?;
                    let factor = match (factor, lo_base, hi_base) {
                        (Some(f), _, _) => f,
                        (None, Some(a), Some(b)) if a == b => a,
                        _ => 2,
                    };
                    if factor < 2 || lo == 0 || lo > hi {
                        return Err(Error::invalid(format!(
                            "range {item:?} needs 0 < start <= stop and factor >= 2"
                        )));
                    }
                    let mut v = lo;
                    loop {
                        values.push(v);
                        match v.checked_mul(factor) {
                            Some(next) if next <= hi => v = next,
                            _ => break,
                        }
                    }
                }
            }
        }
        values.sort_unstable();
        values.dedup();
        NGrid::new(values)
    }

    pub fn values(&self) -> &[u64] {
        &self.0
    }

    pub fn max(&self) -> u64 {
        *self.0.last().expect("grid is non-empty")
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn parse_int(s: &str) -> Result<u64> {
    s.trim()
        .parse::<u64>()
        .map_err(|e| Error::invalid(format!("bad integer {s:?} in n grid: {e}")))
}

/// Returns the value and, for `B^e` terms, the base `B`.
fn parse_term(s: &str) -> Result<(u64, Option<u64>)> {
    match s.split_once('^') {
        Some((b, e)) => {
            let b = parse_int(b)?;
            let e = u32::try_from(parse_int(e)?)
                .map_err(|_| Error::invalid(format!("exponent too large in {s:?}")))?;
            let v = b
                .checked_pow(e)
                .ok_or_else(|| Error::invalid(format!("{s} overflows")))?;
            Ok((v, Some(b)))
        }
        None => Ok((parse_int(s)?, None)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_geometric_ranges() {
        let g = NGrid::parse("2^10..2^13").unwrap();
        assert_eq!(g.values(), &[1024, 2048, 4096, 8192]);
        let g = NGrid::parse("3^1..3^3").unwrap();
        assert_eq!(g.values(), &[3, 9, 27]);
        let g = NGrid::parse("100..10000:10, 7, 2^2").unwrap();
        assert_eq!(g.values(), &[4, 7, 100, 1000, 10000]);
        let g = NGrid::parse("5..40").unwrap();
        assert_eq!(g.values(), &[5, 10, 20, 40]);
    }

    #[test]
    fn rejects_bad_grids() {
        for bad in [
            "",
            "0",
            "2^100",
            "8..4",
            "1..9:1",
            "a",
            "2^x",
            "1,,2",
            "3^2..2^5:0",
        ] {
            assert!(NGrid::parse(bad).is_err(), "{bad:?} should fail");
        }
        assert!(NGrid::new(vec![3, 3]).is_err());
        assert!(NGrid::powers(2, 3, 2).is_err());
    }
}

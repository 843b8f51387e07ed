//! Exact positive rationals for the stretch parameter `s`.

use num_rational::Ratio;

use crate::error::{Error, Result};

pub type Rational = Ratio<u64>;

/// Parses `2/5`, `0.4` or `3`. Decimals are taken exactly (`0.4 = 2/5`).
pub fn parse_rational(text: &str) -> Result<Rational> {
    let t = text.trim();
    let bad = || {
        Error::invalid(format!(
            "`{text}` is not a non-negative rational (use p/q or a decimal)"
        ))
    };
    let digits_only = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
    if let Some((p, q)) = t.split_once('/') {
        let (p, q) = (p.trim(), q.trim());
        if !digits_only(p) || !digits_only(q) {
            return Err(bad());
        }
        let p: u64 = p.parse().map_err(|_| bad())?;
        let q: u64 = q.parse().map_err(|_| bad())?;
        if q == 0 {
            return Err(Error::invalid(format!("`{text}` has a zero denominator")));
        }
        return Ok(Ratio::new(p, q));
    }
    let (int, frac) = t.split_once('.').unwrap_or((t, ""));
    if !(digits_only(int) || int.is_empty() && digits_only(frac))
        || (!frac.is_empty() && !digits_only(frac))
    {
        return Err(bad());
    }
    if frac.len() > 18 {
        return Err(Error::invalid(format!(
            "`{text}` has more than 18 decimal places"
        )));
    }
    let denom = 10u64.pow(frac.len() as u32);
    let int: u64 = if int.is_empty() {
        0
    } else {
        int.parse().map_err(|_| bad())?
    };
    let frac: u64 = if frac.is_empty() {
        0
    } else {
        frac.parse().map_err(|_| bad())?
    };
    let numer = int
        .checked_mul(denom)
        .and_then(|v| v.checked_add(frac))
        .ok_or_else(bad)?;
    Ok(Ratio::new(numer, denom))
}

/// `floor(s * n)` without rounding error.
pub fn floor_mul(s: &Rational, n: u64) -> u64 {
    let v = *s.numer() as u128 * n as u128 / *s.denom() as u128;
    u64::try_from(v).expect("floor(s n) overflows u64")
}

pub fn to_f64(s: &Rational) -> f64 {
    *s.numer() as f64 / *s.denom() as f64
}

/// `p/q` in lowest terms, or just `p` when `q = 1`.
pub fn format_rational(s: &Rational) -> String {
    if *s.denom() == 1 {
        s.numer().to_string()
    } else {
        format!("{}/{}", s.numer(), s.denom())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_and_decimals() {
        assert_eq!(parse_rational("0.4").unwrap(), Ratio::new(2, 5));
        assert_eq!(parse_rational("2/5").unwrap(), Ratio::new(2, 5));
        assert_eq!(parse_rational("3").unwrap(), Ratio::from_integer(3));
        assert_eq!(parse_rational(".25").unwrap(), Ratio::new(1, 4));
        assert_eq!(parse_rational("1.").unwrap(), Ratio::from_integer(1));
        for bad in [
            "",
            ".",
            "-1",
            "1/0",
            "a",
            "1.2.3",
            "1/2/3",
            "1e3",
            "0.1234567890123456789",
        ] {
            assert!(parse_rational(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn floor_is_exact() {
        let s = parse_rational("0.4").unwrap();
        assert_eq!(floor_mul(&s, 5), 2);
        assert_eq!(floor_mul(&s, 4), 1);
        assert_eq!(floor_mul(&s, 10), 4);
        assert_eq!(format_rational(&s), "2/5");
        assert_eq!(format_rational(&Ratio::from_integer(3)), "3");
    }
}

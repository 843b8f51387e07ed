use std::fmt;

use crate::error::{Error, Result};

/// Largest supported digit alphabet. Digit files store one ASCII digit per byte.
pub const MAX_BASE: u8 = 10;

pub(crate) fn check_base(base: u8) -> Result<()> {
    if (2..=MAX_BASE).contains(&base) {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "base must satisfy 2 <= m <= {MAX_BASE}, got {base}"
        )))
    }
}

/// A finite word over the digit alphabet `{0, .., base-1}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word {
    base: u8,
    digits: Vec<u8>,
}

impl Word {
    pub fn new(base: u8, digits: Vec<u8>) -> Result<Self> {
        check_base(base)?;
        if let Some(pos) = digits.iter().position(|&d| d >= base) {
            return Err(Error::invalid(format!(
                "digit {} at position {} is not below base {}",
                digits[pos], pos, base
            )));
        }
        Ok(Word { base, digits })
    }

    /// Parses a word written as ASCII digits, e.g. `"0110"`.
    pub fn parse(base: u8, text: &str) -> Result<Self> {
        let digits = text
            .bytes()
            .enumerate()
            .map(|(i, b)| {
                if b.is_ascii_digit() {
                    Ok(b - b'0')
                } else {
                    Err(Error::invalid(format!(
                        "character {:?} at position {} is not a digit",
                        b as char, i
                    )))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Word::new(base, digits)
    }

    pub(crate) fn from_digits_unchecked(base: u8, digits: Vec<u8>) -> Self {
        debug_assert!(digits.iter().all(|&d| d < base));
        Word { base, digits }
    }

    pub fn base(&self) -> u8 {
        self.base
    }

    pub fn digits(&self) -> &[u8] {
        &self.digits
    }

    pub fn len(&self) -> usize {
        self.digits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }

    pub fn into_digits(self) -> Vec<u8> {
        self.digits
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &d in &self.digits {
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

/// Advances `digits` to the lexicographic successor in `{0..base}^len`.
/// Returns `false` after the last word (all digits wrap back to zero).
pub(crate) fn next_lex(digits: &mut [u8], base: u8) -> bool {
    for d in digits.iter_mut().rev() {
        if *d + 1 < base {
            *d += 1;
            return true;
        }
        *d = 0;
    }
    false
}

/// `base^len`, or `None` on overflow.
pub(crate) fn word_count(base: u8, len: usize) -> Option<u64> {
    let len = u32::try_from(len).ok()?;
    (base as u64).checked_pow(len)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_display() {
        let w = Word::parse(2, "0110").unwrap();
        assert_eq!(w.digits(), &[0, 1, 1, 0]);
        assert_eq!(w.to_string(), "0110");
        assert!(Word::parse(2, "012").is_err());
        assert!(Word::parse(11, "0").is_err());
        assert!(Word::parse(3, "0a").is_err());
    }

    #[test]
    fn lex_order_enumerates_everything() {
        let mut d = vec![0u8; 3];
        let mut seen = vec![d.clone()];
        while next_lex(&mut d, 3) {
            seen.push(d.clone());
        }
        assert_eq!(seen.len(), 27);
        assert!(seen.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(d, vec![0, 0, 0]);
    }
}

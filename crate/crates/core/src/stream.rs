//! Digit streams: seeded i.i.d. digits, expansions of rationals, explicit
//! buffers and constructed sequences.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::word::check_base;

/// Digits are pulled from streams in blocks of this size by default.
pub const DEFAULT_BLOCK: usize = 1 << 16;

/// A digit generator plugged into a [`DigitStream`]. Implementations must be
/// deterministic and fill `out` completely unless they fail.
pub trait DigitSource: Send {
    fn fill(&mut self, out: &mut [u8]) -> Result<()>;
    fn describe(&self) -> String;
}

enum Mode {
    /// `base = 2^bits`: each 64-bit word yields `64 / bits` digits, low bits first.
    Bits { bits: u32, per_word: u32, mask: u64 },
    /// Other bases: bytes below `limit` (a multiple of the base) are reduced
    /// mod base, the rest rejected.
    Bytes { limit: u8 },
}

struct RandomDigits {
    rng: ChaCha8Rng,
    base: u8,
    mode: Mode,
    word: u64,
    left: u32,
}

impl RandomDigits {
    fn new(base: u8, seed: u64) -> Self {
        let mode = if base.is_power_of_two() {
            let bits = base.trailing_zeros();
            Mode::Bits {
                bits,
                per_word: 64 / bits,
                mask: (1u64 << bits) - 1,
            }
        } else {
            Mode::Bytes {
                limit: (256 - 256 % base as u32) as u8,
            }
        };
        RandomDigits {
            rng: ChaCha8Rng::seed_from_u64(seed),
            base,
            mode,
            word: 0,
            left: 0,
        }
    }

    #[inline]
    fn next_digit(&mut self) -> u8 {
        match self.mode {
            Mode::Bits {
                bits,
                per_word,
                mask,
            } => {
                if self.left == 0 {
                    self.word = self.rng.next_u64();
                    self.left = per_word;
                }
                let d = (self.word & mask) as u8;
                self.word >>= bits;
                self.left -= 1;
                d
            }
            Mode::Bytes { limit } => loop {
                if self.left == 0 {
                    self.word = self.rng.next_u64();
                    self.left = 8;
                }
                let b = self.word as u8;
                self.word >>= 8;
                self.left -= 1;
                if b < limit {
                    return b % self.base;
                }
            },
        }
    }
}

struct RationalDigits {
    base: u64,
    rem: u64,
    den: u64,
}

impl RationalDigits {
    // x_k = floor(m {m^{k-1} x}) via the remainder recurrence r <- m r mod q
    #[inline]
    fn next_digit(&mut self) -> u8 {
        let t = self.rem as u128 * self.base as u128;
        let d = t / self.den as u128;
        self.rem = (t % self.den as u128) as u64;
        d as u8
    }
}

#[allow(clippy::large_enum_variant)] // one per stream
enum Source {
    Random(RandomDigits),
    Rational(RationalDigits),
    Buffer { digits: Vec<u8>, cursor: usize },
    Constructed(Box<dyn DigitSource>),
}

/// A stateful, deterministic sequence of base-m digits `x_1 x_2 ...`.
pub struct DigitStream {
    base: u8,
    position: u64,
    id: String,
    source: Source,
}

impl DigitStream {
    /// I.i.d. uniform digits driven by ChaCha8 seeded with `seed`.
    pub fn seeded(base: u8, seed: u64) -> Result<Self> {
        check_base(base)?;
        Ok(DigitStream {
            base,
            position: 0,
            id: format!("seed:{seed}"),
            source: Source::Random(RandomDigits::new(base, seed)),
        })
    }

    /// Digits of the base-m expansion of `p/q`, `0 <= p < q`.
    pub fn rational(base: u8, p: u64, q: u64) -> Result<Self> {
        check_base(base)?;
        if p >= q {
            return Err(Error::invalid(format!(
                "rational stream needs 0 <= p < q, got {p}/{q}"
            )));
        }
        Ok(DigitStream {
            base,
            position: 0,
            id: format!("rational:{p}/{q}"),
            source: Source::Rational(RationalDigits {
                base: base as u64,
                rem: p,
                den: q,
            }),
        })
    }

    /// A finite, explicit digit sequence.
    pub fn buffer(base: u8, digits: Vec<u8>) -> Result<Self> {
        check_base(base)?;
        if let Some(pos) = digits.iter().position(|&d| d >= base) {
            return Err(Error::invalid(format!(
                "digit {} at index {} is not below base {}",
                digits[pos], pos, base
            )));
        }
        Ok(DigitStream {
            base,
            position: 0,
            id: format!("buffer:{}", digits.len()),
            source: Source::Buffer { digits, cursor: 0 },
        })
    }

    pub fn constructed(base: u8, source: Box<dyn DigitSource>) -> Result<Self> {
        check_base(base)?;
        Ok(DigitStream {
            base,
            position: 0,
            id: format!("constructed:{}", source.describe()),
            source: Source::Constructed(source),
        })
    }

    pub fn base(&self) -> u8 {
        self.base
    }

    /// Number of digits emitted so far.
    pub fn position(&self) -> u64 {
        self.position
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// Fills `out` with the next `out.len()` digits.
    pub fn fill(&mut self, out: &mut [u8]) -> Result<()> {
        match &mut self.source {
            Source::Random(r) => out.iter_mut().for_each(|o| *o = r.next_digit()),
            Source::Rational(r) => out.iter_mut().for_each(|o| *o = r.next_digit()),
            Source::Buffer { digits, cursor } => {
                let available = digits.len() - *cursor;
                if available < out.len() {
                    out[..available].copy_from_slice(&digits[*cursor..]);
                    *cursor = digits.len();
                    self.position += available as u64;
                    return Err(Error::StreamExhausted(self.position));
                }
                out.copy_from_slice(&digits[*cursor..*cursor + out.len()]);
                *cursor += out.len();
            }
            Source::Constructed(c) => c.fill(out)?,
        }
        self.position += out.len() as u64;
        Ok(())
    }

    pub fn next_digits(&mut self, count: usize) -> Result<Vec<u8>> {
        let mut out = vec![0u8; count];
        self.fill(&mut out)?;
        Ok(out)
    }

    /// Packed access for seeded binary streams: each word holds the next 64
    /// digits, digit `j` in bit `j`. Returns `false` (consuming nothing) when
    /// the stream is not a seeded base-2 stream at a 64-digit boundary.
    pub(crate) fn next_packed_bits(&mut self, out: &mut [u64]) -> bool {
        match &mut self.source {
            Source::Random(r) if r.base == 2 && r.left == 0 => {
                out.iter_mut().for_each(|o| *o = r.rng.next_u64());
                self.position += 64 * out.len() as u64;
                true
            }
            _ => false,
        }
    }

    pub(crate) fn supports_packed_bits(&self) -> bool {
        matches!(&self.source, Source::Random(r) if r.base == 2 && r.left == 0)
    }
}

/// Decodes a digit file: one ASCII digit per byte, optionally broken into
/// lines by `\n` or `\r\n`. Every digit must be below `base`.
pub fn parse_digit_file(bytes: &[u8], base: u8) -> Result<Vec<u8>> {
    check_base(base)?;
    let mut digits = Vec::with_capacity(bytes.len());
    let (mut line, mut col) = (1usize, 0usize);
    let mut iter = bytes.iter().enumerate().peekable();
    while let Some((_, &b)) = iter.next() {
        col += 1;
        match b {
            b'\n' => {
                line += 1;
                col = 0;
            }
            b'\r' if matches!(iter.peek(), Some((_, b'\n'))) => {}
            b'0'..=b'9' if b - b'0' < base => digits.push(b - b'0'),
            _ => {
                return Err(Error::invalid(format!(
                    "digit file line {line}, column {col}: byte {:?} is not a base-{base} digit",
                    b as char
                )))
            }
        }
    }
    Ok(digits)
}

/// Encodes digits in the digit-file format, 64 digits per line.
pub fn format_digit_file(digits: &[u8]) -> String {
    let mut out = String::with_capacity(digits.len() + digits.len() / 64 + 1);
    for chunk in digits.chunks(64) {
        out.extend(chunk.iter().map(|&d| (b'0' + d) as char));
        out.push('\n');
    }
    out
}

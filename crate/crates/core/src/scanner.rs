//! Exact evaluation of the maximal run-length function
//! `l_n(x, A) = max{k : x_{i+1} .. x_{i+k} in A_k for some 0 <= i <= n-k}`.
//!
//! [`max_run_naive`] tests windows directly and is the reference. The
//! [`Scanner`] engines track `R_i = max{k : x_{i-k+1} .. x_i in A_k}` digit by
//! digit so that `l_n = max_{i <= n} R_i`:
//!
//! * run counters for constant-run and alphabet-power families,
//! * last-violation tracking for subshifts of finite type,
//! * a KMP automaton over the target prefix for fixed-target families,
//! * binary search over the down-set of admissible suffix lengths for other
//!   subword-closed families (`R_i <= R_{i-1} + 1`).
//!
//! Families that are only prefix-closed are handled by per-start extension,
//! anything else falls back to the naive engine.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::family::{ConstraintFamily, FamilyKind, TargetSource};
use crate::sft::Forbidden;
use crate::stream::{DigitStream, DEFAULT_BLOCK};
use crate::word::MAX_BASE;

/// `l_n` on a grid of `n` values for one stream.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunLengthSeries {
    pub n_grid: Vec<u64>,
    pub values: Vec<u64>,
    pub family_id: String,
    pub stream_id: String,
}

impl RunLengthSeries {
    /// CSV with columns `n,ell_n`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,ell_n\n");
        for (n, l) in self.n_grid.iter().zip(&self.values) {
            out.push_str(&format!("{n},{l}\n"));
        }
        out
    }

    fn new(n_grid: Vec<u64>, values: Vec<u64>, family_id: String, stream_id: String) -> Self {
        debug_assert!(
            values.windows(2).all(|w| w[0] <= w[1]),
            "l_n must be nondecreasing"
        );
        debug_assert!(values.iter().zip(&n_grid).all(|(l, n)| l <= n), "l_n <= n");
        RunLengthSeries {
            n_grid,
            values,
            family_id,
            stream_id,
        }
    }
}

/// Reference evaluation of `l_n` over `digits[..n]` by testing windows from
/// the longest down. Makes no closure assumptions about the family.
pub fn max_run_naive(digits: &[u8], n: usize, family: &ConstraintFamily) -> Result<u64> {
    if n < 1 {
        return Err(Error::invalid("n must be at least 1"));
    }
    if n > digits.len() {
        return Err(Error::invalid(format!(
            "n = {n} exceeds the {} available digits",
            digits.len()
        )));
    }
    let x = &digits[..n];
    if let Some(&d) = x.iter().find(|&&d| d >= family.base()) {
        return Err(Error::invalid(format!(
            "digit {d} is not below base {}",
            family.base()
        )));
    }
    for k in (1..=n).rev() {
        if x.windows(k).any(|w| family.contains_digits(w)) {
            return Ok(k as u64);
        }
    }
    Ok(0)
}

/// Which evaluation strategy a [`Scanner`] uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Engine {
    RunCounter,
    LastViolation,
    TargetAutomaton,
    SuffixSearch,
    PerStart,
    Naive,
}

struct SftTables {
    base: u64,
    /// `(length, base^length, forbidden codes of that length)`
    levels: Vec<(usize, u64, Lookup)>,
}

enum Lookup {
    Bitmap(Vec<bool>),
    Set(HashSet<u64>),
}

impl Lookup {
    #[inline]
    fn contains(&self, code: u64) -> bool {
        match self {
            Lookup::Bitmap(b) => b[code as usize],
            Lookup::Set(s) => s.contains(&code),
        }
    }
}

impl SftTables {
    /// `None` when the rolling codes would not fit in 64 bits.
    fn build(base: u8, forbidden: &Forbidden) -> Option<Self> {
        let m = base as u64;
        let max_len = forbidden.max_len();
        if max_len >= HISTORY {
            return None;
        }
        m.checked_pow(max_len as u32 + 1)?;
        let mut lengths: Vec<usize> = forbidden.words().iter().map(Vec::len).collect();
        lengths.dedup();
        let levels = lengths
            .into_iter()
            .map(|len| {
                let size = m.pow(len as u32);
                let codes = forbidden
                    .words()
                    .iter()
                    .filter(|w| w.len() == len)
                    .map(|w| w.iter().fold(0u64, |c, &d| c * m + d as u64));
                let lookup = if size <= 1 << 22 {
                    let mut bits = vec![false; size as usize];
                    codes.for_each(|c| bits[c as usize] = true);
                    Lookup::Bitmap(bits)
                } else {
                    Lookup::Set(codes.collect())
                };
                (len, size, lookup)
            })
            .collect();
        Some(SftTables { base: m, levels })
    }
}

struct KmpTables {
    y: Vec<u8>,
    /// `border[i]` is the longest proper border of `y[..=i]`.
    border: Vec<usize>,
}

impl KmpTables {
    fn new(y: Vec<u8>) -> Self {
        let mut border = vec![0usize; y.len()];
        let mut k = 0;
        for i in 1..y.len() {
            while k > 0 && y[i] != y[k] {
                k = border[k - 1];
            }
            if y[i] == y[k] {
                k += 1;
            }
            border[i] = k;
        }
        KmpTables { y, border }
    }
}

const HISTORY: usize = 32;

enum Plan {
    Run { good: [bool; MAX_BASE as usize] },
    Sft(SftTables),
    Kmp(KmpTables),
    Suffix,
    PerStart,
    Naive,
}

/// A prepared evaluator of `l_n` for one family and a maximal `n`.
/// Shareable across threads; each scan keeps its own state.
pub struct Scanner<'f> {
    family: &'f ConstraintFamily,
    plan: Plan,
    max_n: u64,
    block: usize,
}

impl<'f> Scanner<'f> {
    /// The incremental engine, which requires verified subword closure (fixed
    /// targets with a constant `y` included).
    pub fn incremental(family: &'f ConstraintFamily, max_n: u64) -> Result<Self> {
        let status = family.closure().subword_closed;
        if !status.is_true() {
            return Err(Error::ClosureRequired {
                operation: "the incremental scanner",
                status,
            });
        }
        Self::auto(family, max_n)
    }

    /// Picks the fastest exact engine the family's verified structure allows.
    pub fn auto(family: &'f ConstraintFamily, max_n: u64) -> Result<Self> {
        let closure = family.closure();
        let plan = match family.kind() {
            FamilyKind::ConstantRun { digit } => {
                let mut good = [false; MAX_BASE as usize];
                good[*digit as usize] = true;
                Plan::Run { good }
            }
            FamilyKind::AlphabetPower { mask, .. } => Plan::Run { good: *mask },
            FamilyKind::Sft { forbidden, .. } => match SftTables::build(family.base(), forbidden) {
                Some(t) => Plan::Sft(t),
                None => Plan::Suffix,
            },
            FamilyKind::FixedTarget(t) => {
                let len = usize::try_from(max_n)
                    .map_err(|_| Error::invalid("max n does not fit in memory"))?;
                Plan::Kmp(KmpTables::new(t.prefix(len)))
            }
            FamilyKind::Custom(_) if closure.subword_closed.is_true() => Plan::Suffix,
            FamilyKind::Custom(_) if closure.prefix_closed.is_true() => Plan::PerStart,
            FamilyKind::Custom(_) => Plan::Naive,
        };
        Ok(Scanner {
            family,
            plan,
            max_n,
            block: DEFAULT_BLOCK,
        })
    }

    /// Forces the naive window-testing engine.
    pub fn naive(family: &'f ConstraintFamily, max_n: u64) -> Self {
        Scanner {
            family,
            plan: Plan::Naive,
            max_n,
            block: DEFAULT_BLOCK,
        }
    }

    /// Forces per-start extension, valid for prefix-closed families.
    pub fn per_start(family: &'f ConstraintFamily, max_n: u64) -> Result<Self> {
        let status = family.closure().prefix_closed;
        if !status.is_true() {
            return Err(Error::invalid(format!(
                "per-start extension needs a prefix-closed family (w_1..w_(k+1) in A_(k+1) implies \
                 w_1..w_k in A_k); prefix closure is {status}"
            )));
        }
        Ok(Scanner {
            family,
            plan: Plan::PerStart,
            max_n,
            block: DEFAULT_BLOCK,
        })
    }

    /// Digits are pulled from the stream in blocks of this size.
    pub fn with_block(mut self, block: usize) -> Self {
        self.block = block.max(1);
        self
    }

    pub fn engine(&self) -> Engine {
        match self.plan {
            Plan::Run { .. } => Engine::RunCounter,
            Plan::Sft(_) => Engine::LastViolation,
            Plan::Kmp(_) => Engine::TargetAutomaton,
            Plan::Suffix => Engine::SuffixSearch,
            Plan::PerStart => Engine::PerStart,
            Plan::Naive => Engine::Naive,
        }
    }

    fn check_grid(&self, grid: &[u64]) -> Result<()> {
        if grid.is_empty() || grid[0] == 0 || grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid(
                "n grid must be non-empty, positive and strictly increasing",
            ));
        }
        if *grid.last().unwrap() > self.max_n {
            return Err(Error::invalid(format!(
                "n = {} exceeds the scanner's maximum {}",
                grid.last().unwrap(),
                self.max_n
            )));
        }
        Ok(())
    }

    fn check_stream(&self, stream: &DigitStream) -> Result<()> {
        if stream.base() != self.family.base() {
            return Err(Error::BaseMismatch {
                family: self.family.base(),
                word: stream.base(),
            });
        }
        Ok(())
    }

    fn streaming(&self) -> Option<Tracker<'_>> {
        Some(match &self.plan {
            Plan::Run { good } => Tracker::Run {
                good: *good,
                run: 0,
            },
            Plan::Sft(t) => Tracker::Sft {
                tables: t,
                codes: vec![0; t.levels.len()],
                history: [0; HISTORY],
                pos: 0,
                barrier: 0,
            },
            Plan::Kmp(t) => Tracker::Kmp { t, state: 0 },
            Plan::Suffix => Tracker::Suffix {
                family: self.family,
                history: Vec::new(),
                r: 0,
            },
            Plan::PerStart | Plan::Naive => return None,
        })
    }

    /// `l_n` for every `n` in `grid`, reading digits `x_1 .. x_max(grid)`
    /// from the stream.
    pub fn scan(&self, stream: &mut DigitStream, grid: &[u64]) -> Result<Vec<u64>> {
        self.check_grid(grid)?;
        self.check_stream(stream)?;
        let Some(mut tracker) = self.streaming() else {
            let n = usize::try_from(*grid.last().unwrap())
                .map_err(|_| Error::invalid("n does not fit in memory"))?;
            let digits = stream.next_digits(n)?;
            return self.scan_materialized(&digits, grid);
        };

        let mut out = Vec::with_capacity(grid.len());
        let mut best = 0u64;
        let mut pos = 0u64;

        if let (Plan::Run { good }, true) = (&self.plan, stream.supports_packed_bits()) {
            if let Tracker::Run { run, .. } = &mut tracker {
                let invert = !good[1];
                let all = good[0] && good[1];
                let packed_end = (grid.last().unwrap() / 64) * 64;
                let mut words = vec![0u64; (self.block / 64).max(1)];
                let mut gi = 0;
                while pos < packed_end {
                    let count = (((packed_end - pos) / 64) as usize).min(words.len());
                    let chunk = &mut words[..count];
                    stream.next_packed_bits(chunk);
                    for &w in chunk.iter() {
                        let mut w = if all {
                            !0
                        } else if invert {
                            !w
                        } else {
                            w
                        };
                        let mut left = 64u32;
                        while left > 0 {
                            let take = if gi < grid.len() && grid[gi] - pos < left as u64 {
                                (grid[gi] - pos) as u32
                            } else {
                                left
                            };
                            scan_bits(w, take, run, &mut best);
                            w = if take == 64 { 0 } else { w >> take };
                            left -= take;
                            pos += take as u64;
                            while gi < grid.len() && grid[gi] == pos {
                                out.push(best);
                                gi += 1;
                            }
                        }
                    }
                }
            }
        }

        let mut buf = vec![0u8; self.block];
        for &g in &grid[out.len()..] {
            while pos < g {
                let take = ((g - pos) as usize).min(buf.len());
                let chunk = &mut buf[..take];
                stream.fill(chunk)?;
                best = best.max(tracker.scan_block(chunk));
                pos += take as u64;
            }
            out.push(best);
        }
        Ok(out)
    }

    /// Calls `f(n, l_n)` for every `n = 1..=total`.
    pub fn scan_each(
        &self,
        stream: &mut DigitStream,
        total: u64,
        mut f: impl FnMut(u64, u64),
    ) -> Result<()> {
        self.check_stream(stream)?;
        if total > self.max_n {
            return Err(Error::invalid(format!(
                "n = {total} exceeds the scanner's maximum {}",
                self.max_n
            )));
        }
        let Some(mut tracker) = self.streaming() else {
            let grid: Vec<u64> = (1..=total).collect();
            let digits = stream.next_digits(total as usize)?;
            for (n, l) in grid.iter().zip(self.scan_materialized(&digits, &grid)?) {
                f(*n, l);
            }
            return Ok(());
        };
        let mut buf = vec![0u8; self.block];
        let mut best = 0u64;
        let mut pos = 0u64;
        while pos < total {
            let take = ((total - pos) as usize).min(buf.len());
            let chunk = &mut buf[..take];
            stream.fill(chunk)?;
            for &d in chunk.iter() {
                best = best.max(tracker.push(d));
                pos += 1;
                f(pos, best);
            }
        }
        Ok(())
    }

    /// `l_n` for each grid point over an in-memory digit slice.
    pub fn scan_digits(&self, digits: &[u8], grid: &[u64]) -> Result<Vec<u64>> {
        self.check_grid(grid)?;
        if *grid.last().unwrap() as usize > digits.len() {
            return Err(Error::invalid("grid extends past the supplied digits"));
        }
        let n = *grid.last().unwrap() as usize;
        let mut stream = DigitStream::buffer(self.family.base(), digits[..n].to_vec())?;
        self.scan(&mut stream, grid)
    }

    fn scan_materialized(&self, digits: &[u8], grid: &[u64]) -> Result<Vec<u64>> {
        match self.plan {
            Plan::PerStart => Ok(per_start(self.family, digits, grid)),
            _ => grid
                .iter()
                .map(|&n| max_run_naive(digits, n as usize, self.family))
                .collect(),
        }
    }
}

/// Longest run of set bits, with `run` carrying the run that ends at the
/// previous bit. Only the low `count` bits of `w` are read.
#[inline]
fn scan_bits(w: u64, count: u32, run: &mut u64, best: &mut u64) {
    if count == 0 {
        return;
    }
    let w = if count == 64 {
        w
    } else {
        w & ((1u64 << count) - 1)
    };
    let full = if count == 64 { !0 } else { (1u64 << count) - 1 };
    if w == full {
        *run += count as u64;
        *best = (*best).max(*run);
        return;
    }
    *run += w.trailing_ones() as u64;
    *best = (*best).max(*run);
    let mut x = w;
    let mut inner = 0u64;
    while x != 0 {
        x &= x >> 1;
        inner += 1;
    }
    *best = (*best).max(inner);
    *run = (w << (64 - count)).leading_ones() as u64;
}

/// `l_n = max_i min(e_i, n - i)` where `e_i` is the longest admissible
/// extension from start `i`; exact for prefix-closed families.
fn per_start(family: &ConstraintFamily, digits: &[u8], grid: &[u64]) -> Vec<u64> {
    let total = *grid.last().unwrap() as usize;
    let x = &digits[..total];
    let ext: Vec<usize> = (0..total)
        .map(|i| {
            let mut k = 0;
            while i + k < total && family.contains_digits(&x[i..i + k + 1]) {
                k += 1;
            }
            k
        })
        .collect();
    grid.iter()
        .map(|&n| {
            let n = n as usize;
            (0..n).map(|i| ext[i].min(n - i)).max().unwrap_or(0) as u64
        })
        .collect()
}

enum Tracker<'p> {
    Run {
        good: [bool; MAX_BASE as usize],
        run: u64,
    },
    Sft {
        tables: &'p SftTables,
        codes: Vec<u64>,
        history: [u8; HISTORY],
        pos: u64,
        barrier: u64,
    },
    Kmp {
        t: &'p KmpTables,
        state: usize,
    },
    Suffix {
        family: &'p ConstraintFamily,
        history: Vec<u8>,
        r: u64,
    },
}

impl Tracker<'_> {
    /// Feeds one digit and returns `R_i`.
    #[inline]
    fn push(&mut self, d: u8) -> u64 {
        match self {
            Tracker::Run { good, run } => {
                *run = if good[d as usize] { *run + 1 } else { 0 };
                *run
            }
            Tracker::Sft {
                tables,
                codes,
                history,
                pos,
                barrier,
            } => {
                let m = tables.base;
                for (code, (len, size, lookup)) in codes.iter_mut().zip(&tables.levels) {
                    let len = *len as u64;
                    let leaving = if *pos >= len {
                        history[((*pos - len) as usize) % HISTORY] as u64
                    } else {
                        0
                    };
                    *code = *code * m + d as u64 - leaving * size;
                    // occurrence covering positions pos-len+2 ..= pos+1 (1-based)
                    if *pos + 1 >= len && lookup.contains(*code) {
                        *barrier = (*barrier).max(*pos + 2 - len);
                    }
                }
                history[(*pos as usize) % HISTORY] = d;
                *pos += 1;
                *pos - *barrier
            }
            Tracker::Kmp { t, state } => {
                let y = &t.y;
                if *state == y.len() {
                    *state = if y.is_empty() {
                        0
                    } else {
                        t.border[*state - 1]
                    };
                }
                while *state > 0 && y[*state] != d {
                    *state = t.border[*state - 1];
                }
                if *state < y.len() && y[*state] == d {
                    *state += 1;
                }
                *state as u64
            }
            Tracker::Suffix { family, history, r } => {
                history.push(d);
                let len = history.len();
                let (mut lo, mut hi) = (0usize, (*r as usize + 1).min(len));
                while lo < hi {
                    let mid = (lo + hi).div_ceil(2);
                    if family.contains_digits(&history[len - mid..]) {
                        lo = mid;
                    } else {
                        hi = mid - 1;
                    }
                }
                *r = lo as u64;
                if history.len() > 2 * lo + 4096 {
                    history.drain(..history.len() - lo);
                }
                *r
            }
        }
    }

    /// Feeds a block and returns the largest `R_i` inside it.
    fn scan_block(&mut self, digits: &[u8]) -> u64 {
        match self {
            Tracker::Run { good, run } => {
                let mut best = 0;
                let mut r = *run;
                for &d in digits {
                    r = if good[d as usize] { r + 1 } else { 0 };
                    best = best.max(r);
                }
                *run = r;
                best
            }
            _ => digits.iter().map(|&d| self.push(d)).max().unwrap_or(0),
        }
    }
}

/// `l_n` on a grid, through the incremental engine. Refuses families whose
/// subword closure is not verified.
pub fn max_run_incremental(
    stream: &mut DigitStream,
    n_grid: &[u64],
    family: &ConstraintFamily,
) -> Result<RunLengthSeries> {
    let max_n = n_grid.last().copied().unwrap_or(0);
    let scanner = Scanner::incremental(family, max_n)?;
    let values = scanner.scan(stream, n_grid)?;
    Ok(RunLengthSeries::new(
        n_grid.to_vec(),
        values,
        family.id(),
        stream.id().to_string(),
    ))
}

/// `l_n` on a grid using the best exact engine for the family.
pub fn max_run(
    stream: &mut DigitStream,
    n_grid: &[u64],
    family: &ConstraintFamily,
) -> Result<RunLengthSeries> {
    let max_n = n_grid.last().copied().unwrap_or(0);
    let scanner = Scanner::auto(family, max_n)?;
    let values = scanner.scan(stream, n_grid)?;
    Ok(RunLengthSeries::new(
        n_grid.to_vec(),
        values,
        family.id(),
        stream.id().to_string(),
    ))
}

fn single(family: &ConstraintFamily, digits: &[u8], n: usize) -> Result<u64> {
    if n < 1 || n > digits.len() {
        return Err(Error::invalid(format!(
            "n = {n} must lie in 1..={}",
            digits.len()
        )));
    }
    Scanner::auto(family, n as u64)?
        .scan_digits(&digits[..n], &[n as u64])
        .map(|v| v[0])
}

/// Longest run of ones in the first `n` binary digits.
pub fn r_n(digits: &[u8], n: usize) -> Result<u64> {
    single(&ConstraintFamily::all_ones(), digits, n)
}

/// Longest run of digits from `subset` in the first `n` base-`base` digits.
pub fn r_n_p(digits: &[u8], n: usize, base: u8, subset: &[u8]) -> Result<u64> {
    single(&ConstraintFamily::alphabet_power(base, subset)?, digits, n)
}

/// Longest prefix of `y` (zero-padded) occurring in the first `n` binary digits.
pub fn r_n_target(digits: &[u8], n: usize, y: &[u8]) -> Result<u64> {
    let family = ConstraintFamily::fixed_target(2, TargetSource::Digits(y.to_vec()))?;
    single(&family, digits, n)
}

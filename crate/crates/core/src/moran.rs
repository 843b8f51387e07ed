//! Slow-growth constructions.
//!
//! *Exceptional streams* concatenate blocks
//! `u v_1 u v_2 .. u v_m xi` where `m = m_k = floor(sqrt(phi(k)))`, `u` is a
//! blocker of length `m` (no extension of length `floor(s m)` is admissible),
//! each `v_i` has length `floor(s m)` and `xi` is a member of `A_m`. Along such
//! a stream `m_(k-1) <= l_n <= 3 (m_k + floor(s m_k))` inside block `k`.
//!
//! *Bounded-run streams* concatenate words of `Sigma_N \ A_N`, which keeps
//! `l_n < 2N` for every `n`.
//!
//! [`dim_lower_bound`] evaluates the homogeneous Moran lower bound
//! `log(n_1 .. n_k) / -log(c_1 .. c_(k+1) n_(k+1))`.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::sync::Arc;

use num_bigint::BigUint;
use num_integer::Roots;
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::census::{count_words, exact_tau, find_blocker};
use crate::error::{Error, Result};
use crate::family::{ConstraintFamily, FamilyKind};
use crate::ratio::{floor_mul, format_rational, to_f64, Rational};
use crate::scanner::Scanner;
use crate::stream::{DigitSource, DigitStream};
use crate::word::{next_lex, word_count};

/// Blockers longer than this are not searched for.
pub const MAX_BLOCKER_LEN: u64 = 64;

/// A nondecreasing positive sequence `phi(k)`, `k >= 1`.
#[derive(Clone, Debug, PartialEq)]
pub enum Phi {
    /// `log2(k + 1)`
    Log2,
    /// `k^alpha`
    Pow(f64),
    /// Explicit values `phi(1), phi(2), ..`.
    Table { label: String, values: Vec<f64> },
}

impl Phi {
    /// Parses `log2`, `pow:<alpha>` or `file:<path>`.
    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        if t == "log2" {
            return Ok(Phi::Log2);
        }
        if let Some(a) = t.strip_prefix("pow:") {
            let alpha: f64 = a
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("phi `{t}`: exponent is not a number")))?;
            if !(alpha.is_finite() && alpha > 0.0) {
                return Err(Error::invalid(format!(
                    "phi `{t}`: exponent must be positive so that phi diverges"
                )));
            }
            return Ok(Phi::Pow(alpha));
        }
        if let Some(path) = t.strip_prefix("file:") {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            return Phi::table(format!("file:{path}"), &text);
        }
        Err(Error::invalid(format!(
            "phi `{t}` is not one of log2, pow:<alpha>, file:<path>"
        )))
    }

    /// Table of values separated by whitespace or commas; `#` starts a comment.
    pub fn table(label: impl Into<String>, text: &str) -> Result<Self> {
        let mut values = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("");
            for item in line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
            {
                let v: f64 = item.parse().map_err(|_| {
                    Error::invalid(format!(
                        "phi table line {}: `{item}` is not a number",
                        i + 1
                    ))
                })?;
                if !v.is_finite() {
                    return Err(Error::invalid(format!(
                        "phi table line {}: `{item}` is not finite",
                        i + 1
                    )));
                }
                values.push(v);
            }
        }
        if values.is_empty() {
            return Err(Error::invalid("phi table is empty"));
        }
        Ok(Phi::Table {
            label: label.into(),
            values,
        })
    }

    /// `phi(k)` for `k >= 1`; `None` past the end of a table.
    pub fn value(&self, k: u64) -> Option<f64> {
        match self {
            Phi::Log2 => Some(((k + 1) as f64).log2()),
            Phi::Pow(a) => Some((k as f64).powf(*a)),
            Phi::Table { values, .. } => k
                .checked_sub(1)
                .and_then(|i| values.get(i as usize))
                .copied(),
        }
    }

    /// Number of terms available, `None` when unbounded.
    pub fn table_len(&self) -> Option<u64> {
        match self {
            Phi::Table { values, .. } => Some(values.len() as u64),
            _ => None,
        }
    }

    /// `floor(sqrt(phi(k)))`, computed exactly where `phi(k)` is an integer
    /// power or a logarithm.
    pub fn sqrt_floor(&self, k: u64) -> Option<u64> {
        match self {
            // m^2 <= log2(k+1)  <=>  m^2 <= floor(log2(k+1))
            Phi::Log2 => Some(((63 - (k + 1).leading_zeros()) as u64).sqrt()),
            Phi::Pow(a) if a.fract() == 0.0 && *a <= 128.0 => {
                match (k as u128).checked_pow(*a as u32) {
                    Some(v) => Some(v.sqrt() as u64),
                    None => Some((k as f64).powf(a / 2.0).floor() as u64),
                }
            }
            _ => self.value(k).map(|v| v.max(0.0).sqrt().floor() as u64),
        }
    }
}

impl fmt::Display for Phi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Phi::Log2 => f.write_str("log2"),
            Phi::Pow(a) => write!(f, "pow:{a}"),
            Phi::Table { label, .. } => f.write_str(label),
        }
    }
}

/// Default ceiling on `phi(k) / (phi(1) + .. + phi(k-1))` at `k = K`.
pub const PHI_RATIO_THRESHOLD: f64 = 0.05;

#[derive(Clone, Debug, PartialEq)]
pub struct PhiFailure {
    pub k: u64,
    pub condition: &'static str,
    pub detail: String,
}

/// Finite-sample check of positivity, monotonicity, growth and
/// `phi(k) / sum_(i<k) phi(i) -> 0` on `k <= K`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhiReport {
    pub k_max: u64,
    pub threshold: f64,
    pub ratio_at_k: f64,
    pub ratio_at_half: f64,
    pub failures: Vec<PhiFailure>,
}

impl PhiReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

impl fmt::Display for PhiReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed() { "pass" } else { "fail" };
        writeln!(
            f,
            "phi check up to K = {} (finite sample): {verdict}; ratio at K = {:.6e}, at K/2 = {:.6e}, threshold {}",
            self.k_max, self.ratio_at_k, self.ratio_at_half, self.threshold
        )?;
        for x in &self.failures {
            writeln!(f, "  k = {}: {} ({})", x.k, x.condition, x.detail)?;
        }
        Ok(())
    }
}

pub fn phi_check(phi: &Phi, k_max: u64, threshold: f64) -> Result<PhiReport> {
    if k_max < 3 {
        return Err(Error::invalid("K must be at least 3"));
    }
    if let Some(len) = phi.table_len() {
        if len < k_max {
            return Err(Error::invalid(format!(
                "phi table has {len} values, K = {k_max} needs more"
            )));
        }
    }
    let mut failures = Vec::new();
    let half_up = k_max.div_ceil(2);
    let mut sum = 0.0;
    let mut prev = f64::NAN;
    let (mut ratio_at_k, mut ratio_at_half) = (f64::NAN, f64::NAN);
    for k in 1..=k_max {
        let v = phi.value(k).expect("length checked");
        if v <= 0.0
            && failures
                .iter()
                .all(|f: &PhiFailure| f.condition != "positive")
        {
            failures.push(PhiFailure {
                k,
                condition: "positive",
                detail: format!("phi({k}) = {v}"),
            });
        }
        if v < prev && failures.iter().all(|f| f.condition != "nondecreasing") {
            failures.push(PhiFailure {
                k,
                condition: "nondecreasing",
                detail: format!("phi({k}) = {v} < phi({}) = {prev}", k - 1),
            });
        }
        if k >= 2 {
            let ratio = v / sum;
            if k == half_up {
                ratio_at_half = ratio;
            }
            if k == k_max {
                ratio_at_k = ratio;
            }
        }
        sum += v;
        prev = v;
    }
    let at_half = phi.value(k_max / 2).expect("length checked");
    let at_k = phi.value(k_max).expect("length checked");
    if at_k <= at_half {
        failures.push(PhiFailure {
            k: k_max,
            condition: "diverging",
            detail: format!(
                "phi({k_max}) = {at_k} does not exceed phi({}) = {at_half}",
                k_max / 2
            ),
        });
    }
    if !(ratio_at_k <= threshold && ratio_at_k < ratio_at_half) {
        failures.push(PhiFailure {
            k: k_max,
            condition: "ratio to partial sums tends to 0",
            detail: format!(
                "phi(K)/sum = {ratio_at_k:.6e} (at K/2: {ratio_at_half:.6e}, threshold {threshold})"
            ),
        });
    }
    Ok(PhiReport {
        k_max,
        threshold,
        ratio_at_k,
        ratio_at_half,
        failures,
    })
}

/// How the filler words `v_i` are chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VRule {
    Zeros,
    Seeded(u64),
}

impl fmt::Display for VRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VRule::Zeros => f.write_str("zeros"),
            VRule::Seeded(s) => write!(f, "seeded:{s}"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExceptionalConfig {
    pub family: ConstraintFamily,
    pub s: Rational,
    pub phi: Phi,
    pub v_rule: VRule,
    /// Membership-test budget for blocker searches on custom families.
    pub budget: u64,
}

impl ExceptionalConfig {
    pub fn new(family: ConstraintFamily, s: Rational, phi: Phi) -> Self {
        ExceptionalConfig {
            family,
            s,
            phi,
            v_rule: VRule::Zeros,
            budget: crate::family::DEFAULT_BUDGET,
        }
    }
}

/// Geometry of one block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockInfo {
    pub k: u64,
    pub m: u64,
    /// `floor(s m)`
    pub ext: u64,
    /// `(m + ext) m + m`
    pub len: u64,
    /// 0-based offset of the block's first digit.
    pub start: u64,
}

/// Resolved construction: first usable index `k0`, blockers and `xi` words.
#[derive(Debug)]
pub struct ExceptionalPlan {
    config: ExceptionalConfig,
    k0: u64,
    /// `m -> u_m`
    blockers: BTreeMap<u64, Vec<u8>>,
    /// `m -> xi_m`
    xis: BTreeMap<u64, Vec<u8>>,
    /// `(m, reason)` for block sizes skipped before `k0`.
    skipped: Vec<(u64, String)>,
}

impl ExceptionalPlan {
    /// Validates the configuration and resolves blockers for every block
    /// size reached by blocks `k0 ..= k_last`.
    pub fn new(config: ExceptionalConfig, k_last: u64) -> Result<Self> {
        let family = &config.family;
        let status = family.closure().subword_closed;
        if !status.is_true() {
            return Err(Error::ClosureRequired {
                operation: "the exceptional-set construction",
                status,
            });
        }
        if *config.s.numer() == 0 {
            return Err(Error::invalid("s must be positive"));
        }
        if let Some(tau) = exact_tau(family) {
            let lhs = (1.0 + to_f64(&config.s)) * tau;
            if lhs >= 1.0 {
                return Err(Error::invalid(format!(
                    "s must satisfy (1 + s) tau < 1; here (1 + {}) * {tau:.6} = {lhs:.6}",
                    format_rational(&config.s)
                )));
            }
        }
        if let Phi::Table { values, .. } = &config.phi {
            if let Some(i) = values.windows(2).position(|w| w[1] < w[0]) {
                return Err(Error::invalid(format!(
                    "phi must be nondecreasing; phi({}) < phi({})",
                    i + 2,
                    i + 1
                )));
            }
        }
        let mut plan = ExceptionalPlan {
            config,
            k0: 0,
            blockers: BTreeMap::new(),
            xis: BTreeMap::new(),
            skipped: Vec::new(),
        };

        // walk the distinct values of m_k; the first with a blocker fixes k0
        let mut k = 1;
        loop {
            let m = plan.m_at(k)?;
            if m > MAX_BLOCKER_LEN {
                return Err(Error::Construction(format!(
                    "no blocker found for any m_k <= {MAX_BLOCKER_LEN}; skipped: {}",
                    plan.skipped_summary()
                )));
            }
            if m >= 1 {
                match plan.resolve(m) {
                    Ok(()) => {
                        plan.k0 = k;
                        break;
                    }
                    Err(Error::BlockerNotFound { reason, .. }) => plan.skipped.push((m, reason)),
                    Err(e) => return Err(e),
                }
            } else {
                plan.skipped.push((0, "m_k = 0".into()));
            }
            k = plan.next_change(k)?;
        }

        let mut k = plan.k0;
        while k <= k_last {
            let m = plan.m_at(k)?;
            plan.resolve(m).map_err(|e| {
                Error::Construction(format!(
                    "block k = {k} needs a blocker of length m_k = {m}: {e}"
                ))
            })?;
            k = plan.next_change(k)?;
        }
        Ok(plan)
    }

    /// Plan covering at least `n_digits` digits.
    pub fn for_digits(config: ExceptionalConfig, n_digits: u64) -> Result<Self> {
        let mut plan = Self::new(config.clone(), 1)?;
        let mut end = 0;
        let mut k = plan.k0;
        while end < n_digits {
            let m = plan.m_at(k)?;
            if !plan.blockers.contains_key(&m) {
                plan.resolve(m).map_err(|e| {
                    Error::Construction(format!(
                        "block k = {k} needs a blocker of length m_k = {m}: {e}"
                    ))
                })?;
            }
            end += block_len(m, floor_mul(&plan.config.s, m));
            k += 1;
        }
        Ok(plan)
    }

    fn m_at(&self, k: u64) -> Result<u64> {
        self.config
            .phi
            .sqrt_floor(k)
            .ok_or_else(|| Error::Construction(format!("phi table ends before k = {k}")))
    }

    /// Smallest `k' > k` with `m_(k') > m_k`.
    fn next_change(&self, k: u64) -> Result<u64> {
        let m = self.m_at(k)?;
        let mut step = 1u64;
        let mut lo = k;
        loop {
            let hi = k
                .checked_add(step)
                .ok_or_else(|| Error::Construction("k overflow".into()))?;
            if self.m_at(hi)? > m {
                let mut hi = hi;
                while hi - lo > 1 {
                    let mid = lo + (hi - lo) / 2;
                    if self.m_at(mid)? > m {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                return Ok(hi);
            }
            lo = hi;
            step *= 2;
        }
    }

    fn resolve(&mut self, m: u64) -> Result<()> {
        if self.blockers.contains_key(&m) {
            return Ok(());
        }
        let family = &self.config.family;
        let u = find_blocker(family, m as usize, &self.config.s, self.config.budget)?;
        let xi = smallest_member(family, m as usize).ok_or_else(|| {
            Error::Construction(format!("A_{m} is empty, no word xi can be planted"))
        })?;
        self.blockers.insert(m, u.into_digits());
        self.xis.insert(m, xi);
        Ok(())
    }

    pub fn config(&self) -> &ExceptionalConfig {
        &self.config
    }

    /// First block index used; smaller indices have no blocker.
    pub fn k0(&self) -> u64 {
        self.k0
    }

    pub fn blockers(&self) -> &BTreeMap<u64, Vec<u8>> {
        &self.blockers
    }

    pub fn xis(&self) -> &BTreeMap<u64, Vec<u8>> {
        &self.xis
    }

    pub fn skipped(&self) -> &[(u64, String)] {
        &self.skipped
    }

    fn skipped_summary(&self) -> String {
        let v: Vec<String> = self
            .skipped
            .iter()
            .map(|(m, r)| format!("m = {m} ({r})"))
            .collect();
        v.join("; ")
    }

    /// Blocks in stream order, starting at `k0`.
    pub fn blocks(&self) -> impl Iterator<Item = BlockInfo> + '_ {
        let mut k = self.k0;
        let mut start = 0u64;
        std::iter::from_fn(move || {
            let m = self.config.phi.sqrt_floor(k)?;
            let ext = floor_mul(&self.config.s, m);
            let info = BlockInfo {
                k,
                m,
                ext,
                len: block_len(m, ext),
                start,
            };
            start += info.len;
            k += 1;
            Some(info)
        })
    }

    /// The stream `w_(k0) w_(k0+1) ..`. Fails once it reaches a block whose
    /// blocker was not resolved by the plan.
    pub fn stream(self: &Arc<Self>) -> Result<DigitStream> {
        let source = ExceptionalSource {
            plan: Arc::clone(self),
            k: self.k0,
            block: Vec::new(),
            offset: 0,
            rng: match self.config.v_rule {
                VRule::Zeros => None,
                VRule::Seeded(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
            },
        };
        DigitStream::constructed(self.config.family.base(), Box::new(source))
    }

    /// Digits of block `k`, with fillers drawn from `rng` when seeded.
    fn block_digits(&self, k: u64, rng: Option<&mut ChaCha8Rng>, out: &mut Vec<u8>) -> Result<()> {
        let m = self.m_at(k)?;
        let ext = floor_mul(&self.config.s, m) as usize;
        let u = self.blockers.get(&m).ok_or_else(|| {
            Error::Construction(format!(
                "block k = {k} (m_k = {m}) lies beyond the planned range"
            ))
        })?;
        let base = self.config.family.base();
        out.clear();
        let mut rng = rng;
        for _ in 0..m {
            out.extend_from_slice(u);
            match rng.as_deref_mut() {
                None => out.extend(std::iter::repeat_n(0, ext)),
                Some(r) => out.extend((0..ext).map(|_| r.gen_range(0..base))),
            }
        }
        out.extend_from_slice(&self.xis[&m]);
        Ok(())
    }

    /// Human-readable provenance: family spec, parameters, `k0` and blockers.
    pub fn provenance(&self) -> String {
        let c = &self.config;
        let mut out = String::new();
        let spec = c
            .family
            .to_spec_string()
            .unwrap_or_else(|_| format!("# {}\n", c.family.id()));
        let _ = writeln!(out, "[family]\n{spec}");
        let _ = writeln!(out, "[construction]");
        let _ = writeln!(out, "s = \"{}\"", format_rational(&c.s));
        let _ = writeln!(out, "phi = \"{}\"", c.phi);
        let _ = writeln!(out, "v_rule = \"{}\"", c.v_rule);
        let _ = writeln!(out, "xi_rule = \"lexicographically smallest\"");
        let _ = writeln!(out, "k0 = {}", self.k0);
        for (m, reason) in &self.skipped {
            let _ = writeln!(out, "# skipped m = {m}: {reason}");
        }
        let _ = writeln!(out, "\n[blockers]");
        let digits = |w: &[u8]| w.iter().map(|d| d.to_string()).collect::<String>();
        for (m, u) in &self.blockers {
            let _ = writeln!(
                out,
                "{m} = {{ u = \"{}\", xi = \"{}\" }}",
                digits(u),
                digits(&self.xis[m])
            );
        }
        out
    }

    /// Branching numbers `n_j` of the first `depth` digits: `1` on blocker and
    /// `xi` positions, the base on filler positions. Contraction ratios are
    /// `1 / base`.
    pub fn moran_params(&self, depth: usize) -> MoranParams {
        let base = self.config.family.base() as u64;
        let mut n_k = Vec::with_capacity(depth);
        for b in self.blocks() {
            if n_k.len() >= depth {
                break;
            }
            for _ in 0..b.m {
                n_k.extend(std::iter::repeat_n(1, b.m as usize));
                n_k.extend(std::iter::repeat_n(base, b.ext as usize));
            }
            n_k.extend(std::iter::repeat_n(1, b.m as usize));
        }
        n_k.truncate(depth);
        MoranParams {
            n_k: SeqRule::Explicit(n_k),
            c_k: SeqRule::Constant(1.0 / base as f64),
            depth,
        }
    }
}

fn block_len(m: u64, ext: u64) -> u64 {
    (m + ext) * m + m
}

/// Lexicographically smallest member of `A_len`, by depth-first search with
/// prefix pruning (valid for the prefix-closed families used here).
fn smallest_member(family: &ConstraintFamily, len: usize) -> Option<Vec<u8>> {
    match family.kind() {
        FamilyKind::ConstantRun { digit } => return Some(vec![*digit; len]),
        FamilyKind::FixedTarget(t) => return Some(t.prefix(len)),
        FamilyKind::AlphabetPower { subset, .. } => return Some(vec![subset[0]; len]),
        _ => {}
    }
    fn go(family: &ConstraintFamily, len: usize, w: &mut Vec<u8>, steps: &mut u64) -> bool {
        if w.len() == len {
            return true;
        }
        for d in 0..family.base() {
            *steps += 1;
            if *steps > crate::family::DEFAULT_BUDGET {
                return false;
            }
            w.push(d);
            if family.contains_digits(w) && go(family, len, w, steps) {
                return true;
            }
            w.pop();
        }
        false
    }
    let mut w = Vec::with_capacity(len);
    go(family, len, &mut w, &mut 0).then_some(w)
}

struct ExceptionalSource {
    plan: Arc<ExceptionalPlan>,
    k: u64,
    block: Vec<u8>,
    offset: usize,
    rng: Option<ChaCha8Rng>,
}

impl DigitSource for ExceptionalSource {
    fn fill(&mut self, out: &mut [u8]) -> Result<()> {
        let mut done = 0;
        while done < out.len() {
            if self.offset == self.block.len() {
                let mut block = std::mem::take(&mut self.block);
                self.plan
                    .block_digits(self.k, self.rng.as_mut(), &mut block)?;
                self.block = block;
                self.offset = 0;
                self.k += 1;
            }
            let take = (out.len() - done).min(self.block.len() - self.offset);
            out[done..done + take].copy_from_slice(&self.block[self.offset..self.offset + take]);
            done += take;
            self.offset += take;
        }
        Ok(())
    }

    fn describe(&self) -> String {
        let c = &self.plan.config;
        format!(
            "exceptional:{}:s={}:phi={}:v={}",
            c.family.id(),
            format_rational(&c.s),
            c.phi,
            c.v_rule
        )
    }
}

/// Per-block summary of a sandwich verification.
#[derive(Clone, Debug, PartialEq)]
pub struct SandwichRow {
    pub k: u64,
    /// 1-based positions covered by this row.
    pub n_start: u64,
    pub n_end: u64,
    pub min_ell: u64,
    pub max_ell: u64,
    /// `m_(k-1)`, or 0 for the first block, where the lower side is not asserted.
    pub bound_lo: u64,
    /// `3 (m_k + floor(s m_k))`
    pub bound_hi: u64,
    pub max_ratio_phi: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SandwichReport {
    pub rows: Vec<SandwichRow>,
    pub n_max: u64,
    pub final_ell: u64,
    /// `(k, m_k)` of the last block that ended at or before `n_max`.
    pub last_complete: Option<(u64, u64)>,
}

impl SandwichReport {
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("k,n_start,n_end,min_ell,max_ell,bound_lo,bound_hi,max_ratio_phi\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{:.12}",
                r.k,
                r.n_start,
                r.n_end,
                r.min_ell,
                r.max_ell,
                r.bound_lo,
                r.bound_hi,
                r.max_ratio_phi
            );
        }
        out
    }
}

/// Scans the first `n_max` digits of a fresh exceptional stream and checks
/// `m_(k-1) <= l_n <= 3 (m_k + floor(s m_k))` for every `n`. The upper side
/// is asserted everywhere, the lower side from the second block on.
pub fn verify_exceptional(
    stream: &mut DigitStream,
    plan: &ExceptionalPlan,
    n_max: u64,
) -> Result<SandwichReport> {
    if stream.position() != 0 {
        return Err(Error::invalid("verification needs a stream at position 0"));
    }
    if n_max == 0 {
        return Err(Error::invalid("N must be at least 1"));
    }
    let family = &plan.config.family;
    let scanner = Scanner::incremental(family, n_max)?;
    let phi = &plan.config.phi;
    let mut blocks = plan.blocks();
    let mut current = blocks
        .next()
        .expect("blocks are unbounded for unbounded phi");
    let mut prev_m: Option<u64> = None;
    let mut rows: Vec<SandwichRow> = Vec::new();
    let mut row = new_row(&current, None);
    let mut last_complete = None;
    let mut final_ell = 0;
    let mut violation = None;

    scanner.scan_each(stream, n_max, |n, ell| {
        if violation.is_some() {
            return;
        }
        while n > current.start + current.len {
            last_complete = Some((current.k, current.m));
            prev_m = Some(current.m);
            current = blocks.next().expect("unbounded");
            rows.push(std::mem::replace(&mut row, new_row(&current, prev_m)));
        }
        if n == current.start + current.len {
            last_complete = Some((current.k, current.m));
        }
        let lo = prev_m.unwrap_or(0);
        if ell < lo || ell > row.bound_hi {
            violation = Some(Error::SandwichViolation {
                n,
                block: current.k,
                ell,
                lo,
                hi: row.bound_hi,
            });
            return;
        }
        row.n_end = n;
        row.min_ell = row.min_ell.min(ell);
        row.max_ell = row.max_ell.max(ell);
        let p = phi.value(n).unwrap_or(f64::NAN);
        row.max_ratio_phi = row.max_ratio_phi.max(ell as f64 / p);
        final_ell = ell;
    })?;
    if let Some(e) = violation {
        return Err(e);
    }
    rows.push(row);
    Ok(SandwichReport {
        rows,
        n_max,
        final_ell,
        last_complete,
    })
}

fn new_row(b: &BlockInfo, prev_m: Option<u64>) -> SandwichRow {
    SandwichRow {
        k: b.k,
        n_start: b.start + 1,
        n_end: b.start,
        min_ell: u64::MAX,
        max_ell: 0,
        bound_lo: prev_m.unwrap_or(0),
        bound_hi: 3 * (b.m + b.ext),
        max_ratio_phi: 0.0,
    }
}

/// Facts about `Sigma_N \ A_N` backing a bounded-run stream.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundedRunReport {
    pub family_id: String,
    pub n: usize,
    pub complement_size: u64,
    pub total: u64,
    /// `(N - 1) / N`, available when the complement has at least `m^(N-1)` words.
    pub dimension_floor: Option<Ratio<u64>>,
    /// `log |Sigma_N \ A_N| / (N log m)`
    pub self_similar_dimension: f64,
    /// Every `l_n` along the stream is below this (`2N`).
    pub run_bound: u64,
}

impl fmt::Display for BoundedRunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "family = {}", self.family_id)?;
        writeln!(f, "N = {}", self.n)?;
        writeln!(
            f,
            "complement_size = {} of {}",
            self.complement_size, self.total
        )?;
        match &self.dimension_floor {
            Some(r) => writeln!(
                f,
                "dimension_floor = {} = {:.6}",
                format_rational(r),
                to_f64(r)
            )?,
            None => writeln!(
                f,
                "dimension_floor = unavailable (complement smaller than m^(N-1))"
            )?,
        }
        writeln!(
            f,
            "self_similar_dimension = {:.12}",
            self.self_similar_dimension
        )?;
        writeln!(f, "run_bound = l_n < {}", self.run_bound)
    }
}

struct BoundedSource {
    words: Vec<Vec<u8>>,
    rng: ChaCha8Rng,
    current: usize,
    offset: usize,
    n: usize,
    seed: u64,
}

impl DigitSource for BoundedSource {
    fn fill(&mut self, out: &mut [u8]) -> Result<()> {
        for d in out.iter_mut() {
            if self.offset == self.n {
                self.current = self.rng.gen_range(0..self.words.len());
                self.offset = 0;
            }
            *d = self.words[self.current][self.offset];
            self.offset += 1;
        }
        Ok(())
    }

    fn describe(&self) -> String {
        format!("bounded:N={}:seed={}", self.n, self.seed)
    }
}

/// A stream of words drawn uniformly (seeded) from `Sigma_N \ A_N`.
/// Enumerating `Sigma_N` must fit in `budget` membership tests.
pub fn build_bounded_run_stream(
    family: &ConstraintFamily,
    n: usize,
    seed: u64,
    budget: u64,
) -> Result<(DigitStream, BoundedRunReport)> {
    let status = family.closure().subword_closed;
    if !status.is_true() {
        return Err(Error::ClosureRequired {
            operation: "the bounded-run construction",
            status,
        });
    }
    if n == 0 {
        return Err(Error::invalid("N must be at least 1"));
    }
    let m = family.base();
    let total = word_count(m, n)
        .filter(|&t| t <= budget)
        .ok_or_else(|| Error::BudgetExceeded {
            budget,
            what: format!("enumerating all words of length N = {n}"),
        })?;
    let mut w = vec![0u8; n];
    let mut words = Vec::new();
    for _ in 0..total {
        if !family.contains_digits(&w) {
            words.push(w.clone());
        }
        next_lex(&mut w, m);
    }
    if words.is_empty() {
        return Err(Error::Construction(format!(
            "every word of length N = {n} lies in A_N; try a larger N"
        )));
    }
    debug_assert_eq!(
        count_words(family, n, budget).ok(),
        Some(BigUint::from(total - words.len() as u64))
    );
    let complement = words.len() as u64;
    let floor_count = word_count(m, n - 1).expect("smaller than total");
    let report = BoundedRunReport {
        family_id: family.id(),
        n,
        complement_size: complement,
        total,
        dimension_floor: (complement >= floor_count).then(|| Ratio::new(n as u64 - 1, n as u64)),
        self_similar_dimension: (complement as f64).ln() / (n as f64 * (m as f64).ln()),
        run_bound: 2 * n as u64,
    };
    let source = BoundedSource {
        words,
        rng: ChaCha8Rng::seed_from_u64(seed),
        current: 0,
        offset: n,
        n,
        seed,
    };
    Ok((DigitStream::constructed(m, Box::new(source))?, report))
}

/// A sequence indexed from 1.
#[derive(Clone, Debug, PartialEq)]
pub enum SeqRule<T> {
    Constant(T),
    Explicit(Vec<T>),
}

impl<T: Copy> SeqRule<T> {
    pub fn get(&self, k: usize) -> Option<T> {
        match self {
            SeqRule::Constant(v) => Some(*v),
            SeqRule::Explicit(v) => k.checked_sub(1).and_then(|i| v.get(i)).copied(),
        }
    }
}

/// Branching numbers `n_k` and contraction ratios `c_k` of a homogeneous
/// Moran set, truncated at `depth`.
#[derive(Clone, Debug, PartialEq)]
pub struct MoranParams {
    pub n_k: SeqRule<u64>,
    pub c_k: SeqRule<f64>,
    pub depth: usize,
}

impl MoranParams {
    pub fn constant(n: u64, c: f64, depth: usize) -> Self {
        MoranParams {
            n_k: SeqRule::Constant(n),
            c_k: SeqRule::Constant(c),
            depth,
        }
    }

    /// Checks `n_k >= 1`, `0 < c_k < 1` and `n_k c_k <= 1` for `k <= depth`.
    pub fn validate(&self) -> Result<()> {
        if self.depth < 2 {
            return Err(Error::invalid("K must be at least 2"));
        }
        for k in 1..=self.depth {
            let n = self
                .n_k
                .get(k)
                .ok_or_else(|| Error::invalid(format!("n_k undefined at k = {k}")))?;
            let c = self
                .c_k
                .get(k)
                .ok_or_else(|| Error::invalid(format!("c_k undefined at k = {k}")))?;
            if n == 0 {
                return Err(Error::invalid(format!("n_k must be at least 1; n_{k} = 0")));
            }
            if !(c > 0.0 && c < 1.0) {
                return Err(Error::invalid(format!(
                    "c_k must satisfy 0 < c_k < 1; c_{k} = {c}"
                )));
            }
            if n as f64 * c > 1.0 + 1e-12 {
                return Err(Error::invalid(format!(
                    "n_k c_k must not exceed 1; n_{k} c_{k} = {n} * {c} = {}",
                    n as f64 * c
                )));
            }
        }
        Ok(())
    }
}

/// `f(k)` for `k = 1 .. K-1` and the minimum over the last half as a tail
/// estimate of the liminf.
#[derive(Clone, Debug, PartialEq)]
pub struct DimBound {
    /// `f[k - 1] = f(k)`
    pub f: Vec<f64>,
    pub tail_estimate: f64,
    /// 1-based range of `k` the tail estimate is taken over.
    pub tail_from: usize,
    pub tail_to: usize,
}

impl DimBound {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,f_k\n");
        for (i, v) in self.f.iter().enumerate() {
            let _ = writeln!(out, "{},{v:.15}", i + 1);
        }
        out
    }
}

/// `f(k) = log(n_1 .. n_k) / -log(c_1 .. c_(k+1) n_(k+1))`, accumulated in
/// log space.
pub fn dim_lower_bound(params: &MoranParams) -> Result<DimBound> {
    params.validate()?;
    let depth = params.depth;
    let mut f = Vec::with_capacity(depth - 1);
    let mut log_n = 0.0;
    let mut log_c = params.c_k.get(1).expect("validated").ln();
    for k in 1..depth {
        log_n += (params.n_k.get(k).expect("validated") as f64).ln();
        log_c += params.c_k.get(k + 1).expect("validated").ln();
        let denom = -(log_c + (params.n_k.get(k + 1).expect("validated") as f64).ln());
        f.push(log_n / denom);
    }
    let tail_from = f.len() / 2 + 1;
    let tail_estimate = f[tail_from - 1..]
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    Ok(DimBound {
        tail_to: f.len(),
        f,
        tail_estimate,
        tail_from,
    })
}

/// The `(n_k, c_k)` sequences of an exceptional construction over its first
/// `depth` digits.
pub fn derive_moran_params(config: ExceptionalConfig, depth: usize) -> Result<MoranParams> {
    let plan = ExceptionalPlan::for_digits(config, depth as u64)?;
    Ok(plan.moran_params(depth))
}

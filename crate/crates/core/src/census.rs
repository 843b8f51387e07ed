//! Exact word counts `|A_k|`, entropy estimates and blocker-word search.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::family::{ConstraintFamily, FamilyKind};
use crate::ratio::{floor_mul, format_rational, Rational};
use crate::sft::SftGraph;
use crate::word::{next_lex, word_count, Word};

/// Relative tolerance for the Perron-root power iteration.
pub const PERRON_TOL: f64 = 1e-12;

/// Natural log of an exact count.
pub fn ln_big(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().expect("fits in f64").ln();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_f64().expect("64-bit value");
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// `|A_k|` for `k = 1..=K`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountTable {
    pub base: u8,
    /// `counts[k - 1] = |A_k|`
    pub counts: Vec<BigUint>,
}

impl CountTable {
    pub fn max_k(&self) -> usize {
        self.counts.len()
    }

    pub fn get(&self, k: usize) -> Option<&BigUint> {
        k.checked_sub(1).and_then(|i| self.counts.get(i))
    }

    /// `log_m |A_k| / k`.
    pub fn tau_k(&self, k: usize) -> Option<f64> {
        self.get(k)
            .filter(|c| !c.is_zero())
            .map(|c| ln_big(c) / (k as f64 * (self.base as f64).ln()))
    }

    /// CSV with columns `k,count,tau_k`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,count,tau_k\n");
        for k in 1..=self.max_k() {
            let tau = self
                .tau_k(k)
                .map_or_else(|| "NaN".into(), |t| format!("{t:.12}"));
            out.push_str(&format!("{k},{},{tau}\n", self.counts[k - 1]));
        }
        out
    }
}

/// Counts members of `A_k` by enumeration. Prefix-closed families are
/// enumerated depth-first with pruning, others word by word; `budget`
/// caps the number of membership tests.
pub fn enumerate_count(family: &ConstraintFamily, k: usize, budget: u64) -> Result<BigUint> {
    if k == 0 {
        return Ok(BigUint::one());
    }
    let m = family.base();
    let over = || {
        Error::CountUnavailable(format!(
            "counting A_{k} of {} needs more than {budget} membership tests",
            family.id()
        ))
    };
    if family.closure().prefix_closed.is_true() {
        let mut tests = 0u64;
        let mut count = 0u64;
        let mut w = Vec::with_capacity(k);
        dfs_count(family, k, &mut w, &mut tests, &mut count, budget).map_err(|_| over())?;
        return Ok(BigUint::from(count));
    }
    let total = word_count(m, k).filter(|&t| t <= budget).ok_or_else(over)?;
    let mut w = vec![0u8; k];
    let mut count = 0u64;
    for _ in 0..total {
        if family.contains_digits(&w) {
            count += 1;
        }
        next_lex(&mut w, m);
    }
    Ok(BigUint::from(count))
}

fn dfs_count(
    family: &ConstraintFamily,
    k: usize,
    w: &mut Vec<u8>,
    tests: &mut u64,
    count: &mut u64,
    budget: u64,
) -> std::result::Result<(), ()> {
    for d in 0..family.base() {
        *tests += 1;
        if *tests > budget {
            return Err(());
        }
        w.push(d);
        if family.contains_digits(w) {
            if w.len() == k {
                *count += 1;
            } else {
                dfs_count(family, k, w, tests, count, budget)?;
            }
        }
        w.pop();
    }
    Ok(())
}

/// Exact `|A_k|`: closed forms for built-in kinds, the transfer matrix for
/// subshifts, enumeration under `budget` for custom predicates.
pub fn count_words(family: &ConstraintFamily, k: usize, budget: u64) -> Result<BigUint> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    Ok(match family.kind() {
        FamilyKind::ConstantRun { .. } | FamilyKind::FixedTarget(_) => BigUint::one(),
        FamilyKind::AlphabetPower { subset, .. } => BigUint::from(subset.len()).pow(k as u32),
        FamilyKind::Sft { graph, .. } => graph.count(k),
        FamilyKind::Custom(_) => enumerate_count(family, k, budget)?,
    })
}

/// `|A_1| .. |A_K|`. For custom predicates the table stops early when the
/// budget runs out; an empty table is an error.
pub fn count_table(family: &ConstraintFamily, max_k: usize, budget: u64) -> Result<CountTable> {
    if max_k == 0 {
        return Err(Error::invalid("K must be at least 1"));
    }
    let counts = match family.kind() {
        FamilyKind::Sft { graph, .. } => graph.counts_up_to(max_k),
        FamilyKind::Custom(_) => {
            let mut counts = Vec::new();
            for k in 1..=max_k {
                match enumerate_count(family, k, budget) {
                    Ok(c) => counts.push(c),
                    Err(Error::CountUnavailable(_)) if !counts.is_empty() => break,
                    Err(e) => return Err(e),
                }
            }
            counts
        }
        _ => (1..=max_k)
            .map(|k| count_words(family, k, budget))
            .collect::<Result<_>>()?,
    };
    Ok(CountTable {
        base: family.base(),
        counts,
    })
}

/// Whether `tau_hat` is the value at `K` or the largest value over the
/// second half of the range.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EntropyMode {
    Limit,
    Limsup,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PerronEstimate {
    pub root: f64,
    /// `log_m root`
    pub tau: f64,
    pub rel_change: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EntropyEstimate {
    /// `tau_sequence[k - 1] = log_m |A_k| / k`
    pub tau_sequence: Vec<f64>,
    pub tau_hat: f64,
    pub tau_perron: Option<PerronEstimate>,
    pub mode: EntropyMode,
    /// Requested depth; `tau_sequence` is shorter when counts ran out.
    pub requested_k: usize,
}

impl EntropyEstimate {
    pub fn is_partial(&self) -> bool {
        self.tau_sequence.len() < self.requested_k
    }

    /// CSV with columns `k,tau_k`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,tau_k\n");
        for (i, t) in self.tau_sequence.iter().enumerate() {
            out.push_str(&format!("{},{t:.12}\n", i + 1));
        }
        out
    }

    /// `key = value` lines summarizing the estimate.
    pub fn summary(&self) -> String {
        let mode = match self.mode {
            EntropyMode::Limit => "limit",
            EntropyMode::Limsup => "limsup",
        };
        let mut out = format!(
            "mode = {mode}\nk = {}\ntau_hat = {:.12}\n",
            self.tau_sequence.len(),
            self.tau_hat
        );
        if self.is_partial() {
            out.push_str(&format!(
                "partial = counts stop before K = {}\n",
                self.requested_k
            ));
        }
        if let Some(p) = &self.tau_perron {
            out.push_str(&format!(
                "perron_root = {:.15}\ntau_perron = {:.15}\nperron_rel_change = {:.3e}\n",
                p.root, p.tau, p.rel_change
            ));
        }
        out
    }
}

pub fn entropy_estimate(
    family: &ConstraintFamily,
    max_k: usize,
    mode: EntropyMode,
    budget: u64,
) -> Result<EntropyEstimate> {
    let table = count_table(family, max_k, budget)?;
    let tau_sequence: Vec<f64> = (1..=table.max_k())
        .map(|k| table.tau_k(k).unwrap_or(f64::NAN))
        .collect();
    let last = tau_sequence.len();
    let tau_hat = match mode {
        EntropyMode::Limit => tau_sequence[last - 1],
        EntropyMode::Limsup => tau_sequence[last / 2..]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max),
    };
    let tau_perron = family.sft_graph().and_then(|g| perron(g, family.base()));
    Ok(EntropyEstimate {
        tau_sequence,
        tau_hat,
        tau_perron,
        mode,
        requested_k: max_k,
    })
}

fn perron(graph: &SftGraph, base: u8) -> Option<PerronEstimate> {
    graph
        .perron_root(PERRON_TOL)
        .map(|(root, rel_change)| PerronEstimate {
            root,
            tau: root.ln() / (base as f64).ln(),
            rel_change,
        })
}

/// The entropy exponent where it is known in closed form (built-in kinds).
pub fn exact_tau(family: &ConstraintFamily) -> Option<f64> {
    let m = family.base() as f64;
    match family.kind() {
        FamilyKind::ConstantRun { .. } | FamilyKind::FixedTarget(_) => Some(0.0),
        FamilyKind::AlphabetPower { subset, .. } => Some((subset.len() as f64).ln() / m.ln()),
        FamilyKind::Sft { graph, .. } => perron(graph, family.base()).map(|p| p.tau),
        FamilyKind::Custom(_) => None,
    }
}

/// The lexicographically smallest `u` of length `n` such that no word
/// `u v` with `|v| = floor(s n)` belongs to `A_(n + floor(s n))`.
pub fn find_blocker(
    family: &ConstraintFamily,
    n: usize,
    s: &Rational,
    budget: u64,
) -> Result<Word> {
    if n == 0 {
        return Err(Error::invalid("blocker length n must be at least 1"));
    }
    if *s.numer() == 0 {
        return Err(Error::invalid("s must be positive"));
    }
    let ext = floor_mul(s, n as u64) as usize;
    let m = family.base();
    let not_found = |reason: &str| Error::BlockerNotFound {
        n,
        s: format_rational(s),
        reason: reason.to_string(),
    };
    let smallest_avoiding = |avoid: &[u8]| {
        let mut u = vec![0u8; n];
        if u == avoid {
            u[n - 1] = 1;
        }
        u
    };
    let digits = match family.kind() {
        FamilyKind::ConstantRun { digit } => smallest_avoiding(&vec![*digit; n]),
        FamilyKind::FixedTarget(t) => smallest_avoiding(&t.prefix(n)),
        FamilyKind::AlphabetPower { mask, .. } => {
            let outside = (0..m).find(|&d| !mask[d as usize]).ok_or_else(|| {
                not_found("the family is the full shift, every extension is admissible")
            })?;
            let mut u = vec![0u8; n];
            u[n - 1] = outside;
            u
        }
        FamilyKind::Sft { forbidden, graph } => {
            if forbidden.is_empty() {
                return Err(not_found(
                    "the family is the full shift, every extension is admissible",
                ));
            }
            SftBlocker::new(family, graph, n, ext)
                .search()
                .ok_or_else(|| {
                    not_found(
                        "every word of this length has an admissible extension; n may be too small",
                    )
                })?
        }
        FamilyKind::Custom(_) => custom_blocker(family, n, ext, budget)?.ok_or_else(|| {
            not_found("every word of this length has an admissible extension; n may be too small")
        })?,
    };
    Word::new(m, digits)
}

struct SftBlocker<'a> {
    family: &'a ConstraintFamily,
    graph: &'a SftGraph,
    n: usize,
    ext: usize,
    alive: Vec<bool>,
    /// `can_block[r][s]`: some completion of `r` digits from state `s` blocks.
    can_block: Vec<Vec<bool>>,
}

impl<'a> SftBlocker<'a> {
    fn new(family: &'a ConstraintFamily, graph: &'a SftGraph, n: usize, ext: usize) -> Self {
        let alive = graph.alive(ext);
        SftBlocker {
            family,
            graph,
            n,
            ext,
            alive,
            can_block: Vec::new(),
        }
    }

    fn search(mut self) -> Option<Vec<u8>> {
        let width = self.graph.width();
        if self.n >= width {
            let states = self.graph.num_states();
            let mut table = vec![self.alive.iter().map(|&a| !a).collect::<Vec<bool>>()];
            for r in 1..=self.n - width {
                let prev = &table[r - 1];
                let row = (0..states)
                    .map(|s| {
                        (0..self.family.base()).any(|d| match self.graph.next_state(s, d) {
                            None => true,
                            Some(t) => prev[t],
                        })
                    })
                    .collect();
                table.push(row);
            }
            self.can_block = table;
        }
        let mut u = Vec::with_capacity(self.n);
        self.dfs(&mut u).then_some(u)
    }

    /// Completes `u` to the smallest blocker, if one extends it.
    fn dfs(&self, u: &mut Vec<u8>) -> bool {
        let m = self.family.base();
        if !self.family.contains_digits(u) {
            u.resize(self.n, 0);
            return true;
        }
        if u.len() == self.n {
            return !self.extendable(u, self.n + self.ext);
        }
        let width = self.graph.width();
        if u.len() >= width {
            let state = self
                .graph
                .state_of(u)
                .expect("allowed word of length >= width");
            if !self.can_block[self.n - u.len()][state] {
                return false;
            }
            // walk the table greedily
            let mut state = state;
            while u.len() < self.n {
                let r = self.n - u.len();
                for d in 0..m {
                    match self.graph.next_state(state, d) {
                        None => {
                            u.push(d);
                            u.resize(self.n, 0);
                            return true;
                        }
                        Some(t) if self.can_block[r - 1][t] => {
                            u.push(d);
                            state = t;
                            break;
                        }
                        Some(_) => {}
                    }
                }
            }
            return true;
        }
        for d in 0..m {
            u.push(d);
            if self.dfs(u) {
                return true;
            }
            u.pop();
        }
        false
    }

    /// Some allowed word of length `total` starts with `p`.
    fn extendable(&self, p: &mut Vec<u8>, total: usize) -> bool {
        if !self.family.contains_digits(p) {
            return false;
        }
        if p.len() == total {
            return true;
        }
        let width = self.graph.width();
        if p.len() >= width {
            let state = self
                .graph
                .state_of(p)
                .expect("allowed word of length >= width");
            let need = total - p.len();
            return if need == self.ext {
                self.alive[state]
            } else {
                self.graph.alive(need)[state]
            };
        }
        for d in 0..self.family.base() {
            p.push(d);
            let ok = self.extendable(p, total);
            p.pop();
            if ok {
                return true;
            }
        }
        false
    }
}

fn custom_blocker(
    family: &ConstraintFamily,
    n: usize,
    ext: usize,
    budget: u64,
) -> Result<Option<Vec<u8>>> {
    let m = family.base();
    let prefix_closed = family.closure().prefix_closed.is_true();
    let total = word_count(m, n).ok_or_else(|| Error::BudgetExceeded {
        budget,
        what: format!("enumerating words of length {n}"),
    })?;
    let mut tests = 0u64;
    let mut u = vec![0u8; n];
    for _ in 0..total {
        if prefix_closed {
            tests += 1;
            if !family.contains_digits(&u) {
                return Ok(Some(u));
            }
        }
        if !has_extension(
            family,
            &mut u.clone(),
            n + ext,
            prefix_closed,
            &mut tests,
            budget,
        )? {
            return Ok(Some(u));
        }
        next_lex(&mut u, m);
    }
    Ok(None)
}

fn has_extension(
    family: &ConstraintFamily,
    w: &mut Vec<u8>,
    total: usize,
    prefix_closed: bool,
    tests: &mut u64,
    budget: u64,
) -> Result<bool> {
    if w.len() == total || prefix_closed {
        *tests += 1;
        if *tests > budget {
            return Err(Error::BudgetExceeded {
                budget,
                what: "blocker search".into(),
            });
        }
        let member = family.contains_digits(w);
        if w.len() == total || !member {
            return Ok(member);
        }
    }
    for d in 0..family.base() {
        w.push(d);
        let found = has_extension(family, w, total, prefix_closed, tests, budget)?;
        w.pop();
        if found {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Outcome of a blocker search, printed as `n=2 s=1 u=00 verified`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockerReport {
    pub n: usize,
    pub s: Rational,
    pub u: Word,
    /// `None` when exhaustive verification exceeded the budget.
    pub verified: Option<bool>,
}

impl std::fmt::Display for BlockerReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let status = match self.verified {
            Some(true) => "verified",
            Some(false) => "REFUTED",
            None => "unverified",
        };
        write!(
            f,
            "n={} s={} u={} {status}",
            self.n,
            format_rational(&self.s),
            self.u
        )
    }
}

/// [`find_blocker`] followed by [`verify_blocker`].
pub fn blocker_report(
    family: &ConstraintFamily,
    n: usize,
    s: &Rational,
    budget: u64,
) -> Result<BlockerReport> {
    let u = find_blocker(family, n, s, budget)?;
    let verified = match verify_blocker(family, &u, floor_mul(s, n as u64) as usize, budget) {
        Ok(v) => Some(v),
        Err(Error::BudgetExceeded { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(BlockerReport {
        n,
        s: *s,
        u,
        verified,
    })
}

/// Checks a blocker by enumerating every extension of length `ext`.
/// Fails with `BudgetExceeded` when `m^ext > budget`.
pub fn verify_blocker(
    family: &ConstraintFamily,
    u: &Word,
    ext: usize,
    budget: u64,
) -> Result<bool> {
    let m = family.base();
    if u.base() != m {
        return Err(Error::BaseMismatch {
            family: m,
            word: u.base(),
        });
    }
    let total =
        word_count(m, ext)
            .filter(|&t| t <= budget)
            .ok_or_else(|| Error::BudgetExceeded {
                budget,
                what: format!("verifying {} extensions of length {ext}", m),
            })?;
    let mut w = u.digits().to_vec();
    w.resize(u.len() + ext, 0);
    for _ in 0..total {
        if family.contains_digits(&w) {
            return Ok(false);
        }
        next_lex(&mut w[u.len()..], m);
    }
    Ok(true)
}

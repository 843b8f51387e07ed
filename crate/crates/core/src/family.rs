//! Constraint families `A = {A_k}`: membership, closure flags and the
//! family-spec file format.

use std::collections::HashSet;
use std::fmt;
use std::sync::{Arc, Mutex};

use serde::Deserialize;
use toml::Spanned;

use crate::error::{Error, Result};
use crate::sft::{Forbidden, SftGraph};
use crate::stream::DigitStream;
use crate::word::{check_base, next_lex, word_count, Word, MAX_BASE};

/// Default cap on the number of words an exhaustive check may visit.
pub const DEFAULT_BUDGET: u64 = 1 << 22;

/// Tri-state outcome of a structural check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Closure {
    VerifiedTrue,
    VerifiedFalse,
    Unverified,
}

impl Closure {
    pub fn is_true(self) -> bool {
        self == Closure::VerifiedTrue
    }
}

impl fmt::Display for Closure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Closure::VerifiedTrue => "verified-true",
            Closure::VerifiedFalse => "verified-false",
            Closure::Unverified => "unverified",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ClosureFlags {
    pub prefix_closed: Closure,
    pub subword_closed: Closure,
}

impl ClosureFlags {
    const CLOSED: ClosureFlags = ClosureFlags {
        prefix_closed: Closure::VerifiedTrue,
        subword_closed: Closure::VerifiedTrue,
    };
    const UNKNOWN: ClosureFlags = ClosureFlags {
        prefix_closed: Closure::Unverified,
        subword_closed: Closure::Unverified,
    };
}

/// Where the digits `y_1 y_2 ...` of a fixed target come from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TargetSource {
    /// Finitely many digits followed by zeros (a terminating expansion).
    Digits(Vec<u8>),
    /// I.i.d. uniform digits from a seeded stream.
    Seed(u64),
    /// The base-m expansion of `p/q`.
    Rational { p: u64, q: u64 },
}

impl fmt::Display for TargetSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetSource::Digits(d) => d.iter().try_for_each(|x| write!(f, "{x}")),
            TargetSource::Seed(s) => write!(f, "seed:{s}"),
            TargetSource::Rational { p, q } => write!(f, "{p}/{q}"),
        }
    }
}

impl TargetSource {
    /// Parses `seed:<u64>`, `<p>/<q>` or a plain digit string.
    pub fn parse(base: u8, text: &str) -> Result<Self> {
        let text = text.trim();
        if let Some(seed) = text.strip_prefix("seed:") {
            let seed = seed
                .trim()
                .parse::<u64>()
                .map_err(|e| Error::invalid(format!("bad target seed {seed:?}: {e}")))?;
            return Ok(TargetSource::Seed(seed));
        }
        if let Some((p, q)) = text.split_once('/') {
            let parse = |s: &str| {
                s.trim()
                    .parse::<u64>()
                    .map_err(|e| Error::invalid(format!("bad rational target {text:?}: {e}")))
            };
            let (p, q) = (parse(p)?, parse(q)?);
            if p >= q {
                return Err(Error::invalid(format!(
                    "rational target needs 0 <= p < q, got {p}/{q}"
                )));
            }
            return Ok(TargetSource::Rational { p, q });
        }
        if text.is_empty() {
            return Err(Error::invalid("target digit string is empty"));
        }
        Ok(TargetSource::Digits(Word::parse(base, text)?.into_digits()))
    }
}

struct TargetMemo {
    stream: Option<DigitStream>,
    prefix: Vec<u8>,
}

/// The target `y` of a fixed-target family, with a lazily extended,
/// internally synchronized prefix cache.
#[derive(Clone)]
pub struct Target {
    base: u8,
    source: TargetSource,
    memo: Arc<Mutex<TargetMemo>>,
}

impl Target {
    pub fn new(base: u8, source: TargetSource) -> Result<Self> {
        check_base(base)?;
        let (stream, prefix) = match &source {
            TargetSource::Digits(d) => {
                if let Some(&bad) = d.iter().find(|&&x| x >= base) {
                    return Err(Error::invalid(format!(
                        "target digit {bad} is not below base {base}"
                    )));
                }
                (None, d.clone())
            }
            TargetSource::Seed(seed) => (Some(DigitStream::seeded(base, *seed)?), Vec::new()),
            TargetSource::Rational { p, q } => {
                (Some(DigitStream::rational(base, *p, *q)?), Vec::new())
            }
        };
        Ok(Target {
            base,
            source,
            memo: Arc::new(Mutex::new(TargetMemo { stream, prefix })),
        })
    }

    pub fn source(&self) -> &TargetSource {
        &self.source
    }

    /// Runs `f` on `y_1 .. y_k`.
    pub fn with_prefix<R>(&self, k: usize, f: impl FnOnce(&[u8]) -> R) -> R {
        let mut memo = self.memo.lock().unwrap_or_else(|p| p.into_inner());
        if memo.prefix.len() < k {
            let missing = k - memo.prefix.len();
            match memo.stream.as_mut() {
                Some(stream) => {
                    let more = stream
                        .next_digits(missing)
                        .expect("seeded and rational streams are infinite");
                    memo.prefix.extend_from_slice(&more);
                }
                None => memo.prefix.resize(k, 0),
            }
        }
        f(&memo.prefix[..k])
    }

    pub fn prefix(&self, k: usize) -> Vec<u8> {
        self.with_prefix(k, <[u8]>::to_vec)
    }

    /// A fixed-target family is subword-closed exactly when `y` is constant.
    fn subword_closure(&self) -> Closure {
        let m = self.base as u64;
        match &self.source {
            TargetSource::Digits(d) => {
                if d.iter().all(|&x| x == 0) {
                    Closure::VerifiedTrue
                } else {
                    Closure::VerifiedFalse
                }
            }
            // constant digit c means p/q = c/(m-1)
            TargetSource::Rational { p, q } => {
                let num = *p as u128 * (m as u128 - 1);
                if num.is_multiple_of(*q as u128) {
                    Closure::VerifiedTrue
                } else {
                    Closure::VerifiedFalse
                }
            }
            TargetSource::Seed(_) => {
                let constant = self.with_prefix(64, |y| y.iter().all(|&x| x == y[0]));
                if constant {
                    Closure::Unverified
                } else {
                    Closure::VerifiedFalse
                }
            }
        }
    }
}

impl PartialEq for Target {
    fn eq(&self, other: &Self) -> bool {
        self.base == other.base && self.source == other.source
    }
}

impl fmt::Debug for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Target")
            .field("base", &self.base)
            .field("source", &self.source)
            .finish()
    }
}

type Predicate = dyn Fn(&[u8]) -> bool + Send + Sync;

/// An opaque membership rule `w -> (w in A_|w|)`.
#[derive(Clone)]
pub struct CustomPredicate {
    name: String,
    pred: Arc<Predicate>,
}

impl CustomPredicate {
    pub fn name(&self) -> &str {
        &self.name
    }
}

impl PartialEq for CustomPredicate {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && Arc::ptr_eq(&self.pred, &other.pred)
    }
}

impl fmt::Debug for CustomPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CustomPredicate({})", self.name)
    }
}

#[derive(Clone)]
pub enum FamilyKind {
    /// `A_k = {d^k}`.
    ConstantRun {
        digit: u8,
    },
    /// `A_k = {y_1 .. y_k}`.
    FixedTarget(Target),
    /// `A_k = S^k` for a digit subset `S`.
    AlphabetPower {
        subset: Vec<u8>,
        mask: [bool; MAX_BASE as usize],
    },
    /// Length-k words containing no forbidden factor.
    Sft {
        forbidden: Forbidden,
        graph: Arc<SftGraph>,
    },
    Custom(CustomPredicate),
}

impl PartialEq for FamilyKind {
    fn eq(&self, other: &Self) -> bool {
        use FamilyKind::*;
        match (self, other) {
            (ConstantRun { digit: a }, ConstantRun { digit: b }) => a == b,
            (FixedTarget(a), FixedTarget(b)) => a == b,
            (AlphabetPower { subset: a, .. }, AlphabetPower { subset: b, .. }) => a == b,
            (Sft { forbidden: a, .. }, Sft { forbidden: b, .. }) => a == b,
            (Custom(a), Custom(b)) => a == b,
            _ => false,
        }
    }
}

impl fmt::Debug for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FamilyKind::ConstantRun { digit } => write!(f, "ConstantRun({digit})"),
            FamilyKind::FixedTarget(t) => write!(f, "FixedTarget({})", t.source),
            FamilyKind::AlphabetPower { subset, .. } => write!(f, "AlphabetPower({subset:?})"),
            FamilyKind::Sft { forbidden, .. } => write!(f, "Sft({:?})", forbidden.words()),
            FamilyKind::Custom(c) => write!(f, "{c:?}"),
        }
    }
}

/// A constraint family together with its base and closure flags.
/// Immutable after construction apart from [`ConstraintFamily::verify_closure`].
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintFamily {
    base: u8,
    kind: FamilyKind,
    closure: ClosureFlags,
}

impl ConstraintFamily {
    pub fn constant_run(base: u8, digit: u8) -> Result<Self> {
        check_base(base)?;
        if digit >= base {
            return Err(Error::invalid(format!(
                "digit {digit} is not below base {base}"
            )));
        }
        Ok(ConstraintFamily {
            base,
            kind: FamilyKind::ConstantRun { digit },
            closure: ClosureFlags::CLOSED,
        })
    }

    /// The Erdős–Rényi family `A_k = {1^k}` in base 2.
    pub fn all_ones() -> Self {
        Self::constant_run(2, 1).expect("valid")
    }

    pub fn fixed_target(base: u8, source: TargetSource) -> Result<Self> {
        let target = Target::new(base, source)?;
        let subword = target.subword_closure();
        Ok(ConstraintFamily {
            base,
            kind: FamilyKind::FixedTarget(target),
            closure: ClosureFlags {
                prefix_closed: Closure::VerifiedTrue,
                subword_closed: subword,
            },
        })
    }

    pub fn alphabet_power(base: u8, subset: &[u8]) -> Result<Self> {
        check_base(base)?;
        if subset.is_empty() {
            return Err(Error::invalid("alphabet subset must be non-empty"));
        }
        let mut mask = [false; MAX_BASE as usize];
        for &d in subset {
            if d >= base {
                return Err(Error::invalid(format!(
                    "subset digit {d} is not below base {base}"
                )));
            }
            if mask[d as usize] {
                return Err(Error::invalid(format!("subset digit {d} repeated")));
            }
            mask[d as usize] = true;
        }
        let subset = (0..base).filter(|&d| mask[d as usize]).collect();
        Ok(ConstraintFamily {
            base,
            kind: FamilyKind::AlphabetPower { subset, mask },
            closure: ClosureFlags::CLOSED,
        })
    }

    /// Subshift of finite type avoiding `forbidden`. An empty list gives the
    /// full shift. Fails when some `A_k` would be empty.
    pub fn sft(base: u8, forbidden: Vec<Vec<u8>>) -> Result<Self> {
        check_base(base)?;
        for w in &forbidden {
            if let Some(&bad) = w.iter().find(|&&d| d >= base) {
                return Err(Error::invalid(format!(
                    "forbidden digit {bad} is not below base {base}"
                )));
            }
        }
        let forbidden = Forbidden::new(forbidden)?;
        let graph = SftGraph::build(base, &forbidden)?;
        if !graph.essential().iter().any(|&e| e) {
            return Err(Error::invalid(
                "forbidden words exclude every long enough word, so some A_k is empty",
            ));
        }
        Ok(ConstraintFamily {
            base,
            kind: FamilyKind::Sft {
                forbidden,
                graph: Arc::new(graph),
            },
            closure: ClosureFlags::CLOSED,
        })
    }

    /// Convenience form of [`ConstraintFamily::sft`] taking digit strings.
    pub fn sft_from_strs(base: u8, forbidden: &[&str]) -> Result<Self> {
        let words = forbidden
            .iter()
            .map(|s| Word::parse(base, s).map(Word::into_digits))
            .collect::<Result<Vec<_>>>()?;
        Self::sft(base, words)
    }

    /// The golden-mean shift: binary words without `11`.
    pub fn golden_mean() -> Self {
        Self::sft(2, vec![vec![1, 1]]).expect("valid")
    }

    /// A family defined by an arbitrary predicate. Closure flags start out
    /// unverified; see [`ConstraintFamily::verify_closure`].
    pub fn custom<F>(base: u8, name: impl Into<String>, pred: F) -> Result<Self>
    where
        F: Fn(&[u8]) -> bool + Send + Sync + 'static,
    {
        check_base(base)?;
        Ok(ConstraintFamily {
            base,
            kind: FamilyKind::Custom(CustomPredicate {
                name: name.into(),
                pred: Arc::new(pred),
            }),
            closure: ClosureFlags::UNKNOWN,
        })
    }

    pub fn base(&self) -> u8 {
        self.base
    }

    pub fn kind(&self) -> &FamilyKind {
        &self.kind
    }

    pub fn closure(&self) -> ClosureFlags {
        self.closure
    }

    pub fn is_builtin(&self) -> bool {
        !matches!(self.kind, FamilyKind::Custom(_))
    }

    pub fn sft_graph(&self) -> Option<&SftGraph> {
        match &self.kind {
            FamilyKind::Sft { graph, .. } => Some(graph),
            _ => None,
        }
    }

    /// Short identifier used in tables, e.g. `sft:b2:11`.
    pub fn id(&self) -> String {
        let b = self.base;
        match &self.kind {
            FamilyKind::ConstantRun { digit } => format!("constant_run:b{b}:{digit}"),
            FamilyKind::FixedTarget(t) => format!("fixed_target:b{b}:{}", t.source),
            FamilyKind::AlphabetPower { subset, .. } => {
                let s: String = subset.iter().map(|d| d.to_string()).collect();
                format!("alphabet_power:b{b}:{s}")
            }
            FamilyKind::Sft { forbidden, .. } => {
                let words: Vec<String> = forbidden
                    .words()
                    .iter()
                    .map(|w| w.iter().map(|d| d.to_string()).collect())
                    .collect();
                format!("sft:b{b}:{}", words.join("|"))
            }
            FamilyKind::Custom(c) => format!("custom:b{b}:{}", c.name),
        }
    }

    /// Membership of `w` in `A_|w|`.
    pub fn contains(&self, w: &Word) -> Result<bool> {
        if w.base() != self.base {
            return Err(Error::BaseMismatch {
                family: self.base,
                word: w.base(),
            });
        }
        Ok(self.contains_digits(w.digits()))
    }

    /// Membership test on raw digits, which must already be below the base.
    /// The empty word is always a member.
    pub fn contains_digits(&self, w: &[u8]) -> bool {
        if w.is_empty() {
            return true;
        }
        match &self.kind {
            FamilyKind::ConstantRun { digit } => w.iter().all(|d| d == digit),
            FamilyKind::FixedTarget(t) => t.with_prefix(w.len(), |y| y == w),
            FamilyKind::AlphabetPower { mask, .. } => w.iter().all(|&d| mask[d as usize]),
            FamilyKind::Sft { forbidden, .. } => !forbidden.occurs_in(w),
            FamilyKind::Custom(c) => (c.pred)(w),
        }
    }

    /// Establishes the closure flags. Built-in kinds are settled analytically;
    /// custom predicates are checked exhaustively over all words of length at
    /// most `k_max`, and a pass there is recorded as verified up to `k_max`.
    pub fn verify_closure(&mut self, k_max: usize, budget: u64) -> Result<ClosureReport> {
        if k_max < 2 {
            return Err(Error::invalid(format!(
                "k_max must be at least 2, got {k_max}"
            )));
        }
        let report = match &self.kind {
            FamilyKind::Custom(_) => exhaustive_closure(self, k_max, budget),
            _ => ClosureReport {
                flags: self.closure,
                k_max,
                analytic: true,
                exhausted_budget: false,
                empty_at: None,
                prefix_counterexample: None,
                subword_counterexample: None,
            },
        };
        self.closure = report.flags;
        Ok(report)
    }

    /// Serializes a built-in family back into the family-spec format.
    pub fn to_spec_string(&self) -> Result<String> {
        let digits = |w: &[u8]| w.iter().map(|d| d.to_string()).collect::<String>();
        let body = match &self.kind {
            FamilyKind::ConstantRun { digit } => {
                format!(
                    "kind = \"constant_run\"\nbase = {}\ndigit = {digit}\n",
                    self.base
                )
            }
            FamilyKind::FixedTarget(t) => format!(
                "kind = \"fixed_target\"\nbase = {}\ntarget = \"{}\"\n",
                self.base, t.source
            ),
            FamilyKind::AlphabetPower { subset, .. } => {
                let items: Vec<String> = subset.iter().map(|d| d.to_string()).collect();
                format!(
                    "kind = \"alphabet_power\"\nbase = {}\nsubset = [{}]\n",
                    self.base,
                    items.join(", ")
                )
            }
            FamilyKind::Sft { forbidden, .. } => {
                let items: Vec<String> = forbidden
                    .words()
                    .iter()
                    .map(|w| format!("\"{}\"", digits(w)))
                    .collect();
                format!(
                    "kind = \"sft\"\nbase = {}\nforbidden = [{}]\n",
                    self.base,
                    items.join(", ")
                )
            }
            FamilyKind::Custom(c) => {
                return Err(Error::invalid(format!(
                    "custom family `{}` has no spec representation",
                    c.name
                )))
            }
        };
        Ok(body)
    }
}

/// Outcome of [`ConstraintFamily::verify_closure`] or [`exhaustive_closure`].
#[derive(Clone, Debug, PartialEq)]
pub struct ClosureReport {
    pub flags: ClosureFlags,
    pub k_max: usize,
    /// Settled by a proof for the family kind rather than by enumeration.
    pub analytic: bool,
    /// The enumeration stopped early; unreached checks stay unverified.
    pub exhausted_budget: bool,
    /// Smallest `k <= k_max` with `A_k` empty, if any.
    pub empty_at: Option<usize>,
    /// A member whose one-shorter prefix is not a member.
    pub prefix_counterexample: Option<Word>,
    /// A member together with one of its factors that is not a member.
    pub subword_counterexample: Option<(Word, Word)>,
}

/// Checks prefix- and subword-closure by enumerating every word of length
/// `<= k_max`. A factor check on the two length-(j-1) factors of each member
/// of `A_j` suffices, since every shorter factor lies inside one of them.
pub fn exhaustive_closure(family: &ConstraintFamily, k_max: usize, budget: u64) -> ClosureReport {
    let m = family.base();
    let mut report = ClosureReport {
        flags: ClosureFlags {
            prefix_closed: Closure::VerifiedTrue,
            subword_closed: Closure::VerifiedTrue,
        },
        k_max,
        analytic: false,
        exhausted_budget: false,
        empty_at: None,
        prefix_counterexample: None,
        subword_counterexample: None,
    };
    let mut visited = 0u64;
    let mut previous: HashSet<Vec<u8>> = HashSet::new();
    for j in 1..=k_max {
        let total = match word_count(m, j) {
            Some(t) if visited.saturating_add(t) <= budget => t,
            _ => {
                report.exhausted_budget = true;
                break;
            }
        };
        visited += total;
        let mut current = HashSet::new();
        let mut w = vec![0u8; j];
        for _ in 0..total {
            if family.contains_digits(&w) {
                if j >= 2 {
                    let prefix = &w[..j - 1];
                    let suffix = &w[1..];
                    if !previous.contains(prefix) {
                        report.flags.prefix_closed = Closure::VerifiedFalse;
                        report
                            .prefix_counterexample
                            .get_or_insert_with(|| Word::from_digits_unchecked(m, w.clone()));
                    }
                    let bad = [prefix, suffix]
                        .into_iter()
                        .find(|f| !previous.contains(*f));
                    if let Some(f) = bad {
                        report.flags.subword_closed = Closure::VerifiedFalse;
                        report.subword_counterexample.get_or_insert_with(|| {
                            (
                                Word::from_digits_unchecked(m, w.clone()),
                                Word::from_digits_unchecked(m, f.to_vec()),
                            )
                        });
                    }
                }
                current.insert(w.clone());
            }
            next_lex(&mut w, m);
        }
        if current.is_empty() && report.empty_at.is_none() {
            report.empty_at = Some(j);
        }
        previous = current;
    }
    if report.exhausted_budget {
        if report.flags.prefix_closed == Closure::VerifiedTrue {
            report.flags.prefix_closed = Closure::Unverified;
        }
        if report.flags.subword_closed == Closure::VerifiedTrue {
            report.flags.subword_closed = Closure::Unverified;
        }
    }
    report
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    kind: Spanned<String>,
    base: Spanned<i64>,
    digit: Option<Spanned<i64>>,
    target: Option<Spanned<String>>,
    subset: Option<Spanned<Vec<i64>>>,
    forbidden: Option<Spanned<Vec<String>>>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn spec_error(text: &str, offset: usize, field: &str, message: impl Into<String>) -> Error {
    Error::Spec {
        line: line_of(text, offset),
        field: field.to_string(),
        message: message.into(),
    }
}

/// Parses a family spec document, e.g.
///
/// ```toml
/// kind = "sft"
/// base = 2
/// forbidden = ["11"]
/// ```
///
/// Accepted kinds and their fields: `constant_run` (`digit`), `fixed_target`
/// (`target`: a digit string, `seed:<n>` or `<p>/<q>`), `alphabet_power`
/// (`subset`) and `sft` (`forbidden`, possibly empty). Unknown fields and
/// fields that do not belong to the kind are rejected.
pub fn parse_family_spec(text: &str) -> Result<ConstraintFamily> {
    let raw: RawSpec = toml::from_str(text).map_err(|e| {
        let offset = e.span().map(|s| s.start).unwrap_or(0);
        let field = e
            .span()
            .and_then(|s| text.get(s))
            .map(str::trim)
            .filter(|f| !f.is_empty() && f.chars().all(|c| c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or("-");
        spec_error(text, offset, field, e.message().to_string())
    })?;

    let base_span = raw.base.span().start;
    let base = u8::try_from(*raw.base.get_ref())
        .ok()
        .filter(|b| (2..=MAX_BASE).contains(b))
        .ok_or_else(|| {
            spec_error(
                text,
                base_span,
                "base",
                format!(
                    "base must be between 2 and {MAX_BASE}, got {}",
                    raw.base.get_ref()
                ),
            )
        })?;

    let kind = raw.kind.get_ref().as_str();
    let allowed: &[&str] = match kind {
        "constant_run" => &["digit"],
        "fixed_target" => &["target"],
        "alphabet_power" => &["subset"],
        "sft" => &["forbidden"],
        other => {
            return Err(spec_error(
                text,
                raw.kind.span().start,
                "kind",
                format!(
                    "unknown kind `{other}` (expected constant_run, fixed_target, alphabet_power or sft)"
                ),
            ))
        }
    };
    let present = [
        ("digit", raw.digit.as_ref().map(|s| s.span().start)),
        ("target", raw.target.as_ref().map(|s| s.span().start)),
        ("subset", raw.subset.as_ref().map(|s| s.span().start)),
        ("forbidden", raw.forbidden.as_ref().map(|s| s.span().start)),
    ];
    for (name, span) in present {
        match (span, allowed.contains(&name)) {
            (Some(at), false) => {
                return Err(spec_error(
                    text,
                    at,
                    name,
                    format!("field `{name}` does not apply to kind `{kind}`"),
                ))
            }
            (None, true) => {
                return Err(spec_error(
                    text,
                    raw.kind.span().start,
                    name,
                    format!("kind `{kind}` requires field `{name}`"),
                ))
            }
            _ => {}
        }
    }

    let digit_in_range = |v: i64, at: usize, field: &str| -> Result<u8> {
        u8::try_from(v).ok().filter(|&d| d < base).ok_or_else(|| {
            spec_error(
                text,
                at,
                field,
                format!("digit {v} out of range for base {base}"),
            )
        })
    };

    match kind {
        "constant_run" => {
            let d = raw.digit.expect("checked");
            let digit = digit_in_range(*d.get_ref(), d.span().start, "digit")?;
            ConstraintFamily::constant_run(base, digit)
        }
        "fixed_target" => {
            let t = raw.target.expect("checked");
            let source = TargetSource::parse(base, t.get_ref())
                .map_err(|e| spec_error(text, t.span().start, "target", e.to_string()))?;
            ConstraintFamily::fixed_target(base, source)
                .map_err(|e| spec_error(text, t.span().start, "target", e.to_string()))
        }
        "alphabet_power" => {
            let s = raw.subset.expect("checked");
            let at = s.span().start;
            let digits = s
                .get_ref()
                .iter()
                .map(|&v| digit_in_range(v, at, "subset"))
                .collect::<Result<Vec<_>>>()?;
            ConstraintFamily::alphabet_power(base, &digits)
                .map_err(|e| spec_error(text, at, "subset", e.to_string()))
        }
        _ => {
            let f = raw.forbidden.expect("checked");
            let at = f.span().start;
            let words = f
                .get_ref()
                .iter()
                .map(|w| {
                    if w.is_empty() {
                        return Err(spec_error(text, at, "forbidden", "forbidden word is empty"));
                    }
                    Word::parse(base, w)
                        .map(Word::into_digits)
                        .map_err(|e| spec_error(text, at, "forbidden", e.to_string()))
                })
                .collect::<Result<Vec<_>>>()?;
            ConstraintFamily::sft(base, words)
                .map_err(|e| spec_error(text, at, "forbidden", e.to_string()))
        }
    }
}

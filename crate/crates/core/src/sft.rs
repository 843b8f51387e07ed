//! Transfer-matrix machinery for subshifts of finite type.
//!
//! States are the allowed words of length `w = M - 1`, where `M` is the
//! longest forbidden word. Appending a digit to a state is an edge when no
//! forbidden word ends at the new position. Every allowed word of length
//! `k >= w` is then exactly one path of `k - w` edges.

use std::collections::HashMap;

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::word::{next_lex, word_count};

/// Upper limit on the number of de Bruijn states we are willing to build.
pub const MAX_STATES: u64 = 1 << 20;

/// Dense matrix powers are used up to this many states; beyond it counts go
/// through repeated sparse vector products.
const DENSE_LIMIT: usize = 64;

/// Finite list of forbidden words over a common base.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Forbidden {
    words: Vec<Vec<u8>>,
    max_len: usize,
}

impl Forbidden {
    pub fn new(mut words: Vec<Vec<u8>>) -> Result<Self> {
        if words.iter().any(|w| w.is_empty()) {
            return Err(Error::invalid("forbidden words must be non-empty"));
        }
        words.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        words.dedup();
        let max_len = words.iter().map(Vec::len).max().unwrap_or(0);
        Ok(Forbidden { words, max_len })
    }

    pub fn words(&self) -> &[Vec<u8>] {
        &self.words
    }

    /// Longest forbidden word length `M` (0 for the full shift).
    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// True when some forbidden word occurs as a factor of `w`.
    pub fn occurs_in(&self, w: &[u8]) -> bool {
        (1..=w.len()).any(|end| self.ends_at(w, end))
    }

    /// True when some forbidden word ends exactly at `w[..end]`.
    pub fn ends_at(&self, w: &[u8], end: usize) -> bool {
        self.words
            .iter()
            .any(|f| f.len() <= end && &w[end - f.len()..end] == f.as_slice())
    }
}

pub struct SftGraph {
    base: u8,
    width: usize,
    forbidden: Forbidden,
    states: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
    /// `succ[s]` lists `(digit, target)` pairs.
    succ: Vec<Vec<(u8, usize)>>,
}

impl SftGraph {
    pub fn build(base: u8, forbidden: &Forbidden) -> Result<Self> {
        let width = forbidden.max_len().saturating_sub(1);
        let total = word_count(base, width)
            .filter(|&c| c <= MAX_STATES)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "forbidden words of length {} in base {} need more than {} transfer-matrix states",
                    forbidden.max_len(),
                    base,
                    MAX_STATES
                ))
            })?;

        let mut states = Vec::new();
        let mut w = vec![0u8; width];
        for _ in 0..total {
            if !forbidden.occurs_in(&w) {
                states.push(w.clone());
            }
            next_lex(&mut w, base);
        }
        let index: HashMap<Vec<u8>, usize> = states
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();

        let mut succ = Vec::with_capacity(states.len());
        let mut ext = vec![0u8; width + 1];
        for s in &states {
            ext[..width].copy_from_slice(s);
            let mut edges = Vec::new();
            for d in 0..base {
                ext[width] = d;
                if !forbidden.ends_at(&ext, width + 1) {
                    let t = index[&ext[1..]];
                    edges.push((d, t));
                }
            }
            succ.push(edges);
        }

        Ok(SftGraph {
            base,
            width,
            forbidden: forbidden.clone(),
            states,
            index,
            succ,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    /// State reached after reading `w` (its last `width` digits), assuming `w`
    /// is allowed and `|w| >= width`.
    pub fn state_of(&self, w: &[u8]) -> Option<usize> {
        if w.len() < self.width {
            return None;
        }
        self.index.get(&w[w.len() - self.width..]).copied()
    }

    /// Number of allowed words of length `k < width`, by direct enumeration.
    fn count_short(&self, k: usize) -> BigUint {
        let total = word_count(self.base, k).expect("k < width keeps counts small");
        let mut w = vec![0u8; k];
        let mut count = 0u64;
        for _ in 0..total {
            if !self.forbidden.occurs_in(&w) {
                count += 1;
            }
            next_lex(&mut w, self.base);
        }
        BigUint::from(count)
    }

    /// Exact number of allowed words of length `k`.
    pub fn count(&self, k: usize) -> BigUint {
        if k < self.width {
            return self.count_short(k);
        }
        let steps = k - self.width;
        if self.num_states() <= DENSE_LIMIT {
            let power = self.dense().pow(steps);
            power.entries.iter().sum()
        } else {
            let mut v = vec![BigUint::one(); self.num_states()];
            for _ in 0..steps {
                v = self.step(&v);
            }
            v.iter().sum()
        }
    }

    /// Counts `|A_1|, .., |A_K|` (index `k - 1`).
    pub fn counts_up_to(&self, max_k: usize) -> Vec<BigUint> {
        let mut out = Vec::with_capacity(max_k);
        for k in 1..=max_k.min(self.width.saturating_sub(1)) {
            out.push(self.count_short(k));
        }
        if max_k < self.width {
            return out;
        }
        // v[s] = number of allowed words of the current length starting in state s
        let mut v = vec![BigUint::one(); self.num_states()];
        if self.width >= 1 {
            out.push(v.iter().sum());
        }
        while out.len() < max_k {
            v = self.step(&v);
            out.push(v.iter().sum());
        }
        out
    }

    /// One step of `v <- A v`.
    fn step(&self, v: &[BigUint]) -> Vec<BigUint> {
        self.succ
            .iter()
            .map(|edges| {
                edges
                    .iter()
                    .fold(BigUint::zero(), |acc, &(_, t)| acc + &v[t])
            })
            .collect()
    }

    fn dense(&self) -> BigMatrix {
        let n = self.num_states();
        let mut m = BigMatrix::zero(n);
        for (s, edges) in self.succ.iter().enumerate() {
            for &(_, t) in edges {
                m.entries[s * n + t] += 1u32;
            }
        }
        m
    }

    /// States lying on a bi-infinite path: repeatedly drop states without
    /// successors or predecessors among the survivors.
    pub fn essential(&self) -> Vec<bool> {
        let n = self.num_states();
        let mut keep = vec![true; n];
        loop {
            let mut has_in = vec![false; n];
            let mut has_out = vec![false; n];
            for s in (0..n).filter(|&s| keep[s]) {
                for &(_, t) in &self.succ[s] {
                    if keep[t] {
                        has_out[s] = true;
                        has_in[t] = true;
                    }
                }
            }
            let mut changed = false;
            for s in 0..n {
                if keep[s] && !(has_in[s] && has_out[s]) {
                    keep[s] = false;
                    changed = true;
                }
            }
            if !changed {
                return keep;
            }
        }
    }

    /// `alive[s]` is true when some path of `len` edges starts at `s`.
    pub fn alive(&self, len: usize) -> Vec<bool> {
        let n = self.num_states();
        let mut alive = vec![true; n];
        for _ in 0..len {
            let next: Vec<bool> = self
                .succ
                .iter()
                .map(|edges| edges.iter().any(|&(_, t)| alive[t]))
                .collect();
            if next == alive {
                break;
            }
            alive = next;
        }
        alive
    }

    /// Successor of state `s` on digit `d`, if that edge exists.
    pub fn next_state(&self, s: usize, d: u8) -> Option<usize> {
        self.succ[s]
            .iter()
            .find(|&&(digit, _)| digit == d)
            .map(|&(_, t)| t)
    }

    /// Perron root of the transition matrix by power iteration on `A + I`
    /// restricted to the essential graph. Returns `(root, relative_change)`
    /// or `None` when the essential graph is empty.
    pub fn perron_root(&self, rel_tol: f64) -> Option<(f64, f64)> {
        let keep = self.essential();
        let ids: Vec<usize> = (0..self.num_states()).filter(|&s| keep[s]).collect();
        if ids.is_empty() {
            return None;
        }
        let mut local = vec![usize::MAX; self.num_states()];
        for (i, &s) in ids.iter().enumerate() {
            local[s] = i;
        }
        let edges: Vec<Vec<usize>> = ids
            .iter()
            .map(|&s| {
                self.succ[s]
                    .iter()
                    .filter(|&&(_, t)| keep[t])
                    .map(|&(_, t)| local[t])
                    .collect()
            })
            .collect();

        let n = ids.len();
        let mut x = vec![1.0f64 / n as f64; n];
        let mut estimate = f64::NAN;
        let mut change = f64::INFINITY;
        let mut settled = 0;
        for _ in 0..1_000_000 {
            let y: Vec<f64> = (0..n)
                .map(|i| x[i] + edges[i].iter().map(|&j| x[j]).sum::<f64>())
                .collect();
            let norm: f64 = y.iter().sum();
            let next = norm - 1.0; // x is 1-normalized, so ||(A+I)x|| - 1 estimates the root
            change = ((next - estimate) / next).abs();
            estimate = next;
            x = y.into_iter().map(|v| v / norm).collect();
            if change <= rel_tol {
                settled += 1;
                if settled >= 3 {
                    break;
                }
            } else {
                settled = 0;
            }
        }
        Some((estimate, change))
    }
}

struct BigMatrix {
    n: usize,
    entries: Vec<BigUint>,
}

impl BigMatrix {
    fn zero(n: usize) -> Self {
        BigMatrix {
            n,
            entries: vec![BigUint::zero(); n * n],
        }
    }

    fn identity(n: usize) -> Self {
        let mut m = Self::zero(n);
        for i in 0..n {
            m.entries[i * n + i] = BigUint::one();
        }
        m
    }

    fn mul(&self, other: &BigMatrix) -> BigMatrix {
        let n = self.n;
        let mut out = BigMatrix::zero(n);
        for i in 0..n {
            for k in 0..n {
                let a = &self.entries[i * n + k];
                if a.is_zero() {
                    continue;
                }
                for j in 0..n {
                    let b = &other.entries[k * n + j];
                    if !b.is_zero() {
                        out.entries[i * n + j] += a * b;
                    }
                }
            }
        }
        out
    }

    fn pow(&self, mut e: usize) -> BigMatrix {
        let mut result = BigMatrix::identity(self.n);
        let mut base = BigMatrix {
            n: self.n,
            entries: self.entries.clone(),
        };
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        result
    }
}

//! Definition-level oracles shared by the integration tests. Nothing here
//! calls the library's membership or scanning code.
#![allow(dead_code)]

use maxrun::{ConstraintFamily, TargetSource};
use rand::Rng;

#[derive(Clone, Debug)]
pub enum Def {
    Const { base: u8, d: u8 },
    Alpha { base: u8, set: Vec<u8> },
    Sft { base: u8, forb: Vec<Vec<u8>> },
    Target { base: u8, y: Vec<u8> },
}

impl Def {
    pub fn base(&self) -> u8 {
        match self {
            Def::Const { base, .. }
            | Def::Alpha { base, .. }
            | Def::Sft { base, .. }
            | Def::Target { base, .. } => *base,
        }
    }

    pub fn contains(&self, w: &[u8]) -> bool {
        match self {
            Def::Const { d, .. } => w.iter().all(|x| x == d),
            Def::Alpha { set, .. } => w.iter().all(|x| set.contains(x)),
            Def::Sft { forb, .. } => {
                // every factor w[i..j] compared against every forbidden word
                for i in 0..w.len() {
                    for j in i + 1..=w.len() {
                        if forb.iter().any(|f| f.as_slice() == &w[i..j]) {
                            return false;
                        }
                    }
                }
                true
            }
            Def::Target { y, .. } => w.len() <= y.len() && &y[..w.len()] == w,
        }
    }

    pub fn family(&self) -> ConstraintFamily {
        match self {
            Def::Const { base, d } => ConstraintFamily::constant_run(*base, *d).unwrap(),
            Def::Alpha { base, set } => ConstraintFamily::alphabet_power(*base, set).unwrap(),
            Def::Sft { base, forb } => ConstraintFamily::sft(*base, forb.clone()).unwrap(),
            Def::Target { base, y } => {
                ConstraintFamily::fixed_target(*base, TargetSource::Digits(y.clone())).unwrap()
            }
        }
    }

    /// A random built-in family; SFTs with an empty essential graph are redrawn.
    pub fn random(rng: &mut impl Rng) -> Def {
        let base = rng.gen_range(2..=4u8);
        loop {
            let def = match rng.gen_range(0..4) {
                0 => Def::Const {
                    base,
                    d: rng.gen_range(0..base),
                },
                1 => {
                    let mut set: Vec<u8> = (0..base).filter(|_| rng.gen_bool(0.5)).collect();
                    if set.is_empty() {
                        set.push(rng.gen_range(0..base));
                    }
                    Def::Alpha { base, set }
                }
                2 => {
                    let count = rng.gen_range(1..=3);
                    let forb = (0..count)
                        .map(|_| {
                            let len = rng.gen_range(1..=3);
                            (0..len).map(|_| rng.gen_range(0..base)).collect()
                        })
                        .collect();
                    Def::Sft { base, forb }
                }
                _ => {
                    // a constant target is the subword-closed case; finite targets
                    // are zero-padded, so the constant must be 0
                    Def::Target {
                        base,
                        y: vec![0; 4096],
                    }
                }
            };
            if let Def::Sft { base, forb } = &def {
                if ConstraintFamily::sft(*base, forb.clone()).is_err() {
                    continue;
                }
            }
            return def;
        }
    }
}

/// `max{k : some window x_(i+1) .. x_(i+k), i + k <= n, is in A_k}`, by
/// trying every window.
pub fn ell_oracle(x: &[u8], n: usize, def: &Def) -> u64 {
    let mut best = 0;
    for i in 0..n {
        for k in (best + 1)..=(n - i) {
            if def.contains(&x[i..i + k]) {
                best = k;
            }
        }
    }
    best as u64
}

/// Whether some `v` of length `ext` puts `u v` in `A`. Depth-first over `v`,
/// cutting a branch once its prefix leaves `A` (all oracle families are
/// prefix-closed).
pub fn has_admissible_extension(def: &Def, u: &[u8], ext: usize) -> bool {
    fn go(def: &Def, w: &mut Vec<u8>, target: usize) -> bool {
        if !def.contains(w) {
            return false;
        }
        if w.len() == target {
            return true;
        }
        for d in 0..def.base() {
            w.push(d);
            let ok = go(def, w, target);
            w.pop();
            if ok {
                return true;
            }
        }
        false
    }
    let mut w = u.to_vec();
    go(def, &mut w, u.len() + ext)
}

/// Fibonacci numbers `F_1 = F_2 = 1` as exact integers.
pub fn fibonacci(k: usize) -> u128 {
    let (mut a, mut b) = (0u128, 1u128);
    for _ in 0..k {
        (a, b) = (b, a + b);
    }
    a
}

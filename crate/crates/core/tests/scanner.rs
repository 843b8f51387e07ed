mod common;

use common::{ell_oracle, Def};
use maxrun::scanner::Engine;
use maxrun::{max_run, ConstraintFamily, DigitStream, NGrid, Scanner, TargetSource};
use num_bigint::BigUint;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn def_strategy() -> impl Strategy<Value = Def> {
    any::<u64>().prop_map(|s| Def::random(&mut ChaCha8Rng::seed_from_u64(s)))
}

fn random_digits(base: u8, len: usize, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.gen_range(0..base)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn incremental_matches_window_oracle(def in def_strategy(), seed in any::<u64>(), n in 1usize..=160) {
        let family = def.family();
        let x = random_digits(def.base(), n, seed);
        let grid: Vec<u64> = (1..=n as u64).collect();
        let got = Scanner::auto(&family, n as u64).unwrap().scan_digits(&x, &grid).unwrap();
        for (i, &g) in grid.iter().enumerate() {
            prop_assert_eq!(got[i], ell_oracle(&x, g as usize, &def), "n = {}", g);
        }
    }

    #[test]
    fn engines_agree_with_naive(def in def_strategy(), seed in any::<u64>(), n in 1u64..=2000) {
        let family = def.family();
        let x = random_digits(def.base(), n as usize, seed);
        let grid = [(n / 3).max(1), (n / 2).max(1), n];
        let grid: Vec<u64> = { let mut g = grid.to_vec(); g.dedup(); g };
        let naive = Scanner::naive(&family, n).scan_digits(&x, &grid).unwrap();
        let per_start = Scanner::per_start(&family, n).unwrap().scan_digits(&x, &grid).unwrap();
        let auto = Scanner::auto(&family, n).unwrap().scan_digits(&x, &grid).unwrap();
        prop_assert_eq!(&naive, &per_start);
        prop_assert_eq!(&naive, &auto);
        if family.closure().subword_closed.is_true() {
            let inc = Scanner::incremental(&family, n).unwrap().scan_digits(&x, &grid).unwrap();
            prop_assert_eq!(&naive, &inc);
        }
    }

    #[test]
    fn series_is_monotone_and_bounded_by_n(def in def_strategy(), seed in any::<u64>(), hi in 1u32..=12) {
        let family = def.family();
        let grid = NGrid::powers(2, 0, hi).unwrap();
        let mut stream = DigitStream::seeded(def.base(), seed).unwrap();
        let series = max_run(&mut stream, grid.values(), &family).unwrap();
        for (i, &v) in series.values.iter().enumerate() {
            prop_assert!(v <= grid.values()[i]);
            if i > 0 {
                prop_assert!(v >= series.values[i - 1]);
            }
        }
    }

    #[test]
    fn planted_words_are_found(seed in any::<u64>(), k in 1usize..=40, at in 0usize..500) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let def = Def::random(&mut rng);
        let family = def.family();
        // build a member of A_k by extending digit by digit
        let mut w = Vec::new();
        'grow: while w.len() < k {
            for d in 0..def.base() {
                w.push(d);
                if def.contains(&w) {
                    continue 'grow;
                }
                w.pop();
            }
            break;
        }
        let mut x = random_digits(def.base(), 1000, seed ^ 1);
        x[at..at + w.len()].copy_from_slice(&w);
        let n = (at + w.len()) as u64;
        let got = Scanner::auto(&family, 1000).unwrap().scan_digits(&x, &[n, 1000]).unwrap();
        prop_assert!(got[0] >= w.len() as u64);
        prop_assert!(got[1] >= got[0]);
    }

    #[test]
    fn rational_digits_match_long_division(base in 2u8..=10, q in 2u64..=1_000_000, p_frac in 0.0f64..1.0) {
        let p = ((q as f64 * p_frac) as u64).min(q - 1);
        let digits = DigitStream::rational(base, p, q).unwrap().next_digits(64).unwrap();
        let m = BigUint::from(base);
        let (p, q) = (BigUint::from(p), BigUint::from(q));
        for k in 1..=64u32 {
            // floor(m^k x) - m floor(m^(k-1) x)
            let hi = &p * m.pow(k) / &q;
            let lo = &p * m.pow(k - 1) / &q;
            let d = hi - &m * lo;
            prop_assert_eq!(d, BigUint::from(digits[k as usize - 1]));
        }
    }
}

#[test]
fn stream_and_buffer_scans_agree_across_blocks() {
    let family = ConstraintFamily::golden_mean();
    let grid = NGrid::parse("2^4..2^18").unwrap();
    let x = DigitStream::seeded(2, 7)
        .unwrap()
        .next_digits(1 << 18)
        .unwrap();
    let whole = Scanner::auto(&family, 1 << 18)
        .unwrap()
        .scan_digits(&x, grid.values())
        .unwrap();
    for block in [1usize, 7, 64, 4096] {
        let mut s = DigitStream::seeded(2, 7).unwrap();
        let got = Scanner::auto(&family, 1 << 18)
            .unwrap()
            .with_block(block)
            .scan(&mut s, grid.values())
            .unwrap();
        assert_eq!(got, whole, "block {block}");
    }
}

#[test]
fn scan_each_reports_every_prefix() {
    let family = ConstraintFamily::all_ones();
    let x = DigitStream::seeded(2, 3)
        .unwrap()
        .next_digits(3000)
        .unwrap();
    let mut seen = Vec::new();
    Scanner::auto(&family, 3000)
        .unwrap()
        .scan_each(
            &mut DigitStream::buffer(2, x.clone()).unwrap(),
            3000,
            |n, ell| seen.push((n, ell)),
        )
        .unwrap();
    assert_eq!(seen.len(), 3000);
    let def = Def::Const { base: 2, d: 1 };
    for &(n, ell) in seen.iter().step_by(97) {
        assert_eq!(ell, ell_oracle(&x, n as usize, &def));
    }
}

#[test]
fn non_constant_target_uses_a_general_engine() {
    let family = ConstraintFamily::fixed_target(3, TargetSource::Seed(5)).unwrap();
    assert!(Scanner::incremental(&family, 100).is_err());
    let s = Scanner::auto(&family, 100).unwrap();
    assert_ne!(s.engine(), Engine::Naive);
}

#[test]
fn grids_must_be_increasing_and_within_the_digits() {
    let family = ConstraintFamily::golden_mean();
    let s = Scanner::auto(&family, 100).unwrap();
    assert!(s.scan_digits(&[0; 10], &[5, 3]).is_err());
    assert!(s.scan_digits(&[0; 10], &[11]).is_err());
    assert!(s.scan_digits(&[0, 2], &[2]).is_err());
    assert!(NGrid::parse("2^5..2^3").is_err());
    assert_eq!(NGrid::parse("2^2..2^4").unwrap().values(), &[4, 8, 16]);
}

#[test]
fn csv_has_the_documented_columns() {
    let family = ConstraintFamily::golden_mean();
    let mut s = DigitStream::seeded(2, 1).unwrap();
    let series = max_run(&mut s, &[10, 100], &family).unwrap();
    let csv = series.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("n,ell_n"));
    assert_eq!(lines.count(), 2);
}

mod common;

use common::{fibonacci, has_admissible_extension, Def};
use maxrun::census::{self, count_table, count_words, enumerate_count, EntropyMode};
use maxrun::family::DEFAULT_BUDGET;
use maxrun::ratio::{floor_mul, parse_rational};
use maxrun::{ConstraintFamily, Error};
use num_bigint::BigUint;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// |A_k| by depth-first search with the definition-level oracle.
fn dfs_count(def: &Def, k: usize) -> u64 {
    fn go(def: &Def, w: &mut Vec<u8>, k: usize) -> u64 {
        if !def.contains(w) {
            return 0;
        }
        if w.len() == k {
            return 1;
        }
        (0..def.base())
            .map(|d| {
                w.push(d);
                let c = go(def, w, k);
                w.pop();
                c
            })
            .sum()
    }
    go(def, &mut Vec::new(), k)
}

fn sft_strategy() -> impl Strategy<Value = (u8, Vec<Vec<u8>>)> {
    (2u8..=4).prop_flat_map(|base| {
        let word = prop::collection::vec(0..base, 1..=4);
        (Just(base), prop::collection::vec(word, 1..=4))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transfer_counts_equal_enumeration((base, forb) in sft_strategy()) {
        let Ok(family) = ConstraintFamily::sft(base, forb) else { return Ok(()) };
        for k in 1..=16 {
            let fast = count_words(&family, k, DEFAULT_BUDGET).unwrap();
            match enumerate_count(&family, k, 1 << 20) {
                Ok(slow) => prop_assert_eq!(fast, slow, "k = {}", k),
                // growth beyond the enumeration budget; larger k only gets bigger
                Err(Error::CountUnavailable(_)) => break,
                Err(e) => panic!("{e}"),
            }
        }
    }

    #[test]
    fn counts_grow_by_at_most_the_base(seed in any::<u64>()) {
        let def = Def::random(&mut ChaCha8Rng::seed_from_u64(seed));
        let family = def.family();
        let table = count_table(&family, 24, DEFAULT_BUDGET).unwrap();
        let m = BigUint::from(def.base());
        for k in 1..24 {
            prop_assert!(table.get(k + 1).unwrap() <= &(&m * table.get(k).unwrap()));
        }
        for k in 1..=8 {
            prop_assert_eq!(table.get(k).unwrap(), &BigUint::from(dfs_count(&def, k)));
        }
    }

    #[test]
    fn blockers_admit_no_extension(seed in any::<u64>(), n in 1usize..=12, s_idx in 0usize..5) {
        let def = Def::random(&mut ChaCha8Rng::seed_from_u64(seed));
        let family = def.family();
        let s = parse_rational(["1/3", "1/2", "1", "3/2", "2"][s_idx]).unwrap();
        let ext = floor_mul(&s, n as u64) as usize;
        prop_assume!(n + ext <= 24);
        if let Ok(u) = census::find_blocker(&family, n, &s, DEFAULT_BUDGET) {
            prop_assert_eq!(u.len(), n);
            prop_assert!(!has_admissible_extension(&def, u.digits(), ext));
        }
    }
}

#[test]
fn golden_mean_counts_are_fibonacci() {
    let g = ConstraintFamily::golden_mean();
    let table = count_table(&g, 30, DEFAULT_BUDGET).unwrap();
    for k in 1..=30 {
        assert_eq!(
            table.get(k).unwrap(),
            &BigUint::from(fibonacci(k + 2)),
            "k = {k}"
        );
    }
}

#[test]
fn count_csv_columns() {
    let csv = count_table(&ConstraintFamily::golden_mean(), 3, DEFAULT_BUDGET)
        .unwrap()
        .to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "k,count,tau_k");
    assert!(lines[1].starts_with("1,2,1.0"));
    assert!(lines[3].starts_with("3,5,"));
}

#[test]
fn entropy_of_simple_families() {
    let full = ConstraintFamily::alphabet_power(4, &[0, 1, 2, 3]).unwrap();
    let e = census::entropy_estimate(&full, 10, EntropyMode::Limit, DEFAULT_BUDGET).unwrap();
    assert!((e.tau_hat - 1.0).abs() < 1e-12);
    let half = ConstraintFamily::alphabet_power(4, &[1, 3]).unwrap();
    assert!((census::exact_tau(&half).unwrap() - 0.5).abs() < 1e-12);
    assert_eq!(census::exact_tau(&ConstraintFamily::all_ones()), Some(0.0));

    let g = ConstraintFamily::golden_mean();
    let e = census::entropy_estimate(&g, 40, EntropyMode::Limsup, DEFAULT_BUDGET).unwrap();
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let p = e.tau_perron.unwrap();
    assert!((p.root - phi).abs() < 1e-10);
    // tau_k = log2 F_(k+2) / k decreases towards log2 phi from above
    assert!(e.tau_sequence.windows(2).all(|w| w[1] <= w[0] + 1e-15));
    assert!(e.tau_hat >= p.tau);
}

#[test]
fn blocker_examples() {
    let s = parse_rational("1").unwrap();
    let ones = ConstraintFamily::all_ones();
    let r = census::blocker_report(&ones, 2, &s, DEFAULT_BUDGET).unwrap();
    assert_eq!(r.to_string(), "n=2 s=1 u=00 verified");
    let full = ConstraintFamily::sft(2, vec![]).unwrap();
    assert!(census::find_blocker(&full, 3, &s, DEFAULT_BUDGET).is_err());
}

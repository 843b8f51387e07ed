mod common;

use std::sync::Arc;

use common::{ell_oracle, Def};
use maxrun::family::DEFAULT_BUDGET;
use maxrun::moran::{
    build_bounded_run_stream, derive_moran_params, dim_lower_bound, phi_check, verify_exceptional,
    ExceptionalConfig, ExceptionalPlan, MoranParams, Phi, SeqRule, VRule, PHI_RATIO_THRESHOLD,
};
use maxrun::ratio::parse_rational;
use maxrun::{ConstraintFamily, Error, Scanner, TargetSource};
use proptest::prelude::*;

fn plan(family: ConstraintFamily, s: &str, n: u64, v_rule: VRule) -> Arc<ExceptionalPlan> {
    let mut config = ExceptionalConfig::new(family, parse_rational(s).unwrap(), Phi::Log2);
    config.v_rule = v_rule;
    Arc::new(ExceptionalPlan::for_digits(config, n).unwrap())
}

#[test]
fn sandwich_holds_for_each_builtin_kind() {
    let n_max = 10_000_000;
    for (family, s) in [
        (ConstraintFamily::constant_run(3, 2).unwrap(), "2"),
        (ConstraintFamily::alphabet_power(3, &[0, 1]).unwrap(), "1/2"),
        (ConstraintFamily::alphabet_power(10, &[3]).unwrap(), "5"),
        (
            ConstraintFamily::fixed_target(2, TargetSource::Digits(vec![0])).unwrap(),
            "1",
        ),
        (
            ConstraintFamily::sft_from_strs(2, &["000"]).unwrap(),
            "1/10",
        ),
    ] {
        let id = family.id();
        let p = plan(family, s, n_max, VRule::Zeros);
        let report = verify_exceptional(&mut p.stream().unwrap(), &p, n_max)
            .unwrap_or_else(|e| panic!("{id} s = {s}: {e}"));
        assert_eq!(report.n_max, n_max);
        assert!(
            report
                .rows
                .iter()
                .all(|r| r.max_ell <= r.bound_hi && r.min_ell >= r.bound_lo),
            "{id}"
        );
    }
}

/// `l_n` of the golden-mean shift for every prefix: the longest window
/// avoiding `11` among the first `n` digits.
fn golden_prefix_runs(x: &[u8]) -> Vec<u64> {
    let (mut cur, mut best) = (0u64, 0u64);
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        cur = if i > 0 && x[i - 1] == 1 && x[i] == 1 {
            1
        } else {
            cur + 1
        };
        best = best.max(cur);
        out.push(best);
    }
    out
}

#[test]
fn sandwich_bounds_against_a_direct_scan() {
    let n_max = 300_000u64;
    let p = plan(
        ConstraintFamily::golden_mean(),
        "0.4",
        n_max,
        VRule::Seeded(4),
    );
    let x = p.stream().unwrap().next_digits(n_max as usize).unwrap();
    let def = Def::Sft {
        base: 2,
        forb: vec![vec![1, 1]],
    };
    let ell = golden_prefix_runs(&x);
    for n in [1usize, 17, 400, 2500] {
        assert_eq!(ell[n - 1], ell_oracle(&x, n, &def));
    }
    let mut prev_m = None;
    for b in p.blocks().take_while(|b| b.start < n_max) {
        let hi = 3 * (b.m + b.ext);
        for n in b.start + 1..=(b.start + b.len).min(n_max) {
            let l = ell[n as usize - 1];
            assert!(l <= hi, "n = {n}: {l} > {hi}");
            if let Some(lo) = prev_m {
                assert!(l >= lo, "n = {n}: {l} < {lo}");
            }
        }
        prev_m = Some(b.m);
    }
}

#[test]
fn sandwich_is_deterministic_and_seed_dependent() {
    let family = ConstraintFamily::golden_mean();
    let run = |rule| {
        let p = plan(family.clone(), "0.4", 200_000, rule);
        p.stream().unwrap().next_digits(200_000).unwrap()
    };
    assert_eq!(run(VRule::Seeded(1)), run(VRule::Seeded(1)));
    assert_ne!(run(VRule::Seeded(1)), run(VRule::Seeded(2)));
}

#[test]
fn construction_preconditions() {
    let g = ConstraintFamily::golden_mean();
    // (1 + s) tau < 1 fails for s = 1 with tau = 0.694
    let config = ExceptionalConfig::new(g.clone(), parse_rational("1").unwrap(), Phi::Log2);
    assert!(ExceptionalPlan::for_digits(config, 1000).is_err());
    let target = ConstraintFamily::fixed_target(2, TargetSource::Seed(3)).unwrap();
    let config = ExceptionalConfig::new(target, parse_rational("1").unwrap(), Phi::Log2);
    assert!(matches!(
        ExceptionalPlan::for_digits(config, 1000),
        Err(Error::ClosureRequired { .. })
    ));
}

#[test]
fn bounded_run_streams_stay_below_twice_the_word_length() {
    let n_max = 1_000_000u64;
    for (family, word_len) in [
        (ConstraintFamily::golden_mean(), 3usize),
        (ConstraintFamily::alphabet_power(3, &[0, 2]).unwrap(), 2),
        (ConstraintFamily::constant_run(4, 0).unwrap(), 3),
    ] {
        let scanner = Scanner::auto(&family, n_max).unwrap();
        for seed in 0..20 {
            let (mut stream, report) =
                build_bounded_run_stream(&family, word_len, seed, DEFAULT_BUDGET).unwrap();
            assert_eq!(report.run_bound, 2 * word_len as u64);
            let ell = scanner.scan(&mut stream, &[n_max]).unwrap()[0];
            assert!(ell < report.run_bound, "{} seed {seed}: {ell}", family.id());
        }
    }
}

#[test]
fn bounded_run_needs_a_nonempty_complement() {
    let full = ConstraintFamily::sft(2, vec![]).unwrap();
    assert!(build_bounded_run_stream(&full, 4, 0, DEFAULT_BUDGET).is_err());
}

#[test]
fn dim_bound_is_reproducible() {
    let config = || {
        ExceptionalConfig::new(
            ConstraintFamily::all_ones(),
            parse_rational("1").unwrap(),
            Phi::Pow(3.0),
        )
    };
    let a = dim_lower_bound(&derive_moran_params(config(), 20_000).unwrap()).unwrap();
    let b = dim_lower_bound(&derive_moran_params(config(), 20_000).unwrap()).unwrap();
    assert!(a
        .f
        .iter()
        .zip(&b.f)
        .all(|(x, y)| x.to_bits() == y.to_bits()));
    assert_eq!(a.to_csv(), b.to_csv());
}

#[test]
fn dim_bound_rejects_bad_parameters() {
    assert!(dim_lower_bound(&MoranParams::constant(0, 0.5, 10)).is_err());
    assert!(dim_lower_bound(&MoranParams::constant(2, 1.0, 10)).is_err());
    assert!(dim_lower_bound(&MoranParams::constant(2, 0.5, 1)).is_err());
    let short = MoranParams {
        n_k: SeqRule::Explicit(vec![2, 2]),
        c_k: SeqRule::Constant(0.5),
        depth: 10,
    };
    assert!(dim_lower_bound(&short).is_err());
}

#[test]
fn phi_parsing_and_checks() {
    assert_eq!(Phi::parse("log2").unwrap(), Phi::Log2);
    assert_eq!(Phi::parse("pow:0.5").unwrap(), Phi::Pow(0.5));
    assert!(Phi::parse("pow:-1").is_err());
    assert!(Phi::parse("cubic").is_err());
    assert!(phi_check(&Phi::Log2, 10_000, PHI_RATIO_THRESHOLD)
        .unwrap()
        .passed());
    assert!(phi_check(&Phi::Pow(1.0), 10_000, PHI_RATIO_THRESHOLD)
        .unwrap()
        .passed());
    // 2^k is as large as the sum of everything before it
    let doubling: String = (0..30).map(|k| format!("{}\n", 1u64 << k)).collect();
    let report = phi_check(
        &Phi::table("doubling", &doubling).unwrap(),
        30,
        PHI_RATIO_THRESHOLD,
    )
    .unwrap();
    assert!(!report.passed());
    let flat = Phi::table("flat", &"5\n".repeat(100)).unwrap();
    assert!(!phi_check(&flat, 100, PHI_RATIO_THRESHOLD).unwrap().passed());
    let t = Phi::table("t", "1\n2\n3\n").unwrap();
    assert_eq!(t.table_len(), Some(3));
    assert!(Phi::table("bad", "1\nabc\n").is_err());
    let falling = Phi::table("falling", "3\n2\n1\n").unwrap();
    assert!(!phi_check(&falling, 3, PHI_RATIO_THRESHOLD)
        .unwrap()
        .passed());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn constant_moran_bound_matches_closed_form(n in 1u64..=16, c_den in 2u64..=64, depth in 2usize..=200) {
        let c = 1.0 / c_den as f64;
        prop_assume!(n as f64 * c < 1.0 || n == 1);
        let d = dim_lower_bound(&MoranParams::constant(n, c, depth)).unwrap();
        // k log n / -((k+1) log c + log n)
        for (i, &f) in d.f.iter().enumerate() {
            let k = (i + 1) as f64;
            let want = k * (n as f64).ln() / -((k + 1.0) * c.ln() + (n as f64).ln());
            prop_assert!((f - want).abs() <= 1e-12 * want.abs().max(1.0));
        }
    }
}

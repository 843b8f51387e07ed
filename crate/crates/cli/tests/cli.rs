use std::path::{Path, PathBuf};
use std::process::Command as Process;

use clap::CommandFactory;
use maxrun::census::{self, EntropyMode};
use maxrun::experiment;
use maxrun::family::DEFAULT_BUDGET;
use maxrun::moran::{self, MoranParams, SeqRule};
use maxrun::ratio::parse_rational;
use maxrun::{ConstraintFamily, DigitStream};
use maxrun_cli::{execute, exit_code, AssertionFailure, Cli};

const GOLDEN: &str = "kind = \"sft\"\nbase = 2\nforbidden = [\"11\"]\n";
const ALL_ONES: &str = "kind = \"constant_run\"\nbase = 2\ndigit = 1\n";

fn spec_file(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

fn parse(args: &[&str]) -> Cli {
    use clap::Parser;
    Cli::try_parse_from(std::iter::once("maxrun").chain(args.iter().copied())).unwrap()
}

fn read(files: &[PathBuf], name: &str) -> String {
    let path = files
        .iter()
        .find(|p| p.file_name().unwrap() == name)
        .expect(name);
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn every_flag_is_documented_in_help() {
    let mut root = Cli::command();
    root.build();
    for sub in root.get_subcommands_mut() {
        let name = sub.get_name().to_string();
        assert!(sub.get_about().is_some(), "{name} has no description");
        let help = sub.render_help().to_string();
        for arg in sub.get_arguments() {
            let id = arg.get_id().as_str();
            if id == "help" || id == "version" {
                continue;
            }
            let long = arg
                .get_long()
                .unwrap_or_else(|| panic!("{name}: {id} has no long flag"));
            assert!(arg.get_help().is_some(), "{name} --{long} is undocumented");
            assert!(
                help.contains(&format!("--{long}")),
                "{name} help lacks --{long}"
            );
        }
    }
}

#[test]
fn blocker_example_for_all_ones() {
    let dir = tempfile::tempdir().unwrap();
    let fam = spec_file(dir.path(), "all_ones.spec", ALL_ONES);
    let out_dir = dir.path().to_str().unwrap();
    let out = execute(
        &parse(&[
            "blocker", "--family", &fam, "--n", "2", "--s", "1", "--out", out_dir,
        ])
        .command,
    )
    .unwrap();
    assert_eq!(out.summary, "n=2 s=1 u=00 verified\n");
    assert_eq!(read(&out.files, "blocker.txt"), out.summary);
}

#[test]
fn dimbound_full_splitting_is_constant_one() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let out = execute(
        &parse(&[
            "dimbound", "--nk", "2", "--ck", "0.5", "--K", "100", "--out", out_dir,
        ])
        .command,
    )
    .unwrap();
    let csv = read(&out.files, "dimbound.csv");
    let values: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(values.len(), 99);
    assert!(values.iter().all(|&f| (f - 1.0).abs() < 1e-12));

    let lib = moran::dim_lower_bound(&MoranParams {
        n_k: SeqRule::Constant(2),
        c_k: SeqRule::Constant(0.5),
        depth: 100,
    })
    .unwrap();
    assert_eq!(csv, lib.to_csv());
}

#[test]
fn outputs_match_library_calls() {
    let dir = tempfile::tempdir().unwrap();
    let fam_path = spec_file(dir.path(), "golden.spec", GOLDEN);
    let out_dir = dir.path().join("runs");
    let out_dir = out_dir.to_str().unwrap();
    let family = maxrun::parse_family_spec(GOLDEN).unwrap();

    let out = execute(
        &parse(&[
            "census", "--family", &fam_path, "--K", "12", "--out", out_dir,
        ])
        .command,
    )
    .unwrap();
    assert_eq!(
        read(&out.files, "census.csv"),
        census::count_table(&family, 12, DEFAULT_BUDGET)
            .unwrap()
            .to_csv()
    );

    let out = execute(
        &parse(&[
            "entropy", "--family", &fam_path, "--K", "16", "--mode", "limsup", "--out", out_dir,
        ])
        .command,
    )
    .unwrap();
    let est = census::entropy_estimate(&family, 16, EntropyMode::Limsup, DEFAULT_BUDGET).unwrap();
    assert_eq!(read(&out.files, "entropy.csv"), est.to_csv());
    assert_eq!(out.summary, est.summary());

    let out = execute(
        &parse(&[
            "scan",
            "--family",
            &fam_path,
            "--n",
            "2^8..2^12",
            "--seed",
            "9",
            "--out",
            out_dir,
        ])
        .command,
    )
    .unwrap();
    let mut stream = DigitStream::seeded(2, 9).unwrap();
    let series = maxrun::max_run(&mut stream, &[256, 512, 1024, 2048, 4096], &family).unwrap();
    assert_eq!(read(&out.files, "scan.csv"), series.to_csv());

    // Scanning a digit file gives the same series as the buffered digits.
    let digits = DigitStream::seeded(2, 9)
        .unwrap()
        .next_digits(4096)
        .unwrap();
    let digit_path = spec_file(
        dir.path(),
        "d.txt",
        &maxrun::stream::format_digit_file(&digits),
    );
    let out2 = execute(
        &parse(&[
            "scan",
            "--family",
            &fam_path,
            "--n",
            "2^8..2^12",
            "--digits",
            &digit_path,
            "--out",
            out_dir,
        ])
        .command,
    )
    .unwrap();
    assert_eq!(read(&out2.files, "scan.csv"), series.to_csv());

    let tau = census::exact_tau(&family).unwrap();
    let out = execute(
        &parse(&[
            "montecarlo",
            "--family",
            &fam_path,
            "--n",
            "2^6..2^9",
            "--trials",
            "12",
            "--seed",
            "3",
            "--workers",
            "2",
            "--out",
            out_dir,
        ])
        .command,
    )
    .unwrap();
    let table =
        experiment::monte_carlo_limit(&family, tau, &[64, 128, 256, 512], 12, 3, 1).unwrap();
    assert_eq!(
        read(&out.files, "limit.csv"),
        experiment::limit_csv(&table).unwrap()
    );
    assert_eq!(
        read(&out.files, "aggregate.csv"),
        experiment::aggregate_csv(&table).unwrap()
    );
}

#[test]
fn run_dir_is_content_addressed_and_ignores_workers() {
    let dir = tempfile::tempdir().unwrap();
    let fam = spec_file(dir.path(), "golden.spec", GOLDEN);
    let out_dir = dir.path().join("runs");
    let out_dir = out_dir.to_str().unwrap();
    let run = |workers: &str, seed: &str| {
        execute(
            &parse(&[
                "montecarlo",
                "--family",
                &fam,
                "--n",
                "2^6..2^8",
                "--trials",
                "8",
                "--seed",
                seed,
                "--workers",
                workers,
                "--format",
                "svg",
                "--out",
                out_dir,
            ])
            .command,
        )
        .unwrap()
    };
    let a = run("1", "5");
    let svg_a = read(&a.files, "plot.svg");
    let b = run("3", "5");
    assert_eq!(a.run_dir, b.run_dir);
    assert_eq!(svg_a, read(&b.files, "plot.svg"));
    assert!(a.run_dir.join("config.toml").is_file());
    let c = run("1", "6");
    assert_ne!(a.run_dir, c.run_dir);
}

#[test]
fn exceptional_and_bounded_write_their_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let fam = spec_file(dir.path(), "all_ones.spec", ALL_ONES);
    let out = execute(
        &parse(&[
            "exceptional",
            "--family",
            &fam,
            "--s",
            "1/2",
            "--n",
            "20000",
            "--K",
            "1000",
            "--out",
            out_dir,
        ])
        .command,
    )
    .unwrap();
    let digits = read(&out.files, "digits.txt");
    assert_eq!(digits.chars().filter(|c| c.is_ascii_digit()).count(), 20000);
    assert!(read(&out.files, "provenance.toml").contains("k0"));
    assert!(read(&out.files, "sandwich.csv").starts_with("k,n_start"));

    let golden = spec_file(dir.path(), "golden.spec", GOLDEN);
    let out = execute(
        &parse(&[
            "bounded",
            "--family",
            &golden,
            "--word-len",
            "3",
            "--n",
            "5000",
            "--seed",
            "1",
            "--out",
            out_dir,
        ])
        .command,
    )
    .unwrap();
    assert!(read(&out.files, "report.txt").contains("run_bound"));
}

#[test]
fn validation_errors_name_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let fam = spec_file(dir.path(), "golden.spec", GOLDEN);
    let cases: &[(&[&str], &str)] = &[
        (
            &[
                "bounds",
                "--family",
                &fam,
                "--n",
                "2^8",
                "--epsilon",
                "0.5",
                "--out",
                out_dir,
            ],
            "0 < epsilon < 1 - tau",
        ),
        (
            &[
                "scan", "--family", &fam, "--n", "2^9..2^3", "--out", out_dir,
            ],
            "--n",
        ),
        (
            &[
                "blocker", "--family", &fam, "--n", "2", "--s", "0", "--out", out_dir,
            ],
            "--s",
        ),
        (
            &[
                "exceptional",
                "--family",
                &fam,
                "--s",
                "1",
                "--phi",
                "cubic",
                "--out",
                out_dir,
            ],
            "--phi",
        ),
        (
            &[
                "dimbound", "--nk", "2", "--ck", "1.5", "--K", "10", "--out", out_dir,
            ],
            "--nk/--ck",
        ),
        (
            &[
                "scan",
                "--family",
                "kind=\"bogus\"",
                "--n",
                "10",
                "--out",
                out_dir,
            ],
            "--family",
        ),
    ];
    for (args, needle) in cases {
        let err = execute(&parse(args).command).unwrap_err();
        let msg = format!("{err:#}");
        assert!(msg.contains(needle), "{args:?}: {msg}");
        assert_eq!(exit_code(&err), 1);
    }
}

#[test]
fn internal_failures_map_to_exit_two() {
    let err = anyhow::Error::new(AssertionFailure("x".into()));
    assert_eq!(exit_code(&err), 2);
    let err = anyhow::Error::new(maxrun::Error::SandwichViolation {
        n: 5,
        block: 1,
        ell: 9,
        lo: 1,
        hi: 3,
    });
    assert_eq!(exit_code(&err.context("exceptional")), 2);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_maxrun");
    let dir = tempfile::tempdir().unwrap();
    let fam = spec_file(dir.path(), "all_ones.spec", ALL_ONES);
    let code = |args: &[&str]| Process::new(bin).args(args).output().unwrap().status.code();
    assert_eq!(code(&["--help"]), Some(0));
    assert_eq!(code(&["--version"]), Some(0));
    assert_eq!(code(&["census", "--bogus"]), Some(1));
    assert_eq!(
        code(&[
            "census",
            "--family",
            &fam,
            "--K",
            "0",
            "--out",
            dir.path().to_str().unwrap()
        ]),
        Some(1)
    );
    let ok = Process::new(bin)
        .args([
            "blocker",
            "--family",
            &fam,
            "--n",
            "2",
            "--s",
            "1",
            "--out",
            dir.path().to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("u=00 verified"));
}

#[test]
fn inline_and_file_specs_agree() {
    let dir = tempfile::tempdir().unwrap();
    let fam = spec_file(dir.path(), "golden.spec", GOLDEN);
    let from_file = maxrun_cli::load_family(&fam).unwrap();
    let inline = maxrun_cli::load_family("kind=\"sft\"\\nbase=2\\nforbidden=[\"11\"]").unwrap();
    assert_eq!(from_file.id(), inline.id());
    assert_eq!(inline.id(), ConstraintFamily::golden_mean().id());
    let s = parse_rational("1").unwrap();
    assert_eq!(
        census::find_blocker(&inline, 2, &s, DEFAULT_BUDGET)
            .unwrap()
            .to_string(),
        "11"
    );
}

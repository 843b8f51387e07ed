//! The `maxrun` command: thin adapters from flags to library calls.
//!
//! Every subcommand validates its flags, runs one library operation and
//! writes the library's own output bytes under `<out>/<subcommand>-<hash>/`,
//! where `<hash>` is derived from the normalized configuration. Exit codes:
//! 0 success, 1 invalid input, 2 failed internal assertion.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use maxrun::census::{self, EntropyMode};
use maxrun::experiment::{self, BoundSchedule, BoundTable, Format};
use maxrun::family::DEFAULT_BUDGET;
use maxrun::moran::{self, ExceptionalConfig, ExceptionalPlan, MoranParams, Phi, SeqRule};
use maxrun::ratio::{format_rational, parse_rational, Rational};
use maxrun::stream::{format_digit_file, parse_digit_file};
use maxrun::{parse_family_spec, ConstraintFamily, DigitStream, NGrid, Scanner};

#[derive(Debug, Parser)]
#[command(
    name = "maxrun",
    version,
    about = "Constrained maximal run lengths of digit expansions"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate l_n on an n grid for a seeded random stream or a digit file
    Scan(ScanArgs),
    /// Exact word counts |A_k| for k = 1..K (CSV: k,count,tau_k)
    Census(CensusArgs),
    /// Entropy estimate log_m|A_k|/k, with the Perron root for subshifts
    Entropy(EntropyArgs),
    /// Smallest blocker word u of length n (no extension of length floor(sn) is admissible)
    Blocker(BlockerArgs),
    /// Build a slow-growth stream from blocker blocks and check its sandwich bounds
    Exceptional(ExceptionalArgs),
    /// Build a stream from words outside A_N, keeping l_n < 2N
    Bounded(BoundedArgs),
    /// Homogeneous Moran dimension lower bound f(k) and its tail estimate
    Dimbound(DimboundArgs),
    /// Monte Carlo table of l_n / log_m n against 1/(1 - tau)
    Montecarlo(MontecarloArgs),
    /// Frequencies of the events l_n >= gamma_n and l_n < delta_n
    Bounds(BoundsArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Family spec: a file path, or inline TOML such as 'kind="sft"\nbase=2\nforbidden=["11"]'
    #[arg(long, value_name = "FILE|SPEC")]
    pub family: String,
    /// Directory that receives the run directory
    #[arg(long, value_name = "DIR", default_value = "runs")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[command(flatten)]
    pub common: Common,
    /// n grid, e.g. 2^10..2^20, 1000,5000 or 10..10000:10 (factor 10)
    #[arg(long, value_name = "GRID")]
    pub n: String,
    /// Seed of the random digit stream (ignored with --digits)
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Digit file to scan instead of a random stream: one ASCII digit per byte, newlines allowed
    #[arg(long, value_name = "FILE")]
    pub digits: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CensusArgs {
    #[command(flatten)]
    pub common: Common,
    /// Largest word length K
    #[arg(long = "K", value_name = "K")]
    pub k: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    /// tau_hat is the value at K
    Limit,
    /// tau_hat is the largest value over [K/2, K]
    Limsup,
}

#[derive(Debug, Args)]
pub struct EntropyArgs {
    #[command(flatten)]
    pub common: Common,
    /// Largest word length K
    #[arg(long = "K", value_name = "K")]
    pub k: usize,
    /// How tau_hat is read off the sequence
    #[arg(long, value_enum, default_value = "limit")]
    pub mode: ModeArg,
}

#[derive(Debug, Args)]
pub struct BlockerArgs {
    #[command(flatten)]
    pub common: Common,
    /// Blocker length n
    #[arg(long)]
    pub n: usize,
    /// Extension ratio s > 0, as a decimal or p/q
    #[arg(long)]
    pub s: String,
}

#[derive(Debug, Args)]
pub struct ExceptionalArgs {
    #[command(flatten)]
    pub common: Common,
    /// Extension ratio s > 0 with (1 + s) tau < 1, as a decimal or p/q
    #[arg(long)]
    pub s: String,
    /// Growth sequence phi: log2, pow:<alpha> or file:<path>
    #[arg(long, default_value = "log2")]
    pub phi: String,
    /// Number of digits N to emit and verify
    #[arg(long, default_value_t = 1_000_000)]
    pub n: u64,
    /// Depth of the finite-sample check on phi
    #[arg(long = "K", value_name = "K", default_value_t = 10_000)]
    pub k: u64,
    /// Seed for random filler words; all-zero fillers when omitted
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct BoundedArgs {
    #[command(flatten)]
    pub common: Common,
    /// Word length N; the stream concatenates words outside A_N
    #[arg(long)]
    pub word_len: usize,
    /// Number of digits to emit and verify
    #[arg(long, default_value_t = 1_000_000)]
    pub n: u64,
    /// Seed for the uniform choice of words
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct DimboundArgs {
    /// Constant branching number n_k >= 1 (with --ck)
    #[arg(long, conflicts_with = "family")]
    pub nk: Option<u64>,
    /// Constant contraction ratio 0 < c_k < 1, decimal or p/q (with --nk)
    #[arg(long, requires = "nk")]
    pub ck: Option<String>,
    /// Depth K: f(k) is reported for k < K
    #[arg(long = "K", value_name = "K")]
    pub k: usize,
    /// Family whose exceptional construction supplies n_k and c_k (with --s and --phi)
    #[arg(long, value_name = "FILE|SPEC", requires = "s")]
    pub family: Option<String>,
    /// Extension ratio s of the construction
    #[arg(long)]
    pub s: Option<String>,
    /// Growth sequence phi of the construction: log2, pow:<alpha> or file:<path>
    #[arg(long, default_value = "log2")]
    pub phi: String,
    /// Directory that receives the run directory
    #[arg(long, value_name = "DIR", default_value = "runs")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatArg {
    /// limit.csv and aggregate.csv
    Csv,
    /// the CSV files plus plot.svg
    Svg,
}

#[derive(Debug, Args)]
pub struct MontecarloArgs {
    #[command(flatten)]
    pub common: Common,
    /// n grid, e.g. 2^10..2^20
    #[arg(long, value_name = "GRID")]
    pub n: String,
    /// Number of independent trials
    #[arg(long, default_value_t = 200)]
    pub trials: u64,
    /// Master seed; trial t uses a seed mixed from (seed, t)
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output format
    #[arg(long, value_enum, default_value = "csv")]
    pub format: FormatArg,
    /// Worker threads (results do not depend on it)
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub common: Common,
    /// n grid, e.g. 2^12,2^16,2^20
    #[arg(long, value_name = "GRID")]
    pub n: String,
    /// epsilon with 0 < epsilon < 1 - tau
    #[arg(long)]
    pub epsilon: f64,
    /// Number of independent trials
    #[arg(long, default_value_t = 1000)]
    pub trials: u64,
    /// Master seed; trial t uses a seed mixed from (seed, t)
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (results do not depend on it)
    #[arg(long)]
    pub workers: Option<usize>,
}

/// Raised when a constructed object fails its own guarantee (exit code 2).
#[derive(Debug)]
pub struct AssertionFailure(pub String);

impl std::fmt::Display for AssertionFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "internal assertion failed: {}", self.0)
    }
}

impl std::error::Error for AssertionFailure {}

/// Normalized configuration; its hash names the run directory.
#[derive(Debug, Default, Serialize)]
pub struct RunConfig {
    pub subcommand: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_grid: Option<Vec<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<ModeArg>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub word_len: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nk: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ck: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<FormatArg>,
    /// Truncated SHA-256 of the scanned digit file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub digits_sha256: Option<String>,
}

impl RunConfig {
    fn new(subcommand: &str) -> Self {
        RunConfig {
            subcommand: subcommand.to_string(),
            ..Default::default()
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// First 16 hex digits of the SHA-256 of the TOML form.
    pub fn hash(&self) -> String {
        hex16(&Sha256::digest(self.to_toml().as_bytes()))
    }

    /// Creates `<out>/<subcommand>-<hash>/` and records the configuration in it.
    fn run_dir(&self, out: &Path) -> Result<PathBuf> {
        let dir = out.join(format!("{}-{}", self.subcommand, self.hash()));
        std::fs::create_dir_all(&dir)
            .with_context(|| format!("--out: cannot create {}", dir.display()))?;
        write_file(&dir.join("config.toml"), &self.to_toml())?;
        Ok(dir)
    }
}

fn hex16(bytes: &[u8]) -> String {
    bytes[..8].iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).with_context(|| format!("cannot write {}", path.display()))
}

/// Reads `--family`: an existing file, or inline TOML.
pub fn load_family(arg: &str) -> Result<ConstraintFamily> {
    let path = Path::new(arg);
    let text = if path.is_file() {
        std::fs::read_to_string(path).with_context(|| format!("--family: cannot read {arg}"))?
    } else if arg.contains('=') {
        arg.replace("\\n", "\n")
    } else {
        bail!("--family: `{arg}` is neither a readable file nor an inline spec");
    };
    parse_family_spec(&text).context("--family")
}

fn parse_s(text: &str) -> Result<Rational> {
    let s = parse_rational(text).context("--s")?;
    if *s.numer() == 0 {
        bail!("--s: s must be positive");
    }
    Ok(s)
}

fn tau_of(family: &ConstraintFamily) -> Result<f64> {
    census::exact_tau(family)
        .ok_or_else(|| anyhow!("--family: entropy of {} is not available", family.id()))
}

fn workers(flag: Option<usize>) -> Result<usize> {
    match flag {
        Some(0) => bail!("--workers: must be at least 1"),
        Some(w) => Ok(w),
        None => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// What a successful subcommand produced.
#[derive(Debug)]
pub struct Outcome {
    pub run_dir: PathBuf,
    pub files: Vec<PathBuf>,
    /// Printed to stdout.
    pub summary: String,
}

impl Outcome {
    fn new(run_dir: PathBuf) -> Self {
        Outcome {
            run_dir,
            files: Vec::new(),
            summary: String::new(),
        }
    }

    fn write(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.run_dir.join(name);
        write_file(&path, body)?;
        self.files.push(path);
        Ok(())
    }
}

pub fn execute(command: &Command) -> Result<Outcome> {
    match command {
        Command::Scan(a) => scan(a),
        Command::Census(a) => census_cmd(a),
        Command::Entropy(a) => entropy(a),
        Command::Blocker(a) => blocker(a),
        Command::Exceptional(a) => exceptional(a),
        Command::Bounded(a) => bounded(a),
        Command::Dimbound(a) => dimbound(a),
        Command::Montecarlo(a) => montecarlo(a),
        Command::Bounds(a) => bounds(a),
    }
}

fn scan(a: &ScanArgs) -> Result<Outcome> {
    let family = load_family(&a.common.family)?;
    let grid = NGrid::parse(&a.n).context("--n")?;
    let mut cfg = RunConfig::new("scan");
    cfg.family = Some(family.to_spec_string()?);
    cfg.n_grid = Some(grid.values().to_vec());
    let mut stream = match &a.digits {
        Some(path) => {
            let bytes = std::fs::read(path)
                .with_context(|| format!("--digits: cannot read {}", path.display()))?;
            cfg.digits_sha256 = Some(hex16(&Sha256::digest(&bytes)));
            let digits = parse_digit_file(&bytes, family.base()).context("--digits")?;
            if (digits.len() as u64) < grid.max() {
                bail!(
                    "--n: largest n = {} exceeds the {} digits in the file",
                    grid.max(),
                    digits.len()
                );
            }
            DigitStream::buffer(family.base(), digits)?
        }
        None => {
            cfg.seed = Some(a.seed);
            DigitStream::seeded(family.base(), a.seed)?
        }
    };
    let series = maxrun::max_run(&mut stream, grid.values(), &family)?;
    let mut out = Outcome::new(cfg.run_dir(&a.common.out)?);
    let csv = series.to_csv();
    out.write("scan.csv", &csv)?;
    out.summary = csv;
    Ok(out)
}

fn census_cmd(a: &CensusArgs) -> Result<Outcome> {
    let family = load_family(&a.common.family)?;
    if a.k == 0 {
        bail!("--K: K must be at least 1");
    }
    let mut cfg = RunConfig::new("census");
    cfg.family = Some(family.to_spec_string()?);
    cfg.k = Some(a.k as u64);
    let table = census::count_table(&family, a.k, DEFAULT_BUDGET)?;
    let mut out = Outcome::new(cfg.run_dir(&a.common.out)?);
    let csv = table.to_csv();
    out.write("census.csv", &csv)?;
    out.summary = csv;
    Ok(out)
}

fn entropy(a: &EntropyArgs) -> Result<Outcome> {
    let family = load_family(&a.common.family)?;
    if a.k == 0 {
        bail!("--K: K must be at least 1");
    }
    let mode = match a.mode {
        ModeArg::Limit => EntropyMode::Limit,
        ModeArg::Limsup => EntropyMode::Limsup,
    };
    let mut cfg = RunConfig::new("entropy");
    cfg.family = Some(family.to_spec_string()?);
    cfg.k = Some(a.k as u64);
    cfg.mode = Some(a.mode);
    let estimate = census::entropy_estimate(&family, a.k, mode, DEFAULT_BUDGET)?;
    let mut out = Outcome::new(cfg.run_dir(&a.common.out)?);
    out.write("entropy.csv", &estimate.to_csv())?;
    out.summary = estimate.summary();
    out.write("entropy.txt", &out.summary.clone())?;
    Ok(out)
}

fn blocker(a: &BlockerArgs) -> Result<Outcome> {
    let family = load_family(&a.common.family)?;
    let s = parse_s(&a.s)?;
    if a.n == 0 {
        bail!("--n: blocker length must be at least 1");
    }
    let mut cfg = RunConfig::new("blocker");
    cfg.family = Some(family.to_spec_string()?);
    cfg.n = Some(a.n as u64);
    cfg.s = Some(format_rational(&s));
    let report = census::blocker_report(&family, a.n, &s, DEFAULT_BUDGET)?;
    if report.verified == Some(false) {
        return Err(AssertionFailure(format!("blocker {} admits an extension", report.u)).into());
    }
    let mut out = Outcome::new(cfg.run_dir(&a.common.out)?);
    out.summary = format!("{report}\n");
    out.write("blocker.txt", &out.summary.clone())?;
    Ok(out)
}

fn parse_phi(text: &str) -> Result<Phi> {
    Phi::parse(text).context("--phi")
}

fn exceptional(a: &ExceptionalArgs) -> Result<Outcome> {
    let family = load_family(&a.common.family)?;
    let s = parse_s(&a.s)?;
    let phi = parse_phi(&a.phi)?;
    if a.n == 0 {
        bail!("--n: N must be at least 1");
    }
    let check = moran::phi_check(&phi, a.k, moran::PHI_RATIO_THRESHOLD).context("--K")?;
    if !check.passed() {
        bail!("--phi: {check}");
    }
    let mut cfg = RunConfig::new("exceptional");
    cfg.family = Some(family.to_spec_string()?);
    cfg.s = Some(format_rational(&s));
    cfg.phi = Some(phi.to_string());
    cfg.n = Some(a.n);
    cfg.k = Some(a.k);
    cfg.seed = a.seed;
    let mut config = ExceptionalConfig::new(family, s, phi);
    if let Some(seed) = a.seed {
        config.v_rule = moran::VRule::Seeded(seed);
    }
    let plan = Arc::new(ExceptionalPlan::for_digits(config, a.n)?);
    let digits = plan.stream()?.next_digits(a.n as usize)?;
    let report = match moran::verify_exceptional(&mut plan.stream()?, &plan, a.n) {
        Err(e @ maxrun::Error::SandwichViolation { .. }) => {
            return Err(AssertionFailure(e.to_string()).into())
        }
        other => other?,
    };
    let mut out = Outcome::new(cfg.run_dir(&a.common.out)?);
    out.write("digits.txt", &format_digit_file(&digits))?;
    out.write("provenance.toml", &plan.provenance())?;
    out.write("sandwich.csv", &report.to_csv())?;
    let mut summary = String::new();
    let _ = writeln!(summary, "{check}k0 = {}", plan.k0());
    let _ = writeln!(summary, "blocks = {}", report.rows.len());
    let _ = writeln!(summary, "sandwich = holds for all n <= {}", a.n);
    let _ = writeln!(summary, "final_ell = {}", report.final_ell);
    if let Some(row) = report.rows.last() {
        let _ = writeln!(
            summary,
            "final_block_max_ratio_phi = {:.6}",
            row.max_ratio_phi
        );
    }
    out.summary = summary;
    Ok(out)
}

fn bounded(a: &BoundedArgs) -> Result<Outcome> {
    let family = load_family(&a.common.family)?;
    if a.word_len == 0 {
        bail!("--word-len: N must be at least 1");
    }
    if a.n == 0 {
        bail!("--n: must be at least 1");
    }
    let mut cfg = RunConfig::new("bounded");
    cfg.family = Some(family.to_spec_string()?);
    cfg.word_len = Some(a.word_len);
    cfg.n = Some(a.n);
    cfg.seed = Some(a.seed);
    let (mut stream, report) =
        moran::build_bounded_run_stream(&family, a.word_len, a.seed, DEFAULT_BUDGET)
            .context("--word-len")?;
    let digits = stream.next_digits(a.n as usize)?;
    let ell = Scanner::auto(&family, a.n)?.scan_digits(&digits, &[a.n])?[0];
    if ell >= report.run_bound {
        return Err(AssertionFailure(format!(
            "l_{} = {ell} is not below {}",
            a.n, report.run_bound
        ))
        .into());
    }
    let mut out = Outcome::new(cfg.run_dir(&a.common.out)?);
    out.write("digits.txt", &format_digit_file(&digits))?;
    out.summary = format!("{report}ell_n = {ell} at n = {}\n", a.n);
    out.write("report.txt", &out.summary.clone())?;
    Ok(out)
}

fn dimbound(a: &DimboundArgs) -> Result<Outcome> {
    let mut cfg = RunConfig::new("dimbound");
    cfg.k = Some(a.k as u64);
    let params = match (&a.family, a.nk, &a.ck) {
        (None, Some(nk), Some(ck)) => {
            let c = parse_rational(ck).context("--ck")?;
            cfg.nk = Some(nk);
            cfg.ck = Some(format_rational(&c));
            MoranParams {
                n_k: SeqRule::Constant(nk),
                c_k: SeqRule::Constant(*c.numer() as f64 / *c.denom() as f64),
                depth: a.k,
            }
        }
        (Some(spec), None, None) => {
            let family = load_family(spec)?;
            let s = parse_s(a.s.as_deref().unwrap_or_default())?;
            let phi = parse_phi(&a.phi)?;
            cfg.family = Some(family.to_spec_string()?);
            cfg.s = Some(format_rational(&s));
            cfg.phi = Some(phi.to_string());
            moran::derive_moran_params(ExceptionalConfig::new(family, s, phi), a.k)?
        }
        _ => bail!("dimbound needs either --nk with --ck, or --family with --s"),
    };
    let bound = moran::dim_lower_bound(&params).context("--nk/--ck")?;
    let mut out = Outcome::new(cfg.run_dir(&a.out)?);
    out.write("dimbound.csv", &bound.to_csv())?;
    let last = bound.f.last().copied().unwrap_or(f64::NAN);
    out.summary = format!(
        "f(K-1) = {last:.12}\ntail_estimate = {:.12} (min of f(k) over k in [{}, {}])\n",
        bound.tail_estimate, bound.tail_from, bound.tail_to
    );
    Ok(out)
}

fn montecarlo(a: &MontecarloArgs) -> Result<Outcome> {
    let family = load_family(&a.common.family)?;
    let grid = NGrid::parse(&a.n).context("--n")?;
    if a.trials == 0 {
        bail!("--trials: must be at least 1");
    }
    let workers = workers(a.workers)?;
    let tau = tau_of(&family)?;
    let mut cfg = RunConfig::new("montecarlo");
    cfg.family = Some(family.to_spec_string()?);
    cfg.n_grid = Some(grid.values().to_vec());
    cfg.trials = Some(a.trials);
    cfg.seed = Some(a.seed);
    cfg.format = Some(a.format);
    let table =
        experiment::monte_carlo_limit(&family, tau, grid.values(), a.trials, a.seed, workers)
            .context("--n")?;
    let run_dir = cfg.run_dir(&a.common.out)?;
    let mut out = Outcome::new(run_dir.clone());
    out.files = experiment::emit_results(&table, Format::Csv, &run_dir)?;
    if let FormatArg::Svg = a.format {
        out.files
            .extend(experiment::emit_results(&table, Format::Svg, &run_dir)?);
    }
    let target = table.target();
    out.summary = if target.is_finite() {
        format!(
            "target = {target:.6}\n{}",
            experiment::aggregate_csv(&table)?
        )
    } else {
        format!(
            "target = infinite (tau = 1); expect divergence\n{}",
            experiment::aggregate_csv(&table)?
        )
    };
    Ok(out)
}

fn bounds(a: &BoundsArgs) -> Result<Outcome> {
    let family = load_family(&a.common.family)?;
    let grid = NGrid::parse(&a.n).context("--n")?;
    if a.trials == 0 {
        bail!("--trials: must be at least 1");
    }
    let workers = workers(a.workers)?;
    let tau = tau_of(&family)?;
    let schedule = BoundSchedule::new(tau, a.epsilon, family.base()).context("--epsilon")?;
    let mut cfg = RunConfig::new("bounds");
    cfg.family = Some(family.to_spec_string()?);
    cfg.n_grid = Some(grid.values().to_vec());
    cfg.trials = Some(a.trials);
    cfg.seed = Some(a.seed);
    cfg.epsilon = Some(a.epsilon);
    let table =
        experiment::monte_carlo_limit(&family, tau, grid.values(), a.trials, a.seed, workers)
            .context("--n")?;
    let bounds = BoundTable::from_trials(&table, schedule);
    let mut out = Outcome::new(cfg.run_dir(&a.common.out)?);
    let csv = bounds.to_csv();
    out.write("bounds.csv", &csv)?;
    out.summary = csv;
    Ok(out)
}

/// Exit code for a failed command: 2 for broken internal guarantees, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    let internal = err.chain().any(|e| {
        e.is::<AssertionFailure>()
            || matches!(
                e.downcast_ref(),
                Some(maxrun::Error::SandwichViolation { .. })
            )
    });
    if internal {
        2
    } else {
        1
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli.command) {
        Ok(out) => {
            // A closed stdout (e.g. piped into `head`) is not a failure.
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(out.summary.as_bytes());
            for f in &out.files {
                let _ = writeln!(stdout, "wrote {}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

//! Monte Carlo checks of the almost-sure growth `l_n / log_m n -> 1 / (1 - tau)`
//! and of the tail events used to prove it.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::ConstraintFamily;
use crate::scanner::Scanner;
use crate::stream::DigitStream;

/// Seed of trial `t`: two rounds of the splitmix64 finalizer over
/// `master` and `t`, so trials are independent of scheduling.
pub fn trial_seed(master: u64, trial: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(mix(master) ^ trial)
}

/// `1 / (1 - tau)`, infinite at `tau = 1`.
pub fn limit_target(tau: f64) -> f64 {
    if tau >= 1.0 {
        f64::INFINITY
    } else {
        1.0 / (1.0 - tau)
    }
}

/// Thresholds `gamma_n = ceil((1+e)/(1-tau-e) log_m n)` and
/// `delta_n = floor((1-e)/(1-tau+e) log_m n)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundSchedule {
    pub epsilon: f64,
    pub tau: f64,
    pub base: u8,
}

impl BoundSchedule {
    pub fn new(tau: f64, epsilon: f64, base: u8) -> Result<Self> {
        if !(0.0..1.0).contains(&tau) {
            return Err(Error::invalid(format!(
                "tau must satisfy 0 <= tau < 1, got {tau}"
            )));
        }
        if !(epsilon > 0.0 && epsilon < 1.0 - tau) {
            return Err(Error::invalid(format!(
                "epsilon must satisfy 0 < epsilon < 1 - tau = {}, got {epsilon}",
                1.0 - tau
            )));
        }
        Ok(BoundSchedule { epsilon, tau, base })
    }

    fn log(&self, n: u64) -> f64 {
        if self.base == 2 {
            (n as f64).log2()
        } else {
            (n as f64).ln() / (self.base as f64).ln()
        }
    }

    pub fn gamma(&self, n: u64) -> u64 {
        let e = self.epsilon;
        ((1.0 + e) / (1.0 - self.tau - e) * self.log(n)).ceil() as u64
    }

    pub fn delta(&self, n: u64) -> u64 {
        let e = self.epsilon;
        ((1.0 - e) / (1.0 - self.tau + e) * self.log(n)).floor() as u64
    }
}

/// `l_n` for every `(n, trial)`, with the parameters that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialTable {
    pub family_id: String,
    pub base: u8,
    pub tau: f64,
    pub master_seed: u64,
    pub n_grid: Vec<u64>,
    pub trials: u64,
    /// `ell[trial][grid index]`
    pub ell: Vec<Vec<u64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitRow {
    pub family: String,
    pub n: u64,
    pub trial: u64,
    pub ell_n: u64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub family: String,
    pub n: u64,
    pub mean: f64,
    pub median: f64,
    pub std: f64,
    pub target: f64,
}

/// Summary of `l_n / log_m n` across trials at one `n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub n: u64,
    pub mean: f64,
    pub median: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl TrialTable {
    pub fn target(&self) -> f64 {
        limit_target(self.tau)
    }

    pub fn log_n(&self, n: u64) -> f64 {
        if self.base == 2 {
            (n as f64).log2()
        } else {
            (n as f64).ln() / (self.base as f64).ln()
        }
    }

    /// `l_n` of every trial at grid index `i`.
    pub fn column(&self, i: usize) -> Vec<u64> {
        self.ell.iter().map(|row| row[i]).collect()
    }

    /// Statistics from the sorted per-trial ratios, so the result does not
    /// depend on the order trials finished in.
    pub fn summary(&self, i: usize) -> Summary {
        let n = self.n_grid[i];
        let log = self.log_n(n);
        let mut v: Vec<f64> = self.column(i).into_iter().map(|l| l as f64 / log).collect();
        v.sort_by(f64::total_cmp);
        let len = v.len() as f64;
        let mean = v.iter().sum::<f64>() / len;
        let median = if v.len() % 2 == 1 {
            v[v.len() / 2]
        } else {
            (v[v.len() / 2 - 1] + v[v.len() / 2]) / 2.0
        };
        let std = if v.len() > 1 {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (len - 1.0)).sqrt()
        } else {
            0.0
        };
        Summary {
            n,
            mean,
            median,
            std,
            min: v[0],
            max: v[v.len() - 1],
        }
    }

    pub fn summaries(&self) -> Vec<Summary> {
        (0..self.n_grid.len()).map(|i| self.summary(i)).collect()
    }

    /// Rows ordered by `n`, then trial.
    pub fn limit_rows(&self) -> Vec<LimitRow> {
        let mut rows = Vec::with_capacity(self.n_grid.len() * self.ell.len());
        for (i, &n) in self.n_grid.iter().enumerate() {
            let log = self.log_n(n);
            for (t, row) in self.ell.iter().enumerate() {
                rows.push(LimitRow {
                    family: self.family_id.clone(),
                    n,
                    trial: t as u64,
                    ell_n: row[i],
                    ratio: row[i] as f64 / log,
                });
            }
        }
        rows
    }

    pub fn aggregate_rows(&self) -> Vec<AggregateRow> {
        self.summaries()
            .into_iter()
            .map(|s| AggregateRow {
                family: self.family_id.clone(),
                n: s.n,
                mean: s.mean,
                median: s.median,
                std: s.std,
                target: self.target(),
            })
            .collect()
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("cannot start {workers} workers: {e}")))
}

/// Runs `trials` independent seeded streams through the scanner and records
/// `l_n` on `n_grid`. Results do not depend on `workers`.
pub fn monte_carlo_limit(
    family: &ConstraintFamily,
    tau: f64,
    n_grid: &[u64],
    trials: u64,
    master_seed: u64,
    workers: usize,
) -> Result<TrialTable> {
    use rayon::prelude::*;

    if trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::invalid(format!("tau must lie in [0, 1], got {tau}")));
    }
    if n_grid.first().is_some_and(|&n| n < 2) {
        return Err(Error::invalid(
            "n grid must start at 2 or above (ratios divide by log n)",
        ));
    }
    let max_n = n_grid
        .last()
        .copied()
        .ok_or_else(|| Error::invalid("n grid is empty"))?;
    let scanner = Scanner::auto(family, max_n)?;
    let base = family.base();
    let ell = pool(workers)?.install(|| {
        (0..trials)
            .into_par_iter()
            .map(|t| {
                let mut stream = DigitStream::seeded(base, trial_seed(master_seed, t))?;
                scanner.scan(&mut stream, n_grid)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(TrialTable {
        family_id: family.id(),
        base,
        tau,
        master_seed,
        n_grid: n_grid.to_vec(),
        trials,
        ell,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundRow {
    pub n: u64,
    pub gamma: u64,
    pub delta: u64,
    /// Empirical `P(l_n >= gamma_n)`.
    pub p_upper: f64,
    pub se_upper: f64,
    /// `n^-epsilon`
    pub upper_bound: f64,
    /// `p_upper > n^-epsilon + 3 se_upper`
    pub flagged: bool,
    /// Empirical `P(l_n < delta_n)`.
    pub p_lower: f64,
    pub se_lower: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundTable {
    pub family_id: String,
    pub schedule: BoundSchedule,
    pub trials: u64,
    pub rows: Vec<BoundRow>,
}

impl BoundTable {
    pub fn from_trials(table: &TrialTable, schedule: BoundSchedule) -> Self {
        let trials = table.ell.len() as f64;
        let se = |p: f64| (p * (1.0 - p) / trials).sqrt();
        let rows = table
            .n_grid
            .iter()
            .enumerate()
            .map(|(i, &n)| {
                let col = table.column(i);
                let gamma = schedule.gamma(n);
                let delta = schedule.delta(n);
                let p_upper = col.iter().filter(|&&l| l >= gamma).count() as f64 / trials;
                let p_lower = col.iter().filter(|&&l| l < delta).count() as f64 / trials;
                let upper_bound = (n as f64).powf(-schedule.epsilon);
                let se_upper = se(p_upper);
                BoundRow {
                    n,
                    gamma,
                    delta,
                    p_upper,
                    se_upper,
                    upper_bound,
                    flagged: p_upper > upper_bound + 3.0 * se_upper,
                    p_lower,
                    se_lower: se(p_lower),
                }
            })
            .collect();
        BoundTable {
            family_id: table.family_id.clone(),
            schedule,
            trials: table.trials,
            rows,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "family,n,gamma,delta,p_upper,se_upper,upper_bound,flagged,p_lower,se_lower\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                self.family_id,
                r.n,
                r.gamma,
                r.delta,
                r.p_upper,
                r.se_upper,
                r.upper_bound,
                r.flagged,
                r.p_lower,
                r.se_lower
            );
        }
        out
    }
}

/// Empirical frequencies of `l_n >= gamma_n` and `l_n < delta_n`.
pub fn bound_event_frequency(
    family: &ConstraintFamily,
    tau: f64,
    epsilon: f64,
    n_list: &[u64],
    trials: u64,
    master_seed: u64,
    workers: usize,
) -> Result<BoundTable> {
    let schedule = BoundSchedule::new(tau, epsilon, family.base())?;
    let table = monte_carlo_limit(family, tau, n_list, trials, master_seed, workers)?;
    Ok(BoundTable::from_trials(&table, schedule))
}

fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn from_csv<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

/// Columns `family,n,trial,ell_n,ratio`.
pub fn limit_csv(table: &TrialTable) -> Result<String> {
    to_csv(&table.limit_rows())
}

/// Columns `family,n,mean,median,std,target`.
pub fn aggregate_csv(table: &TrialTable) -> Result<String> {
    to_csv(&table.aggregate_rows())
}

pub fn parse_limit_csv(text: &str) -> Result<Vec<LimitRow>> {
    from_csv(text)
}

pub fn parse_aggregate_csv(text: &str) -> Result<Vec<AggregateRow>> {
    from_csv(text)
}

/// Mean ratio against `log2 n`, one polyline per table, plus a dashed
/// horizontal line at each finite target.
pub fn plot_svg(tables: &[&TrialTable]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const PAD: f64 = 50.0;
    const COLORS: [&str; 6] = [
        "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
    ];

    let series: Vec<(Vec<(f64, f64)>, f64)> = tables
        .iter()
        .map(|t| {
            let pts = t
                .summaries()
                .iter()
                .map(|s| ((s.n as f64).log2(), s.mean))
                .collect();
            (pts, t.target())
        })
        .collect();
    let xs = series.iter().flat_map(|(p, _)| p.iter().map(|q| q.0));
    let (x0, x1) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| {
        (a.min(x), b.max(x))
    });
    let ys = series
        .iter()
        .flat_map(|(p, t)| p.iter().map(|q| q.1).chain(t.is_finite().then_some(*t)));
    let (y0, y1) = ys.fold((0.0f64, f64::NEG_INFINITY), |(a, b), y| {
        (a.min(y), b.max(y))
    });
    let (x0, x1) = if x1 > x0 {
        (x0, x1)
    } else {
        (x0 - 1.0, x0 + 1.0)
    };
    let y1 = if y1 > y0 { y1 * 1.1 } else { y0 + 1.0 };
    let px = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let py = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<path d="M{PAD} {PAD} V{} H{}" stroke="black" fill="none"/>"#,
        H - PAD,
        W - PAD
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">log2 n</text>"#,
        W / 2.0,
        H - 15.0
    );
    let _ = writeln!(
        out,
        r#"<text x="15" y="{}" font-size="12" transform="rotate(-90 15 {})" text-anchor="middle">mean l_n / log n</text>"#,
        H / 2.0,
        H / 2.0
    );
    for (i, ((pts, target), table)) in series.iter().zip(tables).enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline class="series" data-family="{}" points="{}" stroke="{color}" fill="none"/>"#,
            table.family_id,
            path.join(" ")
        );
        if target.is_finite() {
            let _ = writeln!(
                out,
                r#"<line class="target" data-family="{}" x1="{PAD}" x2="{}" y1="{:.2}" y2="{:.2}" stroke="{color}" stroke-dasharray="6 4"/>"#,
                table.family_id,
                W - PAD,
                py(*target),
                py(*target)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="11" fill="{color}">{} (target {:.4})</text>"#,
            PAD + 10.0,
            PAD + 14.0 * (i as f64 + 1.0),
            table.family_id,
            target
        );
    }
    out.push_str("</svg>\n");
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Svg,
}

/// Writes `limit.csv` and `aggregate.csv` (or `plot.svg`) into `dir`.
pub fn emit_results(table: &TrialTable, format: Format, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = match format {
        Format::Csv => vec![
            ("limit.csv", limit_csv(table)?),
            ("aggregate.csv", aggregate_csv(table)?),
        ],
        Format::Svg => vec![("plot.svg", plot_svg(&[table]))],
    };
    files
        .into_iter()
        .map(|(name, body)| {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
            Ok(path)
        })
        .collect()
}

//! Command implementations behind the `bblab` binary.
//!
//! Each command is a plain function from parsed arguments to a serializable
//! report, so the binary only handles argument parsing, printing and exit
//! codes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use bblab_core::quantities::SUPPORT_TOL;
use bblab_core::restriction::{moment, LEDGER_MAX_VARS};
use bblab_core::search::{
    exhaustive_search, local_refine, merge_reports, random_search, ExhaustiveOptions, SearchConfig,
};
use bblab_core::verify::{check_all, parse_function_list, run_suite, FunctionSource, SuiteOptions};
use bblab_core::{
    entropy_via_moments, forward_transform, increment, influences, min_entropy, noise_stability,
    noise_stability_mc, parse_truth_table, proof_slack_report, spectral_entropy, support_size,
    Bias, BooleanFunction, Chain, CheckResult, Error, ExtremalRecord, ProofLedger, SearchReport,
    SubsetMask, VerificationReport,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

pub use bblab_core::report::{fmt17, sig17, sig17_vec};

/// Exit status when a blocking check fails.
pub const EXIT_CHECK_FAILED: i32 = 1;
/// Exit status for bad flags or inputs.
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "bblab",
    version,
    about = "Spectral entropy and influence on the p-biased hypercube"
)]
pub struct Cli {
    /// Worker threads for verify/search (defaults to all cores).
    #[arg(long, global = true, env = "BBLAB_WORKERS")]
    pub workers: Option<usize>,
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = bblab_core::rng::DEFAULT_SEED)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Spectral quantities and bound slacks of one or more functions.
    Analyze(AnalyzeArgs),
    /// Run every identity and inequality over a function suite.
    Verify(VerifyArgs),
    /// Hunt for functions minimizing entropy / sum of squared influences.
    Search(SearchArgs),
    /// Minimum ratio across a bias grid next to the reference constants.
    Sweep(SweepArgs),
    /// Noise stability, spectral and optionally Monte Carlo.
    Stability(StabilityArgs),
    /// Moments, increments and the proof ledger along a chain.
    Moments(MomentsArgs),
}

#[derive(Debug, Clone, Args)]
#[group(required = true, multiple = false)]
pub struct FunctionInput {
    /// Truth table, binary (`0110`) or hex (`0x96`).
    #[arg(long, value_parser = parse_function)]
    pub tt: Option<BooleanFunction>,
    /// One truth table per line; `#` starts a comment.
    #[arg(long)]
    pub file: Option<PathBuf>,
}

impl FunctionInput {
    pub fn from_tt(f: BooleanFunction) -> Self {
        Self {
            tt: Some(f),
            file: None,
        }
    }

    pub fn load(&self) -> Result<Vec<BooleanFunction>, Error> {
        match (&self.tt, &self.file) {
            (Some(f), _) => Ok(vec![f.clone()]),
            (None, Some(path)) => read_function_file(path),
            (None, None) => Err(Error::BadTable("no function given".into())),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub input: FunctionInput,
    #[arg(long, value_parser = parse_bias)]
    pub p: Bias,
    /// Coordinate order, e.g. `3,1,2` (identity by default).
    #[arg(long, value_parser = parse_chain)]
    pub chain: Option<Chain>,
    /// Write the JSON report here (`-` for stdout).
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Exhaustive over all functions on `n <= 4` coordinates, or the size of
    /// random functions with `--random`.
    #[arg(long, required_unless_present = "file", conflicts_with = "file")]
    pub n: Option<usize>,
    #[arg(long)]
    pub file: Option<PathBuf>,
    /// Draw this many random functions on `--n` coordinates instead.
    #[arg(long, requires = "n")]
    pub random: Option<u64>,
    #[arg(long, value_parser = parse_bias, value_delimiter = ',', default_values_t = default_grid())]
    pub p_grid: Vec<Bias>,
    #[arg(long, value_parser = parse_chain)]
    pub chain: Option<Chain>,
    /// Skip the identity bundle and run only the three bounds.
    #[arg(long)]
    pub bounds_only: bool,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SearchMode {
    Exhaustive,
    Random,
    Refine,
}

#[derive(Debug, Clone, Args)]
pub struct SearchArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_parser = parse_bias, conflicts_with = "p_grid")]
    pub p: Option<Bias>,
    #[arg(long, value_parser = parse_bias, value_delimiter = ',')]
    pub p_grid: Option<Vec<Bias>>,
    #[arg(long, value_enum, default_value_t = SearchMode::Exhaustive)]
    pub mode: SearchMode,
    /// Random draws (random mode, and refine mode without `--start`).
    #[arg(long, default_value_t = 10_000)]
    pub samples: u64,
    /// Flip budget per refinement.
    #[arg(long, default_value_t = 2_000)]
    pub budget: u64,
    /// Starting function for refine mode.
    #[arg(long, value_parser = parse_function)]
    pub start: Option<BooleanFunction>,
    #[arg(long, default_value_t = bblab_core::search::DEFAULT_TOP_K)]
    pub top: usize,
    /// Also quotient by coordinate permutations (exhaustive mode).
    #[arg(long)]
    pub dedup_perms: bool,
    /// Allow exhaustive search at n = 5.
    #[arg(long)]
    pub force_long: bool,
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Leaderboard rows as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, value_parser = parse_bias, value_delimiter = ',', default_values_t = default_grid())]
    pub p_grid: Vec<Bias>,
    /// `exhaustive` or `random`.
    #[arg(long, value_enum, default_value_t = SearchMode::Exhaustive)]
    pub mode: SearchMode,
    #[arg(long, default_value_t = 10_000)]
    pub samples: u64,
    #[arg(long)]
    pub dedup_perms: bool,
    #[arg(long)]
    pub force_long: bool,
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// One row per grid point.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct StabilityArgs {
    #[arg(long, value_parser = parse_function)]
    pub tt: BooleanFunction,
    #[arg(long, value_parser = parse_bias)]
    pub p: Bias,
    #[arg(long)]
    pub eps: f64,
    /// Monte Carlo sample count.
    #[arg(long)]
    pub mc: Option<u64>,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct MomentsArgs {
    #[arg(long, value_parser = parse_function)]
    pub tt: BooleanFunction,
    #[arg(long, value_parser = parse_bias)]
    pub p: Bias,
    #[arg(long)]
    pub eps: f64,
    #[arg(long, value_parser = parse_chain)]
    pub chain: Option<Chain>,
    /// Skip the proof ledger (required above six coordinates).
    #[arg(long)]
    pub no_ledger: bool,
    #[arg(long)]
    pub json: Option<PathBuf>,
}

fn default_grid() -> Vec<Bias> {
    bblab_core::verify::DEFAULT_P_GRID
        .iter()
        .map(|&p| Bias::new(p).expect("grid points are valid"))
        .collect()
}

pub fn parse_bias(s: &str) -> Result<Bias, String> {
    let p: f64 = s.trim().parse().map_err(|e| format!("{s:?}: {e}"))?;
    Bias::new(p).map_err(|e| e.to_string())
}

pub fn parse_function(s: &str) -> Result<BooleanFunction, String> {
    parse_truth_table(s).map_err(|e| e.to_string())
}

pub fn parse_chain(s: &str) -> Result<Chain, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

pub fn read_function_file(path: &Path) -> Result<Vec<BooleanFunction>, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::SourceUnavailable(format!("{}: {e}", path.display())))?;
    parse_function_list(&text)
}

fn chain_for(chain: &Option<Chain>, n: usize) -> Result<Chain, Error> {
    match chain {
        Some(c) if c.n() != n => Err(Error::InvalidChain(format!(
            "chain {c} has {} entries but the function has {n} coordinates",
            c.n()
        ))),
        Some(c) => Ok(c.clone()),
        None => Ok(Chain::identity(n)),
    }
}

/// What a command produced: a report plus whether its blocking checks passed.
#[derive(Debug)]
pub struct Outcome {
    pub text: String,
    pub json: String,
    pub csv: Option<String>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyzeReport {
    pub tt: String,
    pub n: usize,
    #[serde(serialize_with = "sig17")]
    pub p: f64,
    pub chain: String,
    #[serde(serialize_with = "sig17")]
    pub entropy: f64,
    #[serde(serialize_with = "sig17_vec")]
    pub influences: Vec<f64>,
    #[serde(serialize_with = "sig17")]
    pub total_influence: f64,
    #[serde(serialize_with = "sig17")]
    pub sum_sq_influence: f64,
    /// `-ln max_S coeff(S)^2`; `null` for the zero spectrum.
    #[serde(serialize_with = "sig17")]
    pub min_entropy: f64,
    pub support_size: usize,
    #[serde(serialize_with = "sig17")]
    pub h_q: f64,
    #[serde(serialize_with = "sig17")]
    pub theorem_constant: f64,
    #[serde(serialize_with = "sig17")]
    pub theorem_slack: f64,
    #[serde(serialize_with = "sig17")]
    pub conjecture_slack: f64,
    #[serde(serialize_with = "sig17")]
    pub entropy_via_moments: f64,
    #[serde(serialize_with = "sig17")]
    pub entropy_via_moments_delta: f64,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

pub fn analyze_one(
    f: &BooleanFunction,
    bias: Bias,
    chain: &Option<Chain>,
) -> Result<AnalyzeReport, Error> {
    let chain = chain_for(chain, f.n())?;
    let spec = forward_transform(f, bias);
    let entropy = spectral_entropy(&spec)?.value();
    let inf = influences(f, bias);
    let ssi = inf.sum_squares();
    let via = entropy_via_moments(f, bias, &chain)?.value();
    let checks = check_all(f, bias, &chain, true)?;
    let passed = checks.iter().all(|c| c.pass || !c.kind.is_blocking());
    Ok(AnalyzeReport {
        tt: f.to_tt_string(),
        n: f.n(),
        p: bias.p(),
        chain: chain.to_string(),
        entropy,
        influences: inf.as_slice().to_vec(),
        total_influence: inf.total(),
        sum_sq_influence: ssi,
        min_entropy: min_entropy(&spec).unwrap_or(f64::NAN),
        support_size: support_size(&spec, SUPPORT_TOL),
        h_q: bias.conjecture_constant(),
        theorem_constant: bias.theorem_constant(),
        theorem_slack: entropy - bias.theorem_constant() * ssi,
        conjecture_slack: entropy - bias.conjecture_constant() * ssi,
        entropy_via_moments: via,
        entropy_via_moments_delta: via - entropy,
        checks,
        passed,
    })
}

pub fn analyze(args: &AnalyzeArgs) -> Result<Outcome, Error> {
    let functions = args.input.load()?;
    let reports = functions
        .iter()
        .map(|f| analyze_one(f, args.p, &args.chain))
        .collect::<Result<Vec<_>, _>>()?;
    let mut text = String::new();
    for r in &reports {
        let _ = writeln!(text, "function {} (n={}, p={})", r.tt, r.n, r.p);
        let _ = writeln!(text, "  entropy              {}", fmt17(r.entropy));
        for (k, v) in r.influences.iter().enumerate() {
            let _ = writeln!(text, "  influence[{}]         {}", k + 1, fmt17(*v));
        }
        let _ = writeln!(text, "  total influence      {}", fmt17(r.total_influence));
        let _ = writeln!(text, "  sum sq influence     {}", fmt17(r.sum_sq_influence));
        let _ = writeln!(text, "  min-entropy          {}", fmt17(r.min_entropy));
        let _ = writeln!(text, "  support size         {}", r.support_size);
        let _ = writeln!(text, "  theorem slack        {}", fmt17(r.theorem_slack));
        let _ = writeln!(text, "  conjecture slack     {}", fmt17(r.conjecture_slack));
        let _ = writeln!(
            text,
            "  moments delta        {}",
            fmt17(r.entropy_via_moments_delta)
        );
        for c in r.checks.iter().filter(|c| !c.pass) {
            let tag = if c.kind.is_blocking() {
                "FAIL"
            } else {
                "FINDING"
            };
            let _ = writeln!(text, "  {tag} {} slack {}", c.name, fmt17(c.slack));
        }
    }
    let passed = reports.iter().all(|r| r.passed);
    let json = if reports.len() == 1 {
        bblab_core::report::to_json(&reports[0])
    } else {
        bblab_core::report::to_json(&reports)
    };
    Ok(Outcome {
        text,
        json,
        csv: None,
        passed,
    })
}

pub fn verify(args: &VerifyArgs, seed: u64) -> Result<Outcome, Error> {
    let source = match (&args.file, args.n, args.random) {
        (Some(path), _, _) => FunctionSource::File(path.clone()),
        (None, Some(n), Some(count)) => FunctionSource::Random { n, count, seed },
        (None, Some(n), None) => FunctionSource::Exhaustive(n),
        (None, None, _) => return Err(Error::BadTable("either --n or --file is required".into())),
    };
    let options = SuiteOptions {
        chain: args.chain.clone(),
        seed,
        identities: !args.bounds_only,
        ..SuiteOptions::default()
    };
    let grid: Vec<f64> = args.p_grid.iter().map(|b| b.p()).collect();
    let report = run_suite(&source, &grid, &options)?;
    Ok(Outcome {
        text: verify_text(&report),
        json: report.to_json(),
        csv: None,
        passed: report.passed(),
    })
}

pub fn verify_text(report: &VerificationReport) -> String {
    let mut text = format!(
        "{} functions x {} biases\n",
        report.params.functions,
        report.params.p_grid.len()
    );
    for c in &report.checks {
        let status = match (c.failures, c.kind.is_blocking()) {
            (0, _) => "ok     ",
            (_, true) => "FAIL   ",
            (_, false) => "FINDING",
        };
        let _ = writeln!(
            text,
            "{status} {:<30} count {:>8} failures {:>6} min slack {}",
            c.name,
            c.count,
            c.failures,
            fmt17(c.min_slack)
        );
        if c.failures > 0 {
            let _ = writeln!(
                text,
                "        worst at tt={} p={}",
                c.argmin_tt.as_deref().unwrap_or("-"),
                c.argmin_p.map(fmt17).unwrap_or_default()
            );
        }
    }
    if report.conjecture_failures() > 0 {
        let _ = writeln!(
            text,
            "FINDING: {} instances fall below the conjectured sharp bound",
            report.conjecture_failures()
        );
    }
    let _ = writeln!(text, "{}", if report.passed() { "PASS" } else { "FAIL" });
    text
}

fn search_one(args: &SearchArgs, n: usize, bias: Bias, seed: u64) -> Result<SearchReport, Error> {
    match args.mode {
        SearchMode::Exhaustive => exhaustive_search(
            n,
            bias,
            ExhaustiveOptions {
                dedup_permutations: args.dedup_perms,
                allow_long: args.force_long,
                top_k: Some(args.top),
            },
        ),
        SearchMode::Random => random_search(n, bias, args.samples, seed, Some(args.top)),
        SearchMode::Refine => refine_search(args, n, bias, seed),
    }
}

/// Refines `--start`, or else the best `--top` draws of a random search.
fn refine_search(
    args: &SearchArgs,
    n: usize,
    bias: Bias,
    seed: u64,
) -> Result<SearchReport, Error> {
    let starts: Vec<BooleanFunction> = match &args.start {
        Some(f) => vec![f.clone()],
        None => random_search(n, bias, args.samples, seed, Some(args.top))?
            .leaderboard
            .iter()
            .map(ExtremalRecord::function)
            .collect(),
    };
    let mut config = SearchConfig::new(n, bias);
    config.top_k = args.top;
    let mut report = SearchReport::empty(config.clone());
    report.seed = Some(seed);
    for (i, start) in starts.iter().enumerate() {
        let child = bblab_core::rng::derive_seed(seed, i as u64);
        let mut part = SearchReport::empty(config.clone());
        part.insert(ExtremalRecord::score(start, bias).ok_or(Error::ConstantStart)?);
        part.insert(local_refine(start, bias, args.budget, child)?);
        report = merge_reports(report, part)?;
    }
    Ok(report)
}

pub fn search(args: &SearchArgs, seed: u64) -> Result<Outcome, Error> {
    let n = match (args.n, &args.start) {
        (Some(n), Some(f)) if n != f.n() => {
            return Err(Error::SizeMismatch(n, f.n()));
        }
        (Some(n), _) => n,
        (None, Some(f)) => f.n(),
        (None, None) => return Err(Error::BadTable("--n is required".into())),
    };
    let biases = match (&args.p, &args.p_grid) {
        (Some(b), _) => vec![*b],
        (None, Some(grid)) => grid.clone(),
        (None, None) => default_grid(),
    };
    let reports = biases
        .iter()
        .map(|&b| search_one(args, n, b, seed))
        .collect::<Result<Vec<_>, _>>()?;

    let mut text = String::new();
    for r in &reports {
        search_text(&mut text, r);
    }
    let json = if reports.len() == 1 {
        reports[0].to_json()
    } else {
        bblab_core::report::to_json(&reports)
    };
    let csv = reports
        .iter()
        .enumerate()
        .fold(String::new(), |mut acc, (i, r)| {
            let body = r.to_csv();
            acc.push_str(if i == 0 {
                &body
            } else {
                body.split_once('\n').map_or("", |x| x.1)
            });
            acc
        });
    Ok(Outcome {
        text,
        json,
        csv: Some(csv),
        passed: true,
    })
}

fn search_text(text: &mut String, r: &SearchReport) {
    let _ = writeln!(
        text,
        "n={} p={} h(q)={} q(1-q)={}",
        r.config.n,
        r.config.p,
        fmt17(r.h_q),
        fmt17(r.theorem_constant)
    );
    let _ = writeln!(
        text,
        "  evaluated {} skipped constant {} dedup saved {} in {:.3}s",
        r.stats.evaluated,
        r.stats.skipped_constant,
        r.stats.dedup_saved,
        r.stats.wall_time.as_secs_f64()
    );
    if let Some(best) = &r.best {
        let _ = writeln!(text, "  min ratio {} at {}", fmt17(best.ratio), best.tt);
        if best.conjecture_slack < -1e-9 {
            let _ = writeln!(
                text,
                "  FINDING: {} lies below h(q) by {}",
                best.tt,
                fmt17(-best.conjecture_slack)
            );
        }
    }
    for (i, rec) in r.leaderboard.iter().enumerate() {
        let _ = writeln!(
            text,
            "  {:>3}. {} ratio {}",
            i + 1,
            rec.tt,
            fmt17(rec.ratio)
        );
    }
}

/// One grid point of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    #[serde(serialize_with = "sig17")]
    pub p: f64,
    #[serde(serialize_with = "sig17")]
    pub min_ratio: f64,
    #[serde(serialize_with = "sig17")]
    pub h_q: f64,
    #[serde(serialize_with = "sig17")]
    pub theorem_constant: f64,
    pub argmin: Vec<String>,
    pub evaluated: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub n: usize,
    pub mode: &'static str,
    pub seed: Option<u64>,
    pub points: Vec<SweepPoint>,
}

pub fn sweep(args: &SweepArgs, seed: u64) -> Result<Outcome, Error> {
    let (mode, name) = match args.mode {
        SearchMode::Exhaustive => (
            bblab_core::search::SweepMode::Exhaustive {
                n: args.n,
                options: ExhaustiveOptions {
                    dedup_permutations: args.dedup_perms,
                    allow_long: args.force_long,
                    top_k: None,
                },
            },
            "exhaustive",
        ),
        SearchMode::Random => (
            bblab_core::search::SweepMode::Random {
                n: args.n,
                samples: args.samples,
                seed,
            },
            "random",
        ),
        SearchMode::Refine => {
            return Err(Error::BadTable(
                "sweep supports exhaustive and random modes".into(),
            ));
        }
    };
    let grid: Vec<f64> = args.p_grid.iter().map(|b| b.p()).collect();
    let reports = bblab_core::search::p_sweep(mode, &grid)?;
    let points: Vec<SweepPoint> = reports
        .iter()
        .map(|r| SweepPoint {
            p: r.config.p,
            min_ratio: r.min_ratio().unwrap_or(f64::NAN),
            h_q: r.h_q,
            theorem_constant: r.theorem_constant,
            argmin: r.argmin.iter().map(|a| a.tt.clone()).collect(),
            evaluated: r.stats.evaluated,
        })
        .collect();
    let report = SweepReport {
        n: args.n,
        mode: name,
        seed: matches!(args.mode, SearchMode::Random).then_some(seed),
        points,
    };

    let mut text = format!(
        "{:>22} {:>24} {:>24} {:>24}\n",
        "p", "min ratio", "h(q)", "q(1-q)"
    );
    let mut csv = csv_writer();
    csv.write_record(["p", "min_ratio", "h_q", "theorem_constant", "argmin"])
        .expect("in-memory write");
    for pt in &report.points {
        let _ = writeln!(
            text,
            "{:>22} {:>24} {:>24} {:>24}",
            fmt17(pt.p),
            fmt17(pt.min_ratio),
            fmt17(pt.h_q),
            fmt17(pt.theorem_constant)
        );
        if pt.min_ratio < pt.h_q - 1e-9 {
            let _ = writeln!(text, "  FINDING: minimum below h(q) at p={}", pt.p);
        }
        csv.write_record([
            fmt17(pt.p),
            fmt17(pt.min_ratio),
            fmt17(pt.h_q),
            fmt17(pt.theorem_constant),
            pt.argmin.join(" "),
        ])
        .expect("in-memory write");
    }
    let passed = report
        .points
        .iter()
        .all(|pt| pt.min_ratio >= pt.theorem_constant - 1e-9);
    Ok(Outcome {
        text,
        json: bblab_core::report::to_json(&report),
        csv: Some(finish_csv(csv)),
        passed,
    })
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::Writer::from_writer(Vec::new())
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 output")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub tt: String,
    #[serde(serialize_with = "sig17")]
    pub p: f64,
    #[serde(serialize_with = "sig17")]
    pub eps: f64,
    #[serde(serialize_with = "sig17")]
    pub spectral: f64,
    pub mc_samples: Option<u64>,
    pub seed: Option<u64>,
    pub monte_carlo: Option<MonteCarlo>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarlo {
    #[serde(serialize_with = "sig17")]
    pub estimate: f64,
    #[serde(serialize_with = "sig17")]
    pub difference: f64,
}

pub fn stability(args: &StabilityArgs, seed: u64) -> Result<Outcome, Error> {
    let spec = forward_transform(&args.tt, args.p);
    let spectral = noise_stability(&spec, args.eps)?;
    let monte_carlo = match args.mc {
        Some(samples) => {
            let estimate = noise_stability_mc(&args.tt, args.p, args.eps, samples, seed)?;
            Some(MonteCarlo {
                estimate,
                difference: estimate - spectral,
            })
        }
        None => None,
    };
    let report = StabilityReport {
        tt: args.tt.to_tt_string(),
        p: args.p.p(),
        eps: args.eps,
        spectral,
        mc_samples: args.mc,
        seed: args.mc.map(|_| seed),
        monte_carlo,
    };
    let mut text = format!("spectral   {}\n", fmt17(report.spectral));
    if let Some(mc) = &report.monte_carlo {
        let _ = writeln!(text, "monte carlo {}", fmt17(mc.estimate));
        let _ = writeln!(text, "difference {}", fmt17(mc.difference));
    }
    Ok(Outcome {
        text,
        json: bblab_core::report::to_json(&report),
        csv: None,
        passed: true,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainStep {
    pub k: usize,
    pub coord: usize,
    pub alive: Vec<usize>,
    #[serde(serialize_with = "sig17")]
    pub moment: f64,
    #[serde(serialize_with = "sig17")]
    pub increment: f64,
    #[serde(serialize_with = "sig17")]
    pub increment_two_point_form: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentsReport {
    pub tt: String,
    #[serde(serialize_with = "sig17")]
    pub p: f64,
    #[serde(serialize_with = "sig17")]
    pub eps: f64,
    pub chain: String,
    /// `M` of the empty alive set.
    #[serde(serialize_with = "sig17")]
    pub base_moment: f64,
    pub steps: Vec<ChainStep>,
    /// `M_[n] - M_empty - sum_k Delta_k`, with each `Delta_k` in its two-point form.
    #[serde(serialize_with = "sig17")]
    pub telescoping_residual: f64,
    pub ledger: Option<ProofLedger>,
}

pub fn moments(args: &MomentsArgs) -> Result<Outcome, Error> {
    let f = &args.tt;
    let n = f.n();
    if !args.no_ledger && n > LEDGER_MAX_VARS {
        return Err(Error::TooLarge {
            what: "proof ledger (pass --no-ledger)",
            n,
            limit: LEDGER_MAX_VARS,
        });
    }
    let chain = chain_for(&args.chain, n)?;
    let base = moment(f, args.p, SubsetMask(0), args.eps)?.value;
    let mut steps = Vec::with_capacity(n);
    let mut sum = 0.0;
    for k in 1..=n {
        let inc = increment(f, args.p, &chain, k, args.eps)?;
        sum += inc.two_point_form;
        let alive = chain.alive(k);
        steps.push(ChainStep {
            k,
            coord: chain.coord(k),
            alive: (1..=n).filter(|&c| alive.contains(c)).collect(),
            moment: moment(f, args.p, alive, args.eps)?.value,
            increment: inc.direct,
            increment_two_point_form: inc.two_point_form,
        });
    }
    let top = steps.last().map_or(base, |s| s.moment);
    let ledger = if args.no_ledger {
        None
    } else {
        Some(proof_slack_report(f, args.p, &chain)?)
    };
    let report = MomentsReport {
        tt: f.to_tt_string(),
        p: args.p.p(),
        eps: args.eps,
        chain: chain.to_string(),
        base_moment: base,
        steps,
        telescoping_residual: top - base - sum,
        ledger,
    };

    let mut text = format!("M[] = {}\n", fmt17(report.base_moment));
    for s in &report.steps {
        let _ = writeln!(
            text,
            "k={} +x{}  M = {}  delta = {}  two-point form = {}",
            s.k,
            s.coord,
            fmt17(s.moment),
            fmt17(s.increment),
            fmt17(s.increment_two_point_form)
        );
    }
    let _ = writeln!(
        text,
        "telescoping residual {}",
        fmt17(report.telescoping_residual)
    );
    let mut passed = report.telescoping_residual.abs() <= 1e-9;
    if let Some(ledger) = &report.ledger {
        let _ = writeln!(
            text,
            "{:>3} {:>5} {:>24} {:>24} {:>24} {:>24} {:>24} {:>24} {:>24}",
            "k",
            "coord",
            "(i) -dDelta",
            "entropy bound",
            "(ii) harmonic",
            "E(sum|ab|)^2",
            "(iii)",
            "(iv)",
            "(v)"
        );
        for s in &ledger.steps {
            let _ = writeln!(
                text,
                "{:>3} {:>5} {:>24} {:>24} {:>24} {:>24} {:>24} {:>24} {:>24}",
                s.k,
                s.coord,
                fmt17(s.neg_derivative),
                fmt17(s.entropy_bound),
                fmt17(s.harmonic),
                fmt17(s.mean_sq_abs_sum),
                fmt17(s.sq_abs_mean_sum),
                fmt17(s.sq_mean_abs_sum),
                fmt17(s.correlation_sq)
            );
        }
        let _ = writeln!(text, "ledger min slack {}", fmt17(ledger.min_slack()));
        passed &= ledger.min_slack() >= -bblab_core::verify::INEQUALITY_TOL;
    }
    Ok(Outcome {
        text,
        json: bblab_core::report::to_json(&report),
        csv: None,
        passed,
    })
}

/// Runs a parsed command line.
pub fn run(cli: &Cli) -> Result<Outcome, Error> {
    match &cli.command {
        Command::Analyze(a) => analyze(a),
        Command::Verify(a) => verify(a, cli.seed),
        Command::Search(a) => search(a, cli.seed),
        Command::Sweep(a) => sweep(a, cli.seed),
        Command::Stability(a) => stability(a, cli.seed),
        Command::Moments(a) => moments(a),
    }
}

impl Command {
    /// Destinations for the JSON and CSV outputs.
    pub fn outputs(&self) -> (Option<&Path>, Option<&Path>) {
        match self {
            Command::Analyze(a) => (a.json.as_deref(), None),
            Command::Verify(a) => (a.json.as_deref(), None),
            Command::Search(a) => (a.json.as_deref(), a.csv.as_deref()),
            Command::Sweep(a) => (a.json.as_deref(), a.csv.as_deref()),
            Command::Stability(a) => (a.json.as_deref(), None),
            Command::Moments(a) => (a.json.as_deref(), None),
        }
    }
}

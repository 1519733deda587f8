//! Batch checkers for every identity and inequality of the analysis stack.
//!
//! Each check yields a [`CheckResult`] with a signed slack. Inequalities
//! pass when `slack >= -tol`; identities when `|slack| <= tol`. For
//! aggregation every result is mapped to a score (`slack` for inequalities,
//! `-|slack|` for identities) so that "pass" always means `score >= -tol`
//! and the worst case is simply the minimum score.

use std::cmp::Ordering;
use std::path::PathBuf;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cube::{
    deposit_bits, full_mask, measure_table, Bias, BooleanFunction, PointMask, SubsetMask,
};
use crate::error::{Error, Result};
use crate::quantities::{
    cross_correlation, derivative_spectrum, derivative_values, influences, influences_spectral,
    spectral_entropy, support_size, total_influence, SUPPORT_TOL,
};
use crate::report::{sig17, sig17_vec};
use crate::restriction::{
    entropy_via_moments, increment, moment, proof_slack_report, restrict, restricted_spectrum,
    restricted_table, Chain, Restriction,
};
use crate::rng::chunk_rng;
use crate::transform::{forward_transform, inverse_transform, plancherel, Spectrum};

pub const IDENTITY_TOL: f64 = 1e-9;
pub const INEQUALITY_TOL: f64 = 1e-9;
pub const SUPPORT_SLACK_TOL: f64 = 1e-6;

/// Largest `n` accepted by [`check_identities`].
pub const IDENTITY_MAX_VARS: usize = 8;
/// Largest `n` of an exhaustive function source.
pub const EXHAUSTIVE_MAX_VARS: usize = 4;

/// `eps` values at which increments and the telescoping sum are checked.
pub const EPS_PROBES: [f64; 4] = [0.0, 0.05, 0.1, 0.2];

/// Default bias grid for suites and sweeps.
pub const DEFAULT_P_GRID: [f64; 11] = [0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Identity,
    Inequality,
    /// Inequality whose failure is a finding rather than an error.
    Conjecture,
}

impl CheckKind {
    /// Whether a failure of this kind fails the suite.
    pub fn is_blocking(self) -> bool {
        !matches!(self, CheckKind::Conjecture)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub kind: CheckKind,
    pub function: String,
    #[serde(serialize_with = "sig17")]
    pub p: f64,
    #[serde(serialize_with = "sig17")]
    pub left: f64,
    #[serde(serialize_with = "sig17")]
    pub right: f64,
    #[serde(serialize_with = "sig17")]
    pub slack: f64,
    #[serde(serialize_with = "sig17")]
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckResult {
    fn new(
        name: &'static str,
        kind: CheckKind,
        f: &BooleanFunction,
        bias: Bias,
        left: f64,
        right: f64,
        tolerance: f64,
    ) -> Self {
        let slack = left - right;
        let mut out = Self {
            name,
            kind,
            function: f.to_tt_string(),
            p: bias.p(),
            left,
            right,
            slack,
            tolerance,
            pass: false,
        };
        out.pass = out.score() >= -tolerance;
        out
    }

    /// `slack` for inequalities, `-|slack|` for identities; NaN maps to `-inf`.
    pub fn score(&self) -> f64 {
        let s = match self.kind {
            CheckKind::Identity => 0.0 - self.slack.abs(),
            _ => self.slack,
        };
        if s.is_nan() {
            f64::NEG_INFINITY
        } else {
            s
        }
    }
}

/// `Ent_p(f) >= q(1-q) sum_k Inf_k^2`.
pub fn check_theorem(f: &BooleanFunction, bias: Bias) -> CheckResult {
    let spec = forward_transform(f, bias);
    theorem_from(f, bias, &spec)
}

fn entropy_of(spec: &Spectrum) -> f64 {
    spectral_entropy(spec)
        .map(|e| e.value())
        .unwrap_or(f64::NAN)
}

fn theorem_from(f: &BooleanFunction, bias: Bias, spec: &Spectrum) -> CheckResult {
    let rhs = bias.theorem_constant() * influences(f, bias).sum_squares();
    CheckResult::new(
        "theorem_lower_bound",
        CheckKind::Inequality,
        f,
        bias,
        entropy_of(spec),
        rhs,
        INEQUALITY_TOL,
    )
}

/// `Ent_p(f) >= h(q) sum_k Inf_k^2`; failures are findings.
pub fn check_conjecture(f: &BooleanFunction, bias: Bias) -> CheckResult {
    let spec = forward_transform(f, bias);
    conjecture_from(f, bias, &spec)
}

fn conjecture_from(f: &BooleanFunction, bias: Bias, spec: &Spectrum) -> CheckResult {
    let rhs = bias.conjecture_constant() * influences(f, bias).sum_squares();
    CheckResult::new(
        "conjecture_sharp_bound",
        CheckKind::Conjecture,
        f,
        bias,
        entropy_of(spec),
        rhs,
        INEQUALITY_TOL,
    )
}

/// `|supp f^| >= exp(Ent_p(f))`.
pub fn check_support_corollary(f: &BooleanFunction, bias: Bias) -> CheckResult {
    let spec = forward_transform(f, bias);
    support_from(f, bias, &spec)
}

fn support_from(f: &BooleanFunction, bias: Bias, spec: &Spectrum) -> CheckResult {
    CheckResult::new(
        "support_corollary",
        CheckKind::Inequality,
        f,
        bias,
        support_size(spec, SUPPORT_TOL) as f64,
        entropy_of(spec).exp(),
        SUPPORT_SLACK_TOL,
    )
}

/// Tracks the instance with the largest `|left - right|`.
struct Worst {
    left: f64,
    right: f64,
}

impl Worst {
    fn new() -> Self {
        Self {
            left: 0.0,
            right: 0.0,
        }
    }

    fn see(&mut self, left: f64, right: f64) {
        let dev = (left - right).abs();
        if dev > (self.left - self.right).abs() || dev.is_nan() {
            self.left = left;
            self.right = right;
        }
    }
}

/// Names of the bundled identity checks, in report order.
pub const IDENTITY_CHECKS: [&str; 16] = [
    "parseval",
    "transform_roundtrip",
    "influence_routes",
    "total_influence",
    "cross_correlation_plancherel",
    "cross_correlation_pointwise",
    "cross_correlation_influence",
    "restricted_formula",
    "restriction_mean",
    "restricted_parseval",
    "restriction_recursion",
    "cross_term",
    "increment_two_point",
    "telescoping",
    "entropy_as_derivative",
    "proof_chain",
];

/// Runs every bundled identity (and the proof-ledger chain) on one function.
pub fn check_identities(
    f: &BooleanFunction,
    bias: Bias,
    chain: &Chain,
) -> Result<Vec<CheckResult>> {
    let n = f.n();
    if n > IDENTITY_MAX_VARS {
        return Err(Error::TooLarge {
            what: "identity suite",
            n,
            limit: IDENTITY_MAX_VARS,
        });
    }
    if chain.n() != n {
        return Err(Error::SizeMismatch(chain.n(), n));
    }
    let spec = forward_transform(f, bias);
    let p = bias.p();
    let id = |name, w: Worst| {
        CheckResult::new(
            name,
            CheckKind::Identity,
            f,
            bias,
            w.left,
            w.right,
            IDENTITY_TOL,
        )
    };
    let mut out = Vec::with_capacity(IDENTITY_CHECKS.len());

    let mut w = Worst::new();
    w.see(spec.mass(), 1.0);
    out.push(id("parseval", w));

    let mut w = Worst::new();
    for (a, b) in inverse_transform(&spec).iter().zip(f.values()) {
        w.see(*a, b);
    }
    out.push(id("transform_roundtrip", w));

    let comb = influences(f, bias);
    let spectral = influences_spectral(&spec);
    let mut w = Worst::new();
    for k in 1..=n {
        w.see(comb.get(k), spectral.get(k));
    }
    out.push(id("influence_routes", w));

    let mut w = Worst::new();
    w.see(total_influence(&spec), comb.total());
    out.push(id("total_influence", w));

    let measure = measure_table(bias, n);
    let mut w_inner = Worst::new();
    let mut w_pointwise = Worst::new();
    let mut w_closed = Worst::new();
    for k in 1..=n {
        let cc = cross_correlation(&spec, k)?;
        w_inner.see(cc, plancherel(&spec, &derivative_spectrum(&spec, k)?)?);
        let pointwise: f64 = derivative_values(f, bias, k)?
            .iter()
            .zip(f.values())
            .zip(&measure)
            .map(|((d, v), w)| w * d * v)
            .sum();
        w_pointwise.see(cc, pointwise);
        w_closed.see(cc, 2.0 * bias.sigma() * (2.0 * p - 1.0) * comb.get(k));
    }
    out.push(id("cross_correlation_plancherel", w_inner));
    out.push(id("cross_correlation_pointwise", w_pointwise));
    out.push(id("cross_correlation_influence", w_closed));

    let full = full_mask(n);
    let mut w_formula = Worst::new();
    let mut w_mean = Worst::new();
    for alive in 0..=full {
        let dead = full & !alive;
        let m = alive.count_ones() as usize;
        let mut mean = vec![0.0; 1 << m];
        for zc in 0..1u32 << dead.count_ones() {
            let z = deposit_bits(zc, dead);
            let r = Restriction::new(SubsetMask(alive), PointMask(z), n)?;
            let formula = restricted_spectrum(&spec, &r)?;
            let direct = forward_transform(&restrict(f, &r)?, bias);
            let wz = crate::cube::point_measure(PointMask(zc), bias, dead.count_ones() as usize);
            for (t, (a, b)) in formula.coeffs().iter().zip(direct.coeffs()).enumerate() {
                w_formula.see(*a, *b);
                mean[t] += wz * a;
            }
        }
        for (t, v) in mean.iter().enumerate() {
            w_mean.see(*v, spec.coeff(SubsetMask(deposit_bits(t as u32, alive))));
        }
    }
    out.push(id("restricted_formula", w_formula));
    out.push(id("restriction_mean", w_mean));

    let mut w_parseval = Worst::new();
    let mut w_recursion = Worst::new();
    for k in 1..=n {
        let coord = chain.coord(k);
        let bit = 1usize << (coord - 1);
        let upper = chain.alive(k);
        let dead = full & !upper.0;
        let outer = restricted_table(f, bias, upper);
        let inner = restricted_table(f, bias, chain.alive(k - 1));
        let mut per_z = vec![0.0; 1 << dead.count_ones()];
        crate::restriction::for_each_pair(
            &outer,
            &vec![1.0; outer.len()],
            coord,
            |_, a, b, idx| {
                per_z[crate::cube::extract_bits(idx as u32, dead) as usize] += a * a + b * b;
                for zk in [false, true] {
                    let at = if zk { idx | bit } else { idx };
                    w_recursion.see(inner[at], a + bias.chi(zk) * b);
                }
            },
        );
        for total in per_z {
            w_parseval.see(total, 1.0);
        }
    }
    out.push(id("restricted_parseval", w_parseval));
    out.push(id("restriction_recursion", w_recursion));

    let ledger = proof_slack_report(f, bias, chain)?;
    let mut w = Worst::new();
    for step in &ledger.steps {
        w.see(step.cross_term_residual, 0.0);
    }
    out.push(id("cross_term", w));

    let mut w_two_point = Worst::new();
    let mut w_tele = Worst::new();
    for &eps in &EPS_PROBES {
        let mut sum = 0.0;
        for k in 1..=n {
            let inc = increment(f, bias, chain, k, eps)?;
            w_two_point.see(inc.direct, inc.two_point_form);
            sum += inc.two_point_form;
        }
        let top = moment(f, bias, SubsetMask(full), eps)?.value;
        let bottom = moment(f, bias, SubsetMask(0), eps)?.value;
        w_tele.see(top, sum + bottom);
    }
    out.push(id("increment_two_point", w_two_point));
    out.push(id("telescoping", w_tele));

    let mut w = Worst::new();
    w.see(
        entropy_via_moments(f, bias, chain)?.value(),
        entropy_of(&spec),
    );
    out.push(id("entropy_as_derivative", w));

    out.push(CheckResult::new(
        "proof_chain",
        CheckKind::Inequality,
        f,
        bias,
        ledger.min_slack(),
        0.0,
        INEQUALITY_TOL,
    ));
    Ok(out)
}

/// Where a suite draws its functions from.
#[derive(Debug, Clone, PartialEq)]
pub enum FunctionSource {
    /// Every truth table on `n <= 4` coordinates.
    Exhaustive(usize),
    /// One truth-table string per line, `#` starts a comment.
    File(PathBuf),
    /// `count` uniform random tables on `n` coordinates.
    Random {
        n: usize,
        count: u64,
        seed: u64,
    },
    List(Vec<BooleanFunction>),
}

impl FunctionSource {
    /// Materializes the source; exhaustive and random sources are generated
    /// lazily by index.
    fn resolve(&self) -> Result<Resolved> {
        match self {
            FunctionSource::Exhaustive(n) => {
                if *n == 0 || *n > EXHAUSTIVE_MAX_VARS {
                    return Err(Error::TooLarge {
                        what: "exhaustive function source",
                        n: *n,
                        limit: EXHAUSTIVE_MAX_VARS,
                    });
                }
                Ok(Resolved::Exhaustive(*n))
            }
            FunctionSource::Random { n, count, seed } => {
                if *n == 0 || *n > crate::MAX_VARS {
                    return Err(Error::TooManyVariables(*n));
                }
                Ok(Resolved::Random {
                    n: *n,
                    count: *count,
                    seed: *seed,
                })
            }
            FunctionSource::File(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::SourceUnavailable(format!("{}: {e}", path.display())))?;
                Ok(Resolved::List(parse_function_list(&text)?))
            }
            FunctionSource::List(fs) => Ok(Resolved::List(fs.clone())),
        }
    }
}

/// Parses the corpus format: one truth table per line, `#` comments.
pub fn parse_function_list(text: &str) -> Result<Vec<BooleanFunction>> {
    text.lines()
        .map(|line| line.split('#').next().unwrap_or("").trim())
        .filter(|line| !line.is_empty())
        .map(crate::cube::parse_truth_table)
        .collect()
}

enum Resolved {
    Exhaustive(usize),
    Random { n: usize, count: u64, seed: u64 },
    List(Vec<BooleanFunction>),
}

impl Resolved {
    fn len(&self) -> u64 {
        match self {
            Resolved::Exhaustive(n) => 1u64 << (1u64 << n),
            Resolved::Random { count, .. } => *count,
            Resolved::List(fs) => fs.len() as u64,
        }
    }

    fn get(&self, i: u64) -> BooleanFunction {
        match self {
            Resolved::Exhaustive(n) => {
                BooleanFunction::from_fn(*n, |x| i >> x & 1 == 1).expect("n validated")
            }
            Resolved::Random { n, seed, .. } => random_function(*n, *seed, i),
            Resolved::List(fs) => fs[i as usize].clone(),
        }
    }

    fn n(&self) -> Option<usize> {
        match self {
            Resolved::Exhaustive(n) | Resolved::Random { n, .. } => Some(*n),
            Resolved::List(fs) => {
                let n = fs.first()?.n();
                fs.iter().all(|f| f.n() == n).then_some(n)
            }
        }
    }
}

/// The `i`-th uniform random function under `seed`.
pub fn random_function(n: usize, seed: u64, i: u64) -> BooleanFunction {
    let mut rng = chunk_rng(seed, i);
    BooleanFunction::from_fn(n, |_| rng.random::<bool>()).expect("n validated by caller")
}

#[derive(Debug, Clone)]
pub struct SuiteOptions {
    /// Chain used when a function's `n` matches; the identity order otherwise.
    pub chain: Option<Chain>,
    pub seed: u64,
    /// Run the identity bundle (only for `n <= IDENTITY_MAX_VARS`).
    pub identities: bool,
    pub suite: String,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            chain: None,
            seed: crate::rng::DEFAULT_SEED,
            identities: true,
            suite: "bblab-verify".into(),
        }
    }
}

/// Aggregate of one named check over a suite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckAggregate {
    pub name: &'static str,
    #[serde(skip)]
    pub kind: CheckKind,
    pub count: u64,
    pub failures: u64,
    #[serde(serialize_with = "sig17")]
    pub min_slack: f64,
    pub argmin_tt: Option<String>,
    #[serde(serialize_with = "opt_sig17")]
    pub argmin_p: Option<f64>,
}

fn opt_sig17<S: serde::Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => sig17(v, s),
        None => s.serialize_none(),
    }
}

impl CheckAggregate {
    fn from_result(r: &CheckResult) -> Self {
        Self {
            name: r.name,
            kind: r.kind,
            count: 1,
            failures: u64::from(!r.pass),
            min_slack: r.score(),
            argmin_tt: Some(r.function.clone()),
            argmin_p: Some(r.p),
        }
    }

    fn argmin_key(&self) -> (f64, &str, f64) {
        (
            self.min_slack,
            self.argmin_tt.as_deref().unwrap_or(""),
            self.argmin_p.unwrap_or(f64::INFINITY),
        )
    }

    /// Associative, commutative merge: counts add, the smaller slack wins with
    /// ties broken by truth-table string, then `p`.
    pub fn merge(mut self, other: Self) -> Self {
        let take_other = {
            let (a, b) = (self.argmin_key(), other.argmin_key());
            a.0.total_cmp(&b.0)
                .then_with(|| a.1.cmp(b.1))
                .then_with(|| a.2.total_cmp(&b.2))
                == Ordering::Greater
        };
        self.count += other.count;
        self.failures += other.failures;
        if take_other {
            self.min_slack = other.min_slack;
            self.argmin_tt = other.argmin_tt;
            self.argmin_p = other.argmin_p;
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tolerances {
    #[serde(serialize_with = "sig17")]
    pub identity: f64,
    #[serde(serialize_with = "sig17")]
    pub inequality: f64,
    #[serde(serialize_with = "sig17")]
    pub support: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            identity: IDENTITY_TOL,
            inequality: INEQUALITY_TOL,
            support: SUPPORT_SLACK_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteParams {
    pub n: Option<usize>,
    #[serde(serialize_with = "sig17_vec")]
    pub p_grid: Vec<f64>,
    pub tolerances: Tolerances,
    pub seed: u64,
    pub chain: Option<String>,
    pub functions: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub suite: String,
    /// Generator tag; deliberately not a timestamp so reports are reproducible.
    pub created: String,
    pub params: SuiteParams,
    pub checks: Vec<CheckAggregate>,
}

impl VerificationReport {
    pub fn check(&self, name: &str) -> Option<&CheckAggregate> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Failures of identity and theorem-grade checks.
    pub fn blocking_failures(&self) -> u64 {
        self.checks
            .iter()
            .filter(|c| c.kind.is_blocking())
            .map(|c| c.failures)
            .sum()
    }

    pub fn conjecture_failures(&self) -> u64 {
        self.checks
            .iter()
            .filter(|c| !c.kind.is_blocking())
            .map(|c| c.failures)
            .sum()
    }

    pub fn passed(&self) -> bool {
        self.blocking_failures() == 0
    }

    pub fn to_json(&self) -> String {
        crate::report::to_json(self)
    }
}

/// Every check for one `(f, p)`.
pub fn check_all(
    f: &BooleanFunction,
    bias: Bias,
    chain: &Chain,
    identities: bool,
) -> Result<Vec<CheckResult>> {
    let spec = forward_transform(f, bias);
    let mut out = vec![
        theorem_from(f, bias, &spec),
        conjecture_from(f, bias, &spec),
        support_from(f, bias, &spec),
    ];
    if identities && f.n() <= IDENTITY_MAX_VARS {
        out.extend(check_identities(f, bias, chain)?);
    }
    Ok(out)
}

fn fold_into(acc: &mut Vec<CheckAggregate>, results: Vec<CheckResult>) {
    for r in results {
        let agg = CheckAggregate::from_result(&r);
        match acc.iter_mut().find(|a| a.name == r.name) {
            Some(slot) => *slot = slot.clone().merge(agg),
            None => acc.push(agg),
        }
    }
}

fn merge_partials(mut a: Vec<CheckAggregate>, b: Vec<CheckAggregate>) -> Vec<CheckAggregate> {
    for agg in b {
        match a.iter_mut().find(|x| x.name == agg.name) {
            Some(slot) => *slot = slot.clone().merge(agg),
            None => a.push(agg),
        }
    }
    a
}

fn canonical_order(name: &str) -> usize {
    match name {
        "theorem_lower_bound" => 0,
        "conjecture_sharp_bound" => 1,
        "support_corollary" => 2,
        other => {
            3 + IDENTITY_CHECKS
                .iter()
                .position(|c| *c == other)
                .unwrap_or(IDENTITY_CHECKS.len())
        }
    }
}

/// Runs every check over a function source and bias grid.
///
/// Functions are processed in parallel on the ambient rayon pool; partial
/// aggregates merge with [`CheckAggregate::merge`], so the report does not
/// depend on the number of workers.
pub fn run_suite(
    source: &FunctionSource,
    p_grid: &[f64],
    options: &SuiteOptions,
) -> Result<VerificationReport> {
    let resolved = source.resolve()?;
    let biases = p_grid
        .iter()
        .map(|&p| Bias::new(p))
        .collect::<Result<Vec<_>>>()?;
    let total = resolved.len();
    let mut checks = (0..total)
        .into_par_iter()
        .map(|i| -> Result<Vec<CheckAggregate>> {
            let f = resolved.get(i);
            let chain = match &options.chain {
                Some(c) if c.n() == f.n() => c.clone(),
                _ => Chain::identity(f.n()),
            };
            let mut acc = Vec::new();
            for &bias in &biases {
                fold_into(&mut acc, check_all(&f, bias, &chain, options.identities)?);
            }
            Ok(acc)
        })
        .try_reduce(Vec::new, |a, b| Ok(merge_partials(a, b)))?;
    checks.sort_by_key(|c| canonical_order(c.name));
    Ok(VerificationReport {
        suite: options.suite.clone(),
        created: concat!("bblab ", env!("CARGO_PKG_VERSION")).to_string(),
        params: SuiteParams {
            n: resolved.n(),
            p_grid: p_grid.to_vec(),
            tolerances: Tolerances::default(),
            seed: options.seed,
            chain: options.chain.as_ref().map(Chain::to_string),
            functions: total,
        },
        checks,
    })
}

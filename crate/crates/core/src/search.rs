//! Extremal-function search for the ratio `Ent_p(f) / sum_k Inf_k^2`.

use std::cmp::Ordering;
use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cube::{Bias, BooleanFunction};
use crate::error::{Error, Result};
use crate::quantities::{influences_spectral, spectral_entropy};
use crate::report::{fmt17, sig17};
use crate::rng::chunk_rng;
use crate::transform::forward_transform;

/// Largest `n` searched exhaustively without the long-run opt-in.
pub const EXHAUSTIVE_MAX_VARS: usize = 4;
/// Largest `n` searched exhaustively at all.
pub const EXHAUSTIVE_LONG_MAX_VARS: usize = 5;
pub const RANDOM_MAX_VARS: usize = 20;
pub const DEFAULT_TOP_K: usize = 20;
/// Records within this distance of the minimum ratio form the argmin set.
pub const ARGMIN_TOL: f64 = 1e-12;
/// At most this many argmin records are kept (smallest truth tables first).
pub const ARGMIN_CAP: usize = 64;

const EXHAUSTIVE_CHUNK: u64 = 1 << 12;
const RANDOM_CHUNK: u64 = 1 << 10;

/// One scored function.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtremalRecord {
    pub tt: String,
    pub n: usize,
    #[serde(serialize_with = "sig17")]
    pub p: f64,
    #[serde(serialize_with = "sig17")]
    pub entropy: f64,
    #[serde(serialize_with = "sig17")]
    pub sum_sq_influence: f64,
    #[serde(serialize_with = "sig17")]
    pub ratio: f64,
    /// `Ent - h(q) sum Inf^2`.
    #[serde(serialize_with = "sig17")]
    pub conjecture_slack: f64,
}

impl ExtremalRecord {
    /// Scores `f`; `None` for constant functions, whose ratio is undefined.
    pub fn score(f: &BooleanFunction, bias: Bias) -> Option<Self> {
        let spec = forward_transform(f, bias);
        let sum_sq_influence = influences_spectral(&spec).sum_squares();
        if sum_sq_influence.is_nan() || sum_sq_influence <= 0.0 {
            return None;
        }
        let entropy = spectral_entropy(&spec).ok()?.value();
        Some(Self {
            tt: f.to_tt_string(),
            n: f.n(),
            p: bias.p(),
            entropy,
            sum_sq_influence,
            ratio: entropy / sum_sq_influence,
            conjecture_slack: entropy - bias.conjecture_constant() * sum_sq_influence,
        })
    }

    pub fn function(&self) -> BooleanFunction {
        self.tt.parse().expect("records hold valid truth tables")
    }

    fn order(&self, other: &Self) -> Ordering {
        self.ratio
            .total_cmp(&other.ratio)
            .then_with(|| self.tt.cmp(&other.tt))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchConfig {
    pub n: usize,
    #[serde(serialize_with = "sig17")]
    pub p: f64,
    pub top_k: usize,
    /// Quotient by coordinate permutations (exhaustive mode only).
    pub dedup_permutations: bool,
}

impl SearchConfig {
    pub fn new(n: usize, bias: Bias) -> Self {
        Self {
            n,
            p: bias.p(),
            top_k: DEFAULT_TOP_K,
            dedup_permutations: false,
        }
    }

    pub fn bias(&self) -> Bias {
        Bias::new(self.p).expect("config holds a validated bias")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SearchStats {
    /// Functions actually scored.
    pub evaluated: u64,
    /// Constant functions drawn and skipped.
    pub skipped_constant: u64,
    /// Functions skipped as symmetric images of an evaluated one.
    pub dedup_saved: u64,
    #[serde(skip)]
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchReport {
    pub config: SearchConfig,
    #[serde(serialize_with = "sig17")]
    pub h_q: f64,
    #[serde(serialize_with = "sig17")]
    pub theorem_constant: f64,
    pub best: Option<ExtremalRecord>,
    /// Every kept record within [`ARGMIN_TOL`] of the minimum ratio.
    pub argmin: Vec<ExtremalRecord>,
    /// Ascending by `(ratio, tt)`.
    pub leaderboard: Vec<ExtremalRecord>,
    pub stats: SearchStats,
    pub seed: Option<u64>,
}

impl SearchReport {
    /// The identity element of [`merge_reports`].
    pub fn empty(config: SearchConfig) -> Self {
        let bias = config.bias();
        Self {
            config,
            h_q: bias.conjecture_constant(),
            theorem_constant: bias.theorem_constant(),
            best: None,
            argmin: Vec::new(),
            leaderboard: Vec::new(),
            stats: SearchStats::default(),
            seed: None,
        }
    }

    pub fn min_ratio(&self) -> Option<f64> {
        self.best.as_ref().map(|r| r.ratio)
    }

    /// Adds one scored record.
    pub fn insert(&mut self, record: ExtremalRecord) {
        let mut single = Self::empty(self.config.clone());
        single.stats.evaluated = 1;
        single.best = Some(record.clone());
        single.argmin = vec![record.clone()];
        single.leaderboard = vec![record];
        self.absorb(single);
    }

    fn absorb(&mut self, other: Self) {
        self.stats.evaluated += other.stats.evaluated;
        self.stats.skipped_constant += other.stats.skipped_constant;
        self.stats.dedup_saved += other.stats.dedup_saved;
        self.stats.wall_time += other.stats.wall_time;
        if self.seed.is_none() {
            self.seed = other.seed;
        }

        self.leaderboard = union_sorted(
            std::mem::take(&mut self.leaderboard),
            other.leaderboard,
            self.config.top_k,
        );

        self.best = match (self.best.take(), other.best) {
            (Some(a), Some(b)) => Some(if b.order(&a) == Ordering::Less { b } else { a }),
            (a, b) => a.or(b),
        };
        if let Some(min) = self.min_ratio() {
            let mut argmin: Vec<_> = std::mem::take(&mut self.argmin)
                .into_iter()
                .chain(other.argmin)
                .filter(|r| r.ratio <= min + ARGMIN_TOL)
                .collect();
            argmin.sort_by(|a, b| a.tt.cmp(&b.tt));
            argmin.dedup_by(|a, b| a.tt == b.tt);
            argmin.truncate(ARGMIN_CAP);
            self.argmin = argmin;
        }
    }

    pub fn to_json(&self) -> String {
        crate::report::to_json(self)
    }

    /// One CSV row per leaderboard record, with a header.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "rank",
            "tt",
            "n",
            "p",
            "entropy",
            "sum_sq_influence",
            "ratio",
            "conjecture_slack",
        ])
        .expect("in-memory write");
        for (i, r) in self.leaderboard.iter().enumerate() {
            w.write_record([
                (i + 1).to_string(),
                r.tt.clone(),
                r.n.to_string(),
                fmt17(r.p),
                fmt17(r.entropy),
                fmt17(r.sum_sq_influence),
                fmt17(r.ratio),
                fmt17(r.conjecture_slack),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
    }
}

fn union_sorted(a: Vec<ExtremalRecord>, b: Vec<ExtremalRecord>, k: usize) -> Vec<ExtremalRecord> {
    let mut all: Vec<_> = a.into_iter().chain(b).collect();
    all.sort_by(ExtremalRecord::order);
    all.dedup_by(|x, y| x.tt == y.tt);
    all.truncate(k);
    all
}

/// Associative, commutative merge of two reports with the same configuration.
pub fn merge_reports(a: SearchReport, b: SearchReport) -> Result<SearchReport> {
    if a.config != b.config {
        return Err(Error::ConfigMismatch(format!(
            "{:?} vs {:?}",
            a.config, b.config
        )));
    }
    let mut out = a;
    out.absorb(b);
    Ok(out)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for rest in permutations(n - 1) {
        for pos in 0..=rest.len() {
            let mut perm = rest.clone();
            perm.insert(pos, n - 1);
            out.push(perm);
        }
    }
    out
}

/// Point maps `x -> pi(x)` for every coordinate permutation except the identity.
fn point_permutations(n: usize) -> Vec<Vec<u32>> {
    permutations(n)
        .into_iter()
        .filter(|perm| perm.iter().enumerate().any(|(i, &j)| i != j))
        .map(|perm| {
            (0..1u32 << n)
                .map(|x| {
                    perm.iter()
                        .enumerate()
                        .filter(|&(i, _)| x >> i & 1 == 1)
                        .fold(0, |acc, (_, &j)| acc | 1 << j)
                })
                .collect()
        })
        .collect()
}

fn permute_bits(bits: u64, map: &[u32]) -> u64 {
    map.iter()
        .enumerate()
        .fold(0, |acc, (x, &y)| acc | (bits >> y & 1) << x)
}

/// Options for [`exhaustive_search`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExhaustiveOptions {
    pub dedup_permutations: bool,
    /// Permit `n = 5` (2^31 representatives).
    pub allow_long: bool,
    pub top_k: Option<usize>,
}

/// Scores every non-constant table on `n` coordinates, one per negation pair
/// (the representative has `f(0) = -1`), optionally one per permutation orbit.
pub fn exhaustive_search(n: usize, bias: Bias, options: ExhaustiveOptions) -> Result<SearchReport> {
    let limit = if options.allow_long {
        EXHAUSTIVE_LONG_MAX_VARS
    } else {
        EXHAUSTIVE_MAX_VARS
    };
    if n == 0 || n > limit {
        return Err(Error::TooLarge {
            what: "exhaustive search",
            n,
            limit,
        });
    }
    let start = Instant::now();
    let mut config = SearchConfig::new(n, bias);
    config.dedup_permutations = options.dedup_permutations;
    if let Some(k) = options.top_k {
        config.top_k = k;
    }
    let maps = if options.dedup_permutations {
        point_permutations(n)
    } else {
        Vec::new()
    };
    // even indices only: bit 0 clear is the negation representative
    let reps = 1u64 << ((1u64 << n) - 1);
    let chunks = reps.div_ceil(EXHAUSTIVE_CHUNK);
    let mut report = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let (lo, hi) = (EXHAUSTIVE_CHUNK * c, (EXHAUSTIVE_CHUNK * (c + 1)).min(reps));
            let mut part = SearchReport::empty(config.clone());
            // each representative stands in for its negation
            part.stats.dedup_saved = hi - lo;
            for r in lo..hi {
                let bits = r << 1;
                if maps.iter().any(|m| permute_bits(bits, m) < bits) {
                    part.stats.dedup_saved += 1;
                    continue;
                }
                let f = BooleanFunction::from_fn(n, |x| bits >> x & 1 == 1).expect("n checked");
                match ExtremalRecord::score(&f, bias) {
                    Some(rec) => part.insert(rec),
                    None => part.stats.skipped_constant += 1,
                }
            }
            part
        })
        .reduce(
            || SearchReport::empty(config.clone()),
            |a, b| merge_reports(a, b).expect("same config"),
        );
    report.stats.wall_time = start.elapsed();
    Ok(report)
}

/// Scores `samples` uniform random tables; draw `i` uses stream `i / chunk`
/// of `seed`, so the result does not depend on the worker count.
pub fn random_search(
    n: usize,
    bias: Bias,
    samples: u64,
    seed: u64,
    top_k: Option<usize>,
) -> Result<SearchReport> {
    if n == 0 || n > RANDOM_MAX_VARS {
        return Err(Error::TooLarge {
            what: "random search",
            n,
            limit: RANDOM_MAX_VARS,
        });
    }
    if samples == 0 {
        return Err(Error::ZeroSamples);
    }
    let start = Instant::now();
    let mut config = SearchConfig::new(n, bias);
    if let Some(k) = top_k {
        config.top_k = k;
    }
    let chunks = samples.div_ceil(RANDOM_CHUNK);
    let mut report = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut part = SearchReport::empty(config.clone());
            let mut rng = chunk_rng(seed, c);
            let count = (RANDOM_CHUNK * (c + 1)).min(samples) - RANDOM_CHUNK * c;
            for _ in 0..count {
                let f = BooleanFunction::from_fn(n, |_| rng.random::<bool>()).expect("n checked");
                match ExtremalRecord::score(&f, bias) {
                    Some(rec) => part.insert(rec),
                    None => part.stats.skipped_constant += 1,
                }
            }
            part
        })
        .reduce(
            || SearchReport::empty(config.clone()),
            |a, b| merge_reports(a, b).expect("same config"),
        );
    report.seed = Some(seed);
    report.stats.wall_time = start.elapsed();
    Ok(report)
}

/// Initial annealing temperature as a fraction of the start ratio.
pub const ANNEAL_T0: f64 = 0.1;
pub const ANNEAL_DECAY: f64 = 0.95;

/// Single-entry flip search with annealed acceptance. Returns the best record
/// seen, which is never worse than `start`.
pub fn local_refine(
    start: &BooleanFunction,
    bias: Bias,
    budget: u64,
    seed: u64,
) -> Result<ExtremalRecord> {
    let start_rec = ExtremalRecord::score(start, bias).ok_or(Error::ConstantStart)?;
    let mut rng = chunk_rng(seed, 0);
    let mut current = start.clone();
    let mut current_ratio = start_rec.ratio;
    let mut best = start_rec;
    let mut temperature = ANNEAL_T0 * best.ratio;
    for _ in 0..budget {
        let x = rng.random_range(0..current.len());
        let cand = current.with_flipped_entry(x);
        let Some(rec) = ExtremalRecord::score(&cand, bias) else {
            continue;
        };
        let delta = rec.ratio - current_ratio;
        let accept = delta < 0.0
            || (temperature > 0.0 && rng.random::<f64>() < (-delta / temperature).exp());
        if !accept {
            continue;
        }
        temperature *= ANNEAL_DECAY;
        current = cand;
        current_ratio = rec.ratio;
        if rec.ratio < best.ratio - ARGMIN_TOL {
            best = rec;
        }
    }
    Ok(best)
}

/// Which search [`p_sweep`] runs at each bias.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepMode {
    Exhaustive {
        n: usize,
        options: ExhaustiveOptions,
    },
    Random {
        n: usize,
        samples: u64,
        seed: u64,
    },
}

/// Runs `mode` at every grid point, in grid order.
pub fn p_sweep(mode: SweepMode, p_grid: &[f64]) -> Result<Vec<SearchReport>> {
    let biases = p_grid
        .iter()
        .map(|&p| Bias::new(p))
        .collect::<Result<Vec<_>>>()?;
    biases
        .into_iter()
        .map(|bias| match mode {
            SweepMode::Exhaustive { n, options } => exhaustive_search(n, bias, options),
            SweepMode::Random { n, samples, seed } => random_search(n, bias, samples, seed, None),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cube::SubsetMask;

    fn bias(p: f64) -> Bias {
        Bias::new(p).unwrap()
    }

    #[test]
    fn n1_minimum_is_the_dictator() {
        for &p in &[0.05, 0.3, 0.5, 0.8] {
            let r = exhaustive_search(1, bias(p), ExhaustiveOptions::default()).unwrap();
            assert_eq!(r.stats.evaluated, 1);
            assert_eq!(r.stats.skipped_constant, 1);
            let best = r.best.unwrap();
            assert_eq!(best.tt, "01");
            assert!((best.ratio - bias(p).conjecture_constant()).abs() < 1e-12);
        }
    }

    #[test]
    fn n2_uniform_minimum_is_parity() {
        let r = exhaustive_search(2, Bias::uniform(), ExhaustiveOptions::default()).unwrap();
        assert_eq!(r.stats.evaluated + r.stats.skipped_constant, 8);
        assert!(r.min_ratio().unwrap().abs() < 1e-12);
        assert!(r.argmin.iter().any(|a| a.tt == "0110"));
    }

    #[test]
    fn n3_respects_both_bounds() {
        for &p in &[0.1, 0.3, 0.5, 0.7] {
            let b = bias(p);
            let r = exhaustive_search(3, b, ExhaustiveOptions::default()).unwrap();
            assert_eq!(r.stats.evaluated, 127);
            let min = r.min_ratio().unwrap();
            assert!(min >= b.theorem_constant() - 1e-9);
            assert!(min >= b.conjecture_constant() - 1e-9);
            assert!(r
                .leaderboard
                .windows(2)
                .all(|w| w[0].order(&w[1]) != Ordering::Greater));
            assert!(r.leaderboard.iter().any(|x| x.tt == "01010101"));
        }
    }

    #[test]
    fn permutation_dedup_keeps_the_minimum() {
        let b = bias(0.3);
        let plain = exhaustive_search(3, b, ExhaustiveOptions::default()).unwrap();
        let dedup = exhaustive_search(
            3,
            b,
            ExhaustiveOptions {
                dedup_permutations: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(dedup.stats.evaluated < plain.stats.evaluated);
        assert!((dedup.min_ratio().unwrap() - plain.min_ratio().unwrap()).abs() < 1e-12);
    }

    #[test]
    fn size_limits() {
        let b = bias(0.3);
        assert!(matches!(
            exhaustive_search(5, b, ExhaustiveOptions::default()),
            Err(Error::TooLarge { .. })
        ));
        assert!(exhaustive_search(
            6,
            b,
            ExhaustiveOptions {
                allow_long: true,
                ..Default::default()
            }
        )
        .is_err());
        assert!(random_search(21, b, 1, 0, None).is_err());
        assert_eq!(random_search(3, b, 0, 0, None), Err(Error::ZeroSamples));
    }

    #[test]
    fn random_matches_exhaustive_at_n3() {
        let b = bias(0.3);
        let ex = exhaustive_search(3, b, ExhaustiveOptions::default()).unwrap();
        let rs = random_search(3, b, 20_000, 9, None).unwrap();
        assert!((ex.min_ratio().unwrap() - rs.min_ratio().unwrap()).abs() < 1e-12);
        assert_eq!(rs.stats.evaluated + rs.stats.skipped_constant, 20_000);
        assert!(rs.stats.skipped_constant > 0);
        let mut again = random_search(3, b, 20_000, 9, None).unwrap();
        again.stats.wall_time = rs.stats.wall_time;
        assert_eq!(rs, again);
    }

    #[test]
    fn single_sample_is_deterministic() {
        let b = bias(0.4);
        let a = random_search(4, b, 1, 123, None).unwrap();
        let c = random_search(4, b, 1, 123, None).unwrap();
        assert_eq!(a.leaderboard, c.leaderboard);
        assert_eq!(a.stats.evaluated + a.stats.skipped_constant, 1);
    }

    #[test]
    fn merge_laws() {
        let b = bias(0.3);
        let cfg = SearchConfig::new(3, b);
        let a = random_search(3, b, 300, 1, None).unwrap();
        let c = random_search(3, b, 300, 2, None).unwrap();
        let e = SearchReport::empty(cfg.clone());
        let ae = merge_reports(a.clone(), e.clone()).unwrap();
        assert_eq!(ae.leaderboard, a.leaderboard);
        assert_eq!(ae.argmin, a.argmin);
        assert_eq!(ae.best, a.best);
        let ac = merge_reports(a.clone(), c.clone()).unwrap();
        let ca = merge_reports(c, a).unwrap();
        assert_eq!(ac.leaderboard, ca.leaderboard);
        assert_eq!(ac.argmin, ca.argmin);
        assert_eq!(ac.stats.evaluated, ca.stats.evaluated);
        let other = SearchReport::empty(SearchConfig::new(4, b));
        assert!(matches!(
            merge_reports(e, other),
            Err(Error::ConfigMismatch(_))
        ));
    }

    #[test]
    fn refine_from_dictator_stays_put() {
        for &p in &[0.1, 0.3, 0.5, 0.9] {
            let d = BooleanFunction::dictator(3, 2).unwrap();
            let r = local_refine(&d, bias(p), 200, 4).unwrap();
            assert_eq!(r.tt, d.to_tt_string());
        }
    }

    #[test]
    fn refine_never_worse() {
        let b = bias(0.3);
        let f = BooleanFunction::from_bits(3, 0b1011_0010).unwrap();
        let start = ExtremalRecord::score(&f, b).unwrap();
        let r = local_refine(&f, b, 100, 7).unwrap();
        assert!(r.ratio <= start.ratio);
        assert!(!r.function().is_constant());
        assert_eq!(local_refine(&f, b, 0, 7).unwrap(), start);
        assert_eq!(
            local_refine(&BooleanFunction::constant(3, true).unwrap(), b, 10, 0),
            Err(Error::ConstantStart)
        );
    }

    #[test]
    fn sweep_runs_each_point() {
        let reports = p_sweep(
            SweepMode::Exhaustive {
                n: 2,
                options: ExhaustiveOptions::default(),
            },
            &[0.2, 0.5],
        )
        .unwrap();
        assert_eq!(reports.len(), 2);
        assert_eq!(reports[1].h_q, 0.0);
        assert_eq!(reports[1].theorem_constant, 0.0);
    }

    #[test]
    fn csv_has_one_row_per_record() {
        let r = exhaustive_search(2, bias(0.3), ExhaustiveOptions::default()).unwrap();
        let csv = r.to_csv();
        assert_eq!(csv.lines().count(), r.leaderboard.len() + 1);
        assert!(csv.starts_with("rank,tt,n,p,"));
        let par = BooleanFunction::parity(2, SubsetMask(3)).unwrap();
        assert!(ExtremalRecord::score(&par, bias(0.3)).is_some());
    }
}

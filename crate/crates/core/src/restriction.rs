//! Restrictions, restricted spectra and the epsilon-moment machinery.
//!
//! For an alive set `J`, running the transform butterfly only on the
//! coordinates of `J` turns a truth table into a "restricted table": the
//! entry at index `T | z` (with `T ⊆ J` and `z` supported on `J^c`) is the
//! coefficient `f_{J^c -> z}^(T)`. Moments, increments and the proof ledger
//! are all exact weighted sums over such tables.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::cube::{
    binary_entropy, deposit_bits, extract_bits, full_mask, Bias, BooleanFunction, PointMask,
    SubsetMask,
};
use crate::error::{Error, Result};
use crate::quantities::{xlogx, EntropyValue};
use crate::transform::{basis_value, forward_in_place, Spectrum};

/// Largest `n` for which the CLI builds the proof ledger by default.
pub const LEDGER_MAX_VARS: usize = 6;

/// Alive coordinates `J` together with an assignment `z` of `J^c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Restriction {
    alive: SubsetMask,
    assignment: PointMask,
}

impl Restriction {
    pub fn new(alive: SubsetMask, assignment: PointMask, n: usize) -> Result<Self> {
        let full = full_mask(n);
        if alive.0 & !full != 0 || assignment.0 & !full != 0 {
            return Err(Error::CoordinateOutOfRange {
                k: 32 - (alive.0 | assignment.0).leading_zeros() as usize,
                n,
            });
        }
        if alive.0 & assignment.0 != 0 {
            return Err(Error::AssignmentOverlapsAlive {
                alive: alive.0,
                assignment: assignment.0,
            });
        }
        Ok(Self { alive, assignment })
    }

    pub fn alive(&self) -> SubsetMask {
        self.alive
    }

    pub fn assignment(&self) -> PointMask {
        self.assignment
    }
}

/// An ordering of `[n]`; step `k` adds coordinate `order[k-1]`, so
/// `J_k = {order[0], ..., order[k-1]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct Chain {
    order: Vec<usize>,
}

impl Chain {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let n = order.len();
        if n == 0 {
            return Err(Error::InvalidChain("empty order".into()));
        }
        let mut seen = vec![false; n];
        for &k in &order {
            if k == 0 || k > n || std::mem::replace(&mut seen[k - 1], true) {
                return Err(Error::InvalidChain(format!(
                    "{order:?} is not a permutation of 1..={n}"
                )));
            }
        }
        Ok(Self { order })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            order: (1..=n).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.order.len()
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Coordinate added at step `k`.
    pub fn coord(&self, k: usize) -> usize {
        self.order[k - 1]
    }

    /// `J_k`.
    pub fn alive(&self, k: usize) -> SubsetMask {
        SubsetMask::from_coords(&self.order[..k])
    }

    fn check_step(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.n() {
            Err(Error::StepOutOfRange { k, n: self.n() })
        } else {
            Ok(())
        }
    }

    fn check_for(&self, f: &BooleanFunction) -> Result<()> {
        if self.n() != f.n() {
            Err(Error::SizeMismatch(self.n(), f.n()))
        } else {
            Ok(())
        }
    }
}

impl FromStr for Chain {
    type Err = Error;

    /// Comma-separated permutation, e.g. `"3,1,2"`.
    fn from_str(s: &str) -> Result<Self> {
        let order = s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::InvalidChain(format!("bad entry {t:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(order)
    }
}

impl fmt::Display for Chain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.order.iter().map(usize::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

/// `f_{J^c -> z}` as a function of the `|J|` alive coordinates, in increasing
/// coordinate order.
pub fn restrict(f: &BooleanFunction, r: &Restriction) -> Result<BooleanFunction> {
    let n = f.n();
    let r = Restriction::new(r.alive, r.assignment, n)?;
    let m = r.alive.weight() as usize;
    let table = (0..1u32 << m)
        .map(|y| f.sign((deposit_bits(y, r.alive.0) | r.assignment.0) as usize))
        .collect();
    Ok(BooleanFunction::from_signs(m, table))
}

/// Restricted coefficients from the full spectrum:
/// `f_{J^c -> z}^(T) = sum_{S ⊆ J^c} f^(S ∪ T) chi_S(z)`.
pub fn restricted_spectrum(spec: &Spectrum, r: &Restriction) -> Result<Spectrum> {
    let n = spec.n();
    let r = Restriction::new(r.alive, r.assignment, n)?;
    let alive = r.alive.0;
    let dead = full_mask(n) & !alive;
    let bias = spec.bias();
    let chis: Vec<f64> = (0..1u32 << dead.count_ones())
        .map(|s| basis_value(SubsetMask(deposit_bits(s, dead)), r.assignment, bias))
        .collect();
    let coeffs = (0..1u32 << alive.count_ones())
        .map(|t| {
            let t = deposit_bits(t, alive);
            chis.iter()
                .enumerate()
                .map(|(s, chi)| spec.coeff(SubsetMask(t | deposit_bits(s as u32, dead))) * chi)
                .sum()
        })
        .collect();
    Spectrum::from_coeffs(alive.count_ones() as usize, coeffs, bias)
}

/// All restricted coefficients for alive set `alive` at once; index `T | z`.
pub fn restricted_table(f: &BooleanFunction, bias: Bias, alive: SubsetMask) -> Vec<f64> {
    let mut values = f.values();
    forward_in_place(&mut values, alive.0, bias);
    values
}

/// `mu_p(z)` of the dead part of each index, for alive set `alive`.
pub fn assignment_weights(bias: Bias, n: usize, alive: SubsetMask) -> Vec<f64> {
    let dead = full_mask(n) & !alive.0;
    (0..1u32 << n)
        .map(|idx| {
            let ones = (idx & dead).count_ones() as i32;
            bias.p().powi(ones) * (1.0 - bias.p()).powi(dead.count_ones() as i32 - ones)
        })
        .collect()
}

/// `|x|^{2(1+eps)}`, evaluated as `exp((1+eps) ln x^2)` and `0` at `x = 0`.
#[inline]
pub fn abs_pow(x: f64, eps: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        ((1.0 + eps) * (x * x).ln()).exp()
    }
}

/// `M_{J,eps,p}(f)` for one alive set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentValue {
    pub alive: SubsetMask,
    pub eps: f64,
    pub value: f64,
}

fn check_moment_eps(eps: f64) -> Result<()> {
    if (0.0..0.5).contains(&eps) {
        Ok(())
    } else {
        Err(Error::EpsOutOfRange(eps))
    }
}

/// `M_{J,eps,p}(f) = sum_{S ⊆ J} E_z |f_{J^c -> z}^(S)|^{2(1+eps)}`, exact
/// over all assignments. `eps` must lie in `[0, 1/2)`.
pub fn moment(f: &BooleanFunction, bias: Bias, alive: SubsetMask, eps: f64) -> Result<MomentValue> {
    check_moment_eps(eps)?;
    moment_extended(f, bias, alive, eps)
}

/// Same sum as [`moment`] for any `eps` in `(-1/2, 1/2)`; negative values are
/// only needed to take central differences at zero.
pub fn moment_extended(
    f: &BooleanFunction,
    bias: Bias,
    alive: SubsetMask,
    eps: f64,
) -> Result<MomentValue> {
    if eps.is_nan() || eps.abs() >= 0.5 {
        return Err(Error::EpsOutOfRange(eps));
    }
    if alive.0 & !full_mask(f.n()) != 0 {
        return Err(Error::CoordinateOutOfRange {
            k: 32 - alive.0.leading_zeros() as usize,
            n: f.n(),
        });
    }
    let table = restricted_table(f, bias, alive);
    let weights = assignment_weights(bias, f.n(), alive);
    let value = table
        .iter()
        .zip(&weights)
        .map(|(c, w)| w * abs_pow(*c, eps))
        .sum();
    Ok(MomentValue { alive, eps, value })
}

/// The two-point functional
/// `|a|^e + |b|^e - p |a + alpha b|^e - (1-p) |a - beta b|^e` with `e = 2(1+eps)`.
pub fn phi(a: f64, b: f64, bias: Bias, eps: f64) -> f64 {
    if b == 0.0 {
        return 0.0;
    }
    let p = bias.p();
    abs_pow(a, eps) + abs_pow(b, eps)
        - (p * abs_pow(a + bias.alpha() * b, eps) + (1.0 - p) * abs_pow(a - bias.beta() * b, eps))
}

/// `d/d eps` of [`phi`] at `eps = 0`:
/// `a^2 ln a^2 + b^2 ln b^2 - p u ln u - (1-p) v ln v`.
pub fn phi_derivative0(a: f64, b: f64, bias: Bias) -> f64 {
    if b == 0.0 {
        return 0.0;
    }
    let p = bias.p();
    let u = (a + bias.alpha() * b).powi(2);
    let v = (a - bias.beta() * b).powi(2);
    xlogx(a * a) + xlogx(b * b) - p * xlogx(u) - (1.0 - p) * xlogx(v)
}

/// Upper bound on [`phi_derivative0`]: `-(a^2+b^2) h(a^2/(a^2+b^2))`.
pub fn phi_derivative_bound(a: f64, b: f64) -> f64 {
    let mass = a * a + b * b;
    if mass == 0.0 {
        0.0
    } else {
        -mass * binary_entropy(a * a / mass)
    }
}

/// One chain step's increment `Delta_k`, computed two ways.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Increment {
    pub k: usize,
    pub eps: f64,
    /// `M_{J_k} - M_{J_{k-1}}`.
    pub direct: f64,
    /// `sum_S E_{z'} phi(a, b)` over pairs of the `J_k` restricted table.
    pub two_point_form: f64,
}

impl Increment {
    pub fn residual(&self) -> f64 {
        self.direct - self.two_point_form
    }
}

/// Visits every `(S ⊆ J_{k-1}, z' on J_k^c)` pair of step `k` as
/// `(weight(z'), a, b, index)` where `a`, `b` are the coefficients at `S` and
/// `S ∪ {coord}` of the `J_k` restricted table.
pub(crate) fn for_each_pair(
    table: &[f64],
    weights: &[f64],
    coord: usize,
    mut visit: impl FnMut(f64, f64, f64, usize),
) {
    let bit = 1usize << (coord - 1);
    for idx in (0..table.len()).filter(|i| i & bit == 0) {
        visit(weights[idx], table[idx], table[idx | bit], idx);
    }
}

pub fn increment(
    f: &BooleanFunction,
    bias: Bias,
    chain: &Chain,
    k: usize,
    eps: f64,
) -> Result<Increment> {
    chain.check_for(f)?;
    chain.check_step(k)?;
    check_moment_eps(eps)?;
    let upper = moment(f, bias, chain.alive(k), eps)?.value;
    let lower = moment(f, bias, chain.alive(k - 1), eps)?.value;

    let alive = chain.alive(k);
    let table = restricted_table(f, bias, alive);
    let weights = assignment_weights(bias, f.n(), alive);
    let mut two_point_form = 0.0;
    for_each_pair(&table, &weights, chain.coord(k), |w, a, b, _| {
        two_point_form += w * phi(a, b, bias, eps);
    });
    Ok(Increment {
        k,
        eps,
        direct: upper - lower,
        two_point_form,
    })
}

/// `-d Delta_k / d eps` at zero, summed analytically from [`phi_derivative0`].
pub fn neg_increment_derivative(
    f: &BooleanFunction,
    bias: Bias,
    chain: &Chain,
    k: usize,
) -> Result<f64> {
    chain.check_for(f)?;
    chain.check_step(k)?;
    let alive = chain.alive(k);
    let table = restricted_table(f, bias, alive);
    let weights = assignment_weights(bias, f.n(), alive);
    let mut acc = 0.0;
    for_each_pair(&table, &weights, chain.coord(k), |w, a, b, _| {
        acc -= w * phi_derivative0(a, b, bias);
    });
    Ok(acc)
}

/// Spectral entropy recovered as `-sum_k d Delta_k / d eps` at zero.
pub fn entropy_via_moments(f: &BooleanFunction, bias: Bias, chain: &Chain) -> Result<EntropyValue> {
    let mut total = 0.0;
    for k in 1..=chain.n() {
        total += neg_increment_derivative(f, bias, chain, k)?;
    }
    Ok(EntropyValue::from_raw(total.max(0.0)))
}

/// One step of the proof ledger. Each field is a sum over `S ⊆ J_{k-1}` and an
/// exact expectation over `z'`; `(a, b)` are the restricted coefficients at
/// `S` and `S ∪ {coord}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LedgerStep {
    pub k: usize,
    pub coord: usize,
    /// (i) `-d Delta_k / d eps` at zero.
    pub neg_derivative: f64,
    /// `sum_S E[(a^2+b^2) h(a^2/(a^2+b^2))]`.
    pub entropy_bound: f64,
    /// (ii) `sum_S E[a^2 b^2 / (a^2+b^2)]`.
    pub harmonic: f64,
    /// `E[(sum_S |ab|)^2]`.
    pub mean_sq_abs_sum: f64,
    /// (iii) `(sum_S E|ab|)^2`.
    pub sq_abs_mean_sum: f64,
    /// (iv) `(sum_S |E ab|)^2`.
    pub sq_mean_abs_sum: f64,
    /// (v) `(sum_{S ⊆ [n] \ {coord}} f^(S) f^(S ∪ {coord}))^2`.
    pub correlation_sq: f64,
    /// Largest `|E[ab] - sum_{T ⊆ J_k^c} f^(S ∪ T) f^(S ∪ T ∪ {coord})|` over `S`.
    pub cross_term_residual: f64,
}

impl LedgerStep {
    /// Consecutive links of the monotone chain, as `(name, larger, smaller)`.
    pub fn links(&self) -> [(&'static str, f64, f64); 6] {
        [
            (
                "derivative>=entropy_bound",
                self.neg_derivative,
                self.entropy_bound,
            ),
            ("entropy_bound>=harmonic", self.entropy_bound, self.harmonic),
            (
                "harmonic>=mean_sq_abs_sum",
                self.harmonic,
                self.mean_sq_abs_sum,
            ),
            (
                "mean_sq_abs_sum>=sq_abs_mean_sum",
                self.mean_sq_abs_sum,
                self.sq_abs_mean_sum,
            ),
            (
                "sq_abs_mean_sum>=sq_mean_abs_sum",
                self.sq_abs_mean_sum,
                self.sq_mean_abs_sum,
            ),
            (
                "sq_mean_abs_sum>=correlation_sq",
                self.sq_mean_abs_sum,
                self.correlation_sq,
            ),
        ]
    }

    /// Smallest `larger - smaller` over the chain links.
    pub fn min_slack(&self) -> f64 {
        self.links()
            .iter()
            .map(|(_, hi, lo)| hi - lo)
            .fold(f64::INFINITY, f64::min)
    }
}

/// The per-step ledger of the entropy lower-bound argument.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProofLedger {
    pub chain: Chain,
    pub steps: Vec<LedgerStep>,
}

impl ProofLedger {
    pub fn min_slack(&self) -> f64 {
        self.steps
            .iter()
            .map(LedgerStep::min_slack)
            .fold(f64::INFINITY, f64::min)
    }

    /// `sum_k` of (i); equals the spectral entropy.
    pub fn entropy(&self) -> f64 {
        self.steps.iter().map(|s| s.neg_derivative).sum()
    }

    /// `sum_k` of (v); equals `q(1-q) sum_k Inf_k^2`.
    pub fn correlation_total(&self) -> f64 {
        self.steps.iter().map(|s| s.correlation_sq).sum()
    }
}

pub fn proof_slack_report(f: &BooleanFunction, bias: Bias, chain: &Chain) -> Result<ProofLedger> {
    chain.check_for(f)?;
    let n = f.n();
    let spec = crate::transform::forward_transform(f, bias);
    let mut steps = Vec::with_capacity(n);
    for k in 1..=n {
        let coord = chain.coord(k);
        let bit = 1u32 << (coord - 1);
        let alive = chain.alive(k);
        let lower = chain.alive(k - 1).0;
        let dead = full_mask(n) & !alive.0;
        let table = restricted_table(f, bias, alive);
        let weights = assignment_weights(bias, n, alive);

        let sets = 1usize << lower.count_ones();
        let mut mean_ab = vec![0.0; sets];
        let mut mean_abs_ab = vec![0.0; sets];
        let mut per_z = vec![0.0; 1 << dead.count_ones()];
        let (mut neg_derivative, mut entropy_bound, mut harmonic) = (0.0, 0.0, 0.0);
        for_each_pair(&table, &weights, coord, |w, a, b, idx| {
            let s = extract_bits(idx as u32, lower) as usize;
            let z = extract_bits(idx as u32, dead) as usize;
            let mass = a * a + b * b;
            neg_derivative -= w * phi_derivative0(a, b, bias);
            entropy_bound -= w * phi_derivative_bound(a, b);
            if mass > 0.0 {
                harmonic += w * a * a * b * b / mass;
            }
            mean_ab[s] += w * a * b;
            mean_abs_ab[s] += w * (a * b).abs();
            per_z[z] += (a * b).abs();
        });
        // E over z' of (sum_S |ab|)^2; weights depend only on z'
        let mut mean_sq_abs_sum = 0.0;
        for (z, total) in per_z.iter().enumerate() {
            let point = deposit_bits(z as u32, dead);
            mean_sq_abs_sum += weights[point as usize] * total * total;
        }

        let mut cross_term_residual = 0.0f64;
        let dead_sets = 1u32 << dead.count_ones();
        for (s, mean) in mean_ab.iter().enumerate() {
            let s_mask = deposit_bits(s as u32, lower);
            let direct: f64 = (0..dead_sets)
                .map(|t| {
                    let t = deposit_bits(t, dead);
                    spec.coeff(SubsetMask(s_mask | t)) * spec.coeff(SubsetMask(s_mask | t | bit))
                })
                .sum();
            cross_term_residual = cross_term_residual.max((mean - direct).abs());
        }

        let correlation = crate::quantities::cross_correlation(&spec, coord)?;
        steps.push(LedgerStep {
            k,
            coord,
            neg_derivative,
            entropy_bound,
            harmonic,
            mean_sq_abs_sum,
            sq_abs_mean_sum: mean_abs_ab.iter().sum::<f64>().powi(2),
            sq_mean_abs_sum: mean_ab.iter().map(|v| v.abs()).sum::<f64>().powi(2),
            correlation_sq: correlation * correlation,
            cross_term_residual,
        });
    }
    Ok(ProofLedger {
        chain: chain.clone(),
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantities::{influences, spectral_entropy};
    use crate::transform::forward_transform;

    const GRID: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

    fn all_n3() -> impl Iterator<Item = BooleanFunction> {
        (0..256).map(|b| BooleanFunction::from_bits(3, b).unwrap())
    }

    // Reference moment: restrict pointwise, transform each restriction.
    fn moment_oracle(f: &BooleanFunction, bias: Bias, alive: u32, eps: f64) -> f64 {
        let n = f.n();
        let dead = full_mask(n) & !alive;
        let mut total = 0.0;
        for zc in 0..1u32 << dead.count_ones() {
            let z = deposit_bits(zc, dead);
            let r = Restriction::new(SubsetMask(alive), PointMask(z), n).unwrap();
            let g = restrict(f, &r).unwrap();
            let w = crate::cube::point_measure(PointMask(zc), bias, dead.count_ones() as usize);
            let spec = forward_transform(&g, bias);
            total += w * spec
                .coeffs()
                .iter()
                .map(|c| c.abs().powf(2.0 * (1.0 + eps)))
                .sum::<f64>();
        }
        total
    }

    #[test]
    fn restriction_validation() {
        assert!(Restriction::new(SubsetMask(0b01), PointMask(0b10), 2).is_ok());
        assert_eq!(
            Restriction::new(SubsetMask(0b01), PointMask(0b11), 2),
            Err(Error::AssignmentOverlapsAlive {
                alive: 1,
                assignment: 3
            })
        );
        assert!(Restriction::new(SubsetMask(0b100), PointMask(0), 2).is_err());
    }

    #[test]
    fn restrict_examples() {
        let f = BooleanFunction::majority(3).unwrap();
        let all = Restriction::new(SubsetMask(0b111), PointMask(0), 3).unwrap();
        assert_eq!(restrict(&f, &all).unwrap(), f);
        let none = Restriction::new(SubsetMask(0), PointMask(0b011), 3).unwrap();
        let g = restrict(&f, &none).unwrap();
        assert_eq!(g.n(), 0);
        assert_eq!(g.values(), vec![1.0]);
        let and2 = BooleanFunction::and(2).unwrap();
        let r = Restriction::new(SubsetMask(0b01), PointMask(0b10), 2).unwrap();
        assert_eq!(
            restrict(&and2, &r).unwrap(),
            BooleanFunction::dictator(1, 1).unwrap()
        );
    }

    #[test]
    fn restricted_spectrum_examples() {
        let bias = Bias::new(0.3).unwrap();
        let f = BooleanFunction::majority(3).unwrap();
        let spec = forward_transform(&f, bias);
        let all = Restriction::new(SubsetMask(0b111), PointMask(0), 3).unwrap();
        let same = restricted_spectrum(&spec, &all).unwrap();
        for (a, b) in same.coeffs().iter().zip(spec.coeffs()) {
            assert!((a - b).abs() < 1e-14);
        }
        let d = forward_transform(&BooleanFunction::dictator(2, 1).unwrap(), bias);
        for z1 in 0..2u32 {
            let r = Restriction::new(SubsetMask(0b10), PointMask(z1), 2).unwrap();
            let rs = restricted_spectrum(&d, &r).unwrap();
            let want = if z1 == 1 { 1.0 } else { -1.0 };
            assert!((rs.coeffs()[0] - want).abs() < 1e-14);
            assert!(rs.coeffs()[1].abs() < 1e-14);
        }
    }

    #[test]
    fn restricted_spectrum_consistency_and_mean_n4() {
        for &p in &GRID {
            let bias = Bias::new(p).unwrap();
            for bits in (0..1u64 << 16).step_by(997) {
                let f = BooleanFunction::from_fn(4, |x| bits >> x & 1 == 1).unwrap();
                let spec = forward_transform(&f, bias);
                for alive in 0..16u32 {
                    let dead = 15 & !alive;
                    let m = alive.count_ones() as usize;
                    let mut mean = vec![0.0; 1 << m];
                    for zc in 0..1u32 << dead.count_ones() {
                        let z = deposit_bits(zc, dead);
                        let r = Restriction::new(SubsetMask(alive), PointMask(z), 4).unwrap();
                        let formula = restricted_spectrum(&spec, &r).unwrap();
                        let direct = forward_transform(&restrict(&f, &r).unwrap(), bias);
                        let wz = bias.p().powi(z.count_ones() as i32)
                            * (1.0 - bias.p()).powi((dead.count_ones() - z.count_ones()) as i32);
                        for ((acc, a), b) in
                            mean.iter_mut().zip(formula.coeffs()).zip(direct.coeffs())
                        {
                            assert!((a - b).abs() < 1e-10);
                            *acc += wz * a;
                        }
                    }
                    for (t, v) in mean.iter().enumerate() {
                        let full = spec.coeff(SubsetMask(deposit_bits(t as u32, alive)));
                        assert!((v - full).abs() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn restricted_table_matches_pointwise_restrictions() {
        let bias = Bias::new(0.37).unwrap();
        let f =
            BooleanFunction::from_fn(5, |x| x.wrapping_mul(2_654_435_761) >> 7 & 1 == 1).unwrap();
        for alive in 0..32u32 {
            let table = restricted_table(&f, bias, SubsetMask(alive));
            let dead = 31 & !alive;
            for zc in 0..1u32 << dead.count_ones() {
                let z = deposit_bits(zc, dead);
                let r = Restriction::new(SubsetMask(alive), PointMask(z), 5).unwrap();
                let direct = forward_transform(&restrict(&f, &r).unwrap(), bias);
                for (t, c) in direct.coeffs().iter().enumerate() {
                    let idx = deposit_bits(t as u32, alive) | z;
                    assert!((table[idx as usize] - c).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn moment_examples() {
        let bias = Bias::new(0.3).unwrap();
        for f in all_n3().step_by(5) {
            for &eps in &[0.0, 0.1, 0.3, 0.49] {
                let m = moment(&f, bias, SubsetMask(0), eps).unwrap();
                assert!((m.value - 1.0).abs() < 1e-12);
            }
            for alive in 0..8 {
                assert!(
                    (moment(&f, bias, SubsetMask(alive), 0.0).unwrap().value - 1.0).abs() < 1e-12
                );
                let v = moment(&f, bias, SubsetMask(alive), 0.2).unwrap().value;
                assert!((v - moment_oracle(&f, bias, alive, 0.2)).abs() < 1e-12);
            }
        }
        let d = BooleanFunction::dictator(3, 2).unwrap();
        let v = moment(&d, bias, SubsetMask(0b111), 0.1).unwrap().value;
        assert!((v - 0.958_689_766_096_283_8).abs() < 1e-12);
        assert!((v - (0.16f64.powf(1.1) + 0.84f64.powf(1.1))).abs() < 1e-12);
        assert!(moment(&d, bias, SubsetMask(1), 0.5).is_err());
        assert!(moment(&d, bias, SubsetMask(1), -0.1).is_err());
        assert!(moment_extended(&d, bias, SubsetMask(1), -0.1).is_ok());
    }

    #[test]
    fn phi_examples() {
        let bias = Bias::new(0.3).unwrap();
        for &(a, b) in &[(0.6, 0.8), (-0.3, 0.1), (1.0, -1.0), (0.0, 0.5)] {
            assert!(phi(a, b, bias, 0.0).abs() < 1e-12);
        }
        assert_eq!(phi(0.7, 0.0, bias, 0.3), 0.0);
        // 40-digit reference evaluation
        assert!((phi(0.6, 0.8, bias, 0.1) + 0.188_224_388_074_940_34).abs() < 1e-14);
    }

    #[test]
    fn phi_derivative_examples() {
        let bias = Bias::new(0.3).unwrap();
        assert_eq!(phi_derivative0(0.4, 0.0, bias), 0.0);
        let d = phi_derivative0(0.6, 0.8, bias);
        assert!((d + 1.827_461_705_418_903_4).abs() < 1e-13);
        assert!((phi_derivative_bound(0.6, 0.8) + 0.653_418_194_793_701_8).abs() < 1e-13);
        let a = 0.4f64;
        let u = Bias::uniform();
        let val = phi_derivative0(a, a, u);
        assert!((val + 2.0 * a * a * 4f64.ln()).abs() < 1e-14);
        assert!(val <= phi_derivative_bound(a, a));
        assert!((phi_derivative_bound(a, a) + 2.0 * a * a * 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn phi_derivative_matches_finite_difference() {
        for &p in &GRID {
            let bias = Bias::new(p).unwrap();
            for i in 0..20 {
                let a = -0.9 + 0.09 * f64::from(i);
                for j in 1..10 {
                    let b = 0.1 * f64::from(j) * if j % 2 == 0 { -1.0 } else { 1.0 };
                    let h = 1e-5;
                    let fd = (phi(a, b, bias, h) - phi(a, b, bias, -h)) / (2.0 * h);
                    let d = phi_derivative0(a, b, bias);
                    assert!(
                        (fd - d).abs() <= 1e-6 * d.abs().max(1e-3),
                        "a={a} b={b} p={p}"
                    );
                    assert!(d <= phi_derivative_bound(a, b) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn increment_examples() {
        let bias = Bias::new(0.3).unwrap();
        let chain = Chain::identity(3);
        let c = BooleanFunction::constant(3, true).unwrap();
        for k in 1..=3 {
            for &eps in &[0.0, 0.2] {
                let inc = increment(&c, bias, &chain, k, eps).unwrap();
                assert!(inc.direct.abs() < 1e-12 && inc.two_point_form.abs() < 1e-12);
            }
        }
        for f in all_n3() {
            let mut sum = 0.0;
            for k in 1..=3 {
                assert!(increment(&f, bias, &chain, k, 0.0).unwrap().direct.abs() < 1e-12);
                let inc = increment(&f, bias, &chain, k, 0.1).unwrap();
                assert!(inc.residual().abs() < 1e-9);
                sum += inc.direct;
            }
            let top = moment(&f, bias, SubsetMask(7), 0.1).unwrap().value;
            assert!((sum + 1.0 - top).abs() < 1e-9);
        }
        let f = BooleanFunction::majority(3).unwrap();
        assert_eq!(
            increment(&f, bias, &chain, 4, 0.1),
            Err(Error::StepOutOfRange { k: 4, n: 3 })
        );
        assert!(increment(&f, bias, &Chain::identity(2), 1, 0.1).is_err());
    }

    #[test]
    fn entropy_via_moments_examples() {
        for &p in &GRID {
            let bias = Bias::new(p).unwrap();
            let h = bias.conjecture_constant();
            let d = BooleanFunction::dictator(3, 3).unwrap();
            let e = entropy_via_moments(&d, bias, &Chain::identity(3))
                .unwrap()
                .value();
            assert!((e - h).abs() < 1e-8);
            for m in 1..=3u32 {
                let par = BooleanFunction::parity(3, SubsetMask((1 << m) - 1)).unwrap();
                let e =
                    entropy_via_moments(&par, bias, &Chain::new(vec![2, 3, 1]).unwrap()).unwrap();
                assert!((e.value() - f64::from(m) * h).abs() < 1e-8);
            }
        }
        let maj = BooleanFunction::majority(3).unwrap();
        let e = entropy_via_moments(&maj, Bias::uniform(), &Chain::identity(3)).unwrap();
        assert!((e.value() - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn entropy_via_moments_chain_invariant() {
        let chains: Vec<Chain> = ["1,2,3,4", "4,3,2,1", "2,4,1,3", "3,1,4,2", "1,3,2,4"]
            .iter()
            .map(|s| s.parse().unwrap())
            .collect();
        for &p in &GRID {
            let bias = Bias::new(p).unwrap();
            for bits in (0..1u64 << 16).step_by(4099) {
                let f = BooleanFunction::from_fn(4, |x| bits >> x & 1 == 1).unwrap();
                let want = spectral_entropy(&forward_transform(&f, bias))
                    .unwrap()
                    .value();
                for chain in &chains {
                    let got = entropy_via_moments(&f, bias, chain).unwrap().value();
                    assert!((got - want).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn ledger_examples() {
        let u = Bias::uniform();
        let f = BooleanFunction::majority(3).unwrap();
        let ledger = proof_slack_report(&f, u, &Chain::identity(3)).unwrap();
        assert!(ledger.steps.iter().all(|s| s.correlation_sq.abs() < 1e-28));

        let bias = Bias::new(0.3).unwrap();
        let d = BooleanFunction::dictator(1, 1).unwrap();
        let ledger = proof_slack_report(&d, bias, &Chain::identity(1)).unwrap();
        let step = &ledger.steps[0];
        let h = binary_entropy(0.84);
        assert!((step.neg_derivative - h).abs() < 1e-12);
        assert!((step.correlation_sq - 0.84 * 0.16).abs() < 1e-12);
        assert!(ledger.min_slack() >= -1e-9);
        assert!(step.neg_derivative >= step.correlation_sq);

        let c = BooleanFunction::constant(3, false).unwrap();
        let ledger = proof_slack_report(&c, bias, &Chain::identity(3)).unwrap();
        for s in &ledger.steps {
            for (_, hi, lo) in s.links() {
                assert!(hi.abs() < 1e-12 && lo.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ledger_chain_holds_exhaustively() {
        for &p in &[0.1, 0.3, 0.7] {
            let bias = Bias::new(p).unwrap();
            for f in all_n3() {
                let ledger =
                    proof_slack_report(&f, bias, &Chain::new(vec![3, 1, 2]).unwrap()).unwrap();
                assert!(ledger.min_slack() >= -1e-9, "{f:?}");
                let want = spectral_entropy(&forward_transform(&f, bias))
                    .unwrap()
                    .value();
                assert!((ledger.entropy() - want).abs() < 1e-9);
                let rhs = bias.theorem_constant() * influences(&f, bias).sum_squares();
                assert!((ledger.correlation_total() - rhs).abs() < 1e-10);
                assert!(ledger.steps.iter().all(|s| s.cross_term_residual < 1e-10));
            }
        }
    }

    #[test]
    fn chain_parsing() {
        let c: Chain = "3,1,2".parse().unwrap();
        assert_eq!(c.order(), &[3, 1, 2]);
        assert_eq!(c.alive(2), SubsetMask(0b101));
        assert_eq!(c.alive(0), SubsetMask(0));
        assert_eq!(c.to_string(), "3,1,2");
        assert!("1,1,2".parse::<Chain>().is_err());
        assert!("1,4,2".parse::<Chain>().is_err());
        assert!("a".parse::<Chain>().is_err());
    }
}

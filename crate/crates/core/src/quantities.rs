//! Scalar functionals of a function and its spectrum.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cube::{measure_table, Bias, BooleanFunction};
use crate::error::{Error, Result};
use crate::rng::chunk_rng;
use crate::transform::Spectrum;

/// Parseval tolerance accepted by [`spectral_entropy`].
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// Squared coefficients below this are exact zeros in entropy sums.
pub const ENTROPY_FLOOR: f64 = 1e-300;

/// Default threshold for [`support_size`].
pub const SUPPORT_TOL: f64 = 1e-10;

/// Per-coordinate influences, coordinate `k` stored at index `k - 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct InfluenceVector(Vec<f64>);

impl InfluenceVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Influence of coordinate `k` (1-based).
    pub fn get(&self, k: usize) -> f64 {
        self.0[k - 1]
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn sum_squares(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }
}

/// Spectral entropy in nats.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct EntropyValue(f64);

impl EntropyValue {
    pub(crate) fn from_raw(value: f64) -> Self {
        Self(value)
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<EntropyValue> for f64 {
    fn from(e: EntropyValue) -> f64 {
        e.0
    }
}

/// `t ln t` with `0 ln 0 = 0`; also zero below [`ENTROPY_FLOOR`].
#[inline]
pub fn xlogx(t: f64) -> f64 {
    if t < ENTROPY_FLOOR {
        0.0
    } else {
        t * t.ln()
    }
}

fn check_coord(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        Err(Error::CoordinateOutOfRange { k, n })
    } else {
        Ok(())
    }
}

/// Probability under `mu_p` that flipping coordinate `k` changes `f`.
pub fn influence(f: &BooleanFunction, bias: Bias, k: usize) -> Result<f64> {
    check_coord(k, f.n())?;
    let mu = measure_table(bias, f.n());
    Ok(influence_with(f, &mu, k))
}

// Disagreeing mass over total mass: exactly 0 or 1 when no edge agrees or
// none disagrees.
fn influence_with(f: &BooleanFunction, mu: &[f64], k: usize) -> f64 {
    let bit = 1usize << (k - 1);
    let (mut moved, mut total) = (0.0, 0.0);
    for (x, &w) in mu.iter().enumerate() {
        if f.sign(x) != f.sign(x ^ bit) {
            moved += w;
        }
        total += w;
    }
    moved / total
}

/// Combinatorial influences of every coordinate.
pub fn influences(f: &BooleanFunction, bias: Bias) -> InfluenceVector {
    let mu = measure_table(bias, f.n());
    InfluenceVector((1..=f.n()).map(|k| influence_with(f, &mu, k)).collect())
}

/// Influences read off the spectrum: `sum_{S ∋ k} coeff(S)^2 / q`.
pub fn influences_spectral(spec: &Spectrum) -> InfluenceVector {
    let q = spec.bias().q();
    let mut acc = vec![0.0; spec.n()];
    for (s, c) in spec.coeffs().iter().enumerate() {
        let w = c * c;
        let mut bits = s;
        while bits != 0 {
            acc[bits.trailing_zeros() as usize] += w;
            bits &= bits - 1;
        }
    }
    InfluenceVector(acc.into_iter().map(|v| v / q).collect())
}

/// `sum_S |S| coeff(S)^2 / q`.
pub fn total_influence(spec: &Spectrum) -> f64 {
    let level: f64 = spec
        .coeffs()
        .iter()
        .enumerate()
        .map(|(s, c)| f64::from(s.count_ones()) * c * c)
        .sum();
    level / spec.bias().q()
}

/// Shannon entropy (nats) of the distribution `{coeff(S)^2}`.
pub fn spectral_entropy(spec: &Spectrum) -> Result<EntropyValue> {
    let mass = spec.mass();
    if (mass - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::NotNormalized(mass));
    }
    let ent: f64 = -spec.coeffs().iter().map(|c| xlogx(c * c)).sum::<f64>();
    Ok(EntropyValue(ent.max(0.0)))
}

/// Spectrum of `∂_k f`: the coefficient at `S ∌ k` is `coeff(S ∪ {k})`.
pub fn derivative_spectrum(spec: &Spectrum, k: usize) -> Result<Spectrum> {
    check_coord(k, spec.n())?;
    let bit = 1usize << (k - 1);
    let src = spec.coeffs();
    let coeffs = (0..src.len())
        .map(|s| if s & bit == 0 { src[s | bit] } else { 0.0 })
        .collect();
    Spectrum::from_coeffs(spec.n(), coeffs, spec.bias())
}

/// Pointwise `∂_k f(x) = sigma (f_{k->1}(x) - f_{k->0}(x))`.
pub fn derivative_values(f: &BooleanFunction, bias: Bias, k: usize) -> Result<Vec<f64>> {
    check_coord(k, f.n())?;
    let bit = 1usize << (k - 1);
    Ok((0..f.len())
        .map(|x| bias.sigma() * f64::from(f.sign(x | bit) - f.sign(x & !bit)))
        .collect())
}

/// `sum_{S ∌ k} coeff(S) coeff(S ∪ {k})`, i.e. `<f, ∂_k f>`.
pub fn cross_correlation(spec: &Spectrum, k: usize) -> Result<f64> {
    check_coord(k, spec.n())?;
    let bit = 1usize << (k - 1);
    let c = spec.coeffs();
    Ok((0..c.len())
        .filter(|s| s & bit == 0)
        .map(|s| c[s] * c[s | bit])
        .sum())
}

fn check_eps(eps: f64) -> Result<()> {
    if (0.0..=1.0).contains(&eps) {
        Ok(())
    } else {
        Err(Error::EpsOutOfRange(eps))
    }
}

/// `S_eps(f) = sum_S (1 - eps)^{|S|} coeff(S)^2`.
pub fn noise_stability(spec: &Spectrum, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    let rho = 1.0 - eps;
    let mut by_level = vec![0.0; spec.n() + 1];
    for (s, c) in spec.coeffs().iter().enumerate() {
        by_level[s.count_ones() as usize] += c * c;
    }
    Ok(by_level
        .iter()
        .enumerate()
        .map(|(d, w)| rho.powi(d as i32) * w)
        .sum())
}

/// Samples per independently seeded Monte Carlo chunk.
pub const MC_CHUNK: u64 = 1 << 16;

/// Monte Carlo estimate of `E[f(X) f(Y)]` where `Y` resamples each coordinate
/// of `X ~ mu_p` independently with probability `eps`.
///
/// The budget is cut into fixed chunks of [`MC_CHUNK`] samples, chunk `i`
/// drawing from stream `i` of the seed, so the estimate does not depend on
/// how many workers run.
pub fn noise_stability_mc(
    f: &BooleanFunction,
    bias: Bias,
    eps: f64,
    samples: u64,
    seed: u64,
) -> Result<f64> {
    check_eps(eps)?;
    if samples == 0 {
        return Err(Error::ZeroSamples);
    }
    let chunks = samples.div_ceil(MC_CHUNK);
    let total: i64 = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let len = MC_CHUNK.min(samples - chunk * MC_CHUNK);
            mc_chunk(f, bias, eps, len, seed, chunk)
        })
        .sum();
    Ok(total as f64 / samples as f64)
}

fn mc_chunk(f: &BooleanFunction, bias: Bias, eps: f64, len: u64, seed: u64, chunk: u64) -> i64 {
    let mut rng = chunk_rng(seed, chunk);
    let p = bias.p();
    let n = f.n();
    let mut acc = 0i64;
    for _ in 0..len {
        let mut x = 0usize;
        let mut y = 0usize;
        for k in 0..n {
            let xb = rng.random::<f64>() < p;
            let yb = if eps > 0.0 && rng.random::<f64>() < eps {
                rng.random::<f64>() < p
            } else {
                xb
            };
            x |= usize::from(xb) << k;
            y |= usize::from(yb) << k;
        }
        acc += i64::from(f.sign(x) * f.sign(y));
    }
    acc
}

/// Number of coefficients with `|coeff| > tol`.
pub fn support_size(spec: &Spectrum, tol: f64) -> usize {
    spec.coeffs().iter().filter(|c| c.abs() > tol).count()
}

/// `-ln max_S coeff(S)^2`, in nats.
pub fn min_entropy(spec: &Spectrum) -> Result<f64> {
    let peak = spec.coeffs().iter().map(|c| c * c).fold(0.0f64, f64::max);
    if peak == 0.0 {
        return Err(Error::ZeroSpectrum);
    }
    Ok((-peak.ln()).max(0.0))
}

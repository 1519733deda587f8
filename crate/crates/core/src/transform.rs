//! Forward and inverse p-biased Fourier transform.
//!
//! The transform factors over coordinates. On a single coordinate with
//! values `a0 = g(x_k = 0)`, `a1 = g(x_k = 1)` the two coefficients are
//! `E[g] = p a1 + (1-p) a0` and `sigma (a1 - a0)`, so the full transform is
//! an `O(n 2^n)` butterfly. Applying the butterfly only on a subset `J` of
//! coordinates yields the mixed array holding every restricted spectrum
//! `f_{J^c -> z}` at once, which the restriction module builds on.

use serde::Serialize;

use crate::cube::{Bias, BooleanFunction, PointMask, SubsetMask};
use crate::error::{Error, Result};

/// Fourier coefficients of a function under a fixed bias, indexed by subset mask.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    n: usize,
    coeffs: Vec<f64>,
    #[serde(serialize_with = "serialize_p")]
    bias: Bias,
}

fn serialize_p<S: serde::Serializer>(bias: &Bias, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(bias.p())
}

impl Spectrum {
    pub fn from_coeffs(n: usize, coeffs: Vec<f64>, bias: Bias) -> Result<Self> {
        let expected = 1usize << n;
        if coeffs.len() != expected {
            return Err(Error::LengthMismatch {
                n,
                expected,
                actual: coeffs.len(),
            });
        }
        Ok(Self { n, coeffs, bias })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn bias(&self) -> Bias {
        self.bias
    }

    #[inline]
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    #[inline]
    pub fn coeff(&self, s: SubsetMask) -> f64 {
        self.coeffs[s.index()]
    }

    /// `sum_S coeff(S)^2`.
    pub fn mass(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }
}

/// `chi_S(x) = prod_{i in S} chi_i(x_i)`.
pub fn basis_value(s: SubsetMask, x: PointMask, bias: Bias) -> f64 {
    let (alpha, beta) = (bias.alpha(), bias.beta());
    let mut bits = s.0;
    let mut out = 1.0;
    while bits != 0 {
        let low = bits & bits.wrapping_neg();
        out *= if x.0 & low != 0 { alpha } else { -beta };
        bits &= bits - 1;
    }
    out
}

/// Applies the one-coordinate forward butterfly on every coordinate in `coords`.
pub fn forward_in_place(values: &mut [f64], coords: u32, bias: Bias) {
    let (p, sigma) = (bias.p(), bias.sigma());
    for_each_pair(values, coords, |a0, a1| {
        (p * a1 + (1.0 - p) * a0, sigma * (a1 - a0))
    });
}

/// Inverse of [`forward_in_place`] on the coordinates in `coords`.
pub fn inverse_in_place(values: &mut [f64], coords: u32, bias: Bias) {
    let (alpha, beta) = (bias.alpha(), bias.beta());
    for_each_pair(values, coords, |c0, c1| (c0 - beta * c1, c0 + alpha * c1));
}

fn for_each_pair(values: &mut [f64], coords: u32, op: impl Fn(f64, f64) -> (f64, f64)) {
    debug_assert!(values.len().is_power_of_two());
    let n = values.len().trailing_zeros();
    for k in 0..n {
        if coords >> k & 1 == 0 {
            continue;
        }
        let half = 1usize << k;
        for block in values.chunks_exact_mut(half * 2) {
            let (lo, hi) = block.split_at_mut(half);
            for (a0, a1) in lo.iter_mut().zip(hi.iter_mut()) {
                let (c0, c1) = op(*a0, *a1);
                *a0 = c0;
                *a1 = c1;
            }
        }
    }
}

/// Full forward transform of a Boolean function.
pub fn forward_transform(f: &BooleanFunction, bias: Bias) -> Spectrum {
    forward_transform_values(f.n(), f.values(), bias)
}

/// Forward transform of an arbitrary real table of length `2^n`.
pub fn forward_transform_values(n: usize, mut values: Vec<f64>, bias: Bias) -> Spectrum {
    assert_eq!(values.len(), 1 << n, "table length must be 2^n");
    forward_in_place(&mut values, crate::cube::full_mask(n), bias);
    Spectrum {
        n,
        coeffs: values,
        bias,
    }
}

/// Pointwise values `sum_S coeff(S) chi_S(x)`.
pub fn inverse_transform(spec: &Spectrum) -> Vec<f64> {
    let mut values = spec.coeffs.clone();
    inverse_in_place(&mut values, crate::cube::full_mask(spec.n), spec.bias);
    values
}

/// `<f, g> = sum_S f(S) g(S)`.
pub fn plancherel(a: &Spectrum, b: &Spectrum) -> Result<f64> {
    if a.n != b.n {
        return Err(Error::SizeMismatch(a.n, b.n));
    }
    if a.bias.p() != b.bias.p() {
        return Err(Error::BiasMismatch(a.bias.p(), b.bias.p()));
    }
    Ok(a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x * y).sum())
}

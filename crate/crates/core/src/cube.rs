//! Domain types for functions on the p-biased hypercube.
//!
//! Points and subsets of `[n]` are both stored as bitmasks: bit `k - 1`
//! stands for coordinate `k`. Every other module relies on that convention.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::MAX_VARS;

/// Smallest admissible distance of `p` from 0 and 1.
pub const BIAS_GUARD: f64 = 1e-6;

/// The bias `p` of the product measure, with the derived quantities
/// `sigma = sqrt(p(1-p))` and `q = 4p(1-p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bias {
    p: f64,
    sigma: f64,
    q: f64,
}

impl Bias {
    pub fn new(p: f64) -> Result<Self> {
        if !(BIAS_GUARD..=1.0 - BIAS_GUARD).contains(&p) {
            return Err(Error::BiasOutOfRange(p));
        }
        let var = p * (1.0 - p);
        Ok(Self {
            p,
            sigma: var.sqrt(),
            q: 4.0 * var,
        })
    }

    /// The uniform measure, `p = 1/2`.
    pub fn uniform() -> Self {
        Self::new(0.5).expect("1/2 is a valid bias")
    }

    #[inline]
    pub fn p(&self) -> f64 {
        self.p
    }

    #[inline]
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    #[inline]
    pub fn q(&self) -> f64 {
        self.q
    }

    /// Value of the one-coordinate character at `x_i = 1`: `sqrt((1-p)/p)`.
    #[inline]
    pub fn alpha(&self) -> f64 {
        ((1.0 - self.p) / self.p).sqrt()
    }

    /// Magnitude of the one-coordinate character at `x_i = 0`: `sqrt(p/(1-p))`.
    #[inline]
    pub fn beta(&self) -> f64 {
        (self.p / (1.0 - self.p)).sqrt()
    }

    /// `chi_i(x_i) = (x_i - p) / sigma`.
    #[inline]
    pub fn chi(&self, bit: bool) -> f64 {
        if bit {
            self.alpha()
        } else {
            -self.beta()
        }
    }

    /// Probability of a single coordinate taking the value `bit`.
    #[inline]
    pub fn weight(&self, bit: bool) -> f64 {
        if bit {
            self.p
        } else {
            1.0 - self.p
        }
    }

    /// Constant of the proven lower bound, `4p(1-p)(2p-1)^2 = q(1-q)`.
    pub fn theorem_constant(&self) -> f64 {
        self.q * (1.0 - self.q)
    }

    /// Conjectured sharp constant `h(q)`.
    pub fn conjecture_constant(&self) -> f64 {
        binary_entropy(self.q)
    }
}

/// Natural-log binary entropy `-t ln t - (1-t) ln(1-t)`, with `0 ln 0 = 0`.
impl fmt::Display for Bias {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.p)
    }
}

pub fn binary_entropy(t: f64) -> f64 {
    xlogx_neg(t) + xlogx_neg(1.0 - t)
}

#[inline]
fn xlogx_neg(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        -t * t.ln()
    }
}

/// A subset `S` of `[n]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize)]
pub struct SubsetMask(pub u32);

/// A point `x` of `{0,1}^n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize)]
pub struct PointMask(pub u32);

macro_rules! mask_common {
    ($ty:ident) => {
        impl $ty {
            /// Builds a mask from 1-based coordinates.
            pub fn from_coords(coords: &[usize]) -> Self {
                Self(coords.iter().fold(0u32, |m, &k| m | (1 << (k - 1))))
            }

            #[inline]
            pub fn bits(self) -> u32 {
                self.0
            }

            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }

            #[inline]
            pub fn weight(self) -> u32 {
                self.0.count_ones()
            }

            /// Whether coordinate `k` (1-based) is set.
            #[inline]
            pub fn contains(self, k: usize) -> bool {
                self.0 >> (k - 1) & 1 == 1
            }
        }

        impl From<u32> for $ty {
            fn from(bits: u32) -> Self {
                Self(bits)
            }
        }
    };
}

mask_common!(SubsetMask);
mask_common!(PointMask);

#[inline]
pub(crate) fn full_mask(n: usize) -> u32 {
    if n == 32 {
        u32::MAX
    } else {
        (1u32 << n) - 1
    }
}

fn check_coord(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        Err(Error::CoordinateOutOfRange { k, n })
    } else {
        Ok(())
    }
}

/// `x XOR e_k`.
pub fn flip_point(x: PointMask, k: usize, n: usize) -> Result<PointMask> {
    check_coord(k, n)?;
    Ok(PointMask(x.0 ^ (1 << (k - 1))))
}

/// `mu_p(x) = p^{|x|} (1-p)^{n-|x|}`.
pub fn point_measure(x: PointMask, bias: Bias, n: usize) -> f64 {
    let ones = x.weight() as i32;
    bias.p.powi(ones) * (1.0 - bias.p).powi(n as i32 - ones)
}

/// Measure of every point of `{0,1}^n`, indexed by point mask.
pub fn measure_table(bias: Bias, n: usize) -> Vec<f64> {
    let mut out = vec![1.0];
    for _ in 0..n {
        let lo: Vec<f64> = out.iter().map(|w| w * (1.0 - bias.p)).collect();
        let hi: Vec<f64> = out.iter().map(|w| w * bias.p).collect();
        out = lo;
        out.extend(hi);
    }
    out
}

/// Scatters the low bits of `value` into the set positions of `mask`.
#[inline]
pub fn deposit_bits(value: u32, mask: u32) -> u32 {
    let mut out = 0;
    let mut m = mask;
    let mut v = value;
    while m != 0 {
        let low = m & m.wrapping_neg();
        if v & 1 == 1 {
            out |= low;
        }
        v >>= 1;
        m &= m - 1;
    }
    out
}

/// Gathers the bits of `value` at the set positions of `mask` into the low bits.
#[inline]
pub fn extract_bits(value: u32, mask: u32) -> u32 {
    let mut out = 0;
    let mut m = mask;
    let mut i = 0;
    while m != 0 {
        let low = m & m.wrapping_neg();
        if value & low != 0 {
            out |= 1 << i;
        }
        i += 1;
        m &= m - 1;
    }
    out
}

/// A function `{0,1}^n -> {-1, +1}` stored as its truth table.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BooleanFunction {
    n: usize,
    table: Vec<i8>,
}

impl BooleanFunction {
    /// Validates a table of `2^n` values, each exactly `+1` or `-1`.
    pub fn new(n: usize, table: &[f64]) -> Result<Self> {
        check_vars(n)?;
        let expected = 1usize << n;
        if table.len() != expected {
            return Err(Error::LengthMismatch {
                n,
                expected,
                actual: table.len(),
            });
        }
        let table = table
            .iter()
            .enumerate()
            .map(|(index, &value)| {
                if value == 1.0 {
                    Ok(1)
                } else if value == -1.0 {
                    Ok(-1)
                } else {
                    Err(Error::NonBooleanValue { index, value })
                }
            })
            .collect::<Result<Vec<i8>>>()?;
        Ok(Self { n, table })
    }

    /// Builds a function from a predicate: `true` maps to `+1`.
    pub fn from_fn(n: usize, mut pred: impl FnMut(u32) -> bool) -> Result<Self> {
        check_vars(n)?;
        let table = (0..1u32 << n)
            .map(|x| if pred(x) { 1 } else { -1 })
            .collect();
        Ok(Self { n, table })
    }

    /// Unchecked constructor; also admits `n = 0` (a single value), which
    /// only arises as a restriction with no alive coordinates.
    pub(crate) fn from_signs(n: usize, table: Vec<i8>) -> Self {
        debug_assert_eq!(table.len(), 1 << n);
        Self { n, table }
    }

    /// Builds an `n <= 6` function from packed bits: bit `x` set means `f(x) = +1`.
    pub fn from_bits(n: usize, bits: u64) -> Result<Self> {
        if n > 6 {
            return Err(Error::TooLarge {
                what: "packed truth table",
                n,
                limit: 6,
            });
        }
        Self::from_fn(n, |x| bits >> x & 1 == 1)
    }

    pub fn constant(n: usize, value: bool) -> Result<Self> {
        Self::from_fn(n, |_| value)
    }

    /// `f(x) = 2 x_k - 1`.
    pub fn dictator(n: usize, k: usize) -> Result<Self> {
        check_coord(k, n)?;
        Self::from_fn(n, |x| x >> (k - 1) & 1 == 1)
    }

    /// `f(x) = prod_{i in T} (2 x_i - 1)`.
    pub fn parity(n: usize, set: SubsetMask) -> Result<Self> {
        if set.0 & !full_mask(n) != 0 {
            return Err(Error::CoordinateOutOfRange {
                k: 32 - set.0.leading_zeros() as usize,
                n,
            });
        }
        let m = set.weight();
        Self::from_fn(n, |x| (m - (x & set.0).count_ones()) % 2 == 0)
    }

    /// `+1` iff every coordinate is 1.
    pub fn and(n: usize) -> Result<Self> {
        Self::from_fn(n, |x| x == full_mask(n))
    }

    /// `+1` iff a strict majority of coordinates is 1 (odd `n`).
    pub fn majority(n: usize) -> Result<Self> {
        Self::from_fn(n, |x| 2 * x.count_ones() as usize > n)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.table.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn value(&self, x: PointMask) -> f64 {
        f64::from(self.table[x.index()])
    }

    #[inline]
    pub(crate) fn sign(&self, x: usize) -> i8 {
        self.table[x]
    }

    /// The truth table as `f64` values in point-mask order.
    pub fn values(&self) -> Vec<f64> {
        self.table.iter().map(|&v| f64::from(v)).collect()
    }

    pub fn is_constant(&self) -> bool {
        self.table.iter().all(|&v| v == self.table[0])
    }

    pub fn negate(&self) -> Self {
        Self {
            n: self.n,
            table: self.table.iter().map(|v| -v).collect(),
        }
    }

    /// Returns a copy with the entry at `x` negated.
    pub fn with_flipped_entry(&self, x: usize) -> Self {
        let mut table = self.table.clone();
        table[x] = -table[x];
        Self { n: self.n, table }
    }

    /// Truth-table string: character `i` is `'1'` when `f(i) = +1`.
    pub fn to_tt_string(&self) -> String {
        self.table
            .iter()
            .map(|&v| if v > 0 { '1' } else { '0' })
            .collect()
    }
}

impl fmt::Debug for BooleanFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BooleanFunction(n={}, {})", self.n, self.to_tt_string())
    }
}

impl fmt::Display for BooleanFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_tt_string())
    }
}

impl FromStr for BooleanFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_truth_table(s)
    }
}

impl Serialize for BooleanFunction {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_tt_string())
    }
}

impl<'de> Deserialize<'de> for BooleanFunction {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        parse_truth_table(&s).map_err(serde::de::Error::custom)
    }
}

fn check_vars(n: usize) -> Result<()> {
    if n == 0 || n > MAX_VARS {
        Err(Error::TooManyVariables(n))
    } else {
        Ok(())
    }
}

/// Parses the textual truth-table format.
///
/// A string made only of `0`/`1` is read character by character (`'1'` is
/// `+1`). Anything else, or a `0x` prefix, is read as hexadecimal: each digit
/// spells four consecutive characters of the binary form, most significant
/// bit first. One hex digit therefore always means `n = 2`; smaller functions
/// must use the binary form.
pub fn parse_truth_table(s: &str) -> Result<BooleanFunction> {
    let s = s.trim();
    let (hex, body) = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(rest) => (true, rest),
        None => (!s.chars().all(|c| c == '0' || c == '1'), s),
    };
    if body.is_empty() {
        return Err(Error::BadTable("empty truth table".into()));
    }
    let bits: Vec<bool> = if hex {
        let mut bits = Vec::with_capacity(body.len() * 4);
        for c in body.chars() {
            let d = c
                .to_digit(16)
                .ok_or_else(|| Error::BadTable(format!("invalid hex digit {c:?}")))?;
            bits.extend((0..4).rev().map(|i| d >> i & 1 == 1));
        }
        bits
    } else {
        body.chars().map(|c| c == '1').collect()
    };
    let len = bits.len();
    if !len.is_power_of_two() || len < 2 {
        return Err(Error::BadTable(format!(
            "length {len} is not a power of two >= 2"
        )));
    }
    let n = len.trailing_zeros() as usize;
    if n > MAX_VARS {
        return Err(Error::TooManyVariables(n));
    }
    BooleanFunction::from_fn(n, |x| bits[x as usize])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn make_function_examples() {
        let dict = BooleanFunction::new(1, &[-1.0, 1.0]).unwrap();
        assert_eq!(dict, BooleanFunction::dictator(1, 1).unwrap());
        let and2 = BooleanFunction::new(2, &[-1.0, -1.0, -1.0, 1.0]).unwrap();
        assert_eq!(and2, BooleanFunction::and(2).unwrap());
        assert_eq!(
            BooleanFunction::new(2, &[-1.0, -1.0, -1.0]),
            Err(Error::LengthMismatch {
                n: 2,
                expected: 4,
                actual: 3
            })
        );
        assert!(matches!(
            BooleanFunction::new(1, &[0.5, 1.0]),
            Err(Error::NonBooleanValue { index: 0, .. })
        ));
        assert!(BooleanFunction::new(25, &[]).is_err());
    }

    #[test]
    fn flip_point_examples() {
        assert_eq!(flip_point(PointMask(0b00), 1, 2).unwrap(), PointMask(0b01));
        assert_eq!(flip_point(PointMask(0b01), 1, 2).unwrap(), PointMask(0b00));
        assert_eq!(flip_point(PointMask(0b10), 2, 2).unwrap(), PointMask(0b00));
        assert_eq!(
            flip_point(PointMask(0), 3, 2),
            Err(Error::CoordinateOutOfRange { k: 3, n: 2 })
        );
        assert!(flip_point(PointMask(0), 0, 2).is_err());
    }

    #[test]
    fn point_measure_examples() {
        let half = Bias::uniform();
        let p3 = Bias::new(0.3).unwrap();
        assert_eq!(point_measure(PointMask(0b11), half, 2), 0.25);
        assert!((point_measure(PointMask(0b11), p3, 2) - 0.09).abs() < 1e-15);
        assert!((point_measure(PointMask(0), p3, 1) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn measure_sums_to_one() {
        for &p in &[0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95] {
            let bias = Bias::new(p).unwrap();
            for n in 1..=12 {
                let total: f64 = (0..1u32 << n)
                    .map(|x| point_measure(PointMask(x), bias, n))
                    .sum();
                assert!((total - 1.0).abs() < 1e-12, "p={p} n={n}");
                let table = measure_table(bias, n);
                assert!((table.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                let x = 5 % table.len();
                assert!(
                    (table[x] - point_measure(PointMask(x as u32), bias, n)).abs()
                        <= 1e-15 * table[x]
                );
            }
        }
    }

    #[test]
    fn bias_guard_and_derived_values() {
        assert!(Bias::new(0.0).is_err());
        assert!(Bias::new(1.0).is_err());
        assert!(Bias::new(f64::NAN).is_err());
        assert!(Bias::new(1e-6).is_ok());
        for &p in &[1e-6, 0.05, 0.3, 0.5, 0.77, 1.0 - 1e-6] {
            let b = Bias::new(p).unwrap();
            let var = p * (1.0 - p);
            assert!((b.sigma() * b.sigma() - var).abs() <= 1e-14 * var);
            assert!((b.q() - 4.0 * b.sigma() * b.sigma()).abs() <= 1e-14 * b.q());
        }
    }

    #[test]
    fn binary_entropy_values() {
        assert_eq!(binary_entropy(0.0), 0.0);
        assert_eq!(binary_entropy(1.0), 0.0);
        assert!((binary_entropy(0.5) - 2f64.ln()).abs() < 1e-15);
        // -0.84 ln 0.84 - 0.16 ln 0.16
        assert!((binary_entropy(0.84) - 0.439_669_879_401_343).abs() < 1e-12);
    }

    #[test]
    fn truth_table_text_format() {
        let f: BooleanFunction = "01".parse().unwrap();
        assert_eq!(f, BooleanFunction::dictator(1, 1).unwrap());
        assert_eq!(f.to_tt_string(), "01");
        let and2: BooleanFunction = "0001".parse().unwrap();
        assert_eq!(and2, BooleanFunction::and(2).unwrap());
        // hex digits spell the binary string four characters at a time
        let g = parse_truth_table("0x69").unwrap();
        assert_eq!(g.to_tt_string(), "01101001");
        assert_eq!(parse_truth_table("6").unwrap().to_tt_string(), "0110");
        assert_eq!(
            parse_truth_table("a5f0").unwrap().to_tt_string(),
            "1010010111110000"
        );
        assert!(parse_truth_table("011").is_err());
        assert!(parse_truth_table("0").is_err());
        assert!(parse_truth_table("").is_err());
        assert!(parse_truth_table("0xzz").is_err());
    }

    #[test]
    fn bit_scatter_gather() {
        assert_eq!(deposit_bits(0b11, 0b1010), 0b1010);
        assert_eq!(deposit_bits(0b01, 0b1010), 0b0010);
        assert_eq!(extract_bits(0b1110, 0b1010), 0b11);
        for mask in 0..64u32 {
            for v in 0..1u32 << mask.count_ones() {
                assert_eq!(extract_bits(deposit_bits(v, mask), mask), v);
            }
        }
    }

    #[test]
    fn named_families() {
        assert_eq!(
            BooleanFunction::parity(2, SubsetMask(0b11))
                .unwrap()
                .to_tt_string(),
            "1001"
        );
        assert_eq!(
            BooleanFunction::majority(3).unwrap().to_tt_string(),
            "00010111"
        );
        assert!(BooleanFunction::constant(3, true).unwrap().is_constant());
        assert!(BooleanFunction::parity(2, SubsetMask(0b100)).is_err());
    }
}

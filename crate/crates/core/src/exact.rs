//! Integer vectors that stay in `i128` while they can and switch to
//! arbitrary precision when an operation would overflow.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IntVec {
    Small(Vec<i128>),
    Big(Vec<BigInt>),
}

impl IntVec {
    pub fn zeros(len: usize) -> Self {
        IntVec::Small(vec![0; len])
    }

    /// Uses the `i128` representation whenever every entry fits.
    pub fn from_big(values: Vec<BigInt>) -> Self {
        let small: Option<Vec<i128>> = values.iter().map(ToPrimitive::to_i128).collect();
        match small {
            Some(s) => IntVec::Small(s),
            None => IntVec::Big(values),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            IntVec::Small(v) => v.len(),
            IntVec::Big(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize) -> BigInt {
        match self {
            IntVec::Small(v) => BigInt::from(v[i]),
            IntVec::Big(v) => v[i].clone(),
        }
    }

    pub fn to_big(&self) -> Vec<BigInt> {
        match self {
            IntVec::Small(v) => v.iter().map(|&x| BigInt::from(x)).collect(),
            IntVec::Big(v) => v.clone(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            IntVec::Small(v) => v.iter().all(|&x| x == 0),
            IntVec::Big(v) => v.iter().all(Zero::is_zero),
        }
    }

    /// Exact inner product.
    pub fn dot(&self, other: &IntVec) -> BigInt {
        assert_eq!(self.len(), other.len(), "dimension mismatch");
        if let (IntVec::Small(a), IntVec::Small(b)) = (self, other) {
            if let Some(x) = dot_i128(a, b) {
                return BigInt::from(x);
            }
        }
        let a = self.to_big();
        let b = other.to_big();
        a.iter().zip(&b).map(|(x, y)| x * y).sum()
    }

    pub fn to_strings(&self) -> Vec<String> {
        match self {
            IntVec::Small(v) => v.iter().map(i128::to_string).collect(),
            IntVec::Big(v) => v.iter().map(BigInt::to_string).collect(),
        }
    }
}

/// Checked `Σ a_i b_i`; `None` on overflow.
pub fn dot_i128(a: &[i128], b: &[i128]) -> Option<i128> {
    a.iter().zip(b).try_fold(0i128, |acc, (&x, &y)| acc.checked_add(x.checked_mul(y)?))
}

/// `⌊x · m⌋` computed exactly from the binary value of `x`.
pub fn floor_scaled(x: f64, m: &BigInt) -> BigInt {
    if x == 0.0 || !x.is_finite() {
        return BigInt::zero();
    }
    let r = BigRational::from_float(x).expect("finite float") * BigRational::from_integer(m.clone());
    r.floor().to_integer()
}

/// `a / b` rounded to the nearest double, for large exact integers.
pub fn ratio_to_f64(a: &BigInt, b: &BigInt) -> f64 {
    if let (Some(x), Some(y)) = (a.to_i64(), b.to_i64()) {
        if x.unsigned_abs() < 1 << 53 && y.unsigned_abs() < 1 << 53 {
            return x as f64 / y as f64;
        }
    }
    BigRational::new(a.clone(), b.clone()).to_f64().unwrap_or(f64::NAN)
}

//! Exact scalars: rationals extended by `+∞`, squared scales and direct-sum weights.
//!
//! Every quantity the engine manipulates is rational once scales are stored
//! squared, so no floating point appears anywhere.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

pub type Rational = BigRational;

/// Shorthand for `n/d`. Panics on `d == 0`.
pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Exact square root of a nonnegative rational, if it is itself rational.
pub fn rational_sqrt(q: &Rational) -> Option<Rational> {
    if q.is_negative() {
        return None;
    }
    let (n, d) = (q.numer(), q.denom());
    let (rn, rd) = (n.sqrt(), d.sqrt());
    if &(&rn * &rn) == n && &(&rd * &rd) == d {
        Some(Rational::new(rn, rd))
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScalarError {
    #[error("value {0} is negative where a nonnegative quantity is required")]
    Negative(String),
    #[error("0·∞ is not formed by any rule")]
    ZeroTimesInfinity,
    #[error("scale must be positive, got t² = {0}")]
    NonPositiveScale(String),
    #[error("direct-sum weight {0} is outside (0, 1]")]
    WeightOutOfRange(String),
}

/// A rational number or `+∞`. `∞` compares above every rational.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ExtRational {
    Finite(Rational),
    Infinity,
}

impl PartialOrd for ExtRational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtRational {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (ExtRational::Finite(a), ExtRational::Finite(b)) => a.cmp(b),
            (ExtRational::Finite(_), ExtRational::Infinity) => Ordering::Less,
            (ExtRational::Infinity, ExtRational::Finite(_)) => Ordering::Greater,
            (ExtRational::Infinity, ExtRational::Infinity) => Ordering::Equal,
        }
    }
}

impl From<Rational> for ExtRational {
    fn from(q: Rational) -> Self {
        ExtRational::Finite(q)
    }
}

impl ExtRational {
    pub fn zero() -> Self {
        ExtRational::Finite(Rational::zero())
    }

    pub fn one() -> Self {
        ExtRational::Finite(Rational::one())
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, ExtRational::Infinity)
    }

    pub fn finite(&self) -> Option<&Rational> {
        match self {
            ExtRational::Finite(q) => Some(q),
            ExtRational::Infinity => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ExtRational::Finite(q) if q.is_zero())
    }

    pub fn is_nonneg(&self) -> bool {
        match self {
            ExtRational::Finite(q) => !q.is_negative(),
            ExtRational::Infinity => true,
        }
    }

    pub fn add(&self, other: &ExtRational) -> ExtRational {
        match (self, other) {
            (ExtRational::Finite(a), ExtRational::Finite(b)) => ExtRational::Finite(a + b),
            _ => ExtRational::Infinity,
        }
    }

    pub fn add_q(&self, q: &Rational) -> ExtRational {
        match self {
            ExtRational::Finite(a) => ExtRational::Finite(a + q),
            ExtRational::Infinity => ExtRational::Infinity,
        }
    }

    pub fn sub_q(&self, q: &Rational) -> ExtRational {
        self.add_q(&-q)
    }

    /// Multiplication; `0·∞` is rejected.
    pub fn mul(&self, other: &ExtRational) -> Result<ExtRational, ScalarError> {
        match (self, other) {
            (ExtRational::Finite(a), ExtRational::Finite(b)) => Ok(ExtRational::Finite(a * b)),
            (ExtRational::Finite(q), ExtRational::Infinity)
            | (ExtRational::Infinity, ExtRational::Finite(q)) => {
                if q.is_positive() {
                    Ok(ExtRational::Infinity)
                } else if q.is_zero() {
                    Err(ScalarError::ZeroTimesInfinity)
                } else {
                    Err(ScalarError::Negative(q.to_string()))
                }
            }
            (ExtRational::Infinity, ExtRational::Infinity) => Ok(ExtRational::Infinity),
        }
    }

    /// Multiplication by a strictly positive rational, which is always defined.
    pub fn scale(&self, q: &Rational) -> ExtRational {
        debug_assert!(q.is_positive());
        match self {
            ExtRational::Finite(a) => ExtRational::Finite(a * q),
            ExtRational::Infinity => ExtRational::Infinity,
        }
    }
}

impl fmt::Display for ExtRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtRational::Finite(q) => write!(f, "{}", q),
            ExtRational::Infinity => write!(f, "inf"),
        }
    }
}

/// Nonnegative extended rational: free-group parameters, fdim values, word tails.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExtNonneg(ExtRational);

impl ExtNonneg {
    pub fn new(v: ExtRational) -> Result<Self, ScalarError> {
        if v.is_nonneg() {
            Ok(ExtNonneg(v))
        } else {
            Err(ScalarError::Negative(v.to_string()))
        }
    }

    pub fn finite(q: Rational) -> Result<Self, ScalarError> {
        Self::new(ExtRational::Finite(q))
    }

    pub fn infinity() -> Self {
        ExtNonneg(ExtRational::Infinity)
    }

    pub fn zero() -> Self {
        ExtNonneg(ExtRational::zero())
    }

    pub fn value(&self) -> &ExtRational {
        &self.0
    }

    pub fn into_value(self) -> ExtRational {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_infinite(&self) -> bool {
        self.0.is_infinite()
    }

    pub fn add(&self, other: &ExtNonneg) -> ExtNonneg {
        ExtNonneg(self.0.add(&other.0))
    }

    pub fn mul(&self, other: &ExtNonneg) -> Result<ExtNonneg, ScalarError> {
        self.0.mul(&other.0).map(ExtNonneg)
    }
}

impl fmt::Display for ExtNonneg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// A scale `t > 0` stored as `t²`, so that scales like `2^(-k/2)` stay rational.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SqScale(Rational);

impl SqScale {
    pub fn new(sq: Rational) -> Result<Self, ScalarError> {
        if sq.is_positive() {
            Ok(SqScale(sq))
        } else {
            Err(ScalarError::NonPositiveScale(sq.to_string()))
        }
    }

    /// From the scale `t` itself.
    pub fn from_scale(t: Rational) -> Result<Self, ScalarError> {
        if !t.is_positive() {
            return Err(ScalarError::NonPositiveScale(t.to_string()));
        }
        Ok(SqScale(&t * &t))
    }

    pub fn one() -> Self {
        SqScale(Rational::one())
    }

    pub fn sq(&self) -> &Rational {
        &self.0
    }

    pub fn is_one(&self) -> bool {
        self.0.is_one()
    }

    pub fn compose(&self, other: &SqScale) -> SqScale {
        SqScale(&self.0 * &other.0)
    }

    pub fn divide(&self, other: &SqScale) -> SqScale {
        SqScale(&self.0 / &other.0)
    }

    pub fn inverse(&self) -> SqScale {
        SqScale(self.0.recip())
    }

    /// `t` itself when `t²` is a rational square.
    pub fn exact_scale(&self) -> Option<Rational> {
        rational_sqrt(&self.0)
    }
}

impl fmt::Display for SqScale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.exact_scale() {
            Some(t) => write!(f, "{}", t),
            None => write!(f, "sqrt({})", self.0),
        }
    }
}

/// A direct-sum weight in `(0, 1]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Weight(Rational);

impl Weight {
    pub fn new(w: Rational) -> Result<Self, ScalarError> {
        if w.is_positive() && w <= Rational::one() {
            Ok(Weight(w))
        } else {
            Err(ScalarError::WeightOutOfRange(w.to_string()))
        }
    }

    pub fn one() -> Self {
        Weight(Rational::one())
    }

    pub fn value(&self) -> &Rational {
        &self.0
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q() -> impl Strategy<Value = Rational> {
        (-1000i64..1000, 1i64..200).prop_map(|(n, d)| rat(n, d))
    }

    proptest! {
        #[test]
        fn rational_arithmetic_is_exact(a in q(), b in q(), c in q()) {
            prop_assert_eq!((&a + &b) + &c, &a + (&b + &c));
            prop_assert_eq!(&a * (&b + &c), &a * &b + &a * &c);
        }

        #[test]
        fn sq_scale_composition(x in 1i64..50, s in 1i64..50, t in 1i64..50, d in 1i64..30) {
            let x = SqScale::new(rat(x, d)).unwrap();
            let s = SqScale::new(rat(s, d)).unwrap();
            let t = SqScale::new(rat(t, 7)).unwrap();
            let composed = x.compose(&s).compose(&t);
            prop_assert_eq!(composed.sq(), &(x.sq() * s.sq() * t.sq()));
        }
    }

    #[test]
    fn infinity_absorbs_and_orders() {
        let inf = ExtRational::Infinity;
        assert_eq!(inf.add_q(&rat(3, 2)), ExtRational::Infinity);
        assert_eq!(inf.mul(&ExtRational::Finite(rat(1, 3))).unwrap(), ExtRational::Infinity);
        assert_eq!(inf.mul(&ExtRational::zero()), Err(ScalarError::ZeroTimesInfinity));
        assert!(ExtRational::Finite(int(1_000_000)) < inf);
    }

    #[test]
    fn scale_display_prefers_rational_t() {
        assert_eq!(SqScale::new(rat(1, 4)).unwrap().to_string(), "1/2");
        assert_eq!(SqScale::new(rat(1, 2)).unwrap().to_string(), "sqrt(1/2)");
        assert!(SqScale::new(rat(1, 1)).unwrap().is_one());
        assert!(SqScale::new(int(0)).is_err());
    }

    #[test]
    fn weights_live_in_unit_interval() {
        assert!(Weight::new(rat(1, 2)).is_ok());
        assert!(Weight::new(int(1)).is_ok());
        assert!(Weight::new(int(0)).is_err());
        assert!(Weight::new(rat(3, 2)).is_err());
    }

    #[test]
    fn nonneg_rejects_negative() {
        assert!(ExtNonneg::finite(rat(-1, 2)).is_err());
        assert!(ExtNonneg::finite(rat(0, 1)).unwrap().is_zero());
    }
}

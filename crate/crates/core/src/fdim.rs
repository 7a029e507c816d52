//! Free dimension of class-F expressions.
//!
//! * diffuse hyperfinite: 1
//! * `M_n(ℂ)`: `1 - n⁻²`
//! * `L(F_t)`: `t`
//! * `⊕ α_i A_i`: `1 + Σ α_i² (fdim(A_i) - 1)`
//! * free products add.
//!
//! The function is defined on expressions, not on isomorphism classes.

use num_traits::{One, Zero};

use crate::error::{EngineError, Result};
use crate::expr::{Count, Expr, GeometricFamily};
use crate::scalar::{int, ExtRational, Rational};

pub fn fdim(e: &Expr) -> Result<ExtRational> {
    match e {
        Expr::Fgf(r) => Ok(r.clone()),
        Expr::Hyperfinite { .. } => Ok(ExtRational::one()),
        Expr::Matrix(n) => {
            let n = int(*n as i64);
            Ok(ExtRational::Finite(Rational::one() - (&n * &n).recip()))
        }
        Expr::DirectSum(parts) => {
            let mut acc = ExtRational::one();
            for (w, part) in parts {
                let f = fdim(part)?.sub_q(&Rational::one());
                acc = match f {
                    ExtRational::Finite(q) => acc.add_q(&(w * w * q)),
                    ExtRational::Infinity => ExtRational::Infinity,
                };
            }
            Ok(acc)
        }
        Expr::FreeProduct(parts) => {
            let mut acc = ExtRational::zero();
            for part in parts {
                acc = acc.add(&fdim(part)?);
            }
            Ok(acc)
        }
        Expr::Opaque(_) | Expr::Rescale(..) | Expr::ScaledProduct { .. } => {
            Err(EngineError::UndefinedFdim(e.to_string()))
        }
    }
}

/// `Σ_k t(k)²` for a geometric letter family, in closed form.
pub fn sum_squares(first_sq: &Rational, ratio: &Rational, count: Count) -> ExtRational {
    let one = Rational::one();
    match count {
        Count::Infinite if ratio == &one => ExtRational::Infinity,
        Count::Infinite => ExtRational::Finite(first_sq / (&one - ratio)),
        Count::Finite(n) if ratio == &one => ExtRational::Finite(first_sq * int(n as i64)),
        Count::Finite(n) => {
            let pow = pow_rational(ratio, n);
            ExtRational::Finite(first_sq * (&one - pow) / (&one - ratio))
        }
    }
}

pub fn family_sum_squares(f: &GeometricFamily) -> ExtRational {
    sum_squares(&f.first_sq, &f.ratio, f.count)
}

pub(crate) fn pow_rational(base: &Rational, mut exp: u64) -> Rational {
    let mut result = Rational::one();
    let mut b = base.clone();
    while exp > 0 {
        if exp & 1 == 1 {
            result *= &b;
        }
        b = &b * &b;
        exp >>= 1;
    }
    if result.is_zero() {
        Rational::zero()
    } else {
        result
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat;

    fn q(n: i64, d: i64) -> ExtRational {
        ExtRational::Finite(rat(n, d))
    }

    #[test]
    fn matrix_rule() {
        assert_eq!(fdim(&Expr::Matrix(2)).unwrap(), q(3, 4));
        assert_eq!(fdim(&Expr::scalars()).unwrap(), q(0, 1));
    }

    #[test]
    fn worked_example_sums_to_five() {
        let ld = Expr::dsum(vec![(rat(1, 2), Expr::fgf(int(2))), (rat(1, 2), Expr::scalars())]);
        assert_eq!(fdim(&ld).unwrap(), q(1, 1));
        let m = Expr::free(vec![ld, Expr::fgf(int(4))]);
        assert_eq!(fdim(&m).unwrap(), q(5, 1));
    }

    #[test]
    fn two_atoms() {
        // oracle: 1 + (1/3)²(0-1) + (2/3)²(0-1)
        let oracle = rat(1, 1) - rat(1, 9) - rat(4, 9);
        let e = Expr::dsum(vec![(rat(1, 3), Expr::scalars()), (rat(2, 3), Expr::scalars())]);
        assert_eq!(fdim(&e).unwrap(), ExtRational::Finite(oracle));
        assert_eq!(fdim(&e).unwrap(), q(4, 9));
    }

    #[test]
    fn infinite_parameter_propagates() {
        let e = Expr::dsum(vec![(rat(1, 2), Expr::fgf_inf()), (rat(1, 2), Expr::scalars())]);
        assert_eq!(fdim(&e).unwrap(), ExtRational::Infinity);
    }

    #[test]
    fn undefined_on_opaque_and_rescale() {
        assert!(matches!(fdim(&Expr::opaque("N")), Err(EngineError::UndefinedFdim(_))));
        let r = Expr::rescale(Expr::fgf(int(2)), rat(1, 4));
        assert!(matches!(fdim(&r), Err(EngineError::UndefinedFdim(_))));
    }

    #[test]
    fn family_sums() {
        assert_eq!(sum_squares(&rat(1, 2), &rat(1, 2), Count::Infinite), q(1, 1));
        assert_eq!(sum_squares(&rat(1, 4), &rat(1, 1), Count::Infinite), ExtRational::Infinity);
        assert_eq!(sum_squares(&rat(1, 4), &rat(1, 1), Count::Finite(3)), q(3, 4));
        // 1/2 + 1/4 + 1/8
        assert_eq!(sum_squares(&rat(1, 2), &rat(1, 2), Count::Finite(3)), q(7, 8));
    }
}

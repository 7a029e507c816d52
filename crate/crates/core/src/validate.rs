//! Well-formedness of expressions and factor detection.

use std::fmt;

use num_traits::{One, Signed, Zero};

use crate::expr::{Count, Expr, LetterExpr};
use crate::fclass::{normalize_fclass, FNormalForm};
use crate::scalar::{int, rational_sqrt, Rational};

/// Words the expression language reserves; they cannot name opaque factors.
pub const RESERVED: &[&str] = &["C", "H", "R", "M", "LF", "inf", "dsum", "scale", "sub", "fam", "sqrt"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Child-index path to the offending subterm.
    pub path: Vec<usize>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            if v.path.is_empty() {
                write!(f, "{}", v.message)?;
            } else {
                let p: Vec<String> = v.path.iter().map(usize::to_string).collect();
                write!(f, "at {}: {}", p.join("."), v.message)?;
            }
        }
        Ok(())
    }
}

/// Factor status of an expression.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FactorStatus {
    /// A II₁ factor.
    Ii1,
    /// `M_n(ℂ)`.
    Matrix(u64),
    NotFactor,
    Unknown(String),
}

pub fn is_valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !RESERVED.contains(&name)
}

pub fn factor_status(e: &Expr) -> FactorStatus {
    match e {
        Expr::Fgf(_) | Expr::Opaque(_) | Expr::ScaledProduct { .. } => FactorStatus::Ii1,
        Expr::Hyperfinite { factor: true } => FactorStatus::Ii1,
        Expr::Hyperfinite { factor: false } | Expr::DirectSum(_) => FactorStatus::NotFactor,
        Expr::Matrix(n) => FactorStatus::Matrix(*n),
        Expr::FreeProduct(_) if !e.is_class_f() => FactorStatus::Ii1,
        Expr::FreeProduct(_) => {
            if !well_formed(e).is_ok() {
                return FactorStatus::Unknown("ill-formed operand".into());
            }
            match normalize_fclass(e) {
                Ok((nf, _)) => nf_status(&nf),
                Err(err) => FactorStatus::Unknown(err.to_string()),
            }
        }
        Expr::Rescale(inner, sq) => match factor_status(inner) {
            FactorStatus::Matrix(n) => match realizable_size(n, sq) {
                Some(k) => FactorStatus::Matrix(k),
                None => FactorStatus::Unknown(format!("M_{} at t² = {} is not realizable", n, sq)),
            },
            other => other,
        },
    }
}

fn nf_status(nf: &FNormalForm) -> FactorStatus {
    if nf.is_ii1_factor() {
        FactorStatus::Ii1
    } else if let Some(n) = nf.matrix_size() {
        FactorStatus::Matrix(n)
    } else {
        FactorStatus::NotFactor
    }
}

/// `k` with `t·n = k` for `t² = sq`, when `k` is a positive integer.
pub fn realizable_size(n: u64, sq: &Rational) -> Option<u64> {
    if !sq.is_positive() {
        return None;
    }
    let k = rational_sqrt(sq)? * int(n as i64);
    if k.is_integer() {
        u64::try_from(k.to_integer()).ok()
    } else {
        None
    }
}

pub fn is_ii1_factor(e: &Expr) -> bool {
    factor_status(e) == FactorStatus::Ii1
}

/// Collects every structural violation; never panics.
pub fn well_formed(e: &Expr) -> ValidationReport {
    let mut report = ValidationReport::default();
    check(e, &mut Vec::new(), &mut report);
    report
}

fn check(e: &Expr, path: &mut Vec<usize>, out: &mut ValidationReport) {
    let mut bad = |msg: String| out.violations.push(Violation { path: path.clone(), message: msg });
    match e {
        Expr::Fgf(r) => {
            if let Some(q) = r.finite() {
                if q <= &Rational::one() {
                    bad(format!("LF(r) needs r > 1, got {}", q));
                }
            }
        }
        Expr::Matrix(0) => bad("M(n) needs n ≥ 1".into()),
        Expr::Opaque(name) => {
            if !is_valid_name(name) {
                bad(format!("'{}' is not a valid factor name", name));
            }
        }
        Expr::DirectSum(parts) => {
            if parts.len() < 2 {
                bad("a direct sum needs at least 2 summands".into());
            }
            let mut total = Rational::zero();
            for (w, part) in parts {
                if !w.is_positive() || w > &Rational::one() {
                    bad(format!("weight {} is outside (0, 1]", w));
                }
                total += w;
                if !part.is_class_f() {
                    bad(format!("summand {} is outside class F", part));
                }
            }
            if total != Rational::one() {
                bad(format!("weights add up to {}, not 1", total));
            }
        }
        Expr::FreeProduct(parts) => {
            if parts.len() < 2 {
                bad("a free product needs at least 2 factors".into());
            }
        }
        Expr::Rescale(inner, sq) => {
            if !sq.is_positive() {
                bad(format!("scale must be positive, got t² = {}", sq));
            } else if well_formed(inner).is_ok() {
                match factor_status(inner) {
                    FactorStatus::Ii1 => {}
                    FactorStatus::Matrix(n) => {
                        if realizable_size(n, sq).is_none() {
                            bad(format!("M_{} cannot be rescaled by t² = {}", n, sq));
                        }
                    }
                    FactorStatus::NotFactor => bad(format!("{} is not a factor and cannot be rescaled", inner)),
                    FactorStatus::Unknown(why) => bad(format!("cannot decide whether {} is a factor: {}", inner, why)),
                }
            }
        }
        Expr::ScaledProduct { base, letters } => {
            if letters.is_empty() {
                bad("a scaled product needs at least one letter".into());
            }
            if well_formed(base).is_ok() && !is_ii1_factor(base) {
                bad(format!("base {} is not a II₁ factor", base));
            }
            for l in letters {
                match l {
                    LetterExpr::Single { sq, body } => {
                        if !sq.is_positive() {
                            bad(format!("letter scale must be positive, got t² = {}", sq));
                        } else if sq > &Rational::one() && well_formed(body).is_ok() && !is_ii1_factor(body) {
                            bad(format!("letter [t, {}] with t > 1 needs a II₁-factor body", body));
                        }
                    }
                    LetterExpr::Family(f) => {
                        if !f.first_sq.is_positive() {
                            bad(format!("family scale must be positive, got t² = {}", f.first_sq));
                        }
                        if !f.ratio.is_positive() || f.ratio > Rational::one() {
                            bad(format!("family ratio {} is outside (0, 1]", f.ratio));
                        }
                        if f.count == Count::Finite(0) {
                            bad("a family needs at least one member".into());
                        }
                        if f.first_sq > Rational::one() && well_formed(&f.body).is_ok() && !is_ii1_factor(&f.body) {
                            bad(format!("family members with t > 1 need a II₁-factor body, got {}", f.body));
                        }
                    }
                }
            }
        }
        Expr::Hyperfinite { .. } | Expr::Matrix(_) => {}
    }
    for (i, child) in e.children().into_iter().enumerate() {
        path.push(i);
        check(child, path, out);
        path.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat;

    #[test]
    fn accepts_worked_example() {
        let e = Expr::free(vec![
            Expr::dsum(vec![(rat(1, 2), Expr::fgf(int(2))), (rat(1, 2), Expr::scalars())]),
            Expr::fgf(int(4)),
        ]);
        assert!(well_formed(&e).is_ok());
    }

    #[test]
    fn reports_bad_weights_with_position() {
        let e = Expr::free(vec![
            Expr::opaque("N"),
            Expr::dsum(vec![(rat(1, 2), Expr::scalars()), (rat(1, 3), Expr::scalars())]),
        ]);
        let r = well_formed(&e);
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].path, vec![1]);
        assert!(r.to_string().contains("5/6"));
    }

    #[test]
    fn rejects_small_fgf_parameter_and_reserved_names() {
        assert!(!well_formed(&Expr::fgf(int(1))).is_ok());
        assert!(!well_formed(&Expr::opaque("R")).is_ok());
        assert!(well_formed(&Expr::fgf_inf()).is_ok());
    }

    #[test]
    fn rescale_needs_a_factor() {
        let ab = Expr::dsum(vec![(rat(1, 2), Expr::scalars()), (rat(1, 2), Expr::scalars())]);
        assert!(!well_formed(&Expr::rescale(ab, rat(1, 4))).is_ok());
        assert!(well_formed(&Expr::rescale(Expr::Matrix(4), rat(1, 4))).is_ok());
        assert!(!well_formed(&Expr::rescale(Expr::Matrix(3), rat(1, 4))).is_ok());
        assert!(!well_formed(&Expr::rescale(Expr::opaque("N"), int(0))).is_ok());
    }

    #[test]
    fn scaled_product_base_must_be_ii1() {
        let bad = Expr::sub(Expr::Matrix(2), vec![Expr::letter(rat(1, 4), Expr::opaque("Q"))]);
        assert!(!well_formed(&bad).is_ok());
        let good = Expr::sub(
            Expr::free(vec![Expr::Matrix(2), Expr::Matrix(2)]),
            vec![Expr::letter(rat(1, 4), Expr::opaque("Q"))],
        );
        assert!(well_formed(&good).is_ok());
    }

    #[test]
    fn factor_detection() {
        let two_by_two = Expr::free(vec![
            Expr::dsum(vec![(rat(1, 2), Expr::scalars()), (rat(1, 2), Expr::scalars())]),
            Expr::dsum(vec![(rat(1, 2), Expr::scalars()), (rat(1, 2), Expr::scalars())]),
        ]);
        assert_eq!(factor_status(&two_by_two), FactorStatus::NotFactor);
        assert_eq!(factor_status(&Expr::free(vec![Expr::Matrix(2), Expr::Matrix(3)])), FactorStatus::Ii1);
        assert_eq!(factor_status(&Expr::rescale(Expr::Matrix(6), rat(4, 9))), FactorStatus::Matrix(4));
    }
}

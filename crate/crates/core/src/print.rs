//! Canonical text form of expressions. The output re-parses to the same tree.

use std::fmt;

use crate::expr::{Count, Expr, LetterExpr};
use crate::scalar::{rational_sqrt, Rational};

/// Scale text for a stored `t²`: the rational `t` when exact, otherwise `sqrt(t²)`.
pub fn scale_text(sq: &Rational) -> String {
    match rational_sqrt(sq) {
        Some(t) => t.to_string(),
        None => format!("sqrt({})", sq),
    }
}

impl fmt::Display for Count {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Count::Finite(n) => write!(f, "{}", n),
            Count::Infinite => write!(f, "inf"),
        }
    }
}

impl fmt::Display for LetterExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LetterExpr::Single { sq, body } => write!(f, "[{}, {}]", scale_text(sq), body),
            LetterExpr::Family(fam) => write!(
                f,
                "fam({}, {}, {}, {})",
                fam.first_sq, fam.ratio, fam.count, fam.body
            ),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Fgf(r) => write!(f, "LF({})", r),
            Expr::Hyperfinite { factor: true } => write!(f, "R"),
            Expr::Hyperfinite { factor: false } => write!(f, "H"),
            Expr::Matrix(1) => write!(f, "C"),
            Expr::Matrix(n) => write!(f, "M({})", n),
            Expr::Opaque(name) => write!(f, "{}", name),
            Expr::DirectSum(parts) => {
                write!(f, "dsum(")?;
                for (i, (w, e)) in parts.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{}: {}", w, e)?;
                }
                write!(f, ")")
            }
            Expr::FreeProduct(parts) => {
                for (i, e) in parts.iter().enumerate() {
                    if i > 0 {
                        write!(f, " * ")?;
                    }
                    match e {
                        Expr::FreeProduct(_) => write!(f, "({})", e)?,
                        _ => write!(f, "{}", e)?,
                    }
                }
                Ok(())
            }
            Expr::Rescale(e, sq) => write!(f, "scale({}, {})", e, scale_text(sq)),
            Expr::ScaledProduct { base, letters } => {
                write!(f, "sub({}", base)?;
                for l in letters {
                    write!(f, ", {}", l)?;
                }
                write!(f, ")")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{int, rat};

    #[test]
    fn prints_surface_syntax() {
        let e = Expr::free(vec![
            Expr::dsum(vec![(rat(1, 2), Expr::fgf(int(2))), (rat(1, 2), Expr::scalars())]),
            Expr::fgf(int(4)),
        ]);
        assert_eq!(e.to_string(), "dsum(1/2: LF(2), 1/2: C) * LF(4)");
        assert_eq!(Expr::fgf(int(5)).to_string(), "LF(5)");
        assert_eq!(Expr::fgf_inf().to_string(), "LF(inf)");
    }

    #[test]
    fn scales_print_as_t_when_exact() {
        let e = Expr::sub(Expr::opaque("N"), vec![Expr::letter(rat(1, 4), Expr::opaque("Q"))]);
        assert_eq!(e.to_string(), "sub(N, [1/2, Q])");
        let e = Expr::sub(Expr::opaque("N"), vec![Expr::letter(rat(1, 2), Expr::opaque("Q"))]);
        assert_eq!(e.to_string(), "sub(N, [sqrt(1/2), Q])");
    }

    #[test]
    fn nested_free_products_are_parenthesized() {
        let e = Expr::free(vec![
            Expr::opaque("A"),
            Expr::free(vec![Expr::opaque("B"), Expr::opaque("C1")]),
        ]);
        assert_eq!(e.to_string(), "A * (B * C1)");
    }
}

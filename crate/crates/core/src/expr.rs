//! Expression trees for tracial von Neumann algebras and the session assumptions.

use std::collections::BTreeSet;

use crate::scalar::{ExtRational, Rational};

/// An algebra expression. Scalars and scales are stored raw so that
/// ill-formed input can still be represented and reported by
/// [`well_formed`](crate::validate::well_formed).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    /// Interpolated free group factor `L(F_r)`, `1 < r ≤ ∞`.
    Fgf(ExtRational),
    /// Diffuse hyperfinite algebra; `factor` marks the hyperfinite II₁ factor `R`.
    Hyperfinite { factor: bool },
    /// `M_n(ℂ)`; `Matrix(1)` is the scalars.
    Matrix(u64),
    /// Abstract II₁ factor symbol.
    Opaque(String),
    /// Weighted direct sum; weights should add up to 1.
    DirectSum(Vec<(Rational, Expr)>),
    FreeProduct(Vec<Expr>),
    /// Rescaling `M_t`, scale stored as `t²`.
    Rescale(Box<Expr>, Rational),
    /// Free scaled product `N ⋆ [t_ι, Q(ι)]`.
    ScaledProduct { base: Box<Expr>, letters: Vec<LetterExpr> },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LetterExpr {
    /// `[t, Q]` with `sq = t²`.
    Single { sq: Rational, body: Expr },
    Family(GeometricFamily),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Count {
    Finite(u64),
    Infinite,
}

/// The letter family `[t(k), Q]`, `k = 1..count`, with `t(k)² = first_sq · ratio^(k-1)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GeometricFamily {
    pub first_sq: Rational,
    pub ratio: Rational,
    pub count: Count,
    pub body: Box<Expr>,
}

impl Expr {
    pub fn fgf(r: Rational) -> Expr {
        Expr::Fgf(ExtRational::Finite(r))
    }

    pub fn fgf_inf() -> Expr {
        Expr::Fgf(ExtRational::Infinity)
    }

    pub fn scalars() -> Expr {
        Expr::Matrix(1)
    }

    pub fn hyperfinite() -> Expr {
        Expr::Hyperfinite { factor: false }
    }

    pub fn hyperfinite_factor() -> Expr {
        Expr::Hyperfinite { factor: true }
    }

    pub fn opaque(name: &str) -> Expr {
        Expr::Opaque(name.to_string())
    }

    pub fn dsum(parts: Vec<(Rational, Expr)>) -> Expr {
        Expr::DirectSum(parts)
    }

    pub fn free(parts: Vec<Expr>) -> Expr {
        Expr::FreeProduct(parts)
    }

    pub fn rescale(e: Expr, sq: Rational) -> Expr {
        Expr::Rescale(Box::new(e), sq)
    }

    pub fn sub(base: Expr, letters: Vec<LetterExpr>) -> Expr {
        Expr::ScaledProduct { base: Box::new(base), letters }
    }

    pub fn letter(sq: Rational, body: Expr) -> LetterExpr {
        LetterExpr::Single { sq, body }
    }

    pub fn family(first_sq: Rational, ratio: Rational, count: Count, body: Expr) -> LetterExpr {
        LetterExpr::Family(GeometricFamily { first_sq, ratio, count, body: Box::new(body) })
    }

    /// True when the expression mentions an opaque factor anywhere.
    pub fn contains_opaque(&self) -> bool {
        match self {
            Expr::Opaque(_) => true,
            Expr::Fgf(_) | Expr::Hyperfinite { .. } | Expr::Matrix(_) => false,
            Expr::DirectSum(parts) => parts.iter().any(|(_, e)| e.contains_opaque()),
            Expr::FreeProduct(parts) => parts.iter().any(Expr::contains_opaque),
            Expr::Rescale(e, _) => e.contains_opaque(),
            Expr::ScaledProduct { base, letters } => {
                base.contains_opaque()
                    || letters.iter().any(|l| match l {
                        LetterExpr::Single { body, .. } => body.contains_opaque(),
                        LetterExpr::Family(f) => f.body.contains_opaque(),
                    })
            }
        }
    }

    /// Class-F shaped: no opaque symbols and no scaled products. Such expressions
    /// are normalized by rewriting to `L(F_r) ⊕ D` form.
    pub fn is_class_f(&self) -> bool {
        match self {
            Expr::Opaque(_) | Expr::ScaledProduct { .. } => false,
            Expr::Fgf(_) | Expr::Hyperfinite { .. } | Expr::Matrix(_) => true,
            Expr::DirectSum(parts) => parts.iter().all(|(_, e)| e.is_class_f()),
            Expr::FreeProduct(parts) => parts.iter().all(Expr::is_class_f),
            Expr::Rescale(e, _) => e.is_class_f(),
        }
    }

    pub fn is_scalars(&self) -> bool {
        matches!(self, Expr::Matrix(1))
    }

    /// Sorted, deduplicated opaque symbol names.
    pub fn opaque_names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_opaque(&mut out);
        out
    }

    fn collect_opaque(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Opaque(n) => {
                out.insert(n.clone());
            }
            Expr::Fgf(_) | Expr::Hyperfinite { .. } | Expr::Matrix(_) => {}
            Expr::DirectSum(parts) => parts.iter().for_each(|(_, e)| e.collect_opaque(out)),
            Expr::FreeProduct(parts) => parts.iter().for_each(|e| e.collect_opaque(out)),
            Expr::Rescale(e, _) => e.collect_opaque(out),
            Expr::ScaledProduct { base, letters } => {
                base.collect_opaque(out);
                for l in letters {
                    match l {
                        LetterExpr::Single { body, .. } => body.collect_opaque(out),
                        LetterExpr::Family(f) => f.body.collect_opaque(out),
                    }
                }
            }
        }
    }

    /// Immediate subexpressions, in position order.
    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Fgf(_) | Expr::Hyperfinite { .. } | Expr::Matrix(_) | Expr::Opaque(_) => vec![],
            Expr::DirectSum(parts) => parts.iter().map(|(_, e)| e).collect(),
            Expr::FreeProduct(parts) => parts.iter().collect(),
            Expr::Rescale(e, _) => vec![e],
            Expr::ScaledProduct { base, letters } => {
                let mut out = vec![base.as_ref()];
                out.extend(letters.iter().map(|l| match l {
                    LetterExpr::Single { body, .. } => body,
                    LetterExpr::Family(f) => f.body.as_ref(),
                }));
                out
            }
        }
    }

    fn child_mut(&mut self, i: usize) -> Option<&mut Expr> {
        match self {
            Expr::DirectSum(parts) => parts.get_mut(i).map(|(_, e)| e),
            Expr::FreeProduct(parts) => parts.get_mut(i),
            Expr::Rescale(e, _) if i == 0 => Some(e),
            Expr::ScaledProduct { base, letters } => {
                if i == 0 {
                    Some(base)
                } else {
                    letters.get_mut(i - 1).map(|l| match l {
                        LetterExpr::Single { body, .. } => body,
                        LetterExpr::Family(f) => f.body.as_mut(),
                    })
                }
            }
            _ => None,
        }
    }

    /// Subexpression at a child-index path.
    pub fn at(&self, path: &[usize]) -> Option<&Expr> {
        match path.split_first() {
            None => Some(self),
            Some((i, rest)) => self.children().get(*i).and_then(|c| c.at(rest)),
        }
    }

    /// Copy of `self` with the subexpression at `path` replaced.
    pub fn replaced_at(&self, path: &[usize], new: Expr) -> Option<Expr> {
        let mut out = self.clone();
        let mut cur = &mut out;
        for &i in path {
            cur = cur.child_mut(i)?;
        }
        *cur = new;
        Some(out)
    }

    /// Number of nodes, used to bound generated expressions and to minimize counterexamples.
    pub fn size(&self) -> usize {
        1 + self.children().iter().map(|c| c.size()).sum::<usize>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Mode {
    /// Free group factors treated as mutually nonisomorphic.
    #[default]
    Distinct,
    /// All interpolated free group factors identified.
    Collapsed,
}

/// Session assumptions: stable opaque factors (`Q ≅ Q * L(F_∞)`) and the comparison mode.
/// Stability assumptions only grow.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AssumptionSet {
    stable: BTreeSet<String>,
    pub mode: Mode,
}

impl AssumptionSet {
    pub fn new(mode: Mode) -> Self {
        AssumptionSet { stable: BTreeSet::new(), mode }
    }

    pub fn assume_stable(&mut self, name: &str) {
        self.stable.insert(name.to_string());
    }

    pub fn with_stable(mut self, name: &str) -> Self {
        self.assume_stable(name);
        self
    }

    pub fn is_stable(&self, name: &str) -> bool {
        self.stable.contains(name)
    }

    pub fn stable_names(&self) -> impl Iterator<Item = &String> {
        self.stable.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat;

    #[test]
    fn paths_address_children() {
        let e = Expr::free(vec![
            Expr::dsum(vec![(rat(1, 2), Expr::fgf(rat(2, 1))), (rat(1, 2), Expr::scalars())]),
            Expr::fgf(rat(4, 1)),
        ]);
        assert_eq!(e.at(&[0, 1]), Some(&Expr::scalars()));
        let r = e.replaced_at(&[1], Expr::fgf(rat(5, 1))).unwrap();
        assert_eq!(r.at(&[1]), Some(&Expr::fgf(rat(5, 1))));
        assert_eq!(e.at(&[2]), None);
        assert_eq!(e.size(), 5);
    }

    #[test]
    fn class_f_detection() {
        let n = Expr::opaque("N");
        assert!(!n.is_class_f());
        assert!(Expr::rescale(Expr::fgf(rat(3, 1)), rat(1, 4)).is_class_f());
        let s = Expr::sub(Expr::fgf(rat(2, 1)), vec![Expr::letter(rat(1, 4), Expr::fgf(rat(2, 1)))]);
        assert!(!s.is_class_f());
        assert!(!s.contains_opaque());
    }

    #[test]
    fn stability_is_monotone() {
        let mut a = AssumptionSet::default();
        a.assume_stable("Q");
        a.assume_stable("Q");
        assert!(a.is_stable("Q"));
        assert_eq!(a.stable_names().count(), 1);
    }
}

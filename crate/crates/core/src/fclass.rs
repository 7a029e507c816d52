//! Normal forms `L(F_r) ⊕ D` for class-F algebras.
//!
//! Normalization is innermost-first rewriting on [`Expr`]; each rewrite is a
//! certificate step. Normalized subterms are themselves expressions (leaves,
//! or a direct sum of leaves in canonical order), so every intermediate state
//! is printable and re-checkable.

use std::cmp::Reverse;

use num_traits::{One, Signed, Zero};

use crate::cert::{Certificate, Rule, State};
use crate::error::{EngineError, Result};
use crate::expr::Expr;
use crate::fdim::fdim;
use crate::scalar::{int, rational_sqrt, ExtRational, Rational};
use crate::validate::well_formed;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DiffuseKind {
    /// `L(F_r)`, `r > 1`.
    Fgf(ExtRational),
    /// Hyperfinite II₁ factor `R`.
    HyperfiniteFactor,
    /// Diffuse hyperfinite algebra with nontrivial center.
    Hyperfinite,
}

impl DiffuseKind {
    fn leaf(&self) -> Expr {
        match self {
            DiffuseKind::Fgf(r) => Expr::Fgf(r.clone()),
            DiffuseKind::HyperfiniteFactor => Expr::hyperfinite_factor(),
            DiffuseKind::Hyperfinite => Expr::hyperfinite(),
        }
    }

    fn is_hyperfinite(&self) -> bool {
        !matches!(self, DiffuseKind::Fgf(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DiffusePart {
    pub kind: DiffuseKind,
    pub weight: Rational,
}

/// Canonical class-F form: diffuse summands, matrix blocks `M_n` (`n ≥ 2`) and
/// `ℂ`-atoms, each with its trace weight. Weights add up to 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FNormalForm {
    pub diffuse: Vec<DiffusePart>,
    pub blocks: Vec<(Rational, u64)>,
    pub atoms: Vec<Rational>,
}

/// How two atoms of traces `α`, `β` meet in a free product.
pub type CollisionRule = dyn Fn(&Rational, &Rational) -> Option<Rational>;

/// Atoms collide into an atom of trace `α + β − 1` when `α + β > 1`.
pub fn standard_collision(a: &Rational, b: &Rational) -> Option<Rational> {
    let s = a + b - Rational::one();
    if s.is_positive() {
        Some(s)
    } else {
        None
    }
}

impl FNormalForm {
    pub fn scalars() -> Self {
        FNormalForm { diffuse: vec![], blocks: vec![], atoms: vec![Rational::one()] }
    }

    pub fn single(kind: DiffuseKind) -> Self {
        FNormalForm {
            diffuse: vec![DiffusePart { kind, weight: Rational::one() }],
            blocks: vec![],
            atoms: vec![],
        }
    }

    pub fn fgf(r: ExtRational) -> Self {
        Self::single(DiffuseKind::Fgf(r))
    }

    pub fn matrix(n: u64) -> Self {
        if n == 1 {
            Self::scalars()
        } else {
            FNormalForm { diffuse: vec![], blocks: vec![(Rational::one(), n)], atoms: vec![] }
        }
    }

    fn from_leaf(e: &Expr) -> Option<Self> {
        match e {
            Expr::Fgf(r) => Some(Self::fgf(r.clone())),
            Expr::Hyperfinite { factor: true } => Some(Self::single(DiffuseKind::HyperfiniteFactor)),
            Expr::Hyperfinite { factor: false } => Some(Self::single(DiffuseKind::Hyperfinite)),
            Expr::Matrix(n) if *n >= 1 => Some(Self::matrix(*n)),
            _ => None,
        }
    }

    /// Reads a normalized expression: a leaf or a direct sum of leaves.
    pub fn from_nf_expr(e: &Expr) -> Option<Self> {
        if let Some(nf) = Self::from_leaf(e) {
            return Some(nf);
        }
        match e {
            Expr::DirectSum(parts) => {
                let mut nf = FNormalForm { diffuse: vec![], blocks: vec![], atoms: vec![] };
                for (w, part) in parts {
                    match part {
                        Expr::Fgf(r) => nf.diffuse.push(DiffusePart {
                            kind: DiffuseKind::Fgf(r.clone()),
                            weight: w.clone(),
                        }),
                        Expr::Hyperfinite { factor } => nf.diffuse.push(DiffusePart {
                            kind: if *factor {
                                DiffuseKind::HyperfiniteFactor
                            } else {
                                DiffuseKind::Hyperfinite
                            },
                            weight: w.clone(),
                        }),
                        Expr::Matrix(1) => nf.atoms.push(w.clone()),
                        Expr::Matrix(n) if *n >= 2 => nf.blocks.push((w.clone(), *n)),
                        _ => return None,
                    }
                }
                Some(nf)
            }
            _ => None,
        }
    }

    /// True when `e` is exactly the printed form of its own normal form.
    pub fn is_nf_expr(e: &Expr) -> bool {
        Self::from_nf_expr(e).map(|nf| nf.canonical().to_expr() == *e).unwrap_or(false)
    }

    /// Weighted direct sum of normal forms; nested weights multiply.
    pub fn direct_sum(parts: &[(Rational, FNormalForm)]) -> Self {
        let mut out = FNormalForm { diffuse: vec![], blocks: vec![], atoms: vec![] };
        for (w, nf) in parts {
            out.diffuse.extend(
                nf.diffuse.iter().map(|d| DiffusePart { kind: d.kind.clone(), weight: w * &d.weight }),
            );
            out.blocks.extend(nf.blocks.iter().map(|(bw, n)| (w * bw, *n)));
            out.atoms.extend(nf.atoms.iter().map(|a| w * a));
        }
        out.canonical()
    }

    /// Merges hyperfinite summands and sorts: diffuse parts, then blocks by size,
    /// then atoms by descending weight.
    pub fn canonical(&self) -> Self {
        let mut out = self.clone();
        let hyper: Vec<_> = out.diffuse.iter().filter(|d| d.kind.is_hyperfinite()).cloned().collect();
        if hyper.len() >= 2 {
            let weight = hyper.iter().fold(Rational::zero(), |acc, d| acc + &d.weight);
            out.diffuse.retain(|d| !d.kind.is_hyperfinite());
            out.diffuse.push(DiffusePart { kind: DiffuseKind::Hyperfinite, weight });
        }
        out.diffuse.sort_by(|a, b| a.kind.cmp(&b.kind).then_with(|| b.weight.cmp(&a.weight)));
        out.blocks.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(&a.0)));
        out.atoms.sort_by_key(|a| Reverse(a.clone()));
        out
    }

    pub fn summand_count(&self) -> usize {
        self.diffuse.len() + self.blocks.len() + self.atoms.len()
    }

    pub fn total_weight(&self) -> Rational {
        self.diffuse.iter().map(|d| d.weight.clone()).sum::<Rational>()
            + self.blocks.iter().map(|b| b.0.clone()).sum::<Rational>()
            + self.atoms.iter().cloned().sum::<Rational>()
    }

    pub fn is_scalars(&self) -> bool {
        self.summand_count() == 1 && self.atoms.len() == 1
    }

    fn is_two_atom_abelian(&self) -> bool {
        self.diffuse.is_empty() && self.blocks.is_empty() && self.atoms.len() == 2
    }

    /// `L(F_r)` or `R` with full weight.
    pub fn is_ii1_factor(&self) -> bool {
        self.summand_count() == 1
            && self.diffuse.len() == 1
            && !matches!(self.diffuse[0].kind, DiffuseKind::Hyperfinite)
    }

    /// `M_n` for the single-block (or scalar) case.
    pub fn matrix_size(&self) -> Option<u64> {
        if self.is_scalars() {
            Some(1)
        } else if self.summand_count() == 1 && self.blocks.len() == 1 {
            Some(self.blocks[0].1)
        } else {
            None
        }
    }

    pub fn has_nonfactor_hyperfinite(&self) -> bool {
        self.diffuse.iter().any(|d| d.kind == DiffuseKind::Hyperfinite)
    }

    pub fn to_expr(&self) -> Expr {
        let nf = self.canonical();
        if nf.summand_count() == 1 {
            if let Some(d) = nf.diffuse.first() {
                return d.kind.leaf();
            }
            if let Some((_, n)) = nf.blocks.first() {
                return Expr::Matrix(*n);
            }
            return Expr::scalars();
        }
        let mut parts = Vec::with_capacity(nf.summand_count());
        parts.extend(nf.diffuse.iter().map(|d| (d.weight.clone(), d.kind.leaf())));
        parts.extend(nf.blocks.iter().map(|(w, n)| (w.clone(), Expr::Matrix(*n))));
        parts.extend(nf.atoms.iter().map(|w| (w.clone(), Expr::scalars())));
        Expr::DirectSum(parts)
    }

    pub fn fdim(&self) -> Result<ExtRational> {
        fdim(&self.to_expr())
    }

    /// Every `L(F_r)` parameter replaced by `∞`.
    pub fn collapsed(&self) -> Self {
        let mut out = self.clone();
        for d in &mut out.diffuse {
            if let DiffuseKind::Fgf(r) = &mut d.kind {
                *r = ExtRational::Infinity;
            }
        }
        out.canonical()
    }
}

impl std::fmt::Display for FNormalForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.to_expr().fmt(f)
    }
}

/// Free product of two class-F normal forms.
pub fn free_product(a: &FNormalForm, b: &FNormalForm) -> Result<FNormalForm> {
    free_product_with(a, b, &standard_collision)
}

/// Free product with a pluggable atom-collision rule (the standard rule is
/// [`standard_collision`]; alternatives exist only for mutation testing).
pub fn free_product_with(a: &FNormalForm, b: &FNormalForm, collide: &CollisionRule) -> Result<FNormalForm> {
    if a.is_scalars() {
        return Ok(b.canonical());
    }
    if b.is_scalars() {
        return Ok(a.canonical());
    }
    let mut atoms = Vec::new();
    for x in &a.atoms {
        for y in &b.atoms {
            if let Some(g) = collide(x, y) {
                atoms.push(g);
            }
        }
    }
    let atom_mass: Rational = atoms.iter().cloned().sum();
    let weight = Rational::one() - &atom_mass;
    if !weight.is_positive() {
        return Err(EngineError::UnsupportedCase(format!(
            "colliding atoms of ({}) * ({}) carry trace {} ≥ 1",
            a, b, atom_mass
        )));
    }
    let target = a.fdim()?.add(&b.fdim()?);
    let atom_sq: Rational = atoms.iter().map(|g| g * g).sum();
    // 1 + w²(d − 1) − Σγ² = fdim(a) + fdim(b)
    let d = target
        .sub_q(&Rational::one())
        .add_q(&atom_sq)
        .scale(&(&weight * &weight).recip())
        .add_q(&Rational::one());
    let one = ExtRational::one();
    let kind = if a.is_two_atom_abelian() && b.is_two_atom_abelian() {
        if d != one {
            return Err(EngineError::UnsupportedCase(format!(
                "two-by-two product ({}) * ({}) solved to diffuse fdim {}",
                a, b, d
            )));
        }
        DiffuseKind::Hyperfinite
    } else if d > one {
        DiffuseKind::Fgf(d)
    } else if d == one {
        if atoms.is_empty() {
            DiffuseKind::HyperfiniteFactor
        } else {
            DiffuseKind::Hyperfinite
        }
    } else {
        return Err(EngineError::UnsupportedCase(format!(
            "({}) * ({}) would need a diffuse part with parameter {} < 1",
            a, b, d
        )));
    };
    Ok(FNormalForm { diffuse: vec![DiffusePart { kind, weight }], blocks: vec![], atoms }.canonical())
}

/// Rescaling of a class-F factor by `t` (given as `t²`).
pub fn rescale_fclass(nf: &FNormalForm, sq: &Rational) -> Result<FNormalForm> {
    if !sq.is_positive() {
        return Err(EngineError::Scalar(crate::scalar::ScalarError::NonPositiveScale(sq.to_string())));
    }
    if nf.is_ii1_factor() {
        return Ok(match &nf.diffuse[0].kind {
            DiffuseKind::Fgf(ExtRational::Finite(r)) => {
                FNormalForm::fgf(ExtRational::Finite(Rational::one() + (r - Rational::one()) / sq))
            }
            DiffuseKind::Fgf(ExtRational::Infinity) => FNormalForm::fgf(ExtRational::Infinity),
            _ => FNormalForm::single(DiffuseKind::HyperfiniteFactor),
        });
    }
    if let Some(n) = nf.matrix_size() {
        let k = rational_sqrt(sq)
            .map(|t| t * int(n as i64))
            .filter(|k| k.is_integer() && k.is_positive())
            .and_then(|k| u64::try_from(k.to_integer()).ok());
        return match k {
            Some(k) => Ok(FNormalForm::matrix(k)),
            None => Err(EngineError::UnrealizableScale { n, sq: sq.clone() }),
        };
    }
    Err(EngineError::NotAFactor(nf.to_string()))
}

fn nf_of(e: &Expr) -> Result<FNormalForm> {
    FNormalForm::from_nf_expr(e)
        .ok_or_else(|| EngineError::UnsupportedCase(format!("{} is not in class-F normal form", e)))
}

/// Leftmost-innermost redex of the class-F rewrite system.
fn find_redex(e: &Expr, path: &mut Vec<usize>) -> Result<Option<Rule>> {
    if FNormalForm::is_nf_expr(e) {
        return Ok(None);
    }
    for (i, child) in e.children().into_iter().enumerate() {
        path.push(i);
        let found = find_redex(child, path)?;
        path.pop();
        if found.is_some() {
            return Ok(found);
        }
    }
    let here = path.clone();
    match e {
        Expr::DirectSum(_) => Ok(Some(Rule::DirectSumCanonical { path: here })),
        Expr::FreeProduct(parts) => {
            if let Some(index) = parts.iter().position(Expr::is_scalars) {
                Ok(Some(Rule::FreeProductScalars { path: here, index }))
            } else if matches!((&parts[0], &parts[1]), (Expr::Fgf(_), Expr::Fgf(_))) {
                Ok(Some(Rule::FgfAdditivity { path: here }))
            } else {
                Ok(Some(Rule::FreeProductKernel { path: here }))
            }
        }
        Expr::Rescale(_, sq) => Ok(Some(Rule::RescaleFClass { path: here, sq: sq.clone() })),
        _ => Err(EngineError::UnsupportedCase(format!("{} is outside class F", e))),
    }
}

fn replace_first_two(parts: &[Expr], merged: Expr) -> Expr {
    if parts.len() == 2 {
        merged
    } else {
        let mut rest = vec![merged];
        rest.extend(parts[2..].iter().cloned());
        Expr::FreeProduct(rest)
    }
}

/// Applies one class-F rewrite at its recorded position.
pub(crate) fn apply_fclass_rule(rule: &Rule, e: &Expr) -> Result<Expr> {
    let path = match rule {
        Rule::DirectSumCanonical { path }
        | Rule::FreeProductScalars { path, .. }
        | Rule::FgfAdditivity { path }
        | Rule::FreeProductKernel { path }
        | Rule::RescaleFClass { path, .. } => path,
        _ => return Err(EngineError::MalformedCertificate(format!("{} is not a class-F rule", rule.name()))),
    };
    let node = e
        .at(path)
        .ok_or_else(|| EngineError::MalformedCertificate(format!("no subterm at {:?}", path)))?;
    let bad = || EngineError::MalformedCertificate(format!("{} does not apply to {}", rule.name(), node));
    let new = match (rule, node) {
        (Rule::DirectSumCanonical { .. }, Expr::DirectSum(parts)) => {
            let nfs = parts
                .iter()
                .map(|(w, p)| nf_of(p).map(|nf| (w.clone(), nf)))
                .collect::<Result<Vec<_>>>()?;
            FNormalForm::direct_sum(&nfs).to_expr()
        }
        (Rule::FreeProductScalars { index, .. }, Expr::FreeProduct(parts)) => {
            if !parts.get(*index).is_some_and(Expr::is_scalars) {
                return Err(bad());
            }
            let mut rest = parts.clone();
            rest.remove(*index);
            if rest.len() == 1 {
                rest.pop().unwrap()
            } else {
                Expr::FreeProduct(rest)
            }
        }
        (Rule::FgfAdditivity { .. }, Expr::FreeProduct(parts)) => match (&parts[0], &parts[1]) {
            (Expr::Fgf(r), Expr::Fgf(s)) => replace_first_two(parts, Expr::Fgf(r.add(s))),
            _ => return Err(bad()),
        },
        (Rule::FreeProductKernel { .. }, Expr::FreeProduct(parts)) => {
            let merged = free_product(&nf_of(&parts[0])?, &nf_of(&parts[1])?)?;
            replace_first_two(parts, merged.to_expr())
        }
        (Rule::RescaleFClass { sq, .. }, Expr::Rescale(inner, node_sq)) => {
            if sq != node_sq {
                return Err(bad());
            }
            rescale_fclass(&nf_of(inner)?, sq)?.to_expr()
        }
        _ => return Err(bad()),
    };
    e.replaced_at(path, new)
        .ok_or_else(|| EngineError::MalformedCertificate(format!("no subterm at {:?}", path)))
}

/// Normalizes a class-F expression, recording every rewrite.
pub fn normalize_fclass(e: &Expr) -> Result<(FNormalForm, Certificate)> {
    let report = well_formed(e);
    if !report.is_ok() {
        return Err(EngineError::IllFormed(report.to_string()));
    }
    if !e.is_class_f() {
        return Err(EngineError::UndefinedFdim(e.to_string()));
    }
    let mut cert = Certificate::default();
    let mut cur = e.clone();
    loop {
        let mut path = Vec::new();
        let Some(rule) = find_redex(&cur, &mut path)? else { break };
        let next = apply_fclass_rule(&rule, &cur)?;
        cert.push(rule, State::Expr(cur), State::Expr(next.clone()));
        cur = next;
    }
    Ok((nf_of(&cur)?.canonical(), cert))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat;

    fn two_atoms(a: Rational, b: Rational) -> Expr {
        Expr::dsum(vec![(a, Expr::scalars()), (b, Expr::scalars())])
    }

    #[test]
    fn worked_example_is_lf5() {
        let e = Expr::free(vec![
            Expr::dsum(vec![(rat(1, 2), Expr::fgf(int(2))), (rat(1, 2), Expr::scalars())]),
            Expr::fgf(int(4)),
        ]);
        let (nf, cert) = normalize_fclass(&e).unwrap();
        assert_eq!(nf, FNormalForm::fgf(ExtRational::Finite(int(5))));
        assert!(cert.replay(&e).unwrap());
    }

    #[test]
    fn scalars_are_a_unit() {
        let a = Expr::dsum(vec![(rat(1, 3), Expr::Matrix(2)), (rat(2, 3), Expr::fgf(int(3)))]);
        let (alone, _) = normalize_fclass(&a).unwrap();
        let (with_c, _) = normalize_fclass(&Expr::free(vec![a, Expr::scalars()])).unwrap();
        assert_eq!(alone, with_c);
    }

    #[test]
    fn two_by_two_thirds() {
        let e = Expr::free(vec![two_atoms(rat(1, 3), rat(2, 3)), two_atoms(rat(1, 3), rat(2, 3))]);
        let (nf, _) = normalize_fclass(&e).unwrap();
        assert_eq!(nf.atoms, vec![rat(1, 3)]);
        assert_eq!(
            nf.diffuse,
            vec![DiffusePart { kind: DiffuseKind::Hyperfinite, weight: rat(2, 3) }]
        );
    }

    #[test]
    fn matrix_pair_gives_three_halves() {
        let e = Expr::free(vec![Expr::Matrix(2), Expr::Matrix(2)]);
        let (nf, _) = normalize_fclass(&e).unwrap();
        assert_eq!(nf, FNormalForm::fgf(ExtRational::Finite(rat(3, 2))));
    }

    #[test]
    fn three_quarter_atoms_solve_to_hyperfinite() {
        // fdim conservation: 2·(1 − 9/16 − 1/16) = 1 + (1/2)²(r − 1) − (1/2)²  ⇒  r = 1
        let lhs = int(2) * (int(1) - rat(9, 16) - rat(1, 16));
        let r = (lhs - int(1) + rat(1, 4)) / rat(1, 4) + int(1);
        assert_eq!(r, int(1));
        let e = Expr::free(vec![two_atoms(rat(3, 4), rat(1, 4)), two_atoms(rat(3, 4), rat(1, 4))]);
        let (nf, _) = normalize_fclass(&e).unwrap();
        assert_eq!(nf.atoms, vec![rat(1, 2)]);
        assert_eq!(nf.diffuse[0].weight, rat(1, 2));
        assert_eq!(nf.diffuse[0].kind, DiffuseKind::Hyperfinite);
    }

    #[test]
    fn fgf_additivity_kernel() {
        let a = FNormalForm::fgf(ExtRational::Finite(int(3)));
        let b = FNormalForm::fgf(ExtRational::Finite(int(2)));
        assert_eq!(free_product(&a, &b).unwrap(), FNormalForm::fgf(ExtRational::Finite(int(5))));
        assert_eq!(free_product(&FNormalForm::scalars(), &b).unwrap(), b);
    }

    #[test]
    fn n_fold_two_atom_product_matches_fdim_solution() {
        // n equal factors ℂ_r ⊕ ℂ_{1−r}, n·r < 1: atom 1 − n·r, diffuse L(F_v), v = (2n−2)/n.
        for n in 3..=6i64 {
            let r = rat(1, n + 2);
            let factor = FNormalForm::from_nf_expr(&two_atoms(int(1) - &r, r.clone())).unwrap();
            let mut acc = factor.clone();
            for _ in 1..n {
                acc = free_product(&acc, &factor).unwrap();
            }
            assert_eq!(acc.atoms, vec![int(1) - int(n) * &r]);
            assert_eq!(acc.diffuse[0].kind, DiffuseKind::Fgf(ExtRational::Finite(rat(2 * n - 2, n))));
        }
    }

    #[test]
    fn rescaling_factors() {
        let five = FNormalForm::fgf(ExtRational::Finite(int(5)));
        assert_eq!(rescale_fclass(&five, &rat(1, 4)).unwrap(), FNormalForm::fgf(ExtRational::Finite(int(17))));
        assert_eq!(rescale_fclass(&five, &int(1)).unwrap(), five);
        let r = FNormalForm::single(DiffuseKind::HyperfiniteFactor);
        assert_eq!(rescale_fclass(&r, &rat(1, 7)).unwrap(), r);
        assert_eq!(rescale_fclass(&FNormalForm::matrix(4), &rat(1, 4)).unwrap(), FNormalForm::matrix(2));
        assert!(matches!(
            rescale_fclass(&FNormalForm::matrix(3), &rat(1, 4)),
            Err(EngineError::UnrealizableScale { .. })
        ));
        let abelian = FNormalForm::from_nf_expr(&two_atoms(rat(1, 2), rat(1, 2))).unwrap();
        assert!(matches!(rescale_fclass(&abelian, &rat(1, 4)), Err(EngineError::NotAFactor(_))));
    }

    #[test]
    fn nested_direct_sums_flatten() {
        let inner = Expr::dsum(vec![(rat(1, 2), Expr::scalars()), (rat(1, 2), Expr::Matrix(2))]);
        let e = Expr::dsum(vec![(rat(1, 2), inner), (rat(1, 2), Expr::fgf(int(3)))]);
        let (nf, _) = normalize_fclass(&e).unwrap();
        assert_eq!(nf.atoms, vec![rat(1, 4)]);
        assert_eq!(nf.blocks, vec![(rat(1, 4), 2)]);
        assert_eq!(nf.fdim().unwrap(), fdim(&e).unwrap());
    }

    #[test]
    fn hyperfinite_summands_merge() {
        let e = Expr::dsum(vec![
            (rat(1, 3), Expr::hyperfinite_factor()),
            (rat(1, 3), Expr::hyperfinite()),
            (rat(1, 3), Expr::scalars()),
        ]);
        let (nf, _) = normalize_fclass(&e).unwrap();
        assert_eq!(
            nf.diffuse,
            vec![DiffusePart { kind: DiffuseKind::Hyperfinite, weight: rat(2, 3) }]
        );
    }
}

//! Isomorphism verdicts.
//!
//! Class-F normal forms are compared on their finite-dimensional and center
//! data first; words are compared in the extended view, where every letter is
//! a plain free factor `Q_{key}` and only the tail `x` remains. Equal forms up
//! to the free-group parameter give `NotProvable` in distinct mode.

use std::fmt;

use num_traits::One;

use crate::cert::{Certificate, Rule, State};
use crate::error::{EngineError, Result};
use crate::expr::{AssumptionSet, Expr, Mode};
use crate::fclass::{normalize_fclass, DiffuseKind, FNormalForm};
use crate::scalar::{ExtRational, Rational};
use crate::validate::well_formed;
use crate::word::{canonicalize_with_certificate, to_word, Body, Word};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Normal {
    F(FNormalForm),
    W(Word),
}

impl fmt::Display for Normal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Normal::F(nf) => write!(f, "{}", nf),
            Normal::W(w) => write!(f, "{}", w),
        }
    }
}

/// Normal form of any well-formed expression with its certificate.
pub fn normalize(e: &Expr, a: &AssumptionSet) -> Result<(Normal, Certificate)> {
    let report = well_formed(e);
    if !report.is_ok() {
        return Err(EngineError::IllFormed(report.to_string()));
    }
    if e.is_class_f() {
        let (nf, cert) = normalize_fclass(e)?;
        return Ok((Normal::F(nf), cert));
    }
    let (w, mut cert) = to_word(e, a)?;
    Ok((close_pure(w, &mut cert)?, cert))
}

fn close_pure(w: Word, cert: &mut Certificate) -> Result<Normal> {
    if !w.is_pure() {
        return Ok(Normal::W(w));
    }
    let nf = w.pure_form()?;
    cert.push(Rule::PureFreeGroup, State::Word(w), State::Expr(nf.to_expr()));
    Ok(Normal::F(nf))
}

/// Data that differs only between non-isomorphic algebras.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub invariant: String,
    pub left: String,
    pub right: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Isomorphic { left: Certificate, right: Certificate },
    ProvablyDistinct(Witness),
    NotProvable { left: String, right: String },
}

impl Verdict {
    pub fn is_isomorphic(&self) -> bool {
        matches!(self, Verdict::Isomorphic { .. })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Verdict::Isomorphic { .. } => "isomorphic",
            Verdict::ProvablyDistinct(_) => "provably distinct",
            Verdict::NotProvable { .. } => "not provable",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Isomorphic { left, right } => {
                let n = left.len() + right.len();
                if n == 0 {
                    return write!(f, "isomorphic");
                }
                let mut names: Vec<&str> = Vec::new();
                for s in left.steps.iter().chain(&right.steps) {
                    if !names.contains(&s.rule.name()) {
                        names.push(s.rule.name());
                    }
                }
                let unit = if n == 1 { "step" } else { "steps" };
                write!(f, "isomorphic ({} {}: {})", n, unit, names.join(", "))
            }
            Verdict::ProvablyDistinct(w) => {
                write!(f, "provably distinct: {} differ: {} vs {}", w.invariant, w.left, w.right)
            }
            Verdict::NotProvable { left, right } => write!(f, "not provable: {} vs {}", left, right),
        }
    }
}

fn fmt_list<T: fmt::Display>(items: &[T]) -> String {
    let parts: Vec<String> = items.iter().map(T::to_string).collect();
    format!("[{}]", parts.join(", "))
}

enum Outcome {
    Same,
    Distinct(Witness),
    Unknown,
}

fn diffuse_classes(nf: &FNormalForm) -> Vec<(u8, Rational)> {
    let mut out: Vec<_> = nf
        .diffuse
        .iter()
        .map(|d| {
            let class = match d.kind {
                DiffuseKind::Fgf(_) => 0,
                DiffuseKind::HyperfiniteFactor => 1,
                DiffuseKind::Hyperfinite => 2,
            };
            (class, d.weight.clone())
        })
        .collect();
    out.sort();
    out
}

fn compare_f(a: &FNormalForm, b: &FNormalForm, mode: Mode, same_input: bool) -> Outcome {
    let (a, b) = (a.canonical(), b.canonical());
    if a.atoms != b.atoms {
        return Outcome::Distinct(Witness {
            invariant: "atom traces".into(),
            left: fmt_list(&a.atoms),
            right: fmt_list(&b.atoms),
        });
    }
    if a.blocks != b.blocks {
        let show = |nf: &FNormalForm| {
            let v: Vec<String> = nf.blocks.iter().map(|(w, n)| format!("{}: M({})", w, n)).collect();
            format!("[{}]", v.join(", "))
        };
        return Outcome::Distinct(Witness { invariant: "matrix blocks".into(), left: show(&a), right: show(&b) });
    }
    if diffuse_classes(&a) != diffuse_classes(&b) {
        let show = |nf: &FNormalForm| {
            let v: Vec<String> = nf
                .diffuse
                .iter()
                .map(|d| format!("{}: {}", d.weight, if matches!(d.kind, DiffuseKind::Fgf(_)) { "LF" } else { "hyperfinite" }))
                .collect();
            format!("[{}]", v.join(", "))
        };
        return Outcome::Distinct(Witness { invariant: "diffuse summands".into(), left: show(&a), right: show(&b) });
    }
    let (x, y) = match mode {
        Mode::Distinct => (a, b),
        Mode::Collapsed => (a.collapsed(), b.collapsed()),
    };
    if x == y && (same_input || !x.has_nonfactor_hyperfinite()) {
        Outcome::Same
    } else {
        Outcome::Unknown
    }
}

/// Extended-view data of a canonical word.
struct IsoForm {
    factors: Vec<(Body, Rational)>,
    families: Vec<(Body, Rational, Rational)>,
    /// `None` when unlifted infinite families force exact comparison.
    tail: Option<ExtRational>,
}

fn iso_form(w: &Word, mode: Mode) -> Result<IsoForm> {
    let mut factors = w.letter_keys();
    let mut tail = if w.stable { ExtRational::Infinity } else { w.tail.clone() };
    if let Some(b) = &w.base {
        match &b.body {
            Body::Opaque(_) => factors.push((b.body.clone(), b.sq.clone())),
            Body::FClass(nf) => {
                let scaled = crate::fclass::rescale_fclass(nf, &b.sq)?;
                tail = tail.add(&scaled.fdim()?);
            }
        }
    }
    factors.sort();
    if !w.stable {
        for l in &w.letters {
            tail = tail.add_q(&(&l.t_sq - Rational::one()));
        }
    }
    let mut families: Vec<_> =
        w.families.iter().map(|f| (f.body.clone(), f.key_first.clone(), f.ratio.clone())).collect();
    families.sort();
    let unlifted = w.families.iter().any(|f| !f.lifted);
    let tail = match mode {
        Mode::Collapsed if unlifted || !tail.is_zero() => Some(ExtRational::Infinity),
        Mode::Collapsed => Some(tail),
        Mode::Distinct if unlifted => None,
        Mode::Distinct => Some(tail),
    };
    Ok(IsoForm { factors, families, tail })
}

fn compare_w(a: &Word, b: &Word, mode: Mode) -> Result<Outcome> {
    let (fa, fb) = (iso_form(a, mode)?, iso_form(b, mode)?);
    if fa.factors != fb.factors || fa.families != fb.families {
        let show = |f: &IsoForm| {
            let mut v: Vec<String> = f.factors.iter().map(|(b, k)| b.scaled_text(k)).collect();
            v.extend(f.families.iter().map(|(b, k, r)| format!("{} (ratio {})", b.scaled_text(k), r)));
            format!("[{}]", v.join(", "))
        };
        return Ok(Outcome::Distinct(Witness {
            invariant: "opaque factors".into(),
            left: show(&fa),
            right: show(&fb),
        }));
    }
    Ok(match (fa.tail, fb.tail) {
        (Some(x), Some(y)) if x == y => Outcome::Same,
        (None, None) if a == b => Outcome::Same,
        _ => Outcome::Unknown,
    })
}

fn opaque_summary(n: &Normal) -> String {
    match n {
        Normal::F(_) => "[]".into(),
        Normal::W(w) => {
            let mut names: Vec<String> = w.letter_keys().iter().map(|(b, k)| b.scaled_text(k)).collect();
            if let Some(b) = &w.base {
                names.insert(0, b.body.scaled_text(&b.sq));
            }
            format!("[{}]", names.join(", "))
        }
    }
}

fn decide(n1: &Normal, c1: Certificate, n2: &Normal, c2: Certificate, mode: Mode, same_input: bool) -> Result<Verdict> {
    let outcome = match (n1, n2) {
        (Normal::F(a), Normal::F(b)) => compare_f(a, b, mode, same_input),
        (Normal::W(a), Normal::W(b)) => compare_w(a, b, mode)?,
        _ => Outcome::Distinct(Witness {
            invariant: "opaque factors".into(),
            left: opaque_summary(n1),
            right: opaque_summary(n2),
        }),
    };
    Ok(match outcome {
        Outcome::Same => Verdict::Isomorphic { left: c1, right: c2 },
        Outcome::Distinct(w) => Verdict::ProvablyDistinct(w),
        Outcome::Unknown => Verdict::NotProvable { left: n1.to_string(), right: n2.to_string() },
    })
}

/// Verdict on `e1 ≅ e2` under the session mode and assumptions.
pub fn iso_verdict(e1: &Expr, e2: &Expr, a: &AssumptionSet) -> Result<Verdict> {
    let (n1, c1) = normalize(e1, a)?;
    let (n2, c2) = normalize(e2, a)?;
    decide(&n1, c1, &n2, c2, a.mode, e1 == e2)
}

/// Verdict on two words; certificates start from the given words.
pub fn iso_words(w1: &Word, w2: &Word, a: &AssumptionSet) -> Result<Verdict> {
    let (c1, mut cert1) = canonicalize_with_certificate(w1, Some(a))?;
    let (c2, mut cert2) = canonicalize_with_certificate(w2, Some(a))?;
    let n1 = close_pure(c1, &mut cert1)?;
    let n2 = close_pure(c2, &mut cert2)?;
    decide(&n1, cert1, &n2, cert2, a.mode, w1 == w2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Count;
    use crate::scalar::{int, rat};
    use crate::word::{trade_step, Letter};

    fn collapsed() -> AssumptionSet {
        AssumptionSet::new(Mode::Collapsed)
    }

    #[test]
    fn fgf_additivity_verdict() {
        let v = iso_verdict(
            &Expr::free(vec![Expr::fgf(int(3)), Expr::fgf(int(2))]),
            &Expr::fgf(int(5)),
            &AssumptionSet::default(),
        )
        .unwrap();
        assert_eq!(v.to_string(), "isomorphic (1 step: FGF additivity)");
    }

    #[test]
    fn matrices_are_distinct() {
        let v = iso_verdict(&Expr::Matrix(2), &Expr::Matrix(3), &AssumptionSet::default()).unwrap();
        assert!(matches!(v, Verdict::ProvablyDistinct(_)));
    }

    #[test]
    fn free_group_factors_depend_on_mode() {
        let (a, b) = (Expr::fgf(int(2)), Expr::fgf(int(3)));
        assert!(matches!(
            iso_verdict(&a, &b, &AssumptionSet::default()).unwrap(),
            Verdict::NotProvable { .. }
        ));
        let v = iso_verdict(&a, &b, &collapsed()).unwrap();
        assert_eq!(v.to_string(), "isomorphic");
    }

    #[test]
    fn fgf_family_identity() {
        let e = Expr::sub(
            Expr::fgf(int(2)),
            vec![Expr::family(rat(1, 2), rat(1, 2), Count::Infinite, Expr::fgf(int(2)))],
        );
        match iso_verdict(&e, &Expr::fgf(int(4)), &AssumptionSet::default()).unwrap() {
            Verdict::Isomorphic { left, right } => {
                assert!(left.replay(&e).unwrap());
                assert!(right.is_empty());
            }
            other => panic!("{}", other),
        }
    }

    #[test]
    fn traded_word_is_isomorphic() {
        let w = Word::opaque_base("N").with_letter(Letter::opaque("Q", int(1), rat(1, 4))).with_tail(int(1));
        let (traded, cert) = trade_step(&w, 0, &rat(9, 16)).unwrap();
        assert!(cert.replay_from(&State::Word(w.clone())));
        assert!(iso_words(&w, &traded, &AssumptionSet::default()).unwrap().is_isomorphic());
    }

    #[test]
    fn differing_keys_are_distinct() {
        let a = Expr::sub(Expr::opaque("N"), vec![Expr::letter(rat(1, 4), Expr::opaque("Q"))]);
        let b = Expr::sub(Expr::opaque("N"), vec![Expr::letter(rat(1, 9), Expr::opaque("Q"))]);
        assert!(matches!(
            iso_verdict(&a, &b, &AssumptionSet::default()).unwrap(),
            Verdict::ProvablyDistinct(_)
        ));
    }

    #[test]
    fn reflexive_on_hyperfinite_non_factor() {
        let ab = Expr::dsum(vec![(rat(1, 2), Expr::scalars()), (rat(1, 2), Expr::scalars())]);
        let e = Expr::free(vec![ab.clone(), ab]);
        assert!(iso_verdict(&e, &e, &AssumptionSet::default()).unwrap().is_isomorphic());
        assert!(matches!(
            iso_verdict(&e, &Expr::hyperfinite(), &AssumptionSet::default()).unwrap(),
            Verdict::NotProvable { .. }
        ));
    }
}

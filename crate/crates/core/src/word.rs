//! Words: canonical forms of free scaled products over opaque factors.
//!
//! A word is `(B * L(F_tail)) ⋆ [t_i, Q_i]` with an optional base `B`. Without
//! a base it reads as the free product `⊛ [t_i, Q_i] * L(F_tail)` in the
//! extended sense: a letter `(Q, c, t)` stands for the free factor
//! `Q_{c/t} * L(F_{t−1})`.
//!
//! Scales are stored squared. `key = c/t` (squared) is what free trades preserve.

use std::cmp::Reverse;
use std::fmt;

use num_traits::{One, Signed};

use crate::cert::{Certificate, License, Rule, State};
use crate::error::{EngineError, Result};
use crate::expr::{AssumptionSet, Count, Expr, LetterExpr};
use crate::fclass::{free_product, normalize_fclass, rescale_fclass, DiffuseKind, FNormalForm};
use crate::fdim::{pow_rational, sum_squares};
use crate::print::scale_text;
use crate::scalar::{ExtRational, Rational};
use crate::validate::well_formed;

/// Largest finite family expanded into single letters, and the most leading
/// members peeled off an infinite family.
pub const FAMILY_EXPANSION_LIMIT: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Body {
    Opaque(String),
    FClass(FNormalForm),
}

impl Body {
    pub fn name(&self) -> Option<&str> {
        match self {
            Body::Opaque(n) => Some(n),
            Body::FClass(_) => None,
        }
    }

    /// Text of the body rescaled by `c` (given as `c²`).
    pub fn scaled_text(&self, c_sq: &Rational) -> String {
        if c_sq.is_one() {
            self.to_string()
        } else {
            format!("scale({}, {})", self, scale_text(c_sq))
        }
    }

    fn fdim_at(&self, c_sq: &Rational) -> Result<ExtRational> {
        match self {
            Body::FClass(nf) if c_sq.is_one() => nf.fdim(),
            Body::FClass(nf) => rescale_fclass(nf, c_sq)?.fdim(),
            Body::Opaque(n) => Err(EngineError::UndefinedFdim(n.clone())),
        }
    }
}

impl fmt::Display for Body {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Body::Opaque(n) => write!(f, "{}", n),
            Body::FClass(nf) => write!(f, "{}", nf),
        }
    }
}

/// `[t, Q_c]`, stored as `c²` and `t²`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Letter {
    pub body: Body,
    pub c_sq: Rational,
    pub t_sq: Rational,
}

impl Letter {
    pub fn new(body: Body, c_sq: Rational, t_sq: Rational) -> Self {
        Letter { body, c_sq, t_sq }
    }

    pub fn opaque(name: &str, c_sq: Rational, t_sq: Rational) -> Self {
        Letter::new(Body::Opaque(name.to_string()), c_sq, t_sq)
    }

    pub fn key(&self) -> Rational {
        &self.c_sq / &self.t_sq
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", scale_text(&self.t_sq), self.body.scaled_text(&self.c_sq))
    }
}

/// Infinite letter family. Member `k ≥ 1` has key `key_first / ratio^(k−1)`
/// and `t² = first_sq · ratio^(k−1)`, or `t = 1` once lifted.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Family {
    pub body: Body,
    pub key_first: Rational,
    pub ratio: Rational,
    pub first_sq: Rational,
    pub lifted: bool,
}

impl Family {
    pub fn c_sq(&self) -> Rational {
        &self.key_first * &self.first_sq
    }

    pub fn sum_squares(&self) -> ExtRational {
        if self.lifted {
            ExtRational::Infinity
        } else {
            sum_squares(&self.first_sq, &self.ratio, Count::Infinite)
        }
    }

    pub fn is_divergent(&self) -> bool {
        !self.lifted && self.ratio.is_one()
    }

    fn sort_key(&self) -> (&Body, &Rational, &Rational, bool, &Rational) {
        (&self.body, &self.key_first, &self.ratio, self.lifted, &self.first_sq)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.lifted {
            write!(f, "lifted({}, {}, inf, {})", self.key_first, self.ratio, self.body)
        } else {
            write!(f, "fam({}, {}, inf, {})", self.first_sq, self.ratio, self.body.scaled_text(&self.c_sq()))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BaseFactor {
    pub body: Body,
    pub sq: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Word {
    pub base: Option<BaseFactor>,
    pub letters: Vec<Letter>,
    pub families: Vec<Family>,
    /// `L(F_tail)` budget; nonnegative outside intermediate computations.
    pub tail: ExtRational,
    /// `L(F_∞)` has been absorbed; letters sit at `t = 1` and the tail is 0.
    pub stable: bool,
}

impl Word {
    pub fn based(body: Body, sq: Rational) -> Self {
        Word {
            base: Some(BaseFactor { body, sq }),
            letters: vec![],
            families: vec![],
            tail: ExtRational::zero(),
            stable: false,
        }
    }

    pub fn opaque_base(name: &str) -> Self {
        Word::based(Body::Opaque(name.to_string()), Rational::one())
    }

    pub fn pure(tail: ExtRational) -> Self {
        Word { base: None, letters: vec![], families: vec![], tail, stable: false }
    }

    pub fn with_letter(mut self, l: Letter) -> Self {
        self.letters.push(l);
        self
    }

    pub fn with_tail(mut self, tail: Rational) -> Self {
        self.tail = ExtRational::Finite(tail);
        self
    }

    /// `ρ = tail + Σ t²`, conserved by free trades.
    pub fn rho(&self) -> ExtRational {
        let mut acc = self.tail.clone();
        for l in &self.letters {
            acc = acc.add_q(&l.t_sq);
        }
        for f in &self.families {
            acc = acc.add(&f.sum_squares());
        }
        acc
    }

    pub fn is_pure(&self) -> bool {
        self.base.is_none() && self.letters.is_empty() && self.families.is_empty()
    }

    /// `L(F_tail)`, or `R` for tail 1.
    pub fn pure_form(&self) -> Result<FNormalForm> {
        if !self.is_pure() {
            return Err(EngineError::UnsupportedCase(format!("{} still has factors", self)));
        }
        match &self.tail {
            ExtRational::Infinity => Ok(FNormalForm::fgf(ExtRational::Infinity)),
            ExtRational::Finite(r) if r > &Rational::one() => Ok(FNormalForm::fgf(self.tail.clone())),
            ExtRational::Finite(r) if r.is_one() => Ok(FNormalForm::single(DiffuseKind::HyperfiniteFactor)),
            ExtRational::Finite(r) => Err(EngineError::UnsupportedCase(format!("free-group parameter {} < 1", r))),
        }
    }

    pub fn base_key(&self) -> Option<(Body, Rational)> {
        self.base.as_ref().map(|b| (b.body.clone(), b.sq.clone()))
    }

    /// Sorted multiset of letter keys.
    pub fn letter_keys(&self) -> Vec<(Body, Rational)> {
        let mut keys: Vec<_> = self.letters.iter().map(|l| (l.body.clone(), l.key())).collect();
        keys.sort();
        keys
    }

    /// First letter whose body is the named opaque factor.
    pub fn letter_index(&self, name: &str) -> Option<usize> {
        self.letters.iter().position(|l| l.body.name() == Some(name))
    }

    fn opaque_names(&self) -> Vec<&str> {
        let mut out = Vec::new();
        if let Some(b) = &self.base {
            out.extend(b.body.name());
        }
        out.extend(self.letters.iter().filter_map(|l| l.body.name()));
        out.extend(self.families.iter().filter_map(|f| f.body.name()));
        out
    }

    fn is_sorted(&self) -> bool {
        self.letters.windows(2).all(|w| letter_order(&w[0], &w[1]) != std::cmp::Ordering::Greater)
            && self.families.windows(2).all(|w| w[0].sort_key() <= w[1].sort_key())
    }
}

fn letter_order(a: &Letter, b: &Letter) -> std::cmp::Ordering {
    (&a.body, a.key(), Reverse(&a.t_sq)).cmp(&(&b.body, b.key(), Reverse(&b.t_sq)))
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "word{{")?;
        match &self.base {
            Some(b) => write!(f, "{}", b.body.scaled_text(&b.sq))?,
            None => write!(f, "-")?,
        }
        let mut items: Vec<String> = self.letters.iter().map(Letter::to_string).collect();
        items.extend(self.families.iter().map(Family::to_string));
        if !items.is_empty() {
            write!(f, " | {}", items.join(", "))?;
        }
        write!(f, " | tail {}", self.tail)?;
        if self.stable {
            write!(f, " | stable")?;
        }
        write!(f, "}}")
    }
}

enum Piece {
    F(FNormalForm),
    W(Word),
}

/// Raw word of an expression: nesting flattened, class-F parts left in place
/// at the top level.
pub fn assemble(e: &Expr) -> Result<Word> {
    let report = well_formed(e);
    if !report.is_ok() {
        return Err(EngineError::IllFormed(report.to_string()));
    }
    match piece(e)? {
        Piece::W(w) => Ok(w),
        Piece::F(nf) => pure_word_of(&nf),
    }
}

fn pure_word_of(nf: &FNormalForm) -> Result<Word> {
    if !nf.is_ii1_factor() {
        return Err(EngineError::NotAFactor(format!("{} has no word form", nf)));
    }
    Ok(match &nf.diffuse[0].kind {
        DiffuseKind::Fgf(r) => Word::pure(r.clone()),
        _ => Word::pure(ExtRational::one()),
    })
}

fn piece(e: &Expr) -> Result<Piece> {
    if e.is_class_f() {
        return Ok(Piece::F(normalize_fclass(e)?.0));
    }
    match e {
        Expr::Opaque(n) => Ok(Piece::W(Word::opaque_base(n))),
        Expr::Rescale(inner, sq) => match settle(piece(inner)?)? {
            Piece::F(nf) => Ok(Piece::F(rescale_fclass(&nf, sq)?)),
            Piece::W(w) => Ok(Piece::W(rescale_raw(&w, sq)?)),
        },
        Expr::FreeProduct(parts) => free_product_pieces(parts),
        Expr::ScaledProduct { base, letters } => scaled_product(base, letters),
        _ => Err(EngineError::UnsupportedCase(format!("{} has no word form", e))),
    }
}

fn settle(p: Piece) -> Result<Piece> {
    match p {
        Piece::F(nf) => Ok(Piece::F(nf)),
        Piece::W(w) => {
            let (c, _) = canonical(&w, None)?;
            if c.is_pure() {
                Ok(Piece::F(c.pure_form()?))
            } else {
                Ok(Piece::W(c))
            }
        }
    }
}

fn free_product_pieces(parts: &[Expr]) -> Result<Piece> {
    let mut fs = Vec::new();
    let mut ws = Vec::new();
    for p in parts {
        match settle(piece(p)?)? {
            Piece::F(nf) => fs.push(nf),
            Piece::W(w) => ws.push(w),
        }
    }
    if ws.is_empty() {
        let mut acc = fs[0].clone();
        for nf in &fs[1..] {
            acc = free_product(&acc, nf)?;
        }
        return Ok(Piece::F(acc));
    }
    let mut fd = ExtRational::zero();
    for nf in &fs {
        fd = fd.add(&nf.fdim()?);
    }
    if ws.len() == 1 && fd.is_zero() {
        return Ok(Piece::W(ws.pop().unwrap()));
    }
    // families need a base to hang on
    let keep = ws.iter().position(|w| !w.families.is_empty());
    let mut out = Word::pure(fd);
    if let Some(i) = keep {
        out.base = ws[i].base.clone();
    }
    for (j, w) in ws.into_iter().enumerate() {
        if Some(j) != keep {
            if let Some(b) = w.base {
                out.letters.push(Letter::new(b.body, b.sq, Rational::one()));
            }
        }
        out.letters.extend(w.letters);
        out.families.extend(w.families);
        out.tail = out.tail.add(&w.tail);
        out.stable |= w.stable;
    }
    Ok(Piece::W(out))
}

fn scaled_product(base: &Expr, letters: &[LetterExpr]) -> Result<Piece> {
    let mut w = match settle(piece(base)?)? {
        Piece::F(nf) => {
            if !nf.is_ii1_factor() {
                return Err(EngineError::NotAFactor(nf.to_string()));
            }
            Word::based(Body::FClass(nf), Rational::one())
        }
        Piece::W(w) if w.base.is_some() => w,
        Piece::W(w) => rebase(w)?,
    };
    for l in letters {
        add_letter(&mut w, l)?;
    }
    Ok(Piece::W(w))
}

/// Base-less word as a based one: the largest letter becomes the base.
fn rebase(mut w: Word) -> Result<Word> {
    let idx = (0..w.letters.len())
        .max_by(|&i, &j| w.letters[i].t_sq.cmp(&w.letters[j].t_sq).then(j.cmp(&i)))
        .ok_or_else(|| EngineError::UnsupportedCase(format!("{} has no factor to serve as base", w)))?;
    let l = w.letters.remove(idx);
    w.base = Some(BaseFactor { sq: l.key(), body: l.body });
    if !w.stable {
        w.tail = w.tail.add_q(&(&l.t_sq - Rational::one()));
    }
    if w.tail.is_nonneg() {
        Ok(w)
    } else {
        fill(&w)
    }
}

enum LetterBody {
    Simple(Body, Rational),
    Composite(Word),
}

fn letter_body(body: &Expr) -> Result<LetterBody> {
    match body {
        Expr::Opaque(n) => return Ok(LetterBody::Simple(Body::Opaque(n.clone()), Rational::one())),
        Expr::Rescale(inner, c) => {
            if let Expr::Opaque(n) = inner.as_ref() {
                return Ok(LetterBody::Simple(Body::Opaque(n.clone()), c.clone()));
            }
        }
        _ => {}
    }
    match settle(piece(body)?)? {
        Piece::F(nf) => Ok(LetterBody::Simple(Body::FClass(nf), Rational::one())),
        Piece::W(w) if w.letters.is_empty() && w.families.is_empty() && w.tail.is_zero() && !w.stable => {
            let b = w.base.expect("a word without letters has a base");
            Ok(LetterBody::Simple(b.body, b.sq))
        }
        Piece::W(w) => Ok(LetterBody::Composite(w)),
    }
}

fn add_letter(w: &mut Word, l: &LetterExpr) -> Result<()> {
    match l {
        LetterExpr::Single { sq, body } => match letter_body(body)? {
            LetterBody::Simple(b, c) => w.letters.push(Letter::new(b, c, sq.clone())),
            LetterBody::Composite(inner) => flatten_into(w, inner, sq),
        },
        LetterExpr::Family(f) => {
            let (b, c) = match letter_body(&f.body)? {
                LetterBody::Simple(b, c) => (b, c),
                LetterBody::Composite(inner) => {
                    return Err(EngineError::UnsupportedCase(format!(
                        "family body {} must be a single factor or a class-F algebra",
                        inner
                    )))
                }
            };
            match f.count {
                Count::Finite(n) => {
                    if n > FAMILY_EXPANSION_LIMIT {
                        return Err(EngineError::UnsupportedCase(format!(
                            "finite family of {} letters exceeds the expansion limit {}",
                            n, FAMILY_EXPANSION_LIMIT
                        )));
                    }
                    let mut t = f.first_sq.clone();
                    for _ in 0..n {
                        w.letters.push(Letter::new(b.clone(), c.clone(), t.clone()));
                        t *= &f.ratio;
                    }
                }
                Count::Infinite => w.families.push(Family {
                    body: b,
                    key_first: &c / &f.first_sq,
                    ratio: f.ratio.clone(),
                    first_sq: f.first_sq.clone(),
                    lifted: false,
                }),
            }
        }
    }
    Ok(())
}

/// `[s, W]` for a word `W`: its base and letters become letters scaled by `s`,
/// its tail is scaled by `s²`.
fn flatten_into(w: &mut Word, inner: Word, sq: &Rational) {
    if let Some(b) = inner.base {
        w.letters.push(Letter::new(b.body, b.sq, sq.clone()));
    }
    for l in inner.letters {
        w.letters.push(Letter::new(l.body, l.c_sq, l.t_sq * sq));
    }
    for f in inner.families {
        let first_sq = if f.lifted { sq.clone() } else { &f.first_sq * sq };
        w.families.push(Family { key_first: &f.key_first / sq, first_sq, lifted: false, ..f });
    }
    w.tail = w.tail.add(&inner.tail.scale(sq));
    w.stable |= inner.stable;
}

/// Rescaling without re-canonicalization.
fn rescale_raw(w: &Word, sq: &Rational) -> Result<Word> {
    if !sq.is_positive() {
        return Err(EngineError::Scalar(crate::scalar::ScalarError::NonPositiveScale(sq.to_string())));
    }
    let mut out = w.clone();
    if let Some(b) = &mut out.base {
        b.sq *= sq;
        if out.stable {
            for l in &mut out.letters {
                l.c_sq *= sq;
            }
        } else {
            for l in &mut out.letters {
                l.t_sq /= sq;
            }
            for f in &mut out.families {
                f.first_sq /= sq;
            }
            out.tail = out.tail.scale(&sq.recip());
        }
        for f in &mut out.families {
            f.key_first *= sq;
        }
        return Ok(out);
    }
    if out.stable {
        for l in &mut out.letters {
            l.c_sq *= sq;
        }
        return Ok(out);
    }
    let one = Rational::one();
    let x = extended_tail(w)?;
    let n = Rational::from_integer(w.letters.len().into());
    let inv = sq.recip();
    let shift = (n - &one) * (&inv - &one);
    out.tail = x.scale(&inv).add_q(&shift);
    out.letters = w.letters.iter().map(|l| Letter::new(l.body.clone(), l.key() * sq, one.clone())).collect();
    if out.tail.is_nonneg() {
        Ok(out)
    } else {
        fill(&out)
    }
}

/// Common water level `L` for all letters and families, and the tail left over.
fn water_level(w: &Word) -> Result<(Rational, ExtRational)> {
    let one = Rational::one();
    let mut capacity = Rational::from_integer(w.letters.len().into());
    for f in w.families.iter().filter(|f| !f.lifted && f.ratio < one) {
        capacity += (&one - &f.ratio).recip();
    }
    let rho = w.rho();
    match rho {
        ExtRational::Infinity => Ok((one, ExtRational::Infinity)),
        ExtRational::Finite(rho) => {
            if rho >= capacity {
                Ok((one, ExtRational::Finite(rho - capacity)))
            } else if rho.is_positive() {
                Ok((rho / capacity, ExtRational::zero()))
            } else {
                Err(EngineError::UnsupportedCase(format!("{} has ρ = {} ≤ 0", w, rho)))
            }
        }
    }
}

/// Moves every letter and family to the water level, directly.
fn fill(w: &Word) -> Result<Word> {
    let (level, tail) = water_level(w)?;
    let mut out = w.clone();
    for l in &mut out.letters {
        l.c_sq = l.key() * &level;
        l.t_sq = level.clone();
    }
    for f in out.families.iter_mut().filter(|f| !f.lifted) {
        f.first_sq = level.clone();
    }
    out.tail = tail;
    Ok(out)
}

/// `tail + Σ (t − 1)`: the tail once every letter is a plain free factor.
fn extended_tail(w: &Word) -> Result<ExtRational> {
    if w.stable {
        return Ok(ExtRational::Infinity);
    }
    if !w.families.is_empty() {
        return Err(EngineError::UnsupportedCase(format!("{} has infinitely many letters", w)));
    }
    let mut x = w.tail.clone();
    for l in &w.letters {
        x = x.add_q(&(&l.t_sq - Rational::one()));
    }
    Ok(x)
}

/// A word with every letter turned into a plain free factor `Q_{key}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtendedWord {
    pub base: Option<BaseFactor>,
    pub factors: Vec<(Body, Rational)>,
    pub tail: ExtRational,
}

/// All letters converted at once: `tail + Σ (t(i)² − 1)`.
pub fn extended_view(w: &Word) -> Result<ExtendedWord> {
    Ok(ExtendedWord {
        base: w.base.clone(),
        factors: w.letters.iter().map(|l| (l.body.clone(), l.key())).collect(),
        tail: extended_tail(w)?,
    })
}

/// One letter converted into the plain free factor `Q_{c/t}`, paying `1 − t²`
/// from the tail. The tail may become negative.
pub fn free_letter(w: &Word, i: usize) -> Result<Word> {
    let l = w.letters.get(i).ok_or_else(|| EngineError::UnknownLetter(format!("#{}", i)))?;
    if l.t_sq > Rational::one() {
        return Err(EngineError::UnsupportedCase(format!("letter {} has t > 1", l)));
    }
    let mut out = w.clone();
    out.tail = w.tail.add_q(&(&l.t_sq - Rational::one()));
    out.letters[i] = Letter::new(l.body.clone(), l.key(), Rational::one());
    Ok(out)
}

fn find_license(w: &Word, a: Option<&AssumptionSet>) -> Option<License> {
    if w.stable {
        return Some(License::StableContext);
    }
    if let Some(a) = a {
        if let Some(n) = w.opaque_names().into_iter().find(|n| a.is_stable(n)) {
            return Some(License::StableFactor(n.to_string()));
        }
    }
    if let Some(j) = w.families.iter().position(Family::is_divergent) {
        return Some(License::DivergentFamily(j));
    }
    if w.tail.is_infinite() {
        return Some(License::InfiniteTail);
    }
    None
}

fn check_license(w: &Word, license: &License) -> Result<()> {
    let ok = match license {
        License::StableFactor(n) => w.opaque_names().contains(&n.as_str()),
        License::DivergentFamily(j) => w.families.get(*j).is_some_and(Family::is_divergent),
        License::InfiniteTail => w.tail.is_infinite(),
        License::StableContext => w.stable,
    };
    if ok {
        Ok(())
    } else {
        Err(EngineError::NotLicensed(format!("{} does not hold for {}", license, w)))
    }
}

fn letter_at(w: &Word, i: usize) -> Result<&Letter> {
    w.letters.get(i).ok_or_else(|| EngineError::UnknownLetter(format!("#{} in {}", i, w)))
}

fn trade(w: &Word, i: usize, new_t_sq: &Rational) -> Result<Word> {
    if !new_t_sq.is_positive() {
        return Err(EngineError::Scalar(crate::scalar::ScalarError::NonPositiveScale(new_t_sq.to_string())));
    }
    let l = letter_at(w, i)?;
    let mut out = w.clone();
    if !w.stable {
        out.tail = w.tail.add_q(&(&l.t_sq - new_t_sq));
        if let ExtRational::Finite(r) = &out.tail {
            if r.is_negative() {
                return Err(EngineError::PreconditionViolated {
                    context: format!("of letter {} to t² = {}", l, new_t_sq),
                    r_prime: r.clone(),
                    deficit: -r.clone(),
                });
            }
        }
    }
    out.letters[i] = Letter::new(l.body.clone(), &l.c_sq * new_t_sq / &l.t_sq, new_t_sq.clone());
    Ok(out)
}

/// Applies a word rule. `PureFreeGroup` leaves the word level.
pub(crate) fn apply_word_rule(rule: &Rule, w: &Word) -> Result<State> {
    if *rule == Rule::PureFreeGroup {
        return Ok(State::Expr(w.pure_form()?.to_expr()));
    }
    apply_word(rule, w).map(State::Word)
}

fn apply_word(rule: &Rule, w: &Word) -> Result<Word> {
    let mut out = w.clone();
    match rule {
        Rule::AbsorbFLetter { letter } => {
            let l = letter_at(w, *letter)?;
            let f = l.body.fdim_at(&l.c_sq)?;
            out.letters.remove(*letter);
            out.tail = w.tail.add(&f.scale(&l.t_sq));
        }
        Rule::AbsorbFFamily { family } => {
            let fam = w
                .families
                .get(*family)
                .ok_or_else(|| EngineError::UnknownLetter(format!("family #{}", family)))?;
            let f = if fam.lifted {
                return Err(EngineError::UnsupportedCase("lifted class-F family".into()));
            } else {
                fam.body.fdim_at(&fam.c_sq())?
            };
            if !f.is_zero() {
                out.tail = w.tail.add(&fam.sum_squares().mul(&f)?);
            }
            out.families.remove(*family);
        }
        Rule::AbsorbFBase => {
            let b = w
                .base
                .as_ref()
                .ok_or_else(|| EngineError::MalformedCertificate(format!("{} has no base", w)))?;
            if !w.letters.is_empty() || !w.families.is_empty() {
                return Err(EngineError::MalformedCertificate(format!("{} still has letters", w)));
            }
            out.tail = w.tail.add(&b.body.fdim_at(&b.sq)?);
            out.base = None;
        }
        Rule::Desugar { letter } => {
            let l = letter_at(w, *letter)?;
            if l.t_sq <= Rational::one() {
                return Err(EngineError::MalformedCertificate(format!("letter {} has t ≤ 1", l)));
            }
            if !w.stable {
                out.tail = w.tail.add_q(&(&l.t_sq - Rational::one()));
            }
            out.letters[*letter] = Letter::new(l.body.clone(), l.key(), Rational::one());
        }
        Rule::AbsorbStable { license } => {
            check_license(w, license)?;
            for l in &mut out.letters {
                *l = Letter::new(l.body.clone(), l.key(), Rational::one());
            }
            for f in &mut out.families {
                f.first_sq = Rational::one();
                f.lifted = true;
            }
            out.tail = ExtRational::zero();
            out.stable = true;
        }
        Rule::Trade { letter, new_t_sq } => return trade(w, *letter, new_t_sq),
        Rule::TradeFamily { family, new_first_sq } => {
            let f = w
                .families
                .get(*family)
                .ok_or_else(|| EngineError::UnknownLetter(format!("family #{}", family)))?;
            if f.lifted || f.ratio >= Rational::one() || !new_first_sq.is_positive() {
                return Err(EngineError::UnsupportedCase(format!("family {} cannot be traded", f)));
            }
            let scale = (Rational::one() - &f.ratio).recip();
            let old = &f.first_sq * &scale;
            let new = new_first_sq * &scale;
            out.tail = w.tail.add_q(&(old - new));
            if let ExtRational::Finite(r) = &out.tail {
                if r.is_negative() {
                    return Err(EngineError::PreconditionViolated {
                        context: format!("of family {} to t² = {}", f, new_first_sq),
                        r_prime: r.clone(),
                        deficit: -r.clone(),
                    });
                }
            }
            out.families[*family].first_sq = new_first_sq.clone();
        }
        Rule::PeelFamily { family } => {
            let f = w
                .families
                .get(*family)
                .ok_or_else(|| EngineError::UnknownLetter(format!("family #{}", family)))?;
            if f.lifted {
                return Err(EngineError::MalformedCertificate(format!("{} is lifted", f)));
            }
            out.letters.push(Letter::new(f.body.clone(), f.c_sq(), f.first_sq.clone()));
            let next = &mut out.families[*family];
            next.first_sq *= &f.ratio;
            next.key_first /= &f.ratio;
        }
        Rule::MergeFamily { letter, family } => {
            let l = letter_at(w, *letter)?;
            let f = w
                .families
                .get(*family)
                .ok_or_else(|| EngineError::UnknownLetter(format!("family #{}", family)))?;
            if !extends(l, f) || &l.t_sq * &f.ratio != f.first_sq {
                return Err(EngineError::MalformedCertificate(format!("{} is not the member before {}", l, f)));
            }
            out.families[*family].key_first = l.key();
            out.families[*family].first_sq = l.t_sq.clone();
            out.letters.remove(*letter);
        }
        Rule::RescaleWord { sq } => return rescale_raw(w, sq),
        Rule::SortLetters => {
            out.letters.sort_by(letter_order);
            out.families.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        }
        _ => {
            return Err(EngineError::MalformedCertificate(format!("{} is not a word rule", rule.name())));
        }
    }
    Ok(out)
}

/// `l` has the body and key of the member just before the first one of `f`.
fn extends(l: &Letter, f: &Family) -> bool {
    !f.lifted && f.ratio < Rational::one() && l.body == f.body && l.key() == &f.key_first * &f.ratio
}

fn run(cert: &mut Certificate, cur: &mut Word, rule: Rule) -> Result<()> {
    let next = apply_word(&rule, cur)?;
    cert.push(rule, State::Word(cur.clone()), State::Word(next.clone()));
    *cur = next;
    Ok(())
}

/// Canonical word: class-F parts absorbed, large letters desugared,
/// `L(F_∞)` absorbed when licensed, every letter and family at a common
/// water level, letters sorted. Depends only on the base key, the letter keys,
/// `ρ` and stability.
fn canonical(w: &Word, a: Option<&AssumptionSet>) -> Result<(Word, Certificate)> {
    let mut cert = Certificate::default();
    let mut cur = w.clone();
    while let Some(i) = cur.letters.iter().position(|l| matches!(l.body, Body::FClass(_))) {
        run(&mut cert, &mut cur, Rule::AbsorbFLetter { letter: i })?;
    }
    while let Some(j) = cur.families.iter().position(|f| matches!(f.body, Body::FClass(_))) {
        run(&mut cert, &mut cur, Rule::AbsorbFFamily { family: j })?;
    }
    if cur.letters.is_empty()
        && cur.families.is_empty()
        && cur.base.as_ref().is_some_and(|b| matches!(b.body, Body::FClass(_)))
    {
        run(&mut cert, &mut cur, Rule::AbsorbFBase)?;
    }
    if cur.is_pure() {
        return Ok((cur, cert));
    }
    let mut peeled = 0u64;
    while let Some(j) = cur
        .families
        .iter()
        .position(|f| !f.lifted && f.ratio < Rational::one() && f.first_sq > Rational::one())
    {
        peeled += 1;
        if peeled > FAMILY_EXPANSION_LIMIT {
            return Err(EngineError::UnsupportedCase(format!(
                "more than {} family members exceed t = 1",
                FAMILY_EXPANSION_LIMIT
            )));
        }
        run(&mut cert, &mut cur, Rule::PeelFamily { family: j })?;
    }
    while let Some(i) = cur.letters.iter().position(|l| l.t_sq > Rational::one()) {
        run(&mut cert, &mut cur, Rule::Desugar { letter: i })?;
    }
    // fold letters back into families so peeled members do not depend on history;
    // the aligning trade always lowers one side, so it is always legal
    while let Some((i, j)) = cur
        .letters
        .iter()
        .enumerate()
        .find_map(|(i, l)| cur.families.iter().position(|f| extends(l, f)).map(|j| (i, j)))
    {
        let (a, b, r) = (cur.letters[i].t_sq.clone(), cur.families[j].first_sq.clone(), cur.families[j].ratio.clone());
        if &a * &r < b {
            run(&mut cert, &mut cur, Rule::TradeFamily { family: j, new_first_sq: &a * &r })?;
        } else if &a * &r > b {
            run(&mut cert, &mut cur, Rule::Trade { letter: i, new_t_sq: &b / &r })?;
        }
        run(&mut cert, &mut cur, Rule::MergeFamily { letter: i, family: j })?;
    }
    let needs_lift = !cur.stable
        || cur.letters.iter().any(|l| !l.t_sq.is_one())
        || cur.families.iter().any(|f| !f.lifted)
        || !cur.tail.is_zero();
    if needs_lift {
        if let Some(license) = find_license(&cur, a) {
            run(&mut cert, &mut cur, Rule::AbsorbStable { license })?;
        }
    }
    if !cur.stable {
        let (level, _) = water_level(&cur)?;
        let mut moves = Vec::new();
        for (i, l) in cur.letters.iter().enumerate() {
            if l.t_sq != level {
                moves.push((l.t_sq < level, Rule::Trade { letter: i, new_t_sq: level.clone() }));
            }
        }
        for (j, f) in cur.families.iter().enumerate() {
            if !f.lifted && f.first_sq != level {
                moves.push((f.first_sq < level, Rule::TradeFamily { family: j, new_first_sq: level.clone() }));
            }
        }
        moves.sort_by_key(|(up, _)| *up);
        for (_, rule) in moves {
            run(&mut cert, &mut cur, rule)?;
        }
    }
    if !cur.is_sorted() {
        run(&mut cert, &mut cur, Rule::SortLetters)?;
    }
    Ok((cur, cert))
}

/// Canonical representative of a word's trade class.
pub fn canonicalize_word(w: &Word) -> Result<Word> {
    canonical(w, None).map(|(c, _)| c)
}

/// Canonical representative with the certificate of every rewrite.
pub fn canonicalize_with_certificate(w: &Word, a: Option<&AssumptionSet>) -> Result<(Word, Certificate)> {
    canonical(w, a)
}

/// Canonical word of an expression. Class-F factors give pure words.
pub fn to_word(e: &Expr, a: &AssumptionSet) -> Result<(Word, Certificate)> {
    let raw = assemble(e)?;
    let mut cert = Certificate::default();
    cert.push(Rule::Assemble, State::Expr(e.clone()), State::Word(raw.clone()));
    let (w, rest) = canonical(&raw, Some(a))?;
    cert.extend(rest);
    Ok((w, cert))
}

/// `M_s` for `M` given by `w`, then re-canonicalized.
pub fn rescale_word(w: &Word, sq: &Rational) -> Result<(Word, Certificate)> {
    let mut cert = Certificate::default();
    let mut cur = w.clone();
    run(&mut cert, &mut cur, Rule::RescaleWord { sq: sq.clone() })?;
    let (out, rest) = canonical(&cur, None)?;
    cert.extend(rest);
    Ok((out, cert))
}

/// Single free trade of letter `i` to `t² = new_t_sq`.
pub fn trade_step(w: &Word, i: usize, new_t_sq: &Rational) -> Result<(Word, Certificate)> {
    let mut cert = Certificate::default();
    let mut cur = w.clone();
    if letter_at(w, i)?.t_sq != *new_t_sq {
        run(&mut cert, &mut cur, Rule::Trade { letter: i, new_t_sq: new_t_sq.clone() })?;
    }
    Ok((cur, cert))
}

/// Simultaneous trades; decreases run before increases.
pub fn trade_to_target(w: &Word, targets: &[(usize, Rational)]) -> Result<(Word, Certificate)> {
    let mut r_prime = w.tail.clone();
    for (k, (i, new)) in targets.iter().enumerate() {
        if targets[..k].iter().any(|(j, _)| j == i) {
            return Err(EngineError::UnknownLetter(format!("#{} targeted twice", i)));
        }
        r_prime = r_prime.add_q(&(&letter_at(w, *i)?.t_sq - new));
    }
    if let ExtRational::Finite(r) = &r_prime {
        if r.is_negative() && !w.stable {
            return Err(EngineError::PreconditionViolated {
                context: "of all targeted letters".into(),
                r_prime: r.clone(),
                deficit: -r.clone(),
            });
        }
    }
    let mut order: Vec<&(usize, Rational)> = targets.iter().collect();
    order.sort_by_key(|(i, new)| new > &w.letters[*i].t_sq);
    let mut cert = Certificate::default();
    let mut cur = w.clone();
    for (i, new) in order {
        if cur.letters[*i].t_sq != *new {
            run(&mut cert, &mut cur, Rule::Trade { letter: *i, new_t_sq: new.clone() })?;
        }
    }
    Ok((cur, cert))
}

/// `L(F_∞)`-absorption; fails unless a license holds.
pub fn absorb_stable(w: &Word, a: &AssumptionSet) -> Result<(Word, Certificate)> {
    let license = find_license(w, Some(a)).ok_or_else(|| {
        EngineError::NotLicensed(format!("no stable factor, divergent family or infinite tail in {}", w))
    })?;
    let mut cert = Certificate::default();
    let mut cur = w.clone();
    run(&mut cert, &mut cur, Rule::AbsorbStable { license })?;
    Ok((cur, cert))
}

/// `Σ t(k)²` of the first `n` members of a family, summed one by one.
pub fn family_partial_sum(f: &Family, n: u64) -> Rational {
    (0..n).map(|k| &f.first_sq * pow_rational(&f.ratio, k)).sum()
}

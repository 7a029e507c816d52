//! Invariant fuzzers. Each suite draws from its own seeded stream and reports
//! the first failure, minimized where the input is an expression.

use std::fmt;

use num_traits::{One, Signed};

use factor_calc_core::cert::{Certificate, State};
use factor_calc_core::expr::{AssumptionSet, Expr, Mode};
use factor_calc_core::fclass::{
    free_product_with, normalize_fclass, rescale_fclass, standard_collision, CollisionRule, FNormalForm,
};
use factor_calc_core::fdim::fdim;
use factor_calc_core::iso::{iso_verdict, iso_words, Verdict};
use factor_calc_core::scalar::{ExtRational, Rational};
use factor_calc_core::word::{extended_view, free_letter, rescale_word, to_word, trade_step, Word};
use factor_calc_lang::parse;

use crate::gen::{Gen, GenConfig};
use crate::shrink::shrink_pair;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counterexample {
    /// Index of the failing case in the stream.
    pub case: usize,
    pub message: String,
    /// Reproduction script in REPL syntax.
    pub script: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Report {
    pub suite: &'static str,
    pub cases: usize,
    /// Draws outside the engine's supported range.
    pub skipped: usize,
    pub certificates: usize,
    pub failure: Option<Counterexample>,
}

impl Report {
    fn new(suite: &'static str) -> Self {
        Report { suite, cases: 0, skipped: 0, certificates: 0, failure: None }
    }

    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} cases", self.suite, self.cases)?;
        if self.skipped > 0 {
            write!(f, ", {} skipped", self.skipped)?;
        }
        write!(f, ", {} certificates replayed", self.certificates)?;
        match &self.failure {
            None => write!(f, ": pass"),
            Some(c) => write!(f, ": FAIL at case {}: {}", c.case, c.message),
        }
    }
}

enum Outcome {
    Pass(usize),
    Skip,
    Fail(String),
}

/// True iff replaying `cert` from `initial` reproduces its recorded final state.
pub fn replay_certificate(cert: &Certificate, initial: &Expr) -> factor_calc_core::Result<bool> {
    cert.replay(initial)
}

fn replayed(cert: &Certificate, initial: State, what: &str) -> Result<usize, String> {
    cert.check_from(&initial).map(|_| 1).map_err(|m| format!("{} certificate does not replay: {}", what, m))
}

/// Draws until `n` cases are checked; gives up after `20n + 100` draws.
fn drive(suite: &'static str, n: usize, mut case: impl FnMut(usize) -> (Outcome, Option<Counterexample>)) -> Report {
    let mut report = Report::new(suite);
    let mut draws = 0;
    while report.cases < n {
        if draws > 20 * n + 100 {
            report.failure = Some(Counterexample {
                case: draws,
                message: format!("only {} of {} draws were in range", report.cases, draws),
                script: String::new(),
            });
            break;
        }
        let (outcome, cx) = case(draws);
        draws += 1;
        match outcome {
            Outcome::Pass(c) => {
                report.cases += 1;
                report.certificates += c;
            }
            Outcome::Skip => report.skipped += 1,
            Outcome::Fail(m) => {
                report.cases += 1;
                report.failure = Some(cx.unwrap_or(Counterexample { case: draws - 1, message: m, script: String::new() }));
                break;
            }
        }
    }
    report
}

// fdim additivity

fn is_scalars(nf: &FNormalForm) -> bool {
    nf.diffuse.is_empty() && nf.blocks.is_empty() && nf.atoms.len() == 1 && nf.atoms[0].is_one()
}

fn two_atoms(nf: &FNormalForm) -> bool {
    nf.diffuse.is_empty() && nf.blocks.is_empty() && nf.atoms.len() == 2
}

/// Atoms of `A * B` by brute force over all atom pairs.
fn expected_atoms(a: &FNormalForm, b: &FNormalForm) -> Vec<Rational> {
    let mut out = if is_scalars(a) {
        b.atoms.clone()
    } else if is_scalars(b) {
        a.atoms.clone()
    } else {
        let mut v = Vec::new();
        for x in &a.atoms {
            for y in &b.atoms {
                let g = x + y - Rational::one();
                if g.is_positive() {
                    v.push(g);
                }
            }
        }
        v
    };
    out.sort();
    out
}

/// Whether a class-F product with these atoms and total fdim exists:
/// positive diffuse weight solving to a parameter `≥ 1` (exactly 1 for two
/// two-atom abelian algebras).
fn feasible(a: &FNormalForm, b: &FNormalForm, atoms: &[Rational], target: &ExtRational) -> bool {
    if is_scalars(a) || is_scalars(b) {
        return true;
    }
    let w = Rational::one() - atoms.iter().cloned().sum::<Rational>();
    if !w.is_positive() {
        return false;
    }
    let sq: Rational = atoms.iter().map(|g| g * g).sum();
    let d = match target {
        ExtRational::Infinity => return !two_atoms(a) || !two_atoms(b),
        ExtRational::Finite(t) => Rational::one() + (t - Rational::one() + sq) / (&w * &w),
    };
    if two_atoms(a) && two_atoms(b) {
        d.is_one()
    } else {
        d >= Rational::one()
    }
}

fn additivity_case(a: &Expr, b: &Expr, collide: &CollisionRule) -> Outcome {
    let (Ok((na, ca)), Ok((nb, cb))) = (normalize_fclass(a), normalize_fclass(b)) else {
        return Outcome::Skip;
    };
    let mut certs = 0;
    for (c, e) in [(&ca, a), (&cb, b)] {
        match replayed(c, State::Expr(e.clone()), "normal form") {
            Ok(k) => certs += k,
            Err(m) => return Outcome::Fail(m),
        }
    }
    let (Ok(fa), Ok(fb)) = (fdim(a), fdim(b)) else {
        return Outcome::Fail("fdim undefined on a class-F input".into());
    };
    let target = fa.add(&fb);
    let atoms = expected_atoms(&na, &nb);
    let ok = feasible(&na, &nb, &atoms, &target);
    match (free_product_with(&na, &nb, collide), ok) {
        (Err(_), false) => Outcome::Skip,
        (Err(e), true) => Outcome::Fail(format!("engine rejected a feasible product: {}", e)),
        (Ok(p), false) => Outcome::Fail(format!("engine produced {} for an infeasible product", p)),
        (Ok(p), true) => {
            if p.total_weight() != Rational::one() {
                return Outcome::Fail(format!("weights of {} add up to {}", p, p.total_weight()));
            }
            let mut got = p.atoms.clone();
            got.sort();
            if got != atoms {
                let show = |v: &[Rational]| v.iter().map(|q| q.to_string()).collect::<Vec<_>>().join(", ");
                return Outcome::Fail(format!("atoms of {} are [{}], expected [{}]", p, show(&got), show(&atoms)));
            }
            match fdim(&p.to_expr()) {
                Ok(fp) if fp == target => Outcome::Pass(certs),
                Ok(fp) => Outcome::Fail(format!("fdim not conserved: {} + {} != fdim({}) = {}", fa, fb, p, fp)),
                Err(e) => Outcome::Fail(format!("fdim of product {} failed: {}", p, e)),
            }
        }
    }
}

fn additivity_script(a: &Expr, b: &Expr, cfg: &GenConfig, case: usize, message: &str) -> String {
    format!(
        "# fdim additivity counterexample, seed {} case {}\n# {}\n:fdim {}\n:fdim {}\n:nf {}\n",
        cfg.seed,
        case,
        message,
        a,
        b,
        Expr::free(vec![a.clone(), b.clone()])
    )
}

/// `n` random class-F pairs: `free_product` conserves fdim exactly and its
/// atoms match a brute-force enumeration.
pub fn check_additivity(cfg: &GenConfig, n: usize) -> Report {
    check_additivity_with(cfg, n, &standard_collision)
}

/// As [`check_additivity`], with the engine's atom rule replaced by `collide`.
pub fn check_additivity_with(cfg: &GenConfig, n: usize, collide: &CollisionRule) -> Report {
    let mut g = Gen::new(cfg.clone());
    drive("fdim additivity", n, |case| {
        let a = g.fclass_expr();
        let b = g.fclass_expr();
        match additivity_case(&a, &b, collide) {
            Outcome::Fail(_) => {
                let fails = |x: &Expr, y: &Expr| matches!(additivity_case(x, y, collide), Outcome::Fail(_));
                let (a, b) = shrink_pair(a, b, fails);
                let Outcome::Fail(m) = additivity_case(&a, &b, collide) else { unreachable!() };
                let script = additivity_script(&a, &b, cfg, case, &m);
                (Outcome::Fail(m.clone()), Some(Counterexample { case, message: m, script }))
            }
            other => (other, None),
        }
    })
}

// rescale laws

fn rescale_fclass_case(e: &Expr, s: &Rational, t: &Rational) -> Outcome {
    let Ok((nf, cert)) = normalize_fclass(e) else { return Outcome::Skip };
    if !nf.is_ii1_factor() {
        return Outcome::Skip;
    }
    let mut certs = match replayed(&cert, State::Expr(e.clone()), "normal form") {
        Ok(k) => k,
        Err(m) => return Outcome::Fail(m),
    };
    let run = || -> factor_calc_core::Result<(FNormalForm, FNormalForm, FNormalForm)> {
        Ok((
            rescale_fclass(&rescale_fclass(&nf, s)?, t)?,
            rescale_fclass(&nf, &(s * t))?,
            rescale_fclass(&nf, &Rational::one())?,
        ))
    };
    match run() {
        Err(err) => Outcome::Fail(format!("rescaling {} failed: {}", nf, err)),
        Ok((twice, once, _)) if twice != once => {
            Outcome::Fail(format!("({})_(s,t) = {} but ({})_st = {}", nf, twice, nf, once))
        }
        Ok((_, _, id)) if id != nf => Outcome::Fail(format!("({})_1 = {}", nf, id)),
        Ok((_, once, _)) => {
            // the same law through the expression route, with certificate
            let nested = Expr::rescale(Expr::rescale(e.clone(), s.clone()), t.clone());
            match normalize_fclass(&nested) {
                Ok((via, c)) if via == once => match replayed(&c, State::Expr(nested), "rescale") {
                    Ok(k) => {
                        certs += k;
                        Outcome::Pass(certs)
                    }
                    Err(m) => Outcome::Fail(m),
                },
                Ok((via, _)) => Outcome::Fail(format!("{} normalizes to {}, expected {}", nested, via, once)),
                Err(err) => Outcome::Fail(format!("{} failed: {}", nested, err)),
            }
        }
    }
}

fn rescale_word_case(e: &Expr, s: &Rational, t: &Rational) -> Outcome {
    let a = AssumptionSet::default();
    let Ok((w, cert)) = to_word(e, &a) else { return Outcome::Skip };
    let mut certs = match replayed(&cert, State::Expr(e.clone()), "word") {
        Ok(k) => k,
        Err(m) => return Outcome::Fail(m),
    };
    // each certificate is paired with the word it starts from
    let run = || -> factor_calc_core::Result<_> {
        let (ws, c1) = rescale_word(&w, s)?;
        let (wst, c2) = rescale_word(&ws, t)?;
        let (once, c3) = rescale_word(&w, &(s * t))?;
        let (id, c4) = rescale_word(&w, &Rational::one())?;
        Ok(([(w.clone(), c1), (ws, c2), (w.clone(), c3), (w.clone(), c4)], wst, once, id))
    };
    match run() {
        Err(err) => Outcome::Fail(format!("rescaling {} failed: {}", w, err)),
        Ok((_, wst, once, _)) if wst != once => {
            Outcome::Fail(format!("({})_(s,t) = {} but ({})_st = {}", w, wst, w, once))
        }
        Ok((_, _, _, id)) if id != w => Outcome::Fail(format!("({})_1 = {}", w, id)),
        Ok((cs, ..)) => {
            for (from, c) in cs {
                match replayed(&c, State::Word(from), "rescale") {
                    Ok(k) => certs += k,
                    Err(m) => return Outcome::Fail(m),
                }
            }
            Outcome::Pass(certs)
        }
    }
}

/// `rescale(rescale(M, s), t) = rescale(M, st)` and `rescale(M, 1) = M` on
/// random factors, as canonical forms.
pub fn check_rescale_laws(cfg: &GenConfig, n: usize) -> Report {
    let mut g = Gen::new(cfg.clone());
    let four = Rational::from_integer(4.into());
    drive("rescale laws", n, |case| {
        let e = g.factor_expr();
        let s = g.fraction_of(&four);
        let t = g.fraction_of(&four);
        let out = if e.is_class_f() { rescale_fclass_case(&e, &s, &t) } else { rescale_word_case(&e, &s, &t) };
        let cx = match &out {
            Outcome::Fail(m) => Some(Counterexample {
                case,
                message: m.clone(),
                script: format!(
                    "# rescale law counterexample, seed {} case {}\n# {}\n:rescale {} {}\n:rescale {} {}\n",
                    cfg.seed,
                    case,
                    m,
                    Expr::rescale(e.clone(), s.clone()),
                    factor_calc_core::print::scale_text(&t),
                    e,
                    factor_calc_core::print::scale_text(&(&s * &t))
                ),
            }),
            _ => None,
        };
        (out, cx)
    })
}

// free trades

fn trade_case(g: &mut Gen) -> Result<usize, String> {
    let w0 = g.raw_word();
    let len = 1 + g.below(5);
    let mut cur = w0.clone();
    let mut certs = 0;
    for _ in 0..len {
        let Some((i, s)) = g.legal_trade(&cur) else { break };
        let (next, c) = trade_step(&cur, i, &s).map_err(|e| format!("legal trade on {} failed: {}", cur, e))?;
        certs += replayed(&c, State::Word(cur.clone()), "trade")?;
        if next.rho() != w0.rho() {
            return Err(format!("rho changed: {} to {}", w0, next));
        }
        if next.letter_keys() != w0.letter_keys() {
            return Err(format!("letter keys changed: {} to {}", w0, next));
        }
        if next.base_key() != w0.base_key() {
            return Err(format!("base key changed: {} to {}", w0, next));
        }
        cur = next;
    }
    let a = AssumptionSet::default();
    match iso_words(&w0, &cur, &a).map_err(|e| format!("iso on {} failed: {}", w0, e))? {
        Verdict::Isomorphic { left, right } => {
            certs += replayed(&left, State::Word(w0.clone()), "iso")?;
            certs += replayed(&right, State::Word(cur.clone()), "iso")?;
            Ok(certs)
        }
        v => Err(format!("{} traded to {}: {}", w0, cur, v)),
    }
}

/// Random legal trade sequences keep `ρ`, the letter keys and the base key,
/// and the result stays isomorphic to the start.
pub fn check_trade_invariance(cfg: &GenConfig, n: usize) -> Report {
    let mut g = Gen::new(cfg.clone());
    drive("trade invariance", n, |case| match trade_case(&mut g) {
        Ok(c) => (Outcome::Pass(c), None),
        Err(m) => (
            Outcome::Fail(m.clone()),
            Some(Counterexample { case, message: m, script: format!("# seed {} case {}\n", cfg.seed, case) }),
        ),
    })
}

// chain vs closed form

/// Converts the letters one at a time.
pub fn fold_letters(w: &Word) -> factor_calc_core::Result<Word> {
    let mut cur = w.clone();
    for i in 0..w.letters.len() {
        cur = free_letter(&cur, i)?;
    }
    Ok(cur)
}

fn chain_case(w: &Word) -> Result<(), String> {
    let closed = extended_view(w).map_err(|e| e.to_string())?;
    let folded = fold_letters(w).map_err(|e| e.to_string())?;
    let factors: Vec<_> = folded.letters.iter().map(|l| (l.body.clone(), l.key())).collect();
    if folded.base != closed.base || factors != closed.factors || folded.tail != closed.tail {
        return Err(format!("{}: folded tail {} but closed form {}", w, folded.tail, closed.tail));
    }
    if let Some(l) = folded.letters.iter().find(|l| !l.t_sq.is_one()) {
        return Err(format!("{}: letter {} not converted", w, l));
    }
    Ok(())
}

/// Closed-form extended tail `tail + Σ(t² − 1)` against one-letter conversions folded.
pub fn chain_vs_closed_form(cfg: &GenConfig, n: usize) -> Report {
    let mut g = Gen::new(cfg.clone());
    drive("chain vs closed form", n, |case| {
        let w = g.raw_word();
        match chain_case(&w) {
            Ok(()) => (Outcome::Pass(0), None),
            Err(m) => (
                Outcome::Fail(m.clone()),
                Some(Counterexample { case, message: m, script: format!("# seed {} case {}\n", cfg.seed, case) }),
            ),
        }
    })
}

// mode monotonicity

fn modes_case(e1: &Expr, e2: &Expr) -> Outcome {
    let distinct = AssumptionSet::new(Mode::Distinct);
    let collapsed = AssumptionSet::new(Mode::Collapsed);
    let Ok(v) = iso_verdict(e1, e2, &distinct) else { return Outcome::Skip };
    let Verdict::Isomorphic { left, right } = v else { return Outcome::Pass(0) };
    let mut certs = 0;
    for (c, e) in [(&left, e1), (&right, e2)] {
        match replayed(c, State::Expr(e.clone()), "iso") {
            Ok(k) => certs += k,
            Err(m) => return Outcome::Fail(m),
        }
    }
    match iso_verdict(e1, e2, &collapsed) {
        Ok(v) if v.is_isomorphic() => Outcome::Pass(certs),
        Ok(v) => Outcome::Fail(format!("isomorphic when distinct, collapsed says {}", v)),
        Err(e) => Outcome::Fail(format!("collapsed mode failed: {}", e)),
    }
}

/// Isomorphic under Distinct implies isomorphic under Collapsed.
pub fn check_mode_monotonicity(cfg: &GenConfig, n: usize) -> Report {
    let mut g = Gen::new(cfg.clone());
    drive("mode monotonicity", n, |case| {
        let e1 = if g.coin(0.5) { g.fclass_factor() } else { g.word_expr() };
        let e2 = if g.coin(0.6) {
            g.variant(&e1)
        } else if e1.is_class_f() {
            g.fclass_factor()
        } else {
            g.word_expr()
        };
        let out = modes_case(&e1, &e2);
        let cx = match &out {
            Outcome::Fail(m) => Some(Counterexample {
                case,
                message: m.clone(),
                script: format!(
                    "# mode monotonicity counterexample, seed {} case {}\n# {}\n:iso {} {}\n:mode collapsed\n:iso {} {}\n",
                    cfg.seed, case, m, e1, e2, e1, e2
                ),
            }),
            _ => None,
        };
        (out, cx)
    })
}

// printing

/// `parse(print(e)) = e` on random expressions.
pub fn check_round_trip(cfg: &GenConfig, n: usize) -> Report {
    let mut g = Gen::new(cfg.clone());
    drive("print round trip", n, |case| {
        let e = if g.coin(0.5) { g.fclass_expr() } else { g.word_expr() };
        let text = e.to_string();
        match parse(&text) {
            Ok(back) if back == e => (Outcome::Pass(0), None),
            other => {
                let m = match other {
                    Ok(back) => format!("{} reparsed as {:?}", text, back),
                    Err(err) => format!("{} does not parse: {}", text, err),
                };
                (Outcome::Fail(m.clone()), Some(Counterexample { case, message: m, script: format!(":nf {}\n", text) }))
            }
        }
    })
}

/// Suites selectable from the command line.
pub const SUITES: &[&str] = &["all", "fdim", "words", "rescale", "trade", "chain", "modes", "print"];

pub fn run_suite(name: &str, cfg: &GenConfig, n: usize) -> Option<Vec<Report>> {
    let reports = match name {
        "fdim" => vec![check_additivity(cfg, n)],
        "rescale" => vec![check_rescale_laws(cfg, n)],
        "trade" => vec![check_trade_invariance(cfg, n)],
        "chain" => vec![chain_vs_closed_form(cfg, n)],
        "modes" => vec![check_mode_monotonicity(cfg, n)],
        "print" => vec![check_round_trip(cfg, n)],
        "words" => vec![
            check_rescale_laws(cfg, n),
            check_trade_invariance(cfg, n),
            chain_vs_closed_form(cfg, n),
        ],
        "all" => vec![
            check_additivity(cfg, n),
            check_rescale_laws(cfg, n),
            check_trade_invariance(cfg, n),
            chain_vs_closed_form(cfg, n),
            check_mode_monotonicity(cfg, n),
            check_round_trip(cfg, n),
        ],
        _ => return None,
    };
    Some(reports)
}

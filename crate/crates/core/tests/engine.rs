use factor_calc_core::cert::State;
use factor_calc_core::expr::{AssumptionSet, Count, Expr, Mode};
use factor_calc_core::fclass::{free_product, normalize_fclass, rescale_fclass, FNormalForm};
use factor_calc_core::fdim::{fdim, sum_squares};
use factor_calc_core::iso::{iso_verdict, iso_words, Normal};
use factor_calc_core::scalar::{int, rat, ExtRational, Rational};
use factor_calc_core::word::{
    canonicalize_word, extended_view, rescale_word, to_word, trade_step, trade_to_target, Letter, Word,
};
use factor_calc_core::{normalize, EngineError};
use proptest::prelude::*;

fn fin(q: Rational) -> ExtRational {
    ExtRational::Finite(q)
}

fn two_atoms(a: Rational, b: Rational) -> Expr {
    Expr::dsum(vec![(a, Expr::scalars()), (b, Expr::scalars())])
}

fn nq() -> Word {
    Word::opaque_base("N")
}

#[test]
fn fdim_table() {
    assert_eq!(fdim(&Expr::Matrix(2)).unwrap(), fin(rat(3, 4)));
    assert_eq!(fdim(&Expr::scalars()).unwrap(), fin(int(0)));
    assert_eq!(fdim(&two_atoms(rat(1, 3), rat(2, 3))).unwrap(), fin(rat(4, 9)));
    let half = Expr::dsum(vec![(rat(1, 2), Expr::fgf(int(2))), (rat(1, 2), Expr::scalars())]);
    assert_eq!(fdim(&half).unwrap(), fin(int(1)));
    assert_eq!(fdim(&Expr::free(vec![half, Expr::fgf(int(4))])).unwrap(), fin(int(5)));
    assert!(matches!(fdim(&Expr::opaque("N")), Err(EngineError::UndefinedFdim(_))));
}

#[test]
fn family_sums() {
    assert_eq!(sum_squares(&rat(1, 2), &rat(1, 2), Count::Infinite), fin(int(1)));
    assert_eq!(sum_squares(&rat(1, 4), &int(1), Count::Infinite), ExtRational::Infinity);
    assert_eq!(sum_squares(&rat(1, 4), &int(1), Count::Finite(3)), fin(rat(3, 4)));
}

#[test]
fn class_f_products() {
    let half = Expr::dsum(vec![(rat(1, 2), Expr::fgf(int(2))), (rat(1, 2), Expr::scalars())]);
    let (nf, cert) = normalize_fclass(&Expr::free(vec![half.clone(), Expr::fgf(int(4))])).unwrap();
    assert_eq!(nf, FNormalForm::fgf(fin(int(5))));
    assert!(nf.atoms.is_empty());
    assert!(cert.replay(&Expr::free(vec![half.clone(), Expr::fgf(int(4))])).unwrap());

    let (with_c, _) = normalize_fclass(&Expr::free(vec![half.clone(), Expr::scalars()])).unwrap();
    assert_eq!(with_c, normalize_fclass(&half).unwrap().0);

    let (m, _) = normalize_fclass(&Expr::free(vec![Expr::Matrix(2), Expr::Matrix(2)])).unwrap();
    assert_eq!(m.to_string(), "LF(3/2)");

    let q = two_atoms(rat(3, 4), rat(1, 4));
    let (nf, _) = normalize_fclass(&Expr::free(vec![q.clone(), q])).unwrap();
    assert_eq!(nf.to_string(), "dsum(1/2: H, 1/2: C)");
}

#[test]
fn class_f_rescaling() {
    let five = FNormalForm::fgf(fin(int(5)));
    assert_eq!(rescale_fclass(&five, &rat(1, 4)).unwrap().to_string(), "LF(17)");
    let abelian = FNormalForm::from_nf_expr(&two_atoms(rat(1, 2), rat(1, 2))).unwrap();
    assert!(matches!(rescale_fclass(&abelian, &rat(1, 4)), Err(EngineError::NotAFactor(_))));
}

#[test]
fn words_from_expressions() {
    let a = AssumptionSet::default();
    let e = Expr::sub(Expr::opaque("N"), vec![Expr::letter(rat(1, 4), Expr::opaque("Q"))]);
    let (w, cert) = to_word(&e, &a).unwrap();
    assert!(cert.replay(&e).unwrap());
    assert_eq!(w.to_string(), "word{N | [1/2, Q] | tail 0}");
    assert_eq!(extended_view(&w).unwrap().tail, fin(rat(-3, 4)));

    let fam = Expr::sub(
        Expr::fgf(int(2)),
        vec![Expr::family(rat(1, 2), rat(1, 2), Count::Infinite, Expr::fgf(int(2)))],
    );
    let (n, _) = normalize(&fam, &a).unwrap();
    assert_eq!(n, Normal::F(FNormalForm::fgf(fin(int(4)))));
}

#[test]
fn word_rescale_examples() {
    let w = nq().with_letter(Letter::opaque("Q", int(1), rat(1, 4))).with_tail(int(1));
    let (out, cert) = rescale_word(&w, &rat(1, 4)).unwrap();
    assert!(cert.replay_from(&State::Word(w.clone())));
    assert_eq!(out.base.as_ref().unwrap().sq, rat(1, 4));
    assert_eq!(out.letters[0].t_sq, int(1));
    assert_eq!(out.tail, fin(int(4)));
    assert_eq!(rescale_word(&out, &int(1)).unwrap().0, out);
}

#[test]
fn trade_examples() {
    let w = nq().with_letter(Letter::opaque("Q", int(1), rat(1, 4))).with_tail(int(1));
    let (t, _) = trade_step(&w, 0, &rat(9, 16)).unwrap();
    assert_eq!(t.letters[0].c_sq, rat(9, 4));
    assert_eq!(t.tail, fin(rat(11, 16)));
    assert_eq!(trade_step(&w, 0, &rat(1, 4)).unwrap().0, w);

    let tight = nq().with_letter(Letter::opaque("Q", int(1), rat(1, 4)));
    match trade_step(&tight, 0, &int(1)) {
        Err(EngineError::PreconditionViolated { deficit, .. }) => assert_eq!(deficit, rat(3, 4)),
        other => panic!("{:?}", other),
    }

    let two = nq()
        .with_letter(Letter::opaque("Q1", int(1), rat(1, 4)))
        .with_letter(Letter::opaque("Q2", int(1), rat(1, 4)))
        .with_tail(rat(1, 2));
    let (t, _) = trade_to_target(&two, &[(0, rat(9, 16)), (1, rat(1, 4))]).unwrap();
    assert_eq!(t.tail, fin(rat(3, 16)));
    match trade_to_target(&two, &[(0, int(1)), (1, int(1))]) {
        Err(EngineError::PreconditionViolated { r_prime, .. }) => assert_eq!(r_prime, int(-1)),
        other => panic!("{:?}", other),
    }
}

#[test]
fn canonical_lift_and_idempotence() {
    let w = nq().with_letter(Letter::opaque("Q", rat(9, 4), rat(9, 16))).with_tail(rat(11, 16));
    let c = canonicalize_word(&w).unwrap();
    assert_eq!(c.letters[0].c_sq, int(4));
    assert_eq!(c.letters[0].t_sq, int(1));
    assert_eq!(c.tail, fin(rat(1, 4)));
    assert_eq!(canonicalize_word(&c).unwrap(), c);
    let stuck = nq()
        .with_letter(Letter::opaque("Q", int(1), rat(1, 4)))
        .with_letter(Letter::opaque("Q", int(1), rat(1, 4)));
    assert_eq!(canonicalize_word(&stuck).unwrap(), stuck);
}

#[test]
fn stable_absorption() {
    let e = Expr::sub(Expr::opaque("N"), vec![Expr::letter(rat(1, 4), Expr::opaque("Q"))]);
    let stable = AssumptionSet::default().with_stable("Q");
    let (w, _) = to_word(&e, &stable).unwrap();
    assert!(w.stable);
    assert_eq!(w.letters[0].c_sq, int(4));
    let div = Expr::sub(
        Expr::opaque("N"),
        vec![Expr::family(rat(1, 4), int(1), Count::Infinite, Expr::opaque("Q"))],
    );
    let (w, cert) = to_word(&div, &AssumptionSet::default()).unwrap();
    assert!(w.stable && w.families[0].lifted);
    assert!(cert.replay(&div).unwrap());
}

#[test]
fn rescaled_family_does_not_depend_on_history() {
    // a family whose first member passes t = 1 after the first rescale
    let e = Expr::sub(
        Expr::opaque("N"),
        vec![
            Expr::letter(int(1), Expr::rescale(Expr::opaque("Q3"), rat(4, 3))),
            Expr::family(int(1), rat(1, 2), Count::Infinite, Expr::rescale(Expr::opaque("Q2"), rat(3, 2))),
        ],
    );
    let e = Expr::free(vec![e, Expr::fgf(rat(55, 4) + int(1))]);
    let (w, _) = to_word(&e, &AssumptionSet::default()).unwrap();
    for (a, b) in [(rat(1, 2), rat(3, 4)), (rat(1, 3), rat(3, 2)), (rat(3, 8), rat(7, 4))] {
        let twice = rescale_word(&rescale_word(&w, &a).unwrap().0, &b).unwrap().0;
        let once = rescale_word(&w, &(&a * &b)).unwrap().0;
        assert_eq!(twice, once, "s = {}, t = {}", a, b);
    }
}

#[test]
fn verdict_texts() {
    let a = AssumptionSet::default();
    let v = iso_verdict(&Expr::fgf(int(2)), &Expr::fgf(int(3)), &a).unwrap();
    assert!(v.to_string().starts_with("not provable"));
    let v = iso_verdict(&Expr::fgf(int(2)), &Expr::fgf(int(3)), &AssumptionSet::new(Mode::Collapsed)).unwrap();
    assert!(v.is_isomorphic());
    let v = iso_verdict(&Expr::Matrix(2), &Expr::fgf(int(3)), &a).unwrap();
    assert!(v.to_string().starts_with("provably distinct"));
}

fn small_q() -> impl Strategy<Value = Rational> {
    (1i64..=12, 1i64..=12).prop_map(|(n, d)| rat(n, d))
}

fn unit_q() -> impl Strategy<Value = Rational> {
    (1i64..=12).prop_flat_map(|d| (1..=d).prop_map(move |n| rat(n, d)))
}

fn word_strategy() -> impl Strategy<Value = Word> {
    (
        prop::collection::vec((0usize..3, small_q(), unit_q()), 0..5),
        prop::option::of(small_q()),
    )
        .prop_map(|(letters, tail)| {
            let mut w = nq();
            for (i, c, t) in letters {
                w = w.with_letter(Letter::opaque(["Q1", "Q2", "Q3"][i], c, t));
            }
            if let Some(r) = tail {
                w = w.with_tail(r);
            }
            w
        })
}

proptest! {
    #[test]
    fn fgf_free_products_add(r in small_q(), s in small_q()) {
        let (r, s) = (r + int(1), s + int(1));
        let p = free_product(&FNormalForm::fgf(fin(r.clone())), &FNormalForm::fgf(fin(s.clone()))).unwrap();
        prop_assert_eq!(p, FNormalForm::fgf(fin(r + s)));
    }

    #[test]
    fn fgf_rescale_composes(r in small_q(), s in small_q(), t in small_q()) {
        let f = FNormalForm::fgf(fin(r + int(1)));
        let twice = rescale_fclass(&rescale_fclass(&f, &s).unwrap(), &t).unwrap();
        prop_assert_eq!(twice, rescale_fclass(&f, &(s * t)).unwrap());
    }

    #[test]
    fn canonical_form_is_idempotent_and_keeps_rho(w in word_strategy()) {
        let c = canonicalize_word(&w).unwrap();
        prop_assert_eq!(c.rho(), w.rho());
        prop_assert_eq!(c.letter_keys(), w.letter_keys());
        prop_assert_eq!(canonicalize_word(&c).unwrap(), c);
    }

    #[test]
    fn legal_trades_are_isomorphisms(w in word_strategy(), pick in 0usize..5, frac in unit_q()) {
        prop_assume!(!w.letters.is_empty());
        let i = pick % w.letters.len();
        let budget = match &w.tail { ExtRational::Finite(r) => &w.letters[i].t_sq + r, _ => int(1) };
        let s = if budget > int(1) { frac } else { frac * budget };
        let (t, cert) = trade_step(&w, i, &s).unwrap();
        prop_assert!(cert.replay_from(&State::Word(w.clone())));
        prop_assert_eq!(t.rho(), w.rho());
        prop_assert!(iso_words(&w, &t, &AssumptionSet::default()).unwrap().is_isomorphic());
    }

    #[test]
    fn word_rescale_composes(w in word_strategy(), s in small_q(), t in small_q()) {
        let twice = rescale_word(&rescale_word(&w, &s).unwrap().0, &t).unwrap().0;
        prop_assert_eq!(twice, rescale_word(&w, &(&s * &t)).unwrap().0);
    }
}

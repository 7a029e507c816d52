use std::fs;

use factor_calc_core::expr::{Count, Expr, LetterExpr};
use factor_calc_core::scalar::{int, rat, Rational};
use factor_calc_lang::{parse, Session, Severity};
use proptest::prelude::*;

fn q() -> impl Strategy<Value = Rational> {
    (1i64..=20, 1i64..=20).prop_map(|(n, d)| rat(n, d))
}

fn weights(k: usize) -> impl Strategy<Value = Vec<Rational>> {
    prop::collection::vec(1i64..=6, k).prop_map(|ns| {
        let total: i64 = ns.iter().sum();
        ns.into_iter().map(|n| rat(n, total)).collect()
    })
}

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        Just(Expr::scalars()),
        Just(Expr::hyperfinite()),
        Just(Expr::hyperfinite_factor()),
        Just(Expr::fgf_inf()),
        (2u64..6).prop_map(Expr::Matrix),
        q().prop_map(|r| Expr::fgf(r + int(1))),
        prop::sample::select(vec!["N", "Q", "Q1", "P_2"]).prop_map(Expr::opaque),
    ]
}

fn letter(body: BoxedStrategy<Expr>) -> impl Strategy<Value = LetterExpr> {
    prop_oneof![
        (q(), body.clone()).prop_map(|(sq, b)| Expr::letter(sq, b)),
        (q(), q(), prop_oneof![Just(Count::Infinite), (1u64..5).prop_map(Count::Finite)], body)
            .prop_map(|(f, r, c, b)| Expr::family(f, r, c, b)),
    ]
}

fn expr() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(3, 24, 4, |inner| {
        let parts = inner.clone();
        prop_oneof![
            (2usize..4).prop_flat_map(move |k| {
                (weights(k), prop::collection::vec(parts.clone(), k))
                    .prop_map(|(ws, es)| Expr::dsum(ws.into_iter().zip(es).collect()))
            }),
            prop::collection::vec(inner.clone(), 2..4).prop_map(Expr::free),
            (inner.clone(), q()).prop_map(|(e, sq)| Expr::rescale(e, sq)),
            (inner.clone(), prop::collection::vec(letter(inner.boxed()), 1..3))
                .prop_map(|(b, ls)| Expr::sub(b, ls)),
        ]
    })
}

proptest! {
    #[test]
    fn print_then_parse_is_identity(e in expr()) {
        let text = e.to_string();
        let back = parse(&text).map_err(|err| TestCaseError::fail(format!("{}: {}", text, err)))?;
        prop_assert_eq!(back, e);
    }
}

#[test]
fn scripts_and_load() {
    let dir = std::env::temp_dir().join(format!("factor-calc-lang-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    fs::write(dir.join("inner.fc"), "# nested\n:mode collapsed\n:iso LF(2) LF(3)\n").unwrap();
    let mut s = Session::default();
    s.set_base_dir(&dir);
    let replies = s.eval_script(":fdim M(2)\n\n:load inner.fc\n:quit\n:fdim C\n");
    fs::remove_dir_all(&dir).unwrap();
    let texts: Vec<&str> = replies.iter().map(|r| r.text.as_str()).collect();
    assert_eq!(texts, vec!["3/4", "", "mode collapsed\nisomorphic", ""]);
    assert!(replies.last().unwrap().quit);
    assert!(replies.iter().all(|r| r.severity == Severity::Ok));
}

#[test]
fn diagnostics_carry_positions() {
    let mut s = Session::default();
    let r = s.eval(":nf dsum(1/2: LF(2) 1/2: C)");
    assert_eq!(r.severity, Severity::Diagnostic);
    assert!(r.text.starts_with("parse error: 1:"), "{}", r.text);
    let r = s.eval(":load missing.fc");
    assert_eq!(r.severity, Severity::Diagnostic);
}

#[test]
fn trade_all_and_rescale_commands() {
    let mut s = Session::default();
    let r = s.eval(":tradeAll sub(N * LF(3/2), [1/2, Q1], [1/2, Q2]) Q1=3/4, Q2=1/2");
    assert_eq!(r.severity, Severity::Ok, "{}", r.text);
    let r = s.eval(":rescale Q1*Q2 1/2");
    assert_eq!(r.text, "word{- | [1, scale(Q1, 1/2)], [1, scale(Q2, 1/2)] | tail 3}");
    let r = s.eval(":rescale LF(5) 1/2");
    assert_eq!(r.text, "LF(17)");
    // non-factors and unrealizable matrix scales are rejected before evaluation
    let r = s.eval(":rescale dsum(1/2: C, 1/2: C) 1/2");
    assert_eq!(r.severity, Severity::Diagnostic);
    let r = s.eval(":rescale M(3) 1/2");
    assert_eq!(r.severity, Severity::Diagnostic);
    assert_eq!(s.eval(":rescale M(4) 1/2").text, "M(2)");
}

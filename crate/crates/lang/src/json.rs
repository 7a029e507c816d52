//! JSON export of certificates and verdicts.

use serde_json::{json, Map, Value};

use factor_calc_core::cert::{Certificate, State};
use factor_calc_core::iso::Verdict;

fn state_json(s: &State) -> Value {
    match s {
        State::Expr(e) => json!({ "expr": e.to_string() }),
        State::Word(w) => json!({ "word": w.to_string() }),
    }
}

pub fn certificate_json(cert: &Certificate) -> Value {
    let steps: Vec<Value> = cert
        .steps
        .iter()
        .map(|s| {
            let bindings: Map<String, Value> =
                s.rule.bindings().into_iter().map(|(k, v)| (k.to_string(), Value::String(v))).collect();
            json!({
                "rule": s.rule.name(),
                "anchor": s.rule.anchor(),
                "bindings": bindings,
                "before": state_json(&s.before),
                "after": state_json(&s.after),
            })
        })
        .collect();
    json!({ "steps": steps })
}

pub fn verdict_json(v: &Verdict) -> Value {
    match v {
        Verdict::Isomorphic { left, right } => json!({
            "verdict": "isomorphic",
            "left": certificate_json(left),
            "right": certificate_json(right),
        }),
        Verdict::ProvablyDistinct(w) => json!({
            "verdict": "provably distinct",
            "invariant": w.invariant,
            "left": w.left,
            "right": w.right,
        }),
        Verdict::NotProvable { left, right } => json!({
            "verdict": "not provable",
            "left": left,
            "right": right,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use factor_calc_core::expr::AssumptionSet;
    use factor_calc_core::iso::iso_verdict;

    #[test]
    fn isomorphic_verdict_lists_steps() {
        let e1 = crate::parse("LF(3)*LF(2)").unwrap();
        let e2 = crate::parse("LF(5)").unwrap();
        let v = iso_verdict(&e1, &e2, &AssumptionSet::default()).unwrap();
        let j = verdict_json(&v);
        assert_eq!(j["verdict"], "isomorphic");
        assert_eq!(j["left"]["steps"][0]["rule"], "FGF additivity");
        assert_eq!(j["left"]["steps"][0]["after"]["expr"], "LF(5)");
        assert_eq!(j["left"]["steps"][0]["bindings"]["path"], "[]");
    }
}

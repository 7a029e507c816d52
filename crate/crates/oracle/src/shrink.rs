//! Greedy counterexample minimization on expression trees.

use factor_calc_core::expr::Expr;

fn paths(e: &Expr, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    out.push(prefix.clone());
    for (i, c) in e.children().into_iter().enumerate() {
        prefix.push(i);
        paths(c, prefix, out);
        prefix.pop();
    }
}

/// Smaller class-F replacements for a node: its operands, the product with
/// one operand dropped, and the simplest leaves.
fn simpler(node: &Expr) -> Vec<Expr> {
    let mut out = Vec::new();
    if !node.is_class_f() {
        return out;
    }
    match node {
        Expr::FreeProduct(parts) => {
            out.extend(parts.iter().cloned());
            if parts.len() > 2 {
                for i in 0..parts.len() {
                    let mut rest = parts.clone();
                    rest.remove(i);
                    out.push(Expr::FreeProduct(rest));
                }
            }
        }
        Expr::DirectSum(parts) => out.extend(parts.iter().map(|(_, p)| p.clone())),
        _ => {}
    }
    out.extend([Expr::scalars(), Expr::hyperfinite_factor(), Expr::Matrix(2)]);
    out
}

/// Candidates strictly smaller than `e`, each differing in one subtree.
pub fn candidates(e: &Expr) -> Vec<Expr> {
    let mut ps = Vec::new();
    paths(e, &mut Vec::new(), &mut ps);
    let size = e.size();
    let mut out = Vec::new();
    for p in ps {
        let node = e.at(&p).expect("path from traversal");
        for rep in simpler(node) {
            if rep == *node {
                continue;
            }
            if let Some(c) = e.replaced_at(&p, rep) {
                if c.size() < size {
                    out.push(c);
                }
            }
        }
    }
    out
}

/// Shrinks `e` while `fails` keeps holding.
pub fn shrink(e: Expr, fails: impl Fn(&Expr) -> bool) -> Expr {
    let mut cur = e;
    'outer: loop {
        for c in candidates(&cur) {
            if fails(&c) {
                cur = c;
                continue 'outer;
            }
        }
        return cur;
    }
}

/// Shrinks both halves of a failing pair.
pub fn shrink_pair(a: Expr, b: Expr, fails: impl Fn(&Expr, &Expr) -> bool) -> (Expr, Expr) {
    let (mut a, mut b) = (a, b);
    loop {
        let a2 = shrink(a.clone(), |x| fails(x, &b));
        let b2 = shrink(b.clone(), |y| fails(&a2, y));
        if a2 == a && b2 == b {
            return (a, b);
        }
        a = a2;
        b = b2;
    }
}

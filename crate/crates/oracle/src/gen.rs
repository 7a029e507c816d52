//! Seeded random generators. Identical configs give identical streams.

use num_bigint::BigInt;
use num_traits::One;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use factor_calc_core::expr::{Count, Expr, LetterExpr};
use factor_calc_core::scalar::{int, ExtRational, Rational};
use factor_calc_core::word::{Letter, Word};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenConfig {
    pub seed: u64,
    pub max_depth: u32,
    pub max_summands: usize,
    pub max_letters: usize,
    /// Largest denominator used for weights and scales.
    pub weight_denominator_bound: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig { seed: 1, max_depth: 3, max_summands: 3, max_letters: 6, weight_denominator_bound: 12 }
    }
}

impl GenConfig {
    pub fn with_seed(seed: u64) -> Self {
        GenConfig { seed, ..GenConfig::default() }
    }
}

pub struct Gen {
    cfg: GenConfig,
    rng: ChaCha8Rng,
}

const NAMES: [&str; 3] = ["Q1", "Q2", "Q3"];

impl Gen {
    pub fn new(cfg: GenConfig) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        Gen { cfg, rng }
    }

    pub fn config(&self) -> &GenConfig {
        &self.cfg
    }

    pub fn coin(&mut self, p: f64) -> bool {
        self.rng.gen_bool(p)
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }

    fn denominator(&mut self) -> u64 {
        self.rng.gen_range(1..=self.cfg.weight_denominator_bound.max(1))
    }

    /// Uniform-ish rational in `(0, max]`.
    pub fn fraction_of(&mut self, max: &Rational) -> Rational {
        let d = self.denominator();
        let n = self.rng.gen_range(1..=d);
        max * Rational::new(BigInt::from(n), BigInt::from(d))
    }

    /// Rational in `(0, 1)`.
    pub fn proper_fraction(&mut self) -> Rational {
        let d = self.denominator().max(2);
        let n = self.rng.gen_range(1..d);
        Rational::new(BigInt::from(n), BigInt::from(d))
    }

    /// `k` positive weights adding up to 1.
    pub fn weights(&mut self, k: usize) -> Vec<Rational> {
        let total = self.rng.gen_range(k as u64..=(self.cfg.weight_denominator_bound.max(k as u64)));
        let mut cuts: Vec<u64> = (1..total).collect();
        cuts.shuffle(&mut self.rng);
        let mut cuts: Vec<u64> = cuts.into_iter().take(k - 1).collect();
        cuts.sort_unstable();
        let mut out = Vec::with_capacity(k);
        let mut prev = 0;
        for c in cuts.into_iter().chain(std::iter::once(total)) {
            out.push(Rational::new(BigInt::from(c - prev), BigInt::from(total)));
            prev = c;
        }
        out
    }

    /// Free group parameter in `(1, 5]`.
    pub fn fgf_parameter(&mut self) -> Rational {
        Rational::one() + self.fraction_of(&int(4))
    }

    pub fn name(&mut self) -> String {
        NAMES[self.below(NAMES.len())].to_string()
    }

    pub fn fclass_leaf(&mut self) -> Expr {
        match self.below(20) {
            0..=3 => Expr::scalars(),
            4..=6 => Expr::Matrix(self.rng.gen_range(2..=4)),
            7..=12 => Expr::fgf(self.fgf_parameter()),
            13 => Expr::fgf_inf(),
            14..=16 => Expr::hyperfinite_factor(),
            _ => Expr::hyperfinite(),
        }
    }

    /// Direct sums and free products of class-F leaves, nested up to `max_depth`.
    pub fn fclass_expr(&mut self) -> Expr {
        let depth = self.cfg.max_depth;
        self.fclass_at(depth)
    }

    fn fclass_at(&mut self, depth: u32) -> Expr {
        if depth == 0 || self.coin(0.35) {
            return self.fclass_leaf();
        }
        if self.coin(0.6) {
            let k = self.rng.gen_range(2..=self.cfg.max_summands.max(2));
            let ws = self.weights(k);
            Expr::dsum(ws.into_iter().map(|w| (w, self.fclass_at(depth - 1))).collect())
        } else {
            let k = self.rng.gen_range(2..=3);
            Expr::free((0..k).map(|_| self.fclass_at(depth - 1)).collect())
        }
    }

    /// `L(F_r)`, `R` or a free product of free group factors.
    pub fn fclass_factor(&mut self) -> Expr {
        match self.below(4) {
            0 => Expr::hyperfinite_factor(),
            1 => Expr::free(vec![Expr::fgf(self.fgf_parameter()), Expr::fgf(self.fgf_parameter())]),
            2 => Expr::free(vec![self.fclass_expr(), Expr::fgf(self.fgf_parameter())]),
            _ => Expr::fgf(self.fgf_parameter()),
        }
    }

    fn letter_body(&mut self) -> Expr {
        match self.below(20) {
            0 | 1 => Expr::rescale(Expr::opaque(&self.name()), self.fraction_of(&int(2))),
            2 => Expr::fgf(self.fgf_parameter()),
            _ => Expr::opaque(&self.name()),
        }
    }

    fn letter(&mut self) -> LetterExpr {
        let sq = if self.coin(0.8) { self.fraction_of(&Rational::one()) } else { Rational::one() + self.fraction_of(&int(3)) };
        Expr::letter(sq, self.letter_body())
    }

    /// Expressions built from opaque factors: free subproducts, free products and rescalings.
    pub fn word_expr(&mut self) -> Expr {
        match self.below(6) {
            0..=2 => {
                let n = self.rng.gen_range(1..=self.cfg.max_letters.max(1));
                let mut letters: Vec<LetterExpr> = (0..n).map(|_| self.letter()).collect();
                if self.coin(0.2) {
                    let first = self.fraction_of(&Rational::one());
                    let ratio = self.proper_fraction();
                    letters.push(Expr::family(first, ratio, Count::Infinite, Expr::opaque(&self.name())));
                }
                let e = Expr::sub(Expr::opaque("N"), letters);
                if self.coin(0.5) {
                    Expr::free(vec![e, Expr::fgf(self.fgf_parameter())])
                } else {
                    e
                }
            }
            3 | 4 => {
                let k = self.rng.gen_range(2..=4);
                Expr::free((0..k).map(|_| Expr::opaque(&self.name())).collect())
            }
            _ => {
                let k = self.rng.gen_range(2..=3);
                let e = Expr::free((0..k).map(|_| Expr::opaque(&self.name())).collect());
                Expr::rescale(e, self.fraction_of(&int(2)))
            }
        }
    }

    /// A II₁ factor expression, class F or not.
    pub fn factor_expr(&mut self) -> Expr {
        if self.coin(0.3) {
            self.fclass_factor()
        } else {
            self.word_expr()
        }
    }

    /// A raw word over base `N` with at most `max_letters` letters at `t ≤ 1`.
    pub fn raw_word(&mut self) -> Word {
        let n = self.rng.gen_range(0..=self.cfg.max_letters);
        let mut w = Word::opaque_base("N");
        for _ in 0..n {
            let name = self.name();
            let c_sq = self.fraction_of(&int(2));
            let t_sq = self.fraction_of(&Rational::one());
            w = w.with_letter(Letter::opaque(&name, c_sq, t_sq));
        }
        if self.coin(0.7) {
            w.tail = ExtRational::Finite(self.fraction_of(&int(2)));
        }
        w
    }

    /// A legal free trade on `w`: the new `t²` lies in `(0, min(1, t² + tail)]`.
    pub fn legal_trade(&mut self, w: &Word) -> Option<(usize, Rational)> {
        if w.letters.is_empty() {
            return None;
        }
        let i = self.below(w.letters.len());
        let budget = match &w.tail {
            ExtRational::Finite(r) => &w.letters[i].t_sq + r,
            ExtRational::Infinity => Rational::one(),
        };
        let cap = if budget > Rational::one() { Rational::one() } else { budget };
        Some((i, self.fraction_of(&cap)))
    }

    /// An expression isomorphic to `e` by construction: operands and letters
    /// reordered, free group factors split by additivity.
    pub fn variant(&mut self, e: &Expr) -> Expr {
        match e {
            Expr::Fgf(ExtRational::Finite(r)) if r > &int(2) && self.coin(0.5) => {
                let r1 = Rational::one() + (r - int(2)) * self.proper_fraction();
                let r2 = r - &r1;
                Expr::free(vec![Expr::fgf(r1), Expr::fgf(r2)])
            }
            Expr::DirectSum(parts) => {
                let mut parts: Vec<_> = parts.iter().map(|(w, p)| (w.clone(), self.variant(p))).collect();
                parts.shuffle(&mut self.rng);
                Expr::DirectSum(parts)
            }
            Expr::FreeProduct(parts) => {
                let mut parts: Vec<_> = parts.iter().map(|p| self.variant(p)).collect();
                parts.shuffle(&mut self.rng);
                Expr::FreeProduct(parts)
            }
            Expr::ScaledProduct { base, letters } => {
                let mut letters = letters.clone();
                letters.shuffle(&mut self.rng);
                Expr::ScaledProduct { base: base.clone(), letters }
            }
            other => other.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use factor_calc_core::validate::well_formed;

    #[test]
    fn same_seed_same_stream() {
        let mut a = Gen::new(GenConfig::with_seed(7));
        let mut b = Gen::new(GenConfig::with_seed(7));
        for _ in 0..50 {
            assert_eq!(a.fclass_expr(), b.fclass_expr());
            assert_eq!(a.word_expr(), b.word_expr());
        }
    }

    #[test]
    fn weights_are_positive_and_sum_to_one() {
        let mut g = Gen::new(GenConfig::default());
        for k in 1..=5 {
            let ws = g.weights(k);
            assert_eq!(ws.len(), k);
            assert!(ws.iter().all(|w| w > &Rational::from_integer(0.into())));
            assert_eq!(ws.into_iter().sum::<Rational>(), Rational::one());
        }
    }

    #[test]
    fn generated_expressions_are_well_formed() {
        let mut g = Gen::new(GenConfig::with_seed(3));
        for _ in 0..300 {
            let e = g.fclass_expr();
            assert!(well_formed(&e).is_ok(), "{}", e);
            let e = g.factor_expr();
            assert!(well_formed(&e).is_ok(), "{}", e);
        }
    }
}

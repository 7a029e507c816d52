//! Rewrite certificates: each step names its rule, the rule's parameters,
//! and the states before and after. Replay re-runs every rule.

use std::fmt;

use crate::error::{EngineError, Result};
use crate::expr::Expr;
use crate::fclass::apply_fclass_rule;
use crate::print::scale_text;
use crate::scalar::Rational;
use crate::word::{apply_word_rule, Word};

/// Why `L(F_∞)`-absorption applies.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum License {
    /// The named opaque factor is assumed stable (`Q ≅ Q * L(F_∞)`).
    StableFactor(String),
    /// A letter family with ratio 1: infinitely many letters of equal size.
    DivergentFamily(usize),
    /// The free-group tail is `L(F_∞)`.
    InfiniteTail,
    /// A component was already stable.
    StableContext,
}

impl fmt::Display for License {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            License::StableFactor(n) => write!(f, "stable factor {}", n),
            License::DivergentFamily(j) => write!(f, "divergent family #{}", j),
            License::InfiniteTail => write!(f, "infinite tail"),
            License::StableContext => write!(f, "stable component"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Rule {
    DirectSumCanonical { path: Vec<usize> },
    FreeProductScalars { path: Vec<usize>, index: usize },
    FgfAdditivity { path: Vec<usize> },
    FreeProductKernel { path: Vec<usize> },
    RescaleFClass { path: Vec<usize>, sq: Rational },
    Assemble,
    AbsorbFLetter { letter: usize },
    AbsorbFFamily { family: usize },
    AbsorbFBase,
    PureFreeGroup,
    Desugar { letter: usize },
    AbsorbStable { license: License },
    Trade { letter: usize, new_t_sq: Rational },
    TradeFamily { family: usize, new_first_sq: Rational },
    PeelFamily { family: usize },
    MergeFamily { letter: usize, family: usize },
    RescaleWord { sq: Rational },
    SortLetters,
}

impl Rule {
    pub fn name(&self) -> &'static str {
        match self {
            Rule::DirectSumCanonical { .. } => "direct-sum normalization",
            Rule::FreeProductScalars { .. } => "free product with scalars",
            Rule::FgfAdditivity { .. } => "FGF additivity",
            Rule::FreeProductKernel { .. } => "class-F free product",
            Rule::RescaleFClass { .. } => "class-F rescaling",
            Rule::Assemble => "word assembly",
            Rule::AbsorbFLetter { .. } => "class-F letter absorption",
            Rule::AbsorbFFamily { .. } => "class-F family absorption",
            Rule::AbsorbFBase => "class-F base absorption",
            Rule::PureFreeGroup => "pure free group factor",
            Rule::Desugar { .. } => "large-letter desugaring",
            Rule::AbsorbStable { .. } => "L(F_inf) absorption",
            Rule::Trade { .. } => "free trade",
            Rule::TradeFamily { .. } => "family free trade",
            Rule::PeelFamily { .. } => "family peeling",
            Rule::MergeFamily { .. } => "family extension",
            Rule::RescaleWord { .. } => "word rescaling",
            Rule::SortLetters => "letter ordering",
        }
    }

    /// The identity the rule instantiates.
    pub fn anchor(&self) -> &'static str {
        match self {
            Rule::DirectSumCanonical { .. } => "weights of nested direct sums multiply; diffuse hyperfinite summands merge",
            Rule::FreeProductScalars { .. } => "A * C ≅ A",
            Rule::FgfAdditivity { .. } => "L(F_r) * L(F_s) ≅ L(F_{r+s})",
            Rule::FreeProductKernel { .. } => {
                "A * B ≅ D ⊕ (atoms α+β−1 for α+β > 1), D solved from fdim(A*B) = fdim(A) + fdim(B)"
            }
            Rule::RescaleFClass { .. } => "L(F_r)_t ≅ L(F_{1+(r−1)/t²}), R_t ≅ R, (M_n)_{k/n} ≅ M_k",
            Rule::Assemble => {
                "scaled products flatten by partition; N * A ≅ N * L(F_{fdim A}) for A in class F; \
                 (Q1*…*Qn*L(F_r))_t ≅ Q1_t*…*Qn_t*L(F_{r/t²+(n−1)(1/t²−1)})"
            }
            Rule::AbsorbFLetter { .. } => "N ⋆ [t, A] ≅ N * L(F_{t² fdim(A)}) for A in class F",
            Rule::AbsorbFFamily { .. } => "N ⋆ [t(k), A]_k ≅ N * L(F_{Σ t(k)² fdim(A)}) for A in class F",
            Rule::AbsorbFBase => "L(F_b) * L(F_r) ≅ L(F_{b+r}) with fdim(R) = 1",
            Rule::PureFreeGroup => "a word without factors is L(F_r), or R when r = 1",
            Rule::Desugar { .. } => "[t, Q] with t > 1 is the free factor Q_{1/t} * L(F_{t²−1})",
            Rule::AbsorbStable { .. } => {
                "N ⋆ [t(i), Q(i)] ≅ N * ⊛ Q(i)_{1/t(i)} when a component is stable or Σ t(i)² = ∞"
            }
            Rule::Trade { .. } => "(N * L(F_r)) ⋆ [t, Q] ≅ (N * L(F_{r−s²+t²})) ⋆ [s, Q_{s/t}] for r ≥ s² − t²",
            Rule::TradeFamily { .. } => "r′ = r + Σ (t(i)² − s(i)²) ≥ 0",
            Rule::PeelFamily { .. } => "[t(k), Q]_{k≥1} is [t(1), Q] together with [t(k), Q]_{k≥2}",
            Rule::MergeFamily { .. } => "[t(0), Q] together with [t(k), Q]_{k≥1} is [t(k), Q]_{k≥0}",
            Rule::RescaleWord { .. } => "((N * L(F_r)) ⋆ [t(i), Q(i)])_s ≅ (N_s * L(F_{r/s²})) ⋆ [t(i)/s, Q(i)]",
            Rule::SortLetters => "a free scaled product does not depend on letter order",
        }
    }

    pub fn bindings(&self) -> Vec<(&'static str, String)> {
        let path = |p: &Vec<usize>| {
            let parts: Vec<String> = p.iter().map(usize::to_string).collect();
            format!("[{}]", parts.join("."))
        };
        match self {
            Rule::DirectSumCanonical { path: p }
            | Rule::FgfAdditivity { path: p }
            | Rule::FreeProductKernel { path: p } => vec![("path", path(p))],
            Rule::FreeProductScalars { path: p, index } => vec![("path", path(p)), ("index", index.to_string())],
            Rule::RescaleFClass { path: p, sq } => vec![("path", path(p)), ("t", scale_text(sq))],
            Rule::AbsorbFLetter { letter } | Rule::Desugar { letter } => vec![("letter", letter.to_string())],
            Rule::AbsorbFFamily { family } | Rule::PeelFamily { family } => vec![("family", family.to_string())],
            Rule::AbsorbStable { license } => vec![("license", license.to_string())],
            Rule::Trade { letter, new_t_sq } => vec![("letter", letter.to_string()), ("s", scale_text(new_t_sq))],
            Rule::TradeFamily { family, new_first_sq } => {
                vec![("family", family.to_string()), ("s", scale_text(new_first_sq))]
            }
            Rule::MergeFamily { letter, family } => {
                vec![("letter", letter.to_string()), ("family", family.to_string())]
            }
            Rule::RescaleWord { sq } => vec![("s", scale_text(sq))],
            Rule::Assemble | Rule::AbsorbFBase | Rule::PureFreeGroup | Rule::SortLetters => vec![],
        }
    }

    pub fn apply(&self, state: &State) -> Result<State> {
        match (self, state) {
            (
                Rule::DirectSumCanonical { .. }
                | Rule::FreeProductScalars { .. }
                | Rule::FgfAdditivity { .. }
                | Rule::FreeProductKernel { .. }
                | Rule::RescaleFClass { .. },
                State::Expr(e),
            ) => Ok(State::Expr(apply_fclass_rule(self, e)?)),
            (_, State::Expr(e)) if *self == Rule::Assemble => Ok(State::Word(crate::word::assemble(e)?)),
            (_, State::Word(w)) => apply_word_rule(self, w),
            _ => Err(EngineError::MalformedCertificate(format!(
                "{} does not apply to an expression",
                self.name()
            ))),
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())?;
        let b = self.bindings();
        if !b.is_empty() {
            let parts: Vec<String> = b.iter().map(|(k, v)| format!("{} = {}", k, v)).collect();
            write!(f, " ({})", parts.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum State {
    Expr(Expr),
    Word(Word),
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            State::Expr(e) => write!(f, "{}", e),
            State::Word(w) => write!(f, "{}", w),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Step {
    pub rule: Rule,
    pub before: State,
    pub after: State,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Certificate {
    pub steps: Vec<Step>,
}

impl Certificate {
    pub fn push(&mut self, rule: Rule, before: State, after: State) {
        self.steps.push(Step { rule, before, after });
    }

    pub fn extend(&mut self, other: Certificate) {
        self.steps.extend(other.steps);
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn final_state(&self) -> Option<&State> {
        self.steps.last().map(|s| &s.after)
    }

    /// Re-runs every rule from `initial`; `Err` names the first failing step.
    pub fn check_from(&self, initial: &State) -> std::result::Result<(), String> {
        let mut cur = initial.clone();
        for (i, step) in self.steps.iter().enumerate() {
            if step.before != cur {
                return Err(format!("step {} ({}) starts from {}, expected {}", i + 1, step.rule.name(), step.before, cur));
            }
            let next = step.rule.apply(&cur).map_err(|e| format!("step {} ({}): {}", i + 1, step.rule.name(), e))?;
            if next != step.after {
                return Err(format!(
                    "step {} ({}) yields {}, certificate records {}",
                    i + 1,
                    step.rule.name(),
                    next,
                    step.after
                ));
            }
            cur = next;
        }
        Ok(())
    }

    pub fn replay(&self, initial: &Expr) -> Result<bool> {
        Ok(self.check_from(&State::Expr(initial.clone())).is_ok())
    }

    pub fn replay_from(&self, initial: &State) -> bool {
        self.check_from(initial).is_ok()
    }
}

impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.steps.is_empty() {
            return writeln!(f, "(no steps)");
        }
        for (i, s) in self.steps.iter().enumerate() {
            writeln!(f, "{}. {}", i + 1, s.rule)?;
            writeln!(f, "   by {}", s.rule.anchor())?;
            writeln!(f, "   {}", s.before)?;
            writeln!(f, "   => {}", s.after)?;
        }
        Ok(())
    }
}

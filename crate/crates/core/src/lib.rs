//! Exact symbolic engine for free products, free subproducts and free scaled
//! products of II₁ factors.
//!
//! Class-F algebras (finite-dimensional, hyperfinite, interpolated free group
//! factors and their direct sums) normalize to `L(F_r) ⊕ D`. Expressions over
//! opaque factors normalize to [`word::Word`]s. Every normalization emits a
//! [`cert::Certificate`] that replays rule by rule.

pub mod cert;
pub mod error;
pub mod expr;
pub mod fclass;
pub mod fdim;
pub mod iso;
pub mod print;
pub mod scalar;
pub mod validate;
pub mod word;

pub use cert::{Certificate, License, Rule, State, Step};
pub use error::{EngineError, Result};
pub use expr::{AssumptionSet, Count, Expr, GeometricFamily, LetterExpr, Mode};
pub use fclass::{normalize_fclass, rescale_fclass, DiffuseKind, DiffusePart, FNormalForm};
pub use fdim::fdim;
pub use iso::{iso_verdict, normalize, Normal, Verdict};
pub use scalar::{int, rat, ExtRational, Rational};
pub use validate::well_formed;
pub use word::{Body, Letter, Word};

//! Independent validation: seeded generators, invariant fuzzers,
//! chain-vs-closed-form comparison, certificate replay and shrinking.

pub mod checks;
pub mod gen;
pub mod shrink;

pub use checks::{
    chain_vs_closed_form, check_additivity, check_additivity_with, check_mode_monotonicity, check_rescale_laws,
    check_round_trip, check_trade_invariance, replay_certificate, run_suite, Counterexample, Report, SUITES,
};
pub use gen::{Gen, GenConfig};

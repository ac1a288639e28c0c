//! Relational pre-expectations: upper bounds on the Kantorovich distance
//! between the outputs of two runs of a program.
//!
//! [`Engine`] evaluates the operator pointwise, with exact optimal transport
//! at sampling sites or with user-chosen couplings. [`check_invariant`] and
//! [`check_async_invariant`] certify loop invariants on finite pair spaces.

mod check;
pub mod coupling;
mod engine;
mod probes;

pub use check::{
    check_async_invariant, check_invariant, rpe_exact, rpe_one_sided, rpe_with_specs, PairMode, PairSpace,
    RelExpTable,
};
pub use coupling::{Bijection, CouplingSpec, Specs};
pub use engine::{lift_exact, rpe_at, rpe_sample_bound, rpe_spec_at, Engine, PairFn, MAX_PAIRS};
pub use probes::{
    check_rule_property, check_samp_rule, continuity_probe, family_pair, linear, soundness_probe, RuleInstance,
    ExpRule,
};

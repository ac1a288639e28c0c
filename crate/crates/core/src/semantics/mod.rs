//! Exact denotational semantics: programs as maps from states to finite
//! sub-distributions over states.

mod denote;
mod dist;

pub use denote::{
    denote, denote_dist, denote_exact, eval_dist, small, Denotation, Status, MAX_BITS,
};
pub use dist::{JointDist, SubDist};

use crate::error::Result;
use crate::num::Ext;
use crate::state::State;

pub type LoopConfig = crate::config::Config;

pub fn dirac(s: State) -> SubDist {
    SubDist::dirac(s)
}

pub fn bind(mu: &SubDist, f: impl FnMut(&State) -> Result<SubDist>) -> Result<SubDist> {
    mu.bind(f)
}

pub fn expected(mu: &SubDist, f: impl FnMut(&State) -> Result<Ext>) -> Result<Ext> {
    mu.expected(f)
}

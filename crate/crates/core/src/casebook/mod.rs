//! Built-in case studies: mixing of card shuffles and of a hypercube walk,
//! a binomial sampler compared asynchronously, TD(0), SGD and PGD.
//!
//! ```
//! use kantorel::casebook::{make_case, Params};
//! use kantorel::config::Config;
//!
//! let case = make_case("hwalk", &Params::parse("N=2,K=2").unwrap()).unwrap();
//! assert!(case.check_canonical_invariant(&Config::default()).unwrap().holds());
//! ```

mod blocks;
mod cases;
mod mixing;
mod simulate;

pub use blocks::{block_decomposition, BlockDecomposition};
pub use cases::{
    all_bitvectors, all_perms, describe, exact_limit, make_case, sgd_data, sgd_gamma, sgd_test_point,
    td0_contraction, CaseKind, CaseStudy, Params, CASES, LOSS_SMOOTHNESS, SGD_LIPSCHITZ, TD0_PI, TD0_RW,
    TD0_TR,
};
pub use mixing::{
    mixing_curve, output_at, perm_distance, riffle_halving, sandwich, uniform_target, uniformity_artifacts,
    uniformity_check, MixMode, MixRow, Sandwich, UniformityReport, ALL_PAIRS_LIMIT,
};
pub use simulate::{
    coupled_simulate, maximal_coupling, pick, replay, simulate_pair, simulate_solo, stream_rng, substream, wilson,
    CoupledTrace, Draw, SimOptions, SimSummary, SIDE_JOINT, SIDE_LEFT, SIDE_RIGHT, Z95,
};

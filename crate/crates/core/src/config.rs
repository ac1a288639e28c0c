//! Engine configuration shared by all analyses.

use crate::num::Rat;

#[derive(Clone, Debug)]
pub struct Config {
    /// Cap on loop iterations and fixpoint rounds.
    pub max_iters: usize,
    /// Tolerance for float mode, for residual mass of loops that are not
    /// syntactically bounded, and for matching omega-invariant limits.
    pub epsilon: f64,
    /// Depth for omega-invariant checks.
    pub n_max: usize,
    /// Use the data-parallel paths when the `parallel` feature is on.
    pub parallel: bool,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            max_iters: 100_000,
            epsilon: 1e-9,
            n_max: 64,
            parallel: true,
        }
    }
}

impl Config {
    pub fn sequential() -> Config {
        Config {
            parallel: false,
            ..Config::default()
        }
    }

    pub fn epsilon_rat(&self) -> Rat {
        Rat::from_float(self.epsilon).unwrap_or_else(|| crate::num::rat(1, 1_000_000_000))
    }
}

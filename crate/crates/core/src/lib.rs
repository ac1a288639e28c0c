//! Exact analysis of probabilistic sensitivity for pWhile programs.
//!
//! The crate computes output distributions of small probabilistic programs,
//! Total Variation and Kantorovich distances between them, relational
//! pre-expectations (upper bounds on output distance), unary weakest
//! pre-expectations (exact values and lower bounds), and checks coupling
//! invariants mechanically on finite instances.
//!
//! ```
//! use kantorel::lang::parse_program;
//! use kantorel::semantics::{denote, LoopConfig};
//! use kantorel::state::{State, Value};
//!
//! let p = parse_program("x :~ uniform(0 .. 2)").unwrap();
//! let out = denote(&p.body, &State::new(), &LoopConfig::default()).unwrap();
//! assert_eq!(out.dist.len(), 2);
//! ```

pub mod casebook;
pub mod config;
pub mod error;
pub mod lang;
pub mod num;
pub mod par;
pub mod report;
pub mod rpe;
pub mod semantics;
pub mod state;
pub mod transport;
pub mod wpe;

pub use error::{Error, Result};
pub use num::{Ext, Rat};
pub use state::{State, Value};

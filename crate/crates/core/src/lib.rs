//! Learning logically definable node classifiers on labeled trees.
//!
//! The crate has two learners. The MSO learner compiles a formula into a
//! bottom-up tree automaton, indexes the background tree along its heavy
//! paths with factorization trees over a powerset monoid, and then answers
//! training sets by updating and tracing that index. The quantifier-free
//! learner only touches the tree through counted oracles and searches a
//! small sufficient set of candidate parameters.
//!
//! Brute-force oracles for both live in [`brute`].

pub mod automata;
pub mod brute;
pub mod error;
pub mod exec;
pub mod factorization;
pub mod gen;
pub mod heavy_path;
pub mod learner;
pub mod monoid;
pub mod mso;
pub mod online;
pub mod oracle;
pub mod qf;
pub mod tree;

pub use error::{Error, Result};
pub use exec::Exec;
pub use tree::{ArityMode, LabeledTree, NodeId, Polarity, Symbol, TrainingSet};

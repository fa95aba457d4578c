//! Monadic second-order formulas over trees: syntax, compilation into tree
//! automata, and a brute-force evaluator used as ground truth.

pub mod compile;
pub mod eval;
pub mod formula;

pub use compile::{compile, compile_param_formula, compile_tracks, symbols_for, CompileOptions, TrackAutomaton};
pub use eval::{brute_eval, Assignment, Value};
pub use formula::{make_psi, Formula, ParamFormula, Rel};

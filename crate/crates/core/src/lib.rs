//! A small quantum process calculus: parsing, linear typing, probabilistic
//! operational semantics over a state-vector simulator, and branching
//! bisimulation checking.

pub mod cli;
pub mod equiv;
pub mod qstate;
pub mod semantics;
pub mod syntax;
pub mod types;

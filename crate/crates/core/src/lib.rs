//! Core algorithms for randomization-based input-injection prevention:
//! substitution pads and record stores, the mini-language frontend, the
//! bidirectional command-composition analysis, wrapper placement, the three
//! randomized subsystems, and the scenario runtime that ties them together.

pub mod builtins;
pub mod dataflow;
pub mod instrument;
pub mod minilang;
pub mod pad;
pub mod prng;
pub mod progen;
pub mod runtime;
pub mod scan;
pub mod shell;
pub mod sql;
pub mod tcs;
pub mod xml;

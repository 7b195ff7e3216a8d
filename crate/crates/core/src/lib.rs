pub mod cli;
pub mod compose;
pub mod gadgets;
pub mod ir;
pub mod macros;
pub mod parser;
pub mod probes;
pub mod semantics;
pub mod suites;
pub mod tower;
pub mod translate;

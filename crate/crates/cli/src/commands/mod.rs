pub mod bench;
pub mod eval;
pub mod run;
pub mod sweep;
pub mod synth;
pub mod viz;

pub mod benchmark;
pub mod evaluate;
pub mod predict;
pub mod report;
pub mod synth;
pub mod train;

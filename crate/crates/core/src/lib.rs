pub mod cli;
pub mod experiments;
pub mod numerics;
pub mod predict;
pub mod wpoly;

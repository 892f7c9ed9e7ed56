pub mod adjudicate;
pub mod exec;
pub mod harness;
pub mod netir;
pub mod report;
pub mod score;
pub mod solvers;
pub mod vnnlib;

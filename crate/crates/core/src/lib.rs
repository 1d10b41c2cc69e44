pub mod algebra;
pub mod cli;
pub mod hopf;
pub mod multiplier;
pub mod normalform;
pub mod vfield;

pub mod canonical;
pub mod dynamics;
pub mod error;
pub mod hamiltonian;
pub mod higher_order;
pub mod lagrangian;
pub mod expr;
pub mod field_theory;
pub mod report;
pub mod rng;
pub mod solve;

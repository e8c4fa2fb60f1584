// Negated comparisons reject NaN inputs.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod candidate;
pub mod cli;
pub mod criteria;
pub mod error;
pub mod grid;
pub mod kernel;
pub mod nonexistence;
pub mod params;
pub mod pohozaev;
pub mod quadrature;
pub mod solver;

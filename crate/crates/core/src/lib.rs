#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dualgen;
pub mod expr;
pub mod generator;
pub mod qmatrix;
pub mod quad;
pub mod simulate;

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod mesh;
pub mod quadrature;
pub mod field;
pub mod noise;
pub mod solver;
pub mod analysis;
pub mod io;

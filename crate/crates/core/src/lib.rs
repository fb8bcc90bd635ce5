#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod criteria;
pub mod design;
pub mod error;
pub mod harmonics;
pub mod orthopoly;
pub mod parallel;
pub mod quadrature;
pub mod special;
pub mod symmetry;
pub mod viz_export;

pub use error::{Error, Result};

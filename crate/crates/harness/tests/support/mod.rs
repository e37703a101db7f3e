#![allow(dead_code)]

pub mod ice_matrix;
pub mod nat_oracle;

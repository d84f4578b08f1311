#![allow(dead_code, clippy::needless_range_loop, clippy::eq_op)]

pub mod criteria;
pub mod exhaustive;

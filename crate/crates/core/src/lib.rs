//! Durability and availability models for erasure-coded storage.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod avail;
pub mod closedform;
pub mod coldstore;
pub mod ctmc;
pub mod errors;
pub mod fitdata;
pub mod profile;
pub mod pyramid;
pub mod sim;
pub mod tables;

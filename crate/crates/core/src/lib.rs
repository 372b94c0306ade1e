//! Exact p-adic arithmetic, Wach modules and filtered φ-modules for two-dimensional
//! crystalline families.

#![allow(clippy::needless_range_loop)]

pub mod config;
pub mod family;
pub mod filtered;
pub mod padic;
pub mod par;
pub mod perturbation;
pub mod pipeline;
pub mod reduction;
pub mod residue;
pub mod runner;
pub mod selftest;
pub mod series;
pub mod wach;

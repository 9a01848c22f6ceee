//! Travelling waves of the nonlocal Korteweg-de Vries-Burgers equation
//!
//! ```text
//! u_t + (u²)_x = (D^α u)_x + τ u_xxx
//! ```
//!
//! together with numerical diagnostics for the linearisation at the left
//! far-field state: the characteristic roots, the singular quadratic form
//! `I[v]`, the energy identity and the null space of the linearised operator.

pub mod charroots;
pub mod dense;
pub mod error;
pub mod fracops;
pub mod grid;
pub mod linops;
pub mod quadform;
pub mod special;
pub mod twsolve;

pub use error::{Error, Result};

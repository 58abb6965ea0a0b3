//! Coarse Ricci curvature lower bounds for pure jump Markov processes and
//! interacting particle systems, with exact optimal-transport oracles and a
//! coupled stochastic simulator to check them.
//!
//! The central quantity is the functional
//! `J^{x,y}(m1, m2) = W(m1 + m2(E) δx, m2 + m1(E) δy) - (m1(E) + m2(E)) d(x, y)`,
//! whose normalized sup over configuration pairs bounds the curvature from below.

pub mod error;
pub mod space;
pub mod transport;
pub mod jfunc;
pub mod curvature;
pub mod models;
pub mod sim;

pub use error::{Error, Result};

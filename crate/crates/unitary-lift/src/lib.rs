//! Exact lifting of Cuntz-semigroup morphisms out of `Lsc(T, ℕ̄)` to diagonal
//! unitaries over finite-dimensional algebras and over matrix algebras on
//! metric graphs, together with the metrics, determinant invariants and
//! certificates used to check them.

pub mod circle_lsc;
pub mod cu_morphisms;
pub mod determinant;
pub mod error;
pub mod fd_lift;
pub mod graph_lift;
pub mod graph_space;
pub mod rational;
pub mod sample;
pub mod spectral_oracle;

pub use error::{Error, Result};

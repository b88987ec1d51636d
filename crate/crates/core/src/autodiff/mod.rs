//! Minimal reverse-mode automatic differentiation over dense `f64` arrays.
//!
//! A [`Graph`] borrows a [`ParamStore`] and records every primitive applied
//! to it; [`Graph::backward`] replays the tape in reverse and returns
//! gradients for every stored parameter (zeros for parameters the loss does
//! not reach) plus any free [`Graph::variable`] leaves.
//!
//! A graph lives on one thread. Separate graphs over the same store can be
//! evaluated in parallel since the store is only read.

mod gradcheck;
mod graph;
mod ops;
mod params;
mod tensor;

pub use gradcheck::{gradient_check, GradCheckReport, MAGNITUDE_FLOOR};
pub use graph::{Gradients, Graph, Var};
pub use ops::{forward, Primitive};
pub use params::{ParamId, ParamStore};
pub use tensor::Tensor;

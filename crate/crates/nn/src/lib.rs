//! A deliberately small function-approximation stack: row-major matrices,
//! dense and tanh-recurrent layers with hand-written backpropagation
//! (including through time), a categorical policy head and Adam.
//!
//! Everything is `f64` so that analytic gradients can be checked against
//! central finite differences at tight tolerances.

pub mod adam;
pub mod categorical;
pub mod checkpoint;
mod error;
pub mod layers;
pub mod matrix;
pub mod network;

pub use adam::AdamState;
pub use checkpoint::{Checkpoint, NamedArray};
pub use error::{NnError, Result};
pub use layers::{Activation, DenseLayer, RecurrentCell};
pub use matrix::{orthogonal_init, Matrix};
pub use network::{Gradients, NetSpec, SequenceCache, SequenceNet};

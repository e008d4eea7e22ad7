//! Distributed robust exact differentiation over networks.

// `!(x > 0.0)` is how NaN gets rejected; index loops mirror the maths.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod gains;
pub mod graph;
pub mod kernel;
pub mod presets;
pub mod properties;
pub mod protocol;
pub mod signals;
pub mod sim;
pub mod trigger;

pub use error::{Error, Result};
pub use gains::{CertifiedConstants, GainSet};
pub use graph::{Graph, GraphSpec};
pub use kernel::{AbstractState, Coupling};
pub use signals::{SignalBank, SignalSource};
pub use sim::{integrate, SimConfig, Trace};
pub use trigger::ThresholdRule;

//! Exact input derivatives (orders 1 and 2 per axis) and parameter gradients
//! of losses built from them.

mod jet;
mod tape;

pub use jet::{jet_apply, Axis, Component, Directions, ElementaryOp, Jet};
pub use tape::{NodeId, Tape};

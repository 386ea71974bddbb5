//! Geodesic geometry, measure contraction and inversion plans on model metric measure spaces.
//!
//! Spaces implement [`space::MetricSpace`] and are built by name from a [`space::SpaceRegistry`].
//! Measures are weighted particle clouds ([`measure::DiscreteMeasure`]) with an optional analytic
//! descriptor.

// `!(x > 0.0)` style guards reject NaN along with the out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod euclid;
pub mod heisenberg;
pub mod io;
pub mod mcpcheck;
pub mod measure;
pub mod modelspaces;
pub mod plans;
pub mod space;
pub mod transport;

pub use error::{Error, Result};
pub use measure::{Coupling, DiscreteMeasure, Point, SpaceTag};
pub use space::{space_for, MetricSpace, SpaceRegistry};

//! Soap films spanning inextensible elastic loops.
//!
//! The crate relaxes a triangulated film bounded by a bending-resistant,
//! length-constrained filament, and checks the relaxed shapes against the
//! closed-form flat-disk stability thresholds and the weakly nonlinear
//! twisted-saddle family.
//!
//! * [`mesh`], [`io`]: hex-lattice disks, validation, OBJ/PLY.
//! * [`energy`]: discrete bending + spring energy and its gradient.
//! * [`optimizer`]: conjugate gradient relaxation with length-penalty escalation.
//! * [`diffgeo`]: boundary curvature decomposition, angle defects, Frenet analysis.
//! * [`stability`]: flat-disk solution and buckling thresholds.
//! * [`asymptotic`]: the twisted-saddle trial family and its series.
//! * [`sweep`]: continuation in kL³/α, transition detection and scaling fits.

// `!(x > 0.0)` is how the range checks reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotic;
pub mod diffgeo;
pub mod energy;
pub mod error;
pub mod io;
pub mod mesh;
pub mod optimizer;
pub mod registry;
pub mod stability;
pub mod sweep;

pub use error::{Error, Result};
pub use mesh::{Configuration, TriMesh, Vec3};

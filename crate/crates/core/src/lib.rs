//! Certified numerical analysis of attractors of contracting similitude
//! systems: attractor approximations with error radii, overlap and boundary
//! witnesses, invariance verdicts, measure interval estimates, dimension
//! estimators and a cross-checking verdict battery.

pub mod analysis;
pub mod attractor;
pub mod boundary;
pub mod codespace;
pub mod dyadic;
pub mod error;
pub mod fixtures;
pub mod grid;
pub mod measure;
pub mod spaces;

pub use attractor::{AttractorApprox, PointSet};
pub use codespace::{Address, CodePoint, CylinderFamily, RatioTable};
pub use dyadic::Dyadic;
pub use error::{Error, Result};
pub use measure::IntervalEstimate;
pub use spaces::{Backend, IfsSpec, Point, SeqPoint, SequenceStep, Similitude};

//! Weak KAM solutions, barriers and small-noise landscapes for gradient
//! dynamics `dX = -U'(X) dt + sqrt(2 eps) dB` on the circle.

pub mod barriers;
pub mod curve;
pub mod dynamics;
pub mod evolution;
pub mod landscape;
pub mod potential;
pub mod stochastic;
pub mod viscosity;

pub use barriers::{BarrierTable, LeastActionCurve};
pub use dynamics::{Trajectory, TrajectoryKind};
pub use evolution::{Scheme, SchemeConfig};
pub use curve::{Kink, KinkKind, Piece, PiecewiseCurve, Segment};
pub use landscape::{BoundaryData, Landscape, Provenance};
pub use potential::{CriticalPointSet, CriticalRef, Potential, TrigSeries, TrigTerm};
pub use stochastic::{ChainModel, GridFunction};
pub use viscosity::{Candidate, PiecewiseLinear, ViscosityReport};

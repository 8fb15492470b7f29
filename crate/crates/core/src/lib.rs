//! Two-stroke bosonic heat engines driven by a polynomial two-mode
//! coupling `exp(theta (a^dag^n b^m - a^n b^dag^m))`.
//!
//! * [`fock`]: truncated ladder operators and thermal states.
//! * [`exact`]: truncated-Fock oracle for the joint work/heat statistics.
//! * [`perturbative`]: closed forms at second and fourth order in `theta`.
//! * [`thermo`]: regimes, entropy production and TUR bounds.
//! * [`optimize`]: working-point optimizers.
//! * [`sweep`]: JSON-configured parameter sweeps and CSV output.

pub mod distribution;
pub mod error;
pub mod exact;
pub mod fock;
pub mod par;
pub mod params;
pub mod optimize;
pub mod perturbative;
pub mod sweep;
pub mod thermo;

pub use distribution::{moments_of, Method, MomentReport, OracleDiagnostics, WorkHeatDistribution, WorkPoint};
pub use error::{EngineError, Result};
pub use exact::{OracleTolerances, TruncationConfig};
pub use params::{Coupling, EngineParams, Order, ShgVariant, ThermalOccupations};

//! Piecewise-linear path algebra with gauge holonomy and the differential
//! calculus of path functionals.
//!
//! The crate is organized bottom-up:
//!
//! * [`paths`]: points, paths, loops, and the word algebra (composition,
//!   inversion, reduction modulo retraces, thin equivalence, transport of
//!   loops along paths).
//! * [`gauge`]: affine matrix-valued connection fields, field strength, and
//!   holonomy by fixed-step RK4 integration of the transport equation.
//! * [`calculus`]: finite-difference derivatives of path functionals with
//!   Richardson extrapolation: endpoint extension, section and connection
//!   derivatives, the loop derivative, and the derivative commutator.
//! * [`verify`]: deterministic randomized checks of the structural
//!   identities relating all of the above, aggregated into reports.
//! * [`formats`]: text formats for paths, fields, reports, and tolerance
//!   overrides.

pub mod calculus;
pub mod error;
pub mod formats;
pub mod gauge;
pub mod paths;
pub mod verify;

pub use error::{Error, Result};

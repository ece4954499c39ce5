//! Exact and Monte Carlo verification of Bell-type correlation models.
//!
//! The crate implements the quantum singlet prediction for photon
//! polarization pairs together with three hidden-variable models of it:
//! two retrocausal toy-models whose λ-distribution depends on the analyzer
//! settings, and a measurement-independent local baseline. For each model it
//! can
//!
//! * evaluate the joint outcome distribution exactly ([`evaluator::combine`]),
//! * simulate trials reproducibly ([`montecarlo::run_trials`]),
//! * compute CHSH values and scan for their maximum ([`analysis::chsh_scan`]),
//! * measure no-signaling violations ([`analysis::no_signaling_deviation`]),
//! * compute how much λ knows about the settings ([`analysis::mutual_information`]).
//!
//! The [`harness`] module drives all of it from JSON manifests and backs the
//! `bellcheck` command-line tool.
//!
//! ```
//! use bellcheck::{Angle, Model};
//!
//! let a = Angle::new(0.0).unwrap();
//! let b = Angle::new(std::f64::consts::FRAC_PI_8).unwrap();
//! let hall = Model::hall().joint(a, b).unwrap();
//! let qm = Model::quantum().joint(a, b).unwrap();
//! assert!(hall.tv_distance(&qm) < 1e-10);
//! ```

pub mod analysis;
pub mod angle;
pub mod error;
pub mod evaluator;
pub mod harness;
pub mod joint;
pub mod law;
pub mod model;
pub mod montecarlo;
pub mod quadrature;
pub mod tolerance;

pub use angle::{angular_distance, reduce_angle, Angle, Outcome};
pub use error::{Error, Result};
pub use joint::{JointDist, Wing};
pub use law::{LambdaLaw, LawKind};
pub use model::{HiddenVariableModel, Model};

// The guide's snippets run as doc-tests, one module per chapter.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/angles.md")]
    mod angles {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/exact.md")]
    mod exact {}
    #[doc = include_str!("../../../book/src/monte-carlo.md")]
    mod monte_carlo {}
    #[doc = include_str!("../../../book/src/analysis.md")]
    mod analysis {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

//! Numeric tolerances shared by the library, the harness and the tests.

/// Exact algebraic identities (sums of closed-form terms).
pub const EXACT: f64 = 1e-12;

/// Quantities obtained by piecewise integration.
pub const INTEGRATED: f64 = 1e-10;

/// Negative rounding noise tolerated before a probability is clamped to zero.
pub const ROUNDING_FLOOR: f64 = 1e-14;

/// Two atom positions closer than this on the circle are the same atom.
pub const ATOM_MERGE: f64 = 1e-12;

/// Breakpoints closer than this are deduplicated.
pub const BREAKPOINT_MERGE: f64 = 1e-14;

/// Closed-form evaluation against the adaptive-quadrature fallback.
pub const QUADRATURE_CROSS_CHECK: f64 = 1e-8;

/// CHSH scan optimum versus the analytic bound.
pub const CHSH_SCAN: f64 = 1e-6;

/// Stop refining a CHSH scan once a full coordinate pass gains less than this.
pub const CHSH_REFINE_STOP: f64 = 1e-9;

/// Ceiling on the information λ carries about the settings in the Hall model.
pub const HALL_MI_CEILING_BITS: f64 = 0.07;

/// Piecewise-exact mutual information versus the fine-grid oracle.
pub const MI_GRID_AGREEMENT_BITS: f64 = 1e-6;

/// Monte Carlo cells must lie within this many standard errors of the exact value.
pub const MC_SIGMA: f64 = 3.0;

/// Significance level of the chi-square goodness-of-fit test.
pub const CHI_SQUARE_ALPHA: f64 = 1e-3;

/// A signaling model must show at least this marginal deviation.
pub const SIGNALING_DETECTION: f64 = 0.01;

//! Flow-based sum-of-squares relaxations for shortest path with vector costs.
//!
//! The library covers the full pipeline at desk scale:
//!
//! * directed multigraphs with vector edge costs, series-parallel
//!   construction/recognition and the layered-graph transform ([`graph`]),
//! * multilinear polynomial algebra over Boolean edge variables and the
//!   relaxation's objective/constraint polynomials ([`poly`]),
//! * pseudo-expectations: evaluation, conditioning, moment matrices,
//!   feasibility and majorization checks ([`pseudoexp`]),
//! * assembly of the moment relaxation and a deterministic operator-splitting
//!   solver ([`sdp`]),
//! * the randomized rounding algorithms and the group ATSP / group Steiner
//!   wrappers ([`rounding`]),
//! * partitions, multidimensional Bell numbers and the iterated Poisson
//!   process ([`combinatorics`]),
//! * exact baselines: brute force, scalarized shortest path, a label-setting
//!   heuristic transcription, and exact rounding-law enumeration ([`oracles`]),
//! * instance generators for the tightness, lattice, congestion and
//!   counterexample families ([`instances`]),
//! * JSON formats ([`io`]) and runnable property suites ([`verify`]).
//!
//! Numeric code is generic over [`scalar::Scalar`]; the two instantiations
//! used throughout are [`Real`] (solver arithmetic) and [`Exact`] (rational
//! arithmetic for oracle-grade checks).

pub mod combinatorics;
pub mod error;
pub mod graph;
pub mod instances;
pub mod io;
pub mod oracles;
pub mod poly;
pub mod pseudoexp;
pub mod rng;
pub mod rounding;
pub mod scalar;
pub mod sdp;
pub mod verify;

pub use error::Error;
pub use scalar::Scalar;

/// Floating-point scalar used by the SDP solver and samplers.
pub type Real = f64;

/// Arbitrary-precision rational scalar used on exact oracle paths.
pub type Exact = num_rational::BigRational;

/// Result alias for fallible library operations.
pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Numeric tolerances shared across feasibility checks, conditioning and
/// rounding. Defaults reflect the solver noise floor at desk scale.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    /// Absolute floor on the minimum moment-matrix eigenvalue.
    pub psd: f64,
    /// Absolute bound on affine constraint residuals.
    pub residual: f64,
    /// Below this mass, conditioning is refused as conditioning-on-null.
    pub condition_null: f64,
    /// Sampled distributions are renormalized when their total deviates from
    /// one by at most this much; larger deviations are an error.
    pub renormalize: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            psd: 1e-8,
            residual: 1e-8,
            condition_null: 1e-9,
            renormalize: 1e-6,
        }
    }
}

//! Grid-free recovery of signed spike trains from Chebyshev moments, and of
//! non-uniform spline knots from a low-degree polynomial approximation plus
//! boundary data.
//!
//! The crate is `no_std` (with `alloc`); the default `std` feature only
//! switches the linear-algebra backend to its `std` build.

#![no_std]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod blasso;
pub mod certificate;
pub mod cheb;
pub mod diagnostics;
pub mod error;
pub mod measure;
pub mod observation;
pub mod sdp;
pub mod spline;

pub use blasso::{solve_blasso, verify_first_order, BlassoOptions, KktResiduals, PrimalSolution};
pub use certificate::{build_certificate, verify_certificate, Certificate, CertificateKind, CertificateReport};
pub use cheb::{arccos_distance, endpoint_weight, eval_phi, eval_poly, unit_level_roots, ChebPoly};
pub use diagnostics::{recovery_report, theorem2_report, RecoveryReport, Theorem2Report};
pub use error::{Error, Result};
pub use measure::{edge_distance, min_separation, moments, separation_ok, tv_norm, DiscreteMeasure};
pub use observation::{lambda_algorithm, lambda_rice, simulate, Observation};
pub use spline::{integrate_from_spikes, BoundaryVector, NonUniformSpline};

//! Companding scalar quantizers for a Gaussian source whose compressor is the
//! optimal Gaussian compressor or a first-degree or quadratic spline fitted to
//! it on a handful of equal-width segments.
//!
//! The crate covers the whole pipeline: the compressor models
//! ([`compressor`]), codebook construction ([`design`]), analytic and
//! simulated distortion ([`distortion`]), and the table and curve data built
//! from sweeps over the number of levels ([`report`]).
//!
//! ```
//! use compandor::{Design, DesignConfig, ModelKind, evaluate_design};
//!
//! let config = DesignConfig::new(128, ModelKind::QuadraticSpline);
//! let report = evaluate_design(&config).unwrap();
//! assert!(report.sqnr_db > 37.0);
//!
//! let design = Design::build(config).unwrap();
//! let y = design.quantize(0.7);
//! assert!((y - 0.7).abs() < design.codebook.step);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod compressor;
pub mod design;
pub mod distortion;
pub mod error;
pub mod report;
pub mod special;

pub use compressor::{
    fit_linear_spline, fit_quadratic_spline, solve_quadratic_system, Compressor, CompressorModel,
    LinearSplineCompressor, ModelDump, ModelKind, OptimalCompressor, QuadraticPiece,
    QuadraticSplineCompressor, SegmentGrid,
};
pub use design::{
    allocate_levels, build_codebook, build_segment_grid, centroid_overload_level,
    support_threshold, Codebook, Design, DesignConfig, LevelAllocation,
};
pub use distortion::{
    evaluate_design, granular_distortion, granular_distortion_oracle, monte_carlo_sqnr,
    overload_distortion_closed, overload_distortion_exact, quantize_sample, sqnr, DistortionReport,
    MonteCarloReport,
};
pub use error::{Error, Result};
pub use special::{GaussianParams, QuadratureSpec};

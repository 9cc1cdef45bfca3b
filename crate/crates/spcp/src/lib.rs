//! Model-free spatial prediction intervals.
//!
//! This crate combines Kriging (Gaussian-process interpolation under a
//! Matérn covariance) with conformal prediction to produce prediction
//! intervals whose coverage does not depend on the Gaussian model being
//! correct. Three interval constructions are provided:
//!
//! - **GSCP** — global spatial conformal prediction: every observation
//!   contributes equally to the plausibility of a candidate response.
//! - **LSCP** — local spatial conformal prediction: only the `m` nearest
//!   observations take part.
//! - **sLSCP** — smoothed LSCP: all observations take part, weighted by a
//!   Gaussian kernel in distance to the prediction location.
//!
//! The non-conformity score is the squared standardized Kriging residual,
//! for which the plausibility contour has an exact closed form: each
//! observation contributes one interval `[a_i, b_i]` of candidate values
//! (the roots of a concave quadratic), and the contour is a step function
//! assembled from those intervals. No candidate grid is needed, although a
//! grid-scan fallback exists for user-supplied scores.
//!
//! The [`simulate`] module generates the Gaussian and non-Gaussian test
//! fields used by the benchmark harness in [`evaluate`]; [`ingest`] reads
//! external CSV datasets.

pub mod conformal;
pub mod covariance;
pub mod error;
pub mod evaluate;
pub mod ingest;
pub mod kriging;
pub mod simulate;
pub mod special;
pub mod variogram;

pub use conformal::{
    choose_m, contour_from_breakpoints, grid_scan_contour, gscp_contour, gscp_interval,
    kernel_weights, lscp_interval, quadratic_breakpoints, slscp_contour, slscp_interval,
    ContourWeights, KernelWeights, NonConformity, PlausibilityContour, PredictionSet,
};
pub use covariance::{
    covariance_matrix, matern_correlation, precision_matrix, CovarianceMatrix, MaternParams,
    PrecisionMatrix,
};
pub use error::{Error, Result};
pub use evaluate::{interval_score, loo_evaluate, select_bandwidth, EvalConfig, EvalReport, Method};
pub use kriging::{kriging_interval, loo_predictions, predict_at, LooPrediction, SpatialDataset};
pub use simulate::{generate_scenario, sample_gp, sample_uniform_locations, ScenarioSpec};
pub use variogram::{empirical_variogram, fit_matern, EmpiricalVariogram, MaternFit};

use serde::{Deserialize, Serialize};

/// A planar location. Coordinates are unitless; simulated scenarios live in
/// the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Squared Euclidean distance. Exact in the sense that equal inputs
    /// produce bit-equal outputs, which the nearest-neighbour tie rules
    /// rely on.
    pub fn dist2(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn dist(&self, other: &Point) -> f64 {
        self.dist2(other).sqrt()
    }
}

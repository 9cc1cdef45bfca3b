//! Matérn correlation, covariance-matrix assembly, and precision matrices.

pub mod bessel;

use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::ln_gamma;
use crate::Point;

/// Correlations below this are treated as exact zeros to keep subnormal
/// noise out of the matrices.
const CORRELATION_FLOOR: f64 = 1e-300;

/// Matérn covariance parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaternParams {
    /// Nugget variance τ² (location-independent noise), >= 0.
    pub nugget: f64,
    /// Partial sill σ² (variance of the correlated component), >= 0.
    pub partial_sill: f64,
    /// Correlation range φ, > 0.
    pub range: f64,
    /// Smoothness κ, > 0.
    pub smoothness: f64,
}

impl MaternParams {
    pub fn new(nugget: f64, partial_sill: f64, range: f64, smoothness: f64) -> Result<Self> {
        let p = MaternParams {
            nugget,
            partial_sill,
            range,
            smoothness,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (v, name) in [
            (self.nugget, "nugget"),
            (self.partial_sill, "partial_sill"),
            (self.range, "range"),
            (self.smoothness, "smoothness"),
        ] {
            if !v.is_finite() {
                return Err(Error::NonFinite("matern parameter"));
            }
            let _ = name;
        }
        if self.nugget < 0.0 || self.partial_sill < 0.0 {
            return Err(Error::InvalidParam(
                "nugget and partial_sill must be >= 0".into(),
            ));
        }
        if self.range <= 0.0 || self.smoothness <= 0.0 {
            return Err(Error::InvalidParam(
                "range and smoothness must be > 0".into(),
            ));
        }
        if self.nugget + self.partial_sill <= 0.0 {
            return Err(Error::InvalidParam(
                "nugget + partial_sill must be > 0".into(),
            ));
        }
        Ok(())
    }

    /// Marginal variance σ² + τ².
    pub fn sill(&self) -> f64 {
        self.nugget + self.partial_sill
    }
}

/// Matérn correlation
/// ρ(d) = 2^{1-κ} Γ(κ)^{-1} (d√(2κ)/φ)^κ K_κ(d√(2κ)/φ),
/// extended by continuity to ρ(0) = 1.
pub fn matern_correlation(d: f64, range: f64, smoothness: f64) -> Result<f64> {
    if !d.is_finite() || !range.is_finite() || !smoothness.is_finite() {
        return Err(Error::NonFinite("matern_correlation argument"));
    }
    if d < 0.0 {
        return Err(Error::InvalidParam(format!("distance must be >= 0: {d}")));
    }
    if range <= 0.0 || smoothness <= 0.0 {
        return Err(Error::InvalidParam(
            "range and smoothness must be > 0".into(),
        ));
    }
    if d == 0.0 {
        return Ok(1.0);
    }
    let t = d * (2.0 * smoothness).sqrt() / range;
    let k = bessel::bessel_k(smoothness, t)?;
    if k == 0.0 {
        return Ok(0.0);
    }
    if !k.is_finite() {
        // K overflows only via its small-argument term ~ Γ(κ)/2 (2/t)^κ,
        // where 1 - ρ is itself far below f64 resolution.
        return Ok(1.0);
    }
    let pref = ((1.0 - smoothness) * std::f64::consts::LN_2 - ln_gamma(smoothness)
        + smoothness * t.ln())
    .exp();
    let rho = pref * k;
    if rho < CORRELATION_FLOOR {
        Ok(0.0)
    } else {
        Ok(rho.min(1.0))
    }
}

/// Dense covariance matrix of a location set under [`MaternParams`].
#[derive(Debug, Clone)]
pub struct CovarianceMatrix {
    matrix: DMatrix<f64>,
}

impl CovarianceMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }
}

/// Assemble Σ with entries σ²ρ(‖s_i − s_j‖) + 1{i=j}τ².
///
/// Correlations are memoised on the exact squared distance, which collapses
/// the bulk of the Bessel evaluations on gridded data. Duplicate locations
/// are rejected when the nugget is zero since the matrix would be singular
/// and jitter would distort the residual ranks downstream.
pub fn covariance_matrix(locations: &[Point], params: &MaternParams) -> Result<CovarianceMatrix> {
    params.validate()?;
    if locations.len() < 2 {
        return Err(Error::Dataset(format!(
            "need at least 2 locations, got {}",
            locations.len()
        )));
    }
    if locations.iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFinite("location coordinate"));
    }

    let n = locations.len();
    let sill = params.sill();
    let mut m = DMatrix::zeros(n, n);
    let mut memo: HashMap<u64, f64> = HashMap::new();

    for i in 0..n {
        m[(i, i)] = sill;
        for j in (i + 1)..n {
            let d2 = locations[i].dist2(&locations[j]);
            if d2 == 0.0 && params.nugget == 0.0 {
                return Err(Error::DegenerateCovariance(format!(
                    "duplicate locations {i} and {j} with zero nugget"
                )));
            }
            let cov = if params.partial_sill == 0.0 {
                0.0
            } else {
                let rho = match memo.get(&d2.to_bits()) {
                    Some(&r) => r,
                    None => {
                        let r = matern_correlation(d2.sqrt(), params.range, params.smoothness)?;
                        memo.insert(d2.to_bits(), r);
                        r
                    }
                };
                params.partial_sill * rho
            };
            m[(i, j)] = cov;
            m[(j, i)] = cov;
        }
    }
    Ok(CovarianceMatrix { matrix: m })
}

/// Inverse covariance matrix Q = Σ^{-1}.
#[derive(Debug, Clone)]
pub struct PrecisionMatrix {
    matrix: DMatrix<f64>,
}

impl PrecisionMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }

    /// Column i as a slice (equals row i by symmetry).
    pub fn column(&self, i: usize) -> &[f64] {
        let n = self.matrix.nrows();
        &self.matrix.as_slice()[i * n..(i + 1) * n]
    }
}

/// Invert via Cholesky. Failure of the factorization is the
/// positive-definiteness check.
pub fn precision_matrix(cov: &CovarianceMatrix) -> Result<PrecisionMatrix> {
    let chol = cov
        .matrix
        .clone()
        .cholesky()
        .ok_or_else(|| Error::DegenerateCovariance("covariance is not positive definite".into()))?;
    let mut q = chol.inverse();
    // enforce exact symmetry so downstream row/column reads agree
    let n = q.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let s = 0.5 * (q[(i, j)] + q[(j, i)]);
            q[(i, j)] = s;
            q[(j, i)] = s;
        }
    }
    Ok(PrecisionMatrix { matrix: q })
}

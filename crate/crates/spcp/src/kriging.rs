//! Leave-one-out Kriging from a single precision matrix.
//!
//! With Q = Σ^{-1} over a location set, the conditional mean and variance
//! of any single response given all the others are
//!
//! ```text
//! Ŷ_i = -(1/q_ii) Σ_{j≠i} q_ij Y_j,    v̂_i = 1/q_ii,
//! ```
//!
//! so one factorization yields every leave-one-out prediction at once; no
//! refitting per deleted point. The model is mean-zero: the predictor is
//! not shift-equivariant unless the precision row sums vanish, so callers
//! working with data that has a clearly nonzero level should center the
//! responses first (the evaluation harness and CSV ingestion expose this
//! as a flag).

use serde::{Deserialize, Serialize};

use crate::covariance::{covariance_matrix, precision_matrix, MaternParams};
use crate::error::{Error, Result};
use crate::special::inverse_normal_cdf;
use crate::Point;

/// Planar locations paired with scalar responses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialDataset {
    locations: Vec<Point>,
    responses: Vec<f64>,
}

impl SpatialDataset {
    pub fn new(locations: Vec<Point>, responses: Vec<f64>) -> Result<Self> {
        if locations.len() != responses.len() {
            return Err(Error::Dataset(format!(
                "{} locations vs {} responses",
                locations.len(),
                responses.len()
            )));
        }
        if locations.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("location coordinate"));
        }
        if responses.iter().any(|y| !y.is_finite()) {
            return Err(Error::NonFinite("response value"));
        }
        Ok(SpatialDataset {
            locations,
            responses,
        })
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn locations(&self) -> &[Point] {
        &self.locations
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    /// Subset by index order; indices must be in range.
    pub fn subset(&self, indices: &[usize]) -> SpatialDataset {
        SpatialDataset {
            locations: indices.iter().map(|&i| self.locations[i]).collect(),
            responses: indices.iter().map(|&i| self.responses[i]).collect(),
        }
    }

    /// Dataset with observation `i` removed.
    pub fn without(&self, i: usize) -> SpatialDataset {
        let mut locations = self.locations.clone();
        let mut responses = self.responses.clone();
        locations.remove(i);
        responses.remove(i);
        SpatialDataset {
            locations,
            responses,
        }
    }

    /// Subtract `offset` from every response.
    pub fn shift_responses(&mut self, offset: f64) {
        for y in &mut self.responses {
            *y -= offset;
        }
    }

    pub fn mean_response(&self) -> f64 {
        if self.responses.is_empty() {
            0.0
        } else {
            self.responses.iter().sum::<f64>() / self.responses.len() as f64
        }
    }

    /// Indices of the `m` nearest observations to `target`, ties broken by
    /// lower index. Distances are compared on exact squared values.
    pub fn nearest(&self, target: &Point, m: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| {
            self.locations[a]
                .dist2(target)
                .partial_cmp(&self.locations[b].dist2(target))
                .unwrap()
                .then(a.cmp(&b))
        });
        order.truncate(m);
        order
    }
}

/// Leave-one-out prediction at one index (or at an unobserved target, in
/// which case there is no residual).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LooPrediction {
    pub index: usize,
    pub mean: f64,
    pub variance: f64,
    pub residual: Option<f64>,
}

/// All leave-one-out predictions from one precision matrix.
pub fn loo_predictions(data: &SpatialDataset, params: &MaternParams) -> Result<Vec<LooPrediction>> {
    if data.len() < 2 {
        return Err(Error::Dataset(
            "leave-one-out needs at least 2 observations".into(),
        ));
    }
    let q = precision_matrix(&covariance_matrix(data.locations(), params)?)?;
    let y = data.responses();
    let n = data.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let col = q.column(i);
        let qii = col[i];
        let dot: f64 = col
            .iter()
            .zip(y.iter())
            .map(|(&qij, &yj)| qij * yj)
            .sum::<f64>()
            - qii * y[i];
        let mean = -dot / qii;
        let variance = 1.0 / qii;
        let residual = (y[i] - mean) / variance.sqrt();
        out.push(LooPrediction {
            index: i,
            mean,
            variance,
            residual: Some(residual),
        });
    }
    Ok(out)
}

/// Kriging mean and variance at an unobserved location, from the
/// augmented (n+1)-point precision matrix with the target last.
pub fn predict_at(
    data: &SpatialDataset,
    target: &Point,
    params: &MaternParams,
) -> Result<LooPrediction> {
    if data.is_empty() {
        return Err(Error::Dataset("cannot predict from an empty dataset".into()));
    }
    if !target.is_finite() {
        return Err(Error::NonFinite("target location"));
    }
    let mut locs = data.locations().to_vec();
    locs.push(*target);
    let q = precision_matrix(&covariance_matrix(&locs, params)?)?;
    let t = data.len();
    let col = q.column(t);
    let qtt = col[t];
    let dot: f64 = col[..t]
        .iter()
        .zip(data.responses())
        .map(|(&qtj, &yj)| qtj * yj)
        .sum();
    Ok(LooPrediction {
        index: t,
        mean: -dot / qtt,
        variance: 1.0 / qtt,
        residual: None,
    })
}

/// Gaussian central interval: mean ± z_{α/2} √variance.
pub fn kriging_interval(pred: &LooPrediction, alpha: f64) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&alpha) || alpha == 0.0 {
        return Err(Error::InvalidParam(format!(
            "alpha must be in (0,1), got {alpha}"
        )));
    }
    if pred.variance <= 0.0 {
        return Err(Error::InvalidParam(
            "prediction variance must be positive".into(),
        ));
    }
    let z = inverse_normal_cdf(1.0 - alpha / 2.0);
    let half = z * pred.variance.sqrt();
    Ok((pred.mean - half, pred.mean + half))
}

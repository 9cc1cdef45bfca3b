//! Exact step-function plausibility contours and their level sets.
//!
//! A contour is w_self + Σ_i w_i·1{a_i <= y <= b_i}: piecewise constant,
//! jumping only at interval endpoints, with closed endpoints included. It
//! is stored as the sorted unique endpoints plus the level on every open
//! segment and at every endpoint. For uniform weights every level is an
//! integer count divided once by n+1, so level-set decisions against the
//! conformal threshold reduce to integer comparisons and carry no
//! accumulated rounding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Normalized kernel weights over n observations plus the prediction
/// location itself (last entry, distance zero).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelWeights {
    pub bandwidth: f64,
    /// n+1 weights summing to one; the last is the self weight.
    pub weights: Vec<f64>,
}

impl KernelWeights {
    pub fn self_weight(&self) -> f64 {
        *self.weights.last().expect("weights nonempty")
    }
}

/// Weighting scheme for a plausibility contour.
#[derive(Debug, Clone)]
pub enum ContourWeights {
    /// Every one of the n intervals counts 1/(n+1); so does the self term.
    Uniform { n: usize },
    /// Gaussian-kernel weights; `weights[i]` belongs to interval i.
    Kernel(KernelWeights),
}

/// A plausibility contour: an exact step function over candidate response
/// values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlausibilityContour {
    /// Sorted unique jump locations (the interval endpoints).
    breakpoints: Vec<f64>,
    /// Level at each breakpoint (closed endpoints included).
    point_levels: Vec<f64>,
    /// Level on each open segment; `segment_levels[k]` covers
    /// (breakpoints[k-1], breakpoints[k]), with the two outer entries the
    /// unbounded tails. Always one longer than `breakpoints`.
    segment_levels: Vec<f64>,
    /// The weight vector used, self weight last.
    weights_used: Vec<f64>,
    /// True when built from a grid scan: between-grid-point levels are then
    /// only resolved to grid resolution.
    sampled: bool,
}

/// Prediction set: the exact upper level set of a contour at a threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub alpha: f64,
    pub threshold_used: f64,
    /// Disjoint closed intervals, ascending. Empty when `unbounded` (the
    /// set is the whole line) or when nothing clears the threshold.
    pub components: Vec<[f64; 2]>,
    /// Convex hull of the components; `None` when empty or unbounded.
    pub hull: Option<[f64; 2]>,
    /// The threshold does not exceed the minimum plausibility, so the set
    /// is all of R.
    pub unbounded: bool,
}

impl PredictionSet {
    pub fn covers(&self, y: f64) -> bool {
        self.unbounded || self.components.iter().any(|c| c[0] <= y && y <= c[1])
    }

    /// Hull width; `None` for empty or unbounded sets.
    pub fn width(&self) -> Option<f64> {
        if self.unbounded {
            None
        } else {
            self.hull.map(|h| h[1] - h[0])
        }
    }

    pub fn is_empty(&self) -> bool {
        !self.unbounded && self.components.is_empty()
    }
}

/// Assemble the exact step function from weighted closed intervals by a
/// sweep over sorted endpoints.
pub fn contour_from_breakpoints(
    intervals: &[(f64, f64)],
    weights: &ContourWeights,
) -> Result<PlausibilityContour> {
    let (w, self_w, divisor) = match weights {
        ContourWeights::Uniform { n } => {
            if *n != intervals.len() {
                return Err(Error::InvalidParam(format!(
                    "uniform weights for {} intervals, got {}",
                    n,
                    intervals.len()
                )));
            }
            (vec![1.0; *n], 1.0, Some((*n + 1) as f64))
        }
        ContourWeights::Kernel(kw) => {
            if kw.weights.len() != intervals.len() + 1 {
                return Err(Error::InvalidParam(format!(
                    "{} kernel weights for {} intervals",
                    kw.weights.len(),
                    intervals.len()
                )));
            }
            (
                kw.weights[..intervals.len()].to_vec(),
                kw.self_weight(),
                None,
            )
        }
    };
    for &(a, b) in intervals {
        if !a.is_finite() || !b.is_finite() || a > b {
            return Err(Error::InvalidParam(format!(
                "invalid breakpoint interval [{a}, {b}]"
            )));
        }
    }

    let mut xs: Vec<f64> = Vec::with_capacity(2 * intervals.len());
    xs.extend(intervals.iter().map(|&(a, _)| a));
    xs.extend(intervals.iter().map(|&(_, b)| b));
    xs.sort_by(|p, q| p.partial_cmp(q).unwrap());
    xs.dedup();

    // per-coordinate opening/closing mass
    let mut opens = vec![0.0f64; xs.len()];
    let mut closes = vec![0.0f64; xs.len()];
    for (k, &(a, b)) in intervals.iter().enumerate() {
        let ia = xs.partition_point(|&x| x < a);
        let ib = xs.partition_point(|&x| x < b);
        opens[ia] += w[k];
        closes[ib] += w[k];
    }

    let mut point_levels = Vec::with_capacity(xs.len());
    let mut segment_levels = Vec::with_capacity(xs.len() + 1);
    let mut running = self_w;
    segment_levels.push(running);
    for k in 0..xs.len() {
        let at = running + opens[k];
        point_levels.push(at);
        running = at - closes[k];
        segment_levels.push(running);
    }

    if let Some(div) = divisor {
        // counts are exact small integers; one correctly-rounded division
        // each keeps level comparisons faithful to the integer ranks
        for v in point_levels.iter_mut().chain(segment_levels.iter_mut()) {
            *v /= div;
        }
    }

    let mut weights_used = w;
    if let Some(div) = divisor {
        for v in weights_used.iter_mut() {
            *v /= div;
        }
        weights_used.push(1.0 / div);
    } else {
        weights_used.push(self_w);
    }

    Ok(PlausibilityContour {
        breakpoints: xs,
        point_levels,
        segment_levels,
        weights_used,
        sampled: false,
    })
}

impl PlausibilityContour {
    /// Build a sampled contour from grid-scan evaluations. Segment levels
    /// between adjacent candidates take the smaller neighbour, so level
    /// sets computed from it are resolved to grid resolution.
    pub(crate) fn from_samples(
        candidates: Vec<f64>,
        levels: Vec<f64>,
        weights_used: Vec<f64>,
    ) -> Self {
        let self_level = *weights_used.last().expect("weights nonempty");
        let mut segment_levels = Vec::with_capacity(candidates.len() + 1);
        segment_levels.push(self_level);
        for k in 1..candidates.len() {
            segment_levels.push(levels[k - 1].min(levels[k]));
        }
        segment_levels.push(self_level);
        PlausibilityContour {
            breakpoints: candidates,
            point_levels: levels,
            segment_levels,
            weights_used,
            sampled: true,
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn point_levels(&self) -> &[f64] {
        &self.point_levels
    }

    pub fn segment_levels(&self) -> &[f64] {
        &self.segment_levels
    }

    pub fn weights_used(&self) -> &[f64] {
        &self.weights_used
    }

    pub fn is_sampled(&self) -> bool {
        self.sampled
    }

    /// Minimum level: the self-comparison term always fires.
    pub fn min_level(&self) -> f64 {
        *self.weights_used.last().expect("weights nonempty")
    }

    pub fn max_level(&self) -> f64 {
        self.point_levels
            .iter()
            .fold(self.min_level(), |m, &v| m.max(v))
    }

    /// Plausibility at `y`.
    pub fn evaluate(&self, y: f64) -> f64 {
        let k = self.breakpoints.partition_point(|&x| x < y);
        if k < self.breakpoints.len() && self.breakpoints[k] == y {
            self.point_levels[k]
        } else {
            self.segment_levels[k]
        }
    }

    /// Exact upper level set {y : p(y) >= threshold}.
    pub fn level_set(&self, threshold: f64, alpha: f64) -> PredictionSet {
        if threshold <= self.min_level() {
            return PredictionSet {
                alpha,
                threshold_used: threshold,
                components: Vec::new(),
                hull: None,
                unbounded: true,
            };
        }
        let mut components: Vec<[f64; 2]> = Vec::new();
        let mut open_since: Option<f64> = None;
        for k in 0..self.breakpoints.len() {
            let x = self.breakpoints[k];
            if self.point_levels[k] >= threshold {
                if open_since.is_none() {
                    open_since = Some(x);
                }
                // a qualifying segment to the right keeps the run open; its
                // closure is decided at the next breakpoint
                if self.segment_levels[k + 1] < threshold {
                    components.push([open_since.take().unwrap(), x]);
                }
            } else {
                debug_assert!(open_since.is_none(), "segment above its endpoints");
            }
        }
        debug_assert!(open_since.is_none(), "run left open past the last endpoint");
        let hull = match (components.first(), components.last()) {
            (Some(f), Some(l)) => Some([f[0], l[1]]),
            _ => None,
        };
        PredictionSet {
            alpha,
            threshold_used: threshold,
            components,
            hull,
            unbounded: false,
        }
    }
}

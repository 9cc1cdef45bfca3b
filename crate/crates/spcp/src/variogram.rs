//! Empirical variogram estimation and weighted least-squares Matérn fits.
//!
//! The classical moment estimator: bin squared response differences by
//! pair distance, halve, and fit γ(d) = τ² + σ²(1 − ρ(d; φ, κ)) by
//! count-weighted least squares. The smoothness κ is searched over a small
//! grid — joint continuous optimization over κ is ill-conditioned, and the
//! downstream conformal intervals are insensitive to moderate parameter
//! error anyway — while (τ², σ², φ) are optimized in log space by
//! Nelder-Mead from several deterministic starts.

use serde::{Deserialize, Serialize};

use crate::covariance::{matern_correlation, MaternParams};
use crate::error::{Error, Result};
use crate::kriging::SpatialDataset;

/// Default number of distance bins.
pub const DEFAULT_N_BINS: usize = 13;

/// Default κ search grid.
pub const DEFAULT_KAPPA_GRID: [f64; 6] = [0.3, 0.5, 0.7, 1.0, 1.5, 2.0];

/// Binned semivariance estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalVariogram {
    /// Midpoints of the retained (non-empty) bins, strictly increasing.
    pub bin_centers: Vec<f64>,
    /// Matheron estimates (1/(2 count)) Σ (Y_i − Y_j)² per bin.
    pub semivariances: Vec<f64>,
    /// Pair counts per retained bin.
    pub bin_counts: Vec<usize>,
}

impl EmpiricalVariogram {
    pub fn len(&self) -> usize {
        self.bin_centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bin_centers.is_empty()
    }
}

/// Half the diameter of the bounding box; the default variogram reach.
pub fn default_max_dist(data: &SpatialDataset) -> f64 {
    let xs = data.locations().iter().map(|p| p.x);
    let ys = data.locations().iter().map(|p| p.y);
    let (mut xmin, mut xmax) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
    for x in xs {
        xmin = xmin.min(x);
        xmax = xmax.max(x);
    }
    for y in ys {
        ymin = ymin.min(y);
        ymax = ymax.max(y);
    }
    0.5 * ((xmax - xmin).powi(2) + (ymax - ymin).powi(2)).sqrt()
}

/// Equal-width binned empirical variogram over pair distances in
/// (0, max_dist]. Bins are half-open [lo, hi); empty bins are dropped.
pub fn empirical_variogram(
    data: &SpatialDataset,
    max_dist: f64,
    n_bins: usize,
) -> Result<EmpiricalVariogram> {
    if !(max_dist > 0.0) || !max_dist.is_finite() {
        return Err(Error::InvalidParam(format!(
            "max_dist must be positive, got {max_dist}"
        )));
    }
    if n_bins == 0 {
        return Err(Error::InvalidParam("n_bins must be >= 1".into()));
    }
    let n = data.len();
    let width = max_dist / n_bins as f64;
    let mut sums = vec![0.0f64; n_bins];
    let mut counts = vec![0usize; n_bins];
    let locs = data.locations();
    let ys = data.responses();
    for i in 0..n {
        for j in (i + 1)..n {
            let d = locs[i].dist(&locs[j]);
            // bins are half-open [lo, hi): zero-distance pairs and pairs at
            // or beyond max_dist fall outside every bin
            if d == 0.0 || d >= max_dist {
                continue;
            }
            let b = ((d / width) as usize).min(n_bins - 1);
            let dy = ys[i] - ys[j];
            sums[b] += dy * dy;
            counts[b] += 1;
        }
    }
    let mut bin_centers = Vec::new();
    let mut semivariances = Vec::new();
    let mut bin_counts = Vec::new();
    for b in 0..n_bins {
        if counts[b] == 0 {
            continue;
        }
        bin_centers.push((b as f64 + 0.5) * width);
        semivariances.push(sums[b] / (2.0 * counts[b] as f64));
        bin_counts.push(counts[b]);
    }
    if bin_centers.is_empty() {
        return Err(Error::InsufficientPairs);
    }
    Ok(EmpiricalVariogram {
        bin_centers,
        semivariances,
        bin_counts,
    })
}

/// Result of a weighted least-squares Matérn fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaternFit {
    pub params: MaternParams,
    /// Count-weighted squared error at the optimum.
    pub objective: f64,
    /// True when the optimizer stopped on its iteration budget rather than
    /// its tolerance.
    pub converged: bool,
    /// True when the data carried essentially no variance and the fit sits
    /// on its lower bounds.
    pub degenerate: bool,
}

/// Model semivariogram γ(d) = τ² + σ²(1 − ρ(d; φ, κ)).
pub fn model_semivariance(d: f64, p: &MaternParams) -> f64 {
    p.nugget
        + p.partial_sill * (1.0 - matern_correlation(d, p.range, p.smoothness).unwrap_or(0.0))
}

fn wls_objective(vg: &EmpiricalVariogram, p: &MaternParams) -> f64 {
    vg.bin_centers
        .iter()
        .zip(vg.semivariances.iter())
        .zip(vg.bin_counts.iter())
        .map(|((&d, &gamma_hat), &count)| {
            let diff = gamma_hat - model_semivariance(d, p);
            count as f64 * diff * diff
        })
        .sum()
}

struct Bounds {
    nugget: (f64, f64),
    partial_sill: (f64, f64),
    range: (f64, f64),
}

impl Bounds {
    fn clamp(&self, v: [f64; 3]) -> [f64; 3] {
        [
            v[0].clamp(self.nugget.0, self.nugget.1),
            v[1].clamp(self.partial_sill.0, self.partial_sill.1),
            v[2].clamp(self.range.0, self.range.1),
        ]
    }
}

/// Fit Matérn parameters to an empirical variogram by count-weighted least
/// squares, κ over `kappa_grid`, the rest by bounded Nelder-Mead in log
/// space with deterministic multi-starts.
pub fn fit_matern(vg: &EmpiricalVariogram, kappa_grid: &[f64]) -> Result<MaternFit> {
    if vg.len() < 4 {
        return Err(Error::InvalidParam(format!(
            "need at least 4 variogram bins, got {}",
            vg.len()
        )));
    }
    if kappa_grid.is_empty() || kappa_grid.iter().any(|&k| !(k > 0.0) || !k.is_finite()) {
        return Err(Error::InvalidParam("kappa grid must hold positive values".into()));
    }

    let gamma_max = vg.semivariances.iter().cloned().fold(0.0f64, f64::max);
    let d_max = *vg.bin_centers.last().expect("nonempty");
    let degenerate = gamma_max <= 1e-300;
    // response variance proxy: the sill region of the variogram
    let var_proxy = if degenerate { 1.0 } else { gamma_max };
    let bounds = Bounds {
        nugget: (1e-6 * var_proxy, 10.0 * var_proxy),
        partial_sill: (1e-6 * var_proxy, 10.0 * var_proxy),
        range: (1e-3, 4.0 * d_max),
    };

    // sill estimate from the flat tail of the variogram
    let tail = vg.semivariances.len().saturating_sub(3);
    let sill0 = (vg.semivariances[tail..].iter().sum::<f64>()
        / vg.semivariances[tail..].len() as f64)
        .max(bounds.nugget.0 * 2.0);

    let mut best: Option<([f64; 3], f64, f64, bool)> = None;
    for &kappa in kappa_grid {
        for &(nfrac, sfrac) in &[(0.1, 0.9), (0.5, 0.5), (0.9, 0.1)] {
            for &rfrac in &[0.05, 0.15, 0.35] {
                let start = bounds.clamp([
                    (nfrac * sill0).max(bounds.nugget.0),
                    (sfrac * sill0).max(bounds.partial_sill.0),
                    rfrac * d_max,
                ]);
                let objective = |v: [f64; 3]| {
                    let c = bounds.clamp(v);
                    let p = MaternParams {
                        nugget: c[0],
                        partial_sill: c[1],
                        range: c[2],
                        smoothness: kappa,
                    };
                    wls_objective(vg, &p)
                };
                let (v, obj, converged) = nelder_mead_log3(objective, start, 400, 1e-10);
                let v = bounds.clamp(v);
                if best.is_none() || obj < best.as_ref().unwrap().1 {
                    best = Some((v, obj, kappa, converged));
                }
            }
        }
    }
    let (v, objective, kappa, converged) = best.expect("at least one start");
    Ok(MaternFit {
        params: MaternParams {
            nugget: v[0],
            partial_sill: v[1],
            range: v[2],
            smoothness: kappa,
        },
        objective,
        converged,
        degenerate,
    })
}

/// Fit with the default binning and κ grid.
pub fn fit_matern_default(data: &SpatialDataset) -> Result<MaternFit> {
    let vg = empirical_variogram(data, default_max_dist(data), DEFAULT_N_BINS)?;
    fit_matern(&vg, &DEFAULT_KAPPA_GRID)
}

/// Nelder-Mead over three positive parameters, working in log space so the
/// positivity constraint is structural and convergence checks are
/// scale-free. Returns (argmin, min, converged).
fn nelder_mead_log3<F: Fn([f64; 3]) -> f64>(
    f: F,
    start: [f64; 3],
    max_iter: usize,
    ftol_rel: f64,
) -> ([f64; 3], f64, bool) {
    let to_params = |u: &[f64; 3]| [u[0].exp(), u[1].exp(), u[2].exp()];
    let g = |u: &[f64; 3]| f(to_params(u));
    let u0 = [start[0].ln(), start[1].ln(), start[2].ln()];

    // initial simplex: offset each log-coordinate
    let mut simplex: Vec<([f64; 3], f64)> = Vec::with_capacity(4);
    simplex.push((u0, g(&u0)));
    for k in 0..3 {
        let mut u = u0;
        u[k] += 0.7;
        simplex.push((u, g(&u)));
    }

    let (alpha, gamma, rho_c, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut converged = false;
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        let fbest = simplex[0].1;
        let fworst = simplex[3].1;
        if (fworst - fbest).abs() <= ftol_rel * (fbest.abs() + fworst.abs() + 1e-300) {
            converged = true;
            break;
        }
        let mut centroid = [0.0; 3];
        for s in &simplex[..3] {
            for k in 0..3 {
                centroid[k] += s.0[k] / 3.0;
            }
        }
        let worst = simplex[3].0;
        let reflect = std::array::from_fn(|k| centroid[k] + alpha * (centroid[k] - worst[k]));
        let fr = g(&reflect);
        if fr < simplex[0].1 {
            let expand = std::array::from_fn(|k| centroid[k] + gamma * (centroid[k] - worst[k]));
            let fe = g(&expand);
            simplex[3] = if fe < fr { (expand, fe) } else { (reflect, fr) };
        } else if fr < simplex[2].1 {
            simplex[3] = (reflect, fr);
        } else {
            let contract = std::array::from_fn(|k| centroid[k] + rho_c * (worst[k] - centroid[k]));
            let fc = g(&contract);
            if fc < simplex[3].1 {
                simplex[3] = (contract, fc);
            } else {
                let best = simplex[0].0;
                for s in simplex.iter_mut().skip(1) {
                    let shrunk: [f64; 3] =
                        std::array::from_fn(|k| best[k] + sigma * (s.0[k] - best[k]));
                    *s = (shrunk, g(&shrunk));
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    (to_params(&simplex[0].0), simplex[0].1, converged)
}

//! Seedable Gaussian-process sampling and the eight benchmark scenarios.
//!
//! Every generator is a pure function of its seed: the correlated field X
//! and the white-noise field E are drawn from separate streams derived from
//! the scenario seed, so two scenarios built on the same seed share the
//! same underlying fields and differ only in the response transform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::covariance::{covariance_matrix, MaternParams};
use crate::error::{Error, Result};
use crate::kriging::SpatialDataset;
use crate::special::normal_cdf;
use crate::Point;

/// Stream separator for the noise field (splitmix golden-ratio constant).
const NOISE_STREAM: u64 = 0x9E37_79B9_7F4A_7C15;

/// Jitter added to the diagonal inside the sampling factorization only;
/// prediction paths never see it.
const SAMPLING_JITTER: f64 = 1e-10;

/// Declarative simulation configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    /// Scenario 1 is Gaussian and stationary; 2-4 are non-Gaussian but
    /// stationary; 5-8 are nonstationary in variance, noise, or mean.
    pub scenario_id: u8,
    /// Points per axis; the grid has grid_side² locations.
    pub grid_side: usize,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn new(scenario_id: u8, grid_side: usize, seed: u64) -> Result<Self> {
        if !(1..=8).contains(&scenario_id) {
            return Err(Error::InvalidParam(format!(
                "scenario_id must be 1..=8, got {scenario_id}"
            )));
        }
        if grid_side < 2 {
            return Err(Error::InvalidParam(format!(
                "grid_side must be >= 2, got {grid_side}"
            )));
        }
        Ok(ScenarioSpec {
            scenario_id,
            grid_side,
            seed,
        })
    }

    /// Matérn parameters of the latent field X: no nugget, σ² = 3,
    /// φ = 0.1, κ = 0.7.
    pub fn base_params() -> MaternParams {
        MaternParams {
            nugget: 0.0,
            partial_sill: 3.0,
            range: 0.1,
            smoothness: 0.7,
        }
    }
}

/// The regular grid {1/N, 2/N, …, 1}², x varying fastest.
pub fn grid_locations(grid_side: usize) -> Vec<Point> {
    let n = grid_side as f64;
    let mut out = Vec::with_capacity(grid_side * grid_side);
    for iy in 1..=grid_side {
        for ix in 1..=grid_side {
            out.push(Point::new(ix as f64 / n, iy as f64 / n));
        }
    }
    out
}

/// Exact Gaussian-process draw: lower Cholesky factor against seeded
/// standard-normal variates. Deterministic in (location order, params,
/// seed).
pub fn sample_gp(locations: &[Point], params: &MaternParams, seed: u64) -> Result<Vec<f64>> {
    let cov = covariance_matrix(locations, params)?;
    let mut m = cov.matrix().clone();
    for i in 0..m.nrows() {
        m[(i, i)] += SAMPLING_JITTER;
    }
    let chol = m
        .cholesky()
        .ok_or_else(|| Error::DegenerateCovariance("sampling factorization failed".into()))?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let z: Vec<f64> = (0..locations.len())
        .map(|_| rng.sample(StandardNormal))
        .collect();
    let l = chol.l();
    let n = locations.len();
    let mut out = vec![0.0; n];
    for i in 0..n {
        let mut acc = 0.0;
        for j in 0..=i {
            acc += l[(i, j)] * z[j];
        }
        out[i] = acc;
    }
    Ok(out)
}

/// Independent uniform locations on the unit square.
pub fn sample_uniform_locations(n: usize, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| Point::new(rng.gen::<f64>(), rng.gen::<f64>()))
        .collect()
}

/// The response transform of each scenario, as a pure function of the
/// location, the correlated field value x, and the noise value e.
pub fn scenario_response(scenario_id: u8, s: Point, x: f64, e: f64) -> f64 {
    match scenario_id {
        1 => x + e,
        2 => x.powi(3) + e,
        // Gamma(1, rate 3^{-1/2}) quantile of Φ(x/√3): an exponential with
        // scale √3, evaluated through the survival function so the upper
        // tail never hits ln(0)
        3 => -(3.0f64).sqrt() * normal_sf_ln(x / 3.0f64.sqrt()) + e,
        4 => 3.0f64.sqrt() * x * e.abs(),
        5 => sign(x) * x.abs().powf(s.x + 1.0) + e,
        6 => {
            let omega = normal_cdf((s.x - 0.5) / 0.1);
            (omega / 3.0).sqrt() * x + (1.0 - omega).sqrt() * e
        }
        7 => x + s.x * e,
        8 => {
            let c = Point::new(0.5, 0.5);
            x + 10.0 * (-50.0 * s.dist2(&c)).exp()
        }
        _ => unreachable!("scenario_id validated at construction"),
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// ln(1 - Φ(w)), computed without cancellation.
fn normal_sf_ln(w: f64) -> f64 {
    crate::special::normal_sf(w).ln()
}

/// The latent fields of a scenario draw: grid locations, correlated field
/// X, and unit white noise E. Exposed so tests can force E = 0 or inspect
/// the fields separately.
pub fn generate_scenario_fields(spec: &ScenarioSpec) -> Result<(Vec<Point>, Vec<f64>, Vec<f64>)> {
    ScenarioSpec::new(spec.scenario_id, spec.grid_side, spec.seed)?;
    let locations = grid_locations(spec.grid_side);
    let x = sample_gp(&locations, &ScenarioSpec::base_params(), spec.seed)?;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed ^ NOISE_STREAM);
    let e: Vec<f64> = (0..locations.len())
        .map(|_| rng.sample(StandardNormal))
        .collect();
    Ok((locations, x, e))
}

/// Generate one scenario dataset on the regular grid.
pub fn generate_scenario(spec: &ScenarioSpec) -> Result<SpatialDataset> {
    let (locations, x, e) = generate_scenario_fields(spec)?;
    let responses: Vec<f64> = locations
        .iter()
        .zip(x.iter().zip(e.iter()))
        .map(|(s, (&xv, &ev))| scenario_response(spec.scenario_id, *s, xv, ev))
        .collect();
    SpatialDataset::new(locations, responses)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::matern_correlation;
    use approx::assert_relative_eq;

    #[test]
    fn grid_is_row_major_from_one_over_n() {
        let g = grid_locations(4);
        assert_eq!(g.len(), 16);
        assert_eq!(g[0], Point::new(0.25, 0.25));
        assert_eq!(g[1], Point::new(0.5, 0.25));
        assert_eq!(g[15], Point::new(1.0, 1.0));
    }

    #[test]
    fn scenario_spec_validation() {
        assert!(ScenarioSpec::new(0, 20, 1).is_err());
        assert!(ScenarioSpec::new(9, 20, 1).is_err());
        assert!(ScenarioSpec::new(1, 1, 1).is_err());
        assert!(ScenarioSpec::new(8, 2, 1).is_ok());
    }

    #[test]
    fn deterministic_given_spec() {
        let spec = ScenarioSpec::new(4, 6, 99).unwrap();
        let a = generate_scenario(&spec).unwrap();
        let b = generate_scenario(&spec).unwrap();
        assert_eq!(a, b);
        let c = generate_scenario(&ScenarioSpec::new(4, 6, 100).unwrap()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn scenario_one_with_zero_noise_is_the_latent_field() {
        let spec = ScenarioSpec::new(1, 5, 7).unwrap();
        let (locs, x, _) = generate_scenario_fields(&spec).unwrap();
        for (k, s) in locs.iter().enumerate() {
            assert_eq!(scenario_response(1, *s, x[k], 0.0), x[k]);
        }
    }

    #[test]
    fn scenario_eight_adds_a_deterministic_bump() {
        // with the noise forced to zero, scenario 8 minus scenario 1 is
        // exactly the Gaussian bump, value 10 at the centre
        let s1 = ScenarioSpec::new(1, 10, 3).unwrap();
        let s8 = ScenarioSpec::new(8, 10, 3).unwrap();
        let (locs, x1, _) = generate_scenario_fields(&s1).unwrap();
        let (_, x8, _) = generate_scenario_fields(&s8).unwrap();
        assert_eq!(x1, x8, "same seed must give the same latent field");
        let c = Point::new(0.5, 0.5);
        for (k, s) in locs.iter().enumerate() {
            let diff = scenario_response(8, *s, x8[k], 0.0) - scenario_response(1, *s, x1[k], 0.0);
            let want = 10.0 * (-50.0 * s.dist2(&c)).exp();
            assert_relative_eq!(diff, want, epsilon = 1e-12);
        }
        // centre is on the grid for even N
        let centre_idx = locs.iter().position(|p| *p == c).unwrap();
        let diff = scenario_response(8, c, x8[centre_idx], 0.0)
            - scenario_response(1, c, x1[centre_idx], 0.0);
        assert_relative_eq!(diff, 10.0, epsilon = 1e-12);
    }

    #[test]
    fn scenario_three_median_transform_value() {
        // q(Φ(0)) = q(1/2) = √3 ln 2 for the exponential quantile with
        // scale √3 (high-precision value)
        let v = scenario_response(3, Point::new(0.3, 0.3), 0.0, 0.0);
        assert_relative_eq!(v, 1.200566133852944, max_relative = 1e-12);
    }

    #[test]
    fn scenario_three_is_positively_skewed() {
        let mut skew_sum = 0.0;
        for seed in 0..8 {
            let spec = ScenarioSpec::new(3, 12, 500 + seed).unwrap();
            let data = generate_scenario(&spec).unwrap();
            let y = data.responses();
            let n = y.len() as f64;
            let mean = y.iter().sum::<f64>() / n;
            let m2 = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let m3 = y.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
            skew_sum += m3 / m2.powf(1.5);
        }
        assert!(skew_sum / 8.0 > 0.3, "gamma transform should skew right");
    }

    #[test]
    fn pure_nugget_draws_have_unit_variance() {
        let p = MaternParams::new(1.0, 0.0, 0.1, 0.7).unwrap();
        let locs = vec![Point::new(0.1, 0.1), Point::new(0.9, 0.9)];
        let mut acc = 0.0;
        let reps = 50_000;
        for seed in 0..reps {
            let y = sample_gp(&locs, &p, seed).unwrap();
            acc += y[0] * y[0];
        }
        let var = acc / reps as f64;
        assert!((var - 1.0).abs() < 0.03, "empirical variance {var}");
    }

    #[test]
    fn field_mean_is_zero() {
        let locs = grid_locations(5);
        let p = ScenarioSpec::base_params();
        let mut acc = 0.0;
        let reps = 500;
        for seed in 0..reps {
            acc += sample_gp(&locs, &p, seed).unwrap()[12];
        }
        let mean = acc / reps as f64;
        // sd of the mean is sqrt(3/500) ≈ 0.077
        assert!(mean.abs() < 4.0 * (3.0f64 / reps as f64).sqrt());
    }

    #[test]
    fn adjacent_grid_correlation_matches_matern() {
        let locs = grid_locations(20);
        let p = ScenarioSpec::base_params();
        let reps = 500;
        let (i, j) = (0, 1); // horizontal neighbours at distance 1/20
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for seed in 0..reps {
            let y = sample_gp(&locs, &p, 9000 + seed).unwrap();
            sxy += y[i] * y[j];
            sxx += y[i] * y[i];
            syy += y[j] * y[j];
        }
        let emp = sxy / (sxx * syy).sqrt();
        let want = matern_correlation(0.05, 0.1, 0.7).unwrap();
        // MC error of a correlation over 500 draws is about 1/sqrt(500)
        assert!(
            (emp - want).abs() < 4.0 / (reps as f64).sqrt(),
            "empirical {emp} vs matern {want}"
        );
    }

    #[test]
    fn scenario_seven_noise_grows_eastward() {
        let mut wins = 0;
        for seed in 0..40 {
            let spec = ScenarioSpec::new(7, 12, 40_000 + seed).unwrap();
            let (locs, x, e) = generate_scenario_fields(&spec).unwrap();
            let mut west = Vec::new();
            let mut east = Vec::new();
            for (k, s) in locs.iter().enumerate() {
                let resid = scenario_response(7, *s, x[k], e[k]) - x[k];
                if s.x < 0.2 {
                    west.push(resid);
                } else if s.x > 0.8 {
                    east.push(resid);
                }
            }
            let var = |v: &[f64]| v.iter().map(|r| r * r).sum::<f64>() / v.len() as f64;
            if var(&east) > var(&west) {
                wins += 1;
            }
        }
        assert!(wins >= 38, "east variance won only {wins}/40 seeds");
    }

    #[test]
    fn uniform_locations_are_uniform() {
        let pts = sample_uniform_locations(100_000, 11);
        assert_eq!(sample_uniform_locations(0, 1).len(), 0);
        let mean_x = pts.iter().map(|p| p.x).sum::<f64>() / pts.len() as f64;
        let mean_y = pts.iter().map(|p| p.y).sum::<f64>() / pts.len() as f64;
        let se = (1.0f64 / 12.0 / pts.len() as f64).sqrt();
        assert!((mean_x - 0.5).abs() < 3.0 * se);
        assert!((mean_y - 0.5).abs() < 3.0 * se);

        // Kolmogorov-Smirnov against the uniform CDF
        let mut xs: Vec<f64> = pts.iter().map(|p| p.x).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = xs.len() as f64;
        let mut d = 0.0f64;
        for (k, &x) in xs.iter().enumerate() {
            let ecdf_hi = (k + 1) as f64 / n;
            let ecdf_lo = k as f64 / n;
            d = d.max((ecdf_hi - x).abs()).max((x - ecdf_lo).abs());
        }
        // asymptotic KS p-value: 2 Σ (-1)^{k-1} exp(-2 k² n D²)
        let lambda = d * n.sqrt();
        let mut p = 0.0;
        for k in 1..100 {
            let term = 2.0 * (-1.0f64).powi(k as i32 - 1) * (-2.0 * (k * k) as f64 * lambda * lambda).exp();
            p += term;
        }
        assert!(p > 0.01, "KS p-value {p} with D = {d}");
    }

    #[test]
    fn scenario_one_moments_look_gaussian() {
        let mut skew = 0.0;
        let mut kurt = 0.0;
        let reps = 10;
        for seed in 0..reps {
            let data =
                generate_scenario(&ScenarioSpec::new(1, 14, 7_000 + seed).unwrap()).unwrap();
            let y = data.responses();
            let n = y.len() as f64;
            let mean = y.iter().sum::<f64>() / n;
            let m2 = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let m3 = y.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
            let m4 = y.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
            skew += m3 / m2.powf(1.5);
            kurt += m4 / (m2 * m2) - 3.0;
        }
        skew /= reps as f64;
        kurt /= reps as f64;
        assert!(skew.abs() < 0.35, "skewness {skew}");
        assert!(kurt.abs() < 0.8, "excess kurtosis {kurt}");
    }
}

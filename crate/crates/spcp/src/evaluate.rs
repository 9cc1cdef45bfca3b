//! Leave-one-out evaluation harness: coverage, width, interval score,
//! per-column aggregation, replicate orchestration, bandwidth selection,
//! and the fixed-parameter sensitivity sweep.
//!
//! The harness exploits the precision-row structure of the predictor: one
//! n×n precision matrix of the full dataset yields, for every fold i, both
//! the Kriging prediction at the held-out location and all n−1 conformal
//! breakpoints in O(n) — no per-fold refactorization. Folds where the
//! neighbourhood is restricted (LSCP, capped sLSCP) fall back to per-fold
//! subsystems.

use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::conformal::{
    conformal_threshold, contour_from_breakpoints, kernel_weights, lscp_interval, slscp_interval,
    ContourWeights, NonConformity, PredictionSet,
};
use crate::covariance::{covariance_matrix, precision_matrix, MaternParams, PrecisionMatrix};
use crate::error::{Error, Result};
use crate::kriging::{kriging_interval, LooPrediction, SpatialDataset};
use crate::simulate::{generate_scenario, ScenarioSpec};
use crate::variogram::fit_matern_default;

/// Prediction method under evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Method {
    Gscp,
    /// Local conformal restricted to the m nearest observations.
    Lscp { m: usize },
    /// Smoothed local conformal. With `cap = None` every other observation
    /// takes part (weights decide relevance), which admits the shared
    /// fast path; `Some(m)` restricts to the m nearest per fold.
    Slscp { eta: f64, cap: Option<usize> },
    Kriging,
}

impl Method {
    pub fn label(&self) -> String {
        match self {
            Method::Gscp => "GSCP".into(),
            Method::Lscp { m } => format!("LSCP(m={m})"),
            Method::Slscp { eta, cap: None } => format!("sLSCP(eta={eta})"),
            Method::Slscp { eta, cap: Some(m) } => format!("sLSCP(eta={eta},M={m})"),
            Method::Kriging => "Kriging".into(),
        }
    }
}

/// Where the Matérn parameters come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ParamSource {
    Fixed(MaternParams),
    /// Variogram fit with the default binning, once per dataset.
    Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub method: Method,
    pub alpha: f64,
    pub params: ParamSource,
    /// Center responses by the sample mean before prediction. Off for
    /// simulated scenarios (the model is mean-zero by construction).
    pub center: bool,
    /// Group the metrics by the first coordinate.
    pub by_column: bool,
}

impl EvalConfig {
    pub fn new(method: Method, alpha: f64) -> Self {
        EvalConfig {
            method,
            alpha,
            params: ParamSource::Estimate,
            center: false,
            by_column: false,
        }
    }

    pub fn with_params(mut self, params: MaternParams) -> Self {
        self.params = ParamSource::Fixed(params);
        self
    }

    pub fn with_by_column(mut self, on: bool) -> Self {
        self.by_column = on;
        self
    }
}

/// Metrics grouped by a distinct first coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub s_x: f64,
    pub n: usize,
    pub coverage: f64,
    pub mean_width: f64,
    pub interval_score: f64,
}

/// Aggregated leave-one-out results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub alpha: f64,
    /// Share of held-out responses inside the exact prediction set.
    pub coverage: f64,
    /// Mean hull width over bounded folds.
    pub mean_width: f64,
    /// Mean interval score over bounded folds.
    pub interval_score: f64,
    pub n_locations: usize,
    pub n_replicates: usize,
    /// Folds whose prediction set was the whole line: they count as covered
    /// but are excluded from width and score.
    pub unbounded_count: usize,
    /// Folds that failed numerically; excluded from every average.
    pub failed_count: usize,
    pub by_column: Option<Vec<ColumnStats>>,
}

/// Interval score: width plus 2/α-weighted penalties for misses.
pub fn interval_score(lower: f64, upper: f64, y: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParam(format!(
            "alpha must be in (0,1), got {alpha}"
        )));
    }
    if lower > upper || !lower.is_finite() || !upper.is_finite() {
        return Err(Error::InvalidParam(format!(
            "invalid interval [{lower}, {upper}]"
        )));
    }
    if !y.is_finite() {
        return Err(Error::NonFinite("interval_score observation"));
    }
    let mut s = upper - lower;
    if y < lower {
        s += 2.0 / alpha * (lower - y);
    }
    if y > upper {
        s += 2.0 / alpha * (y - upper);
    }
    Ok(s)
}

/// One fold of a leave-one-out pass.
#[derive(Debug, Clone, Copy)]
struct FoldOutcome {
    covered: bool,
    /// Hull (width, score); `None` when the set was unbounded.
    width_score: Option<(f64, f64)>,
    s_x: f64,
}

/// Per-dataset precision kernel for the shared fast path.
struct LooKernel {
    q: PrecisionMatrix,
}

impl LooKernel {
    fn new(data: &SpatialDataset, params: &MaternParams) -> Result<Self> {
        let q = precision_matrix(&covariance_matrix(data.locations(), params)?)?;
        Ok(LooKernel { q })
    }

    fn qy(&self, y: &[f64]) -> Vec<f64> {
        let n = y.len();
        let mut out = vec![0.0; n];
        // column-major walk; Q is symmetric so columns are rows
        for j in 0..n {
            let col = self.q.column(j);
            let yj = y[j];
            for (o, &qij) in out.iter_mut().zip(col.iter()) {
                *o += qij * yj;
            }
        }
        out
    }

    /// Kriging mean and variance at fold i (response i held out).
    fn target_stats(&self, y: &[f64], qy: &[f64], i: usize) -> (f64, f64) {
        let qii = self.q.get(i, i);
        let mean = -(qy[i] - qii * y[i]) / qii;
        (mean, 1.0 / qii)
    }

    /// Closed-form breakpoint intervals for fold i, one per j != i, in
    /// ascending j order.
    fn fold_breakpoints(&self, y: &[f64], qy: &[f64], i: usize) -> Result<Vec<(f64, f64)>> {
        let n = y.len();
        let (target_mean, target_var) = self.target_stats(y, qy, i);
        let qtt = 1.0 / target_var;
        let qi = self.q.column(i);
        let mut out = Vec::with_capacity(n - 1);
        for j in 0..n {
            if j == i {
                continue;
            }
            let qjj = self.q.get(j, j);
            let qji = qi[j];
            // Σ_{k∉{i,j}} q_jk y_k
            let r = qy[j] - qjj * y[j] - qji * y[i];
            let a = y[j] + r / qjj;
            let w = qji * qji / qjj - qtt;
            let v = 2.0 * qji * a + 2.0 * qtt * target_mean;
            let u = qjj * a * a - qtt * target_mean * target_mean;
            out.push(crate::conformal::concave_quadratic_roots(u, v, w)?);
        }
        Ok(out)
    }
}

fn fold_outcome_from_set(
    set: &PredictionSet,
    plausibility_at_truth_ge_threshold: bool,
    y_true: f64,
    s_x: f64,
    alpha: f64,
) -> Result<FoldOutcome> {
    if set.unbounded {
        return Ok(FoldOutcome {
            covered: true,
            width_score: None,
            s_x,
        });
    }
    let covered = plausibility_at_truth_ge_threshold;
    let width_score = match set.hull {
        Some([lo, hi]) => Some((hi - lo, interval_score(lo, hi, y_true, alpha)?)),
        // an empty set misses by definition; score it as a zero-width
        // interval at the nearest breakpoint is not defined, so treat the
        // fold as failed instead
        None => return Err(Error::Breakpoint("empty prediction set".into())),
    };
    Ok(FoldOutcome {
        covered,
        width_score,
        s_x,
    })
}

fn run_fold(
    kernel: &LooKernel,
    data: &SpatialDataset,
    qy: &[f64],
    config: &EvalConfig,
    i: usize,
) -> Result<FoldOutcome> {
    let y = data.responses();
    let y_true = y[i];
    let s_x = data.locations()[i].x;
    let n_bag = data.len() - 1;
    match config.method {
        Method::Kriging => {
            let (mean, variance) = kernel.target_stats(y, qy, i);
            let (lo, hi) = kriging_interval(
                &LooPrediction {
                    index: i,
                    mean,
                    variance,
                    residual: None,
                },
                config.alpha,
            )?;
            Ok(FoldOutcome {
                covered: lo <= y_true && y_true <= hi,
                width_score: Some((hi - lo, interval_score(lo, hi, y_true, config.alpha)?)),
                s_x,
            })
        }
        Method::Gscp => {
            let ivs = kernel.fold_breakpoints(y, qy, i)?;
            let contour = contour_from_breakpoints(&ivs, &ContourWeights::Uniform { n: n_bag })?;
            let t = conformal_threshold(n_bag, config.alpha)?;
            let set = contour.level_set(t, config.alpha);
            fold_outcome_from_set(&set, contour.evaluate(y_true) >= t, y_true, s_x, config.alpha)
        }
        Method::Slscp { eta, cap: None } => {
            let ivs = kernel.fold_breakpoints(y, qy, i)?;
            let target = data.locations()[i];
            let dists: Vec<f64> = data
                .locations()
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, p)| p.dist(&target))
                .collect();
            let weights = ContourWeights::Kernel(kernel_weights(&dists, eta)?);
            let contour = contour_from_breakpoints(&ivs, &weights)?;
            let t = conformal_threshold(n_bag, config.alpha)?;
            let set = contour.level_set(t, config.alpha);
            fold_outcome_from_set(&set, contour.evaluate(y_true) >= t, y_true, s_x, config.alpha)
        }
        Method::Slscp { eta, cap: Some(m) } => {
            let rest = data.without(i);
            let target = data.locations()[i];
            let set = slscp_interval(
                &rest,
                &target,
                fold_params(config),
                config.alpha,
                eta,
                Some(m.min(rest.len())),
                &NonConformity::SquaredStdKrigingResidual,
            )?;
            fold_outcome_from_set(&set, set.covers(y_true), y_true, s_x, config.alpha)
        }
        Method::Lscp { m } => {
            let rest = data.without(i);
            let target = data.locations()[i];
            let set = lscp_interval(
                &rest,
                &target,
                fold_params(config),
                config.alpha,
                m.min(rest.len()),
                &NonConformity::SquaredStdKrigingResidual,
            )?;
            fold_outcome_from_set(&set, set.covers(y_true), y_true, s_x, config.alpha)
        }
    }
}

/// The per-fold methods need concrete parameters; the estimate source is
/// resolved before folds run, so reaching this with `Estimate` is a bug.
fn fold_params(config: &EvalConfig) -> &MaternParams {
    match &config.params {
        ParamSource::Fixed(p) => p,
        ParamSource::Estimate => unreachable!("parameters resolved before folds"),
    }
}

fn resolve_params(data: &SpatialDataset, config: &EvalConfig) -> Result<EvalConfig> {
    let mut resolved = config.clone();
    if let ParamSource::Estimate = config.params {
        let fit = fit_matern_default(data)?;
        resolved.params = ParamSource::Fixed(fit.params);
    }
    Ok(resolved)
}

fn aggregate(
    outcomes: &[Result<FoldOutcome>],
    config: &EvalConfig,
    n_replicates: usize,
) -> EvalReport {
    let mut covered = 0usize;
    let mut n_ok = 0usize;
    let mut unbounded = 0usize;
    let mut failed = 0usize;
    let mut width_sum = 0.0;
    let mut score_sum = 0.0;
    let mut bounded = 0usize;
    let mut columns: Vec<(f64, Vec<&FoldOutcome>)> = Vec::new();
    for o in outcomes {
        match o {
            Err(_) => failed += 1,
            Ok(f) => {
                n_ok += 1;
                if f.covered {
                    covered += 1;
                }
                match f.width_score {
                    None => unbounded += 1,
                    Some((w, s)) => {
                        bounded += 1;
                        width_sum += w;
                        score_sum += s;
                    }
                }
                if config.by_column {
                    match columns.iter_mut().find(|(x, _)| *x == f.s_x) {
                        Some((_, v)) => v.push(f),
                        None => columns.push((f.s_x, vec![f])),
                    }
                }
            }
        }
    }
    let by_column = if config.by_column {
        columns.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        Some(
            columns
                .into_iter()
                .map(|(s_x, folds)| {
                    let n = folds.len();
                    let cov = folds.iter().filter(|f| f.covered).count() as f64 / n as f64;
                    let b: Vec<(f64, f64)> = folds.iter().filter_map(|f| f.width_score).collect();
                    let nb = b.len().max(1) as f64;
                    ColumnStats {
                        s_x,
                        n,
                        coverage: cov,
                        mean_width: b.iter().map(|x| x.0).sum::<f64>() / nb,
                        interval_score: b.iter().map(|x| x.1).sum::<f64>() / nb,
                    }
                })
                .collect(),
        )
    } else {
        None
    };
    EvalReport {
        method: config.method.label(),
        alpha: config.alpha,
        coverage: if n_ok > 0 {
            covered as f64 / n_ok as f64
        } else {
            f64::NAN
        },
        mean_width: if bounded > 0 {
            width_sum / bounded as f64
        } else {
            f64::NAN
        },
        interval_score: if bounded > 0 {
            score_sum / bounded as f64
        } else {
            f64::NAN
        },
        n_locations: n_ok,
        n_replicates,
        unbounded_count: unbounded,
        failed_count: failed,
        by_column,
    }
}

/// Leave-one-out evaluation of one dataset: for each observation, the
/// interval at its location is built with that response withheld.
/// Failures are excluded and counted, never silently dropped.
pub fn loo_evaluate(data: &SpatialDataset, config: &EvalConfig) -> Result<EvalReport> {
    if data.len() < 10 {
        return Err(Error::Dataset(format!(
            "leave-one-out evaluation needs at least 10 observations, got {}",
            data.len()
        )));
    }
    let mut work = data.clone();
    if config.center {
        let offset = work.mean_response();
        work.shift_responses(offset);
    }
    let config = resolve_params(&work, config)?;
    let kernel = LooKernel::new(&work, fold_params(&config))?;
    let qy = kernel.qy(work.responses());

    let indices: Vec<usize> = (0..work.len()).collect();
    #[cfg(feature = "parallel")]
    let outcomes: Vec<Result<FoldOutcome>> = indices
        .par_iter()
        .map(|&i| run_fold(&kernel, &work, &qy, &config, i))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let outcomes: Vec<Result<FoldOutcome>> = indices
        .iter()
        .map(|&i| run_fold(&kernel, &work, &qy, &config, i))
        .collect();

    Ok(aggregate(&outcomes, &config, 1))
}

/// Replicated scenario evaluation: seeds base_seed, base_seed+1, … are
/// averaged with equal weight. Deterministic for a fixed seed set at any
/// parallelism (fixed reduction order).
pub fn evaluate_scenario(
    scenario_id: u8,
    grid_side: usize,
    replicates: usize,
    base_seed: u64,
    config: &EvalConfig,
) -> Result<EvalReport> {
    if replicates == 0 {
        return Err(Error::InvalidParam("need at least one replicate".into()));
    }
    let seeds: Vec<u64> = (0..replicates as u64).map(|r| base_seed + r).collect();
    #[cfg(feature = "parallel")]
    let reports: Vec<Result<EvalReport>> = seeds
        .par_iter()
        .map(|&seed| {
            let spec = ScenarioSpec::new(scenario_id, grid_side, seed)?;
            loo_evaluate(&generate_scenario(&spec)?, config)
        })
        .collect();
    #[cfg(not(feature = "parallel"))]
    let reports: Vec<Result<EvalReport>> = seeds
        .iter()
        .map(|&seed| {
            let spec = ScenarioSpec::new(scenario_id, grid_side, seed)?;
            loo_evaluate(&generate_scenario(&spec)?, config)
        })
        .collect();
    let reports: Vec<EvalReport> = reports.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(merge_reports(&reports))
}

/// Equal-weight average of per-replicate reports.
pub fn merge_reports(reports: &[EvalReport]) -> EvalReport {
    assert!(!reports.is_empty());
    let k = reports.len() as f64;
    let mut out = reports[0].clone();
    out.coverage = reports.iter().map(|r| r.coverage).sum::<f64>() / k;
    out.mean_width = reports.iter().map(|r| r.mean_width).sum::<f64>() / k;
    out.interval_score = reports.iter().map(|r| r.interval_score).sum::<f64>() / k;
    out.n_locations = reports.iter().map(|r| r.n_locations).sum();
    out.n_replicates = reports.len();
    out.unbounded_count = reports.iter().map(|r| r.unbounded_count).sum();
    out.failed_count = reports.iter().map(|r| r.failed_count).sum();
    out.by_column = reports[0].by_column.as_ref().map(|first| {
        let mut cols = first.clone();
        for r in &reports[1..] {
            for (c, rc) in cols.iter_mut().zip(r.by_column.as_ref().unwrap()) {
                c.coverage += rc.coverage;
                c.mean_width += rc.mean_width;
                c.interval_score += rc.interval_score;
                c.n += rc.n;
            }
        }
        for c in &mut cols {
            c.coverage /= k;
            c.mean_width /= k;
            c.interval_score /= k;
        }
        cols
    });
    out
}

/// Pick the bandwidth minimizing the mean interval score of sLSCP
/// intervals at seeded held-out validation locations; ties go to the
/// smaller candidate.
pub fn select_bandwidth(
    data: &SpatialDataset,
    candidate_etas: &[f64],
    alpha: f64,
    n_validation: usize,
    seed: u64,
    params: &MaternParams,
) -> Result<(f64, Vec<(f64, f64)>)> {
    if candidate_etas.is_empty() {
        return Err(Error::InvalidParam("no candidate bandwidths".into()));
    }
    if n_validation == 0 || n_validation >= data.len() {
        return Err(Error::InvalidParam(format!(
            "n_validation must be in 1..{}",
            data.len()
        )));
    }
    let (train_idx, val_idx, _) =
        crate::ingest::split_holdout(data, n_validation, 0, seed)?;
    let train = data.subset(&train_idx);
    let mut table = Vec::with_capacity(candidate_etas.len());
    let mut best: Option<(f64, f64)> = None;
    for &eta in candidate_etas {
        if !(eta > 0.0) {
            return Err(Error::InvalidParam(format!("bandwidth {eta} must be > 0")));
        }
        #[cfg(feature = "parallel")]
        let scores: Vec<Result<Option<f64>>> = val_idx
            .par_iter()
            .map(|&v| validation_score(&train, data, v, alpha, eta, params))
            .collect();
        #[cfg(not(feature = "parallel"))]
        let scores: Vec<Result<Option<f64>>> = val_idx
            .iter()
            .map(|&v| validation_score(&train, data, v, alpha, eta, params))
            .collect();
        let mut sum = 0.0;
        let mut count = 0usize;
        for s in scores {
            if let Some(v) = s? {
                sum += v;
                count += 1;
            }
        }
        let mean = if count > 0 { sum / count as f64 } else { f64::INFINITY };
        table.push((eta, mean));
        // strict improvement only: equal scores keep the earlier (smaller) η
        if best.map_or(true, |(_, b)| mean < b) {
            best = Some((eta, mean));
        }
    }
    Ok((best.expect("nonempty candidates").0, table))
}

fn validation_score(
    train: &SpatialDataset,
    data: &SpatialDataset,
    v: usize,
    alpha: f64,
    eta: f64,
    params: &MaternParams,
) -> Result<Option<f64>> {
    let target = data.locations()[v];
    let set = slscp_interval(
        train,
        &target,
        params,
        alpha,
        eta,
        None,
        &NonConformity::SquaredStdKrigingResidual,
    )?;
    match set.hull {
        Some([lo, hi]) if !set.unbounded => {
            Ok(Some(interval_score(lo, hi, data.responses()[v], alpha)?))
        }
        _ => Ok(None),
    }
}

/// One row of the fixed-parameter sensitivity experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub params: MaternParams,
    pub gscp_coverage: f64,
    pub gscp_width: f64,
    pub kriging_coverage: f64,
    pub kriging_width: f64,
}

/// The nine parameter rows: truth, then each of the four parameters moved
/// by plus or minus half its true value.
pub fn sensitivity_rows() -> Vec<MaternParams> {
    let rows: [(f64, f64, f64, f64); 9] = [
        (1.0, 3.0, 0.10, 0.70),
        (1.5, 3.0, 0.10, 0.70),
        (0.5, 3.0, 0.10, 0.70),
        (1.0, 4.5, 0.10, 0.70),
        (1.0, 1.5, 0.10, 0.70),
        (1.0, 3.0, 0.15, 0.70),
        (1.0, 3.0, 0.05, 0.70),
        (1.0, 3.0, 0.10, 1.05),
        (1.0, 3.0, 0.10, 0.35),
    ];
    rows.iter()
        .map(|&(nugget, partial_sill, range, smoothness)| MaternParams {
            nugget,
            partial_sill,
            range,
            smoothness,
        })
        .collect()
}

/// Fixed-Θ sensitivity sweep over Gaussian stationary data: every row is
/// evaluated on the same replicate datasets with GSCP and Kriging. The
/// per-row precision matrix is factorized once and reused across
/// replicates since the grid is fixed.
pub fn sensitivity_sweep(
    grid_side: usize,
    replicates: usize,
    base_seed: u64,
    alpha: f64,
    rows: &[MaternParams],
) -> Result<Vec<SensitivityRow>> {
    let datasets: Vec<SpatialDataset> = (0..replicates as u64)
        .map(|r| generate_scenario(&ScenarioSpec::new(1, grid_side, base_seed + r)?))
        .collect::<Result<Vec<_>>>()?;

    let run_row = |params: &MaternParams| -> Result<SensitivityRow> {
        let kernel = LooKernel::new(&datasets[0], params)?;
        let gscp_cfg = EvalConfig::new(Method::Gscp, alpha).with_params(*params);
        let krig_cfg = EvalConfig::new(Method::Kriging, alpha).with_params(*params);
        let mut acc = [0.0f64; 4]; // gscp cov, gscp width, krig cov, krig width
        for data in &datasets {
            let qy = kernel.qy(data.responses());
            let mut reps = [Vec::new(), Vec::new()];
            for i in 0..data.len() {
                reps[0].push(run_fold(&kernel, data, &qy, &gscp_cfg, i));
                reps[1].push(run_fold(&kernel, data, &qy, &krig_cfg, i));
            }
            let g = aggregate(&reps[0], &gscp_cfg, 1);
            let k = aggregate(&reps[1], &krig_cfg, 1);
            acc[0] += g.coverage;
            acc[1] += g.mean_width;
            acc[2] += k.coverage;
            acc[3] += k.mean_width;
        }
        let k = replicates as f64;
        Ok(SensitivityRow {
            params: *params,
            gscp_coverage: acc[0] / k,
            gscp_width: acc[1] / k,
            kriging_coverage: acc[2] / k,
            kriging_width: acc[3] / k,
        })
    };

    #[cfg(feature = "parallel")]
    let out: Vec<Result<SensitivityRow>> = rows.par_iter().map(run_row).collect();
    #[cfg(not(feature = "parallel"))]
    let out: Vec<Result<SensitivityRow>> = rows.iter().map(run_row).collect();
    out.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conformal::gscp_interval;
    use crate::Point;
    use approx::assert_relative_eq;

    fn fixed() -> MaternParams {
        MaternParams {
            nugget: 1.0,
            partial_sill: 3.0,
            range: 0.1,
            smoothness: 0.7,
        }
    }

    #[test]
    fn interval_score_cases() {
        // covered: just the width
        assert_relative_eq!(interval_score(-1.0, 1.0, 0.3, 0.1).unwrap(), 2.0);
        // miss below by 1 at α = 0.1: width 2 plus 20
        assert_relative_eq!(interval_score(0.0, 2.0, -1.0, 0.1).unwrap(), 22.0);
        // miss above
        assert_relative_eq!(interval_score(0.0, 2.0, 2.5, 0.2).unwrap(), 7.0);
        // vector case against a hand-summed oracle
        let obs = [(-1.0, 1.0, 0.0), (-1.0, 1.0, 2.0), (0.0, 4.0, 1.0), (0.0, 1.0, -0.5), (2.0, 3.0, 2.5)];
        let alpha = 0.25;
        let total: f64 = obs
            .iter()
            .map(|&(l, u, y)| interval_score(l, u, y, alpha).unwrap())
            .sum();
        let hand = 2.0 + (2.0 + 8.0 * 1.0) + 4.0 + (1.0 + 8.0 * 0.5) + 1.0;
        assert_relative_eq!(total, hand, epsilon = 1e-12);
        assert!(interval_score(1.0, 0.0, 0.5, 0.1).is_err());
        assert!(interval_score(0.0, 1.0, 0.5, 0.0).is_err());
    }

    #[test]
    fn score_decomposes_into_width_plus_penalties() {
        for &(l, u, y) in &[(0.0, 1.0, 0.5), (0.0, 1.0, -2.0), (0.0, 1.0, 4.0)] {
            let alpha = 0.1;
            let s = interval_score(l, u, y, alpha).unwrap();
            let under = (l - y).max(0.0);
            let over = (y - u).max(0.0);
            assert_relative_eq!(s, (u - l) + 2.0 / alpha * (under + over), epsilon = 1e-12);
            assert!(s >= u - l);
        }
    }

    #[test]
    fn shared_fold_matches_public_gscp() {
        let data = generate_scenario(&ScenarioSpec::new(1, 5, 77).unwrap()).unwrap();
        let p = fixed();
        let config = EvalConfig::new(Method::Gscp, 0.2).with_params(p);
        let kernel = LooKernel::new(&data, &p).unwrap();
        let qy = kernel.qy(data.responses());
        for i in [0usize, 7, 13, 24] {
            let ivs = kernel.fold_breakpoints(data.responses(), &qy, i).unwrap();
            let contour =
                contour_from_breakpoints(&ivs, &ContourWeights::Uniform { n: data.len() - 1 })
                    .unwrap();
            let t = conformal_threshold(data.len() - 1, config.alpha).unwrap();
            let fast = contour.level_set(t, config.alpha);

            let rest = data.without(i);
            let slow = gscp_interval(
                &rest,
                &data.locations()[i],
                &p,
                config.alpha,
                &NonConformity::SquaredStdKrigingResidual,
            )
            .unwrap();
            assert_eq!(fast.unbounded, slow.unbounded);
            assert_eq!(fast.components.len(), slow.components.len());
            for (a, b) in fast.components.iter().zip(slow.components.iter()) {
                assert_relative_eq!(a[0], b[0], epsilon = 1e-7);
                assert_relative_eq!(a[1], b[1], epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn kriging_loo_coverage_near_nominal_under_the_truth() {
        // Gaussian data evaluated with the generating parameters
        let config = EvalConfig::new(Method::Kriging, 0.1).with_params(fixed());
        let report = evaluate_scenario(1, 15, 8, 4242, &config).unwrap();
        assert!(
            (report.coverage - 0.9).abs() < 0.04,
            "kriging coverage {} should be near 0.90",
            report.coverage
        );
        assert_eq!(report.failed_count, 0);
        assert_eq!(report.unbounded_count, 0);
    }

    #[test]
    fn gscp_loo_coverage_near_nominal() {
        let config = EvalConfig::new(Method::Gscp, 0.1).with_params(fixed());
        let report = evaluate_scenario(1, 15, 8, 1717, &config).unwrap();
        assert!(
            (report.coverage - 0.9).abs() < 0.04,
            "gscp coverage {} should be near 0.90",
            report.coverage
        );
    }

    #[test]
    fn degenerate_alpha_gives_unbounded_sets_and_full_coverage() {
        // n small enough that t_{n-1}(α) = 0
        let data = generate_scenario(&ScenarioSpec::new(1, 4, 5).unwrap()).unwrap();
        let sub = data.subset(&(0..10).collect::<Vec<_>>());
        let config = EvalConfig::new(Method::Gscp, 0.1).with_params(fixed());
        let report = loo_evaluate(&sub, &config).unwrap();
        assert_eq!(report.coverage, 1.0);
        assert_eq!(report.unbounded_count, 10);
        assert!(report.mean_width.is_nan());
    }

    #[test]
    fn report_is_deterministic() {
        let config = EvalConfig::new(Method::Slscp { eta: 0.2, cap: None }, 0.1)
            .with_params(fixed())
            .with_by_column(true);
        let a = evaluate_scenario(6, 8, 3, 99, &config).unwrap();
        let b = evaluate_scenario(6, 8, 3, 99, &config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn by_column_grouping_covers_all_folds() {
        let config = EvalConfig::new(Method::Gscp, 0.1)
            .with_params(fixed())
            .with_by_column(true);
        let data = generate_scenario(&ScenarioSpec::new(5, 8, 11).unwrap()).unwrap();
        let report = loo_evaluate(&data, &config).unwrap();
        let cols = report.by_column.unwrap();
        assert_eq!(cols.len(), 8);
        assert_eq!(cols.iter().map(|c| c.n).sum::<usize>(), 64);
        for w in cols.windows(2) {
            assert!(w[0].s_x < w[1].s_x);
        }
    }

    #[test]
    fn select_bandwidth_tie_and_single_candidate_rules() {
        let data = generate_scenario(&ScenarioSpec::new(1, 8, 31).unwrap()).unwrap();
        let p = fixed();
        let (eta, table) = select_bandwidth(&data, &[0.17], 0.2, 8, 5, &p).unwrap();
        assert_eq!(eta, 0.17);
        assert_eq!(table.len(), 1);
        // identical candidates: the first (smaller index) wins
        let (eta, table) = select_bandwidth(&data, &[0.17, 0.17], 0.2, 8, 5, &p).unwrap();
        assert_eq!(eta, 0.17);
        assert_eq!(table[0].1, table[1].1);
        assert!(select_bandwidth(&data, &[], 0.2, 8, 5, &p).is_err());
        assert!(select_bandwidth(&data, &[0.1], 0.2, 64, 5, &p).is_err());
    }

    #[test]
    fn slscp_capped_path_runs() {
        let config = EvalConfig::new(
            Method::Slscp {
                eta: 0.15,
                cap: Some(30),
            },
            0.1,
        )
        .with_params(fixed());
        let data = generate_scenario(&ScenarioSpec::new(6, 7, 2).unwrap()).unwrap();
        let report = loo_evaluate(&data, &config).unwrap();
        assert_eq!(report.failed_count, 0);
        assert!(report.coverage > 0.5);
    }

    #[test]
    fn lscp_full_neighbourhood_matches_gscp_metrics() {
        let data = generate_scenario(&ScenarioSpec::new(1, 6, 8).unwrap()).unwrap();
        let g = loo_evaluate(&data, &EvalConfig::new(Method::Gscp, 0.2).with_params(fixed()))
            .unwrap();
        let l = loo_evaluate(
            &data,
            &EvalConfig::new(Method::Lscp { m: data.len() - 1 }, 0.2).with_params(fixed()),
        )
        .unwrap();
        assert_eq!(g.coverage, l.coverage);
        assert_relative_eq!(g.mean_width, l.mean_width, max_relative = 1e-6);
    }

    #[test]
    fn centering_changes_nothing_for_centered_data_and_helps_shifted() {
        let data = generate_scenario(&ScenarioSpec::new(1, 8, 21).unwrap()).unwrap();
        let mut shifted = data.clone();
        shifted.shift_responses(-50.0); // add 50 to every response
        let p = fixed();
        let no_center = EvalConfig::new(Method::Kriging, 0.1).with_params(p);
        let center = EvalConfig {
            center: true,
            ..no_center.clone()
        };
        let base = loo_evaluate(&data, &no_center).unwrap();
        let shifted_centered = loo_evaluate(&shifted, &center).unwrap();
        // centering restores the mean-zero setting up to the sample mean
        assert!((shifted_centered.coverage - base.coverage).abs() < 0.05);
        let shifted_raw = loo_evaluate(&shifted, &no_center).unwrap();
        assert!(
            shifted_raw.coverage < shifted_centered.coverage,
            "uncentered {} vs centered {}",
            shifted_raw.coverage,
            shifted_centered.coverage
        );
    }

    #[test]
    fn sensitivity_rows_layout() {
        let rows = sensitivity_rows();
        assert_eq!(rows.len(), 9);
        assert_eq!(rows[0].nugget, 1.0);
        assert_eq!(rows[1].nugget, 1.5);
        assert_eq!(rows[2].nugget, 0.5);
        assert_eq!(rows[7].smoothness, 1.05);
        assert_eq!(rows[8].smoothness, 0.35);
    }

    #[test]
    fn sensitivity_smoke_two_rows() {
        let rows = vec![fixed(), MaternParams { nugget: 0.5, ..fixed() }];
        let out = sensitivity_sweep(6, 3, 7, 0.1, &rows).unwrap();
        assert_eq!(out.len(), 2);
        for r in &out {
            assert!(r.gscp_coverage > 0.5 && r.gscp_coverage <= 1.0);
            assert!(r.kriging_width > 0.0);
        }
    }
}

//! Benchmark harness: runs the estimator (or the RANSAC baseline) over a
//! list of (correspondences, ground truth) pairs and renders one CSV row per
//! pair plus a footer with recall and throughput. Rows keep their input
//! order no matter how many worker threads run the pairs.

use std::fmt::Write as _;

use turboreg_core::{
    estimate, estimate_resolution, ransac_baseline, rotation_error, translation_error,
    CorrespondenceSet, Error, EstimatorParams, RigidTransform, SuccessCriteria,
};

use crate::document::StageTimingsDoc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Turboreg,
    Ransac,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Turboreg => "turboreg",
            Method::Ransac => "ransac",
        }
    }
}

/// One benchmark pair. The synthetic columns are None for dataset pairs.
pub struct BenchInput {
    pub id: String,
    pub corr: CorrespondenceSet,
    pub gt: RigidTransform,
    pub outlier_ratio: Option<f64>,
    pub noise_sigma: Option<f64>,
    pub seed: Option<u64>,
}

pub struct BenchRow {
    pub method: &'static str,
    pub id: String,
    pub n: usize,
    pub outlier_ratio: Option<f64>,
    pub noise_sigma: Option<f64>,
    pub seed: Option<u64>,
    /// Edge threshold the run actually used; None for the baseline, which
    /// has no graph stage.
    pub tau: Option<f64>,
    pub k1: usize,
    pub k2: usize,
    pub inlier_thresh: f64,
    pub graph: &'static str,
    /// NaN when the pair produced no transform.
    pub re_deg: f64,
    pub te_m: f64,
    pub success: bool,
    pub inlier_count: usize,
    pub hypotheses_evaluated: usize,
    pub neighbor_checks: u64,
    pub timings: StageTimingsDoc,
}

pub struct BenchOptions {
    pub method: Method,
    /// Template; `tau` is overridden per pair when `tau_override` is None.
    pub params: EstimatorParams,
    pub tau_override: Option<f64>,
    pub criteria: SuccessCriteria,
    /// Baseline sampling seed; pair k draws from `base + k`.
    pub ransac_seed: u64,
    pub suppress_timings: bool,
}

fn failure_row(input: &BenchInput, opts: &BenchOptions, tau: Option<f64>) -> BenchRow {
    BenchRow {
        method: opts.method.as_str(),
        id: input.id.clone(),
        n: input.corr.len(),
        outlier_ratio: input.outlier_ratio,
        noise_sigma: input.noise_sigma,
        seed: input.seed,
        tau,
        k1: opts.params.k1,
        k2: opts.params.k2,
        inlier_thresh: opts.params.inlier_threshold,
        graph: opts.params.graph_mode.as_str(),
        re_deg: f64::NAN,
        te_m: f64::NAN,
        success: false,
        inlier_count: 0,
        hypotheses_evaluated: 0,
        neighbor_checks: 0,
        timings: StageTimingsDoc::zero(),
    }
}

fn run_one(index: usize, input: &BenchInput, opts: &BenchOptions) -> Result<BenchRow, String> {
    let (result, tau) = match opts.method {
        Method::Turboreg => {
            let tau = match opts.tau_override {
                Some(t) => t,
                None => {
                    0.25 * estimate_resolution(&input.corr.source_points())
                        .map_err(|e| format!("pair {}: {e}", input.id))?
                }
            };
            let mut params = opts.params.clone();
            params.tau = tau;
            match estimate(&input.corr, &params) {
                Ok(r) => (r, Some(tau)),
                Err(Error::NoHypothesis { .. }) => {
                    return Ok(failure_row(input, opts, Some(tau)));
                }
                Err(e) => return Err(format!("pair {}: {e}", input.id)),
            }
        }
        Method::Ransac => {
            let budget = opts.params.k1 * opts.params.k2;
            let seed = opts.ransac_seed.wrapping_add(index as u64);
            match ransac_baseline(&input.corr, budget, opts.params.inlier_threshold, seed) {
                Ok(r) => (r, None),
                Err(Error::NoHypothesis { .. }) => return Ok(failure_row(input, opts, None)),
                Err(e) => return Err(format!("pair {}: {e}", input.id)),
            }
        }
    };
    let re_deg = rotation_error(result.best_transform.rotation(), input.gt.rotation())
        .map_err(|e| format!("pair {}: {e}", input.id))?;
    let te_m = translation_error(result.best_transform.translation(), input.gt.translation());
    Ok(BenchRow {
        method: opts.method.as_str(),
        id: input.id.clone(),
        n: input.corr.len(),
        outlier_ratio: input.outlier_ratio,
        noise_sigma: input.noise_sigma,
        seed: input.seed,
        tau,
        k1: opts.params.k1,
        k2: opts.params.k2,
        inlier_thresh: opts.params.inlier_threshold,
        graph: opts.params.graph_mode.as_str(),
        re_deg,
        te_m,
        success: re_deg <= opts.criteria.re_max_deg && te_m <= opts.criteria.te_max_m,
        inlier_count: result.best_inlier_count,
        hypotheses_evaluated: result.hypotheses_evaluated,
        neighbor_checks: result.neighbor_checks,
        timings: if opts.suppress_timings {
            StageTimingsDoc::zero()
        } else {
            (&result.stage_timings).into()
        },
    })
}

/// Run every pair, in parallel when a wider rayon pool is installed, and
/// return rows in input order.
pub fn run_pairs(inputs: &[BenchInput], opts: &BenchOptions) -> Result<Vec<BenchRow>, String> {
    use rayon::prelude::*;
    inputs
        .par_iter()
        .enumerate()
        .map(|(k, input)| run_one(k, input, opts))
        .collect()
}

pub const BENCH_HEADER: &str = "method,pair,n,outlier_ratio,noise_sigma,seed,tau,k1,k2,\
inlier_thresh,graph,re_deg,te_m,success,inlier_count,hypotheses_evaluated,neighbor_checks,\
graph_s,pgs_s,model_s,total_s";

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn render_csv(rows: &[BenchRow], suppress_timings: bool) -> String {
    let mut out = String::new();
    out.push_str(BENCH_HEADER);
    out.push('\n');
    let mut successes = 0usize;
    let mut elapsed = 0.0f64;
    for r in rows {
        successes += r.success as usize;
        elapsed += r.timings.total();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.method,
            r.id,
            r.n,
            opt(r.outlier_ratio),
            opt(r.noise_sigma),
            opt(r.seed),
            opt(r.tau),
            r.k1,
            r.k2,
            r.inlier_thresh,
            r.graph,
            r.re_deg,
            r.te_m,
            r.success,
            r.inlier_count,
            r.hypotheses_evaluated,
            r.neighbor_checks,
            r.timings.graph_s,
            r.timings.pgs_s,
            r.timings.model_s,
            r.timings.total(),
        );
    }
    let rr = successes as f64 / rows.len() as f64;
    let mut footer = format!("# pairs={} successes={} rr={}", rows.len(), successes, rr);
    if !suppress_timings && elapsed > 0.0 {
        let _ = write!(footer, " fps={}", rows.len() as f64 / elapsed);
    }
    out.push_str(&footer);
    out.push('\n');
    out
}

//! Rigid-model estimation: a Kabsch solver, hypothesis scoring by inlier
//! count, the full graph -> search -> model pipeline, and a seeded RANSAC
//! baseline for head-to-head comparisons.

use std::time::Instant;

use nalgebra::{Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{build_first_order, build_sc2, to_o2graph};
use crate::pgs::{pgs_search, TurboClique};
use crate::types::{
    CorrespondenceSet, EstimatorParams, GraphMode, Point3, RigidTransform, StageTimings,
};

/// Relative singular-value floor below which the centered source points are
/// treated as collinear or coincident and the pose is ambiguous. Points that
/// are collinear up to construction rounding still show a second singular
/// value near sqrt(machine epsilon) relative to the first, so the floor must
/// sit above ~1e-8 to catch them.
const DEGENERACY_REL_TOL: f64 = 1e-6;

/// Least-squares rigid fit of `source` onto `target` via SVD of the 3x3
/// cross-covariance, with the usual sign correction so the result is a proper
/// rotation, never a reflection. Errors only when the source configuration is
/// rank-deficient (all points collinear or coincident), where the rotation is
/// not determined.
pub fn kabsch(source: &[Point3], target: &[Point3]) -> Result<RigidTransform> {
    if source.len() < 3 {
        return Err(Error::TooFewCorrespondences { got: source.len() });
    }
    if source.len() != target.len() {
        return Err(Error::LengthMismatch {
            what: "target points",
            got: target.len(),
            expected: source.len(),
        });
    }
    for (index, p) in source.iter().chain(target.iter()).enumerate() {
        if !p.is_finite() {
            return Err(Error::NonFinite {
                what: "point coordinate",
                index: index % source.len(),
            });
        }
    }
    let nf = source.len() as f64;
    let mut sc = Vector3::zeros();
    let mut tc = Vector3::zeros();
    for (s, t) in source.iter().zip(target.iter()) {
        sc += s.to_vector();
        tc += t.to_vector();
    }
    sc /= nf;
    tc /= nf;

    // Gram matrix of the centered sources: its eigenvalues are the squared
    // singular values of the source spread, which is what decides whether a
    // unique rotation exists at all.
    let mut gram = Matrix3::zeros();
    let mut cov = Matrix3::zeros();
    for (s, t) in source.iter().zip(target.iter()) {
        let x = s.to_vector() - sc;
        let y = t.to_vector() - tc;
        gram += x * x.transpose();
        cov += y * x.transpose();
    }
    let mut eig: Vec<f64> = gram.symmetric_eigenvalues().iter().copied().collect();
    eig.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let lam1 = eig[0].max(0.0);
    let lam2 = eig[1].max(0.0);
    if lam1 <= 0.0 || lam2.sqrt() <= DEGENERACY_REL_TOL * lam1.sqrt() {
        return Err(Error::DegenerateConfiguration {
            reason: "centered source points are collinear or coincident".into(),
        });
    }

    let svd = cov.svd(true, true);
    let u = svd.u.ok_or_else(|| Error::DegenerateConfiguration {
        reason: "SVD of cross-covariance failed".into(),
    })?;
    let v_t = svd.v_t.ok_or_else(|| Error::DegenerateConfiguration {
        reason: "SVD of cross-covariance failed".into(),
    })?;
    let mut d = Matrix3::identity();
    d[(2, 2)] = (u * v_t).determinant().signum();
    let rotation = u * d * v_t;
    let translation = tc - rotation * sc;
    RigidTransform::new(rotation, translation)
}

/// Count and collect (ascending) the correspondences whose residual
/// `||T(x_i) - y_i||` is at most `threshold`.
pub fn count_inliers(
    t: &RigidTransform,
    corr: &CorrespondenceSet,
    threshold: f64,
) -> Result<(usize, Vec<usize>)> {
    check_threshold(threshold)?;
    let indices: Vec<usize> = corr
        .iter()
        .enumerate()
        .filter(|(_, c)| t.apply(c.source).dist(&c.target) <= threshold)
        .map(|(i, _)| i)
        .collect();
    Ok((indices.len(), indices))
}

fn check_threshold(threshold: f64) -> Result<()> {
    if !threshold.is_finite() || threshold <= 0.0 {
        return Err(Error::invalid_param(
            "inlier_threshold",
            format!("must be finite and > 0, got {threshold}"),
        ));
    }
    Ok(())
}

/// Allocation-free scoring used in the hypothesis loops.
pub(crate) fn inlier_count_only(
    t: &RigidTransform,
    corr: &CorrespondenceSet,
    threshold: f64,
) -> usize {
    corr.iter()
        .filter(|c| t.apply(c.source).dist(&c.target) <= threshold)
        .count()
}

/// One scored hypothesis, kept when the caller asks for the full ranking.
#[derive(Debug, Clone)]
pub struct RankedHypothesis {
    pub clique: TurboClique,
    pub transform: RigidTransform,
    pub inlier_count: usize,
}

#[derive(Debug, Clone)]
pub struct RegistrationResult {
    pub best_transform: RigidTransform,
    pub best_inlier_count: usize,
    /// Ascending indices of the correspondences the winner explains.
    pub best_inlier_indices: Vec<usize>,
    pub best_clique: TurboClique,
    /// Cliques that produced a scored model (degenerate ones excluded).
    pub hypotheses_evaluated: usize,
    /// Cliques skipped because their source points were degenerate.
    pub degenerate_skips: usize,
    /// Candidate checks performed by the search stage.
    pub neighbor_checks: u64,
    /// All scored hypotheses, best first; populated when
    /// [`EstimatorParams::keep_ranked`] is set.
    pub ranked_hypotheses: Option<Vec<RankedHypothesis>>,
    pub stage_timings: StageTimings,
}

/// Order used to pick the winner: inlier count, then aggregated clique
/// weight, then ascending node triple. Total and deterministic.
fn better(a: (usize, u32, &[usize; 3]), b: (usize, u32, &[usize; 3])) -> bool {
    (a.0, a.1, std::cmp::Reverse(a.2)) > (b.0, b.1, std::cmp::Reverse(b.2))
}

/// Full pipeline: compatibility graph, second-order weights, optional
/// ordering, pivot-guided search, Kabsch per clique, inlier-count argmax.
/// Deterministic for fixed inputs regardless of thread count.
pub fn estimate(corr: &CorrespondenceSet, params: &EstimatorParams) -> Result<RegistrationResult> {
    params.validate()?;

    let t0 = Instant::now();
    let adjacency = build_first_order(corr, params.tau)?;
    let weighted = build_sc2(&adjacency);
    let graph = match params.graph_mode {
        GraphMode::Sc2 => weighted,
        GraphMode::O2 => to_o2graph(&weighted)?,
    };
    let graph_s = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let search = pgs_search(&graph, params.k1, params.k2)?;
    let pgs_s = t1.elapsed().as_secs_f64();

    let t2 = Instant::now();
    if search.cliques.is_empty() {
        return Err(Error::NoHypothesis {
            reason: "the search produced no clique".into(),
        });
    }
    let scored: Vec<Option<(TurboClique, RigidTransform, usize)>> = search
        .cliques
        .par_iter()
        .map(|clique| {
            let src: Vec<Point3> = clique.nodes.iter().map(|&k| corr[k].source).collect();
            let tgt: Vec<Point3> = clique.nodes.iter().map(|&k| corr[k].target).collect();
            match kabsch(&src, &tgt) {
                Ok(t) => {
                    let count = inlier_count_only(&t, corr, params.inlier_threshold);
                    Some((*clique, t, count))
                }
                Err(_) => None,
            }
        })
        .collect();

    let degenerate_skips = scored.iter().filter(|s| s.is_none()).count();
    let hypotheses_evaluated = scored.len() - degenerate_skips;
    let mut best: Option<&(TurboClique, RigidTransform, usize)> = None;
    for s in scored.iter().flatten() {
        let cand = (s.2, s.0.aggregated_weight, &s.0.nodes);
        match best {
            None => best = Some(s),
            Some(b) => {
                if better(cand, (b.2, b.0.aggregated_weight, &b.0.nodes)) {
                    best = Some(s);
                }
            }
        }
    }
    let Some(&(best_clique, mut best_transform, mut best_inlier_count)) = best else {
        return Err(Error::NoHypothesis {
            reason: format!("all {} cliques were degenerate", scored.len()),
        });
    };

    let (_, mut best_inlier_indices) =
        count_inliers(&best_transform, corr, params.inlier_threshold)?;

    if params.refine && best_inlier_indices.len() >= 3 {
        let src: Vec<Point3> = best_inlier_indices.iter().map(|&k| corr[k].source).collect();
        let tgt: Vec<Point3> = best_inlier_indices.iter().map(|&k| corr[k].target).collect();
        if let Ok(t) = kabsch(&src, &tgt) {
            let (count, indices) = count_inliers(&t, corr, params.inlier_threshold)?;
            best_transform = t;
            best_inlier_count = count;
            best_inlier_indices = indices;
        }
    } else {
        best_inlier_count = best_inlier_indices.len();
    }

    let ranked_hypotheses = if params.keep_ranked {
        let mut all: Vec<RankedHypothesis> = scored
            .iter()
            .flatten()
            .map(|(clique, transform, inlier_count)| RankedHypothesis {
                clique: *clique,
                transform: *transform,
                inlier_count: *inlier_count,
            })
            .collect();
        all.sort_unstable_by(|a, b| {
            b.inlier_count
                .cmp(&a.inlier_count)
                .then(b.clique.aggregated_weight.cmp(&a.clique.aggregated_weight))
                .then(a.clique.nodes.cmp(&b.clique.nodes))
        });
        Some(all)
    } else {
        None
    };
    let model_s = t2.elapsed().as_secs_f64();

    Ok(RegistrationResult {
        best_transform,
        best_inlier_count,
        best_inlier_indices,
        best_clique,
        hypotheses_evaluated,
        degenerate_skips,
        neighbor_checks: search.neighbor_checks,
        ranked_hypotheses,
        stage_timings: StageTimings {
            graph_s,
            pgs_s,
            model_s,
        },
    })
}

/// Plain RANSAC over uniformly sampled 3-point subsets, scored exactly like
/// the pipeline hypotheses. Deterministic for a fixed seed; the first-found
/// best is kept on ties.
pub fn ransac_baseline(
    corr: &CorrespondenceSet,
    iterations: usize,
    inlier_threshold: f64,
    seed: u64,
) -> Result<RegistrationResult> {
    if iterations == 0 {
        return Err(Error::invalid_param("iterations", "must be >= 1"));
    }
    check_threshold(inlier_threshold)?;
    let t0 = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let n = corr.len();
    let mut best: Option<(TurboClique, RigidTransform, usize)> = None;
    let mut degenerate_skips = 0usize;
    let mut evaluated = 0usize;
    for _ in 0..iterations {
        let pick = rand::seq::index::sample(&mut rng, n, 3);
        let (a, b, c) = (pick.index(0), pick.index(1), pick.index(2));
        let src = [corr[a].source, corr[b].source, corr[c].source];
        let tgt = [corr[a].target, corr[b].target, corr[c].target];
        match kabsch(&src, &tgt) {
            Ok(t) => {
                evaluated += 1;
                let count = inlier_count_only(&t, corr, inlier_threshold);
                let is_better = match &best {
                    None => true,
                    Some((_, _, best_count)) => count > *best_count,
                };
                if is_better {
                    best = Some((TurboClique::new(a, b, c, 0), t, count));
                }
            }
            Err(_) => degenerate_skips += 1,
        }
    }
    let Some((best_clique, best_transform, best_inlier_count)) = best else {
        return Err(Error::NoHypothesis {
            reason: format!("all {iterations} sampled triples were degenerate"),
        });
    };
    let (_, best_inlier_indices) = count_inliers(&best_transform, corr, inlier_threshold)?;
    let model_s = t0.elapsed().as_secs_f64();
    Ok(RegistrationResult {
        best_transform,
        best_inlier_count,
        best_inlier_indices,
        best_clique,
        hypotheses_evaluated: evaluated,
        degenerate_skips,
        neighbor_checks: 0,
        ranked_hypotheses: None,
        stage_timings: StageTimings {
            graph_s: 0.0,
            pgs_s: 0.0,
            model_s,
        },
    })
}

//! Evaluation protocol: pose error metrics, registration recall over pair
//! sets, ranking recalls over hypothesis lists, and a clique-stability
//! diagnostic that measures how much 3-point fits inside a large mutually
//! compatible clique disagree with the fit of the whole clique.

use std::collections::BTreeSet;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::graph::build_first_order;
use crate::pgs::TurboClique;
use crate::solver::{inlier_count_only, kabsch};
use crate::types::{is_valid_rotation, CorrespondenceSet, RigidTransform};

/// Angle in degrees between two proper rotations:
/// `arccos((trace(R_gt^T R_est) - 1) / 2)`. The argument is clamped to
/// [-1, 1]; values outside it by more than 1e-9 mean the inputs were not
/// rotations and are rejected, as are inputs failing the rotation check.
pub fn rotation_error(r_est: &Matrix3<f64>, r_gt: &Matrix3<f64>) -> Result<f64> {
    if !is_valid_rotation(r_est) {
        return Err(Error::InvalidRotation {
            reason: "estimate is not a proper rotation".into(),
        });
    }
    if !is_valid_rotation(r_gt) {
        return Err(Error::InvalidRotation {
            reason: "reference is not a proper rotation".into(),
        });
    }
    let arg = ((r_gt.transpose() * r_est).trace() - 1.0) / 2.0;
    if !(-1.0 - 1e-9..=1.0 + 1e-9).contains(&arg) {
        return Err(Error::InvalidRotation {
            reason: format!("arccos argument {arg} outside [-1, 1] guard band"),
        });
    }
    Ok(arg.clamp(-1.0, 1.0).acos().to_degrees())
}

/// Euclidean distance between two translations, meters.
pub fn translation_error(t_est: &Vector3<f64>, t_gt: &Vector3<f64>) -> f64 {
    (t_est - t_gt).norm()
}

/// A registration counts as successful when both errors are inside these
/// bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuccessCriteria {
    pub re_max_deg: f64,
    pub te_max_m: f64,
}

impl SuccessCriteria {
    pub fn validate(&self) -> Result<()> {
        if !self.re_max_deg.is_finite() || self.re_max_deg <= 0.0 {
            return Err(Error::invalid_param("re_max_deg", "must be > 0"));
        }
        if !self.te_max_m.is_finite() || self.te_max_m <= 0.0 {
            return Err(Error::invalid_param("te_max_m", "must be > 0"));
        }
        Ok(())
    }
}

/// Indoor-scene convention: 15 degrees, 0.30 m.
pub const INDOOR_CRITERIA: SuccessCriteria = SuccessCriteria {
    re_max_deg: 15.0,
    te_max_m: 0.30,
};

/// Driving-scene convention: 5 degrees, 0.60 m.
pub const KITTI_CRITERIA: SuccessCriteria = SuccessCriteria {
    re_max_deg: 5.0,
    te_max_m: 0.60,
};

/// What one registration attempt produced: `None` when it failed outright.
#[derive(Debug, Clone, Copy)]
pub struct PairOutcome {
    pub transform: Option<RigidTransform>,
    pub elapsed_s: f64,
}

/// Per-pair evaluation row. `re_deg`/`te_m` are NaN when the attempt failed.
#[derive(Debug, Clone, Copy)]
pub struct PairEval {
    pub re_deg: f64,
    pub te_m: f64,
    pub success: bool,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub per_pair: Vec<PairEval>,
    pub pairs: usize,
    pub successes: usize,
    /// successes / pairs.
    pub rr: f64,
    /// Means over successful pairs (NaN when there are none): the headline
    /// numbers.
    pub mean_re_success_deg: f64,
    pub mean_te_success_m: f64,
    /// Means over every pair that produced a transform, successful or not
    /// (NaN when none did); reported alongside for transparency.
    pub mean_re_all_deg: f64,
    pub mean_te_all_m: f64,
    /// pairs / total elapsed; `None` when no timing was recorded.
    pub fps: Option<f64>,
}

/// Score a batch of (outcome, ground truth) pairs against `criteria`.
/// Failed registrations count against recall but contribute no error values.
pub fn evaluate_pairs(
    pairs: &[(PairOutcome, RigidTransform)],
    criteria: &SuccessCriteria,
) -> Result<EvalReport> {
    criteria.validate()?;
    if pairs.is_empty() {
        return Err(Error::EmptyInput {
            what: "evaluation pairs",
        });
    }
    let mut per_pair = Vec::with_capacity(pairs.len());
    let mut successes = 0usize;
    let mut sum_re_s = 0.0;
    let mut sum_te_s = 0.0;
    let mut sum_re_all = 0.0;
    let mut sum_te_all = 0.0;
    let mut with_transform = 0usize;
    let mut elapsed = 0.0;
    for (outcome, gt) in pairs {
        elapsed += outcome.elapsed_s;
        match &outcome.transform {
            Some(est) => {
                let re = rotation_error(est.rotation(), gt.rotation())?;
                let te = translation_error(est.translation(), gt.translation());
                let success = re <= criteria.re_max_deg && te <= criteria.te_max_m;
                with_transform += 1;
                sum_re_all += re;
                sum_te_all += te;
                if success {
                    successes += 1;
                    sum_re_s += re;
                    sum_te_s += te;
                }
                per_pair.push(PairEval {
                    re_deg: re,
                    te_m: te,
                    success,
                    elapsed_s: outcome.elapsed_s,
                });
            }
            None => per_pair.push(PairEval {
                re_deg: f64::NAN,
                te_m: f64::NAN,
                success: false,
                elapsed_s: outcome.elapsed_s,
            }),
        }
    }
    let pairs_n = pairs.len();
    Ok(EvalReport {
        per_pair,
        pairs: pairs_n,
        successes,
        rr: successes as f64 / pairs_n as f64,
        mean_re_success_deg: sum_re_s / successes as f64,
        mean_te_success_m: sum_te_s / successes as f64,
        mean_re_all_deg: sum_re_all / with_transform as f64,
        mean_te_all_m: sum_te_all / with_transform as f64,
        fps: (elapsed > 0.0).then_some(pairs_n as f64 / elapsed),
    })
}

/// How hypothesis lists are ordered before measuring recalls.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankMetric {
    /// Inlier count at a residual threshold; higher is better.
    InlierCount,
    /// Mean absolute residual over all correspondences; lower is better.
    Mae,
    /// Mean squared residual over all correspondences; lower is better.
    Mse,
}

#[derive(Debug, Clone)]
pub struct RankingRecalls {
    /// Top-1 hypothesis scores at least as well as the ground truth does.
    pub tqrr_hit: bool,
    /// All three members of the top-1 clique are inliers under the ground
    /// truth.
    pub icrr_hit: bool,
    /// For each requested k: some hypothesis in the top k satisfies the
    /// success criteria.
    pub tkrr_hits: Vec<(usize, bool)>,
}

fn residual_stats(t: &RigidTransform, corr: &CorrespondenceSet) -> (f64, f64) {
    let mut abs = 0.0;
    let mut sq = 0.0;
    for c in corr.iter() {
        let r = t.apply(c.source).dist(&c.target);
        abs += r;
        sq += r * r;
    }
    let n = corr.len() as f64;
    (abs / n, sq / n)
}

/// Larger is better under every metric once mapped through this key.
fn metric_key(
    metric: RankMetric,
    t: &RigidTransform,
    corr: &CorrespondenceSet,
    threshold: f64,
) -> f64 {
    match metric {
        RankMetric::InlierCount => inlier_count_only(t, corr, threshold) as f64,
        RankMetric::Mae => -residual_stats(t, corr).0,
        RankMetric::Mse => -residual_stats(t, corr).1,
    }
}

/// Ranking recalls over a hypothesis list. The list is sorted here, by the
/// chosen metric with ascending node triples breaking ties, so callers hand
/// over hypotheses in any order.
#[allow(clippy::too_many_arguments)]
pub fn ranking_recalls(
    hypotheses: &[(TurboClique, RigidTransform)],
    metric: RankMetric,
    corr: &CorrespondenceSet,
    gt: &RigidTransform,
    inlier_labels: Option<&[bool]>,
    inlier_threshold: f64,
    criteria: &SuccessCriteria,
    ks: &[usize],
) -> Result<RankingRecalls> {
    criteria.validate()?;
    if hypotheses.is_empty() {
        return Err(Error::EmptyInput { what: "hypotheses" });
    }
    if ks.is_empty() || ks.iter().any(|&k| k == 0) {
        return Err(Error::invalid_param("ks", "need at least one k >= 1"));
    }
    if !inlier_threshold.is_finite() || inlier_threshold <= 0.0 {
        return Err(Error::invalid_param("inlier_threshold", "must be > 0"));
    }
    if let Some(labels) = inlier_labels {
        if labels.len() != corr.len() {
            return Err(Error::LengthMismatch {
                what: "inlier labels",
                got: labels.len(),
                expected: corr.len(),
            });
        }
    }

    let mut keyed: Vec<(f64, &(TurboClique, RigidTransform))> = hypotheses
        .iter()
        .map(|h| (metric_key(metric, &h.1, corr, inlier_threshold), h))
        .collect();
    keyed.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap()
            .then(a.1 .0.nodes.cmp(&b.1 .0.nodes))
    });

    let gt_key = metric_key(metric, gt, corr, inlier_threshold);
    let tqrr_hit = keyed[0].0 >= gt_key;

    let top_clique = &keyed[0].1 .0;
    let derived: Vec<bool>;
    let labels: &[bool] = match inlier_labels {
        Some(l) => l,
        None => {
            derived = corr
                .iter()
                .map(|c| gt.apply(c.source).dist(&c.target) <= inlier_threshold)
                .collect();
            &derived
        }
    };
    let icrr_hit = top_clique.nodes.iter().all(|&k| labels[k]);

    let mut tkrr_hits = Vec::with_capacity(ks.len());
    for &k in ks {
        let top = &keyed[..k.min(keyed.len())];
        let mut hit = false;
        for (_, (_, t)) in top {
            let re = rotation_error(t.rotation(), gt.rotation())?;
            let te = translation_error(t.translation(), gt.translation());
            if re <= criteria.re_max_deg && te <= criteria.te_max_m {
                hit = true;
                break;
            }
        }
        tkrr_hits.push((k, hit));
    }

    Ok(RankingRecalls {
        tqrr_hit,
        icrr_hit,
        tkrr_hits,
    })
}

/// Configuration for [`clique_stability_experiment`].
#[derive(Debug, Clone)]
pub struct StabilityConfig {
    /// Edge thresholds to diagnose, one output row each, in this order.
    pub taus: Vec<f64>,
    /// Members per grown clique; at least 4 so that 3-subsets are proper.
    pub clique_size: usize,
    /// Cliques collected per tau before stopping.
    pub max_cliques: usize,
    pub seed: u64,
}

impl StabilityConfig {
    pub fn new(taus: Vec<f64>, seed: u64) -> Self {
        StabilityConfig {
            taus,
            clique_size: 10,
            max_cliques: 50,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.taus.is_empty() {
            return Err(Error::EmptyInput { what: "taus" });
        }
        if self.taus.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::invalid_param("taus", "must be finite and >= 0"));
        }
        if self.clique_size < 4 {
            return Err(Error::invalid_param(
                "clique_size",
                "need at least 4 members so 3-subsets are proper subsets",
            ));
        }
        if self.max_cliques == 0 {
            return Err(Error::invalid_param("max_cliques", "must be >= 1"));
        }
        Ok(())
    }
}

/// Medians over all (big-clique fit, 3-subset fit) discrepancies at one tau.
#[derive(Debug, Clone, Copy)]
pub struct StabilityRow {
    pub tau: f64,
    pub median_dr_deg: f64,
    pub median_dt_m: f64,
    /// Number of pooled (rotation, translation) discrepancy samples.
    pub samples: usize,
}

/// Median with the midpoint convention for even counts. None on empty input.
pub fn median(mut xs: Vec<f64>) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = xs.len();
    Some(if m % 2 == 1 {
        xs[m / 2]
    } else {
        0.5 * (xs[m / 2 - 1] + xs[m / 2])
    })
}

/// Grow one random maximal-ish clique of exactly `size` members: start from a
/// random edge, repeatedly add a random common neighbor. Returns None on a
/// dead end.
fn grow_clique(
    g: &crate::graph::CompatGraph,
    edges: &[(usize, usize)],
    size: usize,
    rng: &mut ChaCha12Rng,
) -> Option<Vec<usize>> {
    let (i, j) = edges[rng.gen_range(0..edges.len())];
    let mut members = vec![i, j];
    let mut cand: Vec<u64> = g.row(i).iter().zip(g.row(j)).map(|(a, b)| a & b).collect();
    while members.len() < size {
        let ones: u32 = cand.iter().map(|w| w.count_ones()).sum();
        if ones == 0 {
            return None;
        }
        let mut pick = rng.gen_range(0..ones);
        let mut chosen = usize::MAX;
        'outer: for (w, &word) in cand.iter().enumerate() {
            let mut bits = word;
            while bits != 0 {
                let b = bits.trailing_zeros() as usize;
                if pick == 0 {
                    chosen = w * 64 + b;
                    break 'outer;
                }
                pick -= 1;
                bits &= bits - 1;
            }
        }
        members.push(chosen);
        for (w, word) in cand.iter_mut().enumerate() {
            *word &= g.row(chosen)[w];
        }
    }
    members.sort_unstable();
    Some(members)
}

/// Raw samples behind [`clique_stability_experiment`]: for each tau, every
/// (rotation deg, translation m) gap between a grown clique's fit and the fit
/// of one of its 3-subsets. An empty vector means no clique of the requested
/// size exists at that tau. Callers that sweep several instances can pool
/// these before taking medians.
pub fn clique_stability_samples(
    corr: &CorrespondenceSet,
    config: &StabilityConfig,
) -> Result<Vec<(f64, Vec<(f64, f64)>)>> {
    config.validate()?;
    let mut out = Vec::with_capacity(config.taus.len());
    for &tau in &config.taus {
        let g = build_first_order(corr, tau)?;
        let mut edges = Vec::new();
        for i in 0..g.n() {
            for j in g.neighbors(i) {
                if j > i {
                    edges.push((i, j));
                }
            }
        }
        if edges.is_empty() {
            out.push((tau, Vec::new()));
            continue;
        }
        // Same stream per tau: identical graphs then grow identical cliques,
        // which keeps rows comparable across thresholds.
        let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
        let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
        let mut cliques: Vec<Vec<usize>> = Vec::new();
        let max_attempts = config.max_cliques * 40;
        for _ in 0..max_attempts {
            if cliques.len() >= config.max_cliques {
                break;
            }
            if let Some(members) = grow_clique(&g, &edges, config.clique_size, &mut rng) {
                if seen.insert(members.clone()) {
                    cliques.push(members);
                }
            }
        }
        let mut pairs = Vec::new();
        for members in &cliques {
            let src: Vec<_> = members.iter().map(|&k| corr[k].source).collect();
            let tgt: Vec<_> = members.iter().map(|&k| corr[k].target).collect();
            let Ok(big) = kabsch(&src, &tgt) else {
                continue;
            };
            let m = members.len();
            for a in 0..m {
                for b in a + 1..m {
                    for c in b + 1..m {
                        let s3 = [src[a], src[b], src[c]];
                        let t3 = [tgt[a], tgt[b], tgt[c]];
                        let Ok(sub) = kabsch(&s3, &t3) else {
                            continue;
                        };
                        pairs.push((
                            rotation_error(sub.rotation(), big.rotation())?,
                            translation_error(sub.translation(), big.translation()),
                        ));
                    }
                }
            }
        }
        out.push((tau, pairs));
    }
    Ok(out)
}

/// For each tau: build the first-order graph, grow up to `max_cliques`
/// distinct cliques of `clique_size` members, fit the whole clique and every
/// 3-subset, and report medians over the pooled rotation/translation
/// discrepancies. A tau where no clique of the requested size exists yields
/// `None`.
pub fn clique_stability_experiment(
    corr: &CorrespondenceSet,
    config: &StabilityConfig,
) -> Result<Vec<(f64, Option<StabilityRow>)>> {
    let per_tau = clique_stability_samples(corr, config)?;
    Ok(per_tau
        .into_iter()
        .map(|(tau, pairs)| {
            if pairs.is_empty() {
                return (tau, None);
            }
            let samples = pairs.len();
            let (dr, dt): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            (
                tau,
                Some(StabilityRow {
                    tau,
                    median_dr_deg: median(dr).unwrap(),
                    median_dt_m: median(dt).unwrap(),
                    samples,
                }),
            )
        })
        .collect())
}

//! Correspondence-based rigid registration.
//!
//! Given putative 3D point matches, build a compatibility graph from pairwise
//! distance preservation, weight its edges by second-order consistency
//! (shared-neighbor counts), search the heaviest edges for 3-cliques, fit a
//! rigid motion to each with a Kabsch solver, and keep the hypothesis that
//! explains the most correspondences. Everything downstream of the inputs is
//! deterministic, including under parallel execution.
//!
//! Modules:
//! - [`types`]: points, correspondences, rigid transforms, parameters
//! - [`graph`]: first-order adjacency, second-order weights, ordering
//! - [`pgs`]: pivot-guided 3-clique search plus a brute-force oracle
//! - [`solver`]: Kabsch, inlier scoring, the pipeline, a RANSAC baseline
//! - [`eval`]: error metrics, recall protocols, stability diagnostics
//! - [`synth`]: seeded synthetic instances with planted ground truth

pub mod error;
pub mod eval;
pub mod graph;
pub mod pgs;
pub mod solver;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
pub use eval::{
    clique_stability_experiment, clique_stability_samples, evaluate_pairs, median,
    ranking_recalls, rotation_error, translation_error, EvalReport, PairEval, PairOutcome,
    RankMetric, RankingRecalls, StabilityConfig, StabilityRow, SuccessCriteria, INDOOR_CRITERIA,
    KITTI_CRITERIA,
};
pub use graph::{
    build_first_order, build_sc2, estimate_resolution, to_o2graph, CompatGraph, WeightedGraph,
    MAX_DENSE_NODES,
};
pub use pgs::{
    brute_force_3cliques, common_neighbors, pgs_search, select_pivots, PgsOutput, Pivot,
    TurboClique, MAX_BRUTE_FORCE_NODES,
};
pub use solver::{
    count_inliers, estimate, kabsch, ransac_baseline, RankedHypothesis, RegistrationResult,
};
pub use synth::{generate, SynthConfig, SynthInstance};
pub use types::{
    is_valid_rotation, polar_project, Correspondence, CorrespondenceSet, EstimatorParams,
    GraphMode, Point3, RigidTransform, StageTimings, ROTATION_TOL,
};

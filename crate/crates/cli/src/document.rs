//! JSON result document written by the register command and consumed by the
//! eval command. serde_json prints f64 with shortest round-trip formatting,
//! so a document survives write/read without losing precision.

use serde::{Deserialize, Serialize};
use turboreg_core::{EstimatorParams, RegistrationResult, StageTimings};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageTimingsDoc {
    pub graph_s: f64,
    pub pgs_s: f64,
    pub model_s: f64,
}

impl StageTimingsDoc {
    pub fn zero() -> Self {
        StageTimingsDoc {
            graph_s: 0.0,
            pgs_s: 0.0,
            model_s: 0.0,
        }
    }

    pub fn total(&self) -> f64 {
        self.graph_s + self.pgs_s + self.model_s
    }
}

impl From<&StageTimings> for StageTimingsDoc {
    fn from(t: &StageTimings) -> Self {
        StageTimingsDoc {
            graph_s: t.graph_s,
            pgs_s: t.pgs_s,
            model_s: t.model_s,
        }
    }
}

/// Effective parameters echoed back so a document is self-describing. The
/// worker-thread count is deliberately absent: it never changes the result,
/// and documents must be byte-identical across --threads settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsEcho {
    pub tau: f64,
    pub k1: usize,
    pub k2: usize,
    pub inlier_threshold: f64,
    pub graph: String,
    pub refine: bool,
}

impl ParamsEcho {
    pub fn new(p: &EstimatorParams) -> Self {
        ParamsEcho {
            tau: p.tau,
            k1: p.k1,
            k2: p.k2,
            inlier_threshold: p.inlier_threshold,
            graph: p.graph_mode.as_str().to_string(),
            refine: p.refine,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub failure: bool,
    pub failure_reason: Option<String>,
    /// Row-major homogeneous 4x4; absent on failure.
    pub transform: Option<[f64; 16]>,
    pub inlier_count: usize,
    pub inlier_indices: Vec<usize>,
    pub hypotheses_evaluated: usize,
    pub neighbor_checks: u64,
    pub degenerate_skips: usize,
    pub stage_timings: StageTimingsDoc,
    pub params: ParamsEcho,
}

impl ResultDocument {
    pub fn from_result(
        r: &RegistrationResult,
        params: &EstimatorParams,
        suppress_timings: bool,
    ) -> Self {
        ResultDocument {
            failure: false,
            failure_reason: None,
            transform: Some(r.best_transform.to_row_major()),
            inlier_count: r.best_inlier_count,
            inlier_indices: r.best_inlier_indices.clone(),
            hypotheses_evaluated: r.hypotheses_evaluated,
            neighbor_checks: r.neighbor_checks,
            degenerate_skips: r.degenerate_skips,
            stage_timings: if suppress_timings {
                StageTimingsDoc::zero()
            } else {
                (&r.stage_timings).into()
            },
            params: ParamsEcho::new(params),
        }
    }

    pub fn from_failure(reason: String, params: &EstimatorParams) -> Self {
        ResultDocument {
            failure: true,
            failure_reason: Some(reason),
            transform: None,
            inlier_count: 0,
            inlier_indices: Vec::new(),
            hypotheses_evaluated: 0,
            neighbor_checks: 0,
            degenerate_skips: 0,
            stage_timings: StageTimingsDoc::zero(),
            params: ParamsEcho::new(params),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("document serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

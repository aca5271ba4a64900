//! Geometric primitives and the parameter vocabulary shared by the whole pipeline.
//!
//! Everything is `f64`. Indices into a correspondence set are 0-based and that
//! convention carries through every graph, clique, report and file format.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Per-entry tolerance for rotation validity: `|R^T R - I|` and `|det R - 1|`
/// must stay below this. Transforms produced by the solver satisfy it by
/// construction; ingested ones are checked against it.
pub const ROTATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Euclidean distance to `other`.
    pub fn dist(&self, other: &Point3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Point3::new(v.x, v.y, v.z)
    }
}

/// One putative match: a source point paired with a target point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub source: Point3,
    pub target: Point3,
}

impl Correspondence {
    pub fn new(source: Point3, target: Point3) -> Self {
        Correspondence { source, target }
    }
}

/// An ordered list of correspondences. Construction rejects sets that are too
/// small to seat a 3-point model and any non-finite coordinate, so downstream
/// code can assume both.
#[derive(Debug, Clone)]
pub struct CorrespondenceSet {
    items: Vec<Correspondence>,
}

impl CorrespondenceSet {
    pub fn new(items: Vec<Correspondence>) -> Result<Self> {
        if items.len() < 3 {
            return Err(Error::TooFewCorrespondences { got: items.len() });
        }
        for (index, c) in items.iter().enumerate() {
            if !c.source.is_finite() {
                return Err(Error::NonFinite {
                    what: "source coordinate",
                    index,
                });
            }
            if !c.target.is_finite() {
                return Err(Error::NonFinite {
                    what: "target coordinate",
                    index,
                });
            }
        }
        Ok(CorrespondenceSet { items })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    /// Always false: construction requires at least 3 items.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn as_slice(&self) -> &[Correspondence] {
        &self.items
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Correspondence> {
        self.items.iter()
    }

    pub fn source_points(&self) -> Vec<Point3> {
        self.items.iter().map(|c| c.source).collect()
    }

    pub fn target_points(&self) -> Vec<Point3> {
        self.items.iter().map(|c| c.target).collect()
    }
}

impl std::ops::Index<usize> for CorrespondenceSet {
    type Output = Correspondence;
    fn index(&self, i: usize) -> &Correspondence {
        &self.items[i]
    }
}

/// True when `r` is a proper rotation within [`ROTATION_TOL`] per entry.
pub fn is_valid_rotation(r: &Matrix3<f64>) -> bool {
    if r.iter().any(|v| !v.is_finite()) {
        return false;
    }
    let gram = r.transpose() * r;
    let mut max_dev: f64 = 0.0;
    for a in 0..3 {
        for b in 0..3 {
            let target = if a == b { 1.0 } else { 0.0 };
            max_dev = max_dev.max((gram[(a, b)] - target).abs());
        }
    }
    max_dev <= ROTATION_TOL && (r.determinant() - 1.0).abs() <= ROTATION_TOL
}

/// Nearest proper rotation to `m` (Frobenius sense), via SVD with a sign fix
/// on the smallest singular direction. Refuses inputs that are too far from a
/// rotation to make the projection honest: reflections (non-positive
/// determinant) and matrices whose singular values stray outside [0.5, 2].
pub fn polar_project(m: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidRotation {
            reason: "non-finite entries".into(),
        });
    }
    let svd = m.svd(true, true);
    let u = svd.u.ok_or_else(|| Error::InvalidRotation {
        reason: "SVD failed".into(),
    })?;
    let v_t = svd.v_t.ok_or_else(|| Error::InvalidRotation {
        reason: "SVD failed".into(),
    })?;
    for s in svd.singular_values.iter() {
        if !(0.5..=2.0).contains(s) {
            return Err(Error::InvalidRotation {
                reason: format!("singular value {s} too far from 1 to re-project"),
            });
        }
    }
    let det = (u * v_t).determinant();
    if m.determinant() <= 0.0 {
        return Err(Error::InvalidRotation {
            reason: "non-positive determinant (reflection or singular)".into(),
        });
    }
    let mut d = Matrix3::identity();
    d[(2, 2)] = det.signum();
    Ok(u * d * v_t)
}

/// A rigid motion `p -> R p + t` with `R` a proper rotation. Fields are
/// private so every value in circulation has passed validation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        if !is_valid_rotation(&rotation) {
            return Err(Error::InvalidRotation {
                reason: format!(
                    "orthonormality or determinant off by more than {ROTATION_TOL:.0e}"
                ),
            });
        }
        if translation.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "translation component",
                index: 0,
            });
        }
        Ok(RigidTransform {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        RigidTransform {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn apply(&self, p: Point3) -> Point3 {
        Point3::from_vector(&(self.rotation * p.to_vector() + self.translation))
    }

    /// `a.compose(b)` applies `b` first: `(a.compose(b)).apply(p) = a.apply(b.apply(p))`.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        let t = RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        };
        debug_assert!(is_valid_rotation(&t.rotation));
        t
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// Row-major 4x4 homogeneous matrix.
    pub fn to_row_major(&self) -> [f64; 16] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            t.x,
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            t.y,
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
            t.z,
            0.0,
            0.0,
            0.0,
            1.0,
        ]
    }

    /// Parse a row-major 4x4 homogeneous matrix. The bottom row must be
    /// `0 0 0 1` within 1e-9 and the upper-left block a valid rotation; the
    /// distinct error variants let callers decide whether to re-project.
    pub fn from_row_major(m: &[f64; 16]) -> Result<Self> {
        let expected = [0.0, 0.0, 0.0, 1.0];
        for (k, &e) in expected.iter().enumerate() {
            if (m[12 + k] - e).abs() > 1e-9 {
                return Err(Error::invalid_param(
                    "homogeneous matrix",
                    format!("bottom row entry {k} is {}, expected {e}", m[12 + k]),
                ));
            }
        }
        let rotation = Matrix3::new(m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10]);
        let translation = Vector3::new(m[3], m[7], m[11]);
        RigidTransform::new(rotation, translation)
    }

    /// [`from_row_major`](Self::from_row_major), except a rotation block that
    /// fails the strict gate is projected onto the nearest rotation via the
    /// polar decomposition; the flag reports whether that happened. Bad
    /// bottom rows and non-finite entries are not rescued, and neither are
    /// blocks the projection itself rejects (reflections, wild scaling).
    pub fn from_row_major_lenient(m: &[f64; 16]) -> Result<(Self, bool)> {
        match Self::from_row_major(m) {
            Ok(t) => Ok((t, false)),
            Err(Error::InvalidRotation { .. }) => {
                let rot = Matrix3::new(m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10]);
                let proj = polar_project(&rot)?;
                let t = RigidTransform::new(proj, Vector3::new(m[3], m[7], m[11]))?;
                Ok((t, true))
            }
            Err(e) => Err(e),
        }
    }
}

/// Which compatibility weights the clique search runs on: symmetric
/// second-order consistency counts, or the same counts restricted to the
/// upper triangle so each triangle has exactly one owner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GraphMode {
    Sc2,
    #[default]
    O2,
}

impl GraphMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            GraphMode::Sc2 => "sc2",
            GraphMode::O2 => "o2",
        }
    }
}

impl std::str::FromStr for GraphMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sc2" => Ok(GraphMode::Sc2),
            "o2" => Ok(GraphMode::O2),
            other => Err(Error::invalid_param(
                "graph_mode",
                format!("expected \"sc2\" or \"o2\", got {other:?}"),
            )),
        }
    }
}

/// Knobs for [`crate::solver::estimate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorParams {
    /// Distance-preservation threshold in meters for graph edges.
    pub tau: f64,
    /// Number of pivot edges to expand.
    pub k1: usize,
    /// Candidates kept per pivot.
    pub k2: usize,
    /// Residual bound in meters for counting a correspondence as an inlier.
    /// Independent of `tau`.
    pub inlier_threshold: f64,
    pub graph_mode: GraphMode,
    /// Reserved for randomized auxiliary paths; the default pipeline is
    /// deterministic and never draws from it.
    pub seed: u64,
    /// Re-fit once on the final inlier set. Off by default.
    pub refine: bool,
    /// Keep every scored hypothesis in the result, sorted best-first.
    pub keep_ranked: bool,
}

impl EstimatorParams {
    /// Defaults with an explicit `tau`: k1 = 1000, k2 = 2, inlier threshold
    /// 0.10 m, ordered graph, no refinement.
    pub fn new(tau: f64) -> Self {
        EstimatorParams {
            tau,
            k1: 1000,
            k2: 2,
            inlier_threshold: 0.10,
            graph_mode: GraphMode::O2,
            seed: 0,
            refine: false,
            keep_ranked: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.tau.is_finite() || self.tau < 0.0 {
            return Err(Error::invalid_param(
                "tau",
                format!("must be finite and >= 0, got {}", self.tau),
            ));
        }
        if self.k1 == 0 {
            return Err(Error::invalid_param("k1", "must be >= 1"));
        }
        if self.k2 == 0 {
            return Err(Error::invalid_param("k2", "must be >= 1"));
        }
        if !self.inlier_threshold.is_finite() || self.inlier_threshold <= 0.0 {
            return Err(Error::invalid_param(
                "inlier_threshold",
                format!("must be finite and > 0, got {}", self.inlier_threshold),
            ));
        }
        Ok(())
    }
}

/// Wall-clock seconds per pipeline stage.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StageTimings {
    pub graph_s: f64,
    pub pgs_s: f64,
    pub model_s: f64,
}

impl StageTimings {
    pub fn named(&self) -> [(&'static str, f64); 3] {
        [
            ("O2Graph Construction", self.graph_s),
            ("PGS", self.pgs_s),
            ("Model Estimation", self.model_s),
        ]
    }

    pub fn total(&self) -> f64 {
        self.graph_s + self.pgs_s + self.model_s
    }
}

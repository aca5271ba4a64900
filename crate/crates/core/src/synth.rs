//! Synthetic correspondence instances with a planted rigid motion.
//!
//! Source points are uniform in a cube of side `extent` centered at the
//! origin. A ground-truth motion is drawn (rotation uniform over SO(3) via a
//! normalized Gaussian quaternion, translation uniform in
//! `[-extent, extent]^3`). Inliers map through it with isotropic Gaussian
//! noise; outliers are uniform over the axis-aligned bounding box of the
//! transformed cube. Inlier positions are scattered over the index range.
//!
//! All randomness comes from one ChaCha12 stream (`rand_chacha`,
//! `seed_from_u64`), drawn in a fixed order, so a seed pins the instance
//! byte for byte.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::types::{Correspondence, CorrespondenceSet, Point3, RigidTransform};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    /// Total correspondences; at least 3.
    pub n: usize,
    /// Fraction of outliers in [0, 1). The inlier count is
    /// `round(n * (1 - outlier_ratio))`.
    pub outlier_ratio: f64,
    /// Standard deviation (meters, per axis) of inlier noise; >= 0.
    pub noise_sigma: f64,
    /// Side of the source cube; > 0.
    pub extent: f64,
    pub seed: u64,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::invalid_param(
                "n",
                format!("need at least 3 correspondences, got {}", self.n),
            ));
        }
        if !self.outlier_ratio.is_finite() || !(0.0..1.0).contains(&self.outlier_ratio) {
            return Err(Error::invalid_param(
                "outlier_ratio",
                format!(
                    "must lie in [0, 1); got {} (1.0 leaves no inliers)",
                    self.outlier_ratio
                ),
            ));
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return Err(Error::invalid_param(
                "noise_sigma",
                format!("must be finite and >= 0, got {}", self.noise_sigma),
            ));
        }
        if !self.extent.is_finite() || self.extent <= 0.0 {
            return Err(Error::invalid_param(
                "extent",
                format!("must be finite and > 0, got {}", self.extent),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SynthInstance {
    pub correspondences: CorrespondenceSet,
    pub gt: RigidTransform,
    /// `true` where the correspondence was planted as an inlier.
    pub inlier_mask: Vec<bool>,
}

impl SynthInstance {
    pub fn inlier_count(&self) -> usize {
        self.inlier_mask.iter().filter(|&&b| b).count()
    }
}

fn standard_normal(rng: &mut ChaCha12Rng) -> f64 {
    // Box-Muller; two uniforms per draw keeps the stream layout obvious.
    loop {
        let u1: f64 = rng.gen_range(0.0..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        if u1 > 0.0 {
            return (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
        }
    }
}

fn random_rotation(rng: &mut ChaCha12Rng) -> nalgebra::Matrix3<f64> {
    // Normalized 4-vector of Gaussians is uniform on the quaternion sphere.
    loop {
        let q = nalgebra::Quaternion::new(
            standard_normal(rng),
            standard_normal(rng),
            standard_normal(rng),
            standard_normal(rng),
        );
        if q.norm() > 1e-6 {
            let unit = nalgebra::UnitQuaternion::from_quaternion(q);
            return *unit.to_rotation_matrix().matrix();
        }
    }
}

pub fn generate(config: &SynthConfig) -> Result<SynthInstance> {
    config.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let half = config.extent / 2.0;

    // Draw order: rotation, translation, source points, inlier positions,
    // then per-point target data. Fixed so a seed identifies the instance.
    let rotation = random_rotation(&mut rng);
    let translation = nalgebra::Vector3::new(
        rng.gen_range(-config.extent..=config.extent),
        rng.gen_range(-config.extent..=config.extent),
        rng.gen_range(-config.extent..=config.extent),
    );
    let gt = RigidTransform::new(rotation, translation)?;

    let source: Vec<Point3> = (0..config.n)
        .map(|_| {
            Point3::new(
                rng.gen_range(-half..=half),
                rng.gen_range(-half..=half),
                rng.gen_range(-half..=half),
            )
        })
        .collect();

    let inliers = ((config.n as f64) * (1.0 - config.outlier_ratio)).round() as usize;
    let mut order: Vec<usize> = (0..config.n).collect();
    // Fisher-Yates with explicit draws, so the permutation is pinned to this
    // stream layout rather than to a library's internal shuffle.
    for i in (1..order.len()).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let mut inlier_mask = vec![false; config.n];
    for &k in order.iter().take(inliers) {
        inlier_mask[k] = true;
    }

    // Outliers live in the bounding box of the transformed source cube.
    let mut bb_min = [f64::INFINITY; 3];
    let mut bb_max = [f64::NEG_INFINITY; 3];
    for cx in [-half, half] {
        for cy in [-half, half] {
            for cz in [-half, half] {
                let q = gt.apply(Point3::new(cx, cy, cz));
                for (axis, v) in [q.x, q.y, q.z].into_iter().enumerate() {
                    bb_min[axis] = bb_min[axis].min(v);
                    bb_max[axis] = bb_max[axis].max(v);
                }
            }
        }
    }

    let noise_cap = 6.0 * config.noise_sigma;
    let items: Vec<Correspondence> = source
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let target = if inlier_mask[k] {
                let clean = gt.apply(p);
                // Re-draw the rare noise vector beyond six sigma so the
                // planted-inlier residual bound is unconditional.
                loop {
                    let noise = [
                        standard_normal(&mut rng) * config.noise_sigma,
                        standard_normal(&mut rng) * config.noise_sigma,
                        standard_normal(&mut rng) * config.noise_sigma,
                    ];
                    let norm =
                        (noise[0] * noise[0] + noise[1] * noise[1] + noise[2] * noise[2]).sqrt();
                    if norm <= noise_cap {
                        break Point3::new(
                            clean.x + noise[0],
                            clean.y + noise[1],
                            clean.z + noise[2],
                        );
                    }
                }
            } else {
                Point3::new(
                    rng.gen_range(bb_min[0]..=bb_max[0]),
                    rng.gen_range(bb_min[1]..=bb_max[1]),
                    rng.gen_range(bb_min[2]..=bb_max[2]),
                )
            };
            Correspondence::new(p, target)
        })
        .collect();

    Ok(SynthInstance {
        correspondences: CorrespondenceSet::new(items)?,
        gt,
        inlier_mask,
    })
}

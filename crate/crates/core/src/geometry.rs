//! 4x4 transform algebra and the alignment estimators that bring one window's
//! points into another window's coordinate frame.
//!
//! Both estimators fit the least-squares objective
//! `(1/A) * sum_k |dst_k - H src_k|^2` over the configured family; the mean
//! (unsquared) Euclidean residual is reported alongside.

use nalgebra::{DMatrix, Matrix3x4, Matrix4, SMatrix, Vector3, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Point3;

const DET_EPS: f64 = 1e-12;
const W_EPS: f64 = 1e-12;
/// Relative singular-value cutoff for rank decisions.
const RANK_EPS: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("transform has non-finite entries")]
    NonFinite,
    #[error("singular transform (|det| = {0:e})")]
    Singular(f64),
    #[error("projective point {index} maps to w = {w:e}")]
    PointAtInfinity { index: usize, w: f64 },
    #[error("{got} correspondences, need at least {need}")]
    InsufficientSupport { got: usize, need: usize },
    #[error("source has {src} points but destination has {dst}")]
    LengthMismatch { src: usize, dst: usize },
    #[error("degenerate support: {0}")]
    Degenerate(String),
}

/// Invertible 4x4 matrix acting on homogeneous 3D points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[[f64; 4]; 4]", into = "[[f64; 4]; 4]")]
pub struct Transform4(Matrix4<f64>);

impl Transform4 {
    pub fn identity() -> Self {
        Transform4(Matrix4::identity())
    }

    pub fn from_matrix(m: Matrix4<f64>) -> Result<Self, GeometryError> {
        if !m.iter().all(|v| v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let det = m.determinant();
        if det.abs() <= DET_EPS {
            return Err(GeometryError::Singular(det));
        }
        Ok(Transform4(m))
    }

    pub fn translation(t: Vector3<f64>) -> Self {
        Transform4(Matrix4::new_translation(&t))
    }

    /// Rotation by `angle` radians about `axis`, followed by translation `t`.
    pub fn rigid(axis: Vector3<f64>, angle: f64, t: Vector3<f64>) -> Self {
        let rot = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle);
        let mut m = rot.to_homogeneous();
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&t);
        Transform4(m)
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.0
    }

    /// True when the bottom row is exactly `(0, 0, 0, 1)`.
    pub fn is_affine(&self) -> bool {
        let r = self.0.row(3);
        r[0] == 0.0 && r[1] == 0.0 && r[2] == 0.0 && r[3] == 1.0
    }

    /// `self` applied after `other`.
    pub fn compose(&self, other: &Transform4) -> Transform4 {
        let mut m = self.0 * other.0;
        if self.is_affine() && other.is_affine() {
            m.set_row(3, &nalgebra::RowVector4::new(0.0, 0.0, 0.0, 1.0));
        }
        Transform4(m)
    }

    pub fn invert(&self) -> Result<Transform4, GeometryError> {
        if self.is_affine() {
            let lin = self.0.fixed_view::<3, 3>(0, 0).into_owned();
            let det = lin.determinant();
            if det.abs() <= DET_EPS {
                return Err(GeometryError::Singular(det));
            }
            let inv = lin.try_inverse().ok_or(GeometryError::Singular(det))?;
            let t = -(inv * self.0.fixed_view::<3, 1>(0, 3));
            let mut m = Matrix4::identity();
            m.fixed_view_mut::<3, 3>(0, 0).copy_from(&inv);
            m.fixed_view_mut::<3, 1>(0, 3).copy_from(&t);
            return Ok(Transform4(m));
        }
        let det = self.0.determinant();
        if det.abs() <= DET_EPS {
            return Err(GeometryError::Singular(det));
        }
        self.0
            .try_inverse()
            .map(Transform4)
            .ok_or(GeometryError::Singular(det))
    }

    /// Maps one point; fails only for projective transforms sending it to infinity.
    pub fn apply_point(&self, p: &Point3) -> Result<Point3, GeometryError> {
        let h = self.0 * p.to_homogeneous();
        if self.is_affine() {
            return Ok(Point3::new(h.x, h.y, h.z));
        }
        if h.w <= W_EPS {
            return Err(GeometryError::PointAtInfinity { index: 0, w: h.w });
        }
        Ok(Point3::new(h.x / h.w, h.y / h.w, h.z / h.w))
    }

    /// Affine part applied without the projective division.
    pub(crate) fn apply_affine(&self, p: &Point3) -> Point3 {
        let m = &self.0;
        Point3::new(
            m[(0, 0)] * p.x + m[(0, 1)] * p.y + m[(0, 2)] * p.z + m[(0, 3)],
            m[(1, 0)] * p.x + m[(1, 1)] * p.y + m[(1, 2)] * p.z + m[(1, 3)],
            m[(2, 0)] * p.x + m[(2, 1)] * p.y + m[(2, 2)] * p.z + m[(2, 3)],
        )
    }
}

impl TryFrom<[[f64; 4]; 4]> for Transform4 {
    type Error = GeometryError;

    fn try_from(rows: [[f64; 4]; 4]) -> Result<Self, Self::Error> {
        Transform4::from_matrix(Matrix4::from_fn(|r, c| rows[r][c]))
    }
}

impl From<Transform4> for [[f64; 4]; 4] {
    fn from(t: Transform4) -> Self {
        std::array::from_fn(|r| std::array::from_fn(|c| t.0[(r, c)]))
    }
}

/// Maps every point through `t` (homogeneous multiply, divide by w when projective).
pub fn apply_transform(t: &Transform4, points: &[Point3]) -> Result<Vec<Point3>, GeometryError> {
    if t.is_affine() {
        return Ok(points.iter().map(|p| t.apply_affine(p)).collect());
    }
    points
        .iter()
        .enumerate()
        .map(|(index, p)| {
            t.apply_point(p).map_err(|e| match e {
                GeometryError::PointAtInfinity { w, .. } => {
                    GeometryError::PointAtInfinity { index, w }
                }
                other => other,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TransformFamily {
    /// 12 free parameters, bottom row pinned to `(0, 0, 0, 1)`.
    #[default]
    Affine,
    /// Full 4x4 up to scale (15 degrees of freedom).
    Projective,
}

impl TransformFamily {
    pub fn min_support(self) -> usize {
        match self {
            TransformFamily::Affine => 4,
            TransformFamily::Projective => 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum InitMode {
    /// Every free parameter drawn uniformly from (0, 1).
    #[default]
    Random,
    Identity,
}

/// Gradient-descent settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterativeConfig {
    pub seed: u64,
    /// Initial step of the backtracking line search.
    pub learning_rate: f64,
    pub max_iterations: usize,
    /// Stop once an accepted step lowers the objective by less than this.
    pub tolerance: f64,
    pub init: InitMode,
}

impl Default for IterativeConfig {
    fn default() -> Self {
        IterativeConfig {
            seed: 0,
            learning_rate: 1.0,
            max_iterations: 2000,
            tolerance: 1e-10,
            init: InitMode::Random,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct AlignConfig {
    pub family: TransformFamily,
    /// Use gradient descent instead of the closed form (affine only).
    pub iterative: bool,
    pub solver: IterativeConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlignmentResult {
    pub transform: Transform4,
    /// Number of correspondences A.
    pub matched_count: usize,
    /// `(1/A) * sum |dst - H src|`.
    pub mean_residual: f64,
    /// `(1/A) * sum |dst - H src|^2`, the quantity the solvers minimize.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Support did not determine the transform; a minimum-norm solution was used.
    pub degenerate: bool,
}

/// Mean Euclidean and mean squared residuals of `t` on the correspondences.
pub fn residuals(
    t: &Transform4,
    src: &[Point3],
    dst: &[Point3],
) -> Result<(f64, f64), GeometryError> {
    if src.is_empty() {
        return Ok((0.0, 0.0));
    }
    let mapped = apply_transform(t, src)?;
    let (mut sum, mut sq) = (0.0, 0.0);
    for (m, d) in mapped.iter().zip(dst) {
        let e = (d - m).norm_squared();
        sq += e;
        sum += e.sqrt();
    }
    let a = src.len() as f64;
    Ok((sum / a, sq / a))
}

fn check_support(
    src: &[Point3],
    dst: &[Point3],
    family: TransformFamily,
) -> Result<(), GeometryError> {
    if src.len() != dst.len() {
        return Err(GeometryError::LengthMismatch {
            src: src.len(),
            dst: dst.len(),
        });
    }
    let need = family.min_support();
    if src.len() < need {
        return Err(GeometryError::InsufficientSupport {
            got: src.len(),
            need,
        });
    }
    Ok(())
}

/// Closed-form least-squares alignment (`config.iterative` is ignored).
pub fn estimate_alignment(
    src: &[Point3],
    dst: &[Point3],
    config: &AlignConfig,
) -> Result<AlignmentResult, GeometryError> {
    check_support(src, dst, config.family)?;
    let (transform, degenerate) = match config.family {
        TransformFamily::Affine => solve_affine(src, dst)?,
        TransformFamily::Projective => (solve_projective(src, dst)?, false),
    };
    let (mean_residual, objective) = residuals(&transform, src, dst)?;
    Ok(AlignmentResult {
        transform,
        matched_count: src.len(),
        mean_residual,
        objective,
        iterations: 0,
        converged: true,
        degenerate,
    })
}

/// Dispatches to the closed form or gradient descent according to `config`.
pub fn align(
    src: &[Point3],
    dst: &[Point3],
    config: &AlignConfig,
) -> Result<AlignmentResult, GeometryError> {
    if config.iterative && config.family == TransformFamily::Affine {
        estimate_alignment_iterative(src, dst, &config.solver)
    } else {
        estimate_alignment(src, dst, config)
    }
}

/// Translates to the centroid and scales to unit RMS distance. Returns the
/// normalizing transform and its scale factor.
fn normalizer(points: &[Point3]) -> (Matrix4<f64>, f64) {
    let n = points.len() as f64;
    let c = points
        .iter()
        .fold(Vector3::zeros(), |acc, p| acc + p.coords)
        / n;
    let rms = (points
        .iter()
        .map(|p| (p.coords - c).norm_squared())
        .sum::<f64>()
        / n)
        .sqrt();
    let s = if rms > 0.0 { 1.0 / rms } else { 1.0 };
    let mut m = Matrix4::identity() * s;
    m[(3, 3)] = 1.0;
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&(-c * s));
    (m, s)
}

fn inverse_normalizer(m: &Matrix4<f64>) -> Matrix4<f64> {
    let s = m[(0, 0)];
    let mut inv = Matrix4::identity() / s;
    inv[(3, 3)] = 1.0;
    inv.fixed_view_mut::<3, 1>(0, 3)
        .copy_from(&(-m.fixed_view::<3, 1>(0, 3) / s));
    inv
}

fn solve_affine(src: &[Point3], dst: &[Point3]) -> Result<(Transform4, bool), GeometryError> {
    // Solved in normalized coordinates as a correction to the map that takes
    // normalized source onto normalized destination frames; on rank-deficient
    // support the minimum-norm correction keeps the unconstrained directions
    // at identity.
    let (ns, _) = normalizer(src);
    let (nd, _) = normalizer(dst);
    let prior = nd * inverse_normalizer(&ns);
    let a = src.len();
    let mut design = DMatrix::<f64>::zeros(a, 4);
    let mut rhs = DMatrix::<f64>::zeros(a, 3);
    for (k, (s, d)) in src.iter().zip(dst).enumerate() {
        let q = ns * s.to_homogeneous();
        let r = nd * d.to_homogeneous() - prior * q;
        design.set_row(k, &q.transpose());
        for c in 0..3 {
            rhs[(k, c)] = r[c];
        }
    }
    let svd = design.svd(true, true);
    let cutoff = svd.singular_values.max() * RANK_EPS;
    let rank = svd.singular_values.iter().filter(|s| **s > cutoff).count();
    let x = svd
        .solve(&rhs, cutoff)
        .map_err(|e| GeometryError::Degenerate(e.to_string()))?;
    // x is 4x3 with correction^T = q^T x.
    let mut h = prior;
    for r in 0..3 {
        for c in 0..4 {
            h[(r, c)] += x[(c, r)];
        }
    }
    let mut m = inverse_normalizer(&nd) * h * ns;
    m.set_row(3, &nalgebra::RowVector4::new(0.0, 0.0, 0.0, 1.0));
    let degenerate = rank < 4;
    if degenerate {
        log::warn!("affine alignment support has rank {rank} < 4; using minimum-norm correction");
    }
    let t = Transform4::from_matrix(m).map_err(|_| {
        GeometryError::Degenerate(format!("support rank {rank} yields a singular transform"))
    })?;
    Ok((t, degenerate))
}

/// Normalized direct linear transform: null vector of the stacked
/// `d_i * (h_4 . q) - (h_i . q) = 0` constraints.
fn solve_projective(src: &[Point3], dst: &[Point3]) -> Result<Transform4, GeometryError> {
    let (ns, _) = normalizer(src);
    let (nd, _) = normalizer(dst);
    let mut normal = SMatrix::<f64, 16, 16>::zeros();
    for (s, d) in src.iter().zip(dst) {
        let q = ns * s.to_homogeneous();
        let r = nd * d.to_homogeneous();
        for i in 0..3 {
            let mut row = SMatrix::<f64, 1, 16>::zeros();
            for c in 0..4 {
                row[4 * i + c] = -q[c];
                row[12 + c] = r[i] * q[c];
            }
            normal += row.transpose() * row;
        }
    }
    let eig = nalgebra::SymmetricEigen::new(normal);
    let (imin, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("16 eigenvalues");
    let v = eig.eigenvectors.column(imin);
    let h = Matrix4::from_fn(|r, c| v[4 * r + c]);
    let mut m = inverse_normalizer(&nd) * h * ns;
    let scale = m[(3, 3)];
    m /= if scale.abs() > DET_EPS {
        scale
    } else {
        m.norm()
    };
    Transform4::from_matrix(m)
}

/// Objective and gradient over the 12 affine parameters (row-major top 3x4).
#[derive(Debug)]
pub struct AffineObjective<'a> {
    src: &'a [Point3],
    dst: &'a [Point3],
}

impl<'a> AffineObjective<'a> {
    pub fn new(src: &'a [Point3], dst: &'a [Point3]) -> Self {
        AffineObjective { src, dst }
    }

    fn residual(params: &Matrix3x4<f64>, s: &Point3, d: &Point3) -> Vector3<f64> {
        d.coords - params * s.to_homogeneous()
    }

    pub fn value(&self, params: &Matrix3x4<f64>) -> f64 {
        let sum: f64 = self
            .src
            .iter()
            .zip(self.dst)
            .map(|(s, d)| Self::residual(params, s, d).norm_squared())
            .sum();
        sum / self.src.len() as f64
    }

    /// `d/dH[r][c] = -(2/A) * sum_k e_k[r] * q_k[c]`.
    pub fn gradient(&self, params: &Matrix3x4<f64>) -> Matrix3x4<f64> {
        let mut g = Matrix3x4::zeros();
        for (s, d) in self.src.iter().zip(self.dst) {
            let q: Vector4<f64> = s.to_homogeneous();
            let e = Self::residual(params, s, d);
            g -= e * q.transpose();
        }
        g * (2.0 / self.src.len() as f64)
    }
}

fn params_to_transform(p: &Matrix3x4<f64>) -> Matrix4<f64> {
    let mut m = Matrix4::identity();
    m.fixed_view_mut::<3, 4>(0, 0).copy_from(p);
    m
}

/// Gradient descent with backtracking (Armijo) line search on the affine
/// least-squares objective, started from uniform (0, 1) parameters.
///
/// The descent runs in centroid/RMS-normalized coordinates (the random start
/// is drawn in the original coordinates and mapped over); `tolerance` applies
/// to the objective in original units. Hitting `max_iterations` is not an
/// error: the last iterate is returned with `converged == false`.
pub fn estimate_alignment_iterative(
    src: &[Point3],
    dst: &[Point3],
    config: &IterativeConfig,
) -> Result<AlignmentResult, GeometryError> {
    check_support(src, dst, TransformFamily::Affine)?;
    let (ns, _) = normalizer(src);
    let (nd, dst_scale) = normalizer(dst);
    let src_n: Vec<Point3> = src
        .iter()
        .map(|p| Point3::from_homogeneous(ns * p.to_homogeneous()).unwrap())
        .collect();
    let dst_n: Vec<Point3> = dst
        .iter()
        .map(|p| Point3::from_homogeneous(nd * p.to_homogeneous()).unwrap())
        .collect();
    let objective = AffineObjective::new(&src_n, &dst_n);
    // objective_n = dst_scale^2 * objective_original
    let to_original = 1.0 / (dst_scale * dst_scale);

    let start = match config.init {
        InitMode::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            Matrix3x4::from_fn(|_, _| loop {
                let v: f64 = rng.random();
                if v > 0.0 {
                    break v;
                }
            })
        }
        InitMode::Identity => Matrix3x4::identity(),
    };
    let start_n = nd * params_to_transform(&start) * inverse_normalizer(&ns);
    let mut params: Matrix3x4<f64> = start_n.fixed_view::<3, 4>(0, 0).into_owned();
    let mut value = objective.value(&params);
    let mut step = config.learning_rate;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iterations {
        iterations += 1;
        let grad = objective.gradient(&params);
        let gnorm2 = grad.norm_squared();
        if gnorm2 == 0.0 {
            converged = true;
            break;
        }
        let mut trial_step = step;
        let accepted = loop {
            let candidate = params - grad * trial_step;
            let cv = objective.value(&candidate);
            if cv <= value - 1e-4 * trial_step * gnorm2 {
                break Some((candidate, cv));
            }
            trial_step *= 0.5;
            if trial_step < 1e-30 {
                break None;
            }
        };
        let Some((candidate, cv)) = accepted else {
            // No descent left at machine precision.
            converged = true;
            break;
        };
        let decrease = (value - cv) * to_original;
        params = candidate;
        value = cv;
        step = trial_step * 2.0;
        if decrease < config.tolerance {
            converged = true;
            break;
        }
    }

    let mut m = inverse_normalizer(&nd) * params_to_transform(&params) * ns;
    m.set_row(3, &nalgebra::RowVector4::new(0.0, 0.0, 0.0, 1.0));
    let transform = Transform4::from_matrix(m)?;
    let (mean_residual, objective) = residuals(&transform, src, dst)?;
    Ok(AlignmentResult {
        transform,
        matched_count: src.len(),
        mean_residual,
        objective,
        iterations,
        converged,
        degenerate: false,
    })
}

//! Deterministic synthetic scenes: static spheres on a ground plane seen by
//! a moving pinhole camera, rendered by ray casting into per-group
//! pointmaps with optional per-group rigid drift and Gaussian noise.
//!
//! World frame is z-up with the ground at z = 0. Cameras follow the usual
//! vision convention (x right, y down, z forward).

use std::f64::consts::PI;

use nalgebra::{Matrix4, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Transform4;
use crate::interchange::{
    BBox2D, Detection, FrameData, FrameId, ImageDims, Pixel, PointMap, SegMask, Sequence,
    SequenceManifest, WindowGroup,
};
use crate::tracker::{plan_windows, TrackId, TrackRow, TrackTable, WindowSpec};
use crate::Point3;

/// Rays travelling further than this hit nothing (sky, invalid pixel).
const FAR: f64 = 50.0;

#[derive(Debug, Error)]
pub enum SimulatorError {
    #[error("invalid scene config: {0}")]
    InvalidConfig(String),
    #[error("object {0} is behind the camera in every frame")]
    BehindCamera(usize),
    #[error("could not place {count} objects {separation} apart within radius {radius}")]
    Placement {
        count: usize,
        separation: f64,
        radius: f64,
    },
    #[error("scene config is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub center: [f64; 3],
    pub radius: f64,
    #[serde(default = "default_label")]
    pub label: String,
    /// Inclusive frame intervals; absent means every frame.
    #[serde(default)]
    pub visible: Option<Vec<[u32; 2]>>,
}

fn default_label() -> String {
    "object".into()
}

impl ObjectSpec {
    pub fn scheduled(&self, f: u32) -> bool {
        self.visible
            .as_ref()
            .is_none_or(|spans| spans.iter().any(|[a, b]| *a <= f && f <= *b))
    }

    fn center(&self) -> Point3 {
        Point3::from(self.center)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CameraPath {
    Static {
        position: [f64; 3],
        target: [f64; 3],
    },
    /// Circles `center` at `radius`, `height` above the ground, sweeping
    /// `sweep_deg` over the sequence.
    Orbit {
        center: [f64; 3],
        radius: f64,
        height: f64,
        start_deg: f64,
        sweep_deg: f64,
    },
    /// Straight line from `start` to `end`, looking at `target`.
    Dolly {
        start: [f64; 3],
        end: [f64; 3],
        target: [f64; 3],
    },
    /// Fixed position; the view direction wobbles by a smoothed random walk
    /// of at most `amplitude_deg` in yaw and pitch.
    Handshake {
        position: [f64; 3],
        target: [f64; 3],
        amplitude_deg: f64,
        smoothing: f64,
    },
}

impl Default for CameraPath {
    fn default() -> Self {
        CameraPath::Orbit {
            center: [0.0, 0.0, 0.3],
            radius: 6.0,
            height: 2.5,
            start_deg: 0.0,
            sweep_deg: 60.0,
        }
    }
}

/// Maps world coordinates into each group's local coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftSpec {
    None,
    Random {
        max_rotation_deg: f64,
        max_translation: f64,
    },
    /// One 4x4 matrix per group, row-major.
    Explicit {
        transforms: Vec<[[f64; 4]; 4]>,
    },
}

impl Default for DriftSpec {
    fn default() -> Self {
        DriftSpec::Random {
            max_rotation_deg: 10.0,
            max_translation: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub name: String,
    pub frames: u32,
    pub image: ImageDims,
    /// Focal length in pixels; the principal point is the image center.
    pub focal: f64,
    /// Number of randomly placed objects, used when `objects` is absent.
    pub object_count: usize,
    pub objects: Option<Vec<ObjectSpec>>,
    /// Random objects sit on the ground within this radius of the camera target.
    pub placement_radius: f64,
    pub min_separation: f64,
    pub radius_range: [f64; 2],
    pub camera: CameraPath,
    pub noise_sigma: f64,
    pub drift: DriftSpec,
    /// Reconstruction grouping; absent means one group for the whole sequence.
    pub window: Option<WindowSpec>,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            name: "sim".into(),
            frames: 20,
            image: ImageDims::new(240, 320),
            focal: 300.0,
            object_count: 3,
            objects: None,
            placement_radius: 1.5,
            min_separation: 1.0,
            radius_range: [0.25, 0.4],
            camera: CameraPath::default(),
            noise_sigma: 0.0,
            drift: DriftSpec::default(),
            window: Some(WindowSpec::default()),
            seed: 0,
        }
    }
}

impl SceneConfig {
    pub fn from_json(text: &str) -> Result<Self, SimulatorError> {
        let config: SceneConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), SimulatorError> {
        let bad = |m: String| Err(SimulatorError::InvalidConfig(m));
        if self.frames == 0 {
            return bad("frames must be >= 1".into());
        }
        if self.image.is_empty() {
            return bad("image dims must be non-zero".into());
        }
        if !(self.focal.is_finite() && self.focal > 0.0) {
            return bad(format!("focal {} must be positive", self.focal));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return bad(format!("noise_sigma {} must be >= 0", self.noise_sigma));
        }
        if let Some(w) = self.window {
            WindowSpec::new(w.size(), w.overlap())
                .map_err(|e| SimulatorError::InvalidConfig(e.to_string()))?;
        }
        let [lo, hi] = self.radius_range;
        if self.objects.is_none() && !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return bad(format!(
                "radius_range {:?} must satisfy 0 < lo <= hi",
                self.radius_range
            ));
        }
        for (k, o) in self.objects.iter().flatten().enumerate() {
            if !(o.radius.is_finite() && o.radius > 0.0) || !o.center.iter().all(|c| c.is_finite())
            {
                return bad(format!(
                    "object {k} needs a finite center and positive radius"
                ));
            }
            for [a, b] in o.visible.iter().flatten() {
                if *a < 1 || a > b || *b > self.frames {
                    return bad(format!(
                        "object {k} schedule [{a}, {b}] outside 1..={}",
                        self.frames
                    ));
                }
            }
        }
        match &self.drift {
            DriftSpec::Random {
                max_rotation_deg,
                max_translation,
            } => {
                if !(*max_rotation_deg >= 0.0 && *max_translation >= 0.0) {
                    return bad("drift magnitudes must be >= 0".into());
                }
            }
            DriftSpec::Explicit { transforms } => {
                if transforms.len() != self.groups().len() {
                    return bad(format!(
                        "explicit drift lists {} transforms for {} groups",
                        transforms.len(),
                        self.groups().len()
                    ));
                }
                for (g, m) in transforms.iter().enumerate() {
                    let t = Transform4::try_from(*m)
                        .map_err(|e| SimulatorError::InvalidConfig(format!("drift {g}: {e}")))?;
                    if !t.is_affine() {
                        return bad(format!("drift {g} must be affine"));
                    }
                }
            }
            DriftSpec::None => {}
        }
        if let CameraPath::Handshake { smoothing, .. } = self.camera {
            if !(0.0..1.0).contains(&smoothing) {
                return bad(format!("handshake smoothing {smoothing} must be in [0, 1)"));
            }
        }
        Ok(())
    }

    /// Reconstruction groups implied by `window`.
    pub fn groups(&self) -> Vec<WindowGroup> {
        let ranges = match self.window {
            Some(w) => {
                plan_windows(self.frames.max(1), w).unwrap_or_else(|_| vec![1..=self.frames.max(1)])
            }
            None => vec![1..=self.frames.max(1)],
        };
        ranges
            .into_iter()
            .enumerate()
            .map(|(k, r)| WindowGroup {
                id: k as u32,
                first: FrameId(*r.start()),
                last: FrameId(*r.end()),
            })
            .collect()
    }
}

/// Camera position and orthonormal axes in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    pub position: Point3,
    pub right: Vector3<f64>,
    pub down: Vector3<f64>,
    pub forward: Vector3<f64>,
}

impl CameraPose {
    pub fn look_at(position: Point3, target: Point3) -> Result<Self, SimulatorError> {
        let forward = (target - position).try_normalize(1e-12).ok_or_else(|| {
            SimulatorError::InvalidConfig("camera target equals its position".into())
        })?;
        let up = Vector3::z();
        let right = forward.cross(&up).try_normalize(1e-9).ok_or_else(|| {
            SimulatorError::InvalidConfig("camera looks straight up or down".into())
        })?;
        let down = forward.cross(&right);
        Ok(CameraPose {
            position,
            right,
            down,
            forward,
        })
    }

    /// Ray direction (not normalized) through the center of pixel `p`.
    pub fn ray(&self, p: Pixel, image: ImageDims, focal: f64) -> Vector3<f64> {
        let x = (p.col as f64 + 0.5 - image.width as f64 / 2.0) / focal;
        let y = (p.row as f64 + 0.5 - image.height as f64 / 2.0) / focal;
        self.right * x + self.down * y + self.forward
    }
}

/// Camera pose for every frame, index 0 being frame 1.
pub fn camera_poses(config: &SceneConfig) -> Result<Vec<CameraPose>, SimulatorError> {
    let n = config.frames;
    let progress = |f: u32| {
        if n > 1 {
            (f - 1) as f64 / (n - 1) as f64
        } else {
            0.0
        }
    };
    match &config.camera {
        CameraPath::Static { position, target } => {
            let pose = CameraPose::look_at(Point3::from(*position), Point3::from(*target))?;
            Ok(vec![pose; n as usize])
        }
        CameraPath::Orbit {
            center,
            radius,
            height,
            start_deg,
            sweep_deg,
        } => (1..=n)
            .map(|f| {
                let a = (start_deg + sweep_deg * progress(f)) * PI / 180.0;
                let c = Point3::from(*center);
                let pos = Point3::new(c.x + radius * a.cos(), c.y + radius * a.sin(), *height);
                CameraPose::look_at(pos, c)
            })
            .collect(),
        CameraPath::Dolly { start, end, target } => (1..=n)
            .map(|f| {
                let s = Point3::from(*start);
                let pos = s + (Point3::from(*end) - s) * progress(f);
                CameraPose::look_at(pos, Point3::from(*target))
            })
            .collect(),
        CameraPath::Handshake {
            position,
            target,
            amplitude_deg,
            smoothing,
        } => {
            let mut rng = stream(config.seed, 0x63616d, 0);
            let base = CameraPose::look_at(Point3::from(*position), Point3::from(*target))?;
            let dist = (Point3::from(*target) - Point3::from(*position)).norm();
            let (mut yaw, mut pitch) = (0.0f64, 0.0f64);
            let amp = amplitude_deg * PI / 180.0;
            (1..=n)
                .map(|_| {
                    let (a, b): (f64, f64) =
                        (rng.sample(StandardNormal), rng.sample(StandardNormal));
                    yaw = (smoothing * yaw + (1.0 - smoothing) * a).clamp(-1.0, 1.0);
                    pitch = (smoothing * pitch + (1.0 - smoothing) * b).clamp(-1.0, 1.0);
                    let dir = base.forward
                        + base.right * (amp * yaw).tan()
                        + base.down * (amp * pitch).tan();
                    CameraPose::look_at(base.position, base.position + dir.normalize() * dist)
                })
                .collect()
        }
    }
}

/// Per-frame ground truth for one visible object.
#[derive(Debug, Clone, PartialEq)]
pub struct GtObject {
    pub id: u32,
    pub bbox: BBox2D,
    pub mask: SegMask,
    pub center_world: Point3,
    /// Center in the global frame (the first group's coordinates).
    pub center: Point3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// Index 0 is frame 1.
    pub frames: Vec<Vec<GtObject>>,
    /// World-to-local transform of each group.
    pub drifts: Vec<Transform4>,
    pub objects: Vec<ObjectSpec>,
    pub poses: Vec<CameraPose>,
}

impl GroundTruth {
    pub fn to_mot(&self) -> String {
        perfect_tracktable(self).to_mot()
    }
}

/// Table whose identities are the ground-truth ids.
pub fn perfect_tracktable(gt: &GroundTruth) -> TrackTable {
    let mut rows = Vec::new();
    for (k, objs) in gt.frames.iter().enumerate() {
        for o in objs {
            rows.push(TrackRow {
                frame: FrameId(k as u32 + 1),
                id: TrackId(o.id),
                x: o.center.x,
                y: o.center.y,
                z: o.center.z,
                bbox: o.bbox,
                label: gt.objects[o.id as usize - 1].label.clone(),
                confidence: 1.0,
            });
        }
    }
    TrackTable::new(rows)
}

/// Independent RNG stream for (`seed`, `tag`, `index`).
fn stream(seed: u64, tag: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tag.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ index);
    rng
}

fn place_objects(config: &SceneConfig) -> Result<Vec<ObjectSpec>, SimulatorError> {
    if let Some(objects) = &config.objects {
        return Ok(objects.clone());
    }
    let target = match &config.camera {
        CameraPath::Static { target, .. }
        | CameraPath::Dolly { target, .. }
        | CameraPath::Handshake { target, .. } => *target,
        CameraPath::Orbit { center, .. } => *center,
    };
    let mut rng = stream(config.seed, 0x6f626a, 0);
    let [lo, hi] = config.radius_range;
    let mut out: Vec<ObjectSpec> = Vec::with_capacity(config.object_count);
    let mut attempts = 0;
    while out.len() < config.object_count {
        attempts += 1;
        if attempts > 100_000 {
            return Err(SimulatorError::Placement {
                count: config.object_count,
                separation: config.min_separation,
                radius: config.placement_radius,
            });
        }
        let r = config.placement_radius * rng.random::<f64>().sqrt();
        let a = rng.random::<f64>() * 2.0 * PI;
        let radius = if hi > lo {
            rng.random_range(lo..=hi)
        } else {
            lo
        };
        let c = [target[0] + r * a.cos(), target[1] + r * a.sin(), radius];
        let clear = out.iter().all(|o| {
            let d = ((o.center[0] - c[0]).powi(2)
                + (o.center[1] - c[1]).powi(2)
                + (o.center[2] - c[2]).powi(2))
            .sqrt();
            d >= config.min_separation
        });
        if clear {
            out.push(ObjectSpec {
                center: c,
                radius,
                label: default_label(),
                visible: None,
            });
        }
    }
    Ok(out)
}

fn drifts(config: &SceneConfig, groups: usize) -> Result<Vec<Transform4>, SimulatorError> {
    match &config.drift {
        DriftSpec::None => Ok(vec![Transform4::identity(); groups]),
        DriftSpec::Explicit { transforms } => transforms
            .iter()
            .map(|m| {
                Transform4::try_from(*m).map_err(|e| SimulatorError::InvalidConfig(e.to_string()))
            })
            .collect(),
        DriftSpec::Random {
            max_rotation_deg,
            max_translation,
        } => {
            let mut rng = stream(config.seed, 0x647269, 0);
            Ok((0..groups)
                .map(|_| {
                    let axis = unit_vector(&mut rng);
                    let angle = rng.random::<f64>() * max_rotation_deg * PI / 180.0;
                    let t = unit_vector(&mut rng) * (rng.random::<f64>() * max_translation);
                    Transform4::rigid(axis, angle, t)
                })
                .collect())
        }
    }
}

fn unit_vector(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        );
        if let Some(u) = v.try_normalize(1e-9) {
            return u;
        }
    }
}

#[derive(Clone, Copy)]
enum Hit {
    Sky,
    Ground(Point3),
    Object(usize, Point3),
}

fn sphere_hit(origin: &Point3, dir: &Vector3<f64>, center: &Point3, radius: f64) -> Option<f64> {
    let oc = origin - center;
    let a = dir.norm_squared();
    let b = 2.0 * dir.dot(&oc);
    let c = oc.norm_squared() - radius * radius;
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let t = (-b - disc.sqrt()) / (2.0 * a);
    (t > 0.0).then_some(t)
}

fn cast(pose: &CameraPose, dir: &Vector3<f64>, objects: &[(usize, &ObjectSpec)]) -> Hit {
    let o = pose.position;
    let mut best: Option<(f64, usize)> = None;
    for &(k, spec) in objects {
        if let Some(t) = sphere_hit(&o, dir, &spec.center(), spec.radius) {
            if best.is_none_or(|(bt, _)| t < bt) {
                best = Some((t, k));
            }
        }
    }
    let ground = (dir.z < 0.0 && o.z > 0.0).then(|| -o.z / dir.z);
    match (best, ground) {
        (Some((t, k)), g) if g.is_none_or(|g| t <= g) => Hit::Object(k, o + dir * t),
        (_, Some(g)) if (dir * g).norm() <= FAR => Hit::Ground(o + dir * g),
        _ => Hit::Sky,
    }
}

/// Renders the scene described by `config`.
pub fn generate(config: &SceneConfig) -> crate::Result<(Sequence, GroundTruth)> {
    config.validate()?;
    let objects = place_objects(config)?;
    let poses = camera_poses(config)?;
    for (k, o) in objects.iter().enumerate() {
        let in_front = poses
            .iter()
            .any(|p| (o.center() - p.position).dot(&p.forward) > 0.0);
        if !in_front {
            return Err(SimulatorError::BehindCamera(k).into());
        }
    }
    let groups = config.groups();
    let drift = drifts(config, groups.len())?;
    let image = config.image;
    let noise =
        Normal::new(0.0, config.noise_sigma.max(f64::MIN_POSITIVE)).expect("sigma is finite");

    let mut frames = Vec::with_capacity(config.frames as usize);
    let mut gt_frames = Vec::with_capacity(config.frames as usize);
    for f in 1..=config.frames {
        let pose = &poses[f as usize - 1];
        let scheduled: Vec<(usize, &ObjectSpec)> = objects
            .iter()
            .enumerate()
            .filter(|(_, o)| o.scheduled(f))
            .collect();
        let mut hits = Vec::with_capacity(image.len());
        for row in 0..image.height {
            for col in 0..image.width {
                let dir = pose.ray(Pixel { row, col }, image, config.focal);
                hits.push(cast(pose, &dir, &scheduled));
            }
        }

        let mut masks: Vec<Vec<bool>> = vec![Vec::new(); objects.len()];
        for (i, h) in hits.iter().enumerate() {
            if let Hit::Object(k, _) = h {
                if masks[*k].is_empty() {
                    masks[*k] = vec![false; image.len()];
                }
                masks[*k][i] = true;
            }
        }
        let mut detections = Vec::new();
        let mut gt = Vec::new();
        for (k, bitmap) in masks.iter().enumerate() {
            if bitmap.is_empty() {
                continue;
            }
            let mask = SegMask::from_bitmap(image, bitmap)?;
            let bbox = BBox2D::from_pixels(mask.pixels()).expect("mask is non-empty");
            detections.push(Detection {
                frame: FrameId(f),
                bbox,
                mask: mask.clone(),
                label: objects[k].label.clone(),
                confidence: 1.0,
            });
            gt.push(GtObject {
                id: k as u32 + 1,
                bbox,
                mask,
                center_world: objects[k].center(),
                center: drift[0].apply_affine(&objects[k].center()),
            });
        }

        let mut pointmaps = Vec::new();
        for g in groups.iter().filter(|g| g.contains(FrameId(f))) {
            let d = &drift[g.id as usize];
            let identity = *d.matrix() == Matrix4::identity();
            let mut rng = stream(config.seed, 0x6e6f69 + g.id as u64, f as u64);
            let mut points = Vec::with_capacity(image.len());
            let mut valid = Vec::with_capacity(image.len());
            for h in &hits {
                let world = match h {
                    Hit::Sky => {
                        points.push([0.0f32; 3]);
                        valid.push(false);
                        continue;
                    }
                    Hit::Ground(p) | Hit::Object(_, p) => *p,
                };
                let mut p = if identity {
                    world
                } else {
                    d.apply_affine(&world)
                };
                if config.noise_sigma > 0.0 {
                    for c in 0..3 {
                        p[c] += noise.sample(&mut rng);
                    }
                }
                points.push([p.x as f32, p.y as f32, p.z as f32]);
                valid.push(true);
            }
            pointmaps.push((g.id, PointMap::new(image, points, valid)?));
        }
        frames.push(FrameData {
            detections,
            pointmaps,
        });
        gt_frames.push(gt);
    }

    let manifest =
        SequenceManifest::canonical(config.name.clone(), image, None, groups, config.frames);
    let sequence = Sequence::new(manifest, frames)?;
    Ok((
        sequence,
        GroundTruth {
            frames: gt_frames,
            drifts: drift,
            objects,
            poses,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interchange::FrameSource;

    fn small() -> SceneConfig {
        SceneConfig {
            image: ImageDims::new(60, 80),
            focal: 75.0,
            frames: 6,
            window: Some(WindowSpec::new(4, 2).unwrap()),
            ..SceneConfig::default()
        }
    }

    #[test]
    fn default_config_shape() {
        let c = SceneConfig::default();
        assert_eq!((c.frames, c.object_count), (20, 3));
        let (seq, gt) = generate(&small()).unwrap();
        assert_eq!(seq.manifest().frame_count, 6);
        assert_eq!(gt.objects.len(), 3);
        assert_eq!(seq.manifest().groups.len(), 2);
    }

    #[test]
    fn deterministic() {
        let mut c = small();
        c.noise_sigma = 0.01;
        let a = generate(&c).unwrap();
        let b = generate(&c).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        c.seed = 1;
        assert_ne!(generate(&c).unwrap().0, a.0);
    }

    #[test]
    fn empty_scene_has_valid_pointmaps() {
        let c = SceneConfig {
            object_count: 0,
            ..small()
        };
        let (seq, gt) = generate(&c).unwrap();
        assert!(seq.frames().iter().all(|f| f.detections.is_empty()));
        assert!(gt.frames.iter().all(|f| f.is_empty()));
        assert!(seq.frames()[0].pointmaps[0].1.validity().iter().any(|v| *v));
    }

    #[test]
    fn schedule_is_honored() {
        let mut c = small();
        c.objects = Some(vec![ObjectSpec {
            center: [0.0, 0.0, 0.3],
            radius: 0.3,
            label: "ball".into(),
            visible: Some(vec![[1, 2], [5, 6]]),
        }]);
        let (seq, gt) = generate(&c).unwrap();
        let present: Vec<bool> = seq
            .frames()
            .iter()
            .map(|f| !f.detections.is_empty())
            .collect();
        assert_eq!(present, vec![true, true, false, false, true, true]);
        let rows = perfect_tracktable(&gt);
        assert_eq!(rows.len(), 4);
        assert!(rows.rows.iter().all(|r| r.id == TrackId(1)));
    }

    #[test]
    fn behind_camera_is_rejected() {
        let mut c = small();
        c.camera = CameraPath::Static {
            position: [0.0, 0.0, 2.0],
            target: [5.0, 0.0, 0.0],
        };
        c.objects = Some(vec![ObjectSpec {
            center: [-5.0, 0.0, 0.3],
            radius: 0.3,
            label: "x".into(),
            visible: None,
        }]);
        assert!(matches!(
            generate(&c),
            Err(crate::Error::Simulator(SimulatorError::BehindCamera(0)))
        ));
    }

    #[test]
    fn config_json_defaults_and_errors() {
        let c = SceneConfig::from_json("{}").unwrap();
        assert_eq!(c, SceneConfig::default());
        let c = SceneConfig::from_json(r#"{"frames": 5, "camera": {"kind": "static", "position": [0, -5, 2], "target": [0, 0, 0]}}"#).unwrap();
        assert_eq!(c.frames, 5);
        assert!(SceneConfig::from_json(r#"{"frames": 0}"#).is_err());
        assert!(SceneConfig::from_json(r#"{"frobnicate": 1}"#).is_err());
        assert!(SceneConfig::from_json(r#"{"noise_sigma": -1}"#).is_err());
    }

    #[test]
    fn noiseless_pointmap_lies_on_spheres() {
        let mut c = small();
        c.drift = DriftSpec::None;
        c.camera = CameraPath::Static {
            position: [0.0, -5.0, 2.0],
            target: [0.0, 0.0, 0.3],
        };
        c.objects = Some(vec![ObjectSpec {
            center: [0.0, 0.0, 0.5],
            radius: 0.5,
            label: "ball".into(),
            visible: None,
        }]);
        let (seq, _) = generate(&c).unwrap();
        let pm = seq.pointmap(FrameId(1), 0).unwrap();
        let det = &seq.detections(FrameId(1)).unwrap()[0];
        for px in det.mask.pixels() {
            let p = pm.get(px).unwrap();
            let r = (p - Point3::new(0.0, 0.0, 0.5)).norm();
            assert!((r - 0.5).abs() < 1e-6, "radius {r}");
        }
    }
}

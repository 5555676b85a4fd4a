//! Shared data model and the on-disk sequence format.
//!
//! A sequence directory looks like:
//!
//! ```text
//! manifest.json
//! frames/<idx>/detections.json
//! frames/<idx>/pointmap.bin      # f32 LE, row-major H x W x 3
//! frames/<idx>/valid.bin         # H x W bits, row-major, LSB first
//! ```
//!
//! Pointmaps are produced per reconstruction window ("group"). Consecutive
//! groups may share frames; such a frame carries one pointmap per group, the
//! extra ones stored as `pointmap_g<group>.bin` / `valid_g<group>.bin`.

mod io;
mod mask;

use std::borrow::Cow;
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Point3;

pub use io::{load_sequence, save_sequence, SequenceDir};
pub use mask::{mask_pixels, Run, SegMask};

#[derive(Debug, Error)]
pub enum InterchangeError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("frame {frame}: missing file {path}")]
    MissingFile { frame: FrameId, path: PathBuf },
    #[error("frame {frame} ({path}): {source}")]
    InFrame {
        frame: FrameId,
        path: PathBuf,
        #[source]
        source: Box<InterchangeError>,
    },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("malformed run-length mask: {0}")]
    MalformedMask(String),
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
    #[error("invalid detection: {0}")]
    InvalidDetection(String),
    #[error("invalid pointmap: {0}")]
    InvalidPointMap(String),
    #[error("sequence must contain at least one frame")]
    EmptySequence,
    #[error("frame {frame} has no pointmap for group {group}")]
    NoPointMap { frame: FrameId, group: u32 },
}

impl InterchangeError {
    pub(crate) fn in_frame(self, frame: FrameId, path: impl Into<PathBuf>) -> Self {
        InterchangeError::InFrame {
            frame,
            path: path.into(),
            source: Box::new(self),
        }
    }
}

/// 1-based frame index within a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FrameId(pub u32);

impl FrameId {
    pub fn index(self) -> u32 {
        self.0
    }
}

impl fmt::Display for FrameId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImageDims {
    pub height: u32,
    pub width: u32,
}

impl ImageDims {
    pub fn new(height: u32, width: u32) -> Self {
        ImageDims { height, width }
    }

    pub fn len(&self) -> usize {
        self.height as usize * self.width as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, p: Pixel) -> bool {
        p.row < self.height && p.col < self.width
    }

    pub fn flat(&self, p: Pixel) -> usize {
        p.row as usize * self.width as usize + p.col as usize
    }
}

/// Pixel coordinate, (row, col) with row-major ordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pixel {
    pub row: u32,
    pub col: u32,
}

/// Axis-aligned image box in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox2D {
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
}

impl BBox2D {
    pub fn new(left: f64, top: f64, width: f64, height: f64) -> Self {
        BBox2D {
            left,
            top,
            width,
            height,
        }
    }

    /// Tight box around a non-empty pixel set; each pixel covers a unit square.
    pub fn from_pixels<I: IntoIterator<Item = Pixel>>(pixels: I) -> Option<Self> {
        let mut it = pixels.into_iter();
        let first = it.next()?;
        let (mut r0, mut r1, mut c0, mut c1) = (first.row, first.row, first.col, first.col);
        for p in it {
            r0 = r0.min(p.row);
            r1 = r1.max(p.row);
            c0 = c0.min(p.col);
            c1 = c1.max(p.col);
        }
        Some(BBox2D {
            left: c0 as f64,
            top: r0 as f64,
            width: (c1 - c0 + 1) as f64,
            height: (r1 - r0 + 1) as f64,
        })
    }

    pub fn right(&self) -> f64 {
        self.left + self.width
    }

    pub fn bottom(&self) -> f64 {
        self.top + self.height
    }

    pub fn area(&self) -> f64 {
        self.width.max(0.0) * self.height.max(0.0)
    }

    /// Clips the box to `[0, width] x [0, height]`; `None` if nothing remains.
    pub fn clamp(&self, dims: ImageDims) -> Option<Self> {
        let left = self.left.max(0.0);
        let top = self.top.max(0.0);
        let right = self.right().min(dims.width as f64);
        let bottom = self.bottom().min(dims.height as f64);
        (right > left && bottom > top).then(|| BBox2D::new(left, top, right - left, bottom - top))
    }

    pub fn iou(&self, other: &BBox2D) -> f64 {
        let w = (self.right().min(other.right()) - self.left.max(other.left)).max(0.0);
        let h = (self.bottom().min(other.bottom()) - self.top.max(other.top)).max(0.0);
        let inter = w * h;
        let union = self.area() + other.area() - inter;
        if union > 0.0 {
            inter / union
        } else {
            0.0
        }
    }

    fn validate(&self) -> Result<(), InterchangeError> {
        let finite = [self.left, self.top, self.width, self.height]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.width <= 0.0 || self.height <= 0.0 {
            return Err(InterchangeError::InvalidDetection(format!(
                "bbox {self:?} must be finite with positive size"
            )));
        }
        Ok(())
    }
}

/// Per-pixel 3D coordinates with a validity flag, one-to-one with image pixels.
#[derive(Debug, Clone)]
pub struct PointMap {
    dims: ImageDims,
    points: Vec<[f32; 3]>,
    valid: Vec<bool>,
}

impl PointMap {
    pub fn new(
        dims: ImageDims,
        points: Vec<[f32; 3]>,
        valid: Vec<bool>,
    ) -> Result<Self, InterchangeError> {
        if points.len() != dims.len() || valid.len() != dims.len() {
            return Err(InterchangeError::DimensionMismatch(format!(
                "pointmap {}x{} needs {} entries, got {} points and {} flags",
                dims.height,
                dims.width,
                dims.len(),
                points.len(),
                valid.len()
            )));
        }
        if let Some(i) = points
            .iter()
            .zip(&valid)
            .position(|(p, v)| *v && !p.iter().all(|c| c.is_finite()))
        {
            return Err(InterchangeError::InvalidPointMap(format!(
                "valid entry {i} is not finite"
            )));
        }
        Ok(PointMap {
            dims,
            points,
            valid,
        })
    }

    pub fn dims(&self) -> ImageDims {
        self.dims
    }

    pub fn raw_points(&self) -> &[[f32; 3]] {
        &self.points
    }

    pub fn validity(&self) -> &[bool] {
        &self.valid
    }

    /// Stored coordinate at `p`, `None` if the pixel is invalid or outside.
    pub fn get(&self, p: Pixel) -> Option<Point3> {
        if !self.dims.contains(p) {
            return None;
        }
        let i = self.dims.flat(p);
        self.valid[i].then(|| {
            let [x, y, z] = self.points[i];
            Point3::new(x as f64, y as f64, z as f64)
        })
    }

    /// Looks up an image pixel when the pointmap resolution differs from the
    /// image resolution (floor scaling per axis).
    pub fn get_scaled(&self, p: Pixel, image: ImageDims) -> Option<Point3> {
        if image == self.dims {
            return self.get(p);
        }
        let row = (p.row as u64 * self.dims.height as u64 / image.height as u64) as u32;
        let col = (p.col as u64 * self.dims.width as u64 / image.width as u64) as u32;
        self.get(Pixel { row, col })
    }
}

impl PartialEq for PointMap {
    /// Bit-exact comparison of coordinates.
    fn eq(&self, other: &Self) -> bool {
        self.dims == other.dims
            && self.valid == other.valid
            && self
                .points
                .iter()
                .zip(&other.points)
                .all(|(a, b)| a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()))
    }
}

/// One detected object in one frame: box, mask, free-form label, confidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub frame: FrameId,
    pub bbox: BBox2D,
    pub mask: SegMask,
    pub label: String,
    pub confidence: f64,
}

impl Detection {
    pub fn validate(&self, image: ImageDims) -> Result<(), InterchangeError> {
        self.bbox.validate()?;
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(InterchangeError::InvalidDetection(format!(
                "confidence {} outside [0, 1]",
                self.confidence
            )));
        }
        if self.mask.dims() != image {
            return Err(InterchangeError::DimensionMismatch(format!(
                "mask is {}x{}, frame is {}x{}",
                self.mask.dims().height,
                self.mask.dims().width,
                image.height,
                image.width
            )));
        }
        self.mask.validate()
    }
}

/// Frames `first..=last` reconstructed in one shared coordinate frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowGroup {
    pub id: u32,
    pub first: FrameId,
    pub last: FrameId,
}

impl WindowGroup {
    pub fn contains(&self, f: FrameId) -> bool {
        self.first <= f && f <= self.last
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointMapRef {
    pub group: u32,
    pub pointmap: PathBuf,
    pub valid: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameEntry {
    pub index: FrameId,
    pub detections: PathBuf,
    pub pointmaps: Vec<PointMapRef>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceManifest {
    pub name: String,
    pub frame_count: u32,
    pub image: ImageDims,
    /// Pointmap resolution when it differs from `image`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pointmap_dims: Option<ImageDims>,
    pub groups: Vec<WindowGroup>,
    pub frames: Vec<FrameEntry>,
}

impl SequenceManifest {
    /// Canonical manifest for `frame_count` frames and the given groups.
    pub fn canonical(
        name: impl Into<String>,
        image: ImageDims,
        pointmap_dims: Option<ImageDims>,
        groups: Vec<WindowGroup>,
        frame_count: u32,
    ) -> Self {
        let frames = (1..=frame_count)
            .map(|i| {
                let index = FrameId(i);
                let dir = PathBuf::from("frames").join(i.to_string());
                let mut pointmaps = Vec::new();
                for g in groups.iter().filter(|g| g.contains(index)) {
                    let (pm, valid) = if pointmaps.is_empty() {
                        ("pointmap.bin".to_string(), "valid.bin".to_string())
                    } else {
                        (
                            format!("pointmap_g{}.bin", g.id),
                            format!("valid_g{}.bin", g.id),
                        )
                    };
                    pointmaps.push(PointMapRef {
                        group: g.id,
                        pointmap: dir.join(pm),
                        valid: dir.join(valid),
                    });
                }
                FrameEntry {
                    index,
                    detections: dir.join("detections.json"),
                    pointmaps,
                }
            })
            .collect();
        SequenceManifest {
            name: name.into(),
            frame_count,
            image,
            pointmap_dims,
            groups,
            frames,
        }
    }

    pub fn pointmap_dims(&self) -> ImageDims {
        self.pointmap_dims.unwrap_or(self.image)
    }

    pub fn frame_ids(&self) -> impl Iterator<Item = FrameId> + '_ {
        self.frames.iter().map(|f| f.index)
    }

    pub fn frame(&self, f: FrameId) -> Option<&FrameEntry> {
        let i = (f.0 as usize).checked_sub(1)?;
        self.frames.get(i).filter(|e| e.index == f)
    }

    pub fn group(&self, id: u32) -> Option<&WindowGroup> {
        self.groups.iter().find(|g| g.id == id)
    }

    /// Checks every structural invariant of the manifest.
    pub fn validate(&self) -> Result<(), InterchangeError> {
        use InterchangeError::InvalidManifest as bad;
        if self.frame_count == 0 || self.frames.is_empty() {
            return Err(InterchangeError::EmptySequence);
        }
        if self.frames.len() != self.frame_count as usize {
            return Err(bad(format!(
                "frame_count is {} but {} frames are listed",
                self.frame_count,
                self.frames.len()
            )));
        }
        if self.image.is_empty() || self.pointmap_dims().is_empty() {
            return Err(bad("image and pointmap dims must be non-zero".into()));
        }
        for (i, entry) in self.frames.iter().enumerate() {
            let expected = FrameId(i as u32 + 1);
            if entry.index != expected {
                return Err(bad(format!(
                    "frame ids must be 1..=N in increasing order: position {} holds frame {}",
                    i + 1,
                    entry.index
                )));
            }
        }
        if self.groups.is_empty() {
            return Err(bad("no window groups".into()));
        }
        let n = FrameId(self.frame_count);
        for (k, g) in self.groups.iter().enumerate() {
            if g.id != k as u32 {
                return Err(bad(format!("group at position {k} has id {}", g.id)));
            }
            if g.first > g.last || g.first.0 < 1 || g.last > n {
                return Err(bad(format!(
                    "group {} spans {}..={}",
                    g.id, g.first, g.last
                )));
            }
            if k == 0 && g.first != FrameId(1) {
                return Err(bad("first group must start at frame 1".into()));
            }
            if k > 0 {
                let prev = self.groups[k - 1];
                if g.first <= prev.first || g.last <= prev.last || g.first.0 > prev.last.0 + 1 {
                    return Err(bad(format!(
                        "group {} ({}..={}) does not follow group {} ({}..={}) contiguously",
                        g.id, g.first, g.last, prev.id, prev.first, prev.last
                    )));
                }
            }
        }
        if self.groups.last().map(|g| g.last) != Some(n) {
            return Err(bad("groups must cover every frame".into()));
        }
        for entry in &self.frames {
            let expected: Vec<u32> = self
                .groups
                .iter()
                .filter(|g| g.contains(entry.index))
                .map(|g| g.id)
                .collect();
            let listed: Vec<u32> = entry.pointmaps.iter().map(|p| p.group).collect();
            if listed != expected {
                return Err(bad(format!(
                    "frame {} lists pointmaps for groups {listed:?}, expected {expected:?}",
                    entry.index
                )));
            }
        }
        Ok(())
    }
}

/// Everything the engine needs for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameData {
    pub detections: Vec<Detection>,
    /// One pointmap per group containing the frame, in group order.
    pub pointmaps: Vec<(u32, PointMap)>,
}

/// Read access to a sequence, in memory or on disk.
pub trait FrameSource {
    fn manifest(&self) -> &SequenceManifest;

    fn detections(&self, frame: FrameId) -> crate::Result<Cow<'_, [Detection]>>;

    fn pointmap(&self, frame: FrameId, group: u32) -> crate::Result<Cow<'_, PointMap>>;
}

/// A fully materialized sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    manifest: SequenceManifest,
    frames: Vec<FrameData>,
}

impl Sequence {
    pub fn new(
        manifest: SequenceManifest,
        frames: Vec<FrameData>,
    ) -> Result<Self, InterchangeError> {
        manifest.validate()?;
        if frames.len() != manifest.frames.len() {
            return Err(InterchangeError::InvalidManifest(format!(
                "{} frames of data for {} manifest entries",
                frames.len(),
                manifest.frames.len()
            )));
        }
        let pm_dims = manifest.pointmap_dims();
        for (entry, data) in manifest.frames.iter().zip(&frames) {
            let check = || -> Result<(), InterchangeError> {
                for det in &data.detections {
                    if det.frame != entry.index {
                        return Err(InterchangeError::InvalidDetection(format!(
                            "detection tagged frame {}",
                            det.frame
                        )));
                    }
                    det.validate(manifest.image)?;
                }
                let groups: Vec<u32> = data.pointmaps.iter().map(|(g, _)| *g).collect();
                let expected: Vec<u32> = entry.pointmaps.iter().map(|p| p.group).collect();
                if groups != expected {
                    return Err(InterchangeError::InvalidManifest(format!(
                        "pointmaps for groups {groups:?}, manifest lists {expected:?}"
                    )));
                }
                for (_, pm) in &data.pointmaps {
                    if pm.dims() != pm_dims {
                        return Err(InterchangeError::DimensionMismatch(format!(
                            "pointmap is {}x{}, expected {}x{}",
                            pm.dims().height,
                            pm.dims().width,
                            pm_dims.height,
                            pm_dims.width
                        )));
                    }
                }
                Ok(())
            };
            check().map_err(|e| e.in_frame(entry.index, &entry.detections))?;
        }
        Ok(Sequence { manifest, frames })
    }

    pub fn frames(&self) -> &[FrameData] {
        &self.frames
    }

    pub fn frame_data(&self, f: FrameId) -> Option<&FrameData> {
        self.manifest.frame(f)?;
        self.frames.get(f.0 as usize - 1)
    }
}

impl FrameSource for Sequence {
    fn manifest(&self) -> &SequenceManifest {
        &self.manifest
    }

    fn detections(&self, frame: FrameId) -> crate::Result<Cow<'_, [Detection]>> {
        let data = self.frame_data(frame).ok_or_else(|| {
            InterchangeError::InvalidManifest(format!("no frame {frame} in sequence"))
        })?;
        Ok(Cow::Borrowed(&data.detections))
    }

    fn pointmap(&self, frame: FrameId, group: u32) -> crate::Result<Cow<'_, PointMap>> {
        self.frame_data(frame)
            .and_then(|d| d.pointmaps.iter().find(|(g, _)| *g == group))
            .map(|(_, pm)| Cow::Borrowed(pm))
            .ok_or_else(|| InterchangeError::NoPointMap { frame, group }.into())
    }
}

//! Sliding-window identity tracking.
//!
//! Frames are processed in windows of `W` frames that overlap by `T`. Each
//! window reads pointmaps from one reconstruction group; the window's local
//! coordinates are mapped into the global frame (the first window's group)
//! by a transform fitted on the overlap frames. Identities are carried by a
//! [`TrackBuffer`] with a memory horizon of `M` frames.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::io;
use std::ops::RangeInclusive;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assoc::{median_centroid, mutual_nearest_neighbors, point_match, CostMode, Object3d};
use crate::geometry::{align, apply_transform, AlignConfig, Transform4};
use crate::interchange::{BBox2D, Detection, FrameId, FrameSource, ImageDims, Pixel, PointMap};
use crate::Point3;

#[derive(Debug, Error)]
pub enum TrackerError {
    #[error("invalid window spec: {0}")]
    InvalidWindow(String),
    #[error("no reconstruction group covers window frames {first}..={last}")]
    NoCoveringGroup { first: FrameId, last: FrameId },
    #[error("frame {frame}: {detail}")]
    DimensionMismatch { frame: FrameId, detail: String },
    #[error("failed to write {path}: {source}")]
    Io { path: String, source: io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TrackId(pub u32);

impl std::fmt::Display for TrackId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// One detection lifted to 3D.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectObservation {
    pub frame: FrameId,
    /// Index of the source detection within its frame.
    pub detection: usize,
    /// Lifted points; `pixels[k]` is the image pixel of `points[k]`.
    pub points: Vec<Point3>,
    pub pixels: Vec<Pixel>,
    pub centroid: Point3,
    pub bbox: BBox2D,
    pub label: String,
    pub confidence: f64,
}

impl ObjectObservation {
    /// Same observation with its points mapped through `t` and the median
    /// recomputed.
    pub fn transformed(&self, t: &Transform4) -> crate::Result<Self> {
        let points = apply_transform(t, &self.points)?;
        let centroid = median_centroid(&points).unwrap_or(self.centroid);
        Ok(ObjectObservation {
            points,
            centroid,
            ..self.clone()
        })
    }
}

impl Object3d for ObjectObservation {
    fn points(&self) -> &[Point3] {
        &self.points
    }

    fn centroid(&self) -> Point3 {
        self.centroid
    }
}

/// Lifts each detection through `pointmap`; detections whose masks cover no
/// valid pixel are dropped and counted.
pub fn lift_objects(
    detections: &[Detection],
    pointmap: &PointMap,
    image: ImageDims,
) -> Result<(Vec<ObjectObservation>, usize), TrackerError> {
    let mut out = Vec::with_capacity(detections.len());
    let mut dropped = 0;
    for (k, det) in detections.iter().enumerate() {
        if det.mask.dims() != image {
            return Err(TrackerError::DimensionMismatch {
                frame: det.frame,
                detail: format!(
                    "detection {k} mask is {}x{}, image is {}x{}",
                    det.mask.dims().height,
                    det.mask.dims().width,
                    image.height,
                    image.width
                ),
            });
        }
        let mut points = Vec::new();
        let mut pixels = Vec::new();
        for px in det.mask.pixels() {
            if let Some(p) = pointmap.get_scaled(px, image) {
                points.push(p);
                pixels.push(px);
            }
        }
        let Some(centroid) = median_centroid(&points) else {
            dropped += 1;
            continue;
        };
        out.push(ObjectObservation {
            frame: det.frame,
            detection: k,
            points,
            pixels,
            centroid,
            bbox: det.bbox,
            label: det.label.clone(),
            confidence: det.confidence,
        });
    }
    Ok((out, dropped))
}

/// Window size `W` and overlap `T`; the step is `W - T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    size: u32,
    overlap: u32,
}

impl WindowSpec {
    pub fn new(size: u32, overlap: u32) -> Result<Self, TrackerError> {
        if overlap == 0 || overlap >= size {
            return Err(TrackerError::InvalidWindow(format!(
                "need 1 <= overlap < window size, got overlap {overlap} with window size {size}"
            )));
        }
        Ok(WindowSpec { size, overlap })
    }

    pub fn size(&self) -> u32 {
        self.size
    }

    pub fn overlap(&self) -> u32 {
        self.overlap
    }

    pub fn step(&self) -> u32 {
        self.size - self.overlap
    }
}

impl Default for WindowSpec {
    fn default() -> Self {
        WindowSpec {
            size: 10,
            overlap: 5,
        }
    }
}

/// Frame ranges of the sliding windows over `1..=n`.
///
/// A new window opens only while frames remain after the previous one, so
/// the last window always has at least `T + 1` frames.
pub fn plan_windows(n: u32, spec: WindowSpec) -> Result<Vec<RangeInclusive<u32>>, TrackerError> {
    if n == 0 {
        return Err(TrackerError::InvalidWindow("sequence has no frames".into()));
    }
    WindowSpec::new(spec.size, spec.overlap)?;
    let mut out = Vec::new();
    let mut start = 1u32;
    loop {
        let end = (start + spec.size - 1).min(n);
        out.push(start..=end);
        if end >= n {
            break;
        }
        start += spec.step();
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerConfig {
    pub window: WindowSpec,
    /// Memory horizon M: an identity survives at most this many absent frames.
    pub memory_frames: u32,
    /// Maximum association cost.
    pub gate: f64,
    pub cost_mode: CostMode,
    pub align: AlignConfig,
    /// Gate for point correspondences during window alignment.
    pub align_max_dist: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            window: WindowSpec::default(),
            memory_frames: 30,
            gate: 0.5,
            cost_mode: CostMode::Centroid,
            align: AlignConfig::default(),
            align_max_dist: 0.1,
        }
    }
}

/// Buffered state of one identity.
#[derive(Debug, Clone, PartialEq)]
pub struct BufferEntry {
    pub last_seen: FrameId,
    /// Smoothed centroid in the global frame.
    pub centroid: Point3,
    /// Latest observed points in the global frame.
    pub points: Vec<Point3>,
    pub label: String,
}

impl Object3d for BufferEntry {
    fn points(&self) -> &[Point3] {
        &self.points
    }

    fn centroid(&self) -> Point3 {
        self.centroid
    }
}

/// Memory of recently seen identities.
#[derive(Debug, Clone)]
pub struct TrackBuffer {
    entries: BTreeMap<TrackId, BufferEntry>,
    memory: u32,
    next_id: u32,
    last_emitted: Option<FrameId>,
    assigned: HashMap<(FrameId, usize), TrackId>,
}

impl TrackBuffer {
    pub fn new(memory_frames: u32) -> Self {
        TrackBuffer {
            entries: BTreeMap::new(),
            memory: memory_frames,
            next_id: 1,
            last_emitted: None,
            assigned: HashMap::new(),
        }
    }

    pub fn entries(&self) -> &BTreeMap<TrackId, BufferEntry> {
        &self.entries
    }

    pub fn memory_frames(&self) -> u32 {
        self.memory
    }

    pub fn last_emitted(&self) -> Option<FrameId> {
        self.last_emitted
    }

    /// Identity given to detection `detection` of `frame`, once emitted.
    pub fn assigned(&self, frame: FrameId, detection: usize) -> Option<TrackId> {
        self.assigned.get(&(frame, detection)).copied()
    }

    /// Drops identities absent for more than `M` frames before `current`.
    pub fn evict(&mut self, current: FrameId) {
        let m = self.memory as u64;
        self.entries
            .retain(|_, e| (current.0 as u64).saturating_sub(e.last_seen.0 as u64 + 1) <= m);
    }

    fn fresh_id(&mut self) -> TrackId {
        let id = TrackId(self.next_id);
        self.next_id += 1;
        id
    }

    /// Assigns identities to one frame's observations (global frame) and
    /// returns the emitted rows.
    pub fn step(
        &mut self,
        frame: FrameId,
        obs: &[ObjectObservation],
        config: &TrackerConfig,
    ) -> crate::Result<Vec<TrackRow>> {
        self.evict(frame);
        let live: Vec<(TrackId, &BufferEntry)> =
            self.entries.iter().map(|(id, e)| (*id, e)).collect();
        let entries: Vec<&BufferEntry> = live.iter().map(|(_, e)| *e).collect();
        let assignment = point_match(&entries, obs, config.gate, config.cost_mode)?;
        let mut ids: Vec<Option<TrackId>> = vec![None; obs.len()];
        for pair in &assignment.pairs {
            ids[pair.index_b] = Some(live[pair.index_a].0);
        }
        let mut rows = Vec::with_capacity(obs.len());
        for (o, id) in obs.iter().zip(ids) {
            let id = match id {
                Some(id) => {
                    let e = self.entries.get_mut(&id).expect("matched entry is live");
                    e.last_seen = frame;
                    e.centroid = Point3::from((e.centroid.coords + o.centroid.coords) * 0.5);
                    e.points.clone_from(&o.points);
                    e.label.clone_from(&o.label);
                    id
                }
                None => {
                    let id = self.fresh_id();
                    self.entries.insert(
                        id,
                        BufferEntry {
                            last_seen: frame,
                            centroid: o.centroid,
                            points: o.points.clone(),
                            label: o.label.clone(),
                        },
                    );
                    id
                }
            };
            self.assigned.insert((frame, o.detection), id);
            rows.push(TrackRow::from_observation(id, o));
        }
        self.last_emitted = Some(frame);
        rows.sort_by_key(|r| r.id);
        Ok(rows)
    }

    /// Moves the buffered state of identities seen in an already emitted
    /// frame onto their re-observation in the current window.
    pub fn reanchor(&mut self, obs: &[ObjectObservation]) {
        for o in obs {
            let Some(id) = self.assigned(o.frame, o.detection) else {
                continue;
            };
            if let Some(e) = self.entries.get_mut(&id) {
                if e.last_seen == o.frame {
                    e.centroid = o.centroid;
                    e.points.clone_from(&o.points);
                }
            }
        }
    }
}

/// One output row: an identity at a frame, global coordinates and 2D box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRow {
    pub frame: FrameId,
    pub id: TrackId,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub bbox: BBox2D,
    pub label: String,
    pub confidence: f64,
}

impl TrackRow {
    fn from_observation(id: TrackId, o: &ObjectObservation) -> Self {
        TrackRow {
            frame: o.frame,
            id,
            x: o.centroid.x,
            y: o.centroid.y,
            z: o.centroid.z,
            bbox: o.bbox,
            label: o.label.clone(),
            confidence: o.confidence,
        }
    }

    pub fn position(&self) -> Point3 {
        Point3::new(self.x, self.y, self.z)
    }
}

/// Tracking output, rows sorted by (frame, id).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrackTable {
    pub rows: Vec<TrackRow>,
}

impl TrackTable {
    pub fn new(mut rows: Vec<TrackRow>) -> Self {
        rows.sort_by_key(|r| (r.frame, r.id));
        TrackTable { rows }
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    /// Distinct identities, ascending.
    pub fn ids(&self) -> Vec<TrackId> {
        let mut ids: Vec<TrackId> = self.rows.iter().map(|r| r.id).collect();
        ids.sort();
        ids.dedup();
        ids
    }

    /// `frame,id,bb_left,bb_top,bb_width,bb_height,conf,x,y,z` lines.
    pub fn to_mot(&self) -> String {
        let mut s = String::new();
        for r in &self.rows {
            let b = &r.bbox;
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                r.frame, r.id, b.left, b.top, b.width, b.height, r.confidence, r.x, r.y, r.z
            );
        }
        s
    }

    pub fn write_mot(&self, path: &Path) -> Result<(), TrackerError> {
        std::fs::write(path, self.to_mot()).map_err(|source| TrackerError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// Per-window alignment record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowReport {
    pub first: FrameId,
    pub last: FrameId,
    pub group: u32,
    /// Window shares its group with the previous window; no fit was needed.
    pub reused_transform: bool,
    pub fallback: bool,
    pub matched_count: usize,
    pub mean_residual: Option<f64>,
    pub transform: Transform4,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrackDiagnostics {
    pub fallback_count: usize,
    /// Detections dropped for lacking valid 3D points.
    pub dropped_detections: usize,
    pub windows: Vec<WindowReport>,
}

impl TrackDiagnostics {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("diagnostics serialize")
    }
}

#[derive(Debug, Clone)]
pub struct TrackOutput {
    pub table: TrackTable,
    pub diagnostics: TrackDiagnostics,
}

/// Outcome of fitting one window into the global frame.
#[derive(Debug, Clone)]
pub struct WindowAlignment {
    /// Current window coordinates to global coordinates.
    pub transform: Transform4,
    pub fallback: bool,
    pub matched_count: usize,
    pub mean_residual: Option<f64>,
}

/// Fits the map from the current window's coordinates into the global frame.
///
/// `prev` holds overlap-frame observations already in global coordinates,
/// `cur` the same frames lifted through the current window's pointmaps.
/// Correspondences are seeded by pixel identity (same frame, same
/// detection, same pixel), a seed transform is fitted, and the final set is
/// the gated per-frame mutual nearest neighbours of the seeded points. With
/// too little support the previous cumulative transform `fallback` is
/// returned and flagged.
pub fn align_window(
    prev: &[ObjectObservation],
    cur: &[ObjectObservation],
    fallback: &Transform4,
    config: &TrackerConfig,
) -> WindowAlignment {
    let need = config.align.family.min_support();
    let fall = |matched_count| {
        log::warn!("window alignment has {matched_count} correspondences (< {need}); keeping previous transform");
        WindowAlignment {
            transform: *fallback,
            fallback: true,
            matched_count,
            mean_residual: None,
        }
    };

    let by_key: HashMap<(FrameId, usize), &ObjectObservation> =
        prev.iter().map(|o| ((o.frame, o.detection), o)).collect();
    let mut src = Vec::new();
    let mut dst = Vec::new();
    for c in cur {
        let Some(p) = by_key.get(&(c.frame, c.detection)) else {
            continue;
        };
        let lookup: HashMap<Pixel, &Point3> = p
            .pixels
            .iter()
            .zip(&p.points)
            .map(|(px, pt)| (*px, pt))
            .collect();
        for (px, pt) in c.pixels.iter().zip(&c.points) {
            if let Some(q) = lookup.get(px) {
                src.push(*pt);
                dst.push(**q);
            }
        }
    }
    if src.len() < need {
        return fall(src.len());
    }
    let Ok(seed) = align(&src, &dst, &config.align) else {
        return fall(src.len());
    };

    let mut frames: BTreeMap<FrameId, (Vec<Point3>, Vec<Point3>)> = BTreeMap::new();
    for c in cur {
        frames
            .entry(c.frame)
            .or_default()
            .0
            .extend_from_slice(&c.points);
    }
    for p in prev {
        frames
            .entry(p.frame)
            .or_default()
            .1
            .extend_from_slice(&p.points);
    }
    src.clear();
    dst.clear();
    for (cur_pts, prev_pts) in frames.values() {
        let Ok(seeded) = apply_transform(&seed.transform, cur_pts) else {
            continue;
        };
        for m in mutual_nearest_neighbors(&seeded, prev_pts, config.align_max_dist) {
            src.push(cur_pts[m.index_a]);
            dst.push(prev_pts[m.index_b]);
        }
    }
    if src.len() < need {
        return fall(src.len());
    }
    match align(&src, &dst, &config.align) {
        Ok(r) => WindowAlignment {
            transform: r.transform,
            fallback: false,
            matched_count: r.matched_count,
            mean_residual: Some(r.mean_residual),
        },
        Err(_) => fall(src.len()),
    }
}

/// First window: every frame is stepped through a fresh buffer, so frame 1
/// objects get identities 1..=K in detection order.
pub fn init_window(
    frames: &[Vec<ObjectObservation>],
    config: &TrackerConfig,
) -> crate::Result<(Vec<TrackRow>, TrackBuffer)> {
    let mut buffer = TrackBuffer::new(config.memory_frames);
    let rows = propagate_ids(FrameId(1), frames, &mut buffer, config)?;
    Ok((rows, buffer))
}

/// Steps the buffer through consecutive frames starting at `first`, all in
/// global coordinates. Frames the buffer already emitted only re-anchor
/// their identities.
pub fn propagate_ids(
    first: FrameId,
    frames: &[Vec<ObjectObservation>],
    buffer: &mut TrackBuffer,
    config: &TrackerConfig,
) -> crate::Result<Vec<TrackRow>> {
    let mut rows = Vec::new();
    for (k, obs) in frames.iter().enumerate() {
        let frame = FrameId(first.0 + k as u32);
        if buffer.last_emitted.is_some_and(|last| frame <= last) {
            buffer.reanchor(obs);
        } else {
            rows.extend(buffer.step(frame, obs, config)?);
        }
    }
    Ok(rows)
}

fn covering_group(
    source: &dyn FrameSource,
    range: &RangeInclusive<u32>,
) -> Result<u32, TrackerError> {
    let (first, last) = (FrameId(*range.start()), FrameId(*range.end()));
    source
        .manifest()
        .groups
        .iter()
        .find(|g| g.contains(first) && g.contains(last))
        .map(|g| g.id)
        .ok_or(TrackerError::NoCoveringGroup { first, last })
}

/// Full pipeline over a sequence.
pub fn track_sequence(
    source: &dyn FrameSource,
    config: &TrackerConfig,
) -> crate::Result<TrackOutput> {
    let manifest = source.manifest();
    let image = manifest.image;
    let windows = plan_windows(manifest.frame_count, config.window)?;
    let mut diagnostics = TrackDiagnostics::default();
    let mut rows = Vec::new();
    let mut buffer = TrackBuffer::new(config.memory_frames);
    // Global-frame observations of the previous window, by frame.
    let mut prev_global: BTreeMap<FrameId, Vec<ObjectObservation>> = BTreeMap::new();
    let mut prev_group: Option<u32> = None;
    let mut cumulative = Transform4::identity();

    for range in &windows {
        let group = covering_group(source, range)?;
        let mut local: Vec<Vec<ObjectObservation>> = Vec::new();
        for f in range.clone() {
            let frame = FrameId(f);
            let detections = source.detections(frame)?;
            let pointmap = source.pointmap(frame, group)?;
            let (obs, dropped) = lift_objects(&detections, &pointmap, image)?;
            diagnostics.dropped_detections += dropped;
            local.push(obs);
        }

        let mut report = WindowReport {
            first: FrameId(*range.start()),
            last: FrameId(*range.end()),
            group,
            reused_transform: false,
            fallback: false,
            matched_count: 0,
            mean_residual: None,
            transform: cumulative,
        };
        match prev_group {
            None => {}
            Some(g) if g == group => report.reused_transform = true,
            Some(_) => {
                let mut prev_obs = Vec::new();
                let mut cur_obs = Vec::new();
                for (f, obs) in range.clone().zip(&local) {
                    if let Some(p) = prev_global.get(&FrameId(f)) {
                        prev_obs.extend_from_slice(p);
                        cur_obs.extend_from_slice(obs);
                    }
                }
                let a = align_window(&prev_obs, &cur_obs, &cumulative, config);
                cumulative = a.transform;
                report.fallback = a.fallback;
                report.matched_count = a.matched_count;
                report.mean_residual = a.mean_residual;
                report.transform = cumulative;
                if a.fallback {
                    diagnostics.fallback_count += 1;
                }
            }
        }
        diagnostics.windows.push(report);

        let mut global: Vec<Vec<ObjectObservation>> = Vec::with_capacity(local.len());
        for obs in &local {
            global.push(
                obs.iter()
                    .map(|o| o.transformed(&cumulative))
                    .collect::<crate::Result<_>>()?,
            );
        }
        rows.extend(propagate_ids(
            FrameId(*range.start()),
            &global,
            &mut buffer,
            config,
        )?);
        prev_global = range.clone().map(FrameId).zip(global).collect();
        prev_group = Some(group);
    }
    Ok(TrackOutput {
        table: TrackTable::new(rows),
        diagnostics,
    })
}

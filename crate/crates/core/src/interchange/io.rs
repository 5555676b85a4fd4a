use std::borrow::Cow;
use std::fs;
use std::path::{Path, PathBuf};

use super::{
    Detection, FrameData, FrameEntry, FrameId, FrameSource, ImageDims, InterchangeError, PointMap,
    PointMapRef, Sequence, SequenceManifest,
};

pub const MANIFEST_FILE: &str = "manifest.json";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> InterchangeError + '_ {
    move |source| InterchangeError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, InterchangeError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    serde_json::from_slice(&bytes).map_err(|source| InterchangeError::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), InterchangeError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, bytes).map_err(io_err(path))
}

fn blob_len(dims: ImageDims) -> u64 {
    dims.len() as u64 * 12
}

fn bitmap_len(dims: ImageDims) -> u64 {
    (dims.len() as u64).div_ceil(8)
}

pub(crate) fn encode_points(points: &[[f32; 3]]) -> Vec<u8> {
    let mut out = Vec::with_capacity(points.len() * 12);
    for p in points {
        for c in p {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    out
}

pub(crate) fn encode_validity(valid: &[bool]) -> Vec<u8> {
    let mut out = vec![0u8; valid.len().div_ceil(8)];
    for (i, _) in valid.iter().enumerate().filter(|(_, v)| **v) {
        out[i / 8] |= 1 << (i % 8);
    }
    out
}

fn decode_pointmap(
    dims: ImageDims,
    blob: &[u8],
    bitmap: &[u8],
) -> Result<PointMap, InterchangeError> {
    if blob.len() as u64 != blob_len(dims) || bitmap.len() as u64 != bitmap_len(dims) {
        return Err(InterchangeError::DimensionMismatch(format!(
            "pointmap blob {} bytes / validity {} bytes, {}x{} needs {} / {}",
            blob.len(),
            bitmap.len(),
            dims.height,
            dims.width,
            blob_len(dims),
            bitmap_len(dims)
        )));
    }
    let points = blob
        .chunks_exact(12)
        .map(|c| {
            let f = |k: usize| f32::from_le_bytes([c[k], c[k + 1], c[k + 2], c[k + 3]]);
            [f(0), f(4), f(8)]
        })
        .collect();
    let valid = (0..dims.len())
        .map(|i| bitmap[i / 8] >> (i % 8) & 1 == 1)
        .collect();
    PointMap::new(dims, points, valid)
}

/// A sequence directory opened and validated by [`load_sequence`].
///
/// Detections are held in memory; pointmaps are read on demand.
#[derive(Debug)]
pub struct SequenceDir {
    root: PathBuf,
    manifest: SequenceManifest,
    detections: Vec<Vec<Detection>>,
}

/// Opens a sequence directory and checks all format invariants: manifest
/// structure, detection records, mask encodings and pointmap blob sizes.
pub fn load_sequence(root: impl AsRef<Path>) -> Result<SequenceDir, InterchangeError> {
    let root = root.as_ref().to_path_buf();
    let manifest_path = root.join(MANIFEST_FILE);
    if !manifest_path.is_file() {
        return Err(InterchangeError::InvalidManifest(format!(
            "{} not found",
            manifest_path.display()
        )));
    }
    let manifest: SequenceManifest = read_json(&manifest_path)?;
    manifest.validate()?;
    let pm_dims = manifest.pointmap_dims();

    let mut detections = Vec::with_capacity(manifest.frames.len());
    for entry in &manifest.frames {
        let path = root.join(&entry.detections);
        if !path.is_file() {
            return Err(InterchangeError::MissingFile {
                frame: entry.index,
                path,
            });
        }
        let dets: Vec<Detection> = read_json(&path).map_err(|e| e.in_frame(entry.index, &path))?;
        for det in &dets {
            let checked = if det.frame != entry.index {
                Err(InterchangeError::InvalidDetection(format!(
                    "detection tagged frame {}",
                    det.frame
                )))
            } else {
                det.validate(manifest.image)
            };
            checked.map_err(|e| e.in_frame(entry.index, &path))?;
        }
        detections.push(dets);

        for pm in &entry.pointmaps {
            for (path, expected) in [
                (root.join(&pm.pointmap), blob_len(pm_dims)),
                (root.join(&pm.valid), bitmap_len(pm_dims)),
            ] {
                let meta = match fs::metadata(&path) {
                    Ok(m) if m.is_file() => m,
                    _ => {
                        return Err(InterchangeError::MissingFile {
                            frame: entry.index,
                            path,
                        })
                    }
                };
                if meta.len() != expected {
                    let e = InterchangeError::DimensionMismatch(format!(
                        "{} bytes, expected {expected} for {}x{}",
                        meta.len(),
                        pm_dims.height,
                        pm_dims.width
                    ));
                    return Err(e.in_frame(entry.index, path));
                }
            }
        }
    }
    Ok(SequenceDir {
        root,
        manifest,
        detections,
    })
}

impl SequenceDir {
    pub fn root(&self) -> &Path {
        &self.root
    }

    fn entry(&self, frame: FrameId) -> Result<&FrameEntry, InterchangeError> {
        self.manifest
            .frame(frame)
            .ok_or_else(|| InterchangeError::InvalidManifest(format!("no frame {frame}")))
    }

    fn read_pointmap(&self, frame: FrameId, r: &PointMapRef) -> Result<PointMap, InterchangeError> {
        let blob_path = self.root.join(&r.pointmap);
        let blob =
            fs::read(&blob_path).map_err(|e| io_err(&blob_path)(e).in_frame(frame, &blob_path))?;
        let valid_path = self.root.join(&r.valid);
        let bits = fs::read(&valid_path)
            .map_err(|e| io_err(&valid_path)(e).in_frame(frame, &valid_path))?;
        decode_pointmap(self.manifest.pointmap_dims(), &blob, &bits)
            .map_err(|e| e.in_frame(frame, blob_path))
    }

    /// Reads every blob into memory.
    pub fn to_sequence(&self) -> Result<Sequence, InterchangeError> {
        let mut frames = Vec::with_capacity(self.manifest.frames.len());
        for (entry, dets) in self.manifest.frames.iter().zip(&self.detections) {
            let pointmaps = entry
                .pointmaps
                .iter()
                .map(|r| Ok((r.group, self.read_pointmap(entry.index, r)?)))
                .collect::<Result<Vec<_>, InterchangeError>>()?;
            frames.push(FrameData {
                detections: dets.clone(),
                pointmaps,
            });
        }
        Sequence::new(self.manifest.clone(), frames)
    }
}

impl FrameSource for SequenceDir {
    fn manifest(&self) -> &SequenceManifest {
        &self.manifest
    }

    fn detections(&self, frame: FrameId) -> crate::Result<Cow<'_, [Detection]>> {
        self.entry(frame)?;
        Ok(Cow::Borrowed(&self.detections[frame.0 as usize - 1]))
    }

    fn pointmap(&self, frame: FrameId, group: u32) -> crate::Result<Cow<'_, PointMap>> {
        let entry = self.entry(frame)?;
        let r = entry
            .pointmaps
            .iter()
            .find(|r| r.group == group)
            .ok_or(InterchangeError::NoPointMap { frame, group })?;
        Ok(Cow::Owned(self.read_pointmap(frame, r)?))
    }
}

/// Writes `seq` under `root` following its manifest's relative paths.
pub fn save_sequence(seq: &Sequence, root: impl AsRef<Path>) -> Result<(), InterchangeError> {
    let root = root.as_ref();
    let manifest = seq.manifest();
    manifest.validate()?;
    fs::create_dir_all(root).map_err(io_err(root))?;
    let json = serde_json::to_vec_pretty(manifest).map_err(|source| InterchangeError::Json {
        path: root.join(MANIFEST_FILE),
        source,
    })?;
    write_file(&root.join(MANIFEST_FILE), &json)?;
    for (entry, data) in manifest.frames.iter().zip(seq.frames()) {
        let det_path = root.join(&entry.detections);
        let json = serde_json::to_vec_pretty(&data.detections).map_err(|source| {
            InterchangeError::Json {
                path: det_path.clone(),
                source,
            }
        })?;
        write_file(&det_path, &json)?;
        for (r, (_, pm)) in entry.pointmaps.iter().zip(&data.pointmaps) {
            write_file(&root.join(&r.pointmap), &encode_points(pm.raw_points()))?;
            write_file(&root.join(&r.valid), &encode_validity(pm.validity()))?;
        }
    }
    Ok(())
}

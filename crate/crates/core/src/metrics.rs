//! Tracking evaluation: HOTA (with DetA/AssA/LocA), IDF1 and MT/ML/Frag,
//! plus the MOTChallenge-style text format.
//!
//! Matching follows the TrackEval reference procedures. HOTA matches once per
//! frame on similarity weighted by a global alignment score and thresholds
//! the matched pairs at each alpha. IDF1 finds the best global one-to-one
//! ID mapping. MT/ML/Frag come from a per-frame matching that prefers
//! keeping the previous frame's pairing.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assoc::max_weight_matching;
use crate::interchange::{BBox2D, FrameId};
use crate::tracker::{TrackId, TrackRow, TrackTable};

/// Tolerance on threshold comparisons.
const EPS: f64 = f64::EPSILON;
/// Bonus for keeping the previous frame's pairing in the CLEAR matching.
const CONTINUITY_BONUS: f64 = 1000.0;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{path}: {source}")]
    Read {
        path: String,
        source: Box<MetricsError>,
    },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("duplicate row for frame {frame}, id {id}")]
    DuplicateRow { frame: FrameId, id: TrackId },
    #[error("invalid eval config: {0}")]
    InvalidConfig(String),
}

/// Parses `frame,id,bb_left,bb_top,bb_width,bb_height,conf,x,y,z` rows.
/// Blank lines and lines starting with `#` are skipped.
pub fn parse_mot(text: &str) -> Result<TrackTable, MetricsError> {
    let mut rows = Vec::new();
    let mut seen: HashMap<(FrameId, TrackId), usize> = HashMap::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let err = |message: String| MetricsError::Parse { line, message };
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() != 10 {
            return Err(err(format!(
                "expected 10 comma-separated fields, found {}",
                fields.len()
            )));
        }
        let int = |i: usize, name: &str| {
            fields[i].parse::<u32>().map_err(|_| {
                err(format!(
                    "{name} {:?} is not a non-negative integer",
                    fields[i]
                ))
            })
        };
        let num = |i: usize, name: &str| match fields[i].parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(err(format!(
                "{name} {:?} is not a finite number",
                fields[i]
            ))),
        };
        let frame = int(0, "frame")?;
        if frame == 0 {
            return Err(err("frame numbers start at 1".into()));
        }
        let id = TrackId(int(1, "id")?);
        let bbox = BBox2D::new(
            num(2, "bb_left")?,
            num(3, "bb_top")?,
            num(4, "bb_width")?,
            num(5, "bb_height")?,
        );
        if bbox.width <= 0.0 || bbox.height <= 0.0 {
            return Err(err("box width and height must be positive".into()));
        }
        let confidence = num(6, "conf")?;
        let (x, y, z) = (num(7, "x")?, num(8, "y")?, num(9, "z")?);
        if let Some(first) = seen.insert((FrameId(frame), id), line) {
            return Err(err(format!(
                "frame {frame}, id {id} already given on line {first}"
            )));
        }
        rows.push(TrackRow {
            frame: FrameId(frame),
            id,
            x,
            y,
            z,
            bbox,
            label: String::new(),
            confidence,
        });
    }
    Ok(TrackTable::new(rows))
}

pub fn read_mot(path: &Path) -> Result<TrackTable, MetricsError> {
    let text = std::fs::read_to_string(path).map_err(|source| MetricsError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_mot(&text).map_err(|e| MetricsError::Read {
        path: path.display().to_string(),
        source: Box::new(e),
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Similarity {
    /// 2D box intersection over union.
    #[default]
    Iou,
    /// `max(0, 1 - d / d_max)` on 3D positions.
    Centroid { d_max: f64 },
}

impl Similarity {
    pub fn score(&self, gt: &TrackRow, pred: &TrackRow) -> f64 {
        match *self {
            Similarity::Iou => gt.bbox.iou(&pred.bbox),
            Similarity::Centroid { d_max } => {
                (1.0 - (gt.position() - pred.position()).norm() / d_max).max(0.0)
            }
        }
    }
}

impl FromStr for Similarity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "iou" => Ok(Similarity::Iou),
            "centroid" | "3d" => Ok(Similarity::Centroid { d_max: 1.0 }),
            other => Err(format!(
                "unknown similarity {other:?} (expected iou or centroid)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub similarity: Similarity,
    /// Localization thresholds, ascending.
    pub alphas: Vec<f64>,
    /// Similarity a pair needs to count for IDF1 and MT/ML/Frag.
    pub match_threshold: f64,
    pub mt_threshold: f64,
    pub ml_threshold: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            similarity: Similarity::Iou,
            alphas: alpha_grid(19),
            match_threshold: 0.5,
            mt_threshold: 0.8,
            ml_threshold: 0.2,
        }
    }
}

/// `k / (steps + 1)` for `k = 1..=steps`; 19 steps give 0.05, 0.10, ..., 0.95.
pub fn alpha_grid(steps: usize) -> Vec<f64> {
    (1..=steps).map(|k| k as f64 / (steps + 1) as f64).collect()
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), MetricsError> {
        let bad = |m: String| Err(MetricsError::InvalidConfig(m));
        if self.alphas.is_empty() {
            return bad("alpha set is empty".into());
        }
        if self.alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0))
            || self.alphas.windows(2).any(|w| w[0] >= w[1])
        {
            return bad(format!(
                "alphas {:?} must be strictly increasing in (0, 1)",
                self.alphas
            ));
        }
        for (name, v) in [
            ("match", self.match_threshold),
            ("MT", self.mt_threshold),
            ("ML", self.ml_threshold),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return bad(format!("{name} threshold {v} must be in (0, 1)"));
            }
        }
        if let Similarity::Centroid { d_max } = self.similarity {
            if !(d_max > 0.0 && d_max.is_finite()) {
                return bad(format!("d_max {d_max} must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaScores {
    pub alpha: f64,
    pub hota: f64,
    pub det_a: f64,
    pub ass_a: f64,
    pub loc_a: f64,
    pub tp: usize,
    pub fn_: usize,
    pub fp: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HotaScores {
    pub hota: f64,
    pub det_a: f64,
    pub ass_a: f64,
    pub loc_a: f64,
    pub per_alpha: Vec<AlphaScores>,
    /// Both tables were empty; every ratio is 1 by convention.
    pub vacuous: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityScores {
    pub idf1: f64,
    pub idtp: usize,
    pub idfp: usize,
    pub idfn: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClearCounts {
    pub gt_tracks: usize,
    pub mt: usize,
    pub pt: usize,
    pub ml: usize,
    pub frag: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub hota: f64,
    pub det_a: f64,
    pub ass_a: f64,
    pub loc_a: f64,
    pub idf1: f64,
    pub idtp: usize,
    pub idfp: usize,
    pub idfn: usize,
    pub mt: usize,
    pub pt: usize,
    pub ml: usize,
    pub frag: usize,
    pub gt_tracks: usize,
    pub pred_tracks: usize,
    pub vacuous: bool,
    pub per_alpha: Vec<AlphaScores>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Human-readable summary.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "HOTA  {:.6}", self.hota);
        let _ = writeln!(s, "DetA  {:.6}", self.det_a);
        let _ = writeln!(s, "AssA  {:.6}", self.ass_a);
        let _ = writeln!(s, "LocA  {:.6}", self.loc_a);
        let _ = writeln!(s, "IDF1  {:.6}", self.idf1);
        let _ = writeln!(s, "MT    {}", self.mt);
        let _ = writeln!(s, "ML    {}", self.ml);
        let _ = writeln!(s, "Frag  {}", self.frag);
        let _ = writeln!(
            s,
            "GT tracks {}, predicted tracks {}",
            self.gt_tracks, self.pred_tracks
        );
        if self.vacuous {
            let _ = writeln!(s, "(both tables empty; scores are vacuous)");
        }
        s
    }

    /// `alpha,hota,det_a,ass_a,loc_a,tp,fn,fp` CSV.
    pub fn alpha_table(&self) -> String {
        let mut s = String::from("alpha,hota,det_a,ass_a,loc_a,tp,fn,fp\n");
        for a in &self.per_alpha {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                a.alpha, a.hota, a.det_a, a.ass_a, a.loc_a, a.tp, a.fn_, a.fp
            );
        }
        s
    }
}

/// Both tables regrouped per frame with dense id indices.
type Indexed<'a> = Vec<(usize, &'a TrackRow)>;

struct Prepared<'a> {
    gt_ids: Vec<TrackId>,
    pred_ids: Vec<TrackId>,
    frames: Vec<FrameView<'a>>,
}

struct FrameView<'a> {
    frame: FrameId,
    gt: Vec<(usize, &'a TrackRow)>,
    pred: Vec<(usize, &'a TrackRow)>,
    sim: DMatrix<f64>,
}

fn dense_ids(table: &TrackTable) -> (Vec<TrackId>, HashMap<TrackId, usize>) {
    let ids = table.ids();
    let index = ids.iter().enumerate().map(|(k, id)| (*id, k)).collect();
    (ids, index)
}

fn check_unique(table: &TrackTable) -> Result<(), MetricsError> {
    let mut seen = std::collections::HashSet::new();
    for r in &table.rows {
        if !seen.insert((r.frame, r.id)) {
            return Err(MetricsError::DuplicateRow {
                frame: r.frame,
                id: r.id,
            });
        }
    }
    Ok(())
}

fn prepare<'a>(
    gt: &'a TrackTable,
    pred: &'a TrackTable,
    sim: &Similarity,
) -> Result<Prepared<'a>, MetricsError> {
    check_unique(gt)?;
    check_unique(pred)?;
    let (gt_ids, gt_index) = dense_ids(gt);
    let (pred_ids, pred_index) = dense_ids(pred);
    let last = gt
        .rows
        .iter()
        .chain(&pred.rows)
        .map(|r| r.frame.0)
        .max()
        .unwrap_or(0);
    let mut by_frame: BTreeMap<u32, (Indexed<'_>, Indexed<'_>)> =
        (1..=last).map(|f| (f, Default::default())).collect();
    for r in &gt.rows {
        by_frame
            .get_mut(&r.frame.0)
            .unwrap()
            .0
            .push((gt_index[&r.id], r));
    }
    for r in &pred.rows {
        by_frame
            .get_mut(&r.frame.0)
            .unwrap()
            .1
            .push((pred_index[&r.id], r));
    }
    let frames = by_frame
        .into_iter()
        .map(|(f, (g, p))| {
            let s = DMatrix::from_fn(g.len(), p.len(), |i, j| sim.score(g[i].1, p[j].1));
            FrameView {
                frame: FrameId(f),
                gt: g,
                pred: p,
                sim: s,
            }
        })
        .collect();
    Ok(Prepared {
        gt_ids,
        pred_ids,
        frames,
    })
}

/// Global alignment score between every GT and predicted identity.
fn global_alignment(p: &Prepared) -> DMatrix<f64> {
    let (g, t) = (p.gt_ids.len(), p.pred_ids.len());
    let mut potential = DMatrix::<f64>::zeros(g, t);
    let mut gt_count = vec![0.0; g];
    let mut pred_count = vec![0.0; t];
    for fv in &p.frames {
        let rows: Vec<f64> = (0..fv.gt.len()).map(|i| fv.sim.row(i).sum()).collect();
        let cols: Vec<f64> = (0..fv.pred.len()).map(|j| fv.sim.column(j).sum()).collect();
        for (i, (gi, _)) in fv.gt.iter().enumerate() {
            for (j, (pj, _)) in fv.pred.iter().enumerate() {
                let s = fv.sim[(i, j)];
                let denom = rows[i] + cols[j] - s;
                if denom > EPS {
                    potential[(*gi, *pj)] += s / denom;
                }
            }
        }
        for (gi, _) in &fv.gt {
            gt_count[*gi] += 1.0;
        }
        for (pj, _) in &fv.pred {
            pred_count[*pj] += 1.0;
        }
    }
    DMatrix::from_fn(g, t, |i, j| {
        let v = potential[(i, j)];
        v / (gt_count[i] + pred_count[j] - v)
    })
}

/// Per-frame HOTA matching: (frame, matched (row, col, similarity) pairs).
fn hota_pairs(p: &Prepared) -> Vec<Vec<(usize, usize, f64)>> {
    let ga = global_alignment(p);
    p.frames
        .iter()
        .map(|fv| {
            let score = DMatrix::from_fn(fv.gt.len(), fv.pred.len(), |i, j| {
                ga[(fv.gt[i].0, fv.pred[j].0)] * fv.sim[(i, j)]
            });
            max_weight_matching(&score)
                .into_iter()
                .map(|(i, j)| (i, j, fv.sim[(i, j)]))
                .collect()
        })
        .collect()
}

/// Detection outcome of one frame at one alpha.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMatch {
    pub frame: FrameId,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    /// (gt id, predicted id, similarity)
    pub pairs: Vec<(TrackId, TrackId, f64)>,
}

/// HOTA matching of every frame, thresholded at `alpha`.
pub fn match_frames(
    gt: &TrackTable,
    pred: &TrackTable,
    alpha: f64,
    config: &EvalConfig,
) -> Result<Vec<FrameMatch>, MetricsError> {
    let p = prepare(gt, pred, &config.similarity)?;
    let pairs = hota_pairs(&p);
    Ok(p.frames
        .iter()
        .zip(pairs)
        .map(|(fv, pairs)| {
            let kept: Vec<(TrackId, TrackId, f64)> = pairs
                .into_iter()
                .filter(|&(_, _, s)| s >= alpha - EPS)
                .map(|(i, j, s)| (fv.gt[i].1.id, fv.pred[j].1.id, s))
                .collect();
            FrameMatch {
                frame: fv.frame,
                tp: kept.len(),
                fp: fv.pred.len() - kept.len(),
                fn_: fv.gt.len() - kept.len(),
                pairs: kept,
            }
        })
        .collect())
}

pub fn hota(
    gt: &TrackTable,
    pred: &TrackTable,
    config: &EvalConfig,
) -> Result<HotaScores, MetricsError> {
    config.validate()?;
    if gt.is_empty() && pred.is_empty() {
        let per_alpha = config
            .alphas
            .iter()
            .map(|&alpha| AlphaScores {
                alpha,
                hota: 1.0,
                det_a: 1.0,
                ass_a: 1.0,
                loc_a: 1.0,
                tp: 0,
                fn_: 0,
                fp: 0,
            })
            .collect();
        return Ok(HotaScores {
            hota: 1.0,
            det_a: 1.0,
            ass_a: 1.0,
            loc_a: 1.0,
            per_alpha,
            vacuous: true,
        });
    }
    let p = prepare(gt, pred, &config.similarity)?;
    let pairs = hota_pairs(&p);
    let (g, t) = (p.gt_ids.len(), p.pred_ids.len());
    let mut gt_count = vec![0.0; g];
    let mut pred_count = vec![0.0; t];
    for fv in &p.frames {
        fv.gt.iter().for_each(|(i, _)| gt_count[*i] += 1.0);
        fv.pred.iter().for_each(|(j, _)| pred_count[*j] += 1.0);
    }
    let n_gt = gt.len();
    let n_pred = pred.len();

    let mut per_alpha = Vec::with_capacity(config.alphas.len());
    for &alpha in &config.alphas {
        let mut tp = 0usize;
        let mut loc = 0.0;
        let mut matches = DMatrix::<f64>::zeros(g, t);
        for (fv, frame_pairs) in p.frames.iter().zip(&pairs) {
            for &(i, j, s) in frame_pairs {
                if s >= alpha - EPS {
                    tp += 1;
                    loc += s;
                    matches[(fv.gt[i].0, fv.pred[j].0)] += 1.0;
                }
            }
        }
        let mut ass_sum = 0.0;
        for i in 0..g {
            for j in 0..t {
                let m = matches[(i, j)];
                if m > 0.0 {
                    ass_sum += m * m / (gt_count[i] + pred_count[j] - m).max(1.0);
                }
            }
        }
        let fn_ = n_gt - tp;
        let fp = n_pred - tp;
        let det_a = tp as f64 / ((tp + fn_ + fp).max(1)) as f64;
        let ass_a = ass_sum / (tp.max(1)) as f64;
        let loc_a = if tp > 0 { loc / tp as f64 } else { 1.0 };
        per_alpha.push(AlphaScores {
            alpha,
            hota: (det_a * ass_a).sqrt(),
            det_a,
            ass_a,
            loc_a,
            tp,
            fn_,
            fp,
        });
    }
    let mean =
        |f: fn(&AlphaScores) -> f64| per_alpha.iter().map(f).sum::<f64>() / per_alpha.len() as f64;
    Ok(HotaScores {
        hota: mean(|a| a.hota),
        det_a: mean(|a| a.det_a),
        ass_a: mean(|a| a.ass_a),
        loc_a: mean(|a| a.loc_a),
        per_alpha,
        vacuous: false,
    })
}

pub fn idf1(
    gt: &TrackTable,
    pred: &TrackTable,
    config: &EvalConfig,
) -> Result<IdentityScores, MetricsError> {
    config.validate()?;
    let p = prepare(gt, pred, &config.similarity)?;
    let (g, t) = (p.gt_ids.len(), p.pred_ids.len());
    let mut potential = DMatrix::<f64>::zeros(g, t);
    for fv in &p.frames {
        for (i, (gi, _)) in fv.gt.iter().enumerate() {
            for (j, (pj, _)) in fv.pred.iter().enumerate() {
                if fv.sim[(i, j)] >= config.match_threshold - EPS {
                    potential[(*gi, *pj)] += 1.0;
                }
            }
        }
    }
    let idtp: usize = max_weight_matching(&potential)
        .iter()
        .map(|&(i, j)| potential[(i, j)] as usize)
        .sum();
    let idfn = gt.len() - idtp;
    let idfp = pred.len() - idtp;
    let idf1 = if gt.is_empty() && pred.is_empty() {
        1.0
    } else {
        2.0 * idtp as f64 / (2 * idtp + idfp + idfn) as f64
    };
    Ok(IdentityScores {
        idf1,
        idtp,
        idfp,
        idfn,
    })
}

pub fn clear_counts(
    gt: &TrackTable,
    pred: &TrackTable,
    config: &EvalConfig,
) -> Result<ClearCounts, MetricsError> {
    config.validate()?;
    let p = prepare(gt, pred, &config.similarity)?;
    let g = p.gt_ids.len();
    let mut present = vec![0usize; g];
    let mut matched = vec![0usize; g];
    // Per GT identity: tracked flags over the frames where it is present.
    let mut history: Vec<Vec<bool>> = vec![Vec::new(); g];
    let mut prev_pair: Vec<Option<usize>> = vec![None; g];
    for fv in &p.frames {
        let score = DMatrix::from_fn(fv.gt.len(), fv.pred.len(), |i, j| {
            let s = fv.sim[(i, j)];
            if s < config.match_threshold - EPS {
                0.0
            } else if prev_pair[fv.gt[i].0] == Some(fv.pred[j].0) {
                CONTINUITY_BONUS + s
            } else {
                s
            }
        });
        let pairs = max_weight_matching(&score);
        prev_pair.iter_mut().for_each(|x| *x = None);
        let mut tracked = vec![false; fv.gt.len()];
        for (i, j) in pairs {
            tracked[i] = true;
            prev_pair[fv.gt[i].0] = Some(fv.pred[j].0);
        }
        for (i, (gi, _)) in fv.gt.iter().enumerate() {
            present[*gi] += 1;
            matched[*gi] += tracked[i] as usize;
            history[*gi].push(tracked[i]);
        }
    }
    let mut out = ClearCounts {
        gt_tracks: g,
        mt: 0,
        pt: 0,
        ml: 0,
        frag: 0,
    };
    for i in 0..g {
        let ratio = matched[i] as f64 / present[i] as f64;
        if ratio >= config.mt_threshold - 1e-12 {
            out.mt += 1;
        } else if ratio <= config.ml_threshold + 1e-12 {
            out.ml += 1;
        } else {
            out.pt += 1;
        }
        out.frag += fragmentations(&history[i]);
    }
    Ok(out)
}

/// Tracked -> untracked -> tracked transitions.
fn fragmentations(tracked: &[bool]) -> usize {
    let mut count = 0;
    let mut seen_tracked = false;
    let mut gap = false;
    for &t in tracked {
        if t {
            if gap {
                count += 1;
            }
            seen_tracked = true;
            gap = false;
        } else if seen_tracked {
            gap = true;
        }
    }
    count
}

/// Every metric of the suite.
pub fn evaluate(
    gt: &TrackTable,
    pred: &TrackTable,
    config: &EvalConfig,
) -> Result<EvalReport, MetricsError> {
    let h = hota(gt, pred, config)?;
    let id = idf1(gt, pred, config)?;
    let c = clear_counts(gt, pred, config)?;
    Ok(EvalReport {
        hota: h.hota,
        det_a: h.det_a,
        ass_a: h.ass_a,
        loc_a: h.loc_a,
        idf1: id.idf1,
        idtp: id.idtp,
        idfp: id.idfp,
        idfn: id.idfn,
        mt: c.mt,
        pt: c.pt,
        ml: c.ml,
        frag: c.frag,
        gt_tracks: c.gt_tracks,
        pred_tracks: pred.ids().len(),
        vacuous: h.vacuous,
        per_alpha: h.per_alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(frame: u32, id: u32, left: f64) -> TrackRow {
        TrackRow {
            frame: FrameId(frame),
            id: TrackId(id),
            x: left,
            y: 0.0,
            z: 0.0,
            bbox: BBox2D::new(left, 0.0, 10.0, 10.0),
            label: String::new(),
            confidence: 1.0,
        }
    }

    fn split_fixture(l: u32) -> (TrackTable, TrackTable) {
        let gt = TrackTable::new((1..=2 * l).map(|f| row(f, 1, 0.0)).collect());
        let pred = TrackTable::new(
            (1..=2 * l)
                .map(|f| row(f, if f <= l { 10 } else { 11 }, 0.0))
                .collect(),
        );
        (gt, pred)
    }

    #[test]
    fn perfect_prediction() {
        let gt = TrackTable::new(
            (1..=5)
                .flat_map(|f| [row(f, 1, 0.0), row(f, 2, 50.0), row(f, 3, 100.0)])
                .collect(),
        );
        let r = evaluate(&gt, &gt, &EvalConfig::default()).unwrap();
        assert_eq!((r.hota, r.det_a, r.ass_a, r.idf1), (1.0, 1.0, 1.0, 1.0));
        assert_eq!((r.mt, r.ml, r.frag), (3, 0, 0));
        for m in match_frames(&gt, &gt, 0.5, &EvalConfig::default()).unwrap() {
            assert_eq!((m.tp, m.fp, m.fn_), (3, 0, 0));
        }
    }

    #[test]
    fn split_identity() {
        let (gt, pred) = split_fixture(5);
        let r = evaluate(&gt, &pred, &EvalConfig::default()).unwrap();
        assert!((r.det_a - 1.0).abs() < 1e-12);
        assert!((r.ass_a - 0.5).abs() < 1e-12);
        assert!((r.hota - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((r.idf1 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn disjoint_and_empty() {
        let gt = TrackTable::new(vec![row(1, 1, 0.0)]);
        let pred = TrackTable::new(vec![row(1, 1, 500.0)]);
        assert!(match_frames(&gt, &pred, 0.05, &EvalConfig::default())
            .unwrap()
            .iter()
            .all(|m| m.tp == 0));
        let empty = TrackTable::default();
        let r = evaluate(&gt, &empty, &EvalConfig::default()).unwrap();
        assert_eq!((r.hota, r.idf1, r.ml), (0.0, 0.0, 1));
        let r = evaluate(&empty, &empty, &EvalConfig::default()).unwrap();
        assert!(r.vacuous);
        assert_eq!((r.hota, r.idf1), (1.0, 1.0));
    }

    #[test]
    fn coverage_and_frag() {
        let gt = TrackTable::new((1..=10).map(|f| row(f, 1, 0.0)).collect());
        let pred = TrackTable::new(
            [1, 2, 3, 4, 7, 8, 9, 10]
                .iter()
                .map(|&f| row(f, 4, 0.0))
                .collect(),
        );
        let c = clear_counts(&gt, &pred, &EvalConfig::default()).unwrap();
        assert_eq!((c.mt, c.ml, c.frag), (1, 0, 1));
        assert_eq!(
            fragmentations(&[false, true, false, false, true, false, true]),
            2
        );
        assert_eq!(fragmentations(&[false, false, true, true]), 0);
    }

    #[test]
    fn parser_reports_lines() {
        let ok = "# header\n1,1,0,0,10,10,1,0.5,0,0\n\n2,1,0,0,10,10,1,0.5,0,0\n";
        assert_eq!(parse_mot(ok).unwrap().len(), 2);
        let bad = "1,1,0,0,10,10,1,0,0,0\n2,1,0,0,ten,10,1,0,0,0\n";
        match parse_mot(bad) {
            Err(MetricsError::Parse { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("bb_width"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_mot("1,1,0,0,10,10,1,0,0\n"),
            Err(MetricsError::Parse { line: 1, .. })
        ));
        let dup = "1,1,0,0,10,10,1,0,0,0\n1,1,0,0,10,10,1,0,0,0\n";
        assert!(matches!(
            parse_mot(dup),
            Err(MetricsError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn mot_text_roundtrip() {
        let t = TrackTable::new(vec![row(3, 2, 0.1), row(1, 5, 1.0 / 3.0)]);
        let back = parse_mot(&t.to_mot()).unwrap();
        assert_eq!(back.to_mot(), t.to_mot());
        assert_eq!(back.rows[0].x, 1.0 / 3.0);
    }

    #[test]
    fn alpha_grid_values() {
        let a = alpha_grid(19);
        assert_eq!(a.len(), 19);
        assert!((a[0] - 0.05).abs() < 1e-15 && (a[18] - 0.95).abs() < 1e-15);
        assert!(EvalConfig {
            alphas: vec![],
            ..EvalConfig::default()
        }
        .validate()
        .is_err());
    }
}

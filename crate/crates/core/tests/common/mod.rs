//! Independent oracles and scene builders shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

use fieldtrack::interchange::{BBox2D, FrameId};
use fieldtrack::metrics::{match_frames, EvalConfig};
use fieldtrack::simulator::{ObjectSpec, SceneConfig};
use fieldtrack::tracker::{TrackId, TrackRow, TrackTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------- assignment

/// Best (cardinality, cost) over every gate-respecting partial assignment,
/// by enumeration: each row takes a free allowed column or stays unmatched.
pub fn exhaustive_assignment(cost: &[Vec<f64>], gate: f64) -> (usize, f64) {
    fn walk(
        cost: &[Vec<f64>],
        gate: f64,
        row: usize,
        used: &mut Vec<bool>,
        card: usize,
        total: f64,
        best: &mut (usize, f64),
    ) {
        if row == cost.len() {
            if card > best.0 || (card == best.0 && total < best.1) {
                *best = (card, total);
            }
            return;
        }
        walk(cost, gate, row + 1, used, card, total, best);
        for j in 0..used.len() {
            if !used[j] && cost[row][j] <= gate {
                used[j] = true;
                walk(
                    cost,
                    gate,
                    row + 1,
                    used,
                    card + 1,
                    total + cost[row][j],
                    best,
                );
                used[j] = false;
            }
        }
    }
    let m = cost.first().map_or(0, |r| r.len());
    let mut best = (0, f64::INFINITY);
    walk(cost, gate, 0, &mut vec![false; m], 0, 0.0, &mut best);
    if best.0 == 0 {
        best.1 = 0.0;
    }
    best
}

// ------------------------------------------------------------------- metrics

#[derive(Debug, Clone, Copy)]
pub enum OracleSim {
    Iou,
    Dist(f64),
}

#[derive(Debug, Clone, Copy)]
struct Obs {
    id: u32,
    b: [f64; 4],
    p: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleReport {
    pub hota: f64,
    pub det_a: f64,
    pub ass_a: f64,
    pub idf1: f64,
    pub mt: usize,
    pub ml: usize,
    pub frag: usize,
}

fn box_iou(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let ix = (a[0] + a[2]).min(b[0] + b[2]) - a[0].max(b[0]);
    let iy = (a[1] + a[3]).min(b[1] + b[3]) - a[1].max(b[1]);
    if ix <= 0.0 || iy <= 0.0 {
        return 0.0;
    }
    let inter = ix * iy;
    inter / (a[2] * a[3] + b[2] * b[3] - inter)
}

fn sim(kind: OracleSim, g: &Obs, t: &Obs) -> f64 {
    match kind {
        OracleSim::Iou => box_iou(&g.b, &t.b),
        OracleSim::Dist(d_max) => {
            let d =
                ((g.p[0] - t.p[0]).powi(2) + (g.p[1] - t.p[1]).powi(2) + (g.p[2] - t.p[2]).powi(2))
                    .sqrt();
            (1.0 - d / d_max).max(0.0)
        }
    }
}

fn frames_of(table: &TrackTable) -> BTreeMap<u32, Vec<Obs>> {
    let mut out: BTreeMap<u32, Vec<Obs>> = BTreeMap::new();
    for r in &table.rows {
        out.entry(r.frame.0).or_default().push(Obs {
            id: r.id.0,
            b: [r.bbox.left, r.bbox.top, r.bbox.width, r.bbox.height],
            p: [r.x, r.y, r.z],
        });
    }
    out
}

/// Pairs (i, j) maximizing the summed weight; only positive weights count.
fn best_matching(w: &[Vec<f64>]) -> Vec<(usize, usize)> {
    fn walk(
        w: &[Vec<f64>],
        row: usize,
        used: &mut Vec<bool>,
        cur: &mut Vec<(usize, usize)>,
        total: f64,
        best: &mut (f64, Vec<(usize, usize)>),
    ) {
        if row == w.len() {
            if total > best.0 {
                *best = (total, cur.clone());
            }
            return;
        }
        walk(w, row + 1, used, cur, total, best);
        for j in 0..used.len() {
            if !used[j] && w[row][j] > 0.0 {
                used[j] = true;
                cur.push((row, j));
                walk(w, row + 1, used, cur, total + w[row][j], best);
                cur.pop();
                used[j] = false;
            }
        }
    }
    let m = w.first().map_or(0, |r| r.len());
    let mut best = (0.0, Vec::new());
    walk(w, 0, &mut vec![false; m], &mut Vec::new(), 0.0, &mut best);
    best.1
}

pub fn oracle_evaluate(
    gt: &TrackTable,
    pred: &TrackTable,
    kind: OracleSim,
    alphas: &[f64],
) -> OracleReport {
    let eps = f64::EPSILON;
    let g = frames_of(gt);
    let t = frames_of(pred);
    let last = g.keys().chain(t.keys()).copied().max().unwrap_or(0);
    let empty = Vec::new();
    let n_gt = gt.rows.len();
    let n_tr = pred.rows.len();

    // Per-identity counts and global alignment.
    let mut gc: HashMap<u32, f64> = HashMap::new();
    let mut tc: HashMap<u32, f64> = HashMap::new();
    let mut pot: HashMap<(u32, u32), f64> = HashMap::new();
    for f in 1..=last {
        let (gs, ts) = (g.get(&f).unwrap_or(&empty), t.get(&f).unwrap_or(&empty));
        for a in gs {
            *gc.entry(a.id).or_default() += 1.0;
        }
        for b in ts {
            *tc.entry(b.id).or_default() += 1.0;
        }
        let s: Vec<Vec<f64>> = gs
            .iter()
            .map(|a| ts.iter().map(|b| sim(kind, a, b)).collect())
            .collect();
        for (i, a) in gs.iter().enumerate() {
            let row: f64 = s[i].iter().sum();
            for (j, b) in ts.iter().enumerate() {
                let col: f64 = (0..gs.len()).map(|k| s[k][j]).sum();
                let denom = row + col - s[i][j];
                if denom > eps {
                    *pot.entry((a.id, b.id)).or_default() += s[i][j] / denom;
                }
            }
        }
    }
    let ga = |a: u32, b: u32| {
        let p = pot.get(&(a, b)).copied().unwrap_or(0.0);
        p / (gc[&a] + tc[&b] - p)
    };

    // HOTA.
    let mut matched_pairs: Vec<Vec<(u32, u32, f64)>> = Vec::new();
    for f in 1..=last {
        let (gs, ts) = (g.get(&f).unwrap_or(&empty), t.get(&f).unwrap_or(&empty));
        let w: Vec<Vec<f64>> = gs
            .iter()
            .map(|a| {
                ts.iter()
                    .map(|b| ga(a.id, b.id) * sim(kind, a, b))
                    .collect()
            })
            .collect();
        matched_pairs.push(
            best_matching(&w)
                .into_iter()
                .map(|(i, j)| (gs[i].id, ts[j].id, sim(kind, &gs[i], &ts[j])))
                .collect(),
        );
    }
    let (mut hota, mut det_a, mut ass_a) = (0.0, 0.0, 0.0);
    if n_gt == 0 && n_tr == 0 {
        hota = 1.0;
        det_a = 1.0;
        ass_a = 1.0;
    } else {
        for &alpha in alphas {
            let mut tp = 0usize;
            let mut counts: HashMap<(u32, u32), f64> = HashMap::new();
            for pairs in &matched_pairs {
                for &(a, b, s) in pairs {
                    if s >= alpha - eps {
                        tp += 1;
                        *counts.entry((a, b)).or_default() += 1.0;
                    }
                }
            }
            let d = tp as f64 / ((n_gt + n_tr - tp).max(1)) as f64;
            let mut ass = 0.0;
            for (&(a, b), &m) in &counts {
                ass += m * m / (gc[&a] + tc[&b] - m).max(1.0);
            }
            let ass = ass / tp.max(1) as f64;
            hota += (d * ass).sqrt();
            det_a += d;
            ass_a += ass;
        }
        let k = alphas.len() as f64;
        hota /= k;
        det_a /= k;
        ass_a /= k;
    }

    // IDF1: best one-to-one identity mapping by enumeration.
    let mut idpot: HashMap<(u32, u32), usize> = HashMap::new();
    for f in 1..=last {
        for a in g.get(&f).unwrap_or(&empty) {
            for b in t.get(&f).unwrap_or(&empty) {
                if sim(kind, a, b) >= 0.5 - eps {
                    *idpot.entry((a.id, b.id)).or_default() += 1;
                }
            }
        }
    }
    let gids: Vec<u32> = gc
        .keys()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let tids: Vec<u32> = tc
        .keys()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let w: Vec<Vec<f64>> = gids
        .iter()
        .map(|a| {
            tids.iter()
                .map(|b| *idpot.get(&(*a, *b)).unwrap_or(&0) as f64)
                .collect()
        })
        .collect();
    let idtp: f64 = best_matching(&w).iter().map(|&(i, j)| w[i][j]).sum();
    let idf1 = if n_gt == 0 && n_tr == 0 {
        1.0
    } else {
        2.0 * idtp / (n_gt + n_tr) as f64
    };

    // MT / ML / Frag with the previous-frame continuity preference.
    let mut prev: HashMap<u32, u32> = HashMap::new();
    let mut history: BTreeMap<u32, Vec<bool>> = BTreeMap::new();
    for f in 1..=last {
        let (gs, ts) = (g.get(&f).unwrap_or(&empty), t.get(&f).unwrap_or(&empty));
        let w: Vec<Vec<f64>> = gs
            .iter()
            .map(|a| {
                ts.iter()
                    .map(|b| {
                        let s = sim(kind, a, b);
                        if s < 0.5 - eps {
                            0.0
                        } else if prev.get(&a.id) == Some(&b.id) {
                            1000.0 + s
                        } else {
                            s
                        }
                    })
                    .collect()
            })
            .collect();
        let pairs = best_matching(&w);
        prev.clear();
        for &(i, j) in &pairs {
            prev.insert(gs[i].id, ts[j].id);
        }
        for (i, a) in gs.iter().enumerate() {
            history
                .entry(a.id)
                .or_default()
                .push(pairs.iter().any(|&(pi, _)| pi == i));
        }
    }
    let (mut mt, mut ml, mut frag) = (0, 0, 0);
    for h in history.values() {
        let hit = h.iter().filter(|x| **x).count();
        if 5 * hit >= 4 * h.len() {
            mt += 1;
        } else if 5 * hit <= h.len() {
            ml += 1;
        }
        let first = h.iter().position(|x| *x);
        if let Some(first) = first {
            frag += (first + 1..h.len()).filter(|&k| h[k] && !h[k - 1]).count();
        }
    }
    OracleReport {
        hota,
        det_a,
        ass_a,
        idf1,
        mt,
        ml,
        frag,
    }
}

fn row(frame: u32, id: u32, b: [f64; 4], p: [f64; 3]) -> TrackRow {
    TrackRow {
        frame: FrameId(frame),
        id: TrackId(id),
        x: p[0],
        y: p[1],
        z: p[2],
        bbox: BBox2D::new(b[0], b[1], b[2], b[3]),
        label: String::new(),
        confidence: 1.0,
    }
}

/// Small random GT/prediction pair: <= 5 tracks, <= 30 frames, with jitter,
/// misses, identity switches and false positives.
pub fn random_fixture(seed: u64) -> (TrackTable, TrackTable) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frames = rng.random_range(5..=30u32);
    let tracks = rng.random_range(1..=5u32);
    let mut gt = Vec::new();
    let mut pred = Vec::new();
    for k in 1..=tracks {
        let start = rng.random_range(1..=frames);
        let end = rng.random_range(start..=frames);
        let mut pos = [rng.random_range(0.0..150.0), rng.random_range(0.0..150.0)];
        let size = [rng.random_range(20.0..50.0), rng.random_range(20.0..50.0)];
        let mut pid = 10 + k;
        let switch_at = rng.random_bool(0.4).then(|| rng.random_range(start..=end));
        for f in start..=end {
            pos[0] += rng.random_range(-4.0..4.0);
            pos[1] += rng.random_range(-4.0..4.0);
            let p3 = [pos[0] / 50.0, pos[1] / 50.0, 0.0];
            gt.push(row(f, k, [pos[0], pos[1], size[0], size[1]], p3));
            if Some(f) == switch_at {
                pid += 100;
            }
            if rng.random_bool(0.8) {
                let j = rng.random_range(0.0..12.0);
                let b = [
                    pos[0] + rng.random_range(-j..=j),
                    pos[1] + rng.random_range(-j..=j),
                    size[0] + rng.random_range(-j..=j),
                    size[1] + rng.random_range(-j..=j),
                ];
                let q = [
                    p3[0] + rng.random_range(-0.4..0.4),
                    p3[1] + rng.random_range(-0.4..0.4),
                    rng.random_range(-0.2..0.2),
                ];
                pred.push(row(f, pid, b, q));
            }
        }
    }
    for f in 1..=frames {
        if rng.random_bool(0.15) {
            let b = [
                rng.random_range(0.0..150.0),
                rng.random_range(0.0..150.0),
                rng.random_range(15.0..50.0),
                rng.random_range(15.0..50.0),
            ];
            let q = [b[0] / 50.0, b[1] / 50.0, 0.0];
            pred.push(row(f, 900 + rng.random_range(0..3), b, q));
        }
    }
    // Keep (frame, id) unique.
    let mut seen = BTreeSet::new();
    pred.retain(|r| seen.insert((r.frame, r.id)));
    (TrackTable::new(gt), TrackTable::new(pred))
}

/// GT track of length 2L predicted as two identities of length L.
pub fn split_fixture(l: u32) -> (TrackTable, TrackTable) {
    let b = [10.0, 10.0, 20.0, 20.0];
    let gt = (1..=2 * l).map(|f| row(f, 1, b, [0.0; 3])).collect();
    let pred = (1..=2 * l)
        .map(|f| row(f, if f <= l { 7 } else { 8 }, b, [0.0; 3]))
        .collect();
    (TrackTable::new(gt), TrackTable::new(pred))
}

// ------------------------------------------------------------------- scenes

/// Predicted identities matched to `gt_id` (HOTA matching at alpha 0.5), in
/// frame order.
pub fn pred_ids_for(gt: &TrackTable, pred: &TrackTable, gt_id: u32) -> Vec<(FrameId, TrackId)> {
    let config = EvalConfig::default();
    match_frames(gt, pred, 0.5, &config)
        .unwrap()
        .into_iter()
        .flat_map(|m| {
            m.pairs
                .into_iter()
                .filter(|p| p.0 == TrackId(gt_id))
                .map(move |p| (m.frame, p.1))
        })
        .collect()
}

pub type XyRadius = [f64; 3];
pub type Schedule = Option<Vec<[u32; 2]>>;

/// Orbit scene with fixed objects `[x, y, radius]` and schedules.
pub fn scene(frames: u32, objects: &[(XyRadius, Schedule)], seed: u64) -> SceneConfig {
    SceneConfig {
        frames,
        objects: Some(
            objects
                .iter()
                .map(|(c, visible)| ObjectSpec {
                    center: [c[0], c[1], c[2]],
                    radius: c[2],
                    label: "object".into(),
                    visible: visible.clone(),
                })
                .collect(),
        ),
        seed,
        ..SceneConfig::default()
    }
}

/// Four well separated objects; object 1 hides for `gap` frames after frame 20.
pub fn occlusion_scene(gap: u32, seed: u64) -> SceneConfig {
    let frames = 20 + gap + 20;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = |rng: &mut ChaCha8Rng| rng.random_range(-0.15..0.15);
    let objects = vec![
        (
            [-1.0 + jitter(&mut rng), -0.6 + jitter(&mut rng), 0.3],
            Some(vec![[1, 20], [21 + gap, frames]]),
        ),
        ([1.0 + jitter(&mut rng), -0.6 + jitter(&mut rng), 0.3], None),
        ([0.0 + jitter(&mut rng), 0.9 + jitter(&mut rng), 0.35], None),
        (
            [-0.2 + jitter(&mut rng), -0.1 + jitter(&mut rng), 0.25],
            None,
        ),
    ];
    scene(frames, &objects, seed)
}

/// Two objects leave after frame 20; 40 frames later two similar objects
/// appear in each other's regions.
pub fn swap_scene(seed: u64) -> SceneConfig {
    let objects = vec![
        ([-0.8, 0.0, 0.3], Some(vec![[1, 20]])),
        ([0.8, 0.0, 0.3], Some(vec![[1, 20]])),
        ([0.75, 0.1, 0.3], Some(vec![[61, 100]])),
        ([-0.75, 0.1, 0.3], Some(vec![[61, 100]])),
    ];
    scene(100, &objects, seed)
}

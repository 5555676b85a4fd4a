//! Point and object correspondence: exact KD-tree search, mutual nearest
//! neighbours, object distances and gated Hungarian assignment.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Point3;

#[derive(Debug, Error)]
pub enum AssocError {
    #[error("object {index} on side {side} has no valid 3D points")]
    EmptyObject { side: char, index: usize },
}

/// Anything with a lifted 3D point set and a representative centroid.
pub trait Object3d {
    fn points(&self) -> &[Point3];
    fn centroid(&self) -> Point3;
}

impl<T: Object3d + ?Sized> Object3d for &T {
    fn points(&self) -> &[Point3] {
        (**self).points()
    }

    fn centroid(&self) -> Point3 {
        (**self).centroid()
    }
}

impl Object3d for [Point3] {
    fn points(&self) -> &[Point3] {
        self
    }

    fn centroid(&self) -> Point3 {
        median_centroid(self).unwrap_or_else(Point3::origin)
    }
}

/// Per-coordinate median; even counts average the two middle values.
pub fn median_centroid(points: &[Point3]) -> Option<Point3> {
    if points.is_empty() {
        return None;
    }
    let mut out = Point3::origin();
    let mut buf: Vec<f64> = Vec::with_capacity(points.len());
    for axis in 0..3 {
        buf.clear();
        buf.extend(points.iter().map(|p| p[axis]));
        buf.sort_by(f64::total_cmp);
        let n = buf.len();
        out[axis] = if n % 2 == 1 {
            buf[n / 2]
        } else {
            0.5 * (buf[n / 2 - 1] + buf[n / 2])
        };
    }
    Some(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchPair {
    pub index_a: usize,
    pub index_b: usize,
    pub distance: f64,
}

/// Exact nearest-neighbour index. Nodes live implicitly in `order`: the
/// node for a range is its midpoint.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    points: Vec<Point3>,
    order: Vec<usize>,
    axes: Vec<u8>,
}

pub fn build_index(points: &[Point3]) -> SpatialIndex {
    let mut order: Vec<usize> = (0..points.len()).collect();
    let mut axes = vec![0u8; points.len()];
    build(points, &mut order, &mut axes);
    SpatialIndex {
        points: points.to_vec(),
        order,
        axes,
    }
}

fn build(points: &[Point3], order: &mut [usize], axes: &mut [u8]) {
    if order.is_empty() {
        return;
    }
    // Split on the widest extent.
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in order.iter() {
        for a in 0..3 {
            lo[a] = lo[a].min(points[i][a]);
            hi[a] = hi[a].max(points[i][a]);
        }
    }
    let axis = (0..3)
        .max_by(|&x, &y| (hi[x] - lo[x]).total_cmp(&(hi[y] - lo[y])).then(y.cmp(&x)))
        .unwrap();
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&x, &y| {
        points[x][axis].total_cmp(&points[y][axis]).then(x.cmp(&y))
    });
    axes[mid] = axis as u8;
    let (left, right) = order.split_at_mut(mid);
    let (axes_left, axes_right) = axes.split_at_mut(mid);
    build(points, left, axes_left);
    build(points, &mut right[1..], &mut axes_right[1..]);
}

impl SpatialIndex {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    /// Nearest stored point as (original index, distance). Equal distances
    /// resolve to the lowest index.
    pub fn nearest(&self, q: &Point3) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (f64::INFINITY, usize::MAX);
        self.search(q, 0, self.order.len(), &mut best);
        Some((best.1, best.0.sqrt()))
    }

    fn search(&self, q: &Point3, lo: usize, hi: usize, best: &mut (f64, usize)) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let idx = self.order[mid];
        let p = &self.points[idx];
        let d2 = (p - q).norm_squared();
        if d2 < best.0 || (d2 == best.0 && idx < best.1) {
            *best = (d2, idx);
        }
        let axis = self.axes[mid] as usize;
        let delta = q[axis] - p[axis];
        let (near, far) = if delta < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(q, near.0, near.1, best);
        // `<=` keeps equal-distance candidates reachable for the index tie-break.
        if delta * delta <= best.0 {
            self.search(q, far.0, far.1, best);
        }
    }
}

/// Pairs (i, j) where each is the other's nearest neighbour and the distance
/// is at most `max_dist`. Sorted by `index_a`.
pub fn mutual_nearest_neighbors(
    points_a: &[Point3],
    points_b: &[Point3],
    max_dist: f64,
) -> Vec<MatchPair> {
    mutual_with(&build_index(points_a), &build_index(points_b), max_dist)
}

fn mutual_with(ia: &SpatialIndex, ib: &SpatialIndex, max_dist: f64) -> Vec<MatchPair> {
    let mut out = Vec::new();
    for (i, p) in ia.points().iter().enumerate() {
        let Some((j, d)) = ib.nearest(p) else { break };
        if d > max_dist {
            continue;
        }
        if let Some((back, _)) = ia.nearest(&ib.points()[j]) {
            if back == i {
                out.push(MatchPair {
                    index_a: i,
                    index_b: j,
                    distance: d,
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostMode {
    /// Distance between median centroids.
    #[default]
    Centroid,
    /// Mean distance over mutual-NN point pairs within the gate; centroid
    /// distance when there are none.
    MutualNn,
}

impl std::str::FromStr for CostMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "centroid" => Ok(CostMode::Centroid),
            "mutual-nn" | "mutual_nn" => Ok(CostMode::MutualNn),
            other => Err(format!(
                "unknown cost mode {other:?} (expected centroid or mutual-nn)"
            )),
        }
    }
}

pub fn object_cost<A, B>(a: &A, b: &B, mode: CostMode, gate: f64) -> Result<f64, AssocError>
where
    A: Object3d + ?Sized,
    B: Object3d + ?Sized,
{
    if a.points().is_empty() {
        return Err(AssocError::EmptyObject {
            side: 'a',
            index: 0,
        });
    }
    if b.points().is_empty() {
        return Err(AssocError::EmptyObject {
            side: 'b',
            index: 0,
        });
    }
    Ok(match mode {
        CostMode::Centroid => (a.centroid() - b.centroid()).norm(),
        CostMode::MutualNn => {
            let ia = build_index(a.points());
            let ib = build_index(b.points());
            mutual_mean(&ia, &ib, gate).unwrap_or_else(|| (a.centroid() - b.centroid()).norm())
        }
    })
}

fn mutual_mean(ia: &SpatialIndex, ib: &SpatialIndex, gate: f64) -> Option<f64> {
    let mut d: Vec<f64> = mutual_with(ia, ib, gate)
        .iter()
        .map(|m| m.distance)
        .collect();
    if d.is_empty() {
        return None;
    }
    // Fixed summation order keeps the cost exactly symmetric.
    d.sort_by(f64::total_cmp);
    Some(d.iter().sum::<f64>() / d.len() as f64)
}

/// Pairwise `object_cost` matrix, rows from `a`, columns from `b`.
pub fn cost_matrix<A: Object3d, B: Object3d>(
    a: &[A],
    b: &[B],
    mode: CostMode,
    gate: f64,
) -> Result<DMatrix<f64>, AssocError> {
    for (index, o) in a.iter().enumerate() {
        if o.points().is_empty() {
            return Err(AssocError::EmptyObject { side: 'a', index });
        }
    }
    for (index, o) in b.iter().enumerate() {
        if o.points().is_empty() {
            return Err(AssocError::EmptyObject { side: 'b', index });
        }
    }
    let mut cost = DMatrix::zeros(a.len(), b.len());
    match mode {
        CostMode::Centroid => {
            let ca: Vec<Point3> = a.iter().map(|o| o.centroid()).collect();
            let cb: Vec<Point3> = b.iter().map(|o| o.centroid()).collect();
            for (i, p) in ca.iter().enumerate() {
                for (j, q) in cb.iter().enumerate() {
                    cost[(i, j)] = (p - q).norm();
                }
            }
        }
        CostMode::MutualNn => {
            let ia: Vec<SpatialIndex> = a.iter().map(|o| build_index(o.points())).collect();
            let ib: Vec<SpatialIndex> = b.iter().map(|o| build_index(o.points())).collect();
            for i in 0..a.len() {
                for j in 0..b.len() {
                    cost[(i, j)] = mutual_mean(&ia[i], &ib[j], gate)
                        .unwrap_or_else(|| (a[i].centroid() - b[j].centroid()).norm());
                }
            }
        }
    }
    Ok(cost)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    /// Matched pairs sorted by `index_a`; `distance` holds the pair cost.
    pub pairs: Vec<MatchPair>,
    pub unmatched_a: Vec<usize>,
    pub unmatched_b: Vec<usize>,
    pub total_cost: f64,
}

/// Gated minimum-cost assignment. Entries above `gate` (or non-finite) are
/// forbidden; among assignments of maximum cardinality over allowed entries
/// the cheapest is returned.
pub fn hungarian(cost: &DMatrix<f64>, gate: f64) -> Assignment {
    let (n, m) = cost.shape();
    let allowed = |i: usize, j: usize| {
        let c = cost[(i, j)];
        c.is_finite() && c <= gate
    };
    let mut lo = 0.0f64;
    let mut hi = 0.0f64;
    for i in 0..n {
        for j in 0..m {
            if allowed(i, j) {
                lo = lo.min(cost[(i, j)]);
                hi = hi.max(cost[(i, j)]);
            }
        }
    }
    // Any extra allowed pair outweighs every possible cost saving.
    let big = (n.min(m) as f64 + 1.0) * (hi - lo + 1.0);
    let s = n.max(m);
    let padded = DMatrix::from_fn(s, s, |i, j| {
        if i < n && j < m && allowed(i, j) {
            cost[(i, j)] - lo
        } else {
            big
        }
    });
    let row_to_col = solve_square(&padded);

    let mut out = Assignment::default();
    let mut col_used = vec![false; m];
    for (i, &j) in row_to_col.iter().enumerate().take(n) {
        if j < m && allowed(i, j) {
            col_used[j] = true;
            out.total_cost += cost[(i, j)];
            out.pairs.push(MatchPair {
                index_a: i,
                index_b: j,
                distance: cost[(i, j)],
            });
        } else {
            out.unmatched_a.push(i);
        }
    }
    out.unmatched_b = (0..m).filter(|&j| !col_used[j]).collect();
    out
}

/// Maximum-weight matching over non-negative weights. Pairs of zero weight
/// carry nothing and are left out.
pub fn max_weight_matching(weights: &DMatrix<f64>) -> Vec<(usize, usize)> {
    let (n, m) = weights.shape();
    let top = weights
        .iter()
        .copied()
        .filter(|w| w.is_finite())
        .fold(0.0f64, f64::max);
    let s = n.max(m);
    let w = |i: usize, j: usize| {
        if i < n && j < m && weights[(i, j)].is_finite() && weights[(i, j)] > 0.0 {
            weights[(i, j)]
        } else {
            0.0
        }
    };
    let cost = DMatrix::from_fn(s, s, |i, j| top - w(i, j));
    solve_square(&cost)
        .into_iter()
        .enumerate()
        .filter(|&(i, j)| w(i, j) > 0.0)
        .collect()
}

/// Kuhn-Munkres with potentials on a square matrix; returns row -> column.
fn solve_square(c: &DMatrix<f64>) -> Vec<usize> {
    let n = c.nrows();
    if n == 0 {
        return Vec::new();
    }
    // 1-based arrays; p[j] is the row assigned to column j, 0 meaning none.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = c[(i0 - 1, j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0; n];
    for j in 1..=n {
        row_to_col[p[j] - 1] = j - 1;
    }
    row_to_col
}

/// Object-level association between two observation lists in a shared frame.
pub fn point_match<A: Object3d, B: Object3d>(
    objs_prev: &[A],
    objs_cur: &[B],
    gate: f64,
    mode: CostMode,
) -> Result<Assignment, AssocError> {
    let cost = cost_matrix(objs_prev, objs_cur, mode, gate)?;
    Ok(hungarian(&cost, gate))
}

//! Initial skeletons from binary masks.
//!
//! Each connected component is thinned (Zhang-Suen), the longest geodesic
//! path through its skeleton pixels is extracted and vectorized with an
//! angle criterion, a natural cubic spline is fitted through the vertices
//! and resampled uniformly. All nodes receive the same radius: the smallest
//! distance-transform value found at a node.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use crate::energy::Colony;
use crate::error::{Error, Result};
use crate::geometry::{Point2, Skeleton, SkeletonNode};
use crate::image::BinaryMask;

pub const DEFAULT_SPACING: f64 = 8.0;
pub const DEFAULT_ANGLE_TOL: f64 = 15.0;

/// Components narrower than this (in pixels) are rejected.
const MIN_WIDTH: f64 = 4.0;
/// Lookback used to estimate the local chain direction.
const DIRECTION_WINDOW: usize = 5;
/// Node spacing of the degenerate skeleton used for round components.
const DEGENERATE_SPACING: f64 = 0.5;

/// Ordered, 8-connected pixel path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PixelChain {
    pub pixels: Vec<(usize, usize)>,
}

impl PixelChain {
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn points(&self) -> Vec<Point2> {
        self.pixels.iter().map(|&(i, j)| center(i, j)).collect()
    }

    /// Polyline length through the pixel centers.
    pub fn length(&self) -> f64 {
        self.points().windows(2).map(|w| w[0].distance(w[1])).sum()
    }
}

/// Euclidean distance map: for every foreground pixel, the distance from its
/// center to the nearest background pixel center (outside counts as
/// background); zero on the background.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl DistanceMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.width + i]
    }

    /// Value at the pixel containing `p`; zero outside the grid.
    pub fn at_point(&self, p: Point2) -> f64 {
        let (i, j) = (p.x.floor(), p.y.floor());
        if i < 0.0 || j < 0.0 || i >= self.width as f64 || j >= self.height as f64 {
            return 0.0;
        }
        self.get(i as usize, j as usize)
    }
}

fn center(i: usize, j: usize) -> Point2 {
    Point2::new(i as f64 + 0.5, j as f64 + 0.5)
}

const NEIGHBORS: [(i64, i64); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

/// One-dimensional squared distance transform of a sampled function.
fn dt_1d(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    let first = f.iter().position(|x| x.is_finite());
    let Some(first) = first else {
        out.iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    };
    v[0] = first;
    for q in first + 1..n {
        if !f[q].is_finite() {
            continue;
        }
        loop {
            let p = v[k];
            let s =
                ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] {
                k -= 1;
                continue;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Exact Euclidean distance transform of `mask`.
pub fn distance_transform(mask: &BinaryMask) -> DistanceMap {
    // one pixel of background padding stands for the outside of the grid
    let (w, h) = (mask.width() + 2, mask.height() + 2);
    let mut grid = vec![0.0; w * h];
    for j in 0..mask.height() {
        for i in 0..mask.width() {
            if mask.get(i, j) {
                grid[(j + 1) * w + i + 1] = f64::INFINITY;
            }
        }
    }
    let mut col = vec![0.0; h];
    let mut col_out = vec![0.0; h];
    for i in 0..w {
        for j in 0..h {
            col[j] = grid[j * w + i];
        }
        dt_1d(&col, &mut col_out);
        for j in 0..h {
            grid[j * w + i] = col_out[j];
        }
    }
    let mut row_out = vec![0.0; w];
    for j in 0..h {
        dt_1d(&grid[j * w..(j + 1) * w], &mut row_out);
        grid[j * w..(j + 1) * w].copy_from_slice(&row_out);
    }
    let values = (0..mask.height())
        .flat_map(|j| (0..mask.width()).map(move |i| (i, j)))
        .map(|(i, j)| grid[(j + 1) * w + i + 1].sqrt())
        .collect();
    DistanceMap {
        width: mask.width(),
        height: mask.height(),
        values,
    }
}

/// 8-connected components, largest first; ties keep raster order.
pub fn connected_components(mask: &BinaryMask) -> Vec<BinaryMask> {
    let (w, h) = (mask.width(), mask.height());
    let mut label = vec![usize::MAX; w * h];
    let mut comps: Vec<Vec<(usize, usize)>> = Vec::new();
    for j0 in 0..h {
        for i0 in 0..w {
            if !mask.get(i0, j0) || label[j0 * w + i0] != usize::MAX {
                continue;
            }
            let id = comps.len();
            let mut pixels = Vec::new();
            let mut queue = VecDeque::from([(i0, j0)]);
            label[j0 * w + i0] = id;
            while let Some((i, j)) = queue.pop_front() {
                pixels.push((i, j));
                for (di, dj) in NEIGHBORS {
                    let (ni, nj) = (i as i64 + di, j as i64 + dj);
                    if mask.get_signed(ni, nj) {
                        let k = nj as usize * w + ni as usize;
                        if label[k] == usize::MAX {
                            label[k] = id;
                            queue.push_back((ni as usize, nj as usize));
                        }
                    }
                }
            }
            comps.push(pixels);
        }
    }
    let mut masks: Vec<(usize, BinaryMask)> = comps
        .into_iter()
        .map(|pixels| {
            let mut m = BinaryMask::empty(w, h);
            for &(i, j) in &pixels {
                m.set(i, j, true);
            }
            (pixels.len(), m)
        })
        .collect();
    masks.sort_by(|a, b| b.0.cmp(&a.0));
    masks.into_iter().map(|(_, m)| m).collect()
}

/// Zhang-Suen thinning.
pub fn thin(mask: &BinaryMask) -> BinaryMask {
    let mut m = mask.clone();
    let (w, h) = (m.width() as i64, m.height() as i64);
    loop {
        let mut changed = false;
        for pass in 0..2 {
            let mut remove = Vec::new();
            for j in 0..h {
                for i in 0..w {
                    if !m.get_signed(i, j) {
                        continue;
                    }
                    // P2..P9 clockwise from north
                    let p = [
                        m.get_signed(i, j - 1),
                        m.get_signed(i + 1, j - 1),
                        m.get_signed(i + 1, j),
                        m.get_signed(i + 1, j + 1),
                        m.get_signed(i, j + 1),
                        m.get_signed(i - 1, j + 1),
                        m.get_signed(i - 1, j),
                        m.get_signed(i - 1, j - 1),
                    ];
                    let b = p.iter().filter(|&&x| x).count();
                    if !(2..=6).contains(&b) {
                        continue;
                    }
                    let a = (0..8).filter(|&k| !p[k] && p[(k + 1) % 8]).count();
                    if a != 1 {
                        continue;
                    }
                    let (n, e, s, west) = (p[0], p[2], p[4], p[6]);
                    let ok = if pass == 0 {
                        !(n && e && s) && !(e && s && west)
                    } else {
                        !(n && e && west) && !(n && s && west)
                    };
                    if ok {
                        remove.push((i as usize, j as usize));
                    }
                }
            }
            changed |= !remove.is_empty();
            for (i, j) in remove {
                m.set(i, j, false);
            }
        }
        if !changed {
            return m;
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
struct State {
    cost: f64,
    node: usize,
}

impl Eq for State {}

impl Ord for State {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest-path distances and predecessors from `src` over 8-adjacency.
fn dijkstra(
    pixels: &[(usize, usize)],
    adj: &[Vec<(usize, f64)>],
    src: usize,
) -> (Vec<f64>, Vec<usize>) {
    let mut dist = vec![f64::INFINITY; pixels.len()];
    let mut prev = vec![usize::MAX; pixels.len()];
    let mut heap = BinaryHeap::new();
    dist[src] = 0.0;
    heap.push(State {
        cost: 0.0,
        node: src,
    });
    while let Some(State { cost, node }) = heap.pop() {
        if cost > dist[node] {
            continue;
        }
        for &(next, w) in &adj[node] {
            let c = cost + w;
            if c < dist[next] {
                dist[next] = c;
                prev[next] = node;
                heap.push(State {
                    cost: c,
                    node: next,
                });
            }
        }
    }
    (dist, prev)
}

/// Longest geodesic path through the set pixels of `skel` (one component).
fn longest_path(skel: &BinaryMask) -> PixelChain {
    let w = skel.width();
    let pixels: Vec<(usize, usize)> = (0..skel.height())
        .flat_map(|j| (0..w).map(move |i| (i, j)))
        .filter(|&(i, j)| skel.get(i, j))
        .collect();
    if pixels.len() <= 1 {
        return PixelChain { pixels };
    }
    let mut index = vec![usize::MAX; w * skel.height()];
    for (k, &(i, j)) in pixels.iter().enumerate() {
        index[j * w + i] = k;
    }
    let adj: Vec<Vec<(usize, f64)>> = pixels
        .iter()
        .map(|&(i, j)| {
            NEIGHBORS
                .iter()
                .filter_map(|&(di, dj)| {
                    let (ni, nj) = (i as i64 + di, j as i64 + dj);
                    skel.get_signed(ni, nj).then(|| {
                        let cost = if di != 0 && dj != 0 {
                            std::f64::consts::SQRT_2
                        } else {
                            1.0
                        };
                        (index[nj as usize * w + ni as usize], cost)
                    })
                })
                .collect()
        })
        .collect();
    let farthest = |dist: &[f64]| {
        dist.iter()
            .enumerate()
            .filter(|(_, d)| d.is_finite())
            .fold(
                (0, -1.0),
                |best, (k, &d)| if d > best.1 { (k, d) } else { best },
            )
            .0
    };
    let (d0, _) = dijkstra(&pixels, &adj, 0);
    let a = farthest(&d0);
    let (da, prev) = dijkstra(&pixels, &adj, a);
    let mut k = farthest(&da);
    let mut path = vec![pixels[k]];
    while prev[k] != usize::MAX {
        k = prev[k];
        path.push(pixels[k]);
    }
    PixelChain { pixels: path }
}

/// Thin skeleton chains and the distance map of a mask.
#[derive(Clone, Debug)]
pub struct MedialAxis {
    /// One chain per component, largest component first.
    pub chains: Vec<PixelChain>,
    pub distance: DistanceMap,
}

/// Medial axis of every component of `mask`.
///
/// A component that thins away completely contributes the single pixel of
/// maximal distance instead.
pub fn medial_axis(mask: &BinaryMask) -> Result<MedialAxis> {
    if mask.count() == 0 {
        return Err(Error::InvalidMask("mask has no foreground pixel".into()));
    }
    let distance = distance_transform(mask);
    let thinned = thin(mask);
    let chains = connected_components(mask)
        .iter()
        .map(|comp| {
            let mut part = BinaryMask::empty(mask.width(), mask.height());
            let mut best = ((0, 0), -1.0);
            for j in 0..mask.height() {
                for i in 0..mask.width() {
                    if comp.get(i, j) {
                        if thinned.get(i, j) {
                            part.set(i, j, true);
                        }
                        if distance.get(i, j) > best.1 {
                            best = ((i, j), distance.get(i, j));
                        }
                    }
                }
            }
            if part.count() == 0 {
                PixelChain {
                    pixels: vec![best.0],
                }
            } else {
                // thinning keeps components connected, but guard against splits
                let main = connected_components(&part).swap_remove(0);
                longest_path(&main)
            }
        })
        .collect();
    Ok(MedialAxis { chains, distance })
}

fn centroid(points: &[Point2]) -> Point2 {
    let n = points.len() as f64;
    let s = points.iter().fold(Point2::new(0.0, 0.0), |acc, &p| acc + p);
    s * (1.0 / n)
}

fn angle_between(u: Point2, v: Point2) -> f64 {
    u.cross(v).atan2(u.dot(v)).abs().to_degrees()
}

fn line_deviation(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b - a;
    let len = ab.norm();
    if len == 0.0 {
        p.distance(a)
    } else {
        (p - a).cross(ab).abs() / len
    }
}

/// Greedy angle-based polyline approximation of `chain`.
///
/// Starts at the end farthest from the chain's center of gravity. The
/// current segment grows while the direction of the last few pixels stays
/// within `angle_tol` degrees of the segment direction; on a violation a
/// vertex is placed at the chain point farthest from the segment.
pub fn vectorize(chain: &PixelChain, angle_tol: f64) -> Result<Vec<Point2>> {
    if chain.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "cannot vectorize a chain of {} pixel(s)",
            chain.len()
        )));
    }
    let mut pts = chain.points();
    let g = centroid(&pts);
    if pts[pts.len() - 1].distance(g) > pts[0].distance(g) {
        pts.reverse();
    }
    let n = pts.len();
    let mut vertices = vec![0usize];
    let mut anchor = 0usize;
    let mut k = anchor + 1;
    while k < n {
        let run = k - anchor;
        if run >= 2 * DIRECTION_WINDOW {
            let chord = pts[k] - pts[anchor];
            let local = pts[k] - pts[k - DIRECTION_WINDOW];
            if angle_between(chord, local) > angle_tol {
                let split = (anchor + 1..k)
                    .max_by(|&a, &b| {
                        line_deviation(pts[a], pts[anchor], pts[k]).total_cmp(&line_deviation(
                            pts[b],
                            pts[anchor],
                            pts[k],
                        ))
                    })
                    .unwrap_or(k - 1);
                vertices.push(split);
                anchor = split;
                k = anchor + 1;
                continue;
            }
        }
        k += 1;
    }
    if *vertices.last().unwrap() != n - 1 {
        vertices.push(n - 1);
    }
    Ok(vertices.into_iter().map(|v| pts[v]).collect())
}

/// Second derivatives of a natural cubic spline through `(t, y)`.
fn natural_spline(t: &[f64], y: &[f64]) -> Vec<f64> {
    let n = t.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    // tridiagonal system for interior second derivatives (Thomas algorithm)
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        let (h0, h1) = (t[i] - t[i - 1], t[i + 1] - t[i]);
        let a = h0 / 6.0;
        let b = (h0 + h1) / 3.0;
        let cc = h1 / 6.0;
        let rhs = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
        let denom = b - a * c[i - 1];
        c[i] = cc / denom;
        d[i] = (rhs - a * d[i - 1]) / denom;
    }
    for i in (1..n - 1).rev() {
        m[i] = d[i] - c[i] * m[i + 1];
    }
    m
}

fn spline_eval(t: &[f64], y: &[f64], m: &[f64], s: f64) -> f64 {
    let n = t.len();
    let mut k = match t.iter().position(|&ti| ti > s) {
        Some(0) => 0,
        Some(p) => p - 1,
        None => n - 2,
    };
    k = k.min(n - 2);
    let h = t[k + 1] - t[k];
    let a = (t[k + 1] - s) / h;
    let b = (s - t[k]) / h;
    a * y[k] + b * y[k + 1] + ((a * a * a - a) * m[k] + (b * b * b - b) * m[k + 1]) * h * h / 6.0
}

/// Natural cubic spline through `vertices` (chord-length parameter),
/// resampled at uniform arc length with `max(3, round(len / spacing))`
/// intervals.
pub fn spline_resample(vertices: &[Point2], spacing: f64) -> Vec<Point2> {
    let mut t = vec![0.0];
    for w in vertices.windows(2) {
        t.push(t[t.len() - 1] + w[0].distance(w[1]));
    }
    let xs: Vec<f64> = vertices.iter().map(|p| p.x).collect();
    let ys: Vec<f64> = vertices.iter().map(|p| p.y).collect();
    let (mx, my) = (natural_spline(&t, &xs), natural_spline(&t, &ys));
    let total_t = t[t.len() - 1];
    let dense_n = ((total_t * 8.0).ceil() as usize).max(16);
    let dense: Vec<Point2> = (0..=dense_n)
        .map(|k| {
            let s = total_t * k as f64 / dense_n as f64;
            Point2::new(spline_eval(&t, &xs, &mx, s), spline_eval(&t, &ys, &my, s))
        })
        .collect();
    let mut cum = vec![0.0];
    for w in dense.windows(2) {
        cum.push(cum[cum.len() - 1] + w[0].distance(w[1]));
    }
    let len = cum[cum.len() - 1];
    let m = ((len / spacing).round() as usize).max(3);
    let mut seg = 0;
    (0..=m)
        .map(|k| {
            let target = len * k as f64 / m as f64;
            while seg + 2 < dense.len() && cum[seg + 1] < target {
                seg += 1;
            }
            let l = cum[seg + 1] - cum[seg];
            let f = if l > 0.0 {
                ((target - cum[seg]) / l).clamp(0.0, 1.0)
            } else {
                0.0
            };
            dense[seg] + (dense[seg + 1] - dense[seg]) * f
        })
        .collect()
}

/// Principal direction of a point cloud.
fn principal_axis(points: &[Point2]) -> Point2 {
    let c = centroid(points);
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in points {
        let d = *p - c;
        sxx += d.x * d.x;
        sxy += d.x * d.y;
        syy += d.y * d.y;
    }
    let angle = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    Point2::new(angle.cos(), angle.sin())
}

/// Drops chain ends whose distance value is below half the chain maximum
/// (spurs running into corners).
fn trim_chain(chain: &PixelChain, dist: &DistanceMap) -> PixelChain {
    let values: Vec<f64> = chain.pixels.iter().map(|&(i, j)| dist.get(i, j)).collect();
    let max = values.iter().copied().fold(0.0, f64::max);
    let keep = |v: &f64| *v >= 0.5 * max;
    let start = values.iter().position(keep).unwrap_or(0);
    let end = values.iter().rposition(keep).unwrap_or(values.len() - 1);
    PixelChain {
        pixels: chain.pixels[start..=end].to_vec(),
    }
}

fn skeleton_from_chain(
    component: &BinaryMask,
    chain: &PixelChain,
    dist: &DistanceMap,
    spacing: f64,
    angle_tol: f64,
) -> Result<Skeleton> {
    let max_dist = chain
        .pixels
        .iter()
        .map(|&(i, j)| dist.get(i, j))
        .fold(0.0, f64::max);
    let comp_max = (0..component.height())
        .flat_map(|j| (0..component.width()).map(move |i| (i, j)))
        .filter(|&(i, j)| component.get(i, j))
        .map(|(i, j)| dist.get(i, j))
        .fold(max_dist, f64::max);
    if 2.0 * comp_max - 1.0 < MIN_WIDTH {
        return Err(Error::InvalidMask(format!(
            "component is only about {:.1} px across",
            (2.0 * comp_max - 1.0).max(0.0)
        )));
    }

    let trimmed = trim_chain(chain, dist);
    let positions: Vec<Point2> = if trimmed.len() < 2 || trimmed.length() < comp_max {
        let pixels: Vec<Point2> = (0..component.height())
            .flat_map(|j| (0..component.width()).map(move |i| (i, j)))
            .filter(|&(i, j)| component.get(i, j))
            .map(|(i, j)| center(i, j))
            .collect();
        let c = centroid(&pixels);
        let axis = principal_axis(&pixels);
        (0..4)
            .map(|k| c + axis * ((k as f64 - 1.5) * DEGENERATE_SPACING))
            .collect()
    } else {
        let vertices = vectorize(&trimmed, angle_tol)?;
        let chain_pts = trimmed.points();
        spline_resample(&vertices, spacing)
            .into_iter()
            .map(|p| {
                if component.contains_point(p) {
                    p
                } else {
                    chain_pts
                        .iter()
                        .copied()
                        .min_by(|a, b| a.distance(p).total_cmp(&b.distance(p)))
                        .unwrap_or(p)
                }
            })
            .collect()
    };
    let radius = positions
        .iter()
        .map(|&p| dist.at_point(p))
        .fold(f64::INFINITY, f64::min);
    if !(radius > 0.0) {
        return Err(Error::InvalidMask(
            "initial node fell outside the mask".into(),
        ));
    }
    Skeleton::new(
        positions
            .into_iter()
            .map(|p| SkeletonNode::new(p.x, p.y, radius))
            .collect(),
    )
}

fn check_spacing(spacing: f64, angle_tol: f64) -> Result<()> {
    if !(spacing > 0.0) || !spacing.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "spacing must be positive, got {spacing}"
        )));
    }
    if !(angle_tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "angle tolerance must be positive, got {angle_tol}"
        )));
    }
    Ok(())
}

/// Initial skeleton of the largest component of `mask`.
pub fn build_initial_skeleton(mask: &BinaryMask, spacing: f64, angle_tol: f64) -> Result<Skeleton> {
    check_spacing(spacing, angle_tol)?;
    let axis = medial_axis(mask)?;
    let comp = connected_components(mask).swap_remove(0);
    skeleton_from_chain(&comp, &axis.chains[0], &axis.distance, spacing, angle_tol)
}

/// One initial skeleton per component of `mask`, largest first.
pub fn build_initial_colony(mask: &BinaryMask, spacing: f64, angle_tol: f64) -> Result<Colony> {
    check_spacing(spacing, angle_tol)?;
    let axis = medial_axis(mask)?;
    let comps = connected_components(mask);
    let cells = comps
        .iter()
        .zip(&axis.chains)
        .map(|(comp, chain)| skeleton_from_chain(comp, chain, &axis.distance, spacing, angle_tol))
        .collect::<Result<Vec<_>>>()?;
    Ok(Colony::new(cells))
}

//! Skeleton model, point-to-segment distances and the dilations they induce.
//!
//! A [`Skeleton`] is an open polyline of `n >= 2` nodes, each carrying a
//! radius. Two distance models are supported:
//!
//! * [`DistanceModel::Simplified`]: orthogonal projection onto the segment,
//!   clamped to its end points.
//! * [`DistanceModel::Oriented`]: the foot point is shifted along the segment
//!   so that the distance is measured perpendicular to the common external
//!   tangent of the two end disks. The resulting dilation of a segment is the
//!   convex hull of its two end disks.
//!
//! Segment indices are 0-based: segment `i` joins nodes `i` and `i + 1`.

mod outline;

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::BinaryMask;

pub use outline::dilation_outline;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn dot(self, o: Self) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 2-D cross product.
    #[inline]
    pub fn cross(self, o: Self) -> f64 {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn distance(self, o: Self) -> f64 {
        (self - o).norm()
    }

    pub fn rotated(self, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point2 {
    type Output = Point2;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    #[inline]
    fn mul(self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

/// Center of a maximal disk and its radius, both in pixels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SkeletonNode {
    pub position: Point2,
    pub radius: f64,
}

impl SkeletonNode {
    pub const fn new(x: f64, y: f64, radius: f64) -> Self {
        Self {
            position: Point2::new(x, y),
            radius,
        }
    }
}

/// Ordered polyline with per-node radii.
///
/// Invariants: at least two nodes, finite coordinates, positive radii and
/// non-zero segment lengths.
#[derive(Clone, Debug, PartialEq)]
pub struct Skeleton {
    nodes: Vec<SkeletonNode>,
}

impl Skeleton {
    pub fn new(nodes: Vec<SkeletonNode>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidSkeleton(format!(
                "a skeleton needs at least 2 nodes, got {}",
                nodes.len()
            )));
        }
        for (k, n) in nodes.iter().enumerate() {
            if !n.position.is_finite() || !n.radius.is_finite() {
                return Err(Error::InvalidSkeleton(format!("node {k} is not finite")));
            }
            if n.radius <= 0.0 {
                return Err(Error::InvalidSkeleton(format!(
                    "node {k} has non-positive radius {}",
                    n.radius
                )));
            }
        }
        for (k, w) in nodes.windows(2).enumerate() {
            if w[0].position == w[1].position {
                return Err(Error::InvalidSkeleton(format!(
                    "segment {k} has zero length"
                )));
            }
        }
        Ok(Self { nodes })
    }

    /// Builds a skeleton from `(x, y, r)` triples.
    pub fn from_xyr(nodes: &[(f64, f64, f64)]) -> Result<Self> {
        Self::new(
            nodes
                .iter()
                .map(|&(x, y, r)| SkeletonNode::new(x, y, r))
                .collect(),
        )
    }

    pub fn nodes(&self) -> &[SkeletonNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn segment_count(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn segment_length(&self, i: usize) -> f64 {
        self.nodes[i].position.distance(self.nodes[i + 1].position)
    }

    pub fn min_segment_length(&self) -> f64 {
        (0..self.segment_count())
            .map(|i| self.segment_length(i))
            .fold(f64::INFINITY, f64::min)
    }

    /// Arc length of the polyline, end caps excluded.
    pub fn polyline_length(&self) -> f64 {
        (0..self.segment_count())
            .map(|i| self.segment_length(i))
            .sum()
    }

    pub fn max_radius(&self) -> f64 {
        self.nodes.iter().map(|n| n.radius).fold(0.0, f64::max)
    }

    pub fn radii(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.radius).collect()
    }

    /// Axis-aligned bounding box of the node centers: `(min, max)`.
    pub fn node_bounds(&self) -> (Point2, Point2) {
        let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for n in &self.nodes {
            lo.x = lo.x.min(n.position.x);
            lo.y = lo.y.min(n.position.y);
            hi.x = hi.x.max(n.position.x);
            hi.y = hi.y.max(n.position.y);
        }
        (lo, hi)
    }

    /// Applies `f` to every node position.
    pub fn map_positions(&self, f: impl Fn(Point2) -> Point2) -> Result<Self> {
        Self::new(
            self.nodes
                .iter()
                .map(|n| SkeletonNode {
                    position: f(n.position),
                    radius: n.radius,
                })
                .collect(),
        )
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        let nodes = self
            .nodes
            .iter()
            .map(|n| SkeletonNode::new(n.position.x + dx, n.position.y + dy, n.radius))
            .collect();
        Self { nodes }
    }

    /// Same shape with node order reversed.
    pub fn reversed(&self) -> Self {
        let mut nodes = self.nodes.clone();
        nodes.reverse();
        Self { nodes }
    }

    /// Adds `h` to every radius.
    pub fn dilated(&self, h: f64) -> Result<Self> {
        Self::new(
            self.nodes
                .iter()
                .map(|n| SkeletonNode {
                    position: n.position,
                    radius: n.radius + h,
                })
                .collect(),
        )
    }
}

/// Which point-to-segment distance defines the dilation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceModel {
    #[default]
    Simplified,
    Oriented,
}

impl fmt::Display for DistanceModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistanceModel::Simplified => "simplified",
            DistanceModel::Oriented => "oriented",
        })
    }
}

impl FromStr for DistanceModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "simplified" => Ok(DistanceModel::Simplified),
            "oriented" => Ok(DistanceModel::Oriented),
            other => Err(Error::InvalidParameter(format!(
                "unknown distance model '{other}' (expected simplified or oriented)"
            ))),
        }
    }
}

/// Result of projecting a point onto one skeleton segment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SegmentQuery {
    pub segment_index: usize,
    /// Unclamped barycentric coordinate along the segment.
    pub lambda_raw: f64,
    /// `lambda_raw` clamped to `[0, 1]`.
    pub lambda_clamped: f64,
    pub distance: f64,
    pub interp_radius: f64,
    /// Foot point on the segment at `lambda_clamped`.
    pub foot: Point2,
}

impl SegmentQuery {
    /// Signed gap between the point and the dilation boundary (`d - r`).
    pub fn margin(&self) -> f64 {
        self.distance - self.interp_radius
    }
}

/// Closed or open sampled curve.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Contour {
    pub points: Vec<Point2>,
    pub closed: bool,
}

impl Contour {
    pub fn closed(points: Vec<Point2>) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::InvalidParameter(format!(
                "a closed contour needs at least 3 points, got {}",
                points.len()
            )));
        }
        Ok(Self {
            points,
            closed: true,
        })
    }

    pub fn open(points: Vec<Point2>) -> Self {
        Self {
            points,
            closed: false,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Iterates over the polyline edges, including the closing edge when closed.
    pub fn edges(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        let n = self.points.len();
        let count = match (self.closed, n) {
            (_, 0) | (_, 1) => 0,
            (true, _) => n,
            (false, _) => n - 1,
        };
        (0..count).map(move |k| (self.points[k], self.points[(k + 1) % n]))
    }

    pub fn length(&self) -> f64 {
        self.edges().map(|(a, b)| a.distance(b)).sum()
    }

    /// Shoelace area; positive for counter-clockwise loops.
    pub fn signed_area(&self) -> f64 {
        0.5 * self.edges().map(|(a, b)| a.cross(b)).sum::<f64>()
    }
}

/// Barycentric coordinate of the orthogonal projection of `y` on the line `a`-`b`.
#[inline]
fn projection_lambda(y: Point2, a: Point2, ab: Point2, len2: f64) -> f64 {
    (y - a).dot(ab) / len2
}

/// Shift of the foot point induced by the common tangent of the end disks.
///
/// `dr` is the algebraic radius difference `r_b - r_a`. When one end disk
/// swallows the segment (`|dr| >= L`) the shift snaps the foot point to the
/// larger disk's center.
fn oriented_shift(y: Point2, a: Point2, ab: Point2, len: f64, lambda1: f64, dr: f64) -> f64 {
    if dr >= len {
        1.0 - lambda1
    } else if -dr >= len {
        -lambda1
    } else {
        let h = (y - a).cross(ab).abs() / len;
        h * dr / (len * (len * len - dr * dr).sqrt())
    }
}

/// Projects `y` onto the segment joining nodes `a` and `b`.
pub fn project_onto(
    y: Point2,
    a: &SkeletonNode,
    b: &SkeletonNode,
    model: DistanceModel,
) -> Result<SegmentQuery> {
    let ab = b.position - a.position;
    let len2 = ab.dot(ab);
    if !(len2 > 0.0) {
        return Err(Error::InvalidSkeleton("degenerate segment".into()));
    }
    Ok(project_unchecked(y, a, b, ab, len2, model, 0))
}

#[inline]
fn project_unchecked(
    y: Point2,
    a: &SkeletonNode,
    b: &SkeletonNode,
    ab: Point2,
    len2: f64,
    model: DistanceModel,
    segment_index: usize,
) -> SegmentQuery {
    let lambda1 = projection_lambda(y, a.position, ab, len2);
    let lambda_raw = match model {
        DistanceModel::Simplified => lambda1,
        DistanceModel::Oriented => {
            let dr = b.radius - a.radius;
            if dr == 0.0 {
                lambda1
            } else {
                lambda1 + oriented_shift(y, a.position, ab, len2.sqrt(), lambda1, dr)
            }
        }
    };
    let lambda_clamped = lambda_raw.clamp(0.0, 1.0);
    let foot = a.position + ab * lambda_clamped;
    SegmentQuery {
        segment_index,
        lambda_raw,
        lambda_clamped,
        distance: y.distance(foot),
        interp_radius: (1.0 - lambda_clamped) * a.radius + lambda_clamped * b.radius,
        foot,
    }
}

/// Projects `y` onto segment `i` of `skel`.
pub fn project_to_segment(
    y: Point2,
    skel: &Skeleton,
    i: usize,
    model: DistanceModel,
) -> Result<SegmentQuery> {
    if i >= skel.segment_count() {
        return Err(Error::InvalidParameter(format!(
            "segment index {i} out of range for a skeleton with {} segments",
            skel.segment_count()
        )));
    }
    let mut q = project_onto(y, &skel.nodes[i], &skel.nodes[i + 1], model)?;
    q.segment_index = i;
    Ok(q)
}

/// Projection on the closest segment; ties go to the lowest index.
pub fn distance_to_skeleton(y: Point2, skel: &Skeleton, model: DistanceModel) -> SegmentQuery {
    let nodes = &skel.nodes;
    let mut best: Option<SegmentQuery> = None;
    for i in 0..nodes.len() - 1 {
        let (a, b) = (&nodes[i], &nodes[i + 1]);
        let ab = b.position - a.position;
        let q = project_unchecked(y, a, b, ab, ab.dot(ab), model, i);
        if best.map_or(true, |bq| q.distance < bq.distance) {
            best = Some(q);
        }
    }
    best.expect("skeleton has at least one segment")
}

/// Membership of `y` in the dilation of `skel`.
pub fn dilation_contains(y: Point2, skel: &Skeleton, model: DistanceModel) -> bool {
    let q = distance_to_skeleton(y, skel, model);
    q.distance <= q.interp_radius
}

/// Pixel-center sampling of the dilation on a `width x height` grid.
pub fn rasterize_dilation(
    skel: &Skeleton,
    width: usize,
    height: usize,
    model: DistanceModel,
) -> BinaryMask {
    let mut mask = BinaryMask::empty(width, height);
    let Some((i0, i1, j0, j1)) = pixel_window(skel, skel.max_radius() + 2.0, width, height) else {
        return mask;
    };
    for j in j0..j1 {
        for i in i0..i1 {
            let c = Point2::new(i as f64 + 0.5, j as f64 + 0.5);
            if dilation_contains(c, skel, model) {
                mask.set(i, j, true);
            }
        }
    }
    mask
}

/// Half-open pixel index window `(i0, i1, j0, j1)` covering the node bounding
/// box inflated by `margin`, clipped to the grid. `None` when empty.
pub(crate) fn pixel_window(
    skel: &Skeleton,
    margin: f64,
    width: usize,
    height: usize,
) -> Option<(usize, usize, usize, usize)> {
    let (lo, hi) = skel.node_bounds();
    let clip = |v: f64, max: usize| v.max(0.0).min(max as f64) as usize;
    let i0 = clip((lo.x - margin).floor(), width);
    let i1 = clip((hi.x + margin).ceil() + 1.0, width);
    let j0 = clip((lo.y - margin).floor(), height);
    let j1 = clip((hi.y + margin).ceil() + 1.0, height);
    (i0 < i1 && j0 < j1).then_some((i0, i1, j0, j1))
}

/// Value and first derivatives of the signed margin `g = d - r` of a point
/// with respect to one segment.
///
/// `dy` is the derivative with respect to the point; `dp` with respect to
/// `[x_a, y_a, r_a, x_b, y_b, r_b]`. The regime (interior or clamped end
/// point) is frozen at the evaluation point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarginJet {
    pub margin: f64,
    pub distance: f64,
    pub lambda_raw: f64,
    pub dy: [f64; 2],
    pub dp: [f64; 6],
}

/// Computes the [`MarginJet`] of `y` with respect to segment `a`-`b`.
///
/// In the interior regime the simplified margin is `h - r(lambda_1)` where
/// `h` is the distance to the segment line. For the oriented model the
/// margin reduces to `h * cos(theta) - r(lambda_1)` with
/// `cos(theta) = sqrt(L^2 - dr^2) / L`, so both models share the same
/// building blocks. Derivatives with respect to `y_a`, `y_b` follow the
/// same pattern as those for `x_a`, `x_b`.
pub fn margin_jet(
    y: Point2,
    a: &SkeletonNode,
    b: &SkeletonNode,
    model: DistanceModel,
) -> MarginJet {
    let ab = b.position - a.position;
    let len2 = ab.dot(ab);
    let q = project_unchecked(y, a, b, ab, len2, model, 0);
    let dr = b.radius - a.radius;

    if q.lambda_raw <= 0.0 || q.lambda_raw >= 1.0 {
        // clamped: distance to an end point minus that end point's radius
        let at_start = q.lambda_raw <= 0.0;
        let (node, base) = if at_start { (a, 0) } else { (b, 3) };
        let v = y - node.position;
        let d = v.norm();
        let mut dp = [0.0; 6];
        dp[base + 2] = -1.0;
        let mut dy = [0.0; 2];
        if d > 0.0 {
            dy = [v.x / d, v.y / d];
            dp[base] = -v.x / d;
            dp[base + 1] = -v.y / d;
        }
        return MarginJet {
            margin: d - node.radius,
            distance: d,
            lambda_raw: q.lambda_raw,
            dy,
            dp,
        };
    }

    let w = y - a.position;
    let cross = w.cross(ab);
    let sign = if cross > 0.0 {
        1.0
    } else if cross < 0.0 {
        -1.0
    } else {
        0.0
    };
    let abs_cross = cross.abs();
    let lambda1 = w.dot(ab) / len2;

    // partials of cross, dot and L^2 w.r.t. [x_a, y_a, r_a, x_b, y_b, r_b]
    let d_cross = [w.y - ab.y, ab.x - w.x, 0.0, -w.y, w.x, 0.0];
    let d_dot = [-ab.x - w.x, -ab.y - w.y, 0.0, w.x, w.y, 0.0];
    let d_len2 = [-2.0 * ab.x, -2.0 * ab.y, 0.0, 2.0 * ab.x, 2.0 * ab.y, 0.0];
    let d_dr = [0.0, 0.0, -1.0, 0.0, 0.0, 1.0];
    // w.r.t. the point
    let dy_cross = [ab.y, -ab.x];
    let dy_dot = [ab.x, ab.y];

    let mut dp = [0.0; 6];
    let mut dy = [0.0; 2];

    // r(lambda_1) = r_a + lambda_1 * dr
    let d_lambda = |k: usize| (d_dot[k] - lambda1 * d_len2[k]) / len2;
    for k in 0..6 {
        dp[k] = -(d_lambda(k) * dr + lambda1 * d_dr[k]);
    }
    dp[2] -= 1.0;
    for k in 0..2 {
        dy[k] = -(dy_dot[k] / len2) * dr;
    }

    let (margin, distance) = match model {
        DistanceModel::Simplified => {
            let len = len2.sqrt();
            let h = abs_cross / len;
            // h = |cross| / L
            for k in 0..6 {
                dp[k] += (sign * d_cross[k] - h * d_len2[k] / (2.0 * len)) / len;
            }
            for k in 0..2 {
                dy[k] += sign * dy_cross[k] / len;
            }
            (h - (a.radius + lambda1 * dr), q.distance)
        }
        DistanceModel::Oriented => {
            let s = (len2 - dr * dr).sqrt();
            // F = |cross| * S / L^2
            let f = abs_cross * s / len2;
            for k in 0..6 {
                let ds = (d_len2[k] - 2.0 * dr * d_dr[k]) / (2.0 * s);
                dp[k] +=
                    sign * d_cross[k] * s / len2 + abs_cross * ds / len2 - f * d_len2[k] / len2;
            }
            for k in 0..2 {
                dy[k] += sign * dy_cross[k] * s / len2;
            }
            (f - (a.radius + lambda1 * dr), q.distance)
        }
    };

    MarginJet {
        margin,
        distance,
        lambda_raw: q.lambda_raw,
        dy,
        dp,
    }
}

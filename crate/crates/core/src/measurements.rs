//! Shape measurements, the cell-centered frame and point-to-cell assignment.

use serde::Serialize;

use crate::energy::{median, Colony};
use crate::error::Result;
use crate::geometry::{dilation_outline, distance_to_skeleton, DistanceModel, Point2, Skeleton};

/// Outline sampling step for perimeters.
pub const PERIMETER_STEP: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CellMeasurements {
    /// Polyline length plus both end-cap radii.
    pub length: f64,
    /// Twice the median radius.
    pub width: f64,
    pub perimeter: f64,
    /// Direction of the first-to-last node vector, degrees in `[0, 180)`.
    pub orientation: f64,
}

impl CellMeasurements {
    /// Lengths multiplied by `scale` (for physical units); orientation kept.
    pub fn scaled(&self, scale: f64) -> Self {
        Self {
            length: self.length * scale,
            width: self.width * scale,
            perimeter: self.perimeter * scale,
            orientation: self.orientation,
        }
    }
}

pub fn measure(skel: &Skeleton, model: DistanceModel) -> Result<CellMeasurements> {
    let nodes = skel.nodes();
    let (first, last) = (nodes[0], nodes[nodes.len() - 1]);
    let axis = last.position - first.position;
    let mut orientation = axis.y.atan2(axis.x).to_degrees().rem_euclid(180.0);
    if orientation >= 180.0 {
        orientation = 0.0;
    }
    Ok(CellMeasurements {
        length: skel.polyline_length() + first.radius + last.radius,
        width: 2.0 * median(&skel.radii()),
        perimeter: dilation_outline(skel, model, PERIMETER_STEP)?.length(),
        orientation,
    })
}

/// Position in the cell-centered frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CellLocalCoord {
    /// Normalized arc-length coordinate: 0 at the skeleton midpoint, -1 and
    /// 1 at the two pole tips.
    pub x_norm: f64,
    /// Signed perpendicular offset in pixels, positive to the left of the
    /// skeleton direction.
    pub y_px: f64,
}

/// Expresses `p` in the frame of `skel`.
///
/// The arc coordinate of the closest projection runs from `-r_1` (first
/// pole tip) to `L + r_n` (last pole tip) where `L` is the polyline length.
/// Each half, from the midpoint `L / 2` to a pole tip, is mapped linearly
/// onto `[0, 1]`.
pub fn localize(skel: &Skeleton, p: Point2) -> CellLocalCoord {
    let nodes = skel.nodes();
    let q = distance_to_skeleton(p, skel, DistanceModel::Simplified);
    let seg = q.segment_index;
    let (a, b) = (nodes[seg], nodes[seg + 1]);
    let seg_len = a.position.distance(b.position);
    let before: f64 = (0..seg).map(|i| skel.segment_length(i)).sum();
    let total = skel.polyline_length();
    let (r_first, r_last) = (nodes[0].radius, nodes[nodes.len() - 1].radius);

    let lambda = if seg == 0 && q.lambda_raw < 0.0 {
        q.lambda_raw
    } else if seg + 1 == skel.segment_count() && q.lambda_raw > 1.0 {
        q.lambda_raw
    } else {
        q.lambda_clamped
    };
    let s = (before + lambda * seg_len).clamp(-r_first, total + r_last);
    let mid = 0.5 * total;
    let x_norm = if s < mid {
        (s - mid) / (mid + r_first)
    } else {
        (s - mid) / (mid + r_last)
    };

    let tangent = (b.position - a.position) * (1.0 / seg_len);
    let foot = a.position + (b.position - a.position) * lambda;
    CellLocalCoord {
        x_norm: x_norm.clamp(-1.0, 1.0),
        y_px: tangent.cross(p - foot),
    }
}

/// Cell index whose outline margin `d - r` is smallest, if that margin is at
/// most `slack`. Ties go to the lowest index.
pub fn assign_point(colony: &Colony, p: Point2, slack: f64, model: DistanceModel) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (k, skel) in colony.iter().enumerate() {
        let m = distance_to_skeleton(p, skel, model).margin();
        if best.map_or(true, |(_, bm)| m < bm) {
            best = Some((k, m));
        }
    }
    best.filter(|&(_, m)| m <= slack).map(|(k, _)| k)
}

pub fn assign_points(
    colony: &Colony,
    pts: &[Point2],
    slack: f64,
    model: DistanceModel,
) -> Vec<Option<usize>> {
    pts.iter()
        .map(|&p| assign_point(colony, p, slack, model))
        .collect()
}

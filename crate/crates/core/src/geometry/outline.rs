//! Sampled dilation outlines.
//!
//! The outline is the zero level set of `g(y) = d(y, S) - r(y)`. It is
//! traced with marching squares on a grid of spacing `step / 2` and the
//! resulting loop is resampled at uniform arc length close to `step`.

use super::{distance_to_skeleton, Contour, DistanceModel, Point2, Skeleton};
use crate::error::{Error, Result};

const NONE: u32 = u32::MAX;

/// Closed contour sampling the boundary of the dilation of `skel`.
pub fn dilation_outline(skel: &Skeleton, model: DistanceModel, step: f64) -> Result<Contour> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "outline step must be positive, got {step}"
        )));
    }
    let h = step / 2.0;
    let (lo, hi) = skel.node_bounds();
    let pad = skel.max_radius() + 2.0 * step;
    let origin = Point2::new(lo.x - pad, lo.y - pad);
    let nx = ((hi.x - lo.x + 2.0 * pad) / h).ceil() as usize + 1;
    let ny = ((hi.y - lo.y + 2.0 * pad) / h).ceil() as usize + 1;

    let at = |i: usize, j: usize| Point2::new(origin.x + i as f64 * h, origin.y + j as f64 * h);
    let mut field = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            field.push(distance_to_skeleton(at(i, j), skel, model).margin());
        }
    }
    let f = |i: usize, j: usize| field[j * nx + i];

    // Edge ids: horizontal edge (i,j)-(i+1,j) -> j*nx + i,
    // vertical edge (i,j)-(i,j+1) -> nx*ny + j*nx + i.
    let hedge = |i: usize, j: usize| j * nx + i;
    let vedge = |i: usize, j: usize| nx * ny + j * nx + i;
    let mut links = vec![[NONE; 2]; 2 * nx * ny];
    let mut link = |e0: usize, e1: usize| {
        for (a, b) in [(e0, e1), (e1, e0)] {
            let slot = &mut links[a];
            if slot[0] == NONE {
                slot[0] = b as u32;
            } else {
                slot[1] = b as u32;
            }
        }
    };

    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let v = [f(i, j), f(i + 1, j), f(i + 1, j + 1), f(i, j + 1)];
            let case = v
                .iter()
                .enumerate()
                .fold(0usize, |acc, (k, &x)| acc | (usize::from(x < 0.0) << k));
            // edges: 0 bottom, 1 right, 2 top, 3 left
            let e = [hedge(i, j), vedge(i + 1, j), hedge(i, j + 1), vedge(i, j)];
            let centre_inside = (v[0] + v[1] + v[2] + v[3]) < 0.0;
            match case {
                0 | 15 => {}
                1 | 14 => link(e[3], e[0]),
                2 | 13 => link(e[0], e[1]),
                3 | 12 => link(e[3], e[1]),
                4 | 11 => link(e[1], e[2]),
                6 | 9 => link(e[0], e[2]),
                7 | 8 => link(e[3], e[2]),
                5 => {
                    if centre_inside {
                        link(e[3], e[2]);
                        link(e[0], e[1]);
                    } else {
                        link(e[3], e[0]);
                        link(e[1], e[2]);
                    }
                }
                10 => {
                    if centre_inside {
                        link(e[3], e[0]);
                        link(e[1], e[2]);
                    } else {
                        link(e[0], e[1]);
                        link(e[2], e[3]);
                    }
                }
                _ => unreachable!(),
            }
        }
    }

    let crossing = |edge: usize| -> Point2 {
        let (p0, p1, f0, f1) = if edge < nx * ny {
            let (i, j) = (edge % nx, edge / nx);
            (at(i, j), at(i + 1, j), f(i, j), f(i + 1, j))
        } else {
            let e = edge - nx * ny;
            let (i, j) = (e % nx, e / nx);
            (at(i, j), at(i, j + 1), f(i, j), f(i, j + 1))
        };
        let t = f0 / (f0 - f1);
        p0 + (p1 - p0) * t
    };

    let mut visited = vec![false; links.len()];
    let mut best: Option<Vec<Point2>> = None;
    let mut best_len = 0.0;
    for start in 0..links.len() {
        if visited[start] || links[start][0] == NONE {
            continue;
        }
        let mut ring = Vec::new();
        let (mut prev, mut cur) = (NONE as usize, start);
        loop {
            visited[cur] = true;
            ring.push(crossing(cur));
            let [a, b] = links[cur];
            let next = if a as usize != prev { a } else { b };
            if next == NONE {
                break;
            }
            prev = cur;
            cur = next as usize;
            if cur == start {
                break;
            }
        }
        let c = Contour {
            points: ring,
            closed: true,
        };
        let len = c.length();
        if len > best_len {
            best_len = len;
            best = Some(c.points);
        }
    }

    let mut ring = best.ok_or_else(|| {
        Error::InvalidSkeleton("dilation has no boundary on the sampling grid".into())
    })?;
    if (Contour {
        points: ring.clone(),
        closed: true,
    })
    .signed_area()
        < 0.0
    {
        ring.reverse();
    }
    resample_closed(&ring, step)
}

/// Resamples a closed polyline at uniform arc length close to `step`.
pub(crate) fn resample_closed(ring: &[Point2], step: f64) -> Result<Contour> {
    let n = ring.len();
    let mut cum = Vec::with_capacity(n + 1);
    cum.push(0.0);
    for k in 0..n {
        let d = ring[k].distance(ring[(k + 1) % n]);
        cum.push(cum[k] + d);
    }
    let total = cum[n];
    let m = ((total / step).round() as usize).max(3);
    let spacing = total / m as f64;
    let mut out = Vec::with_capacity(m);
    let mut seg = 0;
    for s in 0..m {
        let target = s as f64 * spacing;
        while seg + 1 < n && cum[seg + 1] <= target {
            seg += 1;
        }
        let len = cum[seg + 1] - cum[seg];
        let t = if len > 0.0 {
            (target - cum[seg]) / len
        } else {
            0.0
        };
        let (a, b) = (ring[seg], ring[(seg + 1) % n]);
        out.push(a + (b - a) * t);
    }
    Contour::closed(out)
}

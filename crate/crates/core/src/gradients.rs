//! Analytic derivatives of every energy term with respect to node
//! coordinates and radii, plus a central finite-difference oracle.
//!
//! At non-smooth configurations (lambda clamping, minimizing-segment
//! switches, median ties, the repulsion corner) the regime found at the
//! evaluation point is frozen, which yields a one-sided derivative.

use crate::energy::{
    contrast, data_energy, data_window, median, pixel_select_deriv, Colony, EnergyParams,
};
use crate::error::{Error, Result};
use crate::geometry::{distance_to_skeleton, margin_jet, Point2, Skeleton};
use crate::image::ImageGrid;

/// `(dE/dx, dE/dy, dE/dr)` for one node.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NodeGradient {
    pub dx: f64,
    pub dy: f64,
    pub dr: f64,
}

/// Per-cell, per-node gradient with the same shape as a [`Colony`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GradientField {
    pub cells: Vec<Vec<NodeGradient>>,
}

impl GradientField {
    pub fn zeros(colony: &Colony) -> Self {
        Self {
            cells: colony
                .iter()
                .map(|s| vec![NodeGradient::default(); s.len()])
                .collect(),
        }
    }

    fn zeros_for(skel: &Skeleton) -> Vec<NodeGradient> {
        vec![NodeGradient::default(); skel.len()]
    }

    /// Flattened as `[dx, dy, dr]` per node, matching [`Colony::to_params`].
    pub fn to_flat(&self) -> Vec<f64> {
        self.cells
            .iter()
            .flatten()
            .flat_map(|g| [g.dx, g.dy, g.dr])
            .collect()
    }

    pub fn from_flat(colony: &Colony, flat: &[f64]) -> Self {
        let mut k = 0;
        let cells = colony
            .iter()
            .map(|s| {
                (0..s.len())
                    .map(|_| {
                        let g = NodeGradient {
                            dx: flat[k],
                            dy: flat[k + 1],
                            dr: flat[k + 2],
                        };
                        k += 3;
                        g
                    })
                    .collect()
            })
            .collect();
        Self { cells }
    }

    /// `self += w * other`.
    pub fn add_scaled(&mut self, other: &GradientField, w: f64) {
        for (a, b) in self.cells.iter_mut().zip(&other.cells) {
            for (ga, gb) in a.iter_mut().zip(b) {
                ga.dx += w * gb.dx;
                ga.dy += w * gb.dy;
                ga.dr += w * gb.dr;
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.to_flat().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.to_flat().iter().all(|v| v.is_finite())
    }
}

fn accumulate(node_grads: &mut [NodeGradient], seg: usize, dp: &[f64; 6], w: f64) {
    for (k, g) in [seg, seg + 1].into_iter().enumerate() {
        node_grads[g].dx += w * dp[3 * k];
        node_grads[g].dy += w * dp[3 * k + 1];
        node_grads[g].dr += w * dp[3 * k + 2];
    }
}

/// Gradient of `e_data = alpha_in * e_in - e_out` for one cell.
///
/// For a weighted mean `m = sum(w c) / sum(w)` the derivative is
/// `sum((c - m) dw) / sum(w)`; `dw` follows from the margin jet of the pixel
/// against its minimizing segment.
pub fn grad_data(
    img: &ImageGrid,
    skel: &Skeleton,
    params: &EnergyParams,
) -> Result<Vec<NodeGradient>> {
    let term = data_energy(img, skel, params)?;
    let (i0, i1, j0, j1) = data_window(img, skel, params)?;
    let mut grads = GradientField::zeros_for(skel);
    let nodes = skel.nodes();
    for j in j0..j1 {
        for i in i0..i1 {
            let y = Point2::new(i as f64 + 0.5, j as f64 + 0.5);
            let q = distance_to_skeleton(y, skel, params.model);
            let g = q.margin();
            let din = pixel_select_deriv(-g);
            let dout = if g < params.rho {
                pixel_select_deriv(g)
            } else {
                0.0
            };
            if din == 0.0 && dout == 0.0 {
                continue;
            }
            let c = contrast(img.get(i, j), params.contrast_exponent);
            // d(w_in)/dg = -f'(-g), d(w_out)/dg = f'(g)
            let mut coef = 0.0;
            if term.in_weight > 0.0 {
                coef += params.alpha_in * (c - term.e_in) * (-din) / term.in_weight;
            }
            if term.out_weight > 0.0 {
                coef -= (c - term.e_out) * dout / term.out_weight;
            }
            if coef == 0.0 {
                continue;
            }
            let s = q.segment_index;
            let jet = margin_jet(y, &nodes[s], &nodes[s + 1], params.model);
            accumulate(&mut grads, s, &jet.dp, coef);
        }
    }
    Ok(grads)
}

/// Gradient of the curvature energy.
///
/// `sin(alpha_i) = A_i / B_i` with `A_i` the determinant of the two edge
/// vectors meeting at node `i` and `B_i` the product of their lengths. Each
/// angle touches nodes `i-1`, `i` and `i+1`.
pub fn grad_curvature(skel: &Skeleton) -> Vec<NodeGradient> {
    let mut grads = GradientField::zeros_for(skel);
    let n = skel.nodes();
    for i in 1..skel.len().saturating_sub(1) {
        let (p0, p1, p2) = (n[i - 1].position, n[i].position, n[i + 1].position);
        let u = p1 - p0;
        let v = p2 - p1;
        let a = u.cross(v);
        let pu = u.dot(u);
        let pv = v.dot(v);
        let b = (pu * pv).sqrt();
        let sine = a / b;
        // dA and d(B) for [x0, y0, x1, y1, x2, y2]
        let da = [-v.y, v.x, v.y + u.y, -(v.x + u.x), -u.y, u.x];
        let dpu = [-2.0 * u.x, -2.0 * u.y, 2.0 * u.x, 2.0 * u.y, 0.0, 0.0];
        let dpv = [0.0, 0.0, -2.0 * v.x, -2.0 * v.y, 2.0 * v.x, 2.0 * v.y];
        for k in 0..6 {
            let db = (dpu[k] * pv + pu * dpv[k]) / (2.0 * b);
            let dsine = da[k] / b - a * db / (b * b);
            let g = &mut grads[i - 1 + k / 2];
            if k % 2 == 0 {
                g.dx += 2.0 * sine * dsine;
            } else {
                g.dy += 2.0 * sine * dsine;
            }
        }
    }
    grads
}

/// Gradient of the homogeneity energy.
///
/// Away from ties the median is a fixed node (odd `n`) or the mean of two
/// fixed nodes (even `n`), so besides the direct term `2 (r_i - r_med)` those
/// nodes also receive `-2 sum_j (r_j - r_med)` spread over the median nodes.
pub fn grad_homogeneity(skel: &Skeleton) -> Vec<NodeGradient> {
    let radii = skel.radii();
    let med = median(&radii);
    let mut grads: Vec<NodeGradient> = radii
        .iter()
        .map(|r| NodeGradient {
            dx: 0.0,
            dy: 0.0,
            dr: 2.0 * (r - med),
        })
        .collect();
    let total: f64 = radii.iter().map(|r| r - med).sum();
    let mut order: Vec<usize> = (0..radii.len()).collect();
    order.sort_by(|&i, &j| radii[i].total_cmp(&radii[j]));
    let n = radii.len();
    let median_nodes: &[usize] = if n % 2 == 1 {
        &order[n / 2..n / 2 + 1]
    } else {
        &order[n / 2 - 1..n / 2 + 1]
    };
    let share = median_nodes.len() as f64;
    for &m in median_nodes {
        grads[m].dr -= 2.0 * total / share;
    }
    grads
}

/// Gradient of the repulsion energy over the whole colony.
///
/// Each term `f_rep(d(x_i, S_k) - r_i - r^k)` depends on node `i` of `S_l`
/// and on the two nodes bounding the minimizing segment of `S_k`; both
/// receive their share. A node lying exactly on the other skeleton has an
/// undefined direction and gets no positional contribution.
pub fn grad_repulsion(colony: &Colony, params: &EnergyParams) -> GradientField {
    let delta_eff = params.effective_delta();
    let mut field = GradientField::zeros(colony);
    let cells = colony.cells();
    for (l, sl) in cells.iter().enumerate() {
        for (k, sk) in cells.iter().enumerate() {
            if k == l {
                continue;
            }
            let kn = sk.nodes();
            for (ni, node) in sl.nodes().iter().enumerate() {
                let q = distance_to_skeleton(node.position, sk, params.model);
                let s = q.segment_index;
                let mut jet = margin_jet(node.position, &kn[s], &kn[s + 1], params.model);
                let t = jet.margin - node.radius;
                if t >= delta_eff {
                    continue;
                }
                let fp = 2.0 * (t - delta_eff);
                if jet.distance == 0.0 {
                    jet.dy = [0.0; 2];
                    for c in [0, 1, 3, 4] {
                        jet.dp[c] = 0.0;
                    }
                }
                let g = &mut field.cells[l][ni];
                g.dx += fp * jet.dy[0];
                g.dy += fp * jet.dy[1];
                g.dr -= fp;
                accumulate(&mut field.cells[k], s, &jet.dp, fp);
            }
        }
    }
    field
}

/// `a grad(E_d) + b grad(E_c) + c grad(E_h) + d grad(E_r)`.
pub fn grad_total(
    img: &ImageGrid,
    colony: &Colony,
    params: &EnergyParams,
) -> Result<GradientField> {
    params.validate()?;
    let mut field = if params.d != 0.0 {
        let mut r = grad_repulsion(colony, params);
        for cell in &mut r.cells {
            for g in cell {
                g.dx *= params.d;
                g.dy *= params.d;
                g.dr *= params.d;
            }
        }
        r
    } else {
        GradientField::zeros(colony)
    };
    for (skel, out) in colony.iter().zip(field.cells.iter_mut()) {
        let mut parts: Vec<(f64, Vec<NodeGradient>)> = Vec::with_capacity(3);
        if params.a != 0.0 {
            parts.push((params.a, grad_data(img, skel, params)?));
        }
        if params.b != 0.0 {
            parts.push((params.b, grad_curvature(skel)));
        }
        if params.c != 0.0 {
            parts.push((params.c, grad_homogeneity(skel)));
        }
        for (w, part) in parts {
            for (o, g) in out.iter_mut().zip(part) {
                o.dx += w * g.dx;
                o.dy += w * g.dy;
                o.dr += w * g.dr;
            }
        }
    }
    if !field.is_finite() {
        return Err(Error::NonFinite("gradient".into()));
    }
    Ok(field)
}

/// Central differences `(E(p + h) - E(p - h)) / 2h` for every scalar parameter.
pub fn fd_gradient<F>(energy: F, colony: &Colony, step: f64) -> Result<GradientField>
where
    F: Fn(&Colony) -> Result<f64>,
{
    if !(step > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "finite-difference step must be positive, got {step}"
        )));
    }
    let base = colony.to_params();
    let mut flat = vec![0.0; base.len()];
    let mut p = base.clone();
    for k in 0..base.len() {
        p[k] = base[k] + step;
        let plus = energy(&colony.with_params(&p)?)?;
        p[k] = base[k] - step;
        let minus = energy(&colony.with_params(&p)?)?;
        p[k] = base[k];
        flat[k] = (plus - minus) / (2.0 * step);
    }
    Ok(GradientField::from_flat(colony, &flat))
}

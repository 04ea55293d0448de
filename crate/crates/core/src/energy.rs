//! The four energy terms and their weighted total.
//!
//! * data: `alpha_in * e_in - e_out`, where `e_in` is the mean contrast-mapped
//!   intensity inside the dilation and `e_out` the mean over a ring of width
//!   `rho` around it; both are soft-weighted by [`pixel_select`].
//! * curvature: sum of squared sines of the turning angles.
//! * homogeneity: squared deviation of the radii from their median.
//! * repulsion: quadratic penalty on nodes that come closer than
//!   `delta + 2h` to another cell's outline.
//!
//! The data term is summed over the node bounding box inflated by
//! `max_radius + rho + 3` pixels; outside that window both weights vanish.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{distance_to_skeleton, pixel_window, DistanceModel, Point2, Skeleton};
use crate::image::ImageGrid;

/// Weights and shape parameters of the energy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyParams {
    /// data term weight
    pub a: f64,
    /// curvature weight
    pub b: f64,
    /// homogeneity weight
    pub c: f64,
    /// repulsion weight
    pub d: f64,
    /// ring width (px) of the outside region
    pub rho: f64,
    /// repulsion gap (px)
    pub delta: f64,
    /// erosion offset (px) between physical and imaged cells
    pub h: f64,
    pub alpha_in: f64,
    pub model: DistanceModel,
    pub contrast_exponent: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self {
            a: 10.0,
            b: 1.0,
            c: 0.01,
            d: 0.1,
            rho: 2.0,
            delta: 0.3,
            h: 0.0,
            alpha_in: 1.0,
            model: DistanceModel::Simplified,
            contrast_exponent: 0.8,
        }
    }
}

impl EnergyParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        for (name, v) in [("a", self.a), ("b", self.b), ("c", self.c), ("d", self.d)] {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(format!("weight {name} must be finite and >= 0, got {v}"));
            }
        }
        if !(self.rho > 0.0) {
            return bad(format!("rho must be > 0, got {}", self.rho));
        }
        if !(self.delta >= 0.0) {
            return bad(format!("delta must be >= 0, got {}", self.delta));
        }
        if !(self.h >= 0.0) {
            return bad(format!("h must be >= 0, got {}", self.h));
        }
        if !(self.alpha_in > 0.0 && self.alpha_in <= 1.0) {
            return bad(format!(
                "alpha_in must lie in (0, 1], got {}",
                self.alpha_in
            ));
        }
        if !(self.contrast_exponent > 0.0) || !self.contrast_exponent.is_finite() {
            return bad(format!(
                "contrast_exponent must be > 0, got {}",
                self.contrast_exponent
            ));
        }
        Ok(())
    }

    /// Repulsion gap between eroded skeletons: both radii grow by `h`.
    pub fn effective_delta(&self) -> f64 {
        self.delta + 2.0 * self.h
    }
}

/// Ordered set of cells optimized together.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Colony {
    cells: Vec<Skeleton>,
}

impl Colony {
    pub fn new(cells: Vec<Skeleton>) -> Self {
        Self { cells }
    }

    pub fn single(cell: Skeleton) -> Self {
        Self { cells: vec![cell] }
    }

    pub fn cells(&self) -> &[Skeleton] {
        &self.cells
    }

    pub fn into_cells(self) -> Vec<Skeleton> {
        self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Skeleton> {
        self.cells.iter()
    }

    /// Number of scalar parameters: three per node.
    pub fn param_count(&self) -> usize {
        self.cells.iter().map(|s| 3 * s.len()).sum()
    }

    /// Flattens to `[x, y, r]` per node, cell by cell.
    pub fn to_params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        for s in &self.cells {
            for n in s.nodes() {
                p.extend_from_slice(&[n.position.x, n.position.y, n.radius]);
            }
        }
        p
    }

    /// Rebuilds a colony of the same shape from a flat parameter vector.
    pub fn with_params(&self, params: &[f64]) -> Result<Colony> {
        if params.len() != self.param_count() {
            return Err(Error::InvalidParameter(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                params.len()
            )));
        }
        let mut k = 0;
        let mut cells = Vec::with_capacity(self.cells.len());
        for s in &self.cells {
            let nodes = (0..s.len())
                .map(|_| {
                    let n =
                        crate::geometry::SkeletonNode::new(params[k], params[k + 1], params[k + 2]);
                    k += 3;
                    n
                })
                .collect();
            cells.push(Skeleton::new(nodes)?);
        }
        Ok(Colony { cells })
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Colony {
        Colony {
            cells: self.cells.iter().map(|s| s.translated(dx, dy)).collect(),
        }
    }
}

impl From<Vec<Skeleton>> for Colony {
    fn from(cells: Vec<Skeleton>) -> Self {
        Self { cells }
    }
}

impl<'a> IntoIterator for &'a Colony {
    type Item = &'a Skeleton;
    type IntoIter = std::slice::Iter<'a, Skeleton>;
    fn into_iter(self) -> Self::IntoIter {
        self.cells.iter()
    }
}

/// Per-cell energy values.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct EnergyBreakdown {
    pub e_in: f64,
    pub e_out: f64,
    pub e_data: f64,
    pub e_curv: f64,
    pub e_homog: f64,
    pub e_repul: f64,
    pub total: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ColonyEnergy {
    pub cells: Vec<EnergyBreakdown>,
    pub total: f64,
}

impl ColonyEnergy {
    /// Sum of each unweighted term over all cells.
    pub fn term_sums(&self) -> EnergyBreakdown {
        let mut s = EnergyBreakdown::default();
        for c in &self.cells {
            s.e_in += c.e_in;
            s.e_out += c.e_out;
            s.e_data += c.e_data;
            s.e_curv += c.e_curv;
            s.e_homog += c.e_homog;
            s.e_repul += c.e_repul;
            s.total += c.total;
        }
        s
    }
}

/// Smooth 0-to-1 ramp on `[-1, 1]`.
#[inline]
pub fn pixel_select(t: f64) -> f64 {
    if t < -1.0 {
        0.0
    } else if t > 1.0 {
        1.0
    } else {
        0.5 * (1.0 + (FRAC_PI_2 * t).sin())
    }
}

#[inline]
pub(crate) fn pixel_select_deriv(t: f64) -> f64 {
    if t <= -1.0 || t >= 1.0 {
        0.0
    } else {
        FRAC_PI_4 * (FRAC_PI_2 * t).cos()
    }
}

/// Contrast mapping `sin(pi v / 2)^exponent`; `v` is clamped to `[0, 1]`.
#[inline]
pub fn contrast(v: f64, exponent: f64) -> f64 {
    let v = v.clamp(0.0, 1.0);
    (FRAC_PI_2 * v).sin().powf(exponent)
}

/// Inside/outside statistics of one cell.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DataTerm {
    pub e_in: f64,
    pub e_out: f64,
    pub e_data: f64,
    pub in_weight: f64,
    pub out_weight: f64,
}

impl DataTerm {
    /// True when either weighted mean had nothing to average.
    pub fn has_empty_weight(&self) -> bool {
        self.in_weight == 0.0 || self.out_weight == 0.0
    }
}

pub(crate) fn data_window(
    img: &ImageGrid,
    skel: &Skeleton,
    params: &EnergyParams,
) -> Result<(usize, usize, usize, usize)> {
    pixel_window(
        skel,
        skel.max_radius() + params.rho + 3.0,
        img.width(),
        img.height(),
    )
    .ok_or_else(|| Error::ZeroWeight("skeleton lies entirely outside the image".into()))
}

/// Weighted inside and ring means of the contrast-mapped image.
pub fn data_energy(img: &ImageGrid, skel: &Skeleton, params: &EnergyParams) -> Result<DataTerm> {
    let (i0, i1, j0, j1) = data_window(img, skel, params)?;
    let (mut n_in, mut w_in, mut n_out, mut w_out) = (0.0, 0.0, 0.0, 0.0);
    for j in j0..j1 {
        for i in i0..i1 {
            let y = Point2::new(i as f64 + 0.5, j as f64 + 0.5);
            let g = distance_to_skeleton(y, skel, params.model).margin();
            let win = pixel_select(-g);
            let wout = if g < params.rho { pixel_select(g) } else { 0.0 };
            if win == 0.0 && wout == 0.0 {
                continue;
            }
            let c = contrast(img.get(i, j), params.contrast_exponent);
            n_in += win * c;
            w_in += win;
            n_out += wout * c;
            w_out += wout;
        }
    }
    let e_in = if w_in > 0.0 { n_in / w_in } else { 0.0 };
    let e_out = if w_out > 0.0 { n_out / w_out } else { 0.0 };
    Ok(DataTerm {
        e_in,
        e_out,
        e_data: params.alpha_in * e_in - e_out,
        in_weight: w_in,
        out_weight: w_out,
    })
}

/// `sin(alpha_i)` at interior node `i` (needs `1 <= i <= n - 2`).
pub(crate) fn turning_sine(skel: &Skeleton, i: usize) -> f64 {
    let n = skel.nodes();
    let u = n[i].position - n[i - 1].position;
    let v = n[i + 1].position - n[i].position;
    u.cross(v) / (u.norm() * v.norm())
}

/// Sum of squared turning sines over interior nodes.
pub fn curvature_energy(skel: &Skeleton) -> f64 {
    (1..skel.len().saturating_sub(1))
        .map(|i| turning_sine(skel, i).powi(2))
        .sum()
}

/// Median; even counts average the two central values.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn homogeneity_energy(skel: &Skeleton) -> f64 {
    let radii = skel.radii();
    let med = median(&radii);
    radii.iter().map(|r| (r - med).powi(2)).sum()
}

/// Quadratic penalty below the gap `delta_eff`.
#[inline]
pub fn repulsion_penalty(t: f64, delta_eff: f64) -> f64 {
    if t < delta_eff {
        (t - delta_eff).powi(2)
    } else {
        0.0
    }
}

/// Repulsion attributed to the cell whose nodes generate each term.
pub fn repulsion_terms(colony: &Colony, params: &EnergyParams) -> Vec<f64> {
    let delta_eff = params.effective_delta();
    let cells = colony.cells();
    cells
        .iter()
        .enumerate()
        .map(|(l, sl)| {
            let mut e = 0.0;
            for (k, sk) in cells.iter().enumerate() {
                if k == l {
                    continue;
                }
                for node in sl.nodes() {
                    let q = distance_to_skeleton(node.position, sk, params.model);
                    e += repulsion_penalty(q.margin() - node.radius, delta_eff);
                }
            }
            e
        })
        .collect()
}

pub fn repulsion_energy(colony: &Colony, params: &EnergyParams) -> f64 {
    repulsion_terms(colony, params).iter().sum()
}

/// Every term for every cell plus the weighted grand total.
pub fn total_energy(
    img: &ImageGrid,
    colony: &Colony,
    params: &EnergyParams,
) -> Result<ColonyEnergy> {
    params.validate()?;
    let repul = repulsion_terms(colony, params);
    let mut cells = Vec::with_capacity(colony.len());
    let mut total = 0.0;
    for (skel, e_repul) in colony.iter().zip(repul) {
        let data = data_energy(img, skel, params)?;
        let e_curv = curvature_energy(skel);
        let e_homog = homogeneity_energy(skel);
        let cell_total =
            params.a * data.e_data + params.b * e_curv + params.c * e_homog + params.d * e_repul;
        total += cell_total;
        cells.push(EnergyBreakdown {
            e_in: data.e_in,
            e_out: data.e_out,
            e_data: data.e_data,
            e_curv,
            e_homog,
            e_repul,
            total: cell_total,
        });
    }
    Ok(ColonyEnergy { cells, total })
}

//! Synthetic ground-truth images, contour metrics and the noise sweep.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::energy::{Colony, EnergyParams};
use crate::error::{Error, Result};
use crate::geometry::{
    dilation_outline, project_onto, Contour, DistanceModel, Point2, Skeleton, SkeletonNode,
};
use crate::image::ImageGrid;
use crate::optimizer::{optimize_eroded, OptimizeOptions};

/// Outline sampling step used when comparing colonies.
pub const EVAL_STEP: f64 = 0.25;

#[derive(Clone, Debug, PartialEq)]
pub struct RenderSettings {
    pub width: usize,
    pub height: usize,
    /// Width of the intensity transition, relative to the local radius.
    pub edge_softness: f64,
    pub foreground: f64,
    pub background: f64,
}

impl RenderSettings {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            edge_softness: 0.08,
            foreground: 0.15,
            background: 0.85,
        }
    }

    pub fn contrast(&self) -> f64 {
        self.background - self.foreground
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidParameter(
                "render size must be positive".into(),
            ));
        }
        if !(self.edge_softness > 0.0) {
            return Err(Error::InvalidParameter(
                "edge_softness must be positive".into(),
            ));
        }
        let levels = 0.0..=1.0;
        if !levels.contains(&self.foreground)
            || !levels.contains(&self.background)
            || self.background <= self.foreground
        {
            return Err(Error::InvalidParameter(format!(
                "need 0 <= foreground < background <= 1, got {} and {}",
                self.foreground, self.background
            )));
        }
        Ok(())
    }
}

/// Normalized distance `min_j d_e(x, s_j) / r_j(x)` over every segment of
/// every cell; infinite for an empty colony.
pub fn normalized_distance(colony: &Colony, p: Point2) -> f64 {
    let mut best = f64::INFINITY;
    for skel in colony {
        for pair in skel.nodes().windows(2) {
            let q = project_onto(p, &pair[0], &pair[1], DistanceModel::Simplified)
                .expect("valid skeleton");
            best = best.min(q.distance / q.interp_radius);
        }
    }
    best
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + libm::erf(z / std::f64::consts::SQRT_2))
}

/// Renders dark cells on a bright background. Intensity is the mid level
/// exactly on each outline.
pub fn render_synthetic(colony: &Colony, settings: &RenderSettings) -> Result<ImageGrid> {
    settings.validate()?;
    let (fg, bg) = (settings.foreground, settings.background);
    ImageGrid::from_fn(settings.width, settings.height, |i, j| {
        let rho = normalized_distance(colony, Point2::new(i as f64 + 0.5, j as f64 + 0.5));
        if rho.is_infinite() {
            return bg;
        }
        (fg + (bg - fg) * std_normal_cdf((rho - 1.0) / settings.edge_softness)).clamp(0.0, 1.0)
    })
}

/// Adds independent Gaussian noise of standard deviation `sigma` and clamps to `[0, 1]`.
pub fn add_noise(img: &ImageGrid, sigma: f64, seed: u64) -> Result<ImageGrid> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "noise sigma must be nonnegative, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let data = img
        .data()
        .iter()
        .map(|v| (v + normal.sample(&mut rng)).clamp(0.0, 1.0))
        .collect();
    ImageGrid::new(img.width(), img.height(), data)
}

fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    let t = if len2 > 0.0 {
        ((p - a).dot(ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    p.distance(a + ab * t)
}

/// Distance from `p` to the polyline of `c` (to its only point when it has one).
pub fn point_to_contour(p: Point2, c: &Contour) -> f64 {
    if c.len() == 1 {
        return p.distance(c.points[0]);
    }
    c.edges()
        .map(|(a, b)| point_segment_distance(p, a, b))
        .fold(f64::INFINITY, f64::min)
}

/// Hausdorff distance and mean symmetric distance between two contours.
///
/// Sample points of each contour are measured against the polyline of the
/// other. The mean symmetric distance averages the two directed means.
pub fn hausdorff(a: &Contour, b: &Contour) -> Result<(f64, f64)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidParameter(
            "cannot compare an empty contour".into(),
        ));
    }
    let directed = |from: &Contour, to: &Contour| {
        let d: Vec<f64> = from
            .points
            .iter()
            .map(|&p| point_to_contour(p, to))
            .collect();
        let max = d.iter().copied().fold(0.0, f64::max);
        (max, d.iter().sum::<f64>() / d.len() as f64)
    };
    let (hab, mab) = directed(a, b);
    let (hba, mba) = directed(b, a);
    Ok((hab.max(hba), 0.5 * (mab + mba)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CellScore {
    pub hausdorff: f64,
    pub mean: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    /// Worst Hausdorff distance over cells.
    pub hausdorff: f64,
    /// Average over cells of the mean symmetric distance.
    pub mean_symmetric_distance: f64,
    pub per_cell: Vec<CellScore>,
}

/// Compares outlines of `pred` against `gt`, matching cells by index.
pub fn evaluate(gt: &Colony, pred: &Colony, model: DistanceModel) -> Result<EvalReport> {
    if gt.len() != pred.len() {
        return Err(Error::InvalidParameter(format!(
            "ground truth has {} cells but prediction has {}",
            gt.len(),
            pred.len()
        )));
    }
    if gt.is_empty() {
        return Err(Error::InvalidParameter("nothing to evaluate".into()));
    }
    let mut per_cell = Vec::with_capacity(gt.len());
    for (g, p) in gt.iter().zip(pred) {
        let (h, m) = hausdorff(
            &dilation_outline(g, model, EVAL_STEP)?,
            &dilation_outline(p, model, EVAL_STEP)?,
        )?;
        per_cell.push(CellScore {
            hausdorff: h,
            mean: m,
        });
    }
    Ok(EvalReport {
        hausdorff: per_cell.iter().map(|c| c.hausdorff).fold(0.0, f64::max),
        mean_symmetric_distance: per_cell.iter().map(|c| c.mean).sum::<f64>()
            / per_cell.len() as f64,
        per_cell,
    })
}

/// Perturbs every node position by up to `jitter` px per axis and every
/// radius by up to 20 %.
pub fn jitter_colony(colony: &Colony, jitter: f64, rng: &mut impl Rng) -> Result<Colony> {
    let cells = colony
        .iter()
        .map(|skel| {
            // redraw until the perturbed polyline has no collapsed segment
            for _ in 0..100 {
                let nodes: Vec<SkeletonNode> = skel
                    .nodes()
                    .iter()
                    .map(|n| {
                        let mut d = || {
                            if jitter > 0.0 {
                                rng.random_range(-jitter..=jitter)
                            } else {
                                0.0
                            }
                        };
                        let (dx, dy) = (d(), d());
                        let scale = 1.0 + rng.random_range(-0.2..=0.2);
                        SkeletonNode::new(n.position.x + dx, n.position.y + dy, n.radius * scale)
                    })
                    .collect();
                if let Ok(s) = Skeleton::new(nodes) {
                    if s.min_segment_length() >= 0.5 {
                        return Ok(s);
                    }
                }
            }
            Err(Error::InvalidParameter(format!(
                "jitter {jitter} px keeps collapsing a segment"
            )))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Colony::new(cells))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    /// Noise levels as fractions of the foreground/background contrast.
    pub sigmas: Vec<f64>,
    pub jitter: f64,
    pub seed: u64,
    pub params: EnergyParams,
    pub options: OptimizeOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub sigma: f64,
    pub report: EvalReport,
}

/// Seed of row `k`, independent of how rows are scheduled.
pub fn row_seed(seed: u64, k: usize) -> u64 {
    seed ^ (k as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Render, add noise, jitter, optimize and score once per noise level.
pub fn noise_sweep(
    colony: &Colony,
    settings: &RenderSettings,
    config: &SweepConfig,
) -> Result<Vec<SweepRow>> {
    let clean = render_synthetic(colony, settings)?;
    config
        .sigmas
        .iter()
        .enumerate()
        .map(|(k, &sigma)| {
            let mut rng = ChaCha8Rng::seed_from_u64(row_seed(config.seed, k));
            let noisy = add_noise(&clean, sigma * settings.contrast(), rng.random())?;
            let init = jitter_colony(colony, config.jitter, &mut rng)?;
            let (fitted, _) = optimize_eroded(&noisy, &init, &config.params, &config.options)?;
            let report = evaluate(colony, &fitted, config.params.model)?;
            Ok(SweepRow { sigma, report })
        })
        .collect()
}

/// Tab-separated sweep table with a `#` header.
pub fn sweep_table(rows: &[SweepRow]) -> String {
    let mut out = String::from("# sigma\thausdorff_px\tmean_px\n");
    for row in rows {
        out.push_str(&format!(
            "{}\t{:.6}\t{:.6}\n",
            row.sigma, row.report.hausdorff, row.report.mean_symmetric_distance
        ));
    }
    out
}

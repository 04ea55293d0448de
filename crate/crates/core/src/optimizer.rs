//! Gradient descent with backtracking line search over a whole colony.

use serde::{Deserialize, Serialize};

use crate::energy::{
    data_energy, total_energy, Colony, ColonyEnergy, EnergyBreakdown, EnergyParams,
};
use crate::error::{Error, Result};
use crate::gradients::grad_total;
use crate::image::ImageGrid;

/// Shortest segment a step may produce.
const MIN_SEGMENT: f64 = 0.25;
const MAX_SHRINKS: usize = 30;
/// Window of accepted steps used by the stopping rule.
const STOP_WINDOW: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeOptions {
    pub max_iters: usize,
    /// Initial step, in pixels per unit gradient.
    pub initial_step: f64,
    pub step_shrink: f64,
    pub min_rel_decrease: f64,
    pub radius_floor: f64,
    /// Record every `trace_every`-th accepted step (0 disables the trace).
    pub trace_every: usize,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            initial_step: 0.5,
            step_shrink: 0.5,
            min_rel_decrease: 1e-6,
            radius_floor: 0.5,
            trace_every: 1,
        }
    }
}

impl OptimizeOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if self.max_iters < 1 {
            return bad("max_iters must be at least 1");
        }
        if !(self.initial_step > 0.0) || !self.initial_step.is_finite() {
            return bad("initial_step must be positive");
        }
        if !(self.step_shrink > 0.0 && self.step_shrink < 1.0) {
            return bad("step_shrink must lie in (0, 1)");
        }
        if !(self.min_rel_decrease >= 0.0) {
            return bad("min_rel_decrease must be nonnegative");
        }
        if !(self.radius_floor > 0.0) || !self.radius_floor.is_finite() {
            return bad("radius_floor must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIters,
    LineSearchFailed,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRecord {
    pub iteration: usize,
    /// Term values summed over cells; `total` is the weighted grand total.
    pub energy: EnergyBreakdown,
    pub grad_max: f64,
    pub step: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct OptimizeTrace {
    pub records: Vec<TraceRecord>,
    pub accepted_steps: usize,
    pub iterations: usize,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub stop_reason: Option<StopReason>,
}

fn evaluate(img: &ImageGrid, colony: &Colony, params: &EnergyParams) -> Result<ColonyEnergy> {
    let e = total_energy(img, colony, params)?;
    if !e.total.is_finite() {
        return Err(Error::NonFinite("total energy".into()));
    }
    Ok(e)
}

fn check_weights(img: &ImageGrid, colony: &Colony, params: &EnergyParams) -> Result<()> {
    if params.a == 0.0 {
        return Ok(());
    }
    for (k, skel) in colony.iter().enumerate() {
        if data_energy(img, skel, params)?.has_empty_weight() {
            return Err(Error::ZeroWeight(format!(
                "cell {k} has no pixel inside or around its outline"
            )));
        }
    }
    Ok(())
}

/// Candidate `p - s g` with radii clamped to the floor; `None` when a
/// segment would collapse.
fn propose(colony: &Colony, p: &[f64], g: &[f64], s: f64, floor: f64) -> Option<Colony> {
    let mut q: Vec<f64> = p.iter().zip(g).map(|(p, g)| p - s * g).collect();
    for r in q.iter_mut().skip(2).step_by(3) {
        *r = r.max(floor);
    }
    let next = colony.with_params(&q).ok()?;
    next.iter()
        .all(|c| c.min_segment_length() >= MIN_SEGMENT)
        .then_some(next)
}

/// Minimizes the total energy of `colony` over `img`.
///
/// Every accepted step strictly lowers the energy. The run stops when the
/// relative decrease over the last ten accepted steps falls below
/// `min_rel_decrease` (scaled down proportionally while fewer than ten steps
/// have been taken), when no step size in the backtracking range lowers the
/// energy, or after `max_iters` iterations.
pub fn optimize(
    img: &ImageGrid,
    colony: &Colony,
    params: &EnergyParams,
    opts: &OptimizeOptions,
) -> Result<(Colony, OptimizeTrace)> {
    params.validate()?;
    opts.validate()?;
    check_weights(img, colony, params)?;

    let mut current = colony.clone();
    let mut energy = evaluate(img, &current, params)?;
    let mut trace = OptimizeTrace {
        initial_energy: energy.total,
        final_energy: energy.total,
        ..OptimizeTrace::default()
    };
    let mut history = vec![energy.total];
    let mut step = opts.initial_step;
    let max_step = opts.initial_step * 1024.0;

    let stop = loop {
        if trace.iterations >= opts.max_iters {
            break StopReason::MaxIters;
        }
        trace.iterations += 1;
        let grad = grad_total(img, &current, params)?;
        let g = grad.to_flat();
        let grad_max = grad.max_abs();
        if grad_max == 0.0 {
            break StopReason::Converged;
        }
        let p = current.to_params();

        let mut accepted = None;
        for _ in 0..=MAX_SHRINKS {
            if let Some(candidate) = propose(&current, &p, &g, step, opts.radius_floor) {
                let e = evaluate(img, &candidate, params)?;
                if e.total < energy.total {
                    accepted = Some((candidate, e));
                    break;
                }
            }
            step *= opts.step_shrink;
        }
        let Some((next, e)) = accepted else {
            break StopReason::LineSearchFailed;
        };
        current = next;
        energy = e;
        trace.accepted_steps += 1;
        history.push(energy.total);
        if opts.trace_every > 0 && trace.accepted_steps % opts.trace_every == 0 {
            trace.records.push(TraceRecord {
                iteration: trace.iterations,
                energy: energy.term_sums(),
                grad_max,
                step,
            });
        }
        step = (step / opts.step_shrink).min(max_step);

        let w = trace.accepted_steps.min(STOP_WINDOW);
        let old = history[history.len() - 1 - w];
        let rel = (old - energy.total) / old.abs().max(1e-12);
        if rel < opts.min_rel_decrease * w as f64 / STOP_WINDOW as f64 {
            break StopReason::Converged;
        }
    };
    trace.final_energy = energy.total;
    trace.stop_reason = Some(stop);
    Ok((current, trace))
}

/// Optimizes eroded cells and dilates the result.
///
/// The data term sees the radii as stored while repulsion keeps the thin
/// cells `delta + 2h` apart; adding `h` to every radius afterwards restores
/// the physical size with a gap of about `delta` between outlines.
pub fn optimize_eroded(
    img: &ImageGrid,
    colony: &Colony,
    params: &EnergyParams,
    opts: &OptimizeOptions,
) -> Result<(Colony, OptimizeTrace)> {
    let (thin, trace) = optimize(img, colony, params, opts)?;
    if params.h == 0.0 {
        return Ok((thin, trace));
    }
    let cells = thin
        .iter()
        .map(|s| s.dilated(params.h))
        .collect::<Result<Vec<_>>>()?;
    Ok((Colony::new(cells), trace))
}

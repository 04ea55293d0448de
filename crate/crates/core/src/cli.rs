//! The `rodskel` command-line tool.
//!
//! Exit status: 0 on success, 1 on usage errors, 2 on data errors.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::energy::Colony;
use crate::error::{Error, Result};
use crate::geometry::{dilation_outline, DistanceModel};
use crate::image::ImageGrid;
use crate::initializer::{build_initial_colony, DEFAULT_ANGLE_TOL, DEFAULT_SPACING};
use crate::io::{self, ParamsDocument};
use crate::measurements::{assign_points, localize, measure};
use crate::optimizer::optimize_eroded;
use crate::synthesis::{
    add_noise, evaluate, noise_sweep, render_synthetic, sweep_table, RenderSettings, SweepConfig,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "rodskel",
    version,
    about = "Active-skeleton segmentation of rod-shaped cells"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build initial skeletons from a binary mask image.
    Init {
        #[arg(long)]
        mask: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Node spacing in pixels.
        #[arg(long, default_value_t = DEFAULT_SPACING)]
        spacing: f64,
        /// Vectorization angle tolerance in degrees.
        #[arg(long, default_value_t = DEFAULT_ANGLE_TOL)]
        angle_tol: f64,
        /// Foreground is intensity >= threshold (or below it with --invert).
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        #[arg(long)]
        invert: bool,
    },
    /// Fit skeletons to an image.
    Optimize {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        init: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[command(flatten)]
        params: ParamsArgs,
        /// Write the optimizer trace table here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Render a synthetic image of a colony.
    Synth {
        #[arg(long)]
        skeletons: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Noise standard deviation as a fraction of the foreground/background contrast.
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        render: RenderArgs,
    },
    /// Compare predicted outlines against ground truth.
    Eval {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long, default_value = "simplified")]
        model: DistanceModel,
    },
    /// Noise-robustness sweep on synthetic images of a colony.
    Sweep {
        #[arg(long)]
        skeletons: PathBuf,
        /// Noise levels as fractions of the contrast.
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        sigmas: Vec<f64>,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Initial position jitter in pixels.
        #[arg(long, default_value_t = 2.0)]
        jitter: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        params: ParamsArgs,
        #[command(flatten)]
        render: RenderArgs,
    },
    /// Length, width, perimeter and orientation of every cell.
    Measure {
        #[arg(long)]
        skeletons: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Multiply printed lengths by this factor (e.g. micrometers per pixel).
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long, default_value = "simplified")]
        model: DistanceModel,
    },
    /// Assign points to cells and express them in cell coordinates.
    Locate {
        #[arg(long)]
        skeletons: PathBuf,
        #[arg(long)]
        points: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Largest accepted distance outside an outline, in pixels.
        #[arg(long, default_value_t = 0.0)]
        slack: f64,
        #[arg(long, default_value = "simplified")]
        model: DistanceModel,
    },
    /// Sample the outline of every cell.
    Outline {
        #[arg(long)]
        skeletons: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = 0.5)]
        step: f64,
        #[arg(long, default_value = "simplified")]
        model: DistanceModel,
    },
}

#[derive(Debug, Args)]
struct ParamsArgs {
    /// TOML file with [energy] and [optimize] tables.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Overrides the distance model of the parameter file.
    #[arg(long)]
    model: Option<DistanceModel>,
}

impl ParamsArgs {
    fn load(&self) -> Result<ParamsDocument> {
        let mut doc = match &self.params {
            Some(p) => io::load_params(p)?,
            None => ParamsDocument::default(),
        };
        if let Some(m) = self.model {
            doc.energy.model = m;
        }
        Ok(doc)
    }
}

#[derive(Debug, Args)]
struct RenderArgs {
    /// Image width; defaults to the colony extent plus a margin.
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long, default_value_t = 0.08)]
    softness: f64,
    #[arg(long, default_value_t = 0.15)]
    foreground: f64,
    #[arg(long, default_value_t = 0.85)]
    background: f64,
}

impl RenderArgs {
    fn settings(&self, colony: &Colony) -> RenderSettings {
        let (mut w, mut h) = (1.0f64, 1.0f64);
        for s in colony {
            let (_, hi) = s.node_bounds();
            let pad = s.max_radius() + 10.0;
            w = w.max(hi.x + pad);
            h = h.max(hi.y + pad);
        }
        RenderSettings {
            width: self.width.unwrap_or(w.ceil() as usize),
            height: self.height.unwrap_or(h.ceil() as usize),
            edge_softness: self.softness,
            foreground: self.foreground,
            background: self.background,
        }
    }
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(p) => io::write_text(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Init {
            mask,
            output,
            spacing,
            angle_tol,
            threshold,
            invert,
        } => {
            let img = io::load_image(&mask)?;
            let mut bits = img.threshold(threshold);
            if invert {
                let inv: Vec<bool> = bits.bits().iter().map(|b| !b).collect();
                bits = crate::image::BinaryMask::new(img.width(), img.height(), inv)?;
            }
            let colony = build_initial_colony(&bits, spacing, angle_tol)?;
            io::save_skeletons(&output, &colony)
        }
        Command::Optimize {
            image,
            init,
            output,
            params,
            trace,
        } => {
            let img = io::load_image(&image)?;
            let colony = io::load_skeletons(&init)?;
            let doc = params.load()?;
            let (fitted, tr) = optimize_eroded(&img, &colony, &doc.energy, &doc.optimize)?;
            io::save_skeletons(&output, &fitted)?;
            if let Some(t) = trace {
                io::write_text(&t, &io::trace_table(&tr))?;
            }
            Ok(())
        }
        Command::Synth {
            skeletons,
            output,
            sigma,
            seed,
            render,
        } => {
            let colony = io::load_skeletons(&skeletons)?;
            let settings = render.settings(&colony);
            let clean = render_synthetic(&colony, &settings)?;
            let img: ImageGrid = add_noise(&clean, sigma * settings.contrast(), seed)?;
            io::save_image(&output, &img)
        }
        Command::Eval {
            gt,
            pred,
            output,
            model,
        } => {
            let report = evaluate(
                &io::load_skeletons(&gt)?,
                &io::load_skeletons(&pred)?,
                model,
            )?;
            let mut rows: Vec<Vec<String>> = report
                .per_cell
                .iter()
                .enumerate()
                .map(|(k, c)| {
                    vec![
                        k.to_string(),
                        format!("{:.6}", c.hausdorff),
                        format!("{:.6}", c.mean),
                    ]
                })
                .collect();
            rows.push(vec![
                "all".into(),
                format!("{:.6}", report.hausdorff),
                format!("{:.6}", report.mean_symmetric_distance),
            ]);
            emit(
                output.as_deref(),
                &io::format_table(&["cell", "hausdorff_px", "mean_px"], &rows),
            )
        }
        Command::Sweep {
            skeletons,
            sigmas,
            output,
            jitter,
            seed,
            params,
            render,
        } => {
            let colony = io::load_skeletons(&skeletons)?;
            let doc = params.load()?;
            let config = SweepConfig {
                sigmas,
                jitter,
                seed,
                params: doc.energy,
                options: doc.optimize,
            };
            let rows = noise_sweep(&colony, &render.settings(&colony), &config)?;
            emit(output.as_deref(), &sweep_table(&rows))
        }
        Command::Measure {
            skeletons,
            output,
            scale,
            model,
        } => {
            if !(scale > 0.0) {
                return Err(Error::InvalidParameter("scale must be positive".into()));
            }
            let colony = io::load_skeletons(&skeletons)?;
            let rows = colony
                .iter()
                .enumerate()
                .map(|(k, s)| {
                    let m = measure(s, model)?.scaled(scale);
                    Ok(vec![
                        k.to_string(),
                        format!("{:.6}", m.length),
                        format!("{:.6}", m.width),
                        format!("{:.6}", m.perimeter),
                        format!("{:.4}", m.orientation),
                    ])
                })
                .collect::<Result<Vec<_>>>()?;
            let unit = if scale == 1.0 { "px" } else { "units" };
            let header = [
                "cell".to_string(),
                format!("length_{unit}"),
                format!("width_{unit}"),
                format!("perimeter_{unit}"),
                "orientation_deg".to_string(),
            ];
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            emit(output.as_deref(), &io::format_table(&header, &rows))
        }
        Command::Locate {
            skeletons,
            points,
            output,
            slack,
            model,
        } => {
            if !(slack >= 0.0) {
                return Err(Error::InvalidParameter("slack must be nonnegative".into()));
            }
            let colony = io::load_skeletons(&skeletons)?;
            let pts = io::load_points(&points)?;
            let cells = assign_points(&colony, &pts, slack, model);
            let rows: Vec<Vec<String>> = pts
                .iter()
                .zip(cells)
                .enumerate()
                .map(|(k, (&p, cell))| {
                    let mut row = vec![k.to_string(), format!("{:.6}", p.x), format!("{:.6}", p.y)];
                    match cell {
                        Some(c) => {
                            let loc = localize(&colony.cells()[c], p);
                            row.extend([
                                c.to_string(),
                                format!("{:.6}", loc.x_norm),
                                format!("{:.6}", loc.y_px),
                            ]);
                        }
                        None => row.extend(["-".into(), "nan".into(), "nan".into()]),
                    }
                    row
                })
                .collect();
            emit(
                output.as_deref(),
                &io::format_table(
                    &["point", "x_px", "y_px", "cell", "x_norm", "offset_px"],
                    &rows,
                ),
            )
        }
        Command::Outline {
            skeletons,
            output,
            step,
            model,
        } => {
            let colony = io::load_skeletons(&skeletons)?;
            let contours = colony
                .iter()
                .map(|s| dilation_outline(s, model, step))
                .collect::<Result<Vec<_>>>()?;
            emit(output.as_deref(), &io::contours_table(&contours))
        }
    }
}

/// Runs the tool on `argv` (including the program name) and returns the exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_DATA
        }
    }
}

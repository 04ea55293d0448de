//! Active skeletons for rod-shaped cells.
//!
//! A cell is modelled as an open polyline whose nodes carry a radius; the
//! cell outline is the dilation of that polyline by the linearly
//! interpolated radius. Skeletons are fitted to a grayscale image by
//! gradient descent on a weighted sum of four energies (image data,
//! curvature, radius homogeneity and inter-cell repulsion).
//!
//! The crate also contains everything needed around the optimizer:
//! initialization from binary masks, synthetic ground-truth rendering and
//! contour metrics, shape measurements, and file formats used by the
//! `rodskel` command-line tool.

pub mod cli;
pub mod energy;
mod error;
pub mod geometry;
pub mod gradients;
pub mod image;
pub mod initializer;
pub mod io;
pub mod measurements;
pub mod optimizer;
pub mod synthesis;

pub use energy::{Colony, ColonyEnergy, DataTerm, EnergyBreakdown, EnergyParams};
pub use error::{Error, Result};
pub use geometry::{Contour, DistanceModel, Point2, SegmentQuery, Skeleton, SkeletonNode};
pub use gradients::{GradientField, NodeGradient};
pub use image::{BinaryMask, ImageGrid};
pub use optimizer::{OptimizeOptions, OptimizeTrace, StopReason};

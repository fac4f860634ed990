//! Tri-view geometry SLAM core.
//!
//! An RGB-only SLAM system built on a Gaussian-splat map. Frames are tracked
//! by combining a photometric render loss with two geometric terms derived
//! from three-view correspondences (a trifocal transfer residual and a 3D
//! pointmap alignment), with the photometric weight attenuated as the map
//! goes stale. New Gaussians are seeded from the spread of their multi-view
//! 3D estimates.
//!
//! Module map:
//! - [`geom`]: rigid/similarity transforms, pinhole projection, trifocal tensors, Huber, Procrustes
//! - [`splat`]: Gaussian primitives, the CPU rasterizer and its backward pass, image losses
//! - [`matching`]: pairwise match sets, tri-view bridging, parallax filtering, match files
//! - [`tracking`]: the hybrid per-frame pose optimizer
//! - [`mapping`]: keyframes, tri-view uncertainty, Gaussian initialization, map refinement
//! - [`sim`]: synthetic scenes, trajectories and noisy pointmap matches
//! - [`eval`]: ATE / RPE / PSNR / SSIM
//! - [`pipeline`]: configuration, the frame loop, file formats used by the CLI

pub mod error;
pub mod eval;
pub mod geom;
pub mod mapping;
pub mod matching;
pub mod optim;
pub mod pipeline;
pub mod sim;
pub mod splat;
pub mod tracking;

pub use error::{Result, TvgError};

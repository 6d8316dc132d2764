//! Multi-view panoramic 3D layout reconstruction.
//!
//! The crate reconstructs absolute room-layout geometry from calibrated
//! equirectangular panoramas with known per-view 2D layouts. Each layout
//! element (floor, ceiling, wall) gets one absolute depth from a
//! layout-oriented plane-sweep cost volume compressed to a one-dimensional
//! probability map; per-view layouts are then lifted to 3D and fused into a
//! coherent scene layout.
//!
//! Module map:
//! - [`geometry`]: spherical camera model, rigid poses, plane-induced warps
//! - [`layout`]: per-view 2D layout representation and region extraction
//! - [`synth`]: synthetic room renderer with ground-truth layout/depth/semantics
//! - [`confidence`]: per-pixel contribution weights from semantics and attention
//! - [`mvs`]: layout cost volume, 1D compression, soft depth regression
//! - [`fusion`]: per-view 3D lifting and scene-level layout merging
//! - [`metrics`]: depth RMSE, scale error, and cross-view coherency
//! - [`pipeline`]: scene manifest driver tying the stages together

pub mod confidence;
pub mod error;
pub mod fusion;
pub mod geometry;
pub mod layout;
pub mod metrics;
pub mod mvs;
pub mod pipeline;
pub mod raster;
pub mod synth;

pub use error::{Error, Result};
